//! Stability and bifurcation analysis of a first-order exothermic reaction in
//! a spatially homogeneous flow reactor.
//!
//! The crate covers the scaled two-variable model and its heat-rate diagram,
//! stiff time integration with runaway detection, steady-state continuation
//! with fold/Hopf detection and Lyapunov-coefficient classification, periodic
//! orbits with Floquet stability, and two-parameter Hopf and fold loci.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, which is what the solver tolerances are
//! tuned for.

pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod linalg;
pub mod loci;
pub mod model;
pub mod periodic;
pub mod scalar;
pub mod steady;

pub use error::{Error, Result};
pub use model::{Parameter, TemperatureScale};
pub use scalar::Real;

pub type DimensionalParams = model::DimensionalParams<f64>;
pub type ModelParams = model::ModelParams<f64>;
pub type State = model::State<f64>;
pub type RateDiagram = model::RateDiagram<f64>;
pub type Preset = model::Preset<f64>;
pub type Calibration = model::Calibration<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type AttractorReport = dynamics::AttractorReport<f64>;
pub type SteadyPoint = steady::SteadyPoint<f64>;
pub type SpecialPoint = steady::SpecialPoint<f64>;
pub type Branch = steady::Branch<f64>;
pub type Orbit = periodic::Orbit<f64>;
pub type CycleBranch = periodic::CycleBranch<f64>;
pub type Locus = loci::Locus<f64>;
pub type Loci = loci::Loci<f64>;
pub type LociWindow = loci::LociWindow<f64>;
