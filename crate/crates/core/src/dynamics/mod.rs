//! Stiff time integration of the scaled balances, runaway detection and
//! attractor classification.

mod integrate;
pub(crate) mod radau;
mod settle;

pub use integrate::{
    detect_runaway, flow_with_sensitivity, integrate, integrate_from, integrate_with, Direction,
    EventFunction, EventRecord, EventSpec, Flow, IntegrateOptions, Trajectory,
    EVENT_TIME_TOLERANCE,
};
pub use radau::{Sensitivity, Tolerances};
pub use settle::{settle, settle_with, transient_estimate, AttractorKind, AttractorReport, SettleOptions};

#[cfg(test)]
mod tests;
