//! Steady states: Newton solution, stability, reduced-equation scans,
//! one-parameter continuation with fold/Hopf detection, and the first
//! Lyapunov coefficient at Hopf points.

mod branch;
mod lyapunov;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{det2, eig2_from_invariants, norm_inf, trace2, FixedLu};
use crate::model::{heat_balance_roots, ModelParams, Parameter, State};
use crate::scalar::Real;

pub use branch::{continue_branch, Branch, BranchOptions};
pub use lyapunov::{first_lyapunov_coefficient, lyapunov_first_coeff, HopfNormalForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    UnstableNode,
    UnstableFocus,
    Saddle,
}

impl Stability {
    pub fn from_invariants<T: Real>(trace: T, det: T) -> Self {
        if det < T::zero() {
            Stability::Saddle
        } else if trace < T::zero() {
            Stability::Stable
        } else if trace * trace >= T::lit(4.0) * det {
            Stability::UnstableNode
        } else {
            Stability::UnstableFocus
        }
    }

    pub fn is_stable(self) -> bool {
        self == Stability::Stable
    }

    pub fn label(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::UnstableNode => "unstable-node",
            Stability::UnstableFocus => "unstable-focus",
            Stability::Saddle => "saddle",
        }
    }
}

/// A steady state with its linearisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyPoint<T> {
    pub state: State<T>,
    /// Value of the active parameter (ambient temperature unless stated).
    pub param_value: T,
    pub trace: T,
    pub det: T,
    pub eigenvalues: [Complex<T>; 2],
    pub stability: Stability,
}

impl<T: Real> SteadyPoint<T> {
    /// Classifies `state` for parameters `p`; `param_value` is recorded as is.
    pub fn classify(p: &ModelParams<T>, state: State<T>, param_value: T) -> Self {
        let j = p.jac(state.to_array());
        let (trace, det) = (trace2(&j), det2(&j));
        Self {
            state,
            param_value,
            trace,
            det,
            eigenvalues: eig2_from_invariants(trace, det),
            stability: Stability::from_invariants(trace, det),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecialKind {
    Fold,
    Hopf,
}

impl SpecialKind {
    pub fn label(self) -> &'static str {
        match self {
            SpecialKind::Fold => "fold",
            SpecialKind::Hopf => "hopf",
        }
    }
}

/// Sign convention: `l1 > 0` is subcritical (the emerging cycle is unstable).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criticality {
    Subcritical,
    Supercritical,
}

impl Criticality {
    pub fn from_l1<T: Real>(l1: T) -> Self {
        if l1 > T::zero() {
            Criticality::Subcritical
        } else {
            Criticality::Supercritical
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Criticality::Subcritical => "subcritical",
            Criticality::Supercritical => "supercritical",
        }
    }
}

/// A fold or Hopf point on a steady-state branch.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialPoint<T> {
    pub kind: SpecialKind,
    pub parameter: Parameter,
    pub param_value: T,
    pub state: State<T>,
    pub trace: T,
    pub det: T,
    /// Angular frequency `sqrt(det)` (Hopf only).
    pub frequency: Option<T>,
    pub l1: Option<T>,
    pub criticality: Option<Criticality>,
}

/// Size of the largest term in the balances at `s`, used to make residual
/// tolerances relative for large flow rates.
pub(crate) fn residual_scale<T: Real>(p: &ModelParams<T>) -> T {
    T::one().max(p.inverse_residence_time)
}

pub(crate) fn scaled_residual<T: Real>(p: &ModelParams<T>, s: [T; 2]) -> T {
    norm_inf(&p.rhs(s)) / residual_scale(p)
}

/// Residual threshold for `solve_steady`.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 50;

/// Damped Newton iteration for a steady state starting from `guess`.
pub fn solve_steady<T: Real>(p: &ModelParams<T>, guess: &State<T>) -> Result<SteadyPoint<T>> {
    solve_steady_for(p, guess, Parameter::AmbientTemperature)
}

/// As [`solve_steady`], recording `active` as the point's parameter value.
pub fn solve_steady_for<T: Real>(p: &ModelParams<T>, guess: &State<T>, active: Parameter) -> Result<SteadyPoint<T>> {
    p.validate()?;
    if !(guess.u > T::zero()) || !guess.x.is_finite() {
        return Err(Error::Domain(format!("steady-state guess outside domain: {guess:?}")));
    }
    let tol = T::lit(STEADY_RESIDUAL_TOL);
    let mut z = guess.to_array();
    let mut res = scaled_residual(p, z);
    for it in 0..=MAX_NEWTON {
        if res < tol {
            return Ok(SteadyPoint::classify(p, State::from_array(z), p.get(active)));
        }
        if it == MAX_NEWTON {
            break;
        }
        let j = p.jac(z);
        let lu = FixedLu::new(j).ok_or(Error::Singular)?;
        let f = p.rhs(z);
        let dz = lu.solve(&[-f[0], -f[1]]);
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let trial = [z[0] + lambda * dz[0], z[1] + lambda * dz[1]];
            if trial[1] > T::zero() {
                let r = scaled_residual(p, trial);
                if r.is_finite() && r < res {
                    z = trial;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda / T::lit(2.0);
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NewtonFailure {
        iterations: MAX_NEWTON,
        residual: res.as_f64(),
        last: vec![z[0].as_f64(), z[1].as_f64()],
    })
}

/// All steady states with `u` in `[u_lo, u_hi]`, found from sign changes of
/// the reduced heat balance on an `n`-point grid refined by bisection to
/// `1e-12`; `x = f / (f + ρ)`.
pub fn reduced_scan<T: Real>(p: &ModelParams<T>, u_lo: T, u_hi: T, n: usize) -> Result<Vec<SteadyPoint<T>>> {
    p.validate()?;
    if !(u_lo < u_hi) || !(u_lo > T::zero()) || !u_hi.is_finite() {
        return Err(Error::InvalidInput(format!(
            "scan window must satisfy 0 < u_lo < u_hi (got [{u_lo}, {u_hi}])"
        )));
    }
    Ok(heat_balance_roots(p, u_lo, u_hi, n, T::lit(1e-12))
        .into_iter()
        .map(|u| {
            let s = State::new(p.quasi_steady_conversion(u), u);
            SteadyPoint::classify(p, s, p.ambient_temperature)
        })
        .collect())
}

/// Every steady state of `p` (all lie in `[u_a, u_a + min(f, σ)/(εf+ℓ)]`).
pub fn all_steady_states<T: Real>(p: &ModelParams<T>, n: usize) -> Result<Vec<SteadyPoint<T>>> {
    let lo = p.ambient_temperature;
    let hi = p.steady_temperature_bound();
    if !(hi > lo) {
        return Ok(vec![SteadyPoint::classify(p, State::new(T::one(), lo), lo)]);
    }
    reduced_scan(p, lo, hi, n)
}
