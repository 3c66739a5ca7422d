use crate::continuation::{refine_between, tangent_at, Settings, Tracer};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Parameter};
use crate::periodic::{assemble, find_cycle, state_weights, CycleOptions, CycleSeed, Orbit, Shooting};
use crate::scalar::Real;
use crate::steady::{first_lyapunov_coefficient, solve_steady_for, SpecialKind, SpecialPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleBranchOptions<T> {
    pub cycle: CycleOptions<T>,
    pub ds: T,
    pub ds_min: T,
    pub ds_max: T,
    pub max_orbits: usize,
    /// Radius of the first orbit in normal-form coordinates.
    pub initial_amplitude: T,
    /// Continuation stops once the period exceeds this.
    pub max_period: T,
}

impl<T: Real> CycleBranchOptions<T> {
    pub fn new(cycle: CycleOptions<T>) -> Self {
        Self {
            cycle: CycleOptions { refine: false, ..cycle },
            ds: T::lit(1e-2),
            ds_min: T::lit(1e-6),
            ds_max: T::lit(5e-2),
            max_orbits: 2000,
            initial_amplitude: T::lit(1e-3),
            max_period: T::lit(1e4),
        }
    }
}

impl Default for CycleBranchOptions<f64> {
    fn default() -> Self {
        Self::new(CycleOptions::default())
    }
}

/// Branch of periodic orbits continued from a Hopf point.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleBranch<T> {
    pub parameter: Parameter,
    pub hopf: SpecialPoint<T>,
    pub orbits: Vec<Orbit<T>>,
    /// Parameter values at which the branch turns.
    pub cycle_folds: Vec<T>,
    /// Indices into `orbits` of the refined fold orbits.
    pub fold_indices: Vec<usize>,
    pub diagnostics: Vec<String>,
}

impl<T: Real> CycleBranch<T> {
    pub fn amplitudes(&self) -> Vec<T> {
        self.orbits.iter().map(|o| o.amplitude).collect()
    }
}

/// Rate of change of the real part of the critical eigenvalues along the
/// steady branch through `hopf`.
fn alpha_slope<T: Real>(p: &ModelParams<T>, hopf: &SpecialPoint<T>, width: T) -> Result<T> {
    let h = width * T::lit(1e-6);
    let mut tr = [T::zero(); 2];
    for (k, sgn) in [(0, T::one()), (1, -T::one())] {
        let q = p.with(hopf.parameter, hopf.param_value + sgn * h);
        tr[k] = solve_steady_for(&q, &hopf.state, hopf.parameter)?.trace;
    }
    Ok((tr[0] - tr[1]) / (T::lit(4.0) * h))
}

/// Parameter offset from `hopf` at which the normal-form germ has the given
/// radius, `δ = -l1 r² / (dα/dλ)`. `scale` sets the finite-difference step
/// (a typical parameter span).
pub fn germ_offset<T: Real>(p: &ModelParams<T>, hopf: &SpecialPoint<T>, radius: T, scale: T) -> Result<T> {
    let at_hopf = p.with(hopf.parameter, hopf.param_value);
    let nf = first_lyapunov_coefficient(&at_hopf, hopf.state.to_array())?;
    let slope = alpha_slope(p, hopf, scale)?;
    if slope == T::zero() {
        return Err(Error::NotHopf("eigenvalues cross the axis with zero speed".into()));
    }
    Ok(-nf.l1 * radius * radius / slope)
}

/// Continues the cycles born at `from_hopf` in its parameter over `range`.
///
/// The first orbit is a normal-form germ of radius `initial_amplitude`.
/// Continuation proceeds away from the Hopf point and stops when the
/// parameter leaves `range`, the period exceeds `max_period`, the orbit
/// collapses onto a steady state, or the corrector fails. Cycle folds are
/// detected by a sign change of the parameter component of the tangent.
pub fn continue_cycles<T: Real>(
    p: &ModelParams<T>,
    from_hopf: &SpecialPoint<T>,
    range: (T, T),
    opts: &CycleBranchOptions<T>,
) -> Result<CycleBranch<T>> {
    if from_hopf.kind != SpecialKind::Hopf {
        return Err(Error::NotHopf("cycle continuation needs a Hopf point".into()));
    }
    if !(range.0 < range.1) || !(from_hopf.param_value >= range.0 && from_hopf.param_value <= range.1) {
        return Err(Error::InvalidInput(format!(
            "range [{}, {}] must be increasing and contain the Hopf point {}",
            range.0, range.1, from_hopf.param_value
        )));
    }
    let p = ModelParams { boiling_temperature: T::infinity(), ..*p };
    let active = from_hopf.parameter;
    let at_hopf = p.with(active, from_hopf.param_value);
    let width = range.1 - range.0;
    let offset = germ_offset(&p, from_hopf, opts.initial_amplitude, width)?;
    let seed = find_cycle(&p, active, &CycleSeed::Germ { hopf: from_hopf.clone(), offset }, &opts.cycle)?;

    let seed_amplitude = seed.amplitude;
    let m = seed.nodes.len();
    let w = state_weights(&at_hopf);
    let sys = Shooting::new(p, active, m, opts.cycle.tolerances, w, true);
    let mut z0: Vec<T> = seed.nodes.iter().flat_map(|s| [s.x, s.u]).collect();
    z0.push(seed.period);
    z0.push(seed.param_value);
    sys.set_reference(&z0);
    let root_m = T::from_count(m).sqrt();
    let mut weights: Vec<T> = (0..m).flat_map(|_| [w[0] / root_m, w[1] / root_m]).collect();
    weights.push(seed.period.recip());
    weights.push(width.recip());
    let centre = from_hopf.state;
    let mut orient: Vec<T> = seed.nodes.iter().flat_map(|s| [s.x - centre.x, s.u - centre.u]).collect();
    orient.push(T::zero());
    orient.push(offset);
    let settings = Settings::new(opts.ds, opts.ds_min, opts.ds_max, opts.cycle.residual_tol);
    let mut tracer = Tracer::new(&sys, weights.clone(), settings, z0, &orient)?;

    let mut branch = CycleBranch {
        parameter: active,
        hopf: from_hopf.clone(),
        orbits: vec![seed],
        cycle_folds: Vec::new(),
        fold_indices: Vec::new(),
        diagnostics: Vec::new(),
    };
    let lam = 2 * m + 1;
    let build = |z: &[T]| -> Result<Orbit<T>> {
        let ev = sys.evaluate(z).ok_or_else(|| Error::Domain("orbit left the domain".into()))?;
        let res = crate::linalg::norm_inf(&ev.residual);
        let q = sys.params_at(z);
        assemble(&q, active, &sys.nodes(z), z[2 * m], res, &ev.segments, &opts.cycle)
    };
    while branch.orbits.len() < opts.max_orbits {
        let prev = tracer.current().clone();
        let next = match tracer.advance() {
            Ok(pt) => pt.clone(),
            Err(e) => {
                branch.diagnostics.push(format!("cycle corrector failed near {active} = {}: {e}", prev.z[lam]));
                break;
            }
        };
        if next.z[lam] < range.0 || next.z[lam] > range.1 {
            branch.diagnostics.push(format!("left the {active} window"));
            break;
        }
        let orbit = build(&next.z)?;
        // Back at a Hopf point (the branch would continue through it with
        // reflected orbits).
        if orbit.amplitude < seed_amplitude / T::lit(2.0) {
            branch.orbits.push(orbit);
            branch.diagnostics.push(format!("orbits shrank onto a Hopf point at {active} = {}", next.z[lam]));
            break;
        }
        if (prev.tangent[lam] < T::zero()) != (next.tangent[lam] < T::zero()) {
            let test = |z: &[T]| tangent_at(&sys, &weights, z, &prev.tangent).map(|t| t[lam]);
            match refine_between(&sys, &weights, &prev.z, &next.z, opts.cycle.residual_tol, T::lit(1e-8), test) {
                Some(z) => {
                    let turn = build(&z)?;
                    if turn.amplitude < seed_amplitude / T::lit(2.0) {
                        branch.orbits.push(turn);
                        branch.diagnostics.push(format!("orbits shrank onto a Hopf point at {active} = {}", z[lam]));
                        break;
                    }
                    branch.cycle_folds.push(z[lam]);
                    branch.fold_indices.push(branch.orbits.len());
                    branch.orbits.push(turn);
                }
                None => branch.diagnostics.push(format!("cycle fold near {active} = {} not refined", next.z[lam])),
            }
        }
        sys.set_reference(&next.z);
        let long = orbit.period > opts.max_period;
        branch.orbits.push(orbit);
        if long {
            branch.diagnostics.push(format!("period exceeded {}", opts.max_period));
            break;
        }
    }
    if branch.orbits.len() >= opts.max_orbits {
        branch.diagnostics.push(format!("stopped after {} orbits", opts.max_orbits));
    }
    Ok(branch)
}
