//! Limit cycles by multiple shooting, their Floquet multipliers, and
//! continuation of cycle branches emanating from Hopf points.

mod branch;
mod shooting;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    flow_with_sensitivity, integrate_from, Direction, EventFunction, EventSpec, IntegrateOptions, Sensitivity,
    Tolerances,
};
use crate::error::{Error, Result};
use crate::linalg::{eig2_from_invariants, mul2, norm_inf, trace2, Mat2};
use crate::model::{ModelParams, Parameter, State};
use crate::scalar::Real;
use crate::steady::{first_lyapunov_coefficient, solve_steady_for, SpecialKind, SpecialPoint};

pub use branch::{continue_cycles, germ_offset, CycleBranch, CycleBranchOptions};
pub(crate) use shooting::Shooting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleStability {
    Stable,
    Unstable,
}

impl CycleStability {
    pub fn label(self) -> &'static str {
        match self {
            CycleStability::Stable => "stable",
            CycleStability::Unstable => "unstable",
        }
    }
}

/// Monodromy data of a periodic orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Floquet<T> {
    pub monodromy: Mat2<T>,
    /// `[trivial, nontrivial]`.
    pub multipliers: [T; 2],
    /// `ln |nontrivial multiplier|`, finite even when the multiplier itself
    /// underflows.
    pub log_abs_nontrivial: T,
    /// `ln |det M|` accumulated from the discrete step determinants.
    pub log_det: T,
    /// `∫ trace J dτ` around the orbit.
    pub trace_integral: T,
}

impl<T: Real> Floquet<T> {
    fn from_segments(segments: &[Sensitivity<T>]) -> Self {
        let mut mono: Mat2<T> = [[T::one(), T::zero()], [T::zero(), T::one()]];
        let mut log_det = T::zero();
        let mut sign = T::one();
        let mut trace_integral = T::zero();
        for s in segments {
            mono = mul2(&s.phi, &mono);
            log_det += s.log_det;
            sign = sign * s.det_sign;
            trace_integral += s.trace_integral;
        }
        let det = sign * log_det.exp();
        let ev = eig2_from_invariants(trace2(&mono), det);
        let (a, b) = (ev[0].re, ev[1].re);
        let (trivial, other) = if (a - T::one()).abs() <= (b - T::one()).abs() { (a, b) } else { (b, a) };
        let log_abs_nontrivial = log_det - trivial.abs().ln();
        Self {
            monodromy: mono,
            multipliers: [trivial, other],
            log_abs_nontrivial,
            log_det,
            trace_integral,
        }
    }

    /// Relative mismatch between `det M` and `exp(∫ trace J)`.
    pub fn liouville_error(&self) -> T {
        ((self.log_det - self.trace_integral).exp() - T::one()).abs()
    }

    pub fn stability(&self) -> CycleStability {
        if self.log_abs_nontrivial < T::zero() {
            CycleStability::Stable
        } else {
            CycleStability::Unstable
        }
    }
}

/// A converged periodic orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit<T> {
    pub parameter: Parameter,
    pub param_value: T,
    pub period: T,
    /// Shooting nodes at `τ = i T / m`.
    pub nodes: Vec<State<T>>,
    /// Dense samples over one period starting at node 0.
    pub mesh_times: Vec<T>,
    pub mesh: Vec<State<T>>,
    pub min_u: T,
    pub max_u: T,
    pub amplitude: T,
    pub floquet: Floquet<T>,
    pub stability: CycleStability,
    /// Infinity norm of the boundary-value residual.
    pub residual: T,
}

impl<T: Real> Orbit<T> {
    /// Maximum temperature exceeds the boiling threshold.
    pub fn vented(&self, u_boil: T) -> bool {
        self.max_u > u_boil
    }
}

/// Starting data for [`find_cycle`].
#[derive(Debug, Clone, PartialEq)]
pub enum CycleSeed<T> {
    /// Small ellipse from the Hopf normal form at `hopf.param_value + offset`.
    Germ { hopf: SpecialPoint<T>, offset: T },
    /// A point on a (numerically) settled cycle and its period.
    Trajectory { state: State<T>, period: T },
    /// A previously computed orbit; its parameter value is used.
    Orbit(Orbit<T>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOptions<T> {
    /// Number of shooting segments (at least 10).
    pub segments: usize,
    pub tolerances: Tolerances<T>,
    pub residual_tol: T,
    pub max_iterations: usize,
    /// Samples per period in the output mesh.
    pub mesh_samples: usize,
    /// Double the segment count until the period changes by less than
    /// `1e-8` relative.
    pub refine: bool,
}

impl<T: Real> CycleOptions<T> {
    pub fn new(tolerances: Tolerances<T>) -> Self {
        Self {
            segments: 20,
            tolerances,
            residual_tol: T::lit(1e-9),
            max_iterations: 30,
            mesh_samples: 400,
            refine: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.segments < 10 {
            return Err(Error::InvalidInput(format!("at least 10 shooting segments required (got {})", self.segments)));
        }
        if self.mesh_samples < 200 {
            return Err(Error::InvalidInput(format!("mesh needs at least 200 samples (got {})", self.mesh_samples)));
        }
        self.tolerances.validate()
    }
}

impl Default for CycleOptions<f64> {
    fn default() -> Self {
        Self::new(Tolerances::new(1e-11, 1e-13))
    }
}

const MAX_SEGMENTS: usize = 160;
const DEGENERATE_AMPLITUDE: f64 = 1e-8;

/// Scaling of the state components: `x` is O(1), `u` varies on the scale of
/// the steady-temperature window.
pub(crate) fn state_weights<T: Real>(p: &ModelParams<T>) -> [T; 2] {
    let span = (p.steady_temperature_bound() - p.ambient_temperature).max(T::lit(1e-6));
    [T::one(), span.recip()]
}

/// Normal-form ellipse around a Hopf point: parameters, `m` nodes and the
/// period `2π/ω`.
pub(crate) fn hopf_germ<T: Real>(
    p: &ModelParams<T>,
    hopf: &SpecialPoint<T>,
    offset: T,
    m: usize,
) -> Result<(ModelParams<T>, Vec<[T; 2]>, T)> {
    if hopf.kind != SpecialKind::Hopf {
        return Err(Error::NotHopf("seed special point is a fold".into()));
    }
    let at_hopf = p.with(hopf.parameter, hopf.param_value);
    let nf = first_lyapunov_coefficient(&at_hopf, hopf.state.to_array())?;
    let q = p.with(hopf.parameter, hopf.param_value + offset);
    let ss = solve_steady_for(&q, &hopf.state, hopf.parameter)?;
    let alpha = ss.trace / T::lit(2.0);
    let r2 = -alpha / nf.l1;
    if !(r2 > T::zero()) {
        return Err(Error::DegenerateSeed(format!(
            "no small cycle on this side of the Hopf point (offset {offset}, l1 {})",
            nf.l1
        )));
    }
    let r = r2.sqrt();
    if r < T::lit(DEGENERATE_AMPLITUDE) {
        return Err(Error::DegenerateSeed(format!("germ amplitude {r} is below 1e-8")));
    }
    // Eigen-data at the shifted steady state keep the ellipse tangent to the
    // local rotation.
    let j = q.jac(ss.state.to_array());
    let det = crate::linalg::det2(&j);
    let omega2 = det - alpha * alpha;
    if !(omega2 > T::zero()) {
        return Err(Error::DegenerateSeed("offset steady state is not a focus".into()));
    }
    let omega = omega2.sqrt();
    let (mut re, mut im) = crate::linalg::complex_eigenvector(&j, num_complex::Complex::new(alpha, omega));
    let n = (re[0] * re[0] + re[1] * re[1] + im[0] * im[0] + im[1] * im[1]).sqrt();
    for k in 0..2 {
        re[k] = re[k] / n;
        im[k] = im[k] / n;
    }
    let c = ss.state.to_array();
    let nodes = (0..m)
        .map(|i| {
            let th = T::TAU() * T::from_count(i) / T::from_count(m);
            let (s, co) = th.sin_cos();
            [c[0] + r * (co * im[0] + s * re[0]), c[1] + r * (co * im[1] + s * re[1])]
        })
        .collect();
    Ok((q, nodes, T::TAU() / omega))
}

fn pack<T: Real>(nodes: &[[T; 2]], period: T) -> Vec<T> {
    let mut z: Vec<T> = nodes.iter().flat_map(|s| [s[0], s[1]]).collect();
    z.push(period);
    z
}

/// Damped Newton on the square shooting system. Returns the solution and
/// its residual norm.
fn newton<T: Real>(sys: &Shooting<T>, z0: Vec<T>, opts: &CycleOptions<T>) -> Result<(Vec<T>, T)> {
    let mut z = z0;
    let fail = |z: &[T], res: T, it: usize| Error::NewtonFailure {
        iterations: it,
        residual: res.as_f64(),
        last: z.iter().map(|v| v.as_f64()).collect(),
    };
    let mut ev = sys.evaluate(&z).ok_or_else(|| fail(&z, T::infinity(), 0))?;
    let mut res = norm_inf(&ev.residual);
    for it in 0..opts.max_iterations {
        if res < opts.residual_tol {
            return Ok((z, res));
        }
        let rhs: Vec<T> = ev.residual.iter().map(|v| -*v).collect();
        let dz = ev.jacobian.clone().solve(&rhs).map_err(|_| fail(&z, res, it))?;
        let mut lambda = T::one();
        let mut accepted = None;
        for _ in 0..12 {
            let trial: Vec<T> = z.iter().zip(&dz).map(|(a, d)| *a + lambda * *d).collect();
            if let Some(e) = sys.evaluate(&trial) {
                let r = norm_inf(&e.residual);
                if r < res {
                    accepted = Some((trial, e, r));
                    break;
                }
            }
            lambda = lambda / T::lit(2.0);
        }
        match accepted {
            Some((zt, e, r)) => {
                z = zt;
                ev = e;
                res = r;
            }
            None => return Err(fail(&z, res, it)),
        }
    }
    if res < opts.residual_tol {
        Ok((z, res))
    } else {
        Err(fail(&z, res, opts.max_iterations))
    }
}

/// Builds the orbit record (mesh, extremes, Floquet data) from converged
/// shooting unknowns.
pub(crate) fn assemble<T: Real>(
    q: &ModelParams<T>,
    parameter: Parameter,
    nodes: &[[T; 2]],
    period: T,
    residual: T,
    segments: &[Sensitivity<T>],
    opts: &CycleOptions<T>,
) -> Result<Orbit<T>> {
    let m = nodes.len();
    let dt = period / T::from_count(m);
    let n = opts.mesh_samples;
    let mut mesh_times = Vec::with_capacity(n + m);
    let mut mesh = Vec::with_capacity(n + m);
    let mut min_u = T::infinity();
    let mut max_u = T::neg_infinity();
    let free = ModelParams { boiling_temperature: T::infinity(), ..*q };
    for (i, s) in nodes.iter().enumerate() {
        let t0 = dt * T::from_count(i);
        let t1 = if i + 1 == m { period } else { dt * T::from_count(i + 1) };
        let mut o = IntegrateOptions::new(opts.tolerances);
        o.output_times = (0..n)
            .map(|k| period * T::from_count(k) / T::from_count(n))
            .filter(|&t| t > t0 && t < t1)
            .collect();
        o.events = [("max", Direction::Falling), ("min", Direction::Rising)]
            .into_iter()
            .map(|(name, direction)| EventSpec {
                name: name.into(),
                function: EventFunction::TemperatureRate,
                direction,
                halting: false,
            })
            .collect();
        let traj = integrate_from(&free, t0, &State::from_array(*s), t1, &o)?;
        for (t, st) in traj.times.iter().zip(&traj.states) {
            if *t < t1 {
                mesh_times.push(*t);
                mesh.push(*st);
            }
            min_u = min_u.min(st.u);
            max_u = max_u.max(st.u);
        }
        for e in &traj.events {
            min_u = min_u.min(e.state.u);
            max_u = max_u.max(e.state.u);
        }
    }
    let floquet = Floquet::from_segments(segments);
    Ok(Orbit {
        parameter,
        param_value: q.get(parameter),
        period,
        nodes: nodes.iter().map(|s| State::from_array(*s)).collect(),
        mesh_times,
        mesh,
        min_u,
        max_u,
        amplitude: max_u - min_u,
        stability: floquet.stability(),
        floquet,
        residual,
    })
}

/// Nodes `m` equally spaced in time along one period from `start`.
fn sample_nodes<T: Real>(q: &ModelParams<T>, start: [T; 2], period: T, m: usize, tol: Tolerances<T>) -> Result<Vec<[T; 2]>> {
    let dt = period / T::from_count(m);
    let mut nodes = vec![start];
    let mut s = start;
    for _ in 1..m {
        s = flow_with_sensitivity(q, s, dt, tol, None, false)?.end;
        nodes.push(s);
    }
    Ok(nodes)
}

/// Inserts midpoints between nodes, doubling the segment count.
fn double_nodes<T: Real>(q: &ModelParams<T>, nodes: &[[T; 2]], period: T, tol: Tolerances<T>) -> Result<Vec<[T; 2]>> {
    let half = period / T::from_count(2 * nodes.len());
    let mut out = Vec::with_capacity(2 * nodes.len());
    for s in nodes {
        out.push(*s);
        out.push(flow_with_sensitivity(q, *s, half, tol, None, false)?.end);
    }
    Ok(out)
}

fn spread<T: Real>(nodes: &[[T; 2]]) -> T {
    let mut lo = [T::infinity(); 2];
    let mut hi = [T::neg_infinity(); 2];
    for s in nodes {
        for k in 0..2 {
            lo[k] = lo[k].min(s[k]);
            hi[k] = hi[k].max(s[k]);
        }
    }
    (hi[0] - lo[0]).max(hi[1] - lo[1])
}

/// Solves the periodic boundary-value problem by multiple shooting from
/// `seed`, at fixed parameters. `active` names the parameter recorded on the
/// orbit (and shifted by a germ seed).
pub fn find_cycle<T: Real>(
    p: &ModelParams<T>,
    active: Parameter,
    seed: &CycleSeed<T>,
    opts: &CycleOptions<T>,
) -> Result<Orbit<T>> {
    opts.validate()?;
    let p = ModelParams { boiling_temperature: T::infinity(), ..*p };
    p.validate()?;
    let (q, mut nodes, mut period) = match seed {
        CycleSeed::Germ { hopf, offset } => {
            let (q, nodes, period) = hopf_germ(&p, hopf, *offset, opts.segments)?;
            (q, nodes, period)
        }
        CycleSeed::Trajectory { state, period } => {
            if !(*period > T::zero()) {
                return Err(Error::InvalidInput(format!("seed period must be positive (got {period})")));
            }
            let nodes = sample_nodes(&p, state.to_array(), *period, opts.segments, opts.tolerances)?;
            (p, nodes, *period)
        }
        CycleSeed::Orbit(o) => {
            let q = p.with(o.parameter, o.param_value);
            let nodes = sample_nodes(&q, o.nodes[0].to_array(), o.period, opts.segments, opts.tolerances)?;
            (q, nodes, o.period)
        }
    };
    if spread(&nodes) < T::lit(DEGENERATE_AMPLITUDE) {
        return Err(Error::DegenerateSeed(format!(
            "seed amplitude {} is below 1e-8",
            spread(&nodes)
        )));
    }
    let w = state_weights(&q);
    loop {
        let m = nodes.len();
        let sys = Shooting::new(q, active, m, opts.tolerances, w, false);
        let z0 = pack(&nodes, period);
        sys.set_reference(&z0);
        let (z, res) = newton(&sys, z0, opts)?;
        let new_nodes = sys.nodes(&z);
        let new_period = z[2 * m];
        if spread(&new_nodes) < T::lit(DEGENERATE_AMPLITUDE) {
            return Err(Error::DegenerateSeed("shooting collapsed onto the steady state".into()));
        }
        let converged = (new_period - period).abs() < T::lit(1e-8) * new_period;
        let first = m == opts.segments;
        if !opts.refine || (!first && converged) || 2 * m > MAX_SEGMENTS {
            let ev = sys.evaluate(&z).expect("converged point evaluates");
            return assemble(&q, active, &new_nodes, new_period, res, &ev.segments, opts);
        }
        nodes = double_nodes(&q, &new_nodes, new_period, opts.tolerances)?;
        period = new_period;
    }
}

/// Floquet multipliers of `orbit` by integrating the variational equations
/// over each shooting segment.
pub fn floquet<T: Real>(p: &ModelParams<T>, orbit: &Orbit<T>, tolerances: Tolerances<T>) -> Result<Floquet<T>> {
    let q = ModelParams { boiling_temperature: T::infinity(), ..p.with(orbit.parameter, orbit.param_value) };
    let m = orbit.nodes.len();
    if m == 0 || !(orbit.period > T::zero()) {
        return Err(Error::InvalidInput("orbit has no nodes".into()));
    }
    let dt = orbit.period / T::from_count(m);
    let segments = orbit
        .nodes
        .iter()
        .map(|s| flow_with_sensitivity(&q, s.to_array(), dt, tolerances, None, false).map(|f| f.sensitivity))
        .collect::<Result<Vec<_>>>()?;
    Ok(Floquet::from_segments(&segments))
}
