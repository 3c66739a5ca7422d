use crate::continuation::{polish, refine_between, System, Settings, Tracer};
use crate::error::{Error, Result};
use crate::linalg::{det2, trace2, Matrix};
use crate::model::{ModelParams, Parameter, State};
use crate::scalar::Real;
use crate::steady::lyapunov::first_lyapunov_coefficient;
use crate::steady::{all_steady_states, residual_scale, solve_steady_for, Criticality, SpecialKind, SpecialPoint, SteadyPoint};

/// Steady-state equations in `(x, u, λ)`.
pub(crate) struct SteadySystem<T> {
    pub p: ModelParams<T>,
    pub active: Parameter,
}

impl<T: Real> SteadySystem<T> {
    pub fn at(&self, z: &[T]) -> ModelParams<T> {
        self.p.with(self.active, z[2])
    }

    fn admissible(&self, z: &[T]) -> bool {
        z.iter().all(|v| v.is_finite())
            && z[1] > T::zero()
            && match self.active {
                Parameter::AmbientTemperature => z[2] > T::zero(),
                Parameter::InverseResidenceTime | Parameter::HeatCapacity => z[2] > T::zero(),
                Parameter::HeatLoss => z[2] >= T::zero(),
            }
    }
}

impl<T: Real> System<T> for SteadySystem<T> {
    fn unknowns(&self) -> usize {
        3
    }

    fn residual(&self, z: &[T]) -> Option<Vec<T>> {
        if !self.admissible(z) {
            return None;
        }
        let q = self.at(z);
        let s = residual_scale(&q);
        let f = q.rhs([z[0], z[1]]);
        Some(vec![f[0] / s, f[1] / s])
    }

    fn jacobian(&self, z: &[T]) -> Option<Matrix<T>> {
        if !self.admissible(z) {
            return None;
        }
        let q = self.at(z);
        let s = residual_scale(&q);
        let j = q.jac([z[0], z[1]]);
        let dp = q.param_derivative([z[0], z[1]], self.active);
        let mut m = Matrix::zeros(2, 3);
        for r in 0..2 {
            m[(r, 0)] = j[r][0] / s;
            m[(r, 1)] = j[r][1] / s;
            m[(r, 2)] = dp[r] / s;
        }
        Some(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchOptions<T> {
    /// Initial, minimum and maximum arclength steps in scaled units.
    pub ds: T,
    pub ds_min: T,
    pub ds_max: T,
    pub max_points: usize,
    /// Residual tolerance of the corrector (relative to `max(1, f)`).
    pub residual_tol: T,
    /// Parameter values at which a point is placed exactly.
    pub landmarks: Vec<T>,
    /// Grid size for the root scans that seed the branch.
    pub scan_points: usize,
}

impl<T: Real> BranchOptions<T> {
    pub fn new(ds: T) -> Self {
        Self {
            ds,
            ds_min: T::lit(1e-6),
            ds_max: T::lit(1e-2),
            max_points: 20_000,
            residual_tol: T::lit(1e-12),
            landmarks: Vec::new(),
            scan_points: 10_000,
        }
    }
}

impl Default for BranchOptions<f64> {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

/// Steady-state branch over a parameter interval. Points from separate
/// connected pieces are stored consecutively; `segments` holds the index of
/// the first point of each piece.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub parameter: Parameter,
    pub range: (T, T),
    pub points: Vec<SteadyPoint<T>>,
    pub specials: Vec<SpecialPoint<T>>,
    pub segments: Vec<usize>,
    /// Non-fatal problems (e.g. a piece truncated after corrector failure).
    pub diagnostics: Vec<String>,
}

impl<T: Real> Branch<T> {
    /// Points of each connected piece.
    pub fn pieces(&self) -> Vec<&[SteadyPoint<T>]> {
        let mut out = Vec::new();
        for (k, &start) in self.segments.iter().enumerate() {
            let end = self.segments.get(k + 1).copied().unwrap_or(self.points.len());
            out.push(&self.points[start..end]);
        }
        out
    }

    /// Branch points lying exactly at parameter value `v` (landmarks and
    /// endpoints).
    pub fn points_at(&self, v: T) -> Vec<&SteadyPoint<T>> {
        self.points.iter().filter(|pt| pt.param_value == v).collect()
    }

    pub fn hopf_points(&self) -> impl Iterator<Item = &SpecialPoint<T>> {
        self.specials.iter().filter(|s| s.kind == SpecialKind::Hopf)
    }

    pub fn fold_points(&self) -> impl Iterator<Item = &SpecialPoint<T>> {
        self.specials.iter().filter(|s| s.kind == SpecialKind::Fold)
    }
}

fn special_at<T: Real>(sys: &SteadySystem<T>, z: &[T], kind: SpecialKind) -> SpecialPoint<T> {
    let q = sys.at(z);
    let s = [z[0], z[1]];
    let j = q.jac(s);
    let (trace, det) = (trace2(&j), det2(&j));
    let mut sp = SpecialPoint {
        kind,
        parameter: sys.active,
        param_value: z[2],
        state: State::new(z[0], z[1]),
        trace,
        det,
        frequency: None,
        l1: None,
        criticality: None,
    };
    if kind == SpecialKind::Hopf {
        if let Ok(nf) = first_lyapunov_coefficient(&q, s) {
            sp.frequency = Some(nf.frequency);
            sp.l1 = Some(nf.l1);
            sp.criticality = Some(Criticality::from_l1(nf.l1));
        } else if det > T::zero() {
            sp.frequency = Some(det.sqrt());
        }
    }
    sp
}

fn invariants<T: Real>(sys: &SteadySystem<T>, z: &[T]) -> (T, T) {
    let j = sys.at(z).jac([z[0], z[1]]);
    (trace2(&j), det2(&j))
}

/// Scaling of `(x, u, λ)` for arclength measurement.
fn weights<T: Real>(p: &ModelParams<T>, active: Parameter, range: (T, T)) -> Vec<T> {
    let width = range.1 - range.0;
    let mut span_u = p.steady_temperature_bound() - p.ambient_temperature;
    if active == Parameter::AmbientTemperature {
        span_u = span_u.max(width);
    }
    vec![T::one(), span_u.max(T::lit(1e-6)).recip(), width.recip()]
}

struct Piece<T> {
    points: Vec<SteadyPoint<T>>,
    specials: Vec<SpecialPoint<T>>,
    diagnostic: Option<String>,
}

enum Marker<T> {
    Special(SpecialKind),
    Landmark(T),
    Bound(T),
}

fn trace_piece<T: Real>(
    sys: &SteadySystem<T>,
    w: &[T],
    range: (T, T),
    opts: &BranchOptions<T>,
    start: Vec<T>,
    direction: T,
) -> Result<Piece<T>> {
    let settings = Settings::new(opts.ds, opts.ds_min, opts.ds_max, opts.residual_tol);
    let dir = [T::zero(), T::zero(), direction];
    let mut tracer = Tracer::new(sys, w.to_vec(), settings, start.clone(), &dir)?;
    let classify = |z: &[T]| SteadyPoint::classify(&sys.at(z), State::new(z[0], z[1]), z[2]);
    let mut piece = Piece { points: vec![classify(&start)], specials: Vec::new(), diagnostic: None };
    let refine_tol = T::lit(1e-12);
    loop {
        if piece.points.len() >= opts.max_points {
            piece.diagnostic = Some(format!("stopped after {} points", opts.max_points));
            break;
        }
        let prev = tracer.current().clone();
        let next = match tracer.advance() {
            Ok(pt) => pt.clone(),
            Err(e) => {
                piece.diagnostic = Some(format!(
                    "corrector failed near {} = {}: {e}",
                    sys.active,
                    prev.z[2]
                ));
                break;
            }
        };
        let (la, lb) = (prev.z[2], next.z[2]);
        let mut found: Vec<(Marker<T>, Vec<T>)> = Vec::new();
        let refine = |test: &dyn Fn(&[T]) -> Option<T>| {
            refine_between(sys, w, &prev.z, &next.z, opts.residual_tol, refine_tol, test)
        };
        let (ta, da) = invariants(sys, &prev.z);
        let (tb, db) = invariants(sys, &next.z);
        // The step may also pass a fold, so det J is checked at the zero.
        if (ta < T::zero()) != (tb < T::zero()) && (da > T::zero() || db > T::zero()) {
            if let Some(z) = refine(&|z: &[T]| Some(invariants(sys, z).0)) {
                let z = polish(sys, &z, opts.residual_tol, |z: &[T]| Some(invariants(sys, z).0));
                if invariants(sys, &z).1 > T::zero() {
                    found.push((Marker::Special(SpecialKind::Hopf), z));
                }
            }
        }
        if (prev.tangent[2] < T::zero()) != (next.tangent[2] < T::zero()) {
            if let Some(z) = refine(&|z: &[T]| Some(invariants(sys, z).1)) {
                let z = polish(sys, &z, opts.residual_tol, |z: &[T]| Some(invariants(sys, z).1));
                found.push((Marker::Special(SpecialKind::Fold), z));
            }
        }
        for &lm in &opts.landmarks {
            if (la < lm) != (lb < lm) && lm > range.0 && lm < range.1 {
                if let Some(mut z) = refine(&|z: &[T]| Some(z[2] - lm)) {
                    z[2] = lm;
                    found.push((Marker::Landmark(lm), z));
                }
            }
        }
        let exit = if lb > range.1 {
            Some(range.1)
        } else if lb < range.0 {
            Some(range.0)
        } else {
            None
        };
        let mut end_s = T::infinity();
        if let Some(bound) = exit {
            if let Some(mut z) = refine(&|z: &[T]| Some(z[2] - bound)) {
                z[2] = bound;
                end_s = chord_position(w, &prev.z, &next.z, &z);
                found.push((Marker::Bound(bound), z));
            }
        }
        found.sort_by(|a, b| {
            chord_position(w, &prev.z, &next.z, &a.1)
                .partial_cmp(&chord_position(w, &prev.z, &next.z, &b.1))
                .unwrap()
        });
        for (marker, z) in found {
            let s = chord_position(w, &prev.z, &next.z, &z);
            if s > end_s {
                continue;
            }
            match marker {
                Marker::Special(kind) => {
                    let in_range = z[2] >= range.0 && z[2] <= range.1;
                    if in_range {
                        piece.specials.push(special_at(sys, &z, kind));
                        piece.points.push(classify(&z));
                    }
                }
                Marker::Landmark(_) | Marker::Bound(_) => piece.points.push(classify(&z)),
            }
        }
        if exit.is_some() {
            if end_s.is_infinite() {
                piece.diagnostic = Some(format!("could not land on the end of the {} window", sys.active));
            }
            break;
        }
        piece.points.push(classify(&next.z));
        // Closed curve back at the start.
        if piece.points.len() > 10 {
            let d: T = (0..3)
                .map(|i| ((next.z[i] - start[i]) * w[i]).powi(2))
                .sum::<T>()
                .sqrt();
            if d < tracer.step_size() / T::lit(2.0) {
                piece.points.push(piece.points[0]);
                break;
            }
        }
    }
    Ok(piece)
}

fn chord_position<T: Real>(w: &[T], a: &[T], b: &[T], z: &[T]) -> T {
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..a.len() {
        let c = (b[i] - a[i]) * w[i] * w[i];
        num += c * (z[i] - a[i]);
        den += c * (b[i] - a[i]);
    }
    num / den
}

/// Continues steady states in `active` over `range`.
///
/// Every steady state at the lower end seeds a piece traced towards larger
/// parameter values; states at the upper end not reached that way seed
/// pieces traced downwards. Pieces end when they leave the window (landing
/// exactly on its edge), close on themselves, or the corrector fails at the
/// minimum step. Folds are detected by a sign change of the parameter
/// component of the tangent and refined on `det J = 0`; Hopf points by a sign
/// change of `trace J`, kept where `det J > 0` at the refined zero.
pub fn continue_branch<T: Real>(
    p: &ModelParams<T>,
    active: Parameter,
    range: (T, T),
    opts: &BranchOptions<T>,
) -> Result<Branch<T>> {
    // Boiling only matters for time integration.
    let p = &ModelParams { boiling_temperature: T::infinity(), ..*p };
    p.validate()?;
    if !(range.0 < range.1) || !range.0.is_finite() || !range.1.is_finite() {
        return Err(Error::InvalidInput(format!(
            "parameter range must be increasing and finite (got {} to {})",
            range.0, range.1
        )));
    }
    let lo_params = p.with(active, range.0);
    let hi_params = p.with(active, range.1);
    lo_params.validate()?;
    hi_params.validate()?;
    let sys = SteadySystem { p: *p, active };
    let w = weights(p, active, range);
    let mut branch = Branch {
        parameter: active,
        range,
        points: Vec::new(),
        specials: Vec::new(),
        segments: Vec::new(),
        diagnostics: Vec::new(),
    };
    let covered = |branch: &Branch<T>, bound: T, s: &State<T>| {
        branch.points.iter().any(|pt| {
            pt.param_value == bound
                && (pt.state.u - s.u).abs() * w[1] < T::lit(1e-6)
                && (pt.state.x - s.x).abs() < T::lit(1e-6)
        })
    };
    for (bound, params, direction) in [(range.0, lo_params, T::one()), (range.1, hi_params, -T::one())] {
        for seed in all_steady_states(&params, opts.scan_points)? {
            if covered(&branch, bound, &seed.state) {
                continue;
            }
            let seed = solve_steady_for(&params, &seed.state, active)?;
            let start = vec![seed.state.x, seed.state.u, bound];
            let mut piece = trace_piece(&sys, &w, range, opts, start, direction)?;
            if direction < T::zero() {
                piece.points.reverse();
                piece.specials.reverse();
            }
            // A seed point sits exactly on the bound.
            let first = if direction > T::zero() { 0 } else { piece.points.len() - 1 };
            piece.points[first].param_value = bound;
            branch.segments.push(branch.points.len());
            branch.points.extend(piece.points);
            branch.specials.extend(piece.specials);
            if let Some(d) = piece.diagnostic {
                branch.diagnostics.push(d);
            }
        }
    }
    Ok(branch)
}
