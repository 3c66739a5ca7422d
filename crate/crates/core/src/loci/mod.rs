//! Two-parameter loci of Hopf points and steady-state turning points in the
//! `(u_a, f)` plane, and the regime map they bound.
//!
//! A locus is traced with pseudo-arclength continuation of the steady-state
//! equations augmented by `trace J = 0` (Hopf) or `det J = 0` (fold), in the
//! unknowns `(x, u, u_a, ln f)`.

mod augmented;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::continuation::{correct_on_plane, polish, refine_between, tangent_at, Settings, System, Tracer};
use crate::error::{Error, Result};
use crate::model::{ModelParams, State, TemperatureScale};
use crate::scalar::Real;
use crate::steady::{all_steady_states, SpecialKind, SpecialPoint};

use augmented::Augmented;

/// Rectangle in `(u_a, f)`; both edges inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LociWindow<T> {
    pub ambient: (T, T),
    pub flow: (T, T),
}

impl<T: Real> LociWindow<T> {
    pub fn new(ambient: (T, T), flow: (T, T)) -> Result<Self> {
        let w = Self { ambient, flow };
        w.validate()?;
        Ok(w)
    }

    /// Window given by ambient temperatures in kelvin.
    pub fn from_kelvin(scale: &TemperatureScale<T>, kelvin: (T, T), flow: (T, T)) -> Result<Self> {
        Self::new(
            (scale.to_dimensionless(kelvin.0), scale.to_dimensionless(kelvin.1)),
            flow,
        )
    }

    /// 250–450 K and `f` from `1e-2` to `1e6`.
    pub fn standard(scale: &TemperatureScale<T>) -> Self {
        Self::from_kelvin(scale, (T::lit(250.0), T::lit(450.0)), (T::lit(1e-2), T::lit(1e6)))
            .expect("standard window is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.ambient;
        let (c, d) = self.flow;
        if !(T::zero() < a && a < b && b.is_finite() && T::zero() < c && c < d && d.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "window needs 0 < u_a_lo < u_a_hi and 0 < f_lo < f_hi (got u_a [{a}, {b}], f [{c}, {d}])"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, u_a: T, f: T) -> bool {
        u_a >= self.ambient.0 && u_a <= self.ambient.1 && f >= self.flow.0 && f <= self.flow.1
    }

    fn log_flow(&self) -> (T, T) {
        (self.flow.0.ln(), self.flow.1.ln())
    }

    /// Smallest scaled distance to an edge; negative outside.
    fn margin(&self, z: &[T]) -> T {
        let (a, b) = self.ambient;
        let (c, d) = self.log_flow();
        let wa = b - a;
        let wf = d - c;
        ((z[2] - a) / wa).min((b - z[2]) / wa).min((z[3] - c) / wf).min((d - z[3]) / wf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocusKind {
    Hopf,
    Fold,
}

impl LocusKind {
    pub fn label(self) -> &'static str {
        match self {
            LocusKind::Hopf => "hopf",
            LocusKind::Fold => "fold",
        }
    }
}

/// Why one end of a locus stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Window,
    Closed,
    /// Hopf locus reached `det J = 0`.
    BogdanovTakens,
    CorrectorFailure,
    PointLimit,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::Window => "window",
            Termination::Closed => "closed",
            Termination::BogdanovTakens => "bogdanov-takens",
            Termination::CorrectorFailure => "corrector-failure",
            Termination::PointLimit => "point-limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusPoint<T> {
    pub u_a: T,
    pub f: T,
    pub state: State<T>,
    pub trace: T,
    pub det: T,
    /// Max-norm residual of the augmented system.
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Locus<T> {
    pub kind: LocusKind,
    pub points: Vec<LocusPoint<T>>,
    pub closed: bool,
    /// Termination at the first and the last point.
    pub ends: [Termination; 2],
    /// Set when no locus could be traced.
    pub reason: Option<String>,
}

impl<T: Real> Locus<T> {
    pub fn empty(kind: LocusKind, reason: impl Into<String>) -> Self {
        Self {
            kind,
            points: Vec::new(),
            closed: false,
            ends: [Termination::Window; 2],
            reason: Some(reason.into()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_residual(&self) -> T {
        self.points.iter().map(|pt| pt.residual).fold(T::zero(), T::max)
    }

    /// Ambient temperatures where the locus crosses the line `f = const`.
    pub fn crossings_at(&self, f: T) -> Vec<T> {
        self.crossings_with_trace(f).into_iter().map(|(u_a, _)| u_a).collect()
    }

    /// Crossings with `f = const` and the interpolated Jacobian trace there.
    fn crossings_with_trace(&self, f: T) -> Vec<(T, T)> {
        let y = f.ln();
        let mut out = Vec::new();
        for pair in self.points.windows(2) {
            let (ya, yb) = (pair[0].f.ln(), pair[1].f.ln());
            if (ya <= y) != (yb <= y) {
                let s = (y - ya) / (yb - ya);
                out.push((
                    pair[0].u_a + s * (pair[1].u_a - pair[0].u_a),
                    pair[0].trace + s * (pair[1].trace - pair[0].trace),
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocusOptions<T> {
    /// Initial, minimum and maximum arclength steps in window-scaled units.
    pub ds: T,
    pub ds_min: T,
    pub ds_max: T,
    /// Points per direction.
    pub max_points: usize,
    pub residual_tol: T,
    /// Number of log-spaced `f` slices searched for Hopf seeds.
    pub slices: usize,
    /// Number of log-spaced `f` values of the fold-seed sweep.
    pub sweep_points: usize,
    /// Grid size in `u` for each slice.
    pub scan_points: usize,
}

impl<T: Real> Default for LocusOptions<T> {
    fn default() -> Self {
        Self {
            ds: T::lit(2e-3),
            ds_min: T::lit(1e-9),
            ds_max: T::lit(1e-2),
            max_points: 20_000,
            residual_tol: T::lit(1e-11),
            slices: 25,
            sweep_points: 241,
            scan_points: 4000,
        }
    }
}

impl<T: Real> LocusOptions<T> {
    pub fn validate(&self) -> Result<()> {
        Settings::new(self.ds, self.ds_min, self.ds_max, self.residual_tol).validate()?;
        if self.max_points == 0 || self.slices < 2 || self.sweep_points < 2 || self.scan_points < 10 {
            return Err(Error::InvalidInput(
                "locus options need max_points > 0, slices >= 2, sweep_points >= 2 and scan_points >= 10".into(),
            ));
        }
        Ok(())
    }
}

fn weights<T: Real>(window: &LociWindow<T>) -> Vec<T> {
    let wa = (window.ambient.1 - window.ambient.0).recip();
    let (c, d) = window.log_flow();
    vec![T::one(), wa, wa, (d - c).recip()]
}

fn scaled_dist<T: Real>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter().zip(a).zip(b).map(|((&w, &a), &b)| (w * (a - b)).powi(2)).sum::<T>().sqrt()
}

fn make_point<T: Real>(sys: &Augmented<T>, z: &[T]) -> LocusPoint<T> {
    let q = sys.at(z);
    let (trace, det) = sys.invariants(z);
    LocusPoint {
        u_a: q.ambient_temperature,
        f: q.inverse_residence_time,
        state: State::new(z[0], z[1]),
        trace,
        det,
        residual: sys.residual(z).map(|r| crate::linalg::norm_inf(&r)).unwrap_or(T::infinity()),
    }
}

/// Follows the locus from `z0` in one direction.
fn trace_direction<T: Real>(
    sys: &Augmented<T>,
    w: &[T],
    window: &LociWindow<T>,
    opts: &LocusOptions<T>,
    z0: &[T],
    direction: &[T],
) -> (Vec<Vec<T>>, Termination) {
    let settings = Settings::new(opts.ds, opts.ds_min, opts.ds_max, opts.residual_tol);
    let mut tracer = match Tracer::new(sys, w.to_vec(), settings, z0.to_vec(), direction) {
        Ok(t) => t,
        Err(_) => return (Vec::new(), Termination::CorrectorFailure),
    };
    let tangent0 = tracer.current().tangent.clone();
    let tol = opts.residual_tol;
    let mut out: Vec<Vec<T>> = Vec::new();
    let mut travelled = T::zero();
    loop {
        if out.len() >= opts.max_points {
            return (out, Termination::PointLimit);
        }
        let prev = tracer.current().z.clone();
        let ds = tracer.step_size();
        let z = match tracer.advance() {
            Ok(pt) => pt.z.clone(),
            Err(_) => return (out, Termination::CorrectorFailure),
        };
        travelled += scaled_dist(w, &z, &prev);
        if window.margin(&z) < T::zero() {
            let edge = refine_between(sys, w, &prev, &z, tol, T::lit(1e-13), |v| Some(window.margin(v)));
            if let Some(e) = edge {
                out.push(e);
            }
            return (out, Termination::Window);
        }
        if sys.kind == LocusKind::Hopf && sys.scaled_det(&z) <= T::zero() {
            let test = |v: &[T]| Some(sys.scaled_det(v));
            if let Some(e) = refine_between(sys, w, &prev, &z, tol, T::lit(1e-13), test) {
                out.push(polish(sys, &e, tol, test));
            }
            return (out, Termination::BogdanovTakens);
        }
        if travelled > T::lit(4.0) * ds.max(opts.ds) && scaled_dist(w, &z, z0) < T::lit(2.0) * ds.max(opts.ds) {
            if let Some((back, _)) = correct_on_plane(sys, w, &z, z0, &tangent0, tol, 20) {
                if scaled_dist(w, &back, z0) < T::lit(1e-6) {
                    out.push(z);
                    out.push(z0.to_vec());
                    return (out, Termination::Closed);
                }
            }
        }
        out.push(z);
    }
}

/// Point on the augmented system closest to `sp` at the same `f`.
fn seed_from<T: Real>(sys: &Augmented<T>, p: &ModelParams<T>, sp: &SpecialPoint<T>, tol: T) -> Result<Vec<T>> {
    let q = p.with(sp.parameter, sp.param_value);
    let z = vec![sp.state.x, sp.state.u, q.ambient_temperature, q.inverse_residence_time.ln()];
    let w = [T::one(); 4];
    let fix = [T::zero(), T::zero(), T::zero(), T::one()];
    let (z, _) = correct_on_plane(sys, &w, &z, &z, &fix, tol, 30).ok_or_else(|| Error::NewtonFailure {
        iterations: 30,
        residual: f64::NAN,
        last: z.iter().map(|v| v.as_f64()).collect(),
    })?;
    Ok(z)
}

fn trace_locus<T: Real>(
    p: &ModelParams<T>,
    kind: LocusKind,
    start: &SpecialPoint<T>,
    window: &LociWindow<T>,
    opts: &LocusOptions<T>,
) -> Result<Locus<T>> {
    opts.validate()?;
    window.validate()?;
    let p = ModelParams { boiling_temperature: T::infinity(), ..*p };
    let sys = Augmented { p, kind };
    let z0 = seed_from(&sys, &p, start, opts.residual_tol)?;
    if !window.contains(z0[2], z0[3].exp()) {
        return Err(Error::OutsideWindow { u_a: z0[2].as_f64(), f: z0[3].exp().as_f64() });
    }
    if kind == LocusKind::Hopf && !(sys.scaled_det(&z0) > T::zero()) {
        return Err(Error::NotHopf("start point has det J <= 0".into()));
    }
    let w = weights(window);
    // Any generic direction will do for orienting the first tangent.
    let orient = [T::lit(0.13), T::lit(0.29), T::lit(0.61), T::one()];
    let t0 = tangent_at(&sys, &w, &z0, &orient).ok_or(Error::Singular)?;
    let (forward, fwd_end) = trace_direction(&sys, &w, window, opts, &z0, &t0);
    let mut zs: Vec<Vec<T>> = Vec::new();
    let mut start_end = fwd_end;
    let closed = fwd_end == Termination::Closed;
    if !closed {
        let back: Vec<T> = t0.iter().map(|&v| -v).collect();
        let (backward, back_end) = trace_direction(&sys, &w, window, opts, &z0, &back);
        zs.extend(backward.into_iter().rev());
        start_end = back_end;
    }
    zs.push(z0);
    zs.extend(forward);
    Ok(Locus {
        kind,
        points: zs.iter().map(|z| make_point(&sys, z)).collect(),
        closed,
        ends: [start_end, fwd_end],
        reason: None,
    })
}

/// Continues the Hopf locus through a Hopf point found at fixed parameters.
/// Each end stops at the window boundary, at `det J = 0`, or on corrector
/// failure; a locus returning to its start is closed.
pub fn continue_hopf_locus<T: Real>(
    p: &ModelParams<T>,
    start: &SpecialPoint<T>,
    window: &LociWindow<T>,
    opts: &LocusOptions<T>,
) -> Result<Locus<T>> {
    if start.kind != SpecialKind::Hopf {
        return Err(Error::NotHopf("start point is a fold".into()));
    }
    trace_locus(p, LocusKind::Hopf, start, window, opts)
}

/// Continues the locus of steady-state turning points through a fold.
pub fn continue_fold_locus<T: Real>(
    p: &ModelParams<T>,
    start: &SpecialPoint<T>,
    window: &LociWindow<T>,
    opts: &LocusOptions<T>,
) -> Result<Locus<T>> {
    if start.kind != SpecialKind::Fold {
        return Err(Error::InvalidInput("fold locus needs a fold start point".into()));
    }
    trace_locus(p, LocusKind::Fold, start, window, opts)
}

/// Special points of kind `kind` at fixed `f` with ambient temperature in the
/// window. Steady states at fixed `f` are parameterised by `u`, with
/// `x = f/(f+ρ)` and `u_a = u - fρ/((f+ρ)(εf+ℓ))`; the Jacobian does not
/// depend on `u_a`, so the test functions are scanned in `u` directly.
pub fn slice_special_points<T: Real>(
    p: &ModelParams<T>,
    f: T,
    kind: LocusKind,
    window: &LociWindow<T>,
    n: usize,
) -> Vec<SpecialPoint<T>> {
    let q = ModelParams { inverse_residence_time: f, ..*p };
    let k = q.cooling();
    let lo = window.ambient.0;
    let hi = window.ambient.1 + f.min(q.rate_prefactor) / k;
    let sys = Augmented { p: q, kind };
    let at = |u: T| {
        let x = q.quasi_steady_conversion(u);
        let u_a = u - q.generation(u) / k;
        [x, u, u_a, f.ln()]
    };
    let test = |u: T| sys.test(&at(u));
    let n = n.max(2);
    let mut out = Vec::new();
    let mut u0 = lo;
    let mut g0 = test(u0);
    for i in 1..=n {
        let u1 = lo + (hi - lo) * T::from_count(i) / T::from_count(n);
        let g1 = test(u1);
        if g0 == T::zero() || g0.signum() != g1.signum() {
            let (mut a, mut b, mut ga) = (u0, u1, g0);
            for _ in 0..200 {
                let m = (a + b) / T::lit(2.0);
                if m <= a || m >= b {
                    break;
                }
                let gm = test(m);
                if gm.signum() == ga.signum() && gm != T::zero() {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            let u = if ga.abs() <= test(b).abs() { a } else { b };
            let z = at(u);
            let (trace, det) = sys.invariants(&z);
            let keep = window.contains(z[2], f) && (kind == LocusKind::Fold || det > T::zero());
            if keep {
                out.push(SpecialPoint {
                    kind: match kind {
                        LocusKind::Hopf => SpecialKind::Hopf,
                        LocusKind::Fold => SpecialKind::Fold,
                    },
                    parameter: crate::model::Parameter::AmbientTemperature,
                    param_value: z[2],
                    state: State::new(z[0], z[1]),
                    trace,
                    det,
                    frequency: (kind == LocusKind::Hopf).then(|| det.sqrt()),
                    l1: None,
                    criticality: None,
                });
            }
        }
        u0 = u1;
        g0 = g1;
    }
    out
}

fn log_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * T::from_count(i) / T::from_count(n - 1)).exp()
            }
        })
        .collect()
}

/// Outcome of the logarithmic `f` sweep for turning points.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSweep<T> {
    /// First fold found, at the smallest swept `f` that has one.
    pub seed: Option<SpecialPoint<T>>,
    /// Bracket `(f without folds, f with folds)` refined by bisection.
    pub bracket: Option<(T, T)>,
}

/// Sweeps `f` logarithmically over the window for the first slice with a
/// turning point, then bisects in `ln f` for the onset.
pub fn sweep_for_folds<T: Real>(p: &ModelParams<T>, window: &LociWindow<T>, opts: &LocusOptions<T>) -> FoldSweep<T> {
    let grid = log_grid(window.flow.0, window.flow.1, opts.sweep_points);
    let has = |f: T| slice_special_points(p, f, LocusKind::Fold, window, opts.scan_points);
    let mut below: Option<T> = None;
    for &f in &grid {
        let found = has(f);
        if let Some(seed) = found.into_iter().next() {
            let bracket = below.map(|lo| {
                let (mut a, mut b) = (lo.ln(), f.ln());
                for _ in 0..60 {
                    let m = (a + b) / T::lit(2.0);
                    if has(m.exp()).is_empty() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                (a.exp(), b.exp())
            });
            let seed = SpecialPoint {
                parameter: crate::model::Parameter::InverseResidenceTime,
                param_value: f,
                ..seed
            };
            return FoldSweep { seed: Some(seed), bracket };
        }
        below = Some(f);
    }
    FoldSweep { seed: None, bracket: None }
}

/// Hopf and fold loci over a window, with the fold-onset threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Loci<T> {
    pub params: ModelParams<T>,
    pub window: LociWindow<T>,
    pub hopf: Vec<Locus<T>>,
    pub fold: Vec<Locus<T>>,
    /// Smallest `f` at which turning points occur in the window.
    pub fold_threshold: Option<T>,
    pub notes: Vec<String>,
}

/// Whether `sp` at flow rate `f` lies on one of `loci`, judged by scaled
/// distance to the polyline in `(x, u, u_a, ln f)`.
fn on_locus<T: Real>(loci: &[Locus<T>], sp: &SpecialPoint<T>, f: T, w: &[T], tol: T) -> bool {
    let z = [sp.state.x, sp.state.u, sp.param_value, f.ln()];
    let to_z = |pt: &LocusPoint<T>| [pt.state.x, pt.state.u, pt.u_a, pt.f.ln()];
    loci.iter().any(|l| {
        l.points.windows(2).any(|pair| {
            let (a, b) = (to_z(&pair[0]), to_z(&pair[1]));
            let mut num = T::zero();
            let mut den = T::zero();
            for i in 0..4 {
                num += w[i] * w[i] * (z[i] - a[i]) * (b[i] - a[i]);
                den += w[i] * w[i] * (b[i] - a[i]).powi(2);
            }
            let s = if den > T::zero() { (num / den).max(T::zero()).min(T::one()) } else { T::zero() };
            let foot: Vec<T> = (0..4).map(|i| a[i] + s * (b[i] - a[i])).collect();
            scaled_dist(w, &z, &foot) < tol
        })
    })
}

/// Traces every Hopf and fold locus component met by the slice searches.
pub fn compute_loci<T: Real>(p: &ModelParams<T>, window: &LociWindow<T>, opts: &LocusOptions<T>) -> Result<Loci<T>> {
    opts.validate()?;
    window.validate()?;
    let p = ModelParams { boiling_temperature: T::infinity(), ..*p };
    let mut notes = Vec::new();
    let w = weights(window);
    // Chords between accepted points stay within this of the curve.
    let tol = T::lit(1e-3);

    let mut slices = log_grid(window.flow.0, window.flow.1, opts.slices);
    if window.contains(window.ambient.0, p.inverse_residence_time) {
        slices.insert(0, p.inverse_residence_time);
    }
    let mut hopf: Vec<Locus<T>> = Vec::new();
    for &f in &slices {
        for sp in slice_special_points(&p, f, LocusKind::Hopf, window, opts.scan_points) {
            if on_locus(&hopf, &sp, f, &w, tol) {
                continue;
            }
            let sp = SpecialPoint { parameter: crate::model::Parameter::InverseResidenceTime, param_value: f, ..sp };
            let locus = continue_hopf_locus(&p, &sp, window, opts)?;
            hopf.push(locus);
        }
    }
    if hopf.is_empty() {
        notes.push("no Hopf point found in the window".into());
    }

    let mut fold = Vec::new();
    let sweep = sweep_for_folds(&p, window, opts);
    let mut fold_threshold = sweep.bracket.map(|(_, b)| b);
    match &sweep.seed {
        None => notes.push("no turning point found in the window".into()),
        Some(seed) => {
            let locus = continue_fold_locus(&p, seed, window, opts)?;
            if let Some(min_f) = locus.points.iter().map(|pt| pt.f).reduce(T::min) {
                fold_threshold = Some(fold_threshold.map_or(min_f, |b| b.min(min_f)));
            }
            fold.push(locus);
            // Further components show up as slice folds off the first locus.
            for f in log_grid(window.flow.0, window.flow.1, opts.slices) {
                for sp in slice_special_points(&p, f, LocusKind::Fold, window, opts.scan_points) {
                    if on_locus(&fold, &sp, f, &w, tol) {
                        continue;
                    }
                    let sp = SpecialPoint { parameter: crate::model::Parameter::InverseResidenceTime, param_value: f, ..sp };
                    fold.push(continue_fold_locus(&p, &sp, window, opts)?);
                }
            }
        }
    }
    if fold.is_empty() {
        fold.push(Locus::empty(LocusKind::Fold, "no turning point found in the window"));
    }
    if hopf.is_empty() {
        hopf.push(Locus::empty(LocusKind::Hopf, "no Hopf point found in the window"));
    }
    Ok(Loci { params: p, window: *window, hopf, fold, fold_threshold, notes })
}

/// Dynamic regime of the steady state at a point of the `(u_a, f)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Single steady state, unstable through a Hopf bifurcation: runaway
    /// sets in through growing oscillations.
    OscillatoryRunaway,
    /// Several steady states between turning points.
    Bistable,
    UniqueStable,
    /// Within `1e-8` of a locus.
    Boundary,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::OscillatoryRunaway => "oscillatory-runaway",
            Regime::Bistable => "bistable",
            Regime::UniqueStable => "unique-stable",
            Regime::Boundary => "boundary",
        }
    }
}

/// Distance below which a point is labelled [`Regime::Boundary`].
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

/// Axis-parallel ray from a point to the window edge, in `(u_a, ln f)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ray {
    Colder,
    Hotter,
    SlowerFlow,
    FasterFlow,
}

impl Ray {
    pub const ALL: [Ray; 4] = [Ray::Colder, Ray::SlowerFlow, Ray::FasterFlow, Ray::Hotter];

    fn end<T: Real>(self, window: &LociWindow<T>, u_a: T, f: T) -> (T, T) {
        match self {
            Ray::Colder => (window.ambient.0, f),
            Ray::Hotter => (window.ambient.1, f),
            Ray::SlowerFlow => (u_a, window.flow.0),
            Ray::FasterFlow => (u_a, window.flow.1),
        }
    }
}

/// Crossings of the polyline with the ray; each is `(distance along the ray,
/// interpolated trace)`. Distances are in `u_a` for horizontal rays and in
/// `ln f` for vertical ones.
fn ray_crossings<T: Real>(locus: &Locus<T>, ray: Ray, u_a: T, f: T) -> Vec<(T, T)> {
    let y = f.ln();
    let horizontal = matches!(ray, Ray::Colder | Ray::Hotter);
    let mut out = Vec::new();
    for pair in locus.points.windows(2) {
        let (pa, pb) = (&pair[0], &pair[1]);
        let (ca, cb, line) = if horizontal { (pa.f.ln(), pb.f.ln(), y) } else { (pa.u_a, pb.u_a, u_a) };
        if (ca <= line) == (cb <= line) {
            continue;
        }
        let s = (line - ca) / (cb - ca);
        let trace = pa.trace + s * (pb.trace - pa.trace);
        let along = if horizontal {
            pa.u_a + s * (pb.u_a - pa.u_a) - u_a
        } else {
            pa.f.ln() + s * (pb.f.ln() - pa.f.ln()) - y
        };
        let d = match ray {
            Ray::Colder | Ray::SlowerFlow => -along,
            Ray::Hotter | Ray::FasterFlow => along,
        };
        out.push((d, trace));
    }
    out
}

/// Regime at the window end of a ray, from a direct steady-state count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RayAnchor {
    pub multiple: bool,
    pub unstable: bool,
}

const ANCHOR_SCAN: usize = 4000;

/// Steady states at the end of `ray` started from `(u_a, f)`.
pub fn ray_anchor<T: Real>(loci: &Loci<T>, ray: Ray, u_a: T, f: T) -> Result<RayAnchor> {
    let (ua_end, f_end) = ray.end(&loci.window, u_a, f);
    let q = ModelParams {
        ambient_temperature: ua_end,
        inverse_residence_time: f_end,
        ..loci.params
    };
    let states = all_steady_states(&q, ANCHOR_SCAN)?;
    Ok(RayAnchor {
        multiple: states.len() > 1,
        unstable: states.len() == 1 && !states[0].stability.is_stable(),
    })
}

/// Memoised ray anchors keyed by the ray end.
#[derive(Default)]
struct AnchorCache(HashMap<(Ray, u64, u64), RayAnchor>);

impl AnchorCache {
    fn get<T: Real>(&mut self, loci: &Loci<T>, ray: Ray, u_a: T, f: T) -> Result<RayAnchor> {
        let (a, b) = ray.end(&loci.window, u_a, f);
        let key = (ray, a.as_f64().to_bits(), b.as_f64().to_bits());
        if let Some(&v) = self.0.get(&key) {
            return Ok(v);
        }
        let v = ray_anchor(loci, ray, u_a, f)?;
        self.0.insert(key, v);
        Ok(v)
    }
}

/// Labels `(u_a, f)` by the parity of locus crossings along axis-parallel
/// rays to the window edge, each anchored by a direct steady-state count at
/// its end. Fold crossings along the ray of decreasing `u_a` toggle between
/// one and several steady states. For a point with a single steady state,
/// Hopf crossings are counted along the first ray (colder, slower flow,
/// faster flow, hotter) that meets no fold locus, so that the steady state
/// changes stability exactly at each crossing.
pub fn classify_point<T: Real>(u_a: T, f: T, loci: &Loci<T>) -> Result<Regime> {
    classify_cached(u_a, f, loci, &mut AnchorCache::default())
}

fn classify_cached<T: Real>(u_a: T, f: T, loci: &Loci<T>, cache: &mut AnchorCache) -> Result<Regime> {
    if !loci.window.contains(u_a, f) {
        return Err(Error::OutsideWindow { u_a: u_a.as_f64(), f: f.as_f64() });
    }
    let tol = T::lit(BOUNDARY_TOLERANCE);
    let all = || loci.fold.iter().chain(&loci.hopf);
    let near = Ray::ALL
        .iter()
        .any(|&ray| all().flat_map(|l| ray_crossings(l, ray, u_a, f)).any(|(d, _)| d.abs() < tol));
    if near {
        return Ok(Regime::Boundary);
    }
    let on_ray = |set: &[Locus<T>], ray: Ray| -> Vec<(T, T)> {
        set.iter()
            .flat_map(|l| ray_crossings(l, ray, u_a, f))
            .filter(|&(d, _)| d > T::zero())
            .collect()
    };
    let folds = on_ray(&loci.fold, Ray::Colder);
    let anchor = cache.get(loci, Ray::Colder, u_a, f)?;
    if anchor.multiple != (folds.len() % 2 == 1) {
        return Ok(Regime::Bistable);
    }
    for ray in Ray::ALL {
        if on_ray(&loci.fold, ray).is_empty() {
            let anchor = cache.get(loci, ray, u_a, f)?;
            let toggles = on_ray(&loci.hopf, ray).len();
            return Ok(label(anchor.unstable != (toggles % 2 == 1)));
        }
    }
    // Every ray meets a turning point: follow the colder ray from the nearest
    // one, where the branch end has eigenvalues 0 and trace J.
    let (d0, trace) = folds
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("the colder ray meets a fold locus");
    let toggles = on_ray(&loci.hopf, Ray::Colder).iter().filter(|c| c.0 < d0).count();
    Ok(label((trace > T::zero()) != (toggles % 2 == 1)))
}

fn label(unstable: bool) -> Regime {
    if unstable {
        Regime::OscillatoryRunaway
    } else {
        Regime::UniqueStable
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell<T> {
    pub u_a: T,
    pub f: T,
    pub regime: Regime,
}

/// Cell-centred grid of `n_ambient × n_flow` points (linear in `u_a`,
/// logarithmic in `f`), ordered by `f` then `u_a`.
pub fn region_grid<T: Real>(window: &LociWindow<T>, n_ambient: usize, n_flow: usize) -> Vec<(T, T)> {
    let (a, b) = window.ambient;
    let (c, d) = window.log_flow();
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(n_ambient * n_flow);
    for j in 0..n_flow {
        let f = (c + (d - c) * (T::from_count(j) + half) / T::from_count(n_flow)).exp();
        for i in 0..n_ambient {
            out.push((a + (b - a) * (T::from_count(i) + half) / T::from_count(n_ambient), f));
        }
    }
    out
}

/// Regime labels on [`region_grid`].
pub fn region_map<T: Real>(loci: &Loci<T>, n_ambient: usize, n_flow: usize) -> Result<Vec<RegionCell<T>>> {
    classify_many(loci, &region_grid(&loci.window, n_ambient, n_flow))
}

/// Regime labels of arbitrary points, sharing ray anchors between them.
pub fn classify_many<T: Real>(loci: &Loci<T>, points: &[(T, T)]) -> Result<Vec<RegionCell<T>>> {
    let mut cache = AnchorCache::default();
    points
        .iter()
        .map(|&(u_a, f)| Ok(RegionCell { u_a, f, regime: classify_cached(u_a, f, loci, &mut cache)? }))
        .collect()
}

/// Points where `locus` meets the line of constant `f`, corrected onto the
/// augmented system from the linear interpolants of the polyline.
pub fn locus_at_flow<T: Real>(loci: &Loci<T>, locus: &Locus<T>, f: T, residual_tol: T) -> Vec<LocusPoint<T>> {
    let sys = Augmented { p: loci.params, kind: locus.kind };
    let y = f.ln();
    let w = [T::one(); 4];
    let fix = [T::zero(), T::zero(), T::zero(), T::one()];
    let mut out = Vec::new();
    for pair in locus.points.windows(2) {
        let (ya, yb) = (pair[0].f.ln(), pair[1].f.ln());
        if (ya <= y) == (yb <= y) {
            continue;
        }
        let s = (y - ya) / (yb - ya);
        let lerp = |a: T, b: T| a + s * (b - a);
        let z = [
            lerp(pair[0].state.x, pair[1].state.x),
            lerp(pair[0].state.u, pair[1].state.u),
            lerp(pair[0].u_a, pair[1].u_a),
            y,
        ];
        if let Some((z, _)) = correct_on_plane(&sys, &w, &z, &z, &fix, residual_tol, 30) {
            out.push(make_point(&sys, &z));
        }
    }
    out
}

#[cfg(test)]
mod tests;
