//! Pseudo-arclength continuation of the solution curve of `n` equations in
//! `n + 1` unknowns.
//!
//! Distances are measured in scaled coordinates `w_i z_i`. Steps use a secant
//! predictor and a Newton corrector on the system bordered by the arclength
//! hyperplane. Tangents at accepted points are computed from the null vector
//! of the Jacobian and oriented continuously.

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, Matrix};
use crate::scalar::Real;

/// An underdetermined smooth system `F: R^{n+1} -> R^n`.
pub trait System<T: Real> {
    /// Number of unknowns (`n + 1`).
    fn unknowns(&self) -> usize;
    /// `None` when `z` lies outside the domain of the equations.
    fn residual(&self, z: &[T]) -> Option<Vec<T>>;
    /// `n × (n + 1)` Jacobian.
    fn jacobian(&self, z: &[T]) -> Option<Matrix<T>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings<T> {
    pub ds: T,
    pub ds_min: T,
    pub ds_max: T,
    pub residual_tol: T,
    pub max_iterations: usize,
    /// Smallest cosine allowed between successive tangents.
    pub min_tangent_cos: T,
}

impl<T: Real> Settings<T> {
    pub fn new(ds: T, ds_min: T, ds_max: T, residual_tol: T) -> Self {
        Self {
            ds,
            ds_min,
            ds_max,
            residual_tol,
            max_iterations: 12,
            min_tangent_cos: T::lit(0.95),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.ds_min > T::zero()
            && self.ds_min <= self.ds_max
            && self.ds.is_finite()
            && self.ds > T::zero()
            && self.residual_tol > T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "continuation steps must satisfy 0 < ds_min <= ds_max and ds > 0 (got ds={}, ds_min={}, ds_max={})",
                self.ds, self.ds_min, self.ds_max
            )))
        }
    }
}

fn scaled_dot<T: Real>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter().zip(a).zip(b).map(|((&w, &a), &b)| w * w * a * b).sum()
}

fn scaled_norm<T: Real>(w: &[T], a: &[T]) -> T {
    scaled_dot(w, a, a).sqrt()
}

/// Newton solve of `F(z) = 0` together with `<n, W²(z - anchor)> = 0`.
/// Returns the converged point and the iteration count.
pub fn correct_on_plane<T: Real, S: System<T> + ?Sized>(
    sys: &S,
    w: &[T],
    guess: &[T],
    anchor: &[T],
    normal: &[T],
    residual_tol: T,
    max_iterations: usize,
) -> Option<(Vec<T>, usize)> {
    let m = sys.unknowns();
    let mut z = guess.to_vec();
    let plane: Vec<T> = (0..m).map(|i| w[i] * w[i] * normal[i]).collect();
    let mut last_res = T::infinity();
    for it in 0..=max_iterations {
        let f = sys.residual(&z)?;
        let res = norm_inf(&f);
        if !res.is_finite() {
            return None;
        }
        let offset: T = (0..m).map(|i| plane[i] * (z[i] - anchor[i])).sum();
        if res < residual_tol && offset.abs() < residual_tol.max(T::epsilon()) {
            return Some((z, it));
        }
        if it == max_iterations || (it >= 3 && res > last_res * T::lit(2.0)) {
            return None;
        }
        last_res = res;
        let jac = sys.jacobian(&z)?;
        let mut a = Matrix::zeros(m, m);
        let mut rhs = vec![T::zero(); m];
        for r in 0..m - 1 {
            for c in 0..m {
                a[(r, c)] = jac[(r, c)];
            }
            rhs[r] = -f[r];
        }
        for c in 0..m {
            a[(m - 1, c)] = plane[c];
        }
        rhs[m - 1] = -offset;
        let dz = a.solve(&rhs).ok()?;
        for i in 0..m {
            z[i] += dz[i];
        }
    }
    None
}

/// Unit (scaled) tangent at `z`: null vector of the Jacobian, oriented to
/// have positive scaled inner product with `orient`.
pub fn tangent_at<T: Real, S: System<T> + ?Sized>(
    sys: &S,
    w: &[T],
    z: &[T],
    orient: &[T],
) -> Option<Vec<T>> {
    let m = sys.unknowns();
    let jac = sys.jacobian(z)?;
    let mut a = Matrix::zeros(m, m);
    for r in 0..m - 1 {
        for c in 0..m {
            a[(r, c)] = jac[(r, c)];
        }
    }
    for c in 0..m {
        a[(m - 1, c)] = w[c] * w[c] * orient[c];
    }
    let mut rhs = vec![T::zero(); m];
    rhs[m - 1] = T::one();
    let t = a.solve(&rhs).ok()?;
    let n = scaled_norm(w, &t);
    if !(n > T::zero()) || !n.is_finite() {
        return None;
    }
    Some(t.into_iter().map(|v| v / n).collect())
}

/// An accepted point on the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint<T> {
    pub z: Vec<T>,
    /// Unit tangent in scaled coordinates.
    pub tangent: Vec<T>,
}

/// Step-by-step tracer along one solution curve.
pub struct Tracer<'a, T, S: ?Sized> {
    sys: &'a S,
    w: Vec<T>,
    settings: Settings<T>,
    ds: T,
    prev: Option<CurvePoint<T>>,
    current: CurvePoint<T>,
}

impl<'a, T: Real, S: System<T> + ?Sized> Tracer<'a, T, S> {
    /// Starts at a converged `z0`, heading along `direction` (scaled inner
    /// product sign).
    pub fn new(sys: &'a S, weights: Vec<T>, settings: Settings<T>, z0: Vec<T>, direction: &[T]) -> Result<Self> {
        settings.validate()?;
        let f = sys
            .residual(&z0)
            .ok_or_else(|| Error::Domain("continuation start outside domain".into()))?;
        let res = norm_inf(&f);
        if !(res < settings.residual_tol * T::lit(10.0)) {
            return Err(Error::NewtonFailure {
                iterations: 0,
                residual: res.as_f64(),
                last: z0.iter().map(|v| v.as_f64()).collect(),
            });
        }
        let tangent = tangent_at(sys, &weights, &z0, direction).ok_or(Error::Singular)?;
        Ok(Self {
            sys,
            w: weights,
            ds: settings.ds.min(settings.ds_max).max(settings.ds_min),
            settings,
            prev: None,
            current: CurvePoint { z: z0, tangent },
        })
    }

    pub fn current(&self) -> &CurvePoint<T> {
        &self.current
    }

    pub fn previous(&self) -> Option<&CurvePoint<T>> {
        self.prev.as_ref()
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn step_size(&self) -> T {
        self.ds
    }

    /// Takes one step. Fails once the step size falls below `ds_min`.
    pub fn advance(&mut self) -> Result<&CurvePoint<T>> {
        let m = self.sys.unknowns();
        // Secant direction when available, tangent otherwise.
        let dir: Vec<T> = match &self.prev {
            Some(p) => {
                let d: Vec<T> = (0..m).map(|i| self.current.z[i] - p.z[i]).collect();
                let n = scaled_norm(&self.w, &d);
                if n > T::zero() {
                    d.into_iter().map(|v| v / n).collect()
                } else {
                    self.current.tangent.clone()
                }
            }
            None => self.current.tangent.clone(),
        };
        loop {
            let ds = self.ds;
            let pred: Vec<T> = (0..m).map(|i| self.current.z[i] + ds * dir[i]).collect();
            let attempt = correct_on_plane(
                self.sys,
                &self.w,
                &pred,
                &pred,
                &dir,
                self.settings.residual_tol,
                self.settings.max_iterations,
            )
            .and_then(|(z, its)| {
                let t = tangent_at(self.sys, &self.w, &z, &self.current.tangent)?;
                let cos = scaled_dot(&self.w, &t, &self.current.tangent);
                let moved: Vec<T> = (0..m).map(|i| z[i] - self.current.z[i]).collect();
                let dist = scaled_norm(&self.w, &moved);
                let forward = scaled_dot(&self.w, &moved, &dir) > T::zero();
                (cos >= self.settings.min_tangent_cos && forward && dist < T::lit(2.0) * ds)
                    .then_some((z, t, its))
            });
            match attempt {
                Some((z, t, its)) => {
                    let next = CurvePoint { z, tangent: t };
                    self.prev = Some(std::mem::replace(&mut self.current, next));
                    if its <= 3 {
                        self.ds = (self.ds * T::lit(1.5)).min(self.settings.ds_max);
                    } else if its > 6 {
                        self.ds = (self.ds * T::lit(0.7)).max(self.settings.ds_min);
                    }
                    return Ok(&self.current);
                }
                None => {
                    if self.ds <= self.settings.ds_min {
                        return Err(Error::NewtonFailure {
                            iterations: self.settings.max_iterations,
                            residual: f64::NAN,
                            last: self.current.z.iter().map(|v| v.as_f64()).collect(),
                        });
                    }
                    self.ds = (self.ds / T::lit(2.0)).max(self.settings.ds_min);
                }
            }
        }
    }
}

/// Locates a zero of `test` on the curve between two nearby converged points
/// `za` and `zb` whose test values differ in sign. Candidate points are placed
/// on the chord and corrected onto the curve orthogonally to it; the chord
/// parameter is updated by the Illinois rule until the bracket in scaled
/// chord length drops below `length_tol`.
pub fn refine_between<T: Real, S: System<T> + ?Sized>(
    sys: &S,
    w: &[T],
    za: &[T],
    zb: &[T],
    residual_tol: T,
    length_tol: T,
    test: impl Fn(&[T]) -> Option<T>,
) -> Option<Vec<T>> {
    let m = sys.unknowns();
    let chord: Vec<T> = (0..m).map(|i| zb[i] - za[i]).collect();
    let len = scaled_norm(w, &chord);
    let mut ga = test(za)?;
    let mut gb = test(zb)?;
    if ga == T::zero() {
        return Some(za.to_vec());
    }
    if gb == T::zero() {
        return Some(zb.to_vec());
    }
    if ga.signum() == gb.signum() {
        return None;
    }
    let (mut a, mut b) = (T::zero(), T::one());
    let mut best = za.to_vec();
    let mut side = 0i8;
    for _ in 0..200 {
        let mut s = a - ga * (b - a) / (gb - ga);
        let width = b - a;
        if !(s > a && s < b) {
            s = a + width / T::lit(2.0);
        }
        let guess: Vec<T> = (0..m).map(|i| za[i] + s * chord[i]).collect();
        let (z, _) = correct_on_plane(sys, w, &guess, &guess, &chord, residual_tol, 20)?;
        let g = test(&z)?;
        best = z;
        if g == T::zero() {
            break;
        }
        if g.signum() == ga.signum() {
            a = s;
            ga = g;
            if side == -1 {
                gb = gb / T::lit(2.0);
            }
            side = -1;
        } else {
            b = s;
            gb = g;
            if side == 1 {
                ga = ga / T::lit(2.0);
            }
            side = 1;
        }
        if (b - a) * len < length_tol {
            break;
        }
    }
    Some(best)
}

/// Newton polish of a point refined by [`refine_between`] on the square
/// system `F(z) = 0, test(z) = 0`. The gradient of `test` is taken by central
/// differences. Returns the input when no improvement is obtained.
pub fn polish<T: Real, S: System<T> + ?Sized>(
    sys: &S,
    z0: &[T],
    residual_tol: T,
    test: impl Fn(&[T]) -> Option<T>,
) -> Vec<T> {
    let m = sys.unknowns();
    let Some(mut best_g) = test(z0).map(|g| g.abs()) else {
        return z0.to_vec();
    };
    let mut best = z0.to_vec();
    let mut z = z0.to_vec();
    for _ in 0..8 {
        let (Some(f), Some(jac), Some(g)) = (sys.residual(&z), sys.jacobian(&z), test(&z)) else {
            break;
        };
        let mut a = Matrix::zeros(m, m);
        let mut rhs = vec![T::zero(); m];
        for r in 0..m - 1 {
            for c in 0..m {
                a[(r, c)] = jac[(r, c)];
            }
            rhs[r] = -f[r];
        }
        for c in 0..m {
            let h = T::lit(1e-6) * z[c].abs().max(T::lit(1e-3));
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[c] += h;
            zm[c] -= h;
            let (Some(gp), Some(gm)) = (test(&zp), test(&zm)) else {
                return best;
            };
            a[(m - 1, c)] = (gp - gm) / (h + h);
        }
        rhs[m - 1] = -g;
        let Ok(dz) = a.solve(&rhs) else {
            break;
        };
        for i in 0..m {
            z[i] += dz[i];
        }
        let (Some(f), Some(g)) = (sys.residual(&z), test(&z)) else {
            break;
        };
        if norm_inf(&f) < residual_tol && g.abs() < best_g {
            best_g = g.abs();
            best = z.clone();
        }
    }
    best
}
