//! Three-stage Radau IIA (order 5) with step-doubling error control.
//!
//! Each stage system is solved by full Newton with the analytic Jacobian, so
//! the discrete flow map is differentiated exactly: the derivative of a step
//! with respect to its initial state (and optionally one parameter) follows
//! from the converged stage system by implicit differentiation.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{det2, mul2, mul2v, FixedLu, Mat2};
use crate::model::{ModelParams, Parameter};
use crate::scalar::Real;

/// Local error tolerances (mixed relative/absolute, per component).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances<T> {
    pub rel: T,
    pub abs: T,
}

impl<T: Real> Tolerances<T> {
    pub fn new(rel: T, abs: T) -> Self {
        Self { rel, abs }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rel > T::zero() && self.abs > T::zero() {
            Ok(())
        } else {
            Err(Error::InvalidInput("tolerances must be positive".into()))
        }
    }

    fn weight(&self, a: T, b: T) -> T {
        self.abs + self.rel * a.abs().max(b.abs())
    }
}

impl Default for Tolerances<f64> {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-12 }
    }
}

/// Accumulated derivative of the flow map along an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity<T> {
    /// `∂y(t)/∂y(t0)`.
    pub phi: Mat2<T>,
    /// `∂y(t)/∂λ` for the tracked parameter (zero when none is tracked).
    pub dparam: [T; 2],
    /// `ln |det phi|`, accumulated step by step.
    pub log_det: T,
    pub det_sign: T,
    /// `∫ trace J dτ` by the method's own quadrature.
    pub trace_integral: T,
}

impl<T: Real> Sensitivity<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            phi: [[o, z], [z, o]],
            dparam: [z, z],
            log_det: z,
            det_sign: o,
            trace_integral: z,
        }
    }
}

/// One accepted half step, as seen by observers.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Substep<T> {
    pub t0: T,
    pub y0: [T; 2],
    pub h: T,
    pub y1: [T; 2],
}

pub(crate) struct DriveEnd<T> {
    pub t: T,
    pub y: [T; 2],
    pub sens: Option<Sensitivity<T>>,
    pub stopped: bool,
}

struct Stages<T> {
    y: [[T; 2]; 3],
    jac: [Mat2<T>; 3],
    lu: FixedLu<T, 6>,
}

/// Butcher tableau in the working precision.
struct Tableau<T> {
    a: [[T; 3]; 3],
    c: [T; 3],
}

impl<T: Real> Tableau<T> {
    fn new() -> Self {
        let s6 = 6f64.sqrt();
        let l = T::lit;
        Self {
            a: [
                [
                    l((88.0 - 7.0 * s6) / 360.0),
                    l((296.0 - 169.0 * s6) / 1800.0),
                    l((-2.0 + 3.0 * s6) / 225.0),
                ],
                [
                    l((296.0 + 169.0 * s6) / 1800.0),
                    l((88.0 + 7.0 * s6) / 360.0),
                    l((-2.0 - 3.0 * s6) / 225.0),
                ],
                [l((16.0 - s6) / 36.0), l((16.0 + s6) / 36.0), l(1.0 / 9.0)],
            ],
            c: [l((4.0 - s6) / 10.0), l((4.0 + s6) / 10.0), T::one()],
        }
    }
}

pub(crate) struct Radau<'a, T> {
    p: &'a ModelParams<T>,
    tol: Tolerances<T>,
    param: Option<Parameter>,
    tab: Tableau<T>,
    pub max_steps: usize,
}

const NEWTON_MAX: usize = 12;

impl<'a, T: Real> Radau<'a, T> {
    pub fn new(p: &'a ModelParams<T>, tol: Tolerances<T>) -> Self {
        Self {
            p,
            tol,
            param: None,
            tab: Tableau::new(),
            max_steps: 50_000_000,
        }
    }

    pub fn with_parameter(mut self, param: Parameter) -> Self {
        self.param = Some(param);
        self
    }

    fn valid(y: &[T; 2]) -> bool {
        y[0].is_finite() && y[1].is_finite() && y[1] > T::zero()
    }

    fn stage_matrix(&self, h: T, jac: &[Mat2<T>; 3]) -> Option<FixedLu<T, 6>> {
        let mut m = [[T::zero(); 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                let w = h * self.tab.a[i][j];
                for r in 0..2 {
                    for c in 0..2 {
                        m[2 * i + r][2 * j + c] = -w * jac[j][r][c];
                    }
                }
            }
            m[2 * i][2 * i] += T::one();
            m[2 * i + 1][2 * i + 1] += T::one();
        }
        FixedLu::new(m)
    }

    /// Solves the collocation system for one step of length `h`.
    fn stages(&self, y0: [T; 2], h: T, for_sensitivity: bool) -> Option<Stages<T>> {
        let f0 = self.p.rhs(y0);
        let mut z = [[T::zero(); 2]; 3];
        for i in 0..3 {
            for k in 0..2 {
                z[i][k] = self.tab.c[i] * h * f0[k];
            }
        }
        let w = [self.tol.weight(y0[0], y0[0]), self.tol.weight(y0[1], y0[1])];
        let mut prev = T::infinity();
        for it in 0..NEWTON_MAX {
            let mut ys = [[T::zero(); 2]; 3];
            let mut fs = [[T::zero(); 2]; 3];
            let mut js = [[[T::zero(); 2]; 2]; 3];
            for j in 0..3 {
                ys[j] = [y0[0] + z[j][0], y0[1] + z[j][1]];
                if !Self::valid(&ys[j]) {
                    if it == 0 {
                        // Predictor left the domain; restart from the initial state.
                        z = [[T::zero(); 2]; 3];
                        ys[j] = y0;
                    } else {
                        return None;
                    }
                }
            }
            for j in 0..3 {
                ys[j] = [y0[0] + z[j][0], y0[1] + z[j][1]];
                fs[j] = self.p.rhs(ys[j]);
                js[j] = self.p.jac(ys[j]);
            }
            let lu = self.stage_matrix(h, &js)?;
            let mut g = [T::zero(); 6];
            for i in 0..3 {
                for k in 0..2 {
                    let mut acc = z[i][k];
                    for j in 0..3 {
                        acc -= h * self.tab.a[i][j] * fs[j][k];
                    }
                    g[2 * i + k] = -acc;
                }
            }
            let dz = lu.solve(&g);
            let mut size = T::zero();
            for i in 0..3 {
                for k in 0..2 {
                    z[i][k] += dz[2 * i + k];
                    size = size.max((dz[2 * i + k] / w[k]).abs());
                }
            }
            if !size.is_finite() {
                return None;
            }
            // Stagnation at roundoff level counts as converged.
            let stalled = it >= 2 && size >= prev;
            if stalled && size > T::lit(1e-3) {
                return None;
            }
            prev = size;
            if size < T::lit(1e-6) || stalled {
                let y = [
                    [y0[0] + z[0][0], y0[1] + z[0][1]],
                    [y0[0] + z[1][0], y0[1] + z[1][1]],
                    [y0[0] + z[2][0], y0[1] + z[2][1]],
                ];
                if !y.iter().all(Self::valid) {
                    return None;
                }
                let jac = [self.p.jac(y[0]), self.p.jac(y[1]), self.p.jac(y[2])];
                let lu = if for_sensitivity {
                    self.stage_matrix(h, &jac)?
                } else {
                    lu
                };
                return Some(Stages { y, jac, lu });
            }
        }
        None
    }

    /// Single step without error control (used for dense output and event
    /// localisation inside an accepted step).
    pub fn step_to(&self, y0: [T; 2], h: T) -> Option<[T; 2]> {
        if h == T::zero() {
            return Some(y0);
        }
        self.stages(y0, h, false).map(|s| s.y[2])
    }

    /// Propagates `sens` through a converged step of length `h`.
    fn propagate(&self, st: &Stages<T>, h: T, sens: &Sensitivity<T>) -> Sensitivity<T> {
        let a = &self.tab.a;
        // Right-hand sides: h Σ_j a_ij J_j (two columns) and h Σ_j a_ij f_λ(Y_j).
        let mut cols = [[T::zero(); 6]; 3];
        let fp: Option<[[T; 2]; 3]> = self
            .param
            .map(|p| [0, 1, 2].map(|j| self.p.param_derivative(st.y[j], p)));
        for i in 0..3 {
            for j in 0..3 {
                let w = h * a[i][j];
                for r in 0..2 {
                    cols[0][2 * i + r] += w * st.jac[j][r][0];
                    cols[1][2 * i + r] += w * st.jac[j][r][1];
                    if let Some(fp) = &fp {
                        cols[2][2 * i + r] += w * fp[j][r];
                    }
                }
            }
        }
        let x0 = st.lu.solve(&cols[0]);
        let x1 = st.lu.solve(&cols[1]);
        let d = [
            [T::one() + x0[4], x1[4]],
            [x0[5], T::one() + x1[5]],
        ];
        let mut dparam = mul2v(&d, sens.dparam);
        if fp.is_some() {
            let xp = st.lu.solve(&cols[2]);
            dparam[0] += xp[4];
            dparam[1] += xp[5];
        }
        let dd = det2(&d);
        let b = &a[2];
        let tr: T = (0..3)
            .map(|j| b[j] * (st.jac[j][0][0] + st.jac[j][1][1]))
            .sum();
        Sensitivity {
            phi: mul2(&d, &sens.phi),
            dparam,
            log_det: sens.log_det + dd.abs().ln(),
            det_sign: if dd < T::zero() { -sens.det_sign } else { sens.det_sign },
            trace_integral: sens.trace_integral + h * tr,
        }
    }

    /// Integrates from `(t0, y0)` to `t_end`, reporting every accepted half
    /// step to `observe`, which may stop the run early.
    pub fn drive<F>(
        &self,
        t0: T,
        y0: [T; 2],
        t_end: T,
        sens: Option<Sensitivity<T>>,
        h_init: Option<T>,
        mut observe: F,
    ) -> Result<DriveEnd<T>>
    where
        F: FnMut(&Self, Substep<T>) -> ControlFlow<(T, [T; 2])>,
    {
        let two = T::lit(2.0);
        let span = t_end - t0;
        if !(span >= T::zero()) {
            return Err(Error::InvalidInput("integration end precedes start".into()));
        }
        let mut t = t0;
        let mut y = y0;
        let mut sens = sens;
        if span == T::zero() {
            return Ok(DriveEnd { t, y, sens, stopped: false });
        }
        let mut h = h_init.unwrap_or_else(|| span.min(T::lit(1e-4))).min(span);
        let order_exp = T::lit(-1.0 / 6.0);
        let fail = |t: T, h: T, y: [T; 2]| Error::StiffnessFailure {
            time: t.as_f64(),
            step: h.as_f64(),
            x: y[0].as_f64(),
            u: y[1].as_f64(),
        };
        let mut steps = 0usize;
        while t < t_end {
            steps += 1;
            if steps > self.max_steps {
                return Err(fail(t, h, y));
            }
            let remaining = t_end - t;
            let last = h >= remaining * (T::one() - T::lit(1e-12));
            let h_try = if last { remaining } else { h };
            if h_try <= T::lit(1e-14) * t.abs().max(T::one()) {
                return Err(fail(t, h_try, y));
            }
            let want_sens = sens.is_some();
            let half = h_try / two;
            let attempt = (|| {
                let full = self.stages(y, h_try, want_sens)?;
                let s1 = self.stages(y, half, want_sens)?;
                let s2 = self.stages(s1.y[2], half, want_sens)?;
                Some((full, s1, s2))
            })();
            let Some((full, s1, s2)) = attempt else {
                h = h_try / T::lit(4.0);
                continue;
            };
            let (yf, ym, y1) = (full.y[2], s1.y[2], s2.y[2]);
            let mut err = T::zero();
            for k in 0..2 {
                err = err.max(((y1[k] - yf[k]) / self.tol.weight(y[k], y1[k])).abs());
            }
            let mut new_sens = None;
            if let Some(sv) = &sens {
                let id = Sensitivity::identity();
                let via_full = self.propagate(&full, h_try, &id);
                let mid = self.propagate(&s1, half, &id);
                let via_half = self.propagate(&s2, half, &mid);
                let scale = via_half.phi.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
                for r in 0..2 {
                    for c in 0..2 {
                        let e = via_half.phi[r][c] - via_full.phi[r][c];
                        err = err.max((e / (self.tol.abs + self.tol.rel * scale)).abs());
                    }
                }
                let e = via_half.log_det - via_full.log_det;
                err = err.max((e / (self.tol.rel * (T::one() + via_half.log_det.abs()))).abs());
                if self.param.is_some() {
                    let dscale = via_half.dparam[0].abs().max(via_half.dparam[1].abs());
                    for k in 0..2 {
                        let e = via_half.dparam[k] - via_full.dparam[k];
                        err = err.max((e / (self.tol.abs + self.tol.rel * dscale)).abs());
                    }
                }
                let m = self.propagate(&s1, half, sv);
                new_sens = Some(self.propagate(&s2, half, &m));
            }
            // Richardson: the two half steps carry ~1/31 of the difference.
            err = err / T::lit(31.0);
            if !err.is_finite() || err > T::one() {
                let fac = if err.is_finite() {
                    (T::lit(0.9) * err.powf(order_exp)).max(T::lit(0.1))
                } else {
                    T::lit(0.25)
                };
                h = h_try * fac;
                continue;
            }
            // Accept: report the two half steps.
            let subs = [
                Substep { t0: t, y0: y, h: half, y1: ym },
                Substep { t0: t + half, y0: ym, h: half, y1 },
            ];
            for sub in subs {
                if let ControlFlow::Break((ts, ys)) = observe(self, sub) {
                    return Ok(DriveEnd { t: ts, y: ys, sens: None, stopped: true });
                }
            }
            t = if last { t_end } else { t + h_try };
            y = y1;
            if new_sens.is_some() {
                sens = new_sens;
            }
            let last_ok = h_try;
            let fac = if err == T::zero() {
                T::lit(4.0)
            } else {
                (T::lit(0.9) * err.powf(order_exp)).min(T::lit(4.0)).max(T::lit(0.2))
            };
            h = if last { last_ok.max(h) } else { h_try * fac };
        }
        Ok(DriveEnd { t, y, sens, stopped: false })
    }
}
