use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{complex_eigenvector, det2, inv2, trace2, Mat2};
use crate::model::{ModelParams, PlanarField};
use crate::scalar::Real;
use crate::steady::{Criticality, SpecialKind, SpecialPoint};

/// Linear and cubic normal-form data at a Hopf point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfNormalForm<T> {
    pub frequency: T,
    /// First Lyapunov coefficient; positive means subcritical.
    pub l1: T,
    /// Real part of the critical eigenvalue pair (zero up to refinement error).
    pub alpha: T,
    /// Real and imaginary parts of the unit eigenvector for `+iω`.
    pub eigenvector: ([T; 2], [T; 2]),
}

impl<T: Real> HopfNormalForm<T> {
    pub fn criticality(&self) -> Criticality {
        Criticality::from_l1(self.l1)
    }
}

const TRACE_TOL: f64 = 1e-8;

/// First Lyapunov coefficient of `field` at an equilibrium `s` whose
/// Jacobian has a purely imaginary pair `±iω`.
///
/// Coordinates are changed to `s + P ξ` with `P = [Im q, Re q]`, in which the
/// linear part is a rotation, and the cubic coefficient is
///
/// ```text
/// a = (f_xxx + f_xyy + g_xxy + g_yyy) / 16
///   + (f_xy (f_xx + f_yy) - g_xy (g_xx + g_yy) - f_xx g_xx + f_yy g_yy) / (16 ω)
/// ```
///
/// with `q` normalised to unit length.
pub fn first_lyapunov_coefficient<T: Real, F: PlanarField<T> + ?Sized>(
    field: &F,
    s: [T; 2],
) -> Result<HopfNormalForm<T>> {
    let j = field.jacobian(s);
    let (tr, det) = (trace2(&j), det2(&j));
    let scale = T::one().max(j.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs())));
    if !(tr.abs() <= T::lit(TRACE_TOL) * scale) {
        return Err(Error::NotHopf(format!("trace {tr} is not zero")));
    }
    let alpha = tr / T::lit(2.0);
    let omega2 = det - alpha * alpha;
    if !(det > T::zero()) || !(omega2 > T::zero()) {
        return Err(Error::NotHopf(format!("determinant {det} gives no imaginary pair")));
    }
    let omega = omega2.sqrt();
    let (mut re, mut im) = complex_eigenvector(&j, Complex::new(alpha, omega));
    let n = (re[0] * re[0] + re[1] * re[1] + im[0] * im[0] + im[1] * im[1]).sqrt();
    for k in 0..2 {
        re[k] = re[k] / n;
        im[k] = im[k] / n;
    }
    let pm: Mat2<T> = [[im[0], re[0]], [im[1], re[1]]];
    let pinv = inv2(&pm)?;
    let d2 = field.second_derivatives(s);
    let d3 = field.third_derivatives(s);
    // Derivatives of the transformed field.
    let t2 = |i: usize, a: usize, b: usize| {
        let mut acc = T::zero();
        for k in 0..2 {
            let mut inner = T::zero();
            for p in 0..2 {
                for q in 0..2 {
                    inner += d2[k][p][q] * pm[p][a] * pm[q][b];
                }
            }
            acc += pinv[i][k] * inner;
        }
        acc
    };
    let t3 = |i: usize, a: usize, b: usize, c: usize| {
        let mut acc = T::zero();
        for k in 0..2 {
            let mut inner = T::zero();
            for p in 0..2 {
                for q in 0..2 {
                    for r in 0..2 {
                        inner += d3[k][p][q][r] * pm[p][a] * pm[q][b] * pm[r][c];
                    }
                }
            }
            acc += pinv[i][k] * inner;
        }
        acc
    };
    let (fxx, fxy, fyy) = (t2(0, 0, 0), t2(0, 0, 1), t2(0, 1, 1));
    let (gxx, gxy, gyy) = (t2(1, 0, 0), t2(1, 0, 1), t2(1, 1, 1));
    let cubic = t3(0, 0, 0, 0) + t3(0, 0, 1, 1) + t3(1, 0, 0, 1) + t3(1, 1, 1, 1);
    let quad = fxy * (fxx + fyy) - gxy * (gxx + gyy) - fxx * gxx + fyy * gyy;
    let sixteen = T::lit(16.0);
    let l1 = cubic / sixteen + quad / (sixteen * omega);
    Ok(HopfNormalForm { frequency: omega, l1, alpha, eigenvector: (re, im) })
}

/// First Lyapunov coefficient at a Hopf special point of the scaled model.
pub fn lyapunov_first_coeff<T: Real>(p: &ModelParams<T>, h: &SpecialPoint<T>) -> Result<T> {
    if h.kind != SpecialKind::Hopf {
        return Err(Error::NotHopf("special point is a fold".into()));
    }
    let q = p.with(h.parameter, h.param_value);
    first_lyapunov_coefficient(&q, h.state.to_array()).map(|nf| nf.l1)
}
