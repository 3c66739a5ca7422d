use crate::continuation::System;
use crate::linalg::Matrix;
use crate::model::ModelParams;
use crate::scalar::Real;

use super::LocusKind;

/// Steady-state equations plus one test function in `(x, u, u_a, ln f)`.
/// Balances are divided by `s = max(1, f)`, the trace by `s` and the
/// determinant by `s²`.
pub(super) struct Augmented<T> {
    pub p: ModelParams<T>,
    pub kind: LocusKind,
}

struct Pieces<T> {
    f: T,
    s: T,
    r: T,
    r1: T,
    r2: T,
    k: T,
    eps: T,
}

impl<T: Real> Augmented<T> {
    pub fn at(&self, z: &[T]) -> ModelParams<T> {
        ModelParams {
            ambient_temperature: z[2],
            inverse_residence_time: z[3].exp(),
            ..self.p
        }
    }

    fn admissible(z: &[T]) -> bool {
        z.iter().all(|v| v.is_finite()) && z[1] > T::zero() && z[2] > T::zero()
    }

    fn pieces(&self, z: &[T]) -> Pieces<T> {
        let q = self.at(z);
        let f = q.inverse_residence_time;
        let [r, r1, r2, _] = q.rate_derivatives(z[1]);
        Pieces { f, s: T::one().max(f), r, r1, r2, k: q.cooling(), eps: q.heat_capacity }
    }

    /// Trace and determinant of the Jacobian at `z`.
    pub fn invariants(&self, z: &[T]) -> (T, T) {
        let c = self.pieces(z);
        let x = z[0];
        let a = -(c.r + c.f);
        let b = -x * c.r1;
        let cc = c.r / c.eps;
        let d = (x * c.r1 - c.k) / c.eps;
        (a + d, a * d - b * cc)
    }

    pub fn scaled_det(&self, z: &[T]) -> T {
        let s = T::one().max(z[3].exp());
        self.invariants(z).1 / (s * s)
    }

    /// Scaled test function of the locus kind.
    pub fn test(&self, z: &[T]) -> T {
        let s = T::one().max(z[3].exp());
        let (tr, det) = self.invariants(z);
        match self.kind {
            LocusKind::Hopf => tr / s,
            LocusKind::Fold => det / (s * s),
        }
    }
}

impl<T: Real> System<T> for Augmented<T> {
    fn unknowns(&self) -> usize {
        4
    }

    fn residual(&self, z: &[T]) -> Option<Vec<T>> {
        if !Self::admissible(z) {
            return None;
        }
        let q = self.at(z);
        let s = T::one().max(q.inverse_residence_time);
        let f = q.rhs([z[0], z[1]]);
        Some(vec![f[0] / s, f[1] / s, self.test(z)])
    }

    fn jacobian(&self, z: &[T]) -> Option<Matrix<T>> {
        if !Self::admissible(z) {
            return None;
        }
        let q = self.at(z);
        let c = self.pieces(z);
        let (x, u, ua) = (z[0], z[1], z[2]);
        let (f, eps, k) = (c.f, c.eps, c.k);
        let a = -(c.r + f);
        let b = -x * c.r1;
        let cc = c.r / eps;
        let d = (x * c.r1 - k) / eps;
        let zero = T::zero();
        // Rows are derivatives with respect to (x, u, u_a, ln f).
        let da = [zero, -c.r1, zero, -f];
        let db = [-c.r1, -x * c.r2, zero, zero];
        let dc = [zero, c.r1 / eps, zero, zero];
        let dd = [c.r1 / eps, x * c.r2 / eps, zero, -f];
        let f1 = [a, b, zero, f * (T::one() - x)];
        let f2 = [cc, d, k / eps, -f * (u - ua)];
        let rhs = q.rhs([x, u]);
        let (tr, det) = (a + d, a * d - b * cc);
        let mut g = [zero; 4];
        let mut n = 1;
        for i in 0..4 {
            g[i] = match self.kind {
                LocusKind::Hopf => da[i] + dd[i],
                LocusKind::Fold => da[i] * d + a * dd[i] - db[i] * cc - b * dc[i],
            };
        }
        let gv = match self.kind {
            LocusKind::Hopf => tr,
            LocusKind::Fold => {
                n = 2;
                det
            }
        };
        let s = c.s;
        let scaled = f > T::one();
        let mut m = Matrix::zeros(3, 4);
        for i in 0..4 {
            m[(0, i)] = f1[i] / s;
            m[(1, i)] = f2[i] / s;
            m[(2, i)] = g[i] / s.powi(n);
        }
        if scaled {
            // d(1/s^n)/d ln f = -n/s^n when s = f.
            m[(0, 3)] -= rhs[0] / s;
            m[(1, 3)] -= rhs[1] / s;
            m[(2, 3)] -= T::from_count(n as usize) * gv / s.powi(n);
        }
        Some(m)
    }
}
