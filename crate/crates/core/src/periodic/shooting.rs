use std::cell::RefCell;

use crate::continuation::System;
use crate::dynamics::{flow_with_sensitivity, Sensitivity, Tolerances};
use crate::linalg::Matrix;
use crate::model::{ModelParams, Parameter};
use crate::scalar::Real;

/// Residual, Jacobian and segment sensitivities at one point.
#[derive(Clone)]
pub(crate) struct Evaluation<T> {
    pub residual: Vec<T>,
    pub jacobian: Matrix<T>,
    pub segments: Vec<Sensitivity<T>>,
}

/// Multiple-shooting formulation of the periodic boundary-value problem.
///
/// Unknowns are `m` node states, the period and (when the parameter is free)
/// the active parameter value: `z = [x_0, u_0, ..., x_{m-1}, u_{m-1}, T, λ]`.
/// Equations are the `2m` matching conditions `φ(s_i, T/m) = s_{i+1}` and an
/// integral phase condition against reference nodes.
pub(crate) struct Shooting<T> {
    pub p: ModelParams<T>,
    pub active: Parameter,
    pub m: usize,
    pub tol: Tolerances<T>,
    /// State weights used by the phase condition.
    pub w: [T; 2],
    pub free_param: bool,
    reference: RefCell<(Vec<[T; 2]>, Vec<[T; 2]>)>,
    cache: RefCell<Option<(Vec<T>, Option<Evaluation<T>>)>>,
}

impl<T: Real> Shooting<T> {
    pub fn new(p: ModelParams<T>, active: Parameter, m: usize, tol: Tolerances<T>, w: [T; 2], free_param: bool) -> Self {
        Self {
            p,
            active,
            m,
            tol,
            w,
            free_param,
            reference: RefCell::new((Vec::new(), Vec::new())),
            cache: RefCell::new(None),
        }
    }

    pub fn params_at(&self, z: &[T]) -> ModelParams<T> {
        if self.free_param {
            self.p.with(self.active, z[2 * self.m + 1])
        } else {
            self.p
        }
    }

    pub fn nodes(&self, z: &[T]) -> Vec<[T; 2]> {
        (0..self.m).map(|i| [z[2 * i], z[2 * i + 1]]).collect()
    }

    /// Fixes the phase condition to the nodes of `z`.
    pub fn set_reference(&self, z: &[T]) {
        let q = self.params_at(z);
        let nodes = self.nodes(z);
        let field: Vec<[T; 2]> = nodes.iter().map(|s| q.rhs(*s)).collect();
        // Normalise so the phase row has unit scaled size.
        let norm = field
            .iter()
            .map(|f| (f[0] * self.w[0]).powi(2) + (f[1] * self.w[1]).powi(2))
            .sum::<T>()
            .sqrt();
        let scale = if norm > T::zero() { norm.recip() } else { T::one() };
        let coeffs = field
            .iter()
            .map(|f| [f[0] * self.w[0] * self.w[0] * scale, f[1] * self.w[1] * self.w[1] * scale])
            .collect();
        *self.reference.borrow_mut() = (nodes, coeffs);
        *self.cache.borrow_mut() = None;
    }

    pub fn evaluate(&self, z: &[T]) -> Option<Evaluation<T>> {
        if let Some((zc, ev)) = self.cache.borrow().as_ref() {
            if zc.as_slice() == z {
                return ev.clone();
            }
        }
        let ev = self.compute(z);
        *self.cache.borrow_mut() = Some((z.to_vec(), ev.clone()));
        ev
    }

    fn compute(&self, z: &[T]) -> Option<Evaluation<T>> {
        let m = self.m;
        let period = z[2 * m];
        if !(period > T::zero()) || !z.iter().all(|v| v.is_finite()) {
            return None;
        }
        let q = self.params_at(z);
        if q.validate().is_err() {
            return None;
        }
        let nodes = self.nodes(z);
        let dt = period / T::from_count(m);
        let cols = if self.free_param { 2 * m + 2 } else { 2 * m + 1 };
        let mut residual = vec![T::zero(); 2 * m + 1];
        let mut jac = Matrix::zeros(2 * m + 1, cols);
        let mut segments = Vec::with_capacity(m);
        let param = self.free_param.then_some(self.active);
        for (i, s) in nodes.iter().enumerate() {
            let flow = flow_with_sensitivity(&q, *s, dt, self.tol, param, false).ok()?;
            let next = nodes[(i + 1) % m];
            let fe = q.rhs(flow.end);
            let sens = flow.sensitivity;
            for r in 0..2 {
                residual[2 * i + r] = flow.end[r] - next[r];
                for c in 0..2 {
                    jac[(2 * i + r, 2 * i + c)] = sens.phi[r][c];
                }
                let j = 2 * ((i + 1) % m) + r;
                jac[(2 * i + r, j)] -= T::one();
                jac[(2 * i + r, 2 * m)] = fe[r] / T::from_count(m);
                if self.free_param {
                    jac[(2 * i + r, 2 * m + 1)] = sens.dparam[r];
                }
            }
            segments.push(sens);
        }
        let reference = self.reference.borrow();
        let (ref_nodes, coeffs) = (&reference.0, &reference.1);
        if ref_nodes.len() == m {
            let mut phase = T::zero();
            for i in 0..m {
                for k in 0..2 {
                    phase += coeffs[i][k] * (nodes[i][k] - ref_nodes[i][k]);
                    jac[(2 * m, 2 * i + k)] = coeffs[i][k];
                }
            }
            residual[2 * m] = phase;
        }
        Some(Evaluation { residual, jacobian: jac, segments })
    }
}

impl<T: Real> System<T> for Shooting<T> {
    fn unknowns(&self) -> usize {
        2 * self.m + 2
    }

    fn residual(&self, z: &[T]) -> Option<Vec<T>> {
        self.evaluate(z).map(|e| e.residual)
    }

    fn jacobian(&self, z: &[T]) -> Option<Matrix<T>> {
        self.evaluate(z).map(|e| e.jacobian)
    }
}
