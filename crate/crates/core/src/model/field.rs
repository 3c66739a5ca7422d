//! Right-hand side of the scaled balances and its derivatives.
//!
//! ```text
//! dx/dτ = -x ρ(u) + f (1 - x)
//! du/dτ = [x ρ(u) - (ε f + ℓ)(u - u_a)] / ε,     ρ(u) = σ exp(-1/u)
//! ```

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::model::{ModelParams, Parameter, State};
use crate::scalar::Real;

/// Second-derivative tensor `d2[i][a][b] = ∂²F_i/∂s_a∂s_b`.
pub type Tensor2<T> = [[[T; 2]; 2]; 2];
/// Third-derivative tensor `d3[i][a][b][c]`.
pub type Tensor3<T> = [[[[T; 2]; 2]; 2]; 2];

/// A smooth planar vector field with analytic derivatives up to third order.
pub trait PlanarField<T: Real> {
    fn eval(&self, s: [T; 2]) -> [T; 2];
    fn jacobian(&self, s: [T; 2]) -> Mat2<T>;
    fn second_derivatives(&self, s: [T; 2]) -> Tensor2<T>;
    fn third_derivatives(&self, s: [T; 2]) -> Tensor3<T>;
}

impl<T: Real> ModelParams<T> {
    /// Unchecked vector field.
    #[inline]
    pub fn rhs(&self, s: [T; 2]) -> [T; 2] {
        let [x, u] = s;
        let r = self.rate(u);
        let f = self.inverse_residence_time;
        let react = x * r;
        [
            -react + f * (T::one() - x),
            (react - self.cooling() * (u - self.ambient_temperature)) / self.heat_capacity,
        ]
    }

    /// Unchecked Jacobian with respect to `(x, u)`.
    #[inline]
    pub fn jac(&self, s: [T; 2]) -> Mat2<T> {
        let [x, u] = s;
        let r = self.rate(u);
        let dr = r / (u * u);
        let f = self.inverse_residence_time;
        let eps = self.heat_capacity;
        [
            [-(r + f), -x * dr],
            [r / eps, (x * dr - self.cooling()) / eps],
        ]
    }

    /// Derivative of the vector field with respect to one parameter.
    pub fn param_derivative(&self, s: [T; 2], p: Parameter) -> [T; 2] {
        let [x, u] = s;
        let eps = self.heat_capacity;
        let dt = u - self.ambient_temperature;
        match p {
            Parameter::AmbientTemperature => [T::zero(), self.cooling() / eps],
            Parameter::InverseResidenceTime => [T::one() - x, -dt],
            Parameter::HeatLoss => [T::zero(), -dt / eps],
            Parameter::HeatCapacity => {
                let r = self.rate(u);
                [T::zero(), (self.heat_loss * dt - x * r) / (eps * eps)]
            }
        }
    }
}

impl<T: Real> PlanarField<T> for ModelParams<T> {
    fn eval(&self, s: [T; 2]) -> [T; 2] {
        self.rhs(s)
    }

    fn jacobian(&self, s: [T; 2]) -> Mat2<T> {
        self.jac(s)
    }

    fn second_derivatives(&self, s: [T; 2]) -> Tensor2<T> {
        let [x, u] = s;
        let [_, r1, r2, _] = self.rate_derivatives(u);
        let mut d = [[[T::zero(); 2]; 2]; 2];
        for (i, w) in [(0, -T::one()), (1, self.heat_capacity.recip())] {
            d[i][0][1] = w * r1;
            d[i][1][0] = w * r1;
            d[i][1][1] = w * x * r2;
        }
        d
    }

    fn third_derivatives(&self, s: [T; 2]) -> Tensor3<T> {
        let [x, u] = s;
        let [_, _, r2, r3] = self.rate_derivatives(u);
        let mut d = [[[[T::zero(); 2]; 2]; 2]; 2];
        for (i, w) in [(0, -T::one()), (1, self.heat_capacity.recip())] {
            d[i][0][1][1] = w * r2;
            d[i][1][0][1] = w * r2;
            d[i][1][1][0] = w * r2;
            d[i][1][1][1] = w * x * r3;
        }
        d
    }
}

fn check_domain<T: Real>(s: &State<T>) -> Result<()> {
    if !(s.u > T::zero()) || !s.u.is_finite() || !s.x.is_finite() {
        return Err(Error::Domain(format!(
            "vector field requires u > 0 (got x = {}, u = {})",
            s.x, s.u
        )));
    }
    Ok(())
}

/// Time derivatives `(dx/dτ, du/dτ)` at `s`.
pub fn vector_field<T: Real>(p: &ModelParams<T>, s: &State<T>) -> Result<(T, T)> {
    check_domain(s)?;
    let [a, b] = p.rhs(s.to_array());
    Ok((a, b))
}

/// Analytic Jacobian of the vector field at `s`.
pub fn jacobian<T: Real>(p: &ModelParams<T>, s: &State<T>) -> Result<Mat2<T>> {
    check_domain(s)?;
    Ok(p.jac(s.to_array()))
}
