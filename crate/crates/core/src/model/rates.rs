use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;

/// Stationary heat generation and linear heat loss sampled over temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateDiagram<T> {
    pub u_grid: Vec<T>,
    pub generation: Vec<T>,
    pub loss: Vec<T>,
}

impl<T: Real> RateDiagram<T> {
    /// Temperatures where generation and loss cross, located by linear
    /// interpolation between grid points.
    pub fn crossings(&self) -> Vec<T> {
        let g: Vec<T> = self
            .generation
            .iter()
            .zip(&self.loss)
            .map(|(&a, &b)| a - b)
            .collect();
        let mut out = Vec::new();
        for i in 0..g.len() {
            if g[i] == T::zero() {
                out.push(self.u_grid[i]);
                continue;
            }
            if i + 1 < g.len() && g[i + 1] != T::zero() && (g[i] < T::zero()) != (g[i + 1] < T::zero()) {
                let w = g[i] / (g[i] - g[i + 1]);
                out.push(self.u_grid[i] + w * (self.u_grid[i + 1] - self.u_grid[i]));
            }
        }
        out
    }
}

/// Samples `r_g(u) = f ρ/(f + ρ)` and `r_l(u) = (ε f + ℓ)(u − u_a)` on `n`
/// evenly spaced temperatures in `[u_lo, u_hi]`.
pub fn rate_diagram<T: Real>(p: &ModelParams<T>, u_lo: T, u_hi: T, n: usize) -> Result<RateDiagram<T>> {
    if !(u_lo < u_hi) || !(u_lo > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "rate diagram needs 0 < u_lo < u_hi (got {u_lo}, {u_hi})"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("rate diagram needs at least 2 points".into()));
    }
    let step = (u_hi - u_lo) / T::from_count(n - 1);
    let u_grid: Vec<T> = (0..n)
        .map(|i| if i + 1 == n { u_hi } else { u_lo + step * T::from_count(i) })
        .collect();
    Ok(RateDiagram {
        generation: u_grid.iter().map(|&u| p.generation(u)).collect(),
        loss: u_grid.iter().map(|&u| p.loss(u)).collect(),
        u_grid,
    })
}

/// Roots of the reduced heat balance in `[lo, hi]`, bracketed on an `n`-point
/// grid and bisected until the bracket is narrower than `tol`.
pub fn heat_balance_roots<T: Real>(p: &ModelParams<T>, lo: T, hi: T, n: usize, tol: T) -> Vec<T> {
    let n = n.max(2);
    let h = |u: T| p.heat_balance(u);
    let step = (hi - lo) / T::from_count(n - 1);
    let mut roots = Vec::new();
    let mut u0 = lo;
    let mut h0 = h(u0);
    if h0 == T::zero() {
        roots.push(u0);
    }
    for i in 1..n {
        let u1 = if i + 1 == n { hi } else { lo + step * T::from_count(i) };
        let h1 = h(u1);
        if h1 == T::zero() {
            roots.push(u1);
        } else if h0 != T::zero() && (h0 < T::zero()) != (h1 < T::zero()) {
            roots.push(bisect(&h, u0, u1, h0, tol));
        }
        u0 = u1;
        h0 = h1;
    }
    roots
}

pub(crate) fn bisect<T: Real, F: Fn(T) -> T>(g: &F, mut a: T, mut b: T, mut ga: T, tol: T) -> T {
    let two = T::lit(2.0);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = a + (b - a) / two;
        if m == a || m == b {
            break;
        }
        let gm = g(m);
        if gm == T::zero() {
            return m;
        }
        if (gm < T::zero()) == (ga < T::zero()) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    a + (b - a) / two
}
