//! Calibration of the rate prefactor `σ` against a reported steady
//! temperature and Hopf ambient temperature.
//!
//! The scaled rate `σ exp(-1/u)` with `σ = 1` makes reactive heating
//! negligible at the temperatures of interest when the frequency factor is
//! folded into the time scale, so `σ` is solved for directly: at the Hopf
//! ambient temperature the steady heat balance and `trace J = 0` are solved
//! jointly for `(u, ln σ)`, and the root whose steady state at the template's
//! own ambient temperature lies nearest the steady target is kept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::rates::heat_balance_roots;
use crate::model::{ModelParams, TemperatureScale};
use crate::scalar::Real;

/// Reported temperatures the calibration reproduces, in kelvin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets<T> {
    /// Steady reaction temperature at the template's ambient temperature.
    pub steady_temperature: T,
    /// Ambient temperature at which the steady state loses stability.
    pub hopf_temperature: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration<T> {
    pub rate_prefactor: T,
    pub log_rate_prefactor: T,
    /// Dimensionless ambient temperature of the calibrated Hopf point.
    pub hopf_ambient: T,
    /// Steady temperature at the Hopf point.
    pub hopf_state_temperature: T,
    /// Steady temperature at the template's ambient temperature.
    pub steady_temperature: T,
    /// `steady_temperature` in kelvin.
    pub steady_kelvin: T,
}

/// Allowed distance between the calibrated and targeted steady temperature, K.
pub const STEADY_TARGET_BAND: f64 = 3.0;
const LOG_SIGMA_MAX: f64 = 40.0;

struct Reduced<T> {
    f: T,
    eps: T,
    cooling: T,
    ambient: T,
}

impl<T: Real> Reduced<T> {
    /// Residual (heat balance, trace) and its Jacobian in `(u, ln σ)`.
    fn eval(&self, u: T, s: T) -> ([T; 2], [[T; 2]; 2]) {
        let rho = (s - u.recip()).exp();
        let f = self.f;
        let g = f * rho / (f + rho);
        let gp = f * f / ((f + rho) * (f + rho));
        let u2 = u * u;
        let h = g - self.cooling * (u - self.ambient);
        let tr = -(rho + f) + (g / u2 - self.cooling) / self.eps;
        let h_u = gp * rho / u2 - self.cooling;
        let h_s = gp * rho;
        let tr_u = -rho / u2 + (gp * rho / (u2 * u2) - T::lit(2.0) * g / (u2 * u)) / self.eps;
        let tr_s = -rho + gp * rho / (u2 * self.eps);
        ([h, tr], [[h_u, h_s], [tr_u, tr_s]])
    }

    fn trace_at(&self, u: T, s: T) -> T {
        self.eval(u, s).0[1]
    }

    fn newton(&self, mut u: T, mut s: T) -> Option<(T, T)> {
        let norm = |r: [T; 2]| r[0].abs().max(r[1].abs() * T::lit(1e-3));
        let (mut r, mut j) = self.eval(u, s);
        for _ in 0..60 {
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == T::zero() || !det.is_finite() {
                return None;
            }
            let du = -(j[1][1] * r[0] - j[0][1] * r[1]) / det;
            let ds = -(-j[1][0] * r[0] + j[0][0] * r[1]) / det;
            let mut lam = T::one();
            let n0 = norm(r);
            loop {
                let (un, sn) = (u + lam * du, s + lam * ds);
                if un > T::zero() {
                    let (rn, jn) = self.eval(un, sn);
                    if norm(rn) < n0 || lam < T::lit(1e-3) {
                        u = un;
                        s = sn;
                        r = rn;
                        j = jn;
                        break;
                    }
                }
                lam = lam / T::lit(2.0);
                if lam < T::lit(1e-6) {
                    return None;
                }
            }
            if (lam * du).abs() <= T::lit(1e-15) * u.abs() && (lam * ds).abs() <= T::lit(1e-13) {
                break;
            }
        }
        let tol_h = T::lit(1e-12);
        let tol_tr = T::lit(1e-8);
        (r[0].abs() < tol_h && r[1].abs() < tol_tr).then_some((u, s))
    }
}

fn steady_roots<T: Real>(p: &ModelParams<T>, n: usize) -> Vec<T> {
    let lo = p.ambient_temperature;
    let hi = p.steady_temperature_bound() * (T::one() + T::lit(1e-9));
    heat_balance_roots(p, lo, hi, n, T::lit(1e-15))
}

/// Solves for the rate prefactor reproducing `targets`. The template's
/// ambient temperature is the one at which the steady target applies.
pub fn calibrate_sigma<T: Real>(
    template: &ModelParams<T>,
    scale: &TemperatureScale<T>,
    targets: &CalibrationTargets<T>,
) -> Result<Calibration<T>> {
    template.validate()?;
    let ambient_kelvin = scale.to_kelvin(template.ambient_temperature);
    if !(targets.steady_temperature > ambient_kelvin) {
        return Err(Error::Calibration(format!(
            "steady target {} K must exceed the ambient temperature {} K",
            targets.steady_temperature, ambient_kelvin
        )));
    }
    if !(targets.hopf_temperature > T::zero()) {
        return Err(Error::Calibration("Hopf target must be a positive temperature".into()));
    }
    let hopf_ambient = scale.to_dimensionless(targets.hopf_temperature);
    let reduced = Reduced {
        f: template.inverse_residence_time,
        eps: template.heat_capacity,
        cooling: template.cooling(),
        ambient: hopf_ambient,
    };
    let at_hopf = ModelParams {
        ambient_temperature: hopf_ambient,
        ..*template
    };

    // Track the coolest and hottest steady branches over ln σ and bracket
    // sign changes of the trace.
    let n_grid = 801;
    let mut seeds: Vec<(T, T)> = Vec::new();
    let mut prev: Option<(T, [(T, T); 2])> = None;
    for i in 0..n_grid {
        let s = T::lit(LOG_SIGMA_MAX) * T::from_count(i) / T::from_count(n_grid - 1);
        let p = at_hopf.with_rate_prefactor(s.exp());
        let roots = steady_roots(&p, 400);
        let (Some(&lo), Some(&hi)) = (roots.first(), roots.last()) else {
            prev = None;
            continue;
        };
        let tracks = [(lo, reduced.trace_at(lo, s)), (hi, reduced.trace_at(hi, s))];
        if let Some((s0, old)) = prev {
            for k in 0..2 {
                if (old[k].1 < T::zero()) != (tracks[k].1 < T::zero()) {
                    let half = T::lit(0.5);
                    seeds.push(((old[k].0 + tracks[k].0) * half, (s0 + s) * half));
                }
            }
        }
        prev = Some((s, tracks));
    }

    let mut best: Option<(T, Calibration<T>)> = None;
    for (u0, s0) in seeds {
        let Some((u, s)) = reduced.newton(u0, s0) else {
            continue;
        };
        if !(s > T::zero() && s < T::lit(LOG_SIGMA_MAX)) {
            continue;
        }
        // det J = -(f + ρ) h_u / ε, so a Hopf point needs h_u < 0.
        if !(reduced.eval(u, s).1[0][0] < T::zero()) {
            continue;
        }
        let sigma = s.exp();
        let p = template.with_rate_prefactor(sigma);
        let roots = steady_roots(&p, 4000);
        if roots.len() != 1 {
            continue;
        }
        let steady_kelvin = scale.to_kelvin(roots[0]);
        let miss = (steady_kelvin - targets.steady_temperature).abs();
        if miss > T::lit(STEADY_TARGET_BAND) {
            continue;
        }
        let cal = Calibration {
            rate_prefactor: sigma,
            log_rate_prefactor: s,
            hopf_ambient,
            hopf_state_temperature: u,
            steady_temperature: roots[0],
            steady_kelvin,
        };
        if best.as_ref().map_or(true, |(m, _)| miss < *m) {
            best = Some((miss, cal));
        }
    }
    best.map(|(_, c)| c).ok_or_else(|| {
        Error::Calibration(format!(
            "no rate prefactor in (1, e^{LOG_SIGMA_MAX}) places a Hopf point at {} K with a unique steady state within {STEADY_TARGET_BAND} K of {} K",
            targets.hopf_temperature, targets.steady_temperature
        ))
    })
}
