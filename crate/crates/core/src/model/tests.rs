use proptest::prelude::*;

use super::presets::{cumene, mic};
use super::*;
use crate::error::Error;
use crate::linalg::{det2, trace2};

fn mic_preset() -> Preset<f64> {
    preset::<f64>(presets::MIC_TANK).unwrap()
}

fn scale() -> TemperatureScale<f64> {
    TemperatureScale::new(mic::ACTIVATION_ENERGY)
}

/// Independent bisection on the reduced heat balance, written out longhand.
fn reduced_root_oracle(p: &ModelParams<f64>, lo: f64, hi: f64) -> Vec<f64> {
    let h = |u: f64| {
        let rho = p.rate_prefactor * (-1.0 / u).exp();
        let f = p.inverse_residence_time;
        f * rho / (f + rho) - (p.heat_capacity * f + p.heat_loss) * (u - p.ambient_temperature)
    };
    let n = 20_000;
    let mut out = Vec::new();
    for i in 0..n {
        let (mut a, mut b) = (
            lo + (hi - lo) * i as f64 / n as f64,
            lo + (hi - lo) * (i + 1) as f64 / n as f64,
        );
        if h(a).signum() == h(b).signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if h(m).signum() == h(a).signum() {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

#[test]
fn ambient_scaling_matches_reported_value() {
    let u_a = scale().to_dimensionless(292.0);
    assert!((u_a - 0.0379).abs() < 1e-4, "u_a = {u_a}");
}

#[test]
fn temperature_round_trip_is_exact() {
    for t in [250.0, 286.0, 292.0, 312.0, 1000.0] {
        let back = scale().to_kelvin(scale().to_dimensionless(t));
        assert!(((back - t) / t).abs() < 1e-9);
    }
}

#[test]
fn heat_capacity_ratio_from_table_values() {
    let dim: DimensionalParams<f64> = DimensionalParams {
        volume: 1.0,
        flow_rate: 1.0,
        feed_concentration: 1.349e4,
        heat_capacity: 1188.0 * 959.9,
        reaction_enthalpy: -65_100.0,
        heat_transfer: 1.0,
        ambient_temperature: 292.0,
        frequency_factor: 3.9e12,
        activation_energy: 64_000.0,
    };
    let p: ModelParams<f64> = nondimensionalize(&dim, 312.0).unwrap();
    assert!((p.heat_capacity - 10.0).abs() < 0.1, "eps = {}", p.heat_capacity);
    // Backing c_f out of eps = 10 and forward-checking.
    let c_f: f64 = presets::feed_concentration_for(dim.heat_capacity, 64_000.0, -65_100.0, 10.0);
    assert!((c_f - 1.349e4).abs() < 10.0, "c_f = {c_f}");
    assert_eq!(p.rate_prefactor, 1.0);
}

#[test]
fn nondimensionalize_rejects_bad_fields() {
    let mut dim = mic_preset().dimensional;
    dim.reaction_enthalpy = 10.0;
    match nondimensionalize(&dim, 312.0) {
        Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "reaction_enthalpy"),
        other => panic!("unexpected {other:?}"),
    }
    let mut dim = mic_preset().dimensional;
    dim.volume = 0.0;
    assert!(matches!(
        nondimensionalize(&dim, 312.0),
        Err(Error::InvalidParameter { field: "volume", .. })
    ));
}

#[test]
fn dimensionalize_examples() {
    let dim = mic_preset().dimensional;
    // 0.0379 is u_a(292 K) rounded to four digits, worth ±0.39 K.
    let (_, t) = dimensionalize(&State::new(0.5, 0.0379), &dim).unwrap();
    assert!((t - 292.0).abs() <= 0.4, "T = {t}");
    let u_a = scale().to_dimensionless(292.0);
    let (_, t) = dimensionalize(&State::new(0.5, u_a), &dim).unwrap();
    assert!((291.8..=292.2).contains(&t), "T = {t}");
    let (c, _) = dimensionalize(&State::new(1.0, 0.04), &dim).unwrap();
    assert_eq!(c, dim.feed_concentration);
    let (_, t) = dimensionalize(&State::new(0.5, 0.04053), &dim).unwrap();
    assert!((t - 312.0).abs() < 0.3, "T = {t}");
}

#[test]
fn vector_field_limits() {
    let mut p = mic_preset().model;
    p.rate_prefactor = 0.0;
    let (a, b) = vector_field(&p, &State::new(1.0, p.ambient_temperature)).unwrap();
    assert_eq!((a, b), (0.0, 0.0));
    let p = mic_preset().model;
    let (a, _) = vector_field(&p, &State::new(0.0, 0.04)).unwrap();
    assert!((a - p.inverse_residence_time).abs() < 1e-15 && a > 0.0);
    assert!(matches!(vector_field(&p, &State::new(0.5, 0.0)), Err(Error::Domain(_))));
    assert!(matches!(jacobian(&p, &State::new(0.5, -1.0)), Err(Error::Domain(_))));
}

#[test]
fn vector_field_vanishes_at_reduced_root() {
    let p = mic_preset().model;
    let roots = reduced_root_oracle(&p, p.ambient_temperature, p.ambient_temperature + 0.02);
    assert_eq!(roots.len(), 1);
    let u = roots[0];
    let x = p.inverse_residence_time / (p.inverse_residence_time + p.rate(u));
    let (a, b) = vector_field(&p, &State::new(x, u)).unwrap();
    assert!(a.abs() < 0.05 && b.abs() < 0.05, "({a}, {b})");
    assert!(a.abs() < 1e-10 && b.abs() < 1e-10);
}

#[test]
fn jacobian_without_reaction_is_diagonal() {
    let mut p = mic_preset().model;
    p.rate_prefactor = 0.0;
    let j = jacobian(&p, &State::new(0.3, 0.04)).unwrap();
    let f = p.inverse_residence_time;
    assert_eq!(j[0][1], 0.0);
    assert_eq!(j[1][0], 0.0);
    assert!((j[0][0] + f).abs() < 1e-15);
    assert!((j[1][1] + (f + p.heat_loss / p.heat_capacity)).abs() < 1e-12);
}

#[test]
fn storage_ambient_steady_state_has_negative_trace() {
    let pre = mic_preset();
    let mut p = pre.model;
    p.ambient_temperature = scale().to_dimensionless(mic::STORAGE_AMBIENT);
    let roots = reduced_root_oracle(&p, p.ambient_temperature, p.ambient_temperature + 0.01);
    assert_eq!(roots.len(), 1);
    let u = roots[0];
    let x = p.quasi_steady_conversion(u);
    let j = jacobian(&p, &State::new(x, u)).unwrap();
    assert!(trace2(&j) < 0.0 && det2(&j) > 0.0);
}

#[test]
fn rate_diagram_properties() {
    let p = mic_preset().model;
    let d = rate_diagram(&p, p.ambient_temperature, p.ambient_temperature + 0.005, 101).unwrap();
    assert_eq!(d.u_grid.len(), 101);
    assert_eq!(d.loss[0], 0.0);
    assert!(d.u_grid.windows(2).all(|w| w[0] < w[1]));
    // Generation saturates at f for a huge rate.
    let big = p.with_rate_prefactor(1e300);
    assert!((big.generation(0.05) - p.inverse_residence_time).abs() < 1e-12);
    assert!(rate_diagram(&p, 0.05, 0.04, 10).is_err());
    assert!(rate_diagram(&p, 0.04, 0.05, 1).is_err());
}

#[test]
fn rate_diagram_crossing_near_305_kelvin() {
    let p = mic_preset().model;
    let s = scale();
    let d = rate_diagram(&p, s.to_dimensionless(280.0), s.to_dimensionless(330.0), 5001).unwrap();
    let crossings = d.crossings();
    assert_eq!(crossings.len(), 1);
    let t = s.to_kelvin(crossings[0]);
    assert!((300.0..=308.0).contains(&t), "crossing at {t} K");
    // Crossing agrees with the reduced-equation root to grid resolution.
    let roots = reduced_root_oracle(&p, p.ambient_temperature, p.ambient_temperature + 0.02);
    let spacing = d.u_grid[1] - d.u_grid[0];
    assert!((roots[0] - crossings[0]).abs() < spacing);
}

#[test]
fn calibration_reproduces_prefactor_magnitude() {
    let pre = mic_preset();
    let cal = pre.calibration.unwrap();
    assert!(
        (cal.log_rate_prefactor - 26.7).abs() < 3f64.ln(),
        "ln sigma = {}",
        cal.log_rate_prefactor
    );
    assert!((cal.steady_kelvin - mic::STEADY_TARGET).abs() <= STEADY_TARGET_BAND);
    // Trace vanishes at the calibrated Hopf point.
    let p = pre.model.with(Parameter::AmbientTemperature, cal.hopf_ambient);
    let u = cal.hopf_state_temperature;
    let j = p.jac([p.quasi_steady_conversion(u), u]);
    assert!(trace2(&j).abs() < 1e-7);
    assert!(det2(&j) > 0.0);
}

#[test]
fn uncalibrated_prefactor_gives_no_instability() {
    let mut p = mic_preset().model;
    p.rate_prefactor = 1.0;
    let s = scale();
    for i in 0..=56 {
        let t = 282.0 + 0.25 * i as f64;
        p.ambient_temperature = s.to_dimensionless(t);
        let roots = reduced_root_oracle(&p, p.ambient_temperature - 1e-6, p.ambient_temperature + 1e-3);
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - p.ambient_temperature).abs() < 1e-9);
        let j = p.jac([p.quasi_steady_conversion(roots[0]), roots[0]]);
        assert!(trace2(&j) < 0.0 && det2(&j) > 0.0);
    }
}

#[test]
fn calibration_rejects_target_at_ambient() {
    let p = mic_preset().model;
    let t = CalibrationTargets {
        steady_temperature: 292.0,
        hopf_temperature: 290.15,
    };
    assert!(matches!(calibrate_sigma(&p, &scale(), &t), Err(Error::Calibration(_))));
}

#[test]
fn presets_carry_caption_values() {
    let m = mic_preset().model;
    assert_eq!(
        (m.heat_capacity, m.heat_loss, m.inverse_residence_time),
        (10.0, 700.0, 1.7)
    );
    assert!((m.boiling_temperature / m.ambient_temperature - 312.0 / 292.0).abs() < 1e-3);
    let c = preset::<f64>(presets::CUMENE_HYDROPEROXIDE).unwrap();
    assert_eq!((c.model.heat_capacity, c.model.heat_loss), (20.0, 700.0));
    assert!(c.user_supplied.iter().any(|f| f == "frequency_factor"));
    assert_eq!(c.model.inverse_residence_time, cumene::INVERSE_RESIDENCE_TIME);
    // The back-solved dimensional set maps onto the same dimensionless values.
    let d = nondimensionalize(&mic_preset().dimensional, mic::BOILING_POINT).unwrap();
    assert!((d.inverse_residence_time - 1.7).abs() < 1e-12);
    assert!((d.heat_loss - 700.0).abs() < 1e-9);
    assert!((d.heat_capacity - 10.0).abs() < 1e-12);
}

#[test]
fn unknown_preset_lists_valid_names() {
    let err = preset::<f64>("tnt").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("mic-tank610") && msg.contains("cumene-hydroperoxide"), "{msg}");
}

#[test]
fn single_precision_model_evaluates() {
    let q = mic_preset().model;
    let p = ModelParams::<f32> {
        inverse_residence_time: q.inverse_residence_time as f32,
        heat_loss: q.heat_loss as f32,
        heat_capacity: q.heat_capacity as f32,
        ambient_temperature: q.ambient_temperature as f32,
        rate_prefactor: q.rate_prefactor as f32,
        boiling_temperature: q.boiling_temperature as f32,
    };
    p.validate().unwrap();
    let (a, b) = vector_field(&p, &State::new(0.3f32, 0.0396)).unwrap();
    assert!(a.is_finite() && b.is_finite());
    let d = rate_diagram(&p, 0.038f32, 0.041, 301).unwrap();
    assert_eq!(d.crossings().len(), 1);
}

fn params_strategy() -> impl Strategy<Value = ModelParams<f64>> {
    (
        -1.0f64..3.0,
        0.0f64..1500.0,
        1.0f64..40.0,
        0.02f64..0.06,
        15.0f64..35.0,
    )
        .prop_map(|(lf, ell, eps, ua, ls)| ModelParams {
            inverse_residence_time: 10f64.powf(lf),
            heat_loss: ell,
            heat_capacity: eps,
            ambient_temperature: ua,
            rate_prefactor: ls.exp(),
            boiling_temperature: f64::INFINITY,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn jacobian_matches_central_differences(
        p in params_strategy(),
        x in 0.0f64..1.0,
        du in 0.0f64..0.02,
    ) {
        let s = [x, p.ambient_temperature + du];
        let j = p.jac(s);
        let scale = j.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for col in 0..2 {
            let h = 1e-6 * s[col].abs().max(1e-3);
            let mut sp = s;
            let mut sm = s;
            sp[col] += h;
            sm[col] -= h;
            let (fp, fm) = (p.rhs(sp), p.rhs(sm));
            for row in 0..2 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let err = (fd - j[row][col]).abs() / scale.max(1e-300);
                prop_assert!(err < 1e-6, "entry ({row},{col}): fd {fd} vs {}", j[row][col]);
            }
        }
    }

    #[test]
    fn invariant_box_faces_point_inward(p in params_strategy(), t in 0.0f64..1.0) {
        let k = p.cooling();
        let top = p.ambient_temperature + p.rate_prefactor / k;
        let u = p.ambient_temperature + t * (top - p.ambient_temperature).min(1.0);
        let x = t;
        prop_assert!(p.rhs([0.0, u])[0] >= 0.0);
        prop_assert!(p.rhs([1.0, u])[0] <= 0.0);
        prop_assert!(p.rhs([x, p.ambient_temperature])[1] >= 0.0);
        // On the upper face ρ < σ so the reaction cannot outpace cooling.
        if top.is_finite() {
            prop_assert!(p.rhs([x, top])[1] <= 0.0);
        }
    }
}
