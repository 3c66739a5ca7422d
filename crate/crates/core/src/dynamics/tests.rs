use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::presets::mic;
use crate::model::{heat_balance_roots, preset, presets, ModelParams, State, TemperatureScale};

fn tol() -> Tolerances<f64> {
    Tolerances::new(1e-10, 1e-12)
}

fn mic_at(kelvin: f64) -> ModelParams<f64> {
    let mut p = preset::<f64>(presets::MIC_TANK).unwrap().model;
    p.ambient_temperature = TemperatureScale::new(mic::ACTIVATION_ENERGY).to_dimensionless(kelvin);
    p
}

#[test]
fn no_reaction_decays_to_feed_state() {
    let mut p = mic_at(292.0);
    p.rate_prefactor = 0.0;
    let ua = p.ambient_temperature;
    let f = p.inverse_residence_time;
    let slowest = f.min(f + p.heat_loss / p.heat_capacity);
    let traj = integrate(&p, &State::new(0.5, ua + 0.01), 50.0 / slowest, tol(), &[]).unwrap();
    let end = traj.last_state().unwrap();
    assert!((end.x - 1.0).abs() < 1e-8 && (end.u - ua).abs() < 1e-8, "{end:?}");
    assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn mic_runs_away_at_292() {
    let p = mic_at(mic::AMBIENT);
    let traj = integrate(&p, &State::new(1.0, p.ambient_temperature), 200.0, tol(), &[EventSpec::boiling(&p)])
        .unwrap();
    assert!(traj.halted);
    let ev = traj.halting_event().unwrap();
    assert!(ev.state.u >= p.boiling_temperature);
    assert!(ev.time > 0.0 && ev.time < 200.0);
    let (t, s) = detect_runaway(&traj, p.boiling_temperature).unwrap();
    assert!((t - ev.time).abs() < 1e-10, "{t} vs {}", ev.time);
    assert!((s.u - p.boiling_temperature).abs() < 1e-12);
}

#[test]
fn event_localised_to_tolerance() {
    let p = mic_at(mic::AMBIENT);
    let traj = integrate(&p, &State::new(1.0, p.ambient_temperature), 200.0, tol(), &[EventSpec::boiling(&p)])
        .unwrap();
    let ev = traj.halting_event().unwrap();
    // Re-integrate to just before and just after the reported time.
    let before = integrate(&p, &State::new(1.0, p.ambient_temperature), ev.time - 2e-10, tol(), &[]).unwrap();
    let after = integrate(&p, &State::new(1.0, p.ambient_temperature), ev.time + 2e-10, tol(), &[]).unwrap();
    let ub = p.boiling_temperature;
    let slope = (after.last_state().unwrap().u - before.last_state().unwrap().u) / 4e-10;
    assert!(slope > 0.0);
    assert!(before.last_state().unwrap().u < ub + slope * 1e-9);
    assert!(after.last_state().unwrap().u > ub - slope * 1e-9);
}

#[test]
fn random_starts_stay_in_box() {
    let p = mic_at(mic::AMBIENT);
    let ua = p.ambient_temperature;
    let top = ua + p.rate_prefactor / p.cooling();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let loose = Tolerances::new(1e-8, 1e-10);
    for _ in 0..100 {
        let s0 = State::new(rng.gen_range(0.0..=1.0), rng.gen_range(ua..p.boiling_temperature));
        let mut opts = IntegrateOptions::new(loose).with_events(vec![EventSpec::boiling(&p)]);
        opts.record_steps = true;
        let traj = integrate_with(&p, &s0, 50.0, &opts).unwrap();
        for s in &traj.states {
            assert!(s.x >= -1e-9 && s.x <= 1.0 + 1e-9, "{s:?}");
            assert!(s.u >= ua - 1e-9 && s.u <= top, "{s:?}");
        }
    }
}

#[test]
fn halving_tolerances_converges() {
    let p = mic_at(mic::STORAGE_AMBIENT);
    let s0 = State::new(1.0, p.ambient_temperature);
    let coarse = integrate(&p, &s0, 20.0, Tolerances::new(1e-8, 1e-10), &[]).unwrap();
    let fine = integrate(&p, &s0, 20.0, Tolerances::new(5e-9, 5e-11), &[]).unwrap();
    let (a, b) = (coarse.last_state().unwrap(), fine.last_state().unwrap());
    assert!((a.x - b.x).abs() < 10.0 * 5e-9);
    assert!((a.u - b.u).abs() < 10.0 * 5e-9);
}

#[test]
fn flow_is_autonomous() {
    let p = mic_at(mic::STORAGE_AMBIENT);
    let s0 = State::new(1.0, p.ambient_temperature);
    let mut opts = IntegrateOptions::new(tol());
    opts.output_times = vec![3.0];
    let whole = integrate_with(&p, &s0, 8.0, &opts).unwrap();
    let i = whole.times.iter().position(|&t| t == 3.0).unwrap();
    let mid = whole.states[i];
    let rest = integrate(&p, &mid, 5.0, tol(), &[]).unwrap();
    let (a, b) = (whole.last_state().unwrap(), rest.last_state().unwrap());
    assert!((a.x - b.x).abs() < 1e-8 && (a.u - b.u).abs() < 1e-8, "{a:?} {b:?}");
}

#[test]
fn sensitivity_matches_differences_and_liouville() {
    let p = mic_at(mic::STORAGE_AMBIENT);
    let u = heat_balance_roots(&p, p.ambient_temperature, p.ambient_temperature + 0.01, 200, 1e-15)[0];
    let y0 = [p.quasi_steady_conversion(u) + 0.02, u + 2e-4];
    let t = Tolerances::new(1e-12, 1e-14);
    let flow = flow_with_sensitivity(&p, y0, 2.0, t, Some(crate::model::Parameter::AmbientTemperature), false)
        .unwrap();
    let s = flow.sensitivity;
    let det = s.phi[0][0] * s.phi[1][1] - s.phi[0][1] * s.phi[1][0];
    assert!((det.abs().ln() - s.trace_integral).abs() < 1e-6, "{} {} {}", det.abs().ln(), s.log_det, s.trace_integral);
    assert!((s.log_det - s.trace_integral).abs() < 1e-6);
    for j in 0..2 {
        let mut yp = y0;
        let mut ym = y0;
        let d = 1e-6 * y0[j].abs();
        yp[j] += d;
        ym[j] -= d;
        let ep = flow_with_sensitivity(&p, yp, 2.0, t, None, false).unwrap().end;
        let em = flow_with_sensitivity(&p, ym, 2.0, t, None, false).unwrap().end;
        for i in 0..2 {
            let fd = (ep[i] - em[i]) / (2.0 * d);
            assert!((fd - s.phi[i][j]).abs() < 1e-4 * (1.0 + fd.abs()), "phi[{i}][{j}] {fd} {}", s.phi[i][j]);
        }
    }
    let d = 1e-7;
    let ep = flow_with_sensitivity(&p.with(crate::model::Parameter::AmbientTemperature, p.ambient_temperature + d), y0, 2.0, t, None, false).unwrap().end;
    let em = flow_with_sensitivity(&p.with(crate::model::Parameter::AmbientTemperature, p.ambient_temperature - d), y0, 2.0, t, None, false).unwrap().end;
    for i in 0..2 {
        let fd = (ep[i] - em[i]) / (2.0 * d);
        assert!((fd - s.dparam[i]).abs() < 1e-4 * (1.0 + fd.abs()), "dparam[{i}] {fd} {}", s.dparam[i]);
    }
}

#[test]
fn detect_runaway_cases() {
    let flat = Trajectory {
        times: vec![0.0, 1.0, 2.0],
        states: vec![State::new(1.0, 0.03); 3],
        ..Default::default()
    };
    assert!(detect_runaway(&flat, 0.04).is_none());
    let ramp: Trajectory<f64> = Trajectory {
        times: vec![0.0, 1.0],
        states: vec![State::new(1.0, 0.0), State::new(1.0, 1.0)],
        ..Default::default()
    };
    let (t, _) = detect_runaway(&ramp, 0.3).unwrap();
    assert!((t - 0.3).abs() < 1e-10);
}

#[test]
fn rejects_bad_inputs() {
    let p = mic_at(292.0);
    let s0 = State::new(1.0, p.ambient_temperature);
    assert!(integrate(&p, &s0, 0.0, tol(), &[]).is_err());
    assert!(integrate(&p, &s0, 1.0, Tolerances::new(-1.0, 1e-12), &[]).is_err());
}

#[test]
fn settle_storage_ambient_is_steady() {
    let p = mic_at(mic::STORAGE_AMBIENT);
    let roots = heat_balance_roots(&p, p.ambient_temperature, p.ambient_temperature + 0.01, 200, 1e-15);
    assert_eq!(roots.len(), 1);
    let u = roots[0];
    let x = p.quasi_steady_conversion(u);
    let r = settle(&p, &State::new(x - 0.01, u + 1e-4), 400.0).unwrap();
    assert_eq!(r.kind, AttractorKind::Steady);
    assert!(r.period.is_none());
    assert!((r.terminal_state.u - u).abs() < 1e-8 && (r.terminal_state.x - x).abs() < 1e-8, "{r:?}");
}

#[test]
fn settle_without_reaction() {
    let mut p = mic_at(292.0);
    p.rate_prefactor = 0.0;
    let r = settle(&p, &State::new(0.2, p.ambient_temperature + 0.003), 400.0).unwrap();
    assert_eq!(r.kind, AttractorKind::Steady);
    assert!((r.terminal_state.x - 1.0).abs() < 1e-8);
    assert!((r.terminal_state.u - p.ambient_temperature).abs() < 1e-8);
}

#[test]
fn settle_runaway_and_horizon_check() {
    let p = mic_at(mic::AMBIENT);
    let s0 = State::new(1.0, p.ambient_temperature);
    assert!(settle(&p, &s0, 1.0).is_err());
    let r = settle(&p, &s0, 400.0).unwrap();
    assert_eq!(r.kind, AttractorKind::Runaway);
    assert!(r.runaway_time.is_some());
}

#[test]
fn settle_finds_large_cycle() {
    let mut p = mic_at(mic::AMBIENT);
    p.boiling_temperature = f64::INFINITY;
    let s0 = State::new(1.0, p.ambient_temperature);
    let r = settle(&p, &s0, 600.0).unwrap();
    assert_eq!(r.kind, AttractorKind::Cycle, "{r:?}");
    let period = r.period.unwrap();
    assert!(period > 0.0 && r.amplitude > 0.0);
    let mut o = SettleOptions::default();
    o.section_fraction = 0.25;
    let r2 = settle_with(&p, &s0, 600.0, &o).unwrap();
    assert!(((r2.period.unwrap() - period) / period).abs() < 1e-6);
}
