use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dynamics::{settle, AttractorKind};
use crate::model::presets::{CUMENE_HYDROPEROXIDE, MIC_TANK};
use crate::model::{preset, Parameter};
use crate::steady::{continue_branch, BranchOptions};

struct Fixture {
    scale: TemperatureScale<f64>,
    loci: Loci<f64>,
}

fn fixture(name: &str) -> &'static Fixture {
    static MIC: OnceLock<Fixture> = OnceLock::new();
    static CUMENE: OnceLock<Fixture> = OnceLock::new();
    let cell = if name == MIC_TANK { &MIC } else { &CUMENE };
    cell.get_or_init(|| {
        let pr = preset::<f64>(name).unwrap();
        let scale = pr.dimensional.temperature_scale();
        let window = LociWindow::standard(&scale);
        let loci = compute_loci(&pr.model, &window, &LocusOptions::default()).unwrap();
        Fixture { scale, loci }
    })
}

fn direct_regime(p: &ModelParams<f64>, u_a: f64, f: f64) -> Regime {
    let q = ModelParams {
        ambient_temperature: u_a,
        inverse_residence_time: f,
        boiling_temperature: f64::INFINITY,
        ..*p
    };
    let states = all_steady_states(&q, 4000).unwrap();
    if states.len() > 1 {
        Regime::Bistable
    } else if states[0].stability.is_stable() {
        Regime::UniqueStable
    } else {
        Regime::OscillatoryRunaway
    }
}

#[test]
fn hopf_locus_passes_through_calibrated_point() {
    let fx = fixture(MIC_TANK);
    let target = fx.scale.to_dimensionless(290.15);
    let crossings: Vec<f64> = fx.loci.hopf.iter().flat_map(|l| l.crossings_at(1.7)).collect();
    let best = crossings.iter().map(|c| (c - target).abs()).fold(f64::INFINITY, f64::min);
    assert!(best < 1e-3, "nearest crossing {best:e}");
    let exact: Vec<LocusPoint<f64>> = fx.loci.hopf.iter().flat_map(|l| locus_at_flow(&fx.loci, l, 1.7, 1e-12)).collect();
    assert!(exact.iter().any(|pt| (pt.u_a - target).abs() < 1e-8));
}

#[test]
fn loci_satisfy_augmented_system() {
    for name in [MIC_TANK, CUMENE_HYDROPEROXIDE] {
        let fx = fixture(name);
        for l in fx.loci.hopf.iter().chain(&fx.loci.fold) {
            assert!(!l.is_empty(), "{name}: {:?} locus empty", l.kind);
            assert!(l.max_residual() < 1e-10, "{name}: residual {:e}", l.max_residual());
            let w = fx.loci.window;
            let slack = LociWindow {
                ambient: (w.ambient.0 * (1.0 - 1e-12), w.ambient.1 * (1.0 + 1e-12)),
                flow: (w.flow.0 * (1.0 - 1e-12), w.flow.1 * (1.0 + 1e-12)),
            };
            for pt in &l.points {
                assert!(slack.contains(pt.u_a, pt.f));
            }
            if l.kind == LocusKind::Hopf {
                assert!(l.points.iter().all(|pt| pt.det >= -1e-10 * pt.f.max(1.0).powi(2)));
            }
        }
    }
}

#[test]
fn hopf_locus_points_confirmed_by_one_parameter_continuation() {
    let fx = fixture(MIC_TANK);
    let p = fx.loci.params;
    let opts = BranchOptions::<f64>::default();
    let half = fx.scale.to_dimensionless(290.5) - fx.scale.to_dimensionless(290.0);
    for l in &fx.loci.hopf {
        for pt in l.points.iter().step_by(10) {
            let q = p.with(Parameter::InverseResidenceTime, pt.f);
            let lo = (pt.u_a - half).max(fx.loci.window.ambient.0 * 0.99);
            let br = continue_branch(&q, Parameter::AmbientTemperature, (lo, pt.u_a + half), &opts).unwrap();
            let near = br
                .hopf_points()
                .map(|h| (h.param_value - pt.u_a).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(near < 1e-5, "f = {}: Hopf at u_a {} missed by {near:e}", pt.f, pt.u_a);
        }
    }
}

#[test]
fn random_slices_agree_with_locus_intersections() {
    let fx = fixture(MIC_TANK);
    let p = fx.loci.params;
    let (ua_lo, ua_hi) = fx.loci.window.ambient;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let opts = BranchOptions::<f64>::default();
    let mut compared = 0;
    for _ in 0..10 {
        let f = rng.gen_range(1.6f64.ln()..13.0f64.ln()).exp();
        let q = p.with(Parameter::InverseResidenceTime, f);
        let br = continue_branch(&q, Parameter::AmbientTemperature, (ua_lo, ua_hi), &opts).unwrap();
        let from_branch: Vec<f64> = br.hopf_points().map(|h| h.param_value).collect();
        let from_locus: Vec<f64> = fx
            .loci
            .hopf
            .iter()
            .flat_map(|l| locus_at_flow(&fx.loci, l, f, 1e-12))
            .map(|pt| pt.u_a)
            .collect();
        assert_eq!(from_branch.len(), from_locus.len(), "f = {f}: {from_branch:?} vs {from_locus:?}");
        for h in &from_branch {
            let d = from_locus.iter().map(|c| (c - h).abs()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-5, "f = {f}: {d:e}");
            compared += 1;
        }
    }
    assert!(compared > 0);
}

#[test]
fn folds_only_above_threshold() {
    let fx = fixture(MIC_TANK);
    let f_star = fx.loci.fold_threshold.expect("threshold reported");
    assert!(f_star > 1.7 && f_star < 1e6);
    let window = fx.loci.window;
    let below = slice_special_points(&fx.loci.params, f_star * 0.99, LocusKind::Fold, &window, 4000);
    let above = slice_special_points(&fx.loci.params, f_star * 1.2, LocusKind::Fold, &window, 4000);
    assert!(below.is_empty());
    assert_eq!(above.len(), 2);
    for l in &fx.loci.fold {
        assert!(l.points.iter().all(|pt| pt.f >= f_star * (1.0 - 1e-9)));
    }
}

#[test]
fn no_fold_on_the_reference_slice() {
    let fx = fixture(MIC_TANK);
    let window = LociWindow::from_kelvin(&fx.scale, (282.0, 296.0), (1e-2, 1e6)).unwrap();
    assert!(slice_special_points(&fx.loci.params, 1.7, LocusKind::Fold, &window, 4000).is_empty());
    let range = window.ambient;
    let br = continue_branch(&fx.loci.params, Parameter::AmbientTemperature, range, &BranchOptions::default()).unwrap();
    assert_eq!(br.fold_points().count(), 0);
    for l in &fx.loci.fold {
        assert!(l.crossings_at(1.7).is_empty());
    }
}

#[test]
fn no_reaction_gives_empty_loci() {
    let pr = preset::<f64>(MIC_TANK).unwrap();
    let p = pr.model.with_rate_prefactor(0.0);
    let window = LociWindow::standard(&pr.dimensional.temperature_scale());
    let loci = compute_loci(&p, &window, &LocusOptions::default()).unwrap();
    assert!(loci.hopf.iter().all(|l| l.is_empty() && l.reason.is_some()));
    assert!(loci.fold.iter().all(|l| l.is_empty() && l.reason.is_some()));
    assert!(loci.fold_threshold.is_none());
    let sweep = sweep_for_folds(&p, &window, &LocusOptions::default());
    assert!(sweep.seed.is_none());
    let r = classify_point(window.ambient.0 * 1.1, 1.0, &loci).unwrap();
    assert_eq!(r, Regime::UniqueStable);
}

#[test]
fn classification_examples() {
    let fx = fixture(MIC_TANK);
    let k = |t: f64| fx.scale.to_dimensionless(t);
    assert_eq!(classify_point(k(295.0), 1.7, &fx.loci).unwrap(), Regime::OscillatoryRunaway);
    let f_star = fx.loci.fold_threshold.unwrap();
    // Between the two turning points well above the onset.
    let f = f_star * 2.0;
    let folds: Vec<f64> = fx.loci.fold.iter().flat_map(|l| l.crossings_at(f)).collect();
    assert_eq!(folds.len(), 2);
    let mid = (folds[0] + folds[1]) / 2.0;
    assert_eq!(classify_point(mid, f, &fx.loci).unwrap(), Regime::Bistable);
    assert!(matches!(
        classify_point(1.0, 1.7, &fx.loci),
        Err(Error::OutsideWindow { .. })
    ));
    let on = fx.loci.hopf[0].points[5];
    assert_eq!(classify_point(on.u_a, on.f, &fx.loci).unwrap(), Regime::Boundary);
}

#[test]
fn cold_point_is_unique_stable_in_simulation() {
    let fx = fixture(MIC_TANK);
    let u_a = fx.scale.to_dimensionless(255.0);
    let f = 0.05;
    assert_eq!(classify_point(u_a, f, &fx.loci).unwrap(), Regime::UniqueStable);
    let p = ModelParams {
        ambient_temperature: u_a,
        inverse_residence_time: f,
        boiling_temperature: f64::INFINITY,
        ..fx.loci.params
    };
    let steady = all_steady_states(&p, 4000).unwrap();
    assert_eq!(steady.len(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let s0 = State::new(rng.gen_range(0.0..1.0), u_a + rng.gen_range(0.0..0.01));
        let rep = settle(&p, &s0, 4e3).unwrap();
        assert_eq!(rep.kind, AttractorKind::Steady);
        assert!((rep.terminal_state.u - steady[0].state.u).abs() < 1e-7);
        assert!((rep.terminal_state.x - steady[0].state.x).abs() < 1e-6);
    }
}

#[test]
fn classification_matches_steady_state_count() {
    for name in [MIC_TANK, CUMENE_HYDROPEROXIDE] {
        let fx = fixture(name);
        let w = fx.loci.window;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<(f64, f64)> = (0..600)
            .map(|_| {
                (
                    rng.gen_range(w.ambient.0..w.ambient.1),
                    rng.gen_range(w.flow.0.ln()..w.flow.1.ln()).exp(),
                )
            })
            .collect();
        let cells = classify_many(&fx.loci, &points).unwrap();
        for c in cells {
            if c.regime == Regime::Boundary {
                continue;
            }
            assert_eq!(c.regime, direct_regime(&fx.loci.params, c.u_a, c.f), "{name} at ({}, {})", c.u_a, c.f);
        }
    }
}

#[test]
fn region_maps_have_oscillatory_cells() {
    for name in [MIC_TANK, CUMENE_HYDROPEROXIDE] {
        let fx = fixture(name);
        let map = region_map(&fx.loci, 80, 120).unwrap();
        assert_eq!(map.len(), 80 * 120);
        let count = |r: Regime| map.iter().filter(|c| c.regime == r).count();
        assert!(count(Regime::OscillatoryRunaway) > 0, "{name}");
        assert!(count(Regime::Bistable) > 0, "{name}");
        assert!(count(Regime::UniqueStable) > 0, "{name}");
        // The oscillatory cells are enclosed: each has Hopf crossings on
        // both sides along its row.
        for c in map.iter().filter(|c| c.regime == Regime::OscillatoryRunaway) {
            let xs: Vec<f64> = fx.loci.hopf.iter().flat_map(|l| l.crossings_at(c.f)).collect();
            assert!(xs.iter().any(|&x| x < c.u_a), "{name}");
        }
    }
}

#[test]
fn rejects_mismatched_start_points() {
    let fx = fixture(MIC_TANK);
    let window = fx.loci.window;
    let opts = LocusOptions::default();
    let hopf = slice_special_points(&fx.loci.params, 1.7, LocusKind::Hopf, &window, 4000);
    assert_eq!(hopf.len(), 2);
    assert!(continue_fold_locus(&fx.loci.params, &hopf[0], &window, &opts).is_err());
    let f_star = fx.loci.fold_threshold.unwrap();
    let fold = slice_special_points(&fx.loci.params, 2.0 * f_star, LocusKind::Fold, &window, 4000);
    assert!(matches!(
        continue_hopf_locus(&fx.loci.params, &fold[0], &window, &opts),
        Err(Error::NotHopf(_))
    ));
}

#[test]
fn slice_hopf_points_match_calibration() {
    let fx = fixture(MIC_TANK);
    let hopf = slice_special_points(&fx.loci.params, 1.7, LocusKind::Hopf, &fx.loci.window, 4000);
    let t: Vec<f64> = hopf.iter().map(|h| fx.scale.to_kelvin(h.param_value)).collect();
    assert!((t[0] - 290.15).abs() < 1e-6, "{t:?}");
    assert!(t[1] > 296.0);
}

#[test]
fn window_validation() {
    assert!(LociWindow::new((0.04, 0.03), (1.0, 2.0)).is_err());
    assert!(LociWindow::new((0.03, 0.04), (0.0, 2.0)).is_err());
    assert!(LociWindow::new((0.03, 0.04), (1.0, 2.0)).is_ok());
    let mut opts = LocusOptions::<f64>::default();
    opts.slices = 1;
    assert!(opts.validate().is_err());
}
