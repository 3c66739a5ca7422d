//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use exotherm_core::dynamics::{settle, AttractorKind};
use exotherm_core::loci::{slice_special_points, LociWindow, LocusKind};
use exotherm_core::model::presets::{mic, CUMENE_HYDROPEROXIDE, MIC_TANK};
use exotherm_core::model::preset;
use exotherm_core::periodic::{continue_cycles, find_cycle, germ_offset, CycleBranchOptions, CycleOptions, CycleSeed};
use exotherm_core::steady::{all_steady_states, continue_branch, solve_steady, BranchOptions};
use exotherm_core::{CycleBranch, ModelParams, Parameter, SpecialPoint, State, TemperatureScale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{exotherm, outputs, Run};

const AMBIENT_292_SCALED: f64 = 0.0379;
const AMBIENT_SCALED_TOL: f64 = 1e-4;
const BOILING_312_SCALED: f64 = 0.04053;
const BOILING_SCALED_TOL: f64 = 3e-4;
const CROSSING_BAND_K: (f64, f64) = (300.0, 308.0);
const HOPF_BAND_K: (f64, f64) = (288.5, 291.5);
const HOPF_REFERENCE_K: f64 = 290.15;
const REFERENCE_FLOW: f64 = 1.7;
const HOPF_LOCUS_TOL: f64 = 1e-3;
const ORACLE_SETS: usize = 50;
const ORACLE_U_TOL: f64 = 1e-6;
const JACOBIAN_SAMPLES: usize = 1000;
const JACOBIAN_REL_TOL: f64 = 1e-6;
const TRIVIAL_MULTIPLIER_TOL: f64 = 1e-4;
const LIOUVILLE_TOL: f64 = 1e-6;
const AMPLITUDE_EXPONENT: f64 = 0.5;
const AMPLITUDE_EXPONENT_TOL: f64 = 0.05;
const CUMENE_EPS: f64 = 20.0;
const CUMENE_ELL: f64 = 700.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(checks: &[(bool, String)]) -> Verdict {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.0).map(|c| c.1.as_str()).collect();
    if failed.is_empty() {
        Verdict { pass: true, detail: checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join("; ") }
    } else {
        Verdict { pass: false, detail: format!("failed: {}", failed.join("; ")) }
    }
}

fn scale() -> TemperatureScale<f64> {
    TemperatureScale::new(mic::ACTIVATION_ENERGY)
}

fn mic_model() -> ModelParams {
    preset::<f64>(MIC_TANK).unwrap().model
}

fn run_ok(run: &Run) -> (bool, String) {
    (run.code == 0, format!("exit {} {}", run.code, run.stderr.trim()))
}

fn scaling(_: &Path) -> Verdict {
    let s = scale();
    let ua = s.to_dimensionless(292.0);
    let ub = s.to_dimensionless(mic::BOILING_POINT);
    verdict(&[
        ((ua - AMBIENT_292_SCALED).abs() <= AMBIENT_SCALED_TOL, format!("u_a(292 K) = {ua:.6}")),
        ((ub - BOILING_312_SCALED).abs() <= BOILING_SCALED_TOL, format!("u(312 K) = {ub:.6}")),
    ])
}

fn rate_diagram(dir: &Path) -> Verdict {
    let run = exotherm(&["rates", "--preset", MIC_TANK, "--Ta", "292", "--window", "280:330", "--n", "1001"], dir);
    if run.code != 0 {
        return verdict(&[run_ok(&run)]);
    }
    let m = run.manifest();
    let crossings = m["summary"]["crossings"].as_array().unwrap();
    let t: Vec<f64> = crossings.iter().map(|c| c["T_kelvin"].as_f64().unwrap()).collect();
    verdict(&[
        (t.len() == 1, format!("{} crossing(s)", t.len())),
        (
            t.first().is_some_and(|&v| v >= CROSSING_BAND_K.0 && v <= CROSSING_BAND_K.1),
            format!("crossing at {:?} K", t),
        ),
    ])
}

fn steady_branch(dir: &Path) -> Verdict {
    let run = exotherm(&["steady-branch", "--preset", MIC_TANK, "--Ta", "282:296"], dir);
    if run.code != 0 {
        return verdict(&[run_ok(&run)]);
    }
    let s = run.csv("specials.csv");
    let (kind, crit, ta) = (s.text("kind"), s.text("criticality"), s.num("param_kelvin"));
    let hopf = (0..kind.len()).find(|&i| kind[i] == "hopf" && ta[i] >= HOPF_BAND_K.0 && ta[i] <= HOPF_BAND_K.1);
    let b = run.csv("steady_branch.csv");
    let (bt, stab) = (b.num("param_kelvin"), b.text("stability"));
    let below_stable = hopf.is_some_and(|i| (0..bt.len()).filter(|&k| bt[k] < ta[i]).all(|k| stab[k] == "stable"));
    verdict(&[
        (hopf.is_some(), format!("Hopf at {:?} K", hopf.map(|i| ta[i]))),
        (hopf.is_some_and(|i| crit[i] == "subcritical"), "subcritical".into()),
        (below_stable, "steady states below it stable".into()),
    ])
}

fn h1_and_cycles() -> (SpecialPoint, CycleBranch, (f64, f64)) {
    let p = mic_model();
    let range = (scale().to_dimensionless(282.0), scale().to_dimensionless(296.0));
    let b = continue_branch(&p, Parameter::AmbientTemperature, range, &BranchOptions::default()).unwrap();
    let h1 = b.hopf_points().min_by(|a, b| a.param_value.total_cmp(&b.param_value)).unwrap().clone();
    let cycles = continue_cycles(&p, &h1, range, &CycleBranchOptions::default()).unwrap();
    (h1, cycles, range)
}

fn cycle_branch(dir: &Path) -> Verdict {
    let run = exotherm(&["cycle-branch", "--preset", MIC_TANK, "--Ta", "282:296"], dir);
    if run.code != 0 {
        return verdict(&[run_ok(&run)]);
    }
    let m = run.manifest();
    let h1_k = m["summary"]["hopf"]["T_a_kelvin"].as_f64().unwrap();
    let t = run.csv("cycle_branch.csv");
    let (ta, amp, stab, fold) = (t.num("param_kelvin"), t.num("amplitude"), t.text("stability"), t.text("cycle_fold"));
    let k = fold.iter().position(|&f| f == "true");
    let early_unstable = k.is_some_and(|k| (1..k).all(|i| stab[i] == "unstable" && ta[i] < h1_k));
    let big_stable = k.is_some_and(|k| {
        let after: Vec<usize> = (k + 1..ta.len()).filter(|&i| stab[i] == "stable").collect();
        let unstable_max = (0..=k).map(|i| amp[i]).fold(0.0, f64::max);
        !after.is_empty() && after.iter().any(|&i| amp[i] > 2.0 * unstable_max)
    });

    // Bistability: between the cycle fold and H1 a perturbed steady state
    // settles while a start on the large orbit keeps cycling.
    let (h1, cycles, _) = h1_and_cycles();
    let fold_u = cycles.cycle_folds.first().copied();
    let bistable = fold_u.and_then(|fu| {
        let ua = 0.5 * (fu + h1.param_value);
        let mut p = mic_model().with(Parameter::AmbientTemperature, ua);
        p.boiling_temperature = f64::INFINITY;
        let ss = solve_steady(&p, &h1.state).ok()?;
        let kf = cycles.fold_indices[0];
        let big = cycles.orbits[kf + 1..]
            .iter()
            .min_by(|a, b| (a.param_value - ua).abs().total_cmp(&(b.param_value - ua).abs()))?;
        let inside = settle(&p, &State::new(ss.state.x + 1e-5, ss.state.u), 200.0).ok()?;
        let outside = settle(&p, &big.nodes[0], 200.0).ok()?;
        Some((scale().to_kelvin(ua), inside.kind, outside.kind))
    });
    verdict(&[
        (k.is_some(), format!("cycle fold at {:?} K", m["summary"]["cycle_folds_kelvin"])),
        (early_unstable, "orbits leave H1 towards lower T_a and are unstable".into()),
        (big_stable, "stable large-amplitude orbits beyond the fold".into()),
        (
            bistable.is_some_and(|(_, a, b)| a == AttractorKind::Steady && b == AttractorKind::Cycle),
            format!("settle runs {bistable:?}"),
        ),
    ])
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams {
        inverse_residence_time: 10f64.powf(rng.gen_range(-1.0..2.0)),
        heat_loss: rng.gen_range(0.0..2000.0),
        heat_capacity: rng.gen_range(1.0..50.0),
        ambient_temperature: rng.gen_range(0.03..0.05),
        rate_prefactor: rng.gen_range(20.0f64..30.0).exp(),
        boiling_temperature: f64::INFINITY,
    }
}

fn oracles(_: &Path) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_u: f64 = 0.0;
    let mut count_ok = true;
    for _ in 0..ORACLE_SETS {
        let p = random_params(&mut rng);
        let ua = p.ambient_temperature;
        let opts = BranchOptions { landmarks: vec![ua], ..BranchOptions::default() };
        let Ok(b) = continue_branch(&p, Parameter::AmbientTemperature, (ua - 0.002, ua + 0.002), &opts) else {
            count_ok = false;
            continue;
        };
        let roots = all_steady_states(&p, 10_000).unwrap();
        let on_branch = b.points_at(ua);
        count_ok &= on_branch.len() == roots.len();
        for r in &roots {
            let d = on_branch.iter().map(|pt| (pt.state.u - r.state.u).abs()).fold(f64::INFINITY, f64::min);
            worst_u = worst_u.max(d);
        }
    }
    let mut worst_j: f64 = 0.0;
    for _ in 0..JACOBIAN_SAMPLES {
        let p = random_params(&mut rng);
        let s = [rng.gen_range(0.0..1.0), p.ambient_temperature + rng.gen_range(0.0..0.02)];
        let j = p.jac(s);
        let size = j.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for col in 0..2 {
            let h = 1e-6 * s[col].abs().max(1e-3);
            let (mut sp, mut sm) = (s, s);
            sp[col] += h;
            sm[col] -= h;
            let (fp, fm) = (p.rhs(sp), p.rhs(sm));
            for row in 0..2 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                worst_j = worst_j.max((fd - j[row][col]).abs() / size);
            }
        }
    }
    verdict(&[
        (count_ok, format!("{ORACLE_SETS} parameter sets, same steady-state count")),
        (worst_u <= ORACLE_U_TOL, format!("max |Δu| = {worst_u:.2e}")),
        (worst_j <= JACOBIAN_REL_TOL, format!("{JACOBIAN_SAMPLES} Jacobians, max rel err = {worst_j:.2e}")),
    ])
}

fn orbit_numerics(_: &Path) -> Verdict {
    let (h1, cycles, range) = h1_and_cycles();
    let trivial = cycles.orbits.iter().map(|o| (o.floquet.multipliers[0] - 1.0).abs()).fold(0.0, f64::max);
    let liouville = cycles.orbits.iter().map(|o| o.floquet.liouville_error()).fold(0.0, f64::max);
    let p = mic_model();
    let base = germ_offset(&p, &h1, 1e-4, range.1 - range.0).unwrap();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 0..5 {
        let d = base * 10f64.powf(0.5 * k as f64);
        let seed = CycleSeed::Germ { hopf: h1.clone(), offset: d };
        if let Ok(o) = find_cycle(&p, Parameter::AmbientTemperature, &seed, &CycleOptions::default()) {
            xs.push(d.abs().ln());
            ys.push(o.amplitude.ln());
        }
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    verdict(&[
        (!cycles.orbits.is_empty(), format!("{} orbits", cycles.orbits.len())),
        (trivial <= TRIVIAL_MULTIPLIER_TOL, format!("max |μ₁ − 1| = {trivial:.2e}")),
        (liouville <= LIOUVILLE_TOL, format!("max Liouville error = {liouville:.2e}")),
        (
            xs.len() == 5 && (slope - AMPLITUDE_EXPONENT).abs() <= AMPLITUDE_EXPONENT_TOL,
            format!("amplitude exponent {slope:.4} from {} orbits", xs.len()),
        ),
    ])
}

fn loci_counts(run: &Run) -> (usize, usize, usize) {
    let l = run.csv("loci.csv");
    let kinds = l.text("kind");
    let hopf = kinds.iter().filter(|&&k| k == "hopf").count();
    let fold = kinds.iter().filter(|&&k| k == "fold").count();
    let osc = run.csv("region_map.csv").text("regime").iter().filter(|&&r| r == "oscillatory-runaway").count();
    (hopf, fold, osc)
}

fn mic_loci(dir: &Path) -> Verdict {
    let run = exotherm(&["loci", "--preset", MIC_TANK, "--jobs", "4"], dir);
    if run.code != 0 {
        return verdict(&[run_ok(&run)]);
    }
    let m = run.manifest();
    let s = scale();
    let target = s.to_dimensionless(HOPF_REFERENCE_K);
    let near = m["summary"]["hopf_T_a_kelvin_at_model_flow"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| (s.to_dimensionless(t.as_f64().unwrap()) - target).abs())
        .fold(f64::INFINITY, f64::min);
    let f_star = m["summary"]["fold_threshold_f"].as_f64();
    let l = run.csv("loci.csv");
    let (kinds, fs) = (l.text("kind"), l.num("f"));
    let min_fold_f = (0..kinds.len()).filter(|&i| kinds[i] == "fold").map(|i| fs[i]).fold(f64::INFINITY, f64::min);
    let (hopf, fold, osc) = loci_counts(&run);
    let model_f = m["resolved"]["parameters"]["model"]["inverse_residence_time"].as_f64().unwrap();
    // Independent slice searches below the threshold find no fold.
    let p = mic_model();
    let window = LociWindow::standard(&s);
    let no_fold_below = f_star.is_some_and(|fs| {
        [REFERENCE_FLOW, 0.5 * fs, 0.9 * fs, 0.99 * fs]
            .iter()
            .all(|&f| slice_special_points(&p, f, LocusKind::Fold, &window, 4000).is_empty())
    });
    verdict(&[
        (model_f == REFERENCE_FLOW, format!("reference flow {model_f}")),
        (hopf > 0 && near <= HOPF_LOCUS_TOL, format!("Hopf locus within {near:.2e} in u_a of ({HOPF_REFERENCE_K} K, f = {REFERENCE_FLOW})")),
        (
            fold > 0 && f_star.is_some_and(|fs| fs > REFERENCE_FLOW && min_fold_f >= fs * (1.0 - 1e-9)),
            format!("fold locus only above f* = {f_star:?} (lowest fold point f = {min_fold_f:.6})"),
        ),
        (no_fold_below, "no fold on slices below f*".into()),
        (osc > 0, format!("{osc} oscillatory-runaway cells")),
    ])
}

fn cumene_loci(dir: &Path) -> Verdict {
    let run = exotherm(&["loci", "--preset", CUMENE_HYDROPEROXIDE, "--jobs", "4"], dir);
    if run.code != 0 {
        return verdict(&[run_ok(&run)]);
    }
    let m = run.manifest();
    let model = &m["resolved"]["parameters"]["model"];
    let (eps, ell) = (model["heat_capacity"].as_f64().unwrap(), model["heat_loss"].as_f64().unwrap());
    let (hopf, _, osc) = loci_counts(&run);
    // Oscillatory cells lie within the flow span of the Hopf locus.
    let l = run.csv("loci.csv");
    let (kinds, fs) = (l.text("kind"), l.num("f"));
    let hopf_f: Vec<f64> = (0..kinds.len()).filter(|&i| kinds[i] == "hopf").map(|i| fs[i]).collect();
    let (lo, hi) = (hopf_f.iter().copied().fold(f64::INFINITY, f64::min), hopf_f.iter().copied().fold(0.0, f64::max));
    let r = run.csv("region_map.csv");
    let (rf, reg) = (r.num("f"), r.text("regime"));
    let bounded = (0..rf.len()).filter(|&i| reg[i] == "oscillatory-runaway").all(|i| rf[i] >= lo && rf[i] <= hi);
    verdict(&[
        (eps == CUMENE_EPS && ell == CUMENE_ELL, format!("eps = {eps}, ell = {ell}")),
        (hopf > 0, format!("Hopf locus with {hopf} points over f in [{lo:.3}, {hi:.3}]")),
        (osc > 0 && bounded, format!("{osc} oscillatory-runaway cells inside the Hopf locus span")),
    ])
}

fn determinism(dir: &Path) -> Verdict {
    let runs: [&[&str]; 6] = [
        &["rates", "--preset", MIC_TANK],
        &["steady-branch", "--preset", MIC_TANK, "--Ta", "282:296"],
        &["cycle-branch", "--preset", MIC_TANK, "--Ta", "282:296"],
        &["loci", "--preset", MIC_TANK, "--grid", "40x30", "--jobs", "3"],
        &["simulate", "--preset", MIC_TANK, "--Ta", "285", "--tau-end", "5"],
        &["calibrate", "--preset", MIC_TANK],
    ];
    let mut checks = Vec::new();
    for args in runs {
        let a = exotherm(args, &dir.join(format!("{}-a", args[0])));
        let b = exotherm(args, &dir.join(format!("{}-b", args[0])));
        let replay_cfg = a.dir.join("manifest.json");
        let mut replay_args = vec![args[0], "--config", replay_cfg.to_str().unwrap()];
        if args[0] == "loci" {
            replay_args.extend(["--jobs", "1"]);
        }
        let c = exotherm(&replay_args, &dir.join(format!("{}-c", args[0])));
        let (oa, ob, oc) = (outputs(&a), outputs(&b), outputs(&c));
        let same = a.code == 0 && !oa.is_empty() && oa == ob && oa == oc;
        checks.push((same, format!("{}: {} files identical", args[0], oa.len())));
    }
    verdict(&checks)
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    type Check = fn(&Path) -> Verdict;
    let criteria: [(u32, &str, Duration, Check); 9] = [
        (1, "scaling fidelity", Duration::from_secs(1), scaling),
        (2, "rate diagram crossing", Duration::from_secs(1), rate_diagram),
        (3, "steady branch and Hopf point", Duration::from_secs(10), steady_branch),
        (4, "cycle branch and bistability", Duration::from_secs(60), cycle_branch),
        (5, "oracle equivalence", Duration::from_secs(30), oracles),
        (6, "periodic-orbit numerics", Duration::from_secs(60), orbit_numerics),
        (7, "Hopf and fold loci", Duration::from_secs(120), mic_loci),
        (8, "placeholder kinetics pipeline", Duration::from_secs(120), cumene_loci),
        (9, "determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = Vec::new();
    for (n, name, budget, check) in criteria {
        let dir = tmp.path().join(format!("c{n}"));
        fs::create_dir_all(&dir).unwrap();
        let start = Instant::now();
        let v = check(&dir);
        let took = start.elapsed();
        let pass = v.pass && took <= budget;
        println!(
            "criterion {n} {}: {name} ({:.2} s, budget {} s) {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            v.detail
        );
        if !pass {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
