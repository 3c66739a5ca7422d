//! The analyses behind each subcommand.

use std::collections::BTreeMap;

use exotherm_core::dynamics::{detect_runaway, integrate_with, EventSpec, IntegrateOptions, Tolerances, EVENT_TIME_TOLERANCE};
use exotherm_core::export;
use exotherm_core::loci::{classify_many, compute_loci, locus_at_flow, region_grid, LociWindow, LocusOptions, LocusPoint, Regime};
use exotherm_core::model::presets::mic;
use exotherm_core::model::{calibrate_sigma, heat_balance_roots, rate_diagram, CalibrationTargets};
use exotherm_core::periodic::{continue_cycles, CycleBranchOptions, CycleStability};
use exotherm_core::steady::{continue_branch, BranchOptions, SpecialKind, SteadyPoint};
use exotherm_core::{Branch, Locus, Parameter, SpecialPoint, State};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{CalibrateOptions, CycleOptions, LociOptions, RatesOptions, Resolved, SimulateOptions, SteadyOptions};
use crate::manifest::Output;
use crate::CliError;

#[derive(Debug, Default)]
pub struct Outcome {
    pub summary: Value,
    pub tolerances: BTreeMap<String, f64>,
    pub diagnostics: Vec<String>,
    pub runaway: bool,
}

fn tolerances(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn kelvin_range(r: &Resolved, range: [f64; 2]) -> (f64, f64) {
    (r.u(range[0]), r.u(range[1]))
}

fn special_json(r: &Resolved, s: &SpecialPoint) -> Value {
    json!({
        "kind": s.kind.label(),
        "u_a": s.param_value,
        "T_a_kelvin": r.kelvin(s.param_value),
        "x": s.state.x,
        "u": s.state.u,
        "T_kelvin": r.kelvin(s.state.u),
        "frequency": s.frequency,
        "l1": s.l1,
        "criticality": s.criticality.map(|c| c.label()),
    })
}

/// Heat generation and loss over a temperature window.
pub fn rates(opts: &mut RatesOptions, r: &Resolved, out: &mut Output) -> Result<Outcome, CliError> {
    let ta = r.ambient_kelvin();
    let window = *opts.t_range.get_or_insert([ta - 10.0, ta + 40.0]);
    let n = *opts.points.get_or_insert(501);
    let (lo, hi) = kelvin_range(r, window);
    let diagram = rate_diagram(&r.model, lo, hi, n)?;
    out.csv("rates.csv", "heat generation and loss against temperature", |w| {
        export::write_rates(w, &diagram, Some(&r.scale))
    })?;
    let root_tol = 1e-15;
    let crossings: Vec<Value> = heat_balance_roots(&r.model, lo, hi, 20 * n, root_tol)
        .into_iter()
        .map(|u| {
            let s = SteadyPoint::classify(&r.model, State::new(r.model.quasi_steady_conversion(u), u), r.model.ambient_temperature);
            json!({
                "u": u,
                "T_kelvin": r.kelvin(u),
                "x": s.state.x,
                "stability": s.stability.label(),
            })
        })
        .collect();
    let grid: Vec<f64> = diagram.crossings().into_iter().map(|u| r.kelvin(u)).collect();
    Ok(Outcome {
        summary: json!({
            "ambient_kelvin": ta,
            "window_kelvin": window,
            "points": n,
            "crossing_count": crossings.len(),
            "crossings": crossings,
            "grid_crossings_kelvin": grid,
        }),
        tolerances: tolerances(&[("crossing_bracket", root_tol)]),
        ..Default::default()
    })
}

fn steady_options(opts: &mut SteadyOptions) -> BranchOptions<f64> {
    let mut bo = BranchOptions::new(*opts.ds.get_or_insert(1e-3));
    bo.ds_max = *opts.ds_max.get_or_insert(bo.ds_max);
    bo.max_points = *opts.max_points.get_or_insert(bo.max_points);
    bo
}

fn branch_summary(r: &Resolved, b: &Branch) -> Value {
    let first_hopf = b.specials.iter().filter(|s| s.kind == SpecialKind::Hopf).map(|s| s.param_value).reduce(f64::min);
    // Stability of the piece traced from the cold end, below the first Hopf point.
    let stable_below = first_hopf.map(|h| {
        b.pieces()
            .first()
            .map(|piece| piece.iter().filter(|p| p.param_value < h).all(|p| p.stability.is_stable()))
            .unwrap_or(false)
    });
    json!({
        "range_kelvin": [r.kelvin(b.range.0), r.kelvin(b.range.1)],
        "points": b.points.len(),
        "pieces": b.segments.len(),
        "specials": b.specials.iter().map(|s| special_json(r, s)).collect::<Vec<_>>(),
        "stable_below_first_hopf": stable_below,
    })
}

/// Steady states against ambient temperature, with folds and Hopf points.
pub fn steady_branch(opts: &mut SteadyOptions, r: &Resolved, out: &mut Output) -> Result<Outcome, CliError> {
    let ta = r.ambient_kelvin();
    let window = *opts.t_range.get_or_insert([ta - 10.0, ta + 10.0]);
    let bo = steady_options(opts);
    let b = continue_branch(&r.model, Parameter::AmbientTemperature, kelvin_range(r, window), &bo)?;
    out.csv("steady_branch.csv", "steady states along the ambient temperature", |w| {
        export::write_branch(w, &b, Some(&r.scale))
    })?;
    out.csv("specials.csv", "fold and Hopf points", |w| export::write_specials(w, &b, Some(&r.scale)))?;
    Ok(Outcome {
        summary: branch_summary(r, &b),
        tolerances: tolerances(&[("residual", bo.residual_tol), ("ds", bo.ds), ("ds_max", bo.ds_max)]),
        diagnostics: b.diagnostics.clone(),
        runaway: false,
    })
}

/// Periodic orbits born at a Hopf point of the steady branch.
pub fn cycle_branch(opts: &mut CycleOptions, r: &Resolved, out: &mut Output) -> Result<Outcome, CliError> {
    let ta = r.ambient_kelvin();
    let window = *opts.t_range.get_or_insert([ta - 10.0, ta + 10.0]);
    let range = kelvin_range(r, window);
    let index = *opts.hopf_index.get_or_insert(0);
    let steady = continue_branch(&r.model, Parameter::AmbientTemperature, range, &BranchOptions::default())?;
    let mut hopfs: Vec<&SpecialPoint> = steady.specials.iter().filter(|s| s.kind == SpecialKind::Hopf).collect();
    hopfs.sort_by(|a, b| a.param_value.total_cmp(&b.param_value));
    let Some(hopf) = hopfs.get(index) else {
        return Err(CliError::Convergence(format!(
            "no Hopf point number {index} in {}-{} K ({} found)",
            window[0],
            window[1],
            hopfs.len()
        )));
    };
    let mut co = CycleBranchOptions::default();
    co.cycle.segments = *opts.segments.get_or_insert(co.cycle.segments);
    co.max_orbits = *opts.max_orbits.get_or_insert(co.max_orbits);
    co.ds_max = *opts.ds_max.get_or_insert(co.ds_max);
    let b = continue_cycles(&r.model, hopf, range, &co)?;
    let u_boil = r.model.boiling_temperature;
    out.csv("cycle_branch.csv", "periodic orbits along the ambient temperature", |w| {
        export::write_cycle_branch(w, &b, u_boil, Some(&r.scale))
    })?;
    if let Some(first) = b.orbits.first() {
        out.csv("orbit_first.csv", "one period of the orbit nearest the Hopf point", |w| {
            export::write_orbit(w, first, Some(&r.scale))
        })?;
    }
    for (k, &i) in b.fold_indices.iter().enumerate() {
        out.csv(&format!("orbit_fold_{k}.csv"), "one period of a cycle-fold orbit", |w| {
            export::write_orbit(w, &b.orbits[i], Some(&r.scale))
        })?;
    }
    if let Some(last) = b.orbits.last() {
        out.csv("orbit_last.csv", "one period of the last orbit", |w| export::write_orbit(w, last, Some(&r.scale)))?;
    }
    let count = |stable: bool| b.orbits.iter().filter(|o| (o.stability == CycleStability::Stable) == stable).count();
    let max_amplitude = b.orbits.iter().map(|o| o.amplitude).fold(0.0, f64::max);
    Ok(Outcome {
        summary: json!({
            "hopf": special_json(r, hopf),
            "hopf_count": hopfs.len(),
            "orbits": b.orbits.len(),
            "stable_orbits": count(true),
            "unstable_orbits": count(false),
            "vented_orbits": b.orbits.iter().filter(|o| o.vented(u_boil)).count(),
            "cycle_folds_kelvin": b.cycle_folds.iter().map(|&u| r.kelvin(u)).collect::<Vec<_>>(),
            "max_amplitude": max_amplitude,
            "last_T_a_kelvin": b.orbits.last().map(|o| r.kelvin(o.param_value)),
        }),
        tolerances: tolerances(&[
            ("shooting_residual", co.cycle.residual_tol),
            ("integrator_rel", co.cycle.tolerances.rel),
            ("integrator_abs", co.cycle.tolerances.abs),
            ("ds_max", co.ds_max),
        ]),
        diagnostics: steady.diagnostics.iter().chain(&b.diagnostics).cloned().collect(),
        runaway: false,
    })
}

fn locus_json(r: &Resolved, l: &Locus) -> Value {
    let span = |g: &dyn Fn(&LocusPoint<f64>) -> f64| {
        let v: Vec<f64> = l.points.iter().map(g).collect();
        v.iter().copied().reduce(f64::min).zip(v.iter().copied().reduce(f64::max))
    };
    json!({
        "kind": l.kind.label(),
        "points": l.points.len(),
        "closed": l.closed,
        "ends": l.ends.map(|e| e.label()),
        "f_span": span(&|p| p.f),
        "T_a_kelvin_span": span(&|p| r.kelvin(p.u_a)),
        "max_residual": l.max_residual(),
        "reason": l.reason,
    })
}

/// Hopf and fold loci in the (ambient temperature, flow) plane and a regime map.
pub fn loci(opts: &mut LociOptions, r: &Resolved, jobs: usize, out: &mut Output) -> Result<Outcome, CliError> {
    let t = *opts.t_range.get_or_insert([250.0, 450.0]);
    let f = *opts.f_range.get_or_insert([1e-2, 1e6]);
    let [na, nf] = *opts.grid.get_or_insert([160, 120]);
    if na == 0 || nf == 0 {
        return Err(CliError::Config("region grid needs at least one cell in each direction".into()));
    }
    let mut lo = LocusOptions::default();
    lo.slices = *opts.slices.get_or_insert(lo.slices);
    let window = LociWindow::from_kelvin(&r.scale, (t[0], t[1]), (f[0], f[1]))?;
    let loci = compute_loci(&r.model, &window, &lo)?;
    out.csv("loci.csv", "Hopf and fold loci", |w| export::write_loci(w, &loci, Some(&r.scale)))?;
    let grid = region_grid(&loci.window, na, nf);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        grid.par_chunks(na)
            .map(|row| classify_many(&loci, row))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let cells: Vec<_> = rows.into_iter().flatten().collect();
    out.csv("region_map.csv", "regime of each grid cell", |w| export::write_region_map(w, &cells, Some(&r.scale)))?;

    let mut counts = BTreeMap::new();
    for regime in [Regime::OscillatoryRunaway, Regime::Bistable, Regime::UniqueStable, Regime::Boundary] {
        counts.insert(regime.label(), cells.iter().filter(|c| c.regime == regime).count());
    }
    let f_here = r.model.inverse_residence_time;
    let at_flow: Vec<f64> = if window.contains(window.ambient.0, f_here) {
        loci.hopf
            .iter()
            .flat_map(|l| locus_at_flow(&loci, l, f_here, lo.residual_tol))
            .map(|p| r.kelvin(p.u_a))
            .collect()
    } else {
        Vec::new()
    };
    Ok(Outcome {
        summary: json!({
            "window_kelvin": t,
            "window_flow": f,
            "grid": [na, nf],
            "fold_threshold_f": loci.fold_threshold,
            "hopf": loci.hopf.iter().map(|l| locus_json(r, l)).collect::<Vec<_>>(),
            "fold": loci.fold.iter().map(|l| locus_json(r, l)).collect::<Vec<_>>(),
            "hopf_T_a_kelvin_at_model_flow": at_flow,
            "regime_counts": counts,
        }),
        tolerances: tolerances(&[
            ("residual", lo.residual_tol),
            ("ds_max", lo.ds_max),
            ("boundary", exotherm_core::loci::BOUNDARY_TOLERANCE),
        ]),
        diagnostics: loci.notes.clone(),
        runaway: false,
    })
}

/// Time integration from a single initial state with runaway detection.
pub fn simulate(opts: &mut SimulateOptions, r: &Resolved, out: &mut Output) -> Result<Outcome, CliError> {
    let tau_end = *opts.tau_end.get_or_insert(100.0);
    let x0 = *opts.x0.get_or_insert(1.0);
    let defaults = Tolerances::<f64>::default();
    let tol = Tolerances::new(*opts.rel_tol.get_or_insert(defaults.rel), *opts.abs_tol.get_or_insert(defaults.abs));
    // Left unset so that a repeated run starts from exactly the same state.
    let u0 = opts.t0_kelvin.map_or(r.model.ambient_temperature, |t| r.u(t));
    let mut io = IntegrateOptions::new(tol);
    if r.model.boiling_temperature.is_finite() {
        io.events.push(EventSpec::boiling(&r.model));
    }
    if let Some(n) = opts.samples {
        if n < 2 {
            return Err(CliError::Config("simulate needs at least 2 samples".into()));
        }
        io.record_steps = false;
        io.output_times = (0..n).map(|i| tau_end * i as f64 / (n - 1) as f64).collect();
    }
    let s0 = State::new(x0, u0);
    s0.validate()?;
    let traj = integrate_with(&r.model, &s0, tau_end, &io)?;
    out.csv("trajectory.csv", "time series of conversion and temperature", |w| {
        export::write_trajectory(w, &traj, Some(&r.scale))
    })?;
    let runaway = match traj.halting_event() {
        Some(e) => Some((e.time, e.state)),
        None => detect_runaway(&traj, r.model.boiling_temperature),
    };
    let last = traj.last_state().unwrap_or(s0);
    let t_last = traj.times.last().copied().unwrap_or(0.0);
    let max_u = traj.states.iter().map(|s| s.u).fold(f64::NEG_INFINITY, f64::max);
    Ok(Outcome {
        summary: json!({
            "ambient_kelvin": r.ambient_kelvin(),
            "initial": { "x": x0, "u": u0, "T_kelvin": r.kelvin(u0) },
            "tau_end": tau_end,
            "samples": traj.times.len(),
            "halted": traj.halted,
            "runaway": runaway.is_some(),
            "runaway_tau": runaway.map(|(t, _)| t),
            "runaway_x": runaway.map(|(_, s)| s.x),
            "boiling_kelvin": r.boiling_kelvin,
            "max_T_kelvin": r.kelvin(max_u),
            "final": { "tau": t_last, "x": last.x, "u": last.u, "T_kelvin": r.kelvin(last.u) },
        }),
        tolerances: tolerances(&[("rel", tol.rel), ("abs", tol.abs), ("event_time", EVENT_TIME_TOLERANCE)]),
        diagnostics: Vec::new(),
        runaway: runaway.is_some(),
    })
}

/// Rate prefactor matching a steady temperature and a Hopf ambient temperature.
pub fn calibrate(opts: &mut CalibrateOptions, r: &Resolved, out: &mut Output) -> Result<Outcome, CliError> {
    let targets = CalibrationTargets {
        steady_temperature: *opts.steady_kelvin.get_or_insert(mic::STEADY_TARGET),
        hopf_temperature: *opts.hopf_kelvin.get_or_insert(mic::HOPF_TARGET),
    };
    let c = calibrate_sigma(&r.model, &r.scale, &targets)?;
    out.csv("calibration.csv", "calibrated rate prefactor", |w| {
        use std::io::Write;
        writeln!(
            w,
            "log_rate_prefactor,rate_prefactor,hopf_ambient,hopf_T_a_kelvin,hopf_state_temperature,steady_temperature,steady_kelvin"
        )?;
        let row = [
            c.log_rate_prefactor,
            c.rate_prefactor,
            c.hopf_ambient,
            r.kelvin(c.hopf_ambient),
            c.hopf_state_temperature,
            c.steady_temperature,
            c.steady_kelvin,
        ]
        .map(export::num);
        writeln!(w, "{}", row.join(","))
    })?;
    Ok(Outcome {
        summary: json!({
            "targets_kelvin": { "steady": targets.steady_temperature, "hopf": targets.hopf_temperature },
            "log_rate_prefactor": c.log_rate_prefactor,
            "rate_prefactor": c.rate_prefactor,
            "hopf_T_a_kelvin": r.kelvin(c.hopf_ambient),
            "steady_kelvin": c.steady_kelvin,
            "calibrated_model": r.model.with_rate_prefactor(c.rate_prefactor),
        }),
        ..Default::default()
    })
}
