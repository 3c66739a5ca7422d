//! CSV writers for the analysis results.
//!
//! Numbers are written in scientific notation with 17 significant digits, so
//! files round-trip `f64` exactly and do not depend on the locale. Kelvin
//! columns appear only when a [`TemperatureScale`] is supplied.

use std::io::{self, Write};

use crate::dynamics::Trajectory;
use crate::loci::{Loci, RegionCell};
use crate::model::{Parameter, RateDiagram, TemperatureScale};
use crate::periodic::{CycleBranch, Orbit};
use crate::scalar::Real;
use crate::steady::{Branch, SpecialKind, SpecialPoint};

/// Fixed-precision rendering of one number.
pub fn num<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

fn opt<T: Real>(v: Option<T>) -> String {
    v.map(num).unwrap_or_default()
}

fn kelvin<T: Real>(scale: Option<&TemperatureScale<T>>, u: T) -> Option<String> {
    scale.map(|s| num(s.to_kelvin(u)))
}

fn row<W: Write>(w: &mut W, cells: impl IntoIterator<Item = Option<String>>) -> io::Result<()> {
    let line: Vec<String> = cells.into_iter().flatten().collect();
    writeln!(w, "{}", line.join(","))
}

fn header<W: Write>(w: &mut W, cols: &[(&str, bool)]) -> io::Result<()> {
    let names: Vec<&str> = cols.iter().filter(|c| c.1).map(|c| c.0).collect();
    writeln!(w, "{}", names.join(","))
}

/// Columns `u, [T_kelvin], r_g, r_l`.
pub fn write_rates<T: Real, W: Write>(w: &mut W, d: &RateDiagram<T>, scale: Option<&TemperatureScale<T>>) -> io::Result<()> {
    let k = scale.is_some();
    header(w, &[("u", true), ("T_kelvin", k), ("r_g", true), ("r_l", true)])?;
    for i in 0..d.u_grid.len() {
        let u = d.u_grid[i];
        row(w, [Some(num(u)), kelvin(scale, u), Some(num(d.generation[i])), Some(num(d.loss[i]))])?;
    }
    Ok(())
}

fn special_label<T: Real>(sp: &SpecialPoint<T>) -> String {
    match (sp.kind, sp.criticality) {
        (SpecialKind::Hopf, Some(c)) => format!("hopf-{}", c.label()),
        (kind, _) => kind.label().to_string(),
    }
}

fn param_kelvin<T: Real>(parameter: Parameter, scale: Option<&TemperatureScale<T>>) -> Option<&TemperatureScale<T>> {
    scale.filter(|_| parameter == Parameter::AmbientTemperature)
}

/// Columns `piece, param, [param_kelvin], x, u, [T_kelvin], trace, det,
/// stability, special`; the last column names the special point a row sits
/// on, if any.
pub fn write_branch<T: Real, W: Write>(w: &mut W, b: &Branch<T>, scale: Option<&TemperatureScale<T>>) -> io::Result<()> {
    let pk = param_kelvin(b.parameter, scale);
    let k = scale.is_some();
    header(
        w,
        &[
            ("piece", true),
            (b.parameter.name(), true),
            ("param_kelvin", pk.is_some()),
            ("x", true),
            ("u", true),
            ("T_kelvin", k),
            ("trace", true),
            ("det", true),
            ("stability", true),
            ("special", true),
        ],
    )?;
    for (idx, piece) in b.pieces().into_iter().enumerate() {
        for pt in piece {
            let special = b
                .specials
                .iter()
                .find(|sp| sp.param_value == pt.param_value && sp.state == pt.state)
                .map(special_label)
                .unwrap_or_default();
            row(
                w,
                [
                    Some(idx.to_string()),
                    Some(num(pt.param_value)),
                    pk.map(|s| num(s.to_kelvin(pt.param_value))),
                    Some(num(pt.state.x)),
                    Some(num(pt.state.u)),
                    kelvin(scale, pt.state.u),
                    Some(num(pt.trace)),
                    Some(num(pt.det)),
                    Some(pt.stability.label().to_string()),
                    Some(special),
                ],
            )?;
        }
    }
    Ok(())
}

/// Columns `kind, param, [param_kelvin], x, u, [T_kelvin], trace, det,
/// frequency, l1, criticality`.
pub fn write_specials<T: Real, W: Write>(w: &mut W, b: &Branch<T>, scale: Option<&TemperatureScale<T>>) -> io::Result<()> {
    let pk = param_kelvin(b.parameter, scale);
    header(
        w,
        &[
            ("kind", true),
            (b.parameter.name(), true),
            ("param_kelvin", pk.is_some()),
            ("x", true),
            ("u", true),
            ("T_kelvin", scale.is_some()),
            ("trace", true),
            ("det", true),
            ("frequency", true),
            ("l1", true),
            ("criticality", true),
        ],
    )?;
    for sp in &b.specials {
        row(
            w,
            [
                Some(sp.kind.label().to_string()),
                Some(num(sp.param_value)),
                pk.map(|s| num(s.to_kelvin(sp.param_value))),
                Some(num(sp.state.x)),
                Some(num(sp.state.u)),
                kelvin(scale, sp.state.u),
                Some(num(sp.trace)),
                Some(num(sp.det)),
                Some(opt(sp.frequency)),
                Some(opt(sp.l1)),
                Some(sp.criticality.map(|c| c.label().to_string()).unwrap_or_default()),
            ],
        )?;
    }
    Ok(())
}

/// Columns `param, [param_kelvin], period, amplitude, min_u, max_u,
/// [max_T_kelvin], multiplier, log_abs_multiplier, stability, vented,
/// cycle_fold`.
pub fn write_cycle_branch<T: Real, W: Write>(
    w: &mut W,
    b: &CycleBranch<T>,
    u_boil: T,
    scale: Option<&TemperatureScale<T>>,
) -> io::Result<()> {
    let pk = param_kelvin(b.parameter, scale);
    header(
        w,
        &[
            (b.parameter.name(), true),
            ("param_kelvin", pk.is_some()),
            ("period", true),
            ("amplitude", true),
            ("min_u", true),
            ("max_u", true),
            ("max_T_kelvin", scale.is_some()),
            ("multiplier", true),
            ("log_abs_multiplier", true),
            ("stability", true),
            ("vented", true),
            ("cycle_fold", true),
        ],
    )?;
    for (i, o) in b.orbits.iter().enumerate() {
        row(
            w,
            [
                Some(num(o.param_value)),
                pk.map(|s| num(s.to_kelvin(o.param_value))),
                Some(num(o.period)),
                Some(num(o.amplitude)),
                Some(num(o.min_u)),
                Some(num(o.max_u)),
                kelvin(scale, o.max_u),
                Some(num(o.floquet.multipliers[1])),
                Some(num(o.floquet.log_abs_nontrivial)),
                Some(o.stability.label().to_string()),
                Some(o.vented(u_boil).to_string()),
                Some(b.fold_indices.contains(&i).to_string()),
            ],
        )?;
    }
    Ok(())
}

/// One period of an orbit: columns `tau, x, u, [T_kelvin]`.
pub fn write_orbit<T: Real, W: Write>(w: &mut W, o: &Orbit<T>, scale: Option<&TemperatureScale<T>>) -> io::Result<()> {
    header(w, &[("tau", true), ("x", true), ("u", true), ("T_kelvin", scale.is_some())])?;
    for (t, s) in o.mesh_times.iter().zip(&o.mesh) {
        row(w, [Some(num(*t)), Some(num(s.x)), Some(num(s.u)), kelvin(scale, s.u)])?;
    }
    Ok(())
}

/// Columns `kind, component, u_a, f, [T_a_kelvin], x, u, trace, det`.
pub fn write_loci<T: Real, W: Write>(w: &mut W, loci: &Loci<T>, scale: Option<&TemperatureScale<T>>) -> io::Result<()> {
    header(
        w,
        &[
            ("kind", true),
            ("component", true),
            ("u_a", true),
            ("f", true),
            ("T_a_kelvin", scale.is_some()),
            ("x", true),
            ("u", true),
            ("trace", true),
            ("det", true),
        ],
    )?;
    for set in [&loci.hopf, &loci.fold] {
        for (c, l) in set.iter().enumerate() {
            for pt in &l.points {
                row(
                    w,
                    [
                        Some(l.kind.label().to_string()),
                        Some(c.to_string()),
                        Some(num(pt.u_a)),
                        Some(num(pt.f)),
                        kelvin(scale, pt.u_a),
                        Some(num(pt.state.x)),
                        Some(num(pt.state.u)),
                        Some(num(pt.trace)),
                        Some(num(pt.det)),
                    ],
                )?;
            }
        }
    }
    Ok(())
}

/// Columns `u_a, f, [T_a_kelvin], regime`.
pub fn write_region_map<T: Real, W: Write>(
    w: &mut W,
    cells: &[RegionCell<T>],
    scale: Option<&TemperatureScale<T>>,
) -> io::Result<()> {
    header(w, &[("u_a", true), ("f", true), ("T_a_kelvin", scale.is_some()), ("regime", true)])?;
    for c in cells {
        row(
            w,
            [Some(num(c.u_a)), Some(num(c.f)), kelvin(scale, c.u_a), Some(c.regime.label().to_string())],
        )?;
    }
    Ok(())
}

/// Columns `tau, x, u, [T_kelvin], event`. Event rows are merged into the
/// samples in time order and carry the event name.
pub fn write_trajectory<T: Real, W: Write>(
    w: &mut W,
    traj: &Trajectory<T>,
    scale: Option<&TemperatureScale<T>>,
) -> io::Result<()> {
    header(w, &[("tau", true), ("x", true), ("u", true), ("T_kelvin", scale.is_some()), ("event", true)])?;
    let mut events = traj.events.iter().peekable();
    let line = |w: &mut W, t: T, x: T, u: T, name: &str| {
        row(w, [Some(num(t)), Some(num(x)), Some(num(u)), kelvin(scale, u), Some(name.to_string())])
    };
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut tagged = false;
        while let Some(e) = events.next_if(|e| e.time <= *t) {
            if e.time == *t && !tagged {
                line(w, *t, s.x, s.u, &e.name)?;
                tagged = true;
            } else {
                line(w, e.time, e.state.x, e.state.u, &e.name)?;
            }
        }
        if !tagged {
            line(w, *t, s.x, s.u, "")?;
        }
    }
    for e in events {
        line(w, e.time, e.state.x, e.state.u, &e.name)?;
    }
    Ok(())
}
