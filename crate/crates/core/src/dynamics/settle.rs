use serde::{Deserialize, Serialize};

use crate::dynamics::integrate::{
    integrate_from, Direction, EventFunction, EventSpec, IntegrateOptions, Trajectory,
};
use crate::dynamics::radau::Tolerances;
use crate::error::{Error, Result};
use crate::model::{ModelParams, State};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttractorKind {
    Steady,
    Cycle,
    Runaway,
    Undetermined,
}

/// Classification of the long-time behaviour of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorReport<T> {
    pub kind: AttractorKind,
    pub terminal_state: State<T>,
    /// Cycle period (cycles only).
    pub period: Option<T>,
    /// `max u - min u` over the attractor (or the observed window).
    pub amplitude: T,
    pub min_u: T,
    pub max_u: T,
    /// Time of the threshold crossing (runaway only).
    pub runaway_time: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleOptions<T> {
    pub tolerances: Tolerances<T>,
    /// Maximum state variation over the final tenth of the horizon for a
    /// steady verdict.
    pub steady_threshold: T,
    /// Relative spread of successive return times for a cycle verdict.
    pub period_repeatability: T,
    /// Position of the Poincaré section between the observed minimum and
    /// maximum temperature (0.5 = midpoint).
    pub section_fraction: T,
}

impl<T: Real> SettleOptions<T> {
    pub fn new(tolerances: Tolerances<T>) -> Self {
        Self {
            tolerances,
            steady_threshold: T::lit(1e-9),
            period_repeatability: T::lit(1e-6),
            section_fraction: T::lit(0.5),
        }
    }
}

impl Default for SettleOptions<f64> {
    fn default() -> Self {
        Self::new(Tolerances::new(1e-11, 1e-13))
    }
}

/// Shortest horizon `settle` accepts: ten times the slowest linear relaxation
/// time `ε / min(1, f)`.
pub fn transient_estimate<T: Real>(p: &ModelParams<T>) -> T {
    T::lit(10.0) * p.heat_capacity / p.inverse_residence_time.min(T::one())
}

fn u_range<T: Real>(states: &[State<T>]) -> (T, T) {
    states.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), s| {
        (lo.min(s.u), hi.max(s.u))
    })
}

fn tail_variation<T: Real>(traj: &Trajectory<T>, from: T) -> T {
    let tail: Vec<&State<T>> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= from)
        .map(|(_, s)| s)
        .collect();
    let mut v = T::zero();
    for get in [|s: &State<T>| s.x, |s: &State<T>| s.u] {
        let (lo, hi) = tail
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), s| (lo.min(get(s)), hi.max(get(s))));
        v = v.max(hi - lo);
    }
    v
}

fn runaway_report<T: Real>(traj: &Trajectory<T>, earlier: &[State<T>]) -> AttractorReport<T> {
    let ev = traj.halting_event().expect("halted trajectory has an event");
    let all: Vec<State<T>> = earlier.iter().chain(&traj.states).copied().collect();
    let (lo, hi) = u_range(&all);
    AttractorReport {
        kind: AttractorKind::Runaway,
        terminal_state: ev.state,
        period: None,
        amplitude: hi - lo,
        min_u: lo,
        max_u: hi,
        runaway_time: Some(ev.time),
    }
}

/// Integrates over `horizon` and classifies the attractor reached.
pub fn settle<T: Real>(p: &ModelParams<T>, s0: &State<T>, horizon: T) -> Result<AttractorReport<T>> {
    let tol = Tolerances::new(T::lit(1e-11), T::lit(1e-13));
    settle_with(p, s0, horizon, &SettleOptions::new(tol))
}

pub fn settle_with<T: Real>(
    p: &ModelParams<T>,
    s0: &State<T>,
    horizon: T,
    opts: &SettleOptions<T>,
) -> Result<AttractorReport<T>> {
    let min_h = transient_estimate(p);
    if !(horizon > min_h) {
        return Err(Error::InvalidInput(format!(
            "settle horizon {horizon} must exceed the transient estimate {min_h}"
        )));
    }
    let half = horizon / T::lit(2.0);
    let boiling = p.boiling_temperature.is_finite().then(|| EventSpec::boiling(p));

    let mut first = IntegrateOptions::new(opts.tolerances);
    first.events = boiling.iter().cloned().collect();
    let phase1 = integrate_from(p, T::zero(), s0, half, &first)?;
    if phase1.halted {
        return Ok(runaway_report(&phase1, &[]));
    }
    let mid = phase1.last_state().expect("non-empty trajectory");

    // Section placed inside the range seen over the last quarter of phase one.
    let quarter = horizon * T::lit(0.375);
    let recent: Vec<State<T>> = phase1
        .times
        .iter()
        .zip(&phase1.states)
        .filter(|(t, _)| **t >= quarter)
        .map(|(_, s)| *s)
        .collect();
    let (lo, hi) = u_range(&recent);
    let section = lo + opts.section_fraction * (hi - lo);

    let tail_from = horizon * T::lit(0.9);
    let mut second = IntegrateOptions::new(opts.tolerances);
    second.events = boiling.iter().cloned().collect();
    let have_section = hi - lo > T::zero();
    if have_section {
        second.events.push(EventSpec {
            name: "section".into(),
            function: EventFunction::Temperature(section),
            direction: Direction::Rising,
            halting: false,
        });
    }
    for (name, dir) in [("max", Direction::Falling), ("min", Direction::Rising)] {
        second.events.push(EventSpec {
            name: name.into(),
            function: EventFunction::TemperatureRate,
            direction: dir,
            halting: false,
        });
    }
    second.output_times = (0..=20)
        .map(|i| tail_from + (horizon - tail_from) * T::from_count(i) / T::lit(20.0))
        .collect();
    let phase2 = integrate_from(p, half, &mid, horizon, &second)?;
    if phase2.halted {
        return Ok(runaway_report(&phase2, &phase1.states));
    }
    let terminal = phase2.last_state().expect("non-empty trajectory");

    if tail_variation(&phase2, tail_from) < opts.steady_threshold {
        let tail: Vec<State<T>> = phase2
            .times
            .iter()
            .zip(&phase2.states)
            .filter(|(t, _)| **t >= tail_from)
            .map(|(_, s)| *s)
            .collect();
        let (lo, hi) = u_range(&tail);
        return Ok(AttractorReport {
            kind: AttractorKind::Steady,
            terminal_state: terminal,
            period: None,
            amplitude: hi - lo,
            min_u: lo,
            max_u: hi,
            runaway_time: None,
        });
    }

    let crossings: Vec<T> = phase2
        .events
        .iter()
        .filter(|e| e.name == "section")
        .map(|e| e.time)
        .collect();
    let (lo, hi) = u_range(&phase2.states);
    let mut report = AttractorReport {
        kind: AttractorKind::Undetermined,
        terminal_state: terminal,
        period: None,
        amplitude: hi - lo,
        min_u: lo,
        max_u: hi,
        runaway_time: None,
    };
    if crossings.len() >= 4 {
        let periods: Vec<T> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
        let last = &periods[periods.len() - 3..];
        let pmax = last.iter().copied().fold(T::neg_infinity(), T::max);
        let pmin = last.iter().copied().fold(T::infinity(), T::min);
        let period = last[2];
        if (pmax - pmin) / period <= opts.period_repeatability {
            // Extremes over the final full period.
            let (t0, t1) = (crossings[crossings.len() - 2], crossings[crossings.len() - 1]);
            let in_window = |t: T| t >= t0 && t <= t1;
            let mut lo = T::infinity();
            let mut hi = T::neg_infinity();
            for e in phase2.events.iter().filter(|e| in_window(e.time)) {
                if e.name == "max" || e.name == "min" {
                    lo = lo.min(e.state.u);
                    hi = hi.max(e.state.u);
                }
            }
            for (t, s) in phase2.times.iter().zip(&phase2.states) {
                if in_window(*t) {
                    lo = lo.min(s.u);
                    hi = hi.max(s.u);
                }
            }
            report.kind = AttractorKind::Cycle;
            report.period = Some(period);
            report.amplitude = hi - lo;
            report.min_u = lo;
            report.max_u = hi;
        }
    }
    Ok(report)
}
