use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::dynamics::radau::{Radau, Sensitivity, Substep, Tolerances};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Parameter, State};
use crate::scalar::Real;

/// Scalar function of the state whose zero crossings are reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventFunction<T> {
    /// `u - level`.
    Temperature(T),
    /// `x - level`.
    Conversion(T),
    /// `du/dτ`; its falling zeros are temperature maxima.
    TemperatureRate,
}

impl<T: Real> EventFunction<T> {
    fn eval(&self, p: &ModelParams<T>, y: [T; 2]) -> T {
        match *self {
            EventFunction::Temperature(level) => y[1] - level,
            EventFunction::Conversion(level) => y[0] - level,
            EventFunction::TemperatureRate => p.rhs(y)[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec<T> {
    pub name: String,
    pub function: EventFunction<T>,
    pub direction: Direction,
    /// Stop the integration at the first crossing.
    pub halting: bool,
}

impl<T: Real> EventSpec<T> {
    /// Halting upward crossing of the runaway threshold.
    pub fn boiling(p: &ModelParams<T>) -> Self {
        Self {
            name: "boiling".into(),
            function: EventFunction::Temperature(p.boiling_temperature),
            direction: Direction::Rising,
            halting: true,
        }
    }

    fn crosses(&self, g0: T, g1: T) -> bool {
        let z = T::zero();
        let up = g0 < z && g1 >= z;
        let down = g0 > z && g1 <= z;
        match self.direction {
            Direction::Rising => up,
            Direction::Falling => down,
            Direction::Either => up || down,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord<T> {
    pub time: T,
    pub state: State<T>,
    pub name: String,
    pub halting: bool,
}

/// Time-stamped solution of the scaled balances.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<State<T>>,
    pub events: Vec<EventRecord<T>>,
    /// Set when a halting event ended the run before `tau_end`.
    pub halted: bool,
}

impl<T: Real> Trajectory<T> {
    fn push(&mut self, t: T, y: [T; 2]) {
        if self.times.last().map_or(true, |&last| t > last) {
            self.times.push(t);
            self.states.push(State::from_array(y));
        }
    }

    pub fn last_state(&self) -> Option<State<T>> {
        self.states.last().copied()
    }

    pub fn halting_event(&self) -> Option<&EventRecord<T>> {
        self.events.iter().find(|e| e.halting)
    }
}

/// Event localisation tolerance in τ.
pub const EVENT_TIME_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions<T> {
    pub tolerances: Tolerances<T>,
    pub events: Vec<EventSpec<T>>,
    /// Record every accepted step.
    pub record_steps: bool,
    /// Additional output times (dense output by re-stepping).
    pub output_times: Vec<T>,
    pub initial_step: Option<T>,
}

impl<T: Real> IntegrateOptions<T> {
    pub fn new(tolerances: Tolerances<T>) -> Self {
        Self {
            tolerances,
            events: Vec::new(),
            record_steps: true,
            output_times: Vec::new(),
            initial_step: None,
        }
    }

    pub fn with_events(mut self, events: Vec<EventSpec<T>>) -> Self {
        self.events = events;
        self
    }
}

/// Bisects `g(step_to(y0, θ))` on `θ ∈ [0, h]` to `EVENT_TIME_TOLERANCE`.
fn locate<T: Real>(
    r: &Radau<'_, T>,
    p: &ModelParams<T>,
    ev: &EventSpec<T>,
    sub: &Substep<T>,
) -> (T, [T; 2]) {
    let tol = T::lit(EVENT_TIME_TOLERANCE);
    let g = |y: [T; 2]| ev.function.eval(p, y);
    let g0 = g(sub.y0);
    let (mut a, mut b) = (T::zero(), sub.h);
    let mut yb = sub.y1;
    while b - a > tol {
        let m = a + (b - a) / T::lit(2.0);
        if m <= a || m >= b {
            break;
        }
        let Some(ym) = r.step_to(sub.y0, m) else { break };
        if ev.crosses(g0, g(ym)) {
            b = m;
            yb = ym;
        } else {
            a = m;
        }
    }
    (sub.t0 + b, yb)
}

/// Adaptive implicit integration of the scaled balances from `s0` over
/// `[0, tau_end]`, with event detection.
pub fn integrate<T: Real>(
    p: &ModelParams<T>,
    s0: &State<T>,
    tau_end: T,
    tolerances: Tolerances<T>,
    events: &[EventSpec<T>],
) -> Result<Trajectory<T>> {
    integrate_with(
        p,
        s0,
        tau_end,
        &IntegrateOptions::new(tolerances).with_events(events.to_vec()),
    )
}

pub fn integrate_with<T: Real>(
    p: &ModelParams<T>,
    s0: &State<T>,
    tau_end: T,
    opts: &IntegrateOptions<T>,
) -> Result<Trajectory<T>> {
    integrate_from(p, T::zero(), s0, tau_end, opts)
}

/// As [`integrate_with`] but starting at time `t0`.
pub fn integrate_from<T: Real>(
    p: &ModelParams<T>,
    t0: T,
    s0: &State<T>,
    t_end: T,
    opts: &IntegrateOptions<T>,
) -> Result<Trajectory<T>> {
    p.validate()?;
    opts.tolerances.validate()?;
    if !(t_end > t0) {
        return Err(Error::InvalidInput("integration horizon must be positive".into()));
    }
    if !(s0.u > T::zero()) || !s0.x.is_finite() {
        return Err(Error::Domain(format!("initial state outside domain: {s0:?}")));
    }
    let radau = Radau::new(p, opts.tolerances);
    let mut traj = Trajectory::default();
    traj.push(t0, s0.to_array());
    let mut outputs: Vec<T> = opts
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > t0 && t <= t_end)
        .collect();
    outputs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut next_out = 0usize;

    let end = radau.drive(t0, s0.to_array(), t_end, None, opts.initial_step, |r, sub| {
        let t1 = sub.t0 + sub.h;
        // Earliest crossing among all events in this substep.
        let mut hits: Vec<(T, [T; 2], usize)> = Vec::new();
        for (k, ev) in opts.events.iter().enumerate() {
            let g0 = ev.function.eval(p, sub.y0);
            let g1 = ev.function.eval(p, sub.y1);
            if ev.crosses(g0, g1) {
                let (te, ye) = locate(r, p, ev, &sub);
                hits.push((te, ye, k));
            }
        }
        hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let stop_at = hits
            .iter()
            .find(|h| opts.events[h.2].halting)
            .map(|h| h.0);
        let horizon = stop_at.unwrap_or(t1);
        while next_out < outputs.len() && outputs[next_out] <= horizon {
            let to = outputs[next_out];
            if let Some(y) = r.step_to(sub.y0, to - sub.t0) {
                traj.push(to, y);
            }
            next_out += 1;
        }
        for (te, ye, k) in &hits {
            if stop_at.is_some_and(|s| *te > s) {
                break;
            }
            let ev = &opts.events[*k];
            traj.events.push(EventRecord {
                time: *te,
                state: State::from_array(*ye),
                name: ev.name.clone(),
                halting: ev.halting,
            });
            if ev.halting {
                traj.push(*te, *ye);
                traj.halted = true;
                return ControlFlow::Break((*te, *ye));
            }
        }
        if opts.record_steps {
            traj.push(t1, sub.y1);
        }
        ControlFlow::Continue(())
    })?;
    if !end.stopped {
        traj.push(end.t, end.y);
    }
    Ok(traj)
}

/// First upward crossing of `u_boil` along a recorded trajectory, located by
/// linear interpolation between samples.
pub fn detect_runaway<T: Real>(traj: &Trajectory<T>, u_boil: T) -> Option<(T, State<T>)> {
    for (i, w) in traj.states.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if a.u < u_boil && b.u >= u_boil {
            let (ta, tb) = (traj.times[i], traj.times[i + 1]);
            let th = (u_boil - a.u) / (b.u - a.u);
            let t = ta + th * (tb - ta);
            let x = a.x + th * (b.x - a.x);
            return Some((t, State::new(x, u_boil)));
        }
    }
    if let Some(first) = traj.states.first() {
        if first.u >= u_boil {
            return Some((traj.times[0], *first));
        }
    }
    None
}

/// End state of the flow map together with its derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow<T> {
    pub end: [T; 2],
    pub sensitivity: Sensitivity<T>,
    /// Samples `(τ, state)` at accepted steps, including the start.
    pub samples: Vec<(T, [T; 2])>,
}

/// Integrates over `duration` while accumulating `∂y/∂y0`, `∂y/∂λ` for the
/// optional parameter, `ln |det ∂y/∂y0|` and `∫ trace J`.
pub fn flow_with_sensitivity<T: Real>(
    p: &ModelParams<T>,
    y0: [T; 2],
    duration: T,
    tolerances: Tolerances<T>,
    param: Option<Parameter>,
    record: bool,
) -> Result<Flow<T>> {
    let mut radau = Radau::new(p, tolerances);
    if let Some(par) = param {
        radau = radau.with_parameter(par);
    }
    let mut samples = Vec::new();
    if record {
        samples.push((T::zero(), y0));
    }
    let end = radau.drive(
        T::zero(),
        y0,
        duration,
        Some(Sensitivity::identity()),
        None,
        |_, sub| {
            if record {
                samples.push((sub.t0 + sub.h, sub.y1));
            }
            ControlFlow::Continue(())
        },
    )?;
    Ok(Flow {
        end: end.y,
        sensitivity: end.sens.expect("sensitivity requested"),
        samples,
    })
}
