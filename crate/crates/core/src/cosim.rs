//! Co-simulation master. Two simulators are stepped in turn with a shared
//! step size: the aerodynamic side first, using the current kinematics, then
//! the mechanical side with the resulting loads held constant. A step is
//! accepted when the mechanical state moved roughly linearly; otherwise both
//! simulators are rolled back and the step is halved.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Named coupling values. Ordered, so iteration and CSV headers are stable.
pub type Signals = BTreeMap<String, f64>;

pub type SimFault = Box<dyn std::error::Error + Send + Sync>;

/// A simulator that the master can step, roll back and query.
///
/// Restoring a snapshot and stepping again with the same inputs and step
/// must reproduce the same outputs bit for bit.
pub trait Steppable {
    type Snapshot: Clone;

    fn snapshot(&self) -> Self::Snapshot;
    fn restore(&mut self, snapshot: &Self::Snapshot);
    fn set_inputs(&mut self, inputs: &Signals);
    /// Advance from `t` to `t + h`.
    fn step(&mut self, t: f64, h: f64) -> Result<(), SimFault>;
    fn outputs(&self) -> Signals;
}

/// The side that owns an ODE state; its motion drives step acceptance.
pub trait OdeSimulator: Steppable {
    fn state(&self) -> Vec<f64>;
    /// State derivative under the current inputs.
    fn derivative(&self, t: f64) -> Result<Vec<f64>, SimFault>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CosimConfig {
    pub h_min: f64,
    pub h_max: f64,
    /// Accepted steps between doublings.
    pub double_period: usize,
    pub linearity_tol: f64,
}

impl Default for CosimConfig {
    fn default() -> Self {
        CosimConfig {
            h_min: 1e-6,
            h_max: 5e-3,
            double_period: 10,
            linearity_tol: 0.1,
        }
    }
}

impl CosimConfig {
    pub fn validate(&self) -> Result<(), CosimError> {
        if !(self.h_min > 0.0 && self.h_min <= self.h_max && self.h_max.is_finite()) {
            return Err(CosimError::Config("need 0 < h_min <= h_max"));
        }
        if self.double_period == 0 {
            return Err(CosimError::Config("double_period must be at least 1"));
        }
        if !(self.linearity_tol > 0.0) {
            return Err(CosimError::Config("linearity_tol must be positive"));
        }
        Ok(())
    }

    /// Smallest step of the form `h_max / 2^k` that is not below `h_min`.
    pub fn finest_level(&self) -> f64 {
        let mut h = self.h_max;
        while h / 2.0 >= self.h_min {
            h /= 2.0;
        }
        h
    }

    /// Next smaller step: halve, but never below `h_min`.
    pub fn halve(&self, h: f64) -> f64 {
        (h / 2.0).max(self.h_min)
    }

    /// Next larger step. From the off-ladder floor `h_min` this returns to
    /// the finest ladder level, which keeps every other step of the form
    /// `h_max / 2^k`.
    pub fn double(&self, h: f64) -> f64 {
        let finest = self.finest_level();
        if h < finest {
            finest
        } else {
            (2.0 * h).min(self.h_max)
        }
    }

    /// True for `h_max / 2^k` within bounds, or the floor itself.
    pub fn is_admissible(&self, h: f64) -> bool {
        if h == self.h_min {
            return true;
        }
        let mut level = self.h_max;
        while level >= self.h_min {
            if h == level {
                return true;
            }
            level /= 2.0;
        }
        false
    }
}

#[derive(Debug, Error)]
pub enum CosimError {
    #[error("invalid co-simulation config: {0}")]
    Config(&'static str),
    #[error("{which} simulator failed at t = {t} with h = {h:e}: {source}")]
    Simulator {
        which: &'static str,
        t: f64,
        h: f64,
        #[source]
        source: SimFault,
    },
    #[error("step observer failed at t = {t}: {source}")]
    Observer {
        t: f64,
        #[source]
        source: SimFault,
    },
    #[error("non-finite state after the step ending at t = {t} (h = {h:e})")]
    Instability {
        t: f64,
        h: f64,
        record: Box<Trajectory>,
    },
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `| ‖y(t+h) − y(t)‖ − ‖ẏ‖h | / (‖ẏ‖h)`, or 0 when `‖ẏ‖h` vanishes.
pub fn linearity_defect(y_t: &[f64], y_th: &[f64], ydot: &[f64], h: f64) -> f64 {
    let predicted = norm(ydot) * h;
    if predicted < 1e-300 {
        return 0.0;
    }
    let moved = y_t
        .iter()
        .zip(y_th)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    (moved - predicted).abs() / predicted
}

/// Accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub h: f64,
    pub defect: f64,
    /// Rejected attempts before acceptance.
    pub halvings: usize,
}

fn fault(which: &'static str, t: f64, h: f64) -> impl FnOnce(SimFault) -> CosimError {
    move |source| CosimError::Simulator {
        which,
        t,
        h,
        source,
    }
}

/// One accepted master step starting at `t`, halving from `h_try` until the
/// linearity test passes or the floor is reached.
pub fn controlled_step<A, M>(
    aero: &mut A,
    mech: &mut M,
    t: f64,
    h_try: f64,
    cfg: &CosimConfig,
    u: &Signals,
) -> Result<StepOutcome, CosimError>
where
    A: Steppable,
    M: OdeSimulator,
{
    let mut h = h_try.clamp(cfg.h_min, cfg.h_max);
    let mut halvings = 0;
    loop {
        let (aero_snap, mech_snap) = (aero.snapshot(), mech.snapshot());
        let mut inputs = mech.outputs();
        inputs.extend(u.iter().map(|(k, v)| (k.clone(), *v)));
        aero.set_inputs(&inputs);
        aero.step(t, h).map_err(fault("aerodynamic", t, h))?;
        mech.set_inputs(&aero.outputs());
        let y0 = mech.state();
        let ydot = mech.derivative(t).map_err(fault("mechanical", t, h))?;
        mech.step(t, h).map_err(fault("mechanical", t, h))?;
        let defect = linearity_defect(&y0, &mech.state(), &ydot, h);
        if defect >= cfg.linearity_tol && h > cfg.h_min {
            aero.restore(&aero_snap);
            mech.restore(&mech_snap);
            h = cfg.halve(h);
            halvings += 1;
            continue;
        }
        return Ok(StepOutcome {
            h,
            defect,
            halvings,
        });
    }
}

/// One accepted step as recorded by [`run_master`]; `t` is the step end.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub h: f64,
    pub defect: f64,
    pub halvings: usize,
    pub state: Vec<f64>,
    pub inputs: Signals,
    pub aero: Signals,
    pub mech: Signals,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryRow> {
        self.rows.last()
    }
}

fn finite(signals: &Signals) -> bool {
    signals.values().all(|v| v.is_finite())
}

/// Step until `t >= t_end`. The step grows one level after every
/// `double_period` accepted steps, counted since the last growth.
/// `schedule` supplies the inputs `u(t)` at each step start.
pub fn run_master<A, M, U>(
    aero: &mut A,
    mech: &mut M,
    cfg: &CosimConfig,
    t_end: f64,
    schedule: U,
) -> Result<Trajectory, CosimError>
where
    A: Steppable,
    M: OdeSimulator,
    U: FnMut(f64) -> Signals,
{
    run_master_with(aero, mech, cfg, t_end, schedule, |_, _, _| Ok(()))
}

/// [`run_master`] with an observer called after every accepted step, for
/// snapshots and progress output. An observer error aborts the run.
pub fn run_master_with<A, M, U, O>(
    aero: &mut A,
    mech: &mut M,
    cfg: &CosimConfig,
    t_end: f64,
    mut schedule: U,
    mut on_accept: O,
) -> Result<Trajectory, CosimError>
where
    A: Steppable,
    M: OdeSimulator,
    U: FnMut(f64) -> Signals,
    O: FnMut(&TrajectoryRow, &A, &M) -> Result<(), SimFault>,
{
    cfg.validate()?;
    let mut record = Trajectory::default();
    let mut t = 0.0;
    let mut h = cfg.h_max;
    let mut since_growth = 0;
    while t < t_end {
        let u = schedule(t);
        let step = controlled_step(aero, mech, t, h, cfg, &u)?;
        t += step.h;
        h = step.h;
        let row = TrajectoryRow {
            t,
            h: step.h,
            defect: step.defect,
            halvings: step.halvings,
            state: mech.state(),
            inputs: u,
            aero: aero.outputs(),
            mech: mech.outputs(),
        };
        let ok = row.state.iter().all(|v| v.is_finite()) && finite(&row.aero) && finite(&row.mech);
        record.rows.push(row);
        if !ok {
            return Err(CosimError::Instability {
                t,
                h: step.h,
                record: Box::new(record),
            });
        }
        if let Some(row) = record.rows.last() {
            on_accept(row, aero, mech).map_err(|source| CosimError::Observer { t, source })?;
        }
        since_growth += 1;
        if since_growth == cfg.double_period {
            h = cfg.double(h);
            since_growth = 0;
        }
    }
    Ok(record)
}
