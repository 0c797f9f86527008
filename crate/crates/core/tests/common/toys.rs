//! Small simulators with known step behaviour for the co-simulation master.

use panelflow::cosim::{OdeSimulator, Signals, SimFault, Steppable};
use panelflow::dynamics::{integrate, IntegratorOptions};

/// Aerodynamic stand-in that only records what it was given.
#[derive(Debug, Clone, Default)]
pub struct Passive {
    pub steps: usize,
    pub last_inputs: Signals,
}

impl Steppable for Passive {
    type Snapshot = Passive;
    fn snapshot(&self) -> Passive {
        self.clone()
    }
    fn restore(&mut self, s: &Passive) {
        *self = s.clone();
    }
    fn set_inputs(&mut self, inputs: &Signals) {
        self.last_inputs = inputs.clone();
    }
    fn step(&mut self, _t: f64, _h: f64) -> Result<(), SimFault> {
        self.steps += 1;
        Ok(())
    }
    fn outputs(&self) -> Signals {
        Signals::from([("steps".to_string(), self.steps as f64)])
    }
}

/// Scalar state that reports `ydot = 1` but moves by `h·(1 + excess(h))`,
/// so the defect of a step of size `h` is exactly `excess(h)`.
#[derive(Clone)]
pub struct Scripted<F: Fn(f64) -> f64 + Clone> {
    pub y: f64,
    pub excess: F,
    pub attempts: Vec<f64>,
}

impl<F: Fn(f64) -> f64 + Clone> Scripted<F> {
    pub fn new(excess: F) -> Self {
        Scripted {
            y: 0.0,
            excess,
            attempts: Vec::new(),
        }
    }
}

impl<F: Fn(f64) -> f64 + Clone> Steppable for Scripted<F> {
    type Snapshot = f64;
    fn snapshot(&self) -> f64 {
        self.y
    }
    fn restore(&mut self, s: &f64) {
        self.y = *s;
    }
    fn set_inputs(&mut self, _inputs: &Signals) {}
    fn step(&mut self, _t: f64, h: f64) -> Result<(), SimFault> {
        self.attempts.push(h);
        self.y += h * (1.0 + (self.excess)(h));
        Ok(())
    }
    fn outputs(&self) -> Signals {
        Signals::from([("y".to_string(), self.y)])
    }
}

impl<F: Fn(f64) -> f64 + Clone> OdeSimulator for Scripted<F> {
    fn state(&self) -> Vec<f64> {
        vec![self.y]
    }
    fn derivative(&self, _t: f64) -> Result<Vec<f64>, SimFault> {
        Ok(vec![1.0])
    }
}

/// Force source `amplitude · sin(omega · t)`, sampled at the step end.
#[derive(Debug, Clone)]
pub struct Harmonic {
    pub amplitude: f64,
    pub omega: f64,
    pub force: f64,
}

impl Steppable for Harmonic {
    type Snapshot = f64;
    fn snapshot(&self) -> f64 {
        self.force
    }
    fn restore(&mut self, s: &f64) {
        self.force = *s;
    }
    fn set_inputs(&mut self, _inputs: &Signals) {}
    fn step(&mut self, t: f64, h: f64) -> Result<(), SimFault> {
        self.force = self.amplitude * (self.omega * (t + h)).sin();
        Ok(())
    }
    fn outputs(&self) -> Signals {
        Signals::from([("force".to_string(), self.force)])
    }
}

/// Stiff damped mass-spring driven by the `force` input.
#[derive(Debug, Clone)]
pub struct StiffSpring {
    pub k: f64,
    pub c: f64,
    pub m: f64,
    pub y: [f64; 2],
    pub force: f64,
}

impl StiffSpring {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = (self.force - self.k * y[0] - self.c * y[1]) / self.m;
    }
}

impl Steppable for StiffSpring {
    type Snapshot = ([f64; 2], f64);
    fn snapshot(&self) -> Self::Snapshot {
        (self.y, self.force)
    }
    fn restore(&mut self, s: &Self::Snapshot) {
        (self.y, self.force) = *s;
    }
    fn set_inputs(&mut self, inputs: &Signals) {
        self.force = inputs.get("force").copied().unwrap_or(0.0);
    }
    fn step(&mut self, t: f64, h: f64) -> Result<(), SimFault> {
        let me = self.clone();
        let r = integrate(
            |_, y, dy| {
                me.rhs(y, dy);
                Ok(())
            },
            &self.y,
            t,
            h,
            None,
            &IntegratorOptions::default(),
        )?;
        self.y = [r.y[0], r.y[1]];
        Ok(())
    }
    fn outputs(&self) -> Signals {
        Signals::from([("x".to_string(), self.y[0]), ("v".to_string(), self.y[1])])
    }
}

impl OdeSimulator for StiffSpring {
    fn state(&self) -> Vec<f64> {
        self.y.to_vec()
    }
    fn derivative(&self, _t: f64) -> Result<Vec<f64>, SimFault> {
        let mut dy = [0.0; 2];
        self.rhs(&self.y, &mut dy);
        Ok(dy.to_vec())
    }
}

pub fn stiff_pair() -> (Harmonic, StiffSpring) {
    (
        Harmonic {
            amplitude: 100.0,
            omega: 3.0,
            force: 0.0,
        },
        StiffSpring {
            k: 1e5,
            c: 20.0,
            m: 1.0,
            y: [0.01, 0.0],
            force: 0.0,
        },
    )
}
