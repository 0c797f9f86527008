//! Mechanical side of the kite system: a tether of point masses joined by
//! spring-dampers, the kite lumped into the top node, and yaw about the
//! tether axis. Roll and pitch are not states; the kite orientation is
//! rebuilt from the top segment direction and the yaw angle.

use nalgebra::{Matrix4, Point3, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("nodes {a} and {b} coincide")]
    CoincidentNodes { a: usize, b: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("state vector has {found} entries, expected {expected}")]
    StateLength { expected: usize, found: usize },
    #[error("integration failed at t = {t}: step {step:e} fell below the minimum (error estimate {error:e})")]
    StepTooSmall { t: f64, step: f64, error: f64 },
    #[error("non-finite derivative at t = {t}")]
    NonFinite { t: f64 },
}

/// Segment length below which two nodes count as coincident.
const COINCIDENT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TetherParams {
    pub segments: usize,
    /// Unstretched segment length (m).
    pub rest_length: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub node_mass: f64,
    /// Extra mass lumped into the top node (kg).
    pub top_mass: f64,
    pub gravity: [f64; 3],
    pub anchor: [f64; 3],
    /// Segments carry no compressive force.
    pub tension_only: bool,
}

impl Default for TetherParams {
    fn default() -> Self {
        TetherParams {
            segments: 10,
            rest_length: 10.0,
            stiffness: 5e4,
            damping: 50.0,
            node_mass: 0.1,
            top_mass: 0.0,
            gravity: [0.0, 0.0, -9.81],
            anchor: [0.0; 3],
            tension_only: true,
        }
    }
}

impl TetherParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.segments == 0 {
            return Err(DynamicsError::InvalidParameter(
                "tether needs at least one segment",
            ));
        }
        if !(self.rest_length > 0.0 && self.stiffness > 0.0 && self.node_mass > 0.0) {
            return Err(DynamicsError::InvalidParameter(
                "rest length, stiffness and node mass must be positive",
            ));
        }
        if !(self.damping >= 0.0 && self.top_mass >= 0.0) {
            return Err(DynamicsError::InvalidParameter(
                "damping and top mass must be non-negative",
            ));
        }
        Ok(())
    }

    pub fn anchor(&self) -> Point3<f64> {
        Point3::from(self.anchor)
    }

    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }

    /// Mass of node `i`, counted from the anchor.
    pub fn mass(&self, i: usize) -> f64 {
        if i + 1 == self.segments {
            self.node_mass + self.top_mass
        } else {
            self.node_mass
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KiteBodyParams {
    pub mass: f64,
    /// Inertia about the tether axis (kg·m²).
    pub yaw_inertia: f64,
    /// Tether attachment aft of the root leading edge (m).
    pub attachment_from_le: f64,
}

impl Default for KiteBodyParams {
    fn default() -> Self {
        KiteBodyParams {
            mass: 6.0,
            yaw_inertia: 5.0,
            attachment_from_le: 0.75,
        }
    }
}

/// Loads held constant over a mechanical step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MechLoads {
    pub top_force: Vector3<f64>,
    /// Moment about the tether axis (N·m).
    pub yaw_moment: f64,
    /// Fluid inertia acting on the top node acceleration and the yaw
    /// acceleration, in that order. Zero when the aerodynamic side keeps
    /// all of its pressure response in `top_force` and `yaw_moment`.
    pub added_mass: Matrix4<f64>,
}

/// Tether nodes (anchor excluded, top node last) and kite yaw.
#[derive(Debug, Clone, PartialEq)]
pub struct MechState {
    pub positions: Vec<Point3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    pub psi: f64,
    pub psi_rate: f64,
}

impl MechState {
    /// Straight tether at rest from the anchor along `direction`, every
    /// segment stretched by `strain`.
    pub fn straight(params: &TetherParams, direction: &Vector3<f64>, strain: f64) -> Self {
        let d = direction.normalize() * params.rest_length * (1.0 + strain);
        let anchor = params.anchor();
        MechState {
            positions: (1..=params.segments)
                .map(|i| anchor + d * i as f64)
                .collect(),
            velocities: vec![Vector3::zeros(); params.segments],
            psi: 0.0,
            psi_rate: 0.0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        6 * self.n_nodes() + 2
    }

    pub fn top(&self) -> Point3<f64> {
        self.positions[self.n_nodes() - 1]
    }

    pub fn top_velocity(&self) -> Vector3<f64> {
        self.velocities[self.n_nodes() - 1]
    }

    /// Flat layout: positions, velocities, `psi`, `psi_rate`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.dim());
        y.extend(self.positions.iter().flat_map(|p| p.coords.iter().copied()));
        y.extend(self.velocities.iter().flat_map(|v| v.iter().copied()));
        y.push(self.psi);
        y.push(self.psi_rate);
        y
    }

    pub fn from_slice(y: &[f64], nodes: usize) -> Result<Self, DynamicsError> {
        let expected = 6 * nodes + 2;
        if y.len() != expected {
            return Err(DynamicsError::StateLength {
                expected,
                found: y.len(),
            });
        }
        let v3 = |k: usize| Vector3::new(y[3 * k], y[3 * k + 1], y[3 * k + 2]);
        Ok(MechState {
            positions: (0..nodes).map(|k| Point3::from(v3(k))).collect(),
            velocities: (nodes..2 * nodes).map(v3).collect(),
            psi: y[6 * nodes],
            psi_rate: y[6 * nodes + 1],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

fn segment_ends(
    state: &MechState,
    params: &TetherParams,
    k: usize,
) -> (Point3<f64>, Vector3<f64>, Point3<f64>, Vector3<f64>) {
    let (xa, va) = if k == 0 {
        (params.anchor(), Vector3::zeros())
    } else {
        (state.positions[k - 1], state.velocities[k - 1])
    };
    (xa, va, state.positions[k], state.velocities[k])
}

/// Force exerted by segment `k` on its upper node; the lower node receives
/// the opposite. Segment 0 hangs from the anchor.
pub fn segment_force(
    state: &MechState,
    params: &TetherParams,
    k: usize,
) -> Result<Vector3<f64>, DynamicsError> {
    let (xa, va, xb, vb) = segment_ends(state, params, k);
    let d = xb - xa;
    let len = d.norm();
    if len < COINCIDENT {
        return Err(DynamicsError::CoincidentNodes { a: k, b: k + 1 });
    }
    if params.tension_only && len <= params.rest_length {
        return Ok(Vector3::zeros());
    }
    let dir = d / len;
    let mut tension =
        params.stiffness * (len - params.rest_length) + params.damping * (vb - va).dot(&dir);
    if params.tension_only && tension < 0.0 {
        tension = 0.0;
    }
    Ok(-dir * tension)
}

/// Internal forces on every node, anchor first (index 0 is the anchor
/// reaction). They sum to zero.
pub fn internal_forces(
    state: &MechState,
    params: &TetherParams,
) -> Result<Vec<Vector3<f64>>, DynamicsError> {
    let n = state.n_nodes();
    let mut f = vec![Vector3::zeros(); n + 1];
    for k in 0..n {
        let fk = segment_force(state, params, k)?;
        f[k + 1] += fk;
        f[k] -= fk;
    }
    Ok(f)
}

/// Tension of the top segment (N), zero when slack.
pub fn top_tension(state: &MechState, params: &TetherParams) -> Result<f64, DynamicsError> {
    Ok(segment_force(state, params, state.n_nodes() - 1)?.norm())
}

/// Yaw kinematics about the tether axis.
pub fn yaw_rhs(_psi: f64, psi_rate: f64, yaw_moment: f64, yaw_inertia: f64) -> (f64, f64) {
    (psi_rate, yaw_moment / yaw_inertia)
}

/// Time derivative of the flat state, written into `dy`.
pub fn tether_rhs(
    y: &[f64],
    params: &TetherParams,
    kite: &KiteBodyParams,
    loads: &MechLoads,
    dy: &mut [f64],
) -> Result<(), DynamicsError> {
    let n = params.segments;
    let state = MechState::from_slice(y, n)?;
    let f = internal_forces(&state, params)?;
    let g = params.gravity();
    for i in 0..n {
        let m = params.mass(i);
        let mut force = f[i + 1] + g * m;
        if i + 1 == n {
            force += loads.top_force;
        }
        let a = force / m;
        for c in 0..3 {
            dy[3 * i + c] = state.velocities[i][c];
            dy[3 * (n + i) + c] = a[c];
        }
    }
    let (rate, mut accel) = yaw_rhs(
        state.psi,
        state.psi_rate,
        loads.yaw_moment,
        kite.yaw_inertia,
    );
    if loads.added_mass != Matrix4::zeros() {
        // Top node and yaw share one mass matrix once fluid inertia is added.
        let top = 3 * (2 * n - 1);
        let m = params.mass(n - 1);
        let mass =
            Matrix4::from_diagonal(&Vector4::new(m, m, m, kite.yaw_inertia)) + loads.added_mass;
        let load = Vector4::new(
            dy[top] * m,
            dy[top + 1] * m,
            dy[top + 2] * m,
            loads.yaw_moment,
        );
        let acc = mass
            .lu()
            .solve(&load)
            .ok_or(DynamicsError::InvalidParameter("singular added mass"))?;
        dy[top..top + 3].copy_from_slice(&acc.as_slice()[..3]);
        accel = acc[3];
    }
    dy[6 * n] = rate;
    dy[6 * n + 1] = accel;
    Ok(())
}

/// Kinetic, spring and gravitational energy plus the work potential of a
/// constant top force (J).
pub fn mechanical_energy(
    state: &MechState,
    params: &TetherParams,
    kite: &KiteBodyParams,
    loads: &MechLoads,
) -> f64 {
    let g = params.gravity();
    let mut e = 0.5 * kite.yaw_inertia * state.psi_rate * state.psi_rate
        - loads.top_force.dot(&state.top().coords);
    for i in 0..state.n_nodes() {
        let m = params.mass(i);
        e += 0.5 * m * state.velocities[i].norm_squared() - m * g.dot(&state.positions[i].coords);
        let (xa, _, xb, _) = segment_ends(state, params, i);
        let stretch = (xb - xa).norm() - params.rest_length;
        if stretch > 0.0 || !params.tension_only {
            e += 0.5 * params.stiffness * stretch * stretch;
        }
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Smallest internal substep before the integration is declared failed.
    pub min_step: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            abs_tol: 1e-6,
            rel_tol: 1e-6,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub y: Vec<f64>,
    /// Proposed substep, a good first guess for the next call.
    pub next_step: f64,
    pub accepted: usize,
    pub rejected: usize,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights minus the embedded fourth-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Advance `y0` from `t0` to exactly `t0 + h` with adaptive Dormand-Prince
/// substeps. `guess` seeds the first substep.
pub fn integrate<F>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    h: f64,
    guess: Option<f64>,
    opts: &IntegratorOptions,
) -> Result<Integration, DynamicsError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), DynamicsError>,
{
    if !(h > 0.0) {
        return Err(DynamicsError::InvalidParameter(
            "integration interval must be positive",
        ));
    }
    let n = y0.len();
    let t_end = t0 + h;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut t = t0;
    let mut step = guess.filter(|g| *g > 0.0).unwrap_or(h).min(h);
    let (mut accepted, mut rejected) = (0, 0);

    rhs(t, &y, &mut k[0])?;
    while t < t_end {
        // Land on t_end exactly; absorb slivers into the final substep.
        let remaining = t_end - t;
        let last = step >= remaining || remaining - step < 1e-12 * h;
        let s = if last { remaining } else { step };
        for stage in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[stage][..stage].iter().enumerate() {
                    acc += a * k[j][i];
                }
                tmp[i] = y[i] + s * acc;
            }
            rhs(t + C[stage] * s, &tmp, &mut k[stage])?;
        }
        // Stage 7 is evaluated at the fifth-order solution (FSAL).
        y_new.copy_from_slice(&tmp);
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, ej) in E.iter().enumerate() {
                e += ej * k[j][i];
            }
            let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (s * e / scale).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(DynamicsError::NonFinite { t });
        }
        if err <= 1.0 {
            t = if last { t_end } else { t + s };
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            accepted += 1;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // A truncated final substep says little about the attainable size.
            step = if last && s < step {
                step.max(s * factor)
            } else {
                s * factor
            };
        } else {
            rejected += 1;
            step = s * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            if step < opts.min_step {
                return Err(DynamicsError::StepTooSmall {
                    t,
                    step,
                    error: err,
                });
            }
        }
    }
    Ok(Integration {
        y,
        next_step: step,
        accepted,
        rejected,
    })
}
