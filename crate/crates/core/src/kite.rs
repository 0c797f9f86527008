//! The tethered kite as two co-simulated parts: [`KiteAero`] places the
//! panel mesh on the top tether node, sheds wake and returns loads;
//! [`KiteMech`] carries the tether and the yaw state.
//!
//! Body frame: `x` from leading to trailing edge, `y` along the span, `z`
//! along the tether away from the ground, origin at the attachment point.

use std::sync::Arc;

use nalgebra::{DVector, Matrix3, Matrix4, Point3, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cosim::{OdeSimulator, Signals, SimFault, Steppable};
use crate::dynamics::{
    integrate, segment_force, tether_rhs, DynamicsError, IntegratorOptions, KiteBodyParams,
    MechLoads, MechState, TetherParams,
};
use crate::geometry::{
    apply_steering, closed_body, loft_kite, GeometryError, KiteGeometry, MeshCollection,
};
use crate::solver::{
    assemble, solve_doublets, source_strengths, BodyInfluence, SingularityState, SolveOptions,
    SolverError,
};
use crate::steady::{
    solve_steady, steady_outputs, Reference, SteadyCase, SteadyError, SteadyOptions,
};
use crate::surface::{
    combine_velocity, integrate_loads, potential_rate, pressure_coefficient_moving,
    surface_gradient_mu, wake_velocity, Adjacency, SurfaceError, VelocityInfluence, VelocityMode,
};
use crate::wake::{kutta_strengths, trailing_edge_segments, WakeError, WakeSheet};

#[derive(Debug, Error)]
pub enum KiteError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Wake(#[from] WakeError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Steady(#[from] SteadyError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("kite orientation undefined: wind is parallel to the tether")]
    WindAlongTether,
    #[error("missing coupling input `{0}`")]
    MissingInput(String),
    #[error("no trim elevation between {lo:.1} and {hi:.1} degrees")]
    NoTrim { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KiteConfig {
    pub geometry: KiteGeometry,
    pub body: KiteBodyParams,
    pub tether: TetherParams,
    /// Wind velocity (m/s).
    pub wind: [f64; 3],
    pub density: f64,
    pub velocity_mode: VelocityMode,
    /// Fixed nose-up rotation of the kite about its span axis (deg).
    pub pitch_offset_deg: f64,
    /// Time between wake rows (s); the newest row stretches in between.
    pub shed_interval: f64,
    pub max_rows: usize,
    pub solve: SolveOptions,
    pub integrator: IntegratorOptions,
}

impl Default for KiteConfig {
    fn default() -> Self {
        KiteConfig {
            geometry: KiteGeometry::default(),
            body: KiteBodyParams::default(),
            tether: TetherParams::default(),
            wind: [6.0, 0.0, 0.0],
            density: 1.2,
            velocity_mode: VelocityMode::Marcov,
            pitch_offset_deg: 0.0,
            shed_interval: 0.1,
            max_rows: 60,
            solve: SolveOptions::default(),
            integrator: IntegratorOptions::default(),
        }
    }
}

impl KiteConfig {
    pub fn wind(&self) -> Vector3<f64> {
        Vector3::from(self.wind)
    }

    /// Tether with the kite mass lumped into its top node.
    pub fn loaded_tether(&self) -> TetherParams {
        TetherParams {
            top_mass: self.body.mass,
            ..self.tether.clone()
        }
    }

    /// Kite mesh in the body frame for steering input `u`.
    pub fn mesh(&self, u: f64) -> Result<MeshCollection, KiteError> {
        let geometry = KiteGeometry {
            attachment_from_le: self.body.attachment_from_le,
            ..self.geometry.clone()
        };
        Ok(closed_body(apply_steering(&loft_kite(&geometry)?, u)?)?)
    }
}

/// Body axes as matrix columns: `z` along the tether, `x` along the wind
/// projected normal to the tether and turned by `psi` about `z`, then a nose-up
/// rotation by `pitch` about `y`.
pub fn kite_orientation(
    tether: &Vector3<f64>,
    wind: &Vector3<f64>,
    psi: f64,
    pitch: f64,
) -> Result<Matrix3<f64>, KiteError> {
    let z = tether.normalize();
    let across = wind - z * wind.dot(&z);
    if !(across.norm() > 1e-9 * wind.norm()) {
        return Err(KiteError::WindAlongTether);
    }
    let x0 = across.normalize();
    let x = x0 * psi.cos() + z.cross(&x0) * psi.sin();
    let y = z.cross(&x);
    let (xp, zp) = (
        x * pitch.cos() - z * pitch.sin(),
        z * pitch.cos() + x * pitch.sin(),
    );
    Ok(Matrix3::from_columns(&[xp, y, zp]))
}

/// Pose and rates of the kite at a step start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: Point3<f64>,
    pub velocity: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub omega: Vector3<f64>,
    pub tether: Vector3<f64>,
    /// Length of the top segment (m).
    pub arm: f64,
    pub psi_rate: f64,
}

fn input(signals: &Signals, name: &str) -> Result<f64, KiteError> {
    signals
        .get(name)
        .copied()
        .ok_or_else(|| KiteError::MissingInput(name.to_string()))
}

fn input3(signals: &Signals, prefix: &str) -> Result<Vector3<f64>, KiteError> {
    Ok(Vector3::new(
        input(signals, &format!("{prefix}x"))?,
        input(signals, &format!("{prefix}y"))?,
        input(signals, &format!("{prefix}z"))?,
    ))
}

impl Kinematics {
    /// From the mechanical outputs: the top node carries the kite, the top
    /// segment fixes its `z` axis, and the yaw angle turns it about that axis.
    pub fn from_signals(
        signals: &Signals,
        wind: &Vector3<f64>,
        pitch: f64,
    ) -> Result<Self, KiteError> {
        let top = input3(signals, "top_")?;
        let below = input3(signals, "below_")?;
        let v_top = input3(signals, "top_v")?;
        let v_below = input3(signals, "below_v")?;
        let d = top - below;
        let len = d.norm();
        let tether = d / len;
        let rotation = kite_orientation(&tether, wind, input(signals, "psi")?, pitch)?;
        // Swing of the top segment plus yaw about it.
        let psi_rate = input(signals, "psi_rate")?;
        let omega = tether.cross(&(v_top - v_below)) / len + tether * psi_rate;
        Ok(Kinematics {
            position: Point3::from(top),
            velocity: v_top,
            rotation,
            omega,
            tether,
            arm: len,
            psi_rate,
        })
    }

    pub fn point_velocity(&self, x: &Point3<f64>) -> Vector3<f64> {
        self.velocity + self.omega.cross(&(x - self.position))
    }

    /// Top node velocity and yaw rate, the rates that carry fluid inertia.
    pub fn rates(&self) -> Vector4<f64> {
        Vector4::new(
            self.velocity.x,
            self.velocity.y,
            self.velocity.z,
            self.psi_rate,
        )
    }

    /// Derivative of the velocity of body point `x` with respect to each of
    /// [`Kinematics::rates`].
    pub fn point_velocity_jacobian(&self, x: &Point3<f64>) -> [Vector3<f64>; 4] {
        let r = x - self.position;
        let e = &self.tether;
        let swing = |k: Vector3<f64>| k + (e.cross(&k) / self.arm).cross(&r);
        [
            swing(Vector3::x()),
            swing(Vector3::y()),
            swing(Vector3::z()),
            e.cross(&r),
        ]
    }
}

/// Shape-dependent caches for one steering input, in the body frame. Rigid
/// motion leaves the potential matrices unchanged and rotates the velocity
/// ones.
pub struct SteeredBody {
    pub u: f64,
    pub body: MeshCollection,
    pub influence: BodyInfluence,
    pub velocity: VelocityInfluence,
    pub adjacency: Adjacency,
}

impl SteeredBody {
    pub fn new(cfg: &KiteConfig, u: f64) -> Result<Self, KiteError> {
        let body = cfg.mesh(u)?;
        Ok(SteeredBody {
            u,
            influence: BodyInfluence::new(&body),
            velocity: VelocityInfluence::new(&body),
            adjacency: Adjacency::new(&body),
            body,
        })
    }
}

/// Loads from the latest aerodynamic step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AeroLoads {
    /// Integrated pressure force.
    pub force: Vector3<f64>,
    /// About the attachment point.
    pub moment: Vector3<f64>,
    pub yaw_moment: f64,
    pub cp: Vec<f64>,
    pub iterations: usize,
    /// Fluid inertia with respect to [`Kinematics::rates`]: rows are the
    /// top force components and the yaw moment.
    pub added_mass: Matrix4<f64>,
    /// Part of the force and yaw moment due to the change of rates over the
    /// step, `−M Δq / h`. The mechanical side accounts for it implicitly.
    pub inertial: Vector4<f64>,
}

impl AeroLoads {
    /// Force and yaw moment passed to the mechanical side: the pressure
    /// loads without their fluid inertia part.
    pub fn coupling(&self) -> (Vector3<f64>, f64) {
        let i = &self.inertial;
        (
            self.force - Vector3::new(i[0], i[1], i[2]),
            self.yaw_moment - i[3],
        )
    }
}

/// Unsteady panel solution of the kite.
pub struct KiteAero {
    cfg: Arc<KiteConfig>,
    shape: Arc<SteeredBody>,
    world: MeshCollection,
    wake: WakeSheet,
    state: SingularityState,
    /// Time since the newest wake row was started.
    row_age: f64,
    /// Rates at the previous step start, matching `state.mu_prev`.
    prev_rates: Option<Vector4<f64>>,
    inputs: Signals,
    loads: AeroLoads,
}

#[derive(Clone)]
pub struct AeroSnapshot {
    world: MeshCollection,
    wake: WakeSheet,
    state: SingularityState,
    row_age: f64,
    prev_rates: Option<Vector4<f64>>,
    inputs: Signals,
    loads: AeroLoads,
}

impl KiteAero {
    /// Fresh start: no wake, zero strengths, mesh at the body-frame origin.
    pub fn new(cfg: Arc<KiteConfig>) -> Result<Self, KiteError> {
        let shape = Arc::new(SteeredBody::new(&cfg, 0.0)?);
        let wake = WakeSheet::for_body(&shape.body, cfg.max_rows)?;
        let n = shape.body.len();
        Ok(KiteAero {
            world: shape.body.clone(),
            shape,
            wake,
            state: SingularityState::zeros(n),
            row_age: 0.0,
            prev_rates: None,
            inputs: Signals::new(),
            loads: AeroLoads::default(),
            cfg,
        })
    }

    pub fn world_body(&self) -> &MeshCollection {
        &self.world
    }

    pub fn wake(&self) -> &WakeSheet {
        &self.wake
    }

    pub fn loads(&self) -> &AeroLoads {
        &self.loads
    }

    pub fn singularities(&self) -> &SingularityState {
        &self.state
    }

    fn pitch(&self) -> f64 {
        self.cfg.pitch_offset_deg.to_radians()
    }

    fn advance(&mut self, t: f64, h: f64) -> Result<(), KiteError> {
        let u = self.inputs.get("u").copied().unwrap_or(0.0);
        if u != self.shape.u {
            self.shape = Arc::new(SteeredBody::new(&self.cfg, u)?);
        }
        let wind = self.cfg.wind();
        let kin = Kinematics::from_signals(&self.inputs, &wind, self.pitch())?;
        let shape = Arc::clone(&self.shape);
        self.world = shape.body.transform(&kin.rotation, &kin.position.coords)?;
        let world = &self.world;

        self.wake.convect(&wind, h, None)?;
        let te = trailing_edge_segments(world);
        if self.wake.n_rows() == 0 || self.row_age >= self.cfg.shed_interval * (1.0 - 1e-9) {
            let strengths = kutta_strengths(world, &self.state.mu);
            self.wake
                .push_row(&te, &strengths, &(wind - kin.velocity), h, t)?;
            self.row_age = h;
        } else {
            self.wake.reattach_newest(&te)?;
            self.row_age += h;
        }

        let body_velocity: Vec<Vector3<f64>> = world
            .panels()
            .map(|g| kin.point_velocity(&g.centroid()))
            .collect();
        let sigma = source_strengths(world, &wind, &body_velocity)?;
        let system = assemble(world, &shape.influence, &self.wake, &sigma)?;
        let (mu, report) = solve_doublets(&system, &self.cfg.solve, Some(&self.state.mu))?;
        self.wake
            .set_newest_strengths(&kutta_strengths(world, &mu))?;
        self.state.sigma = sigma;
        self.state.advance(mu, t + h);
        let added_mass = added_mass(world, &shape.influence, &system.a, &kin, self.cfg.density)?;
        let rates = kin.rates();
        let inertial = match (self.prev_rates.replace(rates), &self.state.mu_prev) {
            (Some(prev), Some(_)) => -(added_mass * (rates - prev)) / h,
            _ => Vector4::zeros(),
        };

        let kinematic: Vec<Vector3<f64>> = body_velocity.iter().map(|vb| wind - vb).collect();
        let induced = match self.cfg.velocity_mode {
            VelocityMode::Marcov => {
                let mut w = shape
                    .velocity
                    .apply(&self.state.mu, &self.state.sigma, &kin.rotation);
                for (wi, g) in w.iter_mut().zip(world.panels()) {
                    *wi += wake_velocity(&self.wake, &g.centroid());
                }
                w
            }
            VelocityMode::DoubletGradientOnly => vec![Vector3::zeros(); world.len()],
        };
        let grad = surface_gradient_mu(world, &shape.adjacency, &self.state.mu)?;
        let velocity = combine_velocity(world, &induced, &grad, &kinematic, self.cfg.velocity_mode);
        let rate = potential_rate(&self.state, h);
        let v_ref = (wind - kin.velocity).norm();
        let cp = velocity
            .iter()
            .zip(&kinematic)
            .zip(&rate)
            .map(|((v, k), r)| pressure_coefficient_moving(v, k, v_ref, *r))
            .collect::<Result<Vec<_>, _>>()?;
        let q = 0.5 * self.cfg.density * v_ref * v_ref;
        let (force, moment) = integrate_loads(world, &cp, q, &kin.position);
        self.loads = AeroLoads {
            force,
            moment,
            yaw_moment: moment.dot(&kin.tether),
            cp,
            iterations: report.iterations,
            added_mass,
            inertial,
        };
        Ok(())
    }
}

/// Fluid inertia of the kite for the current pose and wake. Each rate in
/// [`Kinematics::rates`] drives a source distribution whose doublet answer,
/// differenced over a step, is the unsteady pressure term; its force and yaw
/// moment per unit rate change form the columns.
fn added_mass(
    world: &MeshCollection,
    influence: &BodyInfluence,
    system: &nalgebra::DMatrix<f64>,
    kin: &Kinematics,
    density: f64,
) -> Result<Matrix4<f64>, KiteError> {
    let lu = system.clone().lu();
    let panels: Vec<_> = world.panels().collect();
    let jac: Vec<[Vector3<f64>; 4]> = panels
        .iter()
        .map(|g| kin.point_velocity_jacobian(&g.centroid()))
        .collect();
    let mut m = Matrix4::zeros();
    for k in 0..4 {
        let ds = DVector::from_iterator(
            panels.len(),
            panels.iter().zip(&jac).map(|(g, j)| g.normal().dot(&j[k])),
        );
        let mu = lu
            .solve(&(&influence.b * ds))
            .ok_or(SolverError::Singular)?;
        let mut f = Vector3::zeros();
        let mut yaw = 0.0;
        for (g, dmu) in panels.iter().zip(mu.iter()) {
            let df = g.normal() * (density * dmu * g.area());
            f += df;
            yaw += (g.centroid() - kin.position).cross(&df).dot(&kin.tether);
        }
        m.fixed_view_mut::<3, 1>(0, k).copy_from(&f);
        m[(3, k)] = yaw;
    }
    Ok(m)
}

impl Steppable for KiteAero {
    type Snapshot = AeroSnapshot;

    fn snapshot(&self) -> AeroSnapshot {
        AeroSnapshot {
            world: self.world.clone(),
            wake: self.wake.clone(),
            state: self.state.clone(),
            row_age: self.row_age,
            prev_rates: self.prev_rates,
            inputs: self.inputs.clone(),
            loads: self.loads.clone(),
        }
    }

    fn restore(&mut self, s: &AeroSnapshot) {
        self.world = s.world.clone();
        self.wake = s.wake.clone();
        self.state = s.state.clone();
        self.row_age = s.row_age;
        self.prev_rates = s.prev_rates;
        self.inputs = s.inputs.clone();
        self.loads = s.loads.clone();
    }

    fn set_inputs(&mut self, inputs: &Signals) {
        self.inputs = inputs.clone();
    }

    fn step(&mut self, t: f64, h: f64) -> Result<(), SimFault> {
        Ok(self.advance(t, h)?)
    }

    fn outputs(&self) -> Signals {
        let l = &self.loads;
        let (force, yaw) = l.coupling();
        let mut out = Signals::from([
            ("force_x".to_string(), force.x),
            ("force_y".to_string(), force.y),
            ("force_z".to_string(), force.z),
            ("pressure_force_x".to_string(), l.force.x),
            ("pressure_force_y".to_string(), l.force.y),
            ("pressure_force_z".to_string(), l.force.z),
            ("moment_x".to_string(), l.moment.x),
            ("moment_y".to_string(), l.moment.y),
            ("moment_z".to_string(), l.moment.z),
            ("yaw_moment".to_string(), yaw),
            ("pressure_yaw_moment".to_string(), l.yaw_moment),
            ("wake_rows".to_string(), self.wake.n_rows() as f64),
        ]);
        for (r, c) in (0..4).flat_map(|r| (0..4).map(move |c| (r, c))) {
            out.insert(format!("added_mass_{r}{c}"), l.added_mass[(r, c)]);
        }
        out
    }
}

/// Tether and yaw dynamics under loads held over each step.
#[derive(Debug, Clone)]
pub struct KiteMech {
    pub tether: TetherParams,
    pub body: KiteBodyParams,
    pub integrator: IntegratorOptions,
    pub state: MechState,
    pub loads: MechLoads,
    guess: Option<f64>,
}

impl KiteMech {
    pub fn new(cfg: &KiteConfig, state: MechState) -> Self {
        KiteMech {
            tether: cfg.loaded_tether(),
            body: cfg.body.clone(),
            integrator: cfg.integrator,
            state,
            loads: MechLoads::default(),
            guess: None,
        }
    }

    /// Sum of the top-segment pull, the aerodynamic force and the weight
    /// lumped at the top node (N).
    pub fn top_imbalance(&self) -> Result<Vector3<f64>, DynamicsError> {
        let n = self.state.n_nodes();
        let pull = segment_force(&self.state, &self.tether, n - 1)?;
        Ok(pull + self.loads.top_force + self.tether.gravity() * self.tether.mass(n - 1))
    }
}

impl Steppable for KiteMech {
    type Snapshot = (MechState, MechLoads, Option<f64>);

    fn snapshot(&self) -> Self::Snapshot {
        (self.state.clone(), self.loads, self.guess)
    }

    fn restore(&mut self, s: &Self::Snapshot) {
        self.state = s.0.clone();
        self.loads = s.1;
        self.guess = s.2;
    }

    fn set_inputs(&mut self, inputs: &Signals) {
        let get = |k: &str| inputs.get(k).copied().unwrap_or(0.0);
        self.loads = MechLoads {
            top_force: Vector3::new(get("force_x"), get("force_y"), get("force_z")),
            yaw_moment: get("yaw_moment"),
            added_mass: Matrix4::from_fn(|r, c| get(&format!("added_mass_{r}{c}"))),
        };
    }

    fn step(&mut self, t: f64, h: f64) -> Result<(), SimFault> {
        let (tether, body, loads) = (&self.tether, &self.body, &self.loads);
        let r = integrate(
            |_, y, dy| tether_rhs(y, tether, body, loads, dy),
            &self.state.to_vec(),
            t,
            h,
            self.guess,
            &self.integrator,
        )?;
        self.state = MechState::from_slice(&r.y, tether.segments)?;
        self.guess = Some(r.next_step);
        Ok(())
    }

    fn outputs(&self) -> Signals {
        let s = &self.state;
        let n = s.n_nodes();
        let (below, v_below) = if n >= 2 {
            (s.positions[n - 2], s.velocities[n - 2])
        } else {
            (self.tether.anchor(), Vector3::zeros())
        };
        let (top, v_top) = (s.top(), s.top_velocity());
        let tension = segment_force(s, &self.tether, n - 1)
            .map(|f| f.norm())
            .unwrap_or(f64::NAN);
        let mut out = Signals::new();
        for (prefix, v) in [
            ("top_", top.coords),
            ("below_", below.coords),
            ("top_v", v_top),
            ("below_v", v_below),
        ] {
            for (axis, c) in ["x", "y", "z"].iter().zip(v.iter()) {
                out.insert(format!("{prefix}{axis}"), *c);
            }
        }
        out.insert("psi".to_string(), s.psi);
        out.insert("psi_rate".to_string(), s.psi_rate);
        out.insert("tension".to_string(), tension);
        out
    }
}

impl OdeSimulator for KiteMech {
    fn state(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn derivative(&self, _t: f64) -> Result<Vec<f64>, SimFault> {
        let y = self.state.to_vec();
        let mut dy = vec![0.0; y.len()];
        tether_rhs(&y, &self.tether, &self.body, &self.loads, &mut dy)?;
        Ok(dy)
    }
}

/// Static flight state: the elevation at which the steady aerodynamic force
/// plus the top weight points along the tether, and the sagged tether shape
/// that carries it.
#[derive(Clone)]
pub struct Trim {
    /// Elevation of the top segment above the horizontal (rad).
    pub elevation: f64,
    pub force: Vector3<f64>,
    pub tension: f64,
    pub mech: MechState,
    /// Body axes at the trim pose.
    pub rotation: Matrix3<f64>,
    pub cp: Vec<f64>,
    wake: WakeSheet,
    state: SingularityState,
}

/// Unit vectors: horizontal downwind and up.
fn wind_plane(cfg: &KiteConfig) -> (Vector3<f64>, Vector3<f64>) {
    let up = -cfg
        .tether
        .gravity()
        .try_normalize(0.0)
        .unwrap_or(-Vector3::z());
    let wind = cfg.wind();
    let downwind = (wind - up * wind.dot(&up)).normalize();
    (downwind, up)
}

/// Tether nodes in static equilibrium under a top pull `top_pull` (the force
/// the top node exerts on the tether).
pub fn static_tether(tether: &TetherParams, top_pull: &Vector3<f64>) -> MechState {
    let n = tether.segments;
    let g = tether.gravity();
    // Segment k carries the top pull less the weight of the inner nodes above it.
    let mut positions = Vec::with_capacity(n);
    let mut x = tether.anchor();
    for k in 0..n {
        let t = top_pull + g * (tether.node_mass * (n - 1 - k) as f64);
        x += t.normalize() * (tether.rest_length + t.norm() / tether.stiffness);
        positions.push(x);
    }
    MechState {
        positions,
        velocities: vec![Vector3::zeros(); n],
        psi: 0.0,
        psi_rate: 0.0,
    }
}

pub fn trim(cfg: &KiteConfig) -> Result<Trim, KiteError> {
    let case = SteadyCase::new(
        cfg.mesh(0.0)?,
        Reference {
            density: cfg.density,
            area: 1.0,
            chord: cfg.geometry.root_chord,
            moment_point: Point3::origin(),
            span_axis: Vector3::y(),
        },
    );
    let tether = cfg.loaded_tether();
    let (downwind, up) = wind_plane(cfg);
    let wind = cfg.wind();
    let top_weight = tether.gravity() * tether.mass(tether.segments - 1);
    let opts = SteadyOptions {
        dt: cfg.shed_interval,
        max_rows: cfg.max_rows,
        solve: cfg.solve,
        ..Default::default()
    };
    let pitch = cfg.pitch_offset_deg.to_radians();
    let evaluate = |beta: f64| -> Result<
        (f64, Vector3<f64>, Vec<f64>, crate::steady::SteadySolution),
        KiteError,
    > {
        let e = downwind * beta.cos() + up * beta.sin();
        let rot = kite_orientation(&e, &wind, 0.0, pitch)?;
        let sol = solve_steady(&case, &(rot.transpose() * wind), &opts)?;
        let out = steady_outputs(&case, &sol, cfg.velocity_mode)?;
        let force = rot * out.force;
        let pull = force + top_weight;
        let gap = pull.dot(&up).atan2(pull.dot(&downwind)) - beta;
        Ok((gap, force, out.cp, sol))
    };
    let (lo, hi) = (20f64.to_radians(), 89.5f64.to_radians());
    let (mut a, mut b) = (lo, hi);
    let (mut ga, gb) = (evaluate(a)?.0, evaluate(b)?.0);
    if ga.signum() == gb.signum() {
        return Err(KiteError::NoTrim {
            lo: lo.to_degrees(),
            hi: hi.to_degrees(),
        });
    }
    while b - a > 1e-6 {
        let m = 0.5 * (a + b);
        let gm = evaluate(m)?.0;
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    let (_, force, cp, sol) = evaluate(0.5 * (a + b))?;
    let pull = force + top_weight;
    let mech = static_tether(&tether, &pull);
    // Rebuild the frame from the actual top segment so that the stored wake
    // matches what the aerodynamic side will reconstruct.
    let n = mech.n_nodes();
    let below = if n >= 2 {
        mech.positions[n - 2]
    } else {
        tether.anchor()
    };
    let e = (mech.top() - below).normalize();
    let rot = kite_orientation(&e, &wind, 0.0, pitch)?;
    let wake = sol.wake.transformed(&rot, &mech.top().coords)?;
    Ok(Trim {
        elevation: e.dot(&up).asin(),
        force,
        tension: pull.norm(),
        mech,
        rotation: rot,
        cp,
        wake,
        state: sol.state,
    })
}

impl KiteAero {
    /// Start from a trimmed steady solution; the next step sheds a new row.
    pub fn from_trim(cfg: Arc<KiteConfig>, trim: &Trim) -> Result<Self, KiteError> {
        let mut aero = KiteAero::new(Arc::clone(&cfg))?;
        aero.wake = trim.wake.clone();
        aero.state = trim.state.clone();
        aero.row_age = cfg.shed_interval;
        aero.prev_rates = Some(Vector4::zeros());
        aero.world = aero
            .shape
            .body
            .transform(&trim.rotation, &trim.mech.top().coords)?;
        aero.loads.force = trim.force;
        aero.loads.cp = trim.cp.clone();
        Ok(aero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn orientation_is_a_rotation_with_tether_z() {
        let tether = Vector3::new(0.3, 0.1, 0.9);
        let r = kite_orientation(&tether, &Vector3::new(6.0, 0.0, 0.0), 0.4, 0.0).unwrap();
        assert_relative_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            r.column(2).into_owned(),
            tether.normalize(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_yaw_heads_downwind() {
        let e = Vector3::new(1.0, 0.0, 1.0).normalize();
        let r = kite_orientation(&e, &Vector3::x(), 0.0, 0.0).unwrap();
        // Chord runs downwind and down, normal to the tether, no sideslip.
        assert!(r.column(0).x > 0.0 && r.column(0).z < 0.0);
        assert_relative_eq!(r.column(0).y, 0.0);
        assert!(matches!(
            kite_orientation(&Vector3::x(), &Vector3::x(), 0.0, 0.0),
            Err(KiteError::WindAlongTether)
        ));
    }

    #[test]
    fn static_tether_balances_every_node() {
        let p = TetherParams {
            top_mass: 6.0,
            ..Default::default()
        };
        let pull = Vector3::new(80.0, 0.0, 400.0) + p.gravity() * p.mass(p.segments - 1);
        let s = static_tether(&p, &pull);
        let mut dy = vec![0.0; s.dim()];
        let loads = MechLoads {
            top_force: pull - p.gravity() * p.mass(p.segments - 1),
            ..Default::default()
        };
        tether_rhs(&s.to_vec(), &p, &KiteBodyParams::default(), &loads, &mut dy).unwrap();
        let worst = dy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-8, "residual acceleration {worst:e}");
    }
}
