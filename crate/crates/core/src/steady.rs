//! Steady solutions by wake iteration: the body is held fixed in a uniform
//! freestream and rows are shed with a fixed time step until the Kutta
//! strengths stop changing.
//!
//! With a frozen wake and a fixed body every row of a given age occupies the
//! same place, so row influences are cached by age and the folded system
//! matrix is assembled once per freestream direction.

use nalgebra::{DMatrix, Point3, Vector3};
use thiserror::Error;

use crate::geometry::MeshCollection;
use crate::solver::{
    assemble_from, solve_doublets, source_strengths, trailing_edge_pairs, wake_row_influence,
    BodyInfluence, InfluenceSystem, SingularityState, SolveOptions, SolveReport, SolverError,
};
use crate::surface::{
    coefficients, combine_velocity, integrate_loads, potential_rate, pressure_coefficient,
    principal_velocities, surface_gradient_mu, Adjacency, AeroOutputs, SurfaceError, VelocityMode,
    WindAxes,
};
use crate::wake::{convect_wake, kutta_strengths, shed_row, WakeError, WakeSheet};

#[derive(Debug, Error)]
pub enum SteadyError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Wake(#[from] WakeError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("wake strengths did not settle in {steps} steps (last change {change:e})")]
    NotConverged { steps: usize, change: f64 },
}

/// Reference quantities for loads and coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub density: f64,
    pub area: f64,
    pub chord: f64,
    pub moment_point: Point3<f64>,
    pub span_axis: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    /// Shedding interval (s).
    pub dt: f64,
    pub max_rows: usize,
    pub max_steps: usize,
    /// Relative change of the Kutta strengths that counts as converged.
    pub tol: f64,
    pub solve: SolveOptions,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            dt: 0.0,
            max_rows: 200,
            max_steps: 2000,
            tol: 1e-8,
            solve: SolveOptions::default(),
        }
    }
}

/// A body with the freestream-independent data reused across angles.
pub struct SteadyCase {
    pub body: MeshCollection,
    pub influence: BodyInfluence,
    pub adjacency: Adjacency,
    pub reference: Reference,
}

impl SteadyCase {
    pub fn new(body: MeshCollection, reference: Reference) -> Self {
        let influence = BodyInfluence::new(&body);
        let adjacency = Adjacency::new(&body);
        SteadyCase {
            body,
            influence,
            adjacency,
            reference,
        }
    }
}

/// Converged steady state for one freestream.
#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub freestream: Vector3<f64>,
    pub state: SingularityState,
    pub wake: WakeSheet,
    pub system: InfluenceSystem,
    pub report: SolveReport,
    pub steps: usize,
    pub dt: f64,
    /// Last relative change of the Kutta strengths.
    pub change: f64,
}

/// Freestream of speed `speed` at angle of attack `alpha_deg` in the `x-z`
/// plane.
pub fn freestream(speed: f64, alpha_deg: f64) -> Vector3<f64> {
    let a = alpha_deg.to_radians();
    Vector3::new(a.cos(), 0.0, a.sin()) * speed
}

pub fn solve_steady(
    case: &SteadyCase,
    v_inf: &Vector3<f64>,
    opts: &SteadyOptions,
) -> Result<SteadySolution, SteadyError> {
    let body = &case.body;
    let n = body.len();
    let speed = v_inf.norm();
    let dt = if opts.dt > 0.0 {
        opts.dt
    } else {
        case.reference.chord / speed
    };
    let pairs = trailing_edge_pairs(body)?;
    let still = vec![Vector3::zeros(); n];
    let sigma = source_strengths(body, v_inf, &still)?;
    let mut state = SingularityState::zeros(n);
    state.sigma = sigma.clone();

    let mut wake = WakeSheet::for_body(body, opts.max_rows)?;
    let bare = assemble_from(&case.influence, &sigma, &pairs, None, std::iter::empty())?;
    let (mu0, mut report) = solve_doublets(&bare, &opts.solve, None)?;
    state.advance(mu0, 0.0);
    if pairs.is_empty() {
        return Ok(SteadySolution {
            freestream: *v_inf,
            state,
            wake,
            system: bare,
            report,
            steps: 0,
            dt,
            change: 0.0,
        });
    }

    // Influence of the row of each age, newest first.
    let mut by_age: Vec<DMatrix<f64>> = Vec::new();
    let floor = 1e-6 * case.reference.chord * speed;
    let mut last_kutta = kutta_strengths(body, &state.mu);
    let mut change = f64::INFINITY;
    for step in 1..=opts.max_steps {
        let t = step as f64 * dt;
        convect_wake(&mut wake, v_inf, dt, None)?;
        shed_row(body, &state.mu, &mut wake, v_inf, dt, t)?;
        let rows = wake.n_rows();
        while by_age.len() < rows {
            let age = by_age.len();
            by_age.push(wake_row_influence(body, &wake.rows[rows - 1 - age]));
        }
        let frozen =
            (1..rows).map(|age| (&by_age[age], wake.rows[rows - 1 - age].strengths.as_slice()));
        let system = assemble_from(&case.influence, &sigma, &pairs, Some(&by_age[0]), frozen)?;
        let (mu, rep) = solve_doublets(&system, &opts.solve, Some(&state.mu))?;
        report = rep;
        let kutta = kutta_strengths(body, &mu);
        wake.set_newest_strengths(&kutta)?;
        state.advance(mu, t);

        let scale = kutta.iter().fold(floor, |m, k| m.max(k.abs()));
        change = kutta
            .iter()
            .zip(&last_kutta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        last_kutta = kutta;
        if step >= 2 && change <= opts.tol {
            return Ok(SteadySolution {
                freestream: *v_inf,
                state,
                wake,
                system,
                report,
                steps: step,
                dt,
                change,
            });
        }
    }
    Err(SteadyError::NotConverged {
        steps: opts.max_steps,
        change,
    })
}

/// Surface velocity, pressure and loads of a steady solution.
pub fn steady_outputs(
    case: &SteadyCase,
    sol: &SteadySolution,
    mode: VelocityMode,
) -> Result<AeroOutputs, SteadyError> {
    let body = &case.body;
    let grad = surface_gradient_mu(body, &case.adjacency, &sol.state.mu)?;
    let induced = match mode {
        VelocityMode::Marcov => principal_velocities(body, &sol.wake, &sol.state),
        VelocityMode::DoubletGradientOnly => vec![Vector3::zeros(); body.len()],
    };
    let kinematic = vec![sol.freestream; body.len()];
    let velocity = combine_velocity(body, &induced, &grad, &kinematic, mode);
    let rate = potential_rate(&sol.state, sol.dt);
    let cp = velocity
        .iter()
        .zip(&rate)
        .map(|(v, r)| pressure_coefficient(v, &sol.freestream, *r))
        .collect::<Result<Vec<_>, _>>()?;
    let r = &case.reference;
    let q = 0.5 * r.density * sol.freestream.norm_squared();
    let (force, moment) = integrate_loads(body, &cp, q, &r.moment_point);
    let axes = WindAxes::new(&sol.freestream, &r.span_axis);
    let coefficients = coefficients(&force, &moment, q, r.area, r.chord, &axes)?;
    Ok(AeroOutputs {
        velocity,
        cp,
        force,
        moment,
        coefficients,
        ref_area: r.area,
        ref_chord: r.chord,
    })
}
