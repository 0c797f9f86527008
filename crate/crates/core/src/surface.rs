//! Post-processing of a solved state: surface doublet gradient, surface
//! velocity, unsteady Bernoulli pressure, loads and coefficients.

use std::collections::HashMap;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::MeshCollection;
use crate::kernels;
use crate::solver::SingularityState;
use crate::wake::WakeSheet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("panel {0} has fewer than two non-collinear edge neighbours")]
    IsolatedPanel(usize),
    #[error("unknown velocity mode {0:?} (expected \"marcov\" or \"gradmu\")")]
    UnknownMode(String),
    #[error("reference speed must be positive")]
    ZeroFreestream,
    #[error("reference {0} must be positive")]
    NonPositiveReference(&'static str),
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
}

fn check_len(expected: usize, found: usize) -> Result<(), SurfaceError> {
    if expected != found {
        return Err(SurfaceError::LengthMismatch { expected, found });
    }
    Ok(())
}

/// How the surface velocity is reconstructed from the singularities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VelocityMode {
    /// `v = v_kin + w − ½∇μ` with `w` the principal value of the induced
    /// velocity, projected onto the panel plane.
    #[default]
    Marcov,
    /// `v = (v_kin)_t − ∇μ`.
    #[serde(rename = "gradmu")]
    DoubletGradientOnly,
}

impl FromStr for VelocityMode {
    type Err = SurfaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "marcov" => Ok(VelocityMode::Marcov),
            "gradmu" => Ok(VelocityMode::DoubletGradientOnly),
            other => Err(SurfaceError::UnknownMode(other.to_string())),
        }
    }
}

type NodeKey = [u64; 3];

fn node_key(p: &Point3<f64>) -> NodeKey {
    // +0.0 and -0.0 must meet.
    [p.x + 0.0, p.y + 0.0, p.z + 0.0].map(f64::to_bits)
}

/// Edge-neighbour lists over all panels of a collection. Panels are
/// neighbours when they share an edge with bit-identical end points, except
/// across a trailing edge where the doublet strength jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub neighbours: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn new(body: &MeshCollection) -> Self {
        let mut edges: HashMap<(NodeKey, NodeKey), Vec<usize>> = HashMap::new();
        let mut global = 0;
        for mesh in &body.meshes {
            for quad in &mesh.panels {
                for k in 0..4 {
                    let (a, b) = (&mesh.nodes[quad[k]], &mesh.nodes[quad[(k + 1) % 4]]);
                    let (ka, kb) = (node_key(a), node_key(b));
                    if ka == kb {
                        continue;
                    }
                    let key = if ka < kb { (ka, kb) } else { (kb, ka) };
                    let list = edges.entry(key).or_default();
                    if !list.contains(&global) {
                        list.push(global);
                    }
                }
                global += 1;
            }
        }
        let cut: Vec<(usize, usize)> = body
            .trailing_edges()
            .iter()
            .map(|(_, te)| (te.upper.min(te.lower), te.upper.max(te.lower)))
            .collect();
        let mut neighbours = vec![Vec::new(); body.len()];
        for panels in edges.values() {
            for &i in panels {
                for &j in panels {
                    if i != j && !cut.contains(&(i.min(j), i.max(j))) && !neighbours[i].contains(&j)
                    {
                        neighbours[i].push(j);
                    }
                }
            }
        }
        for list in &mut neighbours {
            list.sort_unstable();
        }
        Adjacency { neighbours }
    }
}

/// Weighted least-squares in-plane gradient of `mu` (weights `1/|d|²` over
/// the edge neighbours), returned in global coordinates.
pub fn surface_gradient_mu(
    body: &MeshCollection,
    adjacency: &Adjacency,
    mu: &[f64],
) -> Result<Vec<Vector3<f64>>, SurfaceError> {
    check_len(body.len(), mu.len())?;
    let centroids: Vec<Point3<f64>> = body.panels().map(|g| g.centroid()).collect();
    body.panels()
        .enumerate()
        .map(|(i, g)| {
            let f = &g.frame;
            let (mut sxx, mut sxy, mut syy, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &j in &adjacency.neighbours[i] {
                let d = centroids[j] - centroids[i];
                let (dx, dy) = (d.dot(&f.tangent1), d.dot(&f.tangent2));
                let w = 1.0 / (dx * dx + dy * dy);
                let dm = mu[j] - mu[i];
                sxx += w * dx * dx;
                sxy += w * dx * dy;
                syy += w * dy * dy;
                bx += w * dx * dm;
                by += w * dy * dm;
            }
            let det = sxx * syy - sxy * sxy;
            if !(det > 1e-10 * (sxx + syy).powi(2)) {
                return Err(SurfaceError::IsolatedPanel(i));
            }
            let gx = (syy * bx - sxy * by) / det;
            let gy = (sxx * by - sxy * bx) / det;
            Ok(f.tangent1 * gx + f.tangent2 * gy)
        })
        .collect()
}

/// Principal-value induced velocity `w` at the centroid of panel `index`:
/// every body and wake panel contributes through the exact kernels, the
/// panel itself included.
pub fn cauchy_principal_velocity(
    body: &MeshCollection,
    wake: &WakeSheet,
    state: &SingularityState,
    index: usize,
) -> Vector3<f64> {
    induced_at(body, wake, state, &body.panel(index).centroid())
}

fn induced_at(
    body: &MeshCollection,
    wake: &WakeSheet,
    state: &SingularityState,
    x: &Point3<f64>,
) -> Vector3<f64> {
    let mut w = Vector3::zeros();
    for (j, g) in body.panels().enumerate() {
        let (vs, vd) = kernels::source_doublet_velocities(&g.frame, x);
        w -= vd * state.mu[j] + vs * state.sigma[j];
    }
    w + wake_velocity(wake, x)
}

/// Velocity induced by the wake alone at `x`.
pub fn wake_velocity(wake: &WakeSheet, x: &Point3<f64>) -> Vector3<f64> {
    let mut w = Vector3::zeros();
    for (f, m) in wake.panels() {
        w -= kernels::doublet_velocity(f, x) * m;
    }
    w
}

/// Principal-value velocity at every panel centroid.
pub fn principal_velocities(
    body: &MeshCollection,
    wake: &WakeSheet,
    state: &SingularityState,
) -> Vec<Vector3<f64>> {
    body.panels()
        .map(|g| induced_at(body, wake, state, &g.centroid()))
        .collect()
}

/// Cached body-on-body velocity coefficients at panel centroids, stored per
/// Cartesian component. Valid while the body shape is fixed; under a rigid
/// rotation `R` the induced velocities rotate with `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityInfluence {
    doublet: [DMatrix<f64>; 3],
    source: [DMatrix<f64>; 3],
}

impl VelocityInfluence {
    pub fn new(body: &MeshCollection) -> Self {
        let n = body.len();
        let centroids: Vec<Point3<f64>> = body.panels().map(|g| g.centroid()).collect();
        let mut doublet = [
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
        ];
        let mut source = doublet.clone();
        for (j, g) in body.panels().enumerate() {
            for (i, x) in centroids.iter().enumerate() {
                let (vs, vd) = kernels::source_doublet_velocities(&g.frame, x);
                for c in 0..3 {
                    doublet[c][(i, j)] = vd[c];
                    source[c][(i, j)] = vs[c];
                }
            }
        }
        VelocityInfluence { doublet, source }
    }

    /// Body contribution to `w`, rotated by `rotation` (identity for the
    /// frame the cache was built in).
    pub fn apply(&self, mu: &[f64], sigma: &[f64], rotation: &Matrix3<f64>) -> Vec<Vector3<f64>> {
        let mu = DVector::from_column_slice(mu);
        let sigma = DVector::from_column_slice(sigma);
        let comp: Vec<DVector<f64>> = (0..3)
            .map(|c| -(&self.doublet[c] * &mu) - &self.source[c] * &sigma)
            .collect();
        (0..mu.len())
            .map(|i| rotation * Vector3::new(comp[0][i], comp[1][i], comp[2][i]))
            .collect()
    }
}

/// Combine induced velocity, doublet gradient and kinematic inflow into the
/// surface velocity of each panel.
pub fn combine_velocity(
    body: &MeshCollection,
    induced: &[Vector3<f64>],
    grad_mu: &[Vector3<f64>],
    kinematic: &[Vector3<f64>],
    mode: VelocityMode,
) -> Vec<Vector3<f64>> {
    body.panels()
        .enumerate()
        .map(|(i, g)| {
            let n = g.normal();
            let tangential = |v: Vector3<f64>| v - n * v.dot(&n);
            match mode {
                VelocityMode::Marcov => tangential(kinematic[i] + induced[i] - grad_mu[i] * 0.5),
                VelocityMode::DoubletGradientOnly => tangential(kinematic[i]) - grad_mu[i],
            }
        })
        .collect()
}

/// Surface velocity of a body at rest in a uniform freestream.
pub fn surface_velocity(
    body: &MeshCollection,
    wake: &WakeSheet,
    state: &SingularityState,
    freestream: &Vector3<f64>,
    mode: VelocityMode,
) -> Result<Vec<Vector3<f64>>, SurfaceError> {
    let adjacency = Adjacency::new(body);
    let grad = surface_gradient_mu(body, &adjacency, &state.mu)?;
    let kinematic = vec![*freestream; body.len()];
    let induced = match mode {
        VelocityMode::Marcov => principal_velocities(body, wake, state),
        VelocityMode::DoubletGradientOnly => vec![Vector3::zeros(); body.len()],
    };
    Ok(combine_velocity(body, &induced, &grad, &kinematic, mode))
}

/// Time derivative of the surface perturbation potential, `−(μ − μ_prev)/Δt`;
/// zero when there is no history.
pub fn potential_rate(state: &SingularityState, dt: f64) -> Vec<f64> {
    match (&state.mu_prev, dt > 0.0) {
        (Some(prev), true) => state
            .mu
            .iter()
            .zip(prev)
            .map(|(m, p)| -(m - p) / dt)
            .collect(),
        _ => vec![0.0; state.mu.len()],
    }
}

/// `Cp = 1 − |v|²/|v∞|² − 2 (dφ/dt)/|v∞|²`.
pub fn pressure_coefficient(
    v: &Vector3<f64>,
    freestream: &Vector3<f64>,
    dphi_dt: f64,
) -> Result<f64, SurfaceError> {
    let v2 = freestream.norm_squared();
    if !(v2 > 0.0) {
        return Err(SurfaceError::ZeroFreestream);
    }
    Ok(1.0 - v.norm_squared() / v2 - 2.0 * dphi_dt / v2)
}

/// Pressure coefficient for a panel whose local kinematic inflow `v_kin`
/// differs from the reference speed: `(|v_kin|² − |v|² − 2 dφ/dt) / |v_ref|²`.
pub fn pressure_coefficient_moving(
    v: &Vector3<f64>,
    kinematic: &Vector3<f64>,
    reference_speed: f64,
    dphi_dt: f64,
) -> Result<f64, SurfaceError> {
    let v2 = reference_speed * reference_speed;
    if !(v2 > 0.0) {
        return Err(SurfaceError::ZeroFreestream);
    }
    Ok((kinematic.norm_squared() - v.norm_squared() - 2.0 * dphi_dt) / v2)
}

/// Pressure force and moment about `moment_ref`:
/// `F = Σ −Cp q A n`, `M = Σ (x − x_ref) × dF`.
pub fn integrate_loads(
    body: &MeshCollection,
    cp: &[f64],
    q_inf: f64,
    moment_ref: &Point3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let mut force = Vector3::zeros();
    let mut moment = Vector3::zeros();
    for (g, c) in body.panels().zip(cp) {
        let df = g.normal() * (-c * q_inf * g.area());
        force += df;
        moment += (g.centroid() - moment_ref).cross(&df);
    }
    (force, moment)
}

/// Orthonormal wind axes: drag along the freestream, lift normal to it and
/// to the span axis, moments taken about the span axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindAxes {
    pub drag: Vector3<f64>,
    pub side: Vector3<f64>,
    pub lift: Vector3<f64>,
}

impl WindAxes {
    pub fn new(freestream: &Vector3<f64>, span: &Vector3<f64>) -> Self {
        let drag = freestream.normalize();
        let lift = drag.cross(span).normalize();
        let side = lift.cross(&drag);
        WindAxes { drag, side, lift }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub cl: f64,
    pub cd: f64,
    pub cm: f64,
}

pub fn coefficients(
    force: &Vector3<f64>,
    moment: &Vector3<f64>,
    q_inf: f64,
    ref_area: f64,
    ref_chord: f64,
    axes: &WindAxes,
) -> Result<Coefficients, SurfaceError> {
    if !(q_inf > 0.0) {
        return Err(SurfaceError::NonPositiveReference("dynamic pressure"));
    }
    if !(ref_area > 0.0) {
        return Err(SurfaceError::NonPositiveReference("area"));
    }
    if !(ref_chord > 0.0) {
        return Err(SurfaceError::NonPositiveReference("chord"));
    }
    let qs = q_inf * ref_area;
    Ok(Coefficients {
        cl: force.dot(&axes.lift) / qs,
        cd: force.dot(&axes.drag) / qs,
        cm: moment.dot(&axes.side) / (qs * ref_chord),
    })
}

/// Post-processed aerodynamic state of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroOutputs {
    pub velocity: Vec<Vector3<f64>>,
    pub cp: Vec<f64>,
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
    pub coefficients: Coefficients,
    pub ref_area: f64,
    pub ref_chord: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{flat_plate, MeshKind, SurfaceMesh};

    fn plate(n: usize) -> MeshCollection {
        MeshCollection::new(vec![
            flat_plate(n, n, 1.0, 1.0, MeshKind::NonLifting).unwrap()
        ])
        .unwrap()
    }

    /// Unit cube with `n × n` panels per face and outward normals.
    fn cube(n: usize) -> MeshCollection {
        let mut nodes = Vec::new();
        let mut panels = Vec::new();
        // Each face: origin corner and two edge vectors with e1 × e2 outward.
        let faces = [
            (Vector3::new(0.0, 0.0, 0.0), Vector3::y(), Vector3::x()),
            (Vector3::new(0.0, 0.0, 1.0), Vector3::x(), Vector3::y()),
            (Vector3::new(0.0, 0.0, 0.0), Vector3::x(), Vector3::z()),
            (Vector3::new(0.0, 1.0, 0.0), Vector3::z(), Vector3::x()),
            (Vector3::new(0.0, 0.0, 0.0), Vector3::z(), Vector3::y()),
            (Vector3::new(1.0, 0.0, 0.0), Vector3::y(), Vector3::z()),
        ];
        for (o, e1, e2) in faces {
            let base = nodes.len();
            for j in 0..=n {
                for i in 0..=n {
                    let p = o + e1 * (i as f64 / n as f64) + e2 * (j as f64 / n as f64);
                    nodes.push(Point3::from(p));
                }
            }
            for j in 0..n {
                for i in 0..n {
                    let a = base + j * (n + 1) + i;
                    panels.push([a, a + 1, a + n + 2, a + n + 1]);
                }
            }
        }
        MeshCollection::new(vec![
            SurfaceMesh::new(nodes, panels, MeshKind::NonLifting).unwrap()
        ])
        .unwrap()
    }

    #[test]
    fn cube_is_closed_and_fully_connected() {
        let c = cube(2);
        assert!(c.area_vector().norm() < 1e-12);
        let adj = Adjacency::new(&c);
        assert!(adj.neighbours.iter().all(|l| l.len() == 4));
    }

    #[test]
    fn gradient_of_constant_and_linear_fields() {
        let body = plate(6);
        let adj = Adjacency::new(&body);
        let g = surface_gradient_mu(&body, &adj, &vec![2.5; body.len()]).unwrap();
        assert!(g.iter().all(|v| v.norm() < 1e-12));
        let mu: Vec<f64> = body.panels().map(|p| 3.0 * p.centroid().x - 2.0).collect();
        let g = surface_gradient_mu(&body, &adj, &mu).unwrap();
        for v in g {
            assert!((v - Vector3::new(3.0, 0.0, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn gradient_converges_at_second_order() {
        // Smoothly stretched plate, so the stencil is not symmetric.
        let stretched = |n: usize| {
            let mut m = flat_plate(n, n, 1.0, 1.0, MeshKind::NonLifting).unwrap();
            for p in &mut m.nodes {
                p.x += 0.1 * (std::f64::consts::PI * p.x).sin();
                p.y += 0.05 * (std::f64::consts::PI * p.y).sin();
            }
            MeshCollection::new(vec![SurfaceMesh::new(
                m.nodes,
                m.panels,
                MeshKind::NonLifting,
            )
            .unwrap()])
            .unwrap()
        };
        let field = |p: Point3<f64>| p.x * p.x + 0.5 * p.x * p.y - p.y * p.y;
        let exact =
            |p: Point3<f64>| Vector3::new(2.0 * p.x + 0.5 * p.y, 0.5 * p.x - 2.0 * p.y, 0.0);
        let mut errors = Vec::new();
        for n in [8, 16, 32] {
            let body = stretched(n);
            let adj = Adjacency::new(&body);
            let mu: Vec<f64> = body.panels().map(|p| field(p.centroid())).collect();
            let g = surface_gradient_mu(&body, &adj, &mu).unwrap();
            let err = body
                .panels()
                .zip(&g)
                .enumerate()
                .filter(|(i, _)| adj.neighbours[*i].len() == 4)
                .map(|(_, (p, v))| (v - exact(p.centroid())).norm())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "observed order {order}, errors {errors:?}");
        }
    }

    #[test]
    fn isolated_panel_is_reported() {
        let strip = MeshCollection::new(vec![
            flat_plate(3, 1, 3.0, 1.0, MeshKind::NonLifting).unwrap()
        ])
        .unwrap();
        let adj = Adjacency::new(&strip);
        assert_eq!(
            surface_gradient_mu(&strip, &adj, &[0.0; 3]),
            Err(SurfaceError::IsolatedPanel(0))
        );
    }

    #[test]
    fn uniform_doublet_on_closed_cube_induces_nothing() {
        let body = cube(3);
        let mut state = SingularityState::zeros(body.len());
        state.mu = vec![1.0; body.len()];
        let wake = WakeSheet::new(0, 1.0, 1).unwrap();
        for g in body.panels() {
            let outside = g.centroid() + g.normal() * 1e-6;
            assert!(induced_at(&body, &wake, &state, &outside).norm() < 1e-6);
        }
        for i in 0..body.len() {
            assert!(cauchy_principal_velocity(&body, &wake, &state, i).norm() < 1e-6);
        }
    }

    #[test]
    fn principal_value_of_single_source_panel() {
        let body = plate(1);
        let mut state = SingularityState::zeros(1);
        state.sigma = vec![1.0];
        let wake = WakeSheet::new(0, 1.0, 1).unwrap();
        let w = cauchy_principal_velocity(&body, &wake, &state, 0);
        let f = &body.panel(0).frame;
        let (vs, _) = kernels::source_doublet_velocities(f, &f.origin);
        assert_eq!(w, -vs);
        // The principal value is the mean of the one-sided limits ±½ n.
        let above = kernels::source_influence(f, &(f.origin + f.normal * 1e-9))
            .unwrap()
            .velocity;
        assert!((above.dot(&f.normal) - 0.5).abs() < 1e-6);
        assert!(w.dot(&f.normal).abs() < 1e-12);
    }

    #[test]
    fn zero_singularities_recover_freestream() {
        let body = cube(2);
        let state = SingularityState::zeros(body.len());
        let wake = WakeSheet::new(0, 1.0, 1).unwrap();
        let v = Vector3::new(3.0, 1.0, -2.0);
        let vs = surface_velocity(&body, &wake, &state, &v, VelocityMode::Marcov).unwrap();
        for (g, s) in body.panels().zip(&vs) {
            let n = g.normal();
            assert!((s - (v - n * v.dot(&n))).norm() < 1e-12);
            assert!(s.dot(&n).abs() < 1e-10 * s.norm().max(1.0));
        }
    }

    #[test]
    fn pressure_coefficient_arithmetic() {
        let v = Vector3::new(10.0, 0.0, 0.0);
        assert_eq!(
            pressure_coefficient(&Vector3::zeros(), &v, 0.0).unwrap(),
            1.0
        );
        assert_eq!(pressure_coefficient(&v, &v, 0.0).unwrap(), 0.0);
        assert_eq!(pressure_coefficient(&(v * 2.0), &v, 0.0).unwrap(), -3.0);
        assert!(pressure_coefficient(&v, &Vector3::zeros(), 0.0).is_err());
        assert_eq!(pressure_coefficient_moving(&v, &v, 10.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn loads_and_coefficients() {
        let body = cube(2);
        let (f, _) = integrate_loads(&body, &vec![0.7; body.len()], 3.0, &Point3::origin());
        assert!(f.norm() < 1e-8 * 3.0 * body.total_area());

        let single = plate(1);
        let (f, m) = integrate_loads(&single, &[-1.0], 1.0, &Point3::origin());
        assert!((f - Vector3::z()).norm() < 1e-15);
        assert!((m - Vector3::new(0.5, 0.5, 0.0).cross(&Vector3::z())).norm() < 1e-15);

        let axes = WindAxes::new(&Vector3::x(), &Vector3::y());
        assert_eq!(axes.lift, Vector3::z());
        let zero =
            coefficients(&Vector3::zeros(), &Vector3::zeros(), 1.0, 1.0, 1.0, &axes).unwrap();
        assert_eq!((zero.cl, zero.cd, zero.cm), (0.0, 0.0, 0.0));
        let c = coefficients(
            &Vector3::new(0.0, 0.0, 6.0),
            &Vector3::zeros(),
            2.0,
            3.0,
            1.0,
            &axes,
        )
        .unwrap();
        assert_eq!(c.cl, 1.0);
        assert!(coefficients(&f, &m, 1.0, 0.0, 1.0, &axes).is_err());
        assert!(coefficients(&f, &m, 1.0, 1.0, -1.0, &axes).is_err());
    }

    #[test]
    fn velocity_mode_parsing() {
        assert_eq!(
            "marcov".parse::<VelocityMode>().unwrap(),
            VelocityMode::Marcov
        );
        assert_eq!(
            "gradmu".parse::<VelocityMode>().unwrap(),
            VelocityMode::DoubletGradientOnly
        );
        assert!("other".parse::<VelocityMode>().is_err());
    }

    #[test]
    fn cached_velocity_matches_direct_sum() {
        let body = cube(2);
        let mut state = SingularityState::zeros(body.len());
        state.mu = (0..body.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        state.sigma = (0..body.len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let wake = WakeSheet::new(0, 1.0, 1).unwrap();
        let cache = VelocityInfluence::new(&body);
        let cached = cache.apply(&state.mu, &state.sigma, &Matrix3::identity());
        let direct = principal_velocities(&body, &wake, &state);
        for (a, b) in cached.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
