//! Closed-form influence of flat, constant-strength source and doublet panels.
//!
//! All integrals are evaluated exactly for every evaluation distance; there is
//! no far-field switch. Potentials carry the `1/(4π)` normalisation. A unit
//! source has potential `-∫ 1/(4π r) dA`, a unit doublet has potential
//! `Ω/(4π)` where `Ω` is the solid angle subtended by the panel, positive on
//! the side the panel normal points to.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

const FOUR_PI: f64 = 4.0 * PI;

/// Relative size (w.r.t. the panel diagonal) below which near-plane terms are clamped.
pub const PLANE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("panel nodes are collinear or coincident")]
    DegeneratePanel,
    #[error("evaluation point lies on panel edge {edge} (distance {distance:e})")]
    EdgeSingular { edge: usize, distance: f64 },
}

/// Potential and velocity induced by a unit-strength panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Influence {
    pub potential: f64,
    pub velocity: Vector3<f64>,
}

/// Local frame of a planarised panel.
///
/// `corners` are counter-clockwise about `normal` and lie in the plane through
/// `origin`; only the first `n_corners` entries are meaningful (3 for
/// triangles stored as degenerate quadrilaterals).
#[derive(Debug, Clone, PartialEq)]
pub struct PanelFrame {
    pub origin: Point3<f64>,
    pub tangent1: Vector3<f64>,
    pub tangent2: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub corners: [[f64; 2]; 4],
    pub n_corners: usize,
    pub diagonal: f64,
    pub area: f64,
}

impl PanelFrame {
    pub fn corner_local(&self, k: usize) -> [f64; 2] {
        self.corners[k % self.n_corners]
    }

    /// Corner `k` in global coordinates (planarised).
    pub fn corner_global(&self, k: usize) -> Point3<f64> {
        let [x, y] = self.corner_local(k);
        self.origin + self.tangent1 * x + self.tangent2 * y
    }

    pub fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        let d = p - self.origin;
        Vector3::new(
            d.dot(&self.tangent1),
            d.dot(&self.tangent2),
            d.dot(&self.normal),
        )
    }

    pub fn to_global_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.tangent1 * v.x + self.tangent2 * v.y + self.normal * v.z
    }

    /// Shortest distance from a local-frame point to the panel's edge segments,
    /// together with the index of the closest edge.
    pub fn nearest_edge(&self, local: &Vector3<f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for k in 0..self.n_corners {
            let a = self.corner_local(k);
            let b = self.corner_local(k + 1);
            let d = segment_distance(local, a, b);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }

    fn check_edges(&self, local: &Vector3<f64>) -> Result<(), KernelError> {
        let (edge, distance) = self.nearest_edge(local);
        if distance <= PLANE_EPS * self.diagonal {
            Err(KernelError::EdgeSingular { edge, distance })
        } else {
            Ok(())
        }
    }
}

fn segment_distance(p: &Vector3<f64>, a: [f64; 2], b: [f64; 2]) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let len2 = ex * ex + ey * ey;
    let (px, py) = (p.x - a[0], p.y - a[1]);
    let t = if len2 > 0.0 {
        ((px * ex + py * ey) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (px - t * ex, py - t * ey);
    (dx * dx + dy * dy + p.z * p.z).sqrt()
}

/// Build the planarised frame of a panel given its four nodes.
///
/// Repeated consecutive nodes are collapsed, so a triangle may be passed as a
/// quadrilateral with one node duplicated. The normal is the normalised cross
/// product of the diagonals; nodes are projected onto the plane through their
/// mean with that normal.
pub fn panel_frame(nodes: &[Point3<f64>; 4]) -> Result<PanelFrame, KernelError> {
    let scale = nodes
        .iter()
        .flat_map(|a| nodes.iter().map(move |b| (a - b).norm()))
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Err(KernelError::DegeneratePanel);
    }
    let mut distinct: Vec<Point3<f64>> = Vec::with_capacity(4);
    for p in nodes {
        if distinct
            .last()
            .is_none_or(|q| (p - q).norm() > 1e-14 * scale)
        {
            distinct.push(*p);
        }
    }
    while distinct.len() > 1 && (distinct[0] - distinct[distinct.len() - 1]).norm() <= 1e-14 * scale
    {
        distinct.pop();
    }
    if distinct.len() < 3 {
        return Err(KernelError::DegeneratePanel);
    }

    let area_vec = if distinct.len() == 4 {
        0.5 * (distinct[2] - distinct[0]).cross(&(distinct[3] - distinct[1]))
    } else {
        0.5 * (distinct[1] - distinct[0]).cross(&(distinct[2] - distinct[0]))
    };
    let twice = area_vec.norm();
    if twice <= 1e-14 * scale * scale {
        return Err(KernelError::DegeneratePanel);
    }
    let normal = area_vec / twice;

    let mean = Point3::from(
        distinct.iter().map(|p| p.coords).sum::<Vector3<f64>>() / distinct.len() as f64,
    );
    let projected: Vec<Point3<f64>> = distinct
        .iter()
        .map(|p| p - normal * (p - mean).dot(&normal))
        .collect();

    let tangent1 = {
        let e = projected[1] - projected[0];
        let e = e - normal * e.dot(&normal);
        e.normalize()
    };
    let tangent2 = normal.cross(&tangent1);

    // Area centroid of the planar polygon, computed in a provisional frame.
    let n = projected.len();
    let loc: Vec<[f64; 2]> = projected
        .iter()
        .map(|p| {
            let d = p - mean;
            [d.dot(&tangent1), d.dot(&tangent2)]
        })
        .collect();
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let [x0, y0] = loc[k];
        let [x1, y1] = loc[(k + 1) % n];
        let c = x0 * y1 - x1 * y0;
        a2 += c;
        cx += (x0 + x1) * c;
        cy += (y0 + y1) * c;
    }
    let area = 0.5 * a2;
    if area <= 0.0 {
        return Err(KernelError::DegeneratePanel);
    }
    let (cx, cy) = (cx / (6.0 * area), cy / (6.0 * area));
    let origin = mean + tangent1 * cx + tangent2 * cy;

    let mut corners = [[0.0; 2]; 4];
    for (k, c) in loc.iter().enumerate() {
        corners[k] = [c[0] - cx, c[1] - cy];
    }
    let diagonal = projected
        .iter()
        .flat_map(|a| projected.iter().map(move |b| (a - b).norm()))
        .fold(0.0_f64, f64::max);

    Ok(PanelFrame {
        origin,
        tangent1,
        tangent2,
        normal,
        corners,
        n_corners: n,
        diagonal,
        area,
    })
}

/// Signed solid angle of the panel seen from a local point, by a fan of
/// Van Oosterom–Strackee triangles. Zero for points in the panel plane.
fn solid_angle(frame: &PanelFrame, p: &Vector3<f64>) -> f64 {
    if p.z.abs() <= PLANE_EPS * frame.diagonal {
        return 0.0;
    }
    let rel = |k: usize| {
        let [x, y] = frame.corner_local(k);
        Vector3::new(x - p.x, y - p.y, -p.z)
    };
    let r0 = rel(0);
    let n0 = r0.norm();
    let mut omega = 0.0;
    for k in 1..frame.n_corners - 1 {
        let r1 = rel(k);
        let r2 = rel(k + 1);
        let (n1, n2) = (r1.norm(), r2.norm());
        let num = r0.dot(&r1.cross(&r2));
        let den = n0 * n1 * n2 + r0.dot(&r1) * n2 + r0.dot(&r2) * n1 + r1.dot(&r2) * n0;
        omega -= 2.0 * num.atan2(den);
    }
    omega
}

/// Source potential (without the `-1/4π` factor applied) and the in-plane
/// gradient sum, sharing the per-edge logarithms.
fn source_terms(frame: &PanelFrame, p: &Vector3<f64>, omega: f64) -> (f64, f64, f64) {
    let mut integral = 0.0;
    let (mut gx, mut gy) = (0.0, 0.0);
    let z2 = p.z * p.z;
    for k in 0..frame.n_corners {
        let [ax, ay] = frame.corner_local(k);
        let [bx, by] = frame.corner_local(k + 1);
        let (ex, ey) = (bx - ax, by - ay);
        let d = (ex * ex + ey * ey).sqrt();
        if d <= PLANE_EPS * frame.diagonal {
            continue;
        }
        let ra = ((p.x - ax).powi(2) + (p.y - ay).powi(2) + z2).sqrt();
        let rb = ((p.x - bx).powi(2) + (p.y - by).powi(2) + z2).sqrt();
        let s = ra + rb;
        let log = ((s + d) / (s - d)).ln();
        let h = (ex * (p.y - ay) - ey * (p.x - ax)) / d;
        integral += h * log;
        gx += ey / d * log;
        gy += -ex / d * log;
    }
    integral -= p.z.abs() * omega.abs();
    (integral, gx, gy)
}

/// Exact influence of a unit source panel at `point`.
pub fn source_influence(frame: &PanelFrame, point: &Point3<f64>) -> Result<Influence, KernelError> {
    let p = frame.to_local(point);
    frame.check_edges(&p)?;
    let omega = solid_angle(frame, &p);
    let (integral, gx, gy) = source_terms(frame, &p, omega);
    let local = Vector3::new(gx, gy, omega) / FOUR_PI;
    Ok(Influence {
        potential: -integral / FOUR_PI,
        velocity: frame.to_global_vector(&local),
    })
}

/// Exact influence of a unit doublet panel (axis along the panel normal).
pub fn doublet_influence(
    frame: &PanelFrame,
    point: &Point3<f64>,
) -> Result<Influence, KernelError> {
    let p = frame.to_local(point);
    frame.check_edges(&p)?;
    Ok(Influence {
        potential: solid_angle(frame, &p) / FOUR_PI,
        velocity: frame.to_global_vector(&ring_velocity(frame, &p)),
    })
}

/// Velocity of a unit doublet panel, i.e. of its edge vortex ring, in local
/// coordinates.
fn ring_velocity(frame: &PanelFrame, p: &Vector3<f64>) -> Vector3<f64> {
    let mut v = Vector3::zeros();
    for k in 0..frame.n_corners {
        let [ax, ay] = frame.corner_local(k);
        let [bx, by] = frame.corner_local(k + 1);
        let a = Vector3::new(ax, ay, 0.0);
        let b = Vector3::new(bx, by, 0.0);
        v += segment_induction(&(p - a), &(p - b));
    }
    v
}

/// Velocity at the tip of `r1 = p - a`, `r2 = p - b` induced by a segment
/// `a -> b` that carries the doublet-equivalent circulation (clockwise about
/// the panel normal, unit strength). Zero on the segment's supporting line.
pub(crate) fn segment_induction(r1: &Vector3<f64>, r2: &Vector3<f64>) -> Vector3<f64> {
    let cross = r1.cross(r2);
    let c2 = cross.norm_squared();
    let (n1, n2) = (r1.norm(), r2.norm());
    let r0 = r1 - r2;
    if c2 <= (PLANE_EPS * r0.norm()).powi(2) * (n1 * n1 + n2 * n2) || n1 == 0.0 || n2 == 0.0 {
        return Vector3::zeros();
    }
    let k = r0.dot(&(r1 / n1 - r2 / n2)) / (FOUR_PI * c2);
    -cross * k
}

/// Doublet velocity only, in global coordinates.
pub(crate) fn doublet_velocity(frame: &PanelFrame, point: &Point3<f64>) -> Vector3<f64> {
    frame.to_global_vector(&ring_velocity(frame, &frame.to_local(point)))
}

/// Doublet potential only; used by influence assembly.
pub(crate) fn doublet_potential(frame: &PanelFrame, point: &Point3<f64>) -> f64 {
    solid_angle(frame, &frame.to_local(point)) / FOUR_PI
}

/// Source and doublet potentials at one point, sharing the solid angle.
pub(crate) fn source_doublet_potentials(frame: &PanelFrame, point: &Point3<f64>) -> (f64, f64) {
    let p = frame.to_local(point);
    let omega = solid_angle(frame, &p);
    let (integral, _, _) = source_terms(frame, &p, omega);
    (-integral / FOUR_PI, omega / FOUR_PI)
}

/// Source and doublet velocities at one point, in global coordinates.
pub(crate) fn source_doublet_velocities(
    frame: &PanelFrame,
    point: &Point3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let p = frame.to_local(point);
    let omega = solid_angle(frame, &p);
    let (_, gx, gy) = source_terms(frame, &p, omega);
    let vs = Vector3::new(gx, gy, omega) / FOUR_PI;
    (
        frame.to_global_vector(&vs),
        frame.to_global_vector(&ring_velocity(frame, &p)),
    )
}

/// Doublet influence with the ring induction smoothed by a core of radius
/// `core_radius`: the velocity is scaled by `d²/(d² + δ²)` where `d` is the
/// distance to the nearest edge segment. The potential is unchanged. Finite
/// everywhere, including on the edges themselves.
pub fn desingularized_kernel(
    frame: &PanelFrame,
    point: &Point3<f64>,
    core_radius: f64,
) -> Influence {
    let p = frame.to_local(point);
    Influence {
        potential: solid_angle(frame, &p) / FOUR_PI,
        velocity: frame.to_global_vector(&softened_ring(frame, &p, core_radius)),
    }
}

fn softened_ring(frame: &PanelFrame, p: &Vector3<f64>, core_radius: f64) -> Vector3<f64> {
    let (_, d) = frame.nearest_edge(p);
    let dd = d * d;
    let factor = dd / (dd + core_radius * core_radius);
    if factor == 0.0 {
        return Vector3::zeros();
    }
    ring_velocity(frame, p) * factor
}

/// Velocity-only variant of [`desingularized_kernel`].
pub(crate) fn desingularized_velocity(
    frame: &PanelFrame,
    point: &Point3<f64>,
    core_radius: f64,
) -> Vector3<f64> {
    let p = frame.to_local(point);
    frame.to_global_vector(&softened_ring(frame, &p, core_radius))
}
