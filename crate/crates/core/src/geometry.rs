//! Surface meshes: airfoil sections, wing and kite lofts, the steering shear,
//! rigid transforms and multi-mesh collections.
//!
//! Body-frame convention for lofted lifting surfaces: `x` runs chordwise from
//! leading to trailing edge, `y` spanwise, `z` up (the suction side).

use std::f64::consts::PI;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{panel_frame, KernelError, PanelFrame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid NACA 4-digit designation {0:?}")]
    InvalidNacaCode(String),
    #[error("airfoil panel count must be even and at least 8, got {0}")]
    InvalidPanelCount(usize),
    #[error("degenerate dimension: {0}")]
    Degenerate(&'static str),
    #[error("panel {panel}: {source}")]
    Panel { panel: usize, source: KernelError },
    #[error("no arc half-angle reproduces aspect ratio {aspect} with projected aspect ratio {projected}")]
    NoArcSolution { aspect: f64, projected: f64 },
    #[error("mesh has no loft coordinates")]
    MissingLoftCoordinates,
    #[error("rotation is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("mesh collection is empty")]
    EmptyCollection,
}

/// Closed airfoil contour in chord units.
///
/// Points run from the trailing edge over the lower surface to the leading
/// edge and back over the upper surface; the first and last points coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct Airfoil {
    pub points: Vec<[f64; 2]>,
    pub closed_trailing_edge: bool,
}

impl Airfoil {
    pub fn n_panels(&self) -> usize {
        self.points.len() - 1
    }
}

/// Cosine-spaced chord stations `0 = x_0 < … < x_m = 1`.
fn cosine_stations(m: usize) -> Vec<f64> {
    (0..=m)
        .map(|k| {
            if k == m {
                1.0
            } else {
                0.5 * (1.0 - (PI * k as f64 / m as f64).cos())
            }
        })
        .collect()
}

/// Half-thickness of the 4-digit family with the closed trailing edge
/// coefficient, for thickness ratio `t`.
fn naca_thickness(t: f64, x: f64) -> f64 {
    5.0 * t
        * (0.2969 * x.sqrt() - 0.1260 * x - 0.3516 * x * x + 0.2843 * x.powi(3)
            - 0.1036 * x.powi(4))
}

fn check_panel_count(n_panels: usize) -> Result<usize, GeometryError> {
    if n_panels < 8 || !n_panels.is_multiple_of(2) {
        return Err(GeometryError::InvalidPanelCount(n_panels));
    }
    Ok(n_panels / 2)
}

/// Assemble lower/upper surfaces sampled at the same stations into a closed
/// contour (trailing edge, lower, leading edge, upper, trailing edge).
fn contour(lower: &[[f64; 2]], upper: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let m = lower.len() - 1;
    let mut points = Vec::with_capacity(2 * m + 1);
    points.extend(lower.iter().rev());
    points.extend(upper.iter().skip(1));
    let first = points[0];
    *points.last_mut().unwrap() = first;
    points
}

/// NACA 4-digit section with a closed trailing edge and cosine spacing.
pub fn naca4_airfoil(code: &str, n_panels: usize) -> Result<Airfoil, GeometryError> {
    let digits: Vec<u32> = code
        .chars()
        .map(|c| c.to_digit(10))
        .collect::<Option<_>>()
        .unwrap_or_default();
    if digits.len() != 4 {
        return Err(GeometryError::InvalidNacaCode(code.to_string()));
    }
    let camber = digits[0] as f64 / 100.0;
    let camber_pos = digits[1] as f64 / 10.0;
    let thickness = (digits[2] * 10 + digits[3]) as f64 / 100.0;
    if thickness == 0.0 || (camber > 0.0) != (camber_pos > 0.0) {
        return Err(GeometryError::InvalidNacaCode(code.to_string()));
    }
    let m = check_panel_count(n_panels)?;

    let mut lower = Vec::with_capacity(m + 1);
    let mut upper = Vec::with_capacity(m + 1);
    for x in cosine_stations(m) {
        let yt = naca_thickness(thickness, x);
        if camber == 0.0 {
            lower.push([x, -yt]);
            upper.push([x, yt]);
            continue;
        }
        let p = camber_pos;
        let (yc, dyc) = if x < p {
            (
                camber / (p * p) * (2.0 * p * x - x * x),
                2.0 * camber / (p * p) * (p - x),
            )
        } else {
            (
                camber / ((1.0 - p) * (1.0 - p)) * (1.0 - 2.0 * p + 2.0 * p * x - x * x),
                2.0 * camber / ((1.0 - p) * (1.0 - p)) * (p - x),
            )
        };
        let th = dyc.atan();
        lower.push([x + yt * th.sin(), yc - yt * th.cos()]);
        upper.push([x - yt * th.sin(), yc + yt * th.cos()]);
    }
    Ok(Airfoil {
        points: contour(&lower, &upper),
        closed_trailing_edge: true,
    })
}

// Clark-Y ordinates in percent chord.
const CLARK_Y_X: [f64; 18] = [
    0.0,
    1.25,
    2.5,
    5.0,
    7.5,
    10.0,
    15.0,
    20.0,
    30.0,
    40.0,
    50.0,
    60.0,
    70.0,
    80.0,
    90.0,
    95.0,
    100.0,
    f64::NAN,
];
const CLARK_Y_UPPER: [f64; 17] = [
    3.50, 5.45, 6.50, 7.90, 8.85, 9.60, 10.68, 11.36, 11.70, 11.40, 10.52, 9.15, 7.35, 5.22, 2.80,
    1.49, 0.12,
];
const CLARK_Y_LOWER: [f64; 17] = [
    3.50, 1.93, 1.47, 0.93, 0.63, 0.42, 0.15, 0.03, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
];

/// Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson).
fn pchip(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let i = match xs.iter().position(|&xi| xi > x) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => n - 2,
    }
    .min(n - 2);
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    let slope = |k: usize| -> f64 {
        if k == 0 {
            return delta[0];
        }
        if k == n - 1 {
            return delta[n - 2];
        }
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b <= 0.0 {
            0.0
        } else {
            let (w1, w2) = (2.0 * h[k] + h[k - 1], h[k] + 2.0 * h[k - 1]);
            (w1 + w2) / (w1 / a + w2 / b)
        }
    };
    let t = (x - xs[i]) / h[i];
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * ys[i]
        + (t3 - 2.0 * t2 + t) * h[i] * slope(i)
        + (-2.0 * t3 + 3.0 * t2) * ys[i + 1]
        + (t3 - t2) * h[i] * slope(i + 1)
}

/// Clark-Y section resampled with cosine spacing.
///
/// The tabulated trailing edge is closed by a linear taper and the contour is
/// normalised so that the leading edge sits at (0, 0) and the trailing edge at
/// (1, 0). Interpolation is done in `sqrt(x)` to follow the nose curvature.
pub fn clark_y_airfoil(n_panels: usize) -> Result<Airfoil, GeometryError> {
    let m = check_panel_count(n_panels)?;
    let n = CLARK_Y_UPPER.len();
    let xs: Vec<f64> = CLARK_Y_X[..n].iter().map(|x| x / 100.0).collect();
    let te_mid = 0.5 * (CLARK_Y_UPPER[n - 1] + CLARK_Y_LOWER[n - 1]) / 100.0;
    let le = CLARK_Y_UPPER[0] / 100.0;
    // Chord line from (0, le) to (1, te_mid); express ordinates relative to it.
    let rel =
        |y: f64, x: f64, te: f64| y / 100.0 - (le + (te_mid - le) * x) + (te_mid - te / 100.0) * x;
    let yu: Vec<f64> = (0..n)
        .map(|k| rel(CLARK_Y_UPPER[k], xs[k], CLARK_Y_UPPER[n - 1]))
        .collect();
    let yl: Vec<f64> = (0..n)
        .map(|k| rel(CLARK_Y_LOWER[k], xs[k], CLARK_Y_LOWER[n - 1]))
        .collect();
    // Rotating the chord line onto the x axis scales lengths by 1/cos; the
    // ordinates are small, so a shear-and-scale keeps the stations aligned.
    let chord = (1.0 + (te_mid - le).powi(2)).sqrt();
    let ss: Vec<f64> = xs.iter().map(|x| x.sqrt()).collect();

    let mut lower = Vec::with_capacity(m + 1);
    let mut upper = Vec::with_capacity(m + 1);
    for x in cosine_stations(m) {
        let s = x.sqrt();
        let (u, l) = if x == 0.0 || x == 1.0 {
            (0.0, 0.0)
        } else {
            (pchip(&ss, &yu, s) / chord, pchip(&ss, &yl, s) / chord)
        };
        lower.push([x, l]);
        upper.push([x, u]);
    }
    Ok(Airfoil {
        points: contour(&lower, &upper),
        closed_trailing_edge: true,
    })
}

/// Role of a mesh in the flow problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeshKind {
    /// Lifting surface with a trailing edge that sheds a wake.
    WakeEmitting,
    /// Closed-body panels that carry sources and doublets but shed no wake.
    NonLifting,
    /// Panels that carry only a source distribution.
    SourceOnly,
    /// Wake panels with prescribed doublet strength.
    Wake,
}

/// Per-panel geometric data derived from the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelGeometry {
    pub frame: PanelFrame,
    /// Evaluation point of the interior Dirichlet condition.
    pub collocation: Point3<f64>,
}

impl PanelGeometry {
    pub fn centroid(&self) -> Point3<f64> {
        self.frame.origin
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.frame.normal
    }

    pub fn area(&self) -> f64 {
        self.frame.area
    }
}

/// Offset of the collocation point below the panel, in panel diagonals.
pub const COLLOCATION_OFFSET: f64 = 1e-9;

/// Trailing-edge segment shared by an upper and a lower panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrailingEdge {
    pub upper: usize,
    pub lower: usize,
    /// Trailing-edge nodes, ordered like the adjacent upper panel's edge.
    pub nodes: [usize; 2],
}

/// Coordinates recorded at loft time for the steering deformation.
#[derive(Debug, Clone, PartialEq)]
pub struct LoftCoords {
    /// Dimensionless chordwise coordinate per node, 0 at the leading edge.
    pub chordwise: Vec<f64>,
    /// Unit spanwise direction per node (local arc tangent).
    pub spanwise: Vec<Vector3<f64>>,
    /// Nodes per airfoil section.
    pub section_len: usize,
    pub n_sections: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub nodes: Vec<Point3<f64>>,
    pub panels: Vec<[usize; 4]>,
    pub kind: MeshKind,
    pub geometry: Vec<PanelGeometry>,
    pub trailing_edges: Vec<TrailingEdge>,
    pub loft: Option<LoftCoords>,
}

impl SurfaceMesh {
    pub fn new(
        nodes: Vec<Point3<f64>>,
        panels: Vec<[usize; 4]>,
        kind: MeshKind,
    ) -> Result<Self, GeometryError> {
        let geometry = derive_geometry(&nodes, &panels)?;
        Ok(SurfaceMesh {
            nodes,
            panels,
            kind,
            geometry,
            trailing_edges: Vec::new(),
            loft: None,
        })
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(PanelGeometry::area).sum()
    }

    /// Sum of area-weighted outward normals; vanishes for a closed surface.
    pub fn area_vector(&self) -> Vector3<f64> {
        self.geometry.iter().map(|g| g.normal() * g.area()).sum()
    }

    fn rebuild(&mut self) -> Result<(), GeometryError> {
        self.geometry = derive_geometry(&self.nodes, &self.panels)?;
        Ok(())
    }
}

fn derive_geometry(
    nodes: &[Point3<f64>],
    panels: &[[usize; 4]],
) -> Result<Vec<PanelGeometry>, GeometryError> {
    panels
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let frame = panel_frame(&p.map(|k| nodes[k]))
                .map_err(|source| GeometryError::Panel { panel: i, source })?;
            let collocation = frame.origin - frame.normal * (COLLOCATION_OFFSET * frame.diagonal);
            Ok(PanelGeometry { frame, collocation })
        })
        .collect()
}

/// Spanwise stations with cosine clustering toward both ends, exactly
/// antisymmetric about the middle: `-half … half`.
fn cosine_span(half: f64, n: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (0..=n)
        .map(|j| -half * (PI * j as f64 / n as f64).cos())
        .collect();
    for j in 0..=n / 2 {
        s[n - j] = -s[j];
    }
    if n.is_multiple_of(2) {
        s[n / 2] = 0.0;
    }
    s
}

/// Shared structured loft: `sections[j][i]` is airfoil point `i` of section
/// `j` (the closing point omitted). Panel `(i, j)` joins points `i, i+1` of
/// sections `j, j+1`; panel index is `j * section_len + i`.
fn structured_loft(
    sections: Vec<Vec<Point3<f64>>>,
    chordwise: Vec<f64>,
    tangents: Vec<Vector3<f64>>,
) -> Result<SurfaceMesh, GeometryError> {
    let n = sections[0].len();
    let n_sections = sections.len();
    let nodes: Vec<Point3<f64>> = sections.into_iter().flatten().collect();
    let mut panels = Vec::with_capacity(n * (n_sections - 1));
    for j in 0..n_sections - 1 {
        for i in 0..n {
            let i1 = (i + 1) % n;
            panels.push([j * n + i, j * n + i1, (j + 1) * n + i1, (j + 1) * n + i]);
        }
    }
    let mut mesh = SurfaceMesh::new(nodes, panels, MeshKind::WakeEmitting)?;
    mesh.trailing_edges = (0..n_sections - 1)
        .map(|j| TrailingEdge {
            upper: j * n + n - 1,
            lower: j * n,
            nodes: [j * n, (j + 1) * n],
        })
        .collect();
    mesh.loft = Some(LoftCoords {
        chordwise: (0..n_sections)
            .flat_map(|_| chordwise.iter().copied())
            .collect(),
        spanwise: (0..n_sections)
            .flat_map(|j| std::iter::repeat_n(tangents[j], n))
            .collect(),
        section_len: n,
        n_sections,
    });
    Ok(mesh)
}

/// Chordwise coordinate (0 at the leading edge, 1 at the trailing edge) of each
/// contour point, closing point excluded.
fn section_chordwise(airfoil: &Airfoil) -> Vec<f64> {
    airfoil.points[..airfoil.n_panels()]
        .iter()
        .map(|p| p[0].clamp(0.0, 1.0))
        .collect()
}

/// Rectangular wing of the given span and chord, centred on the origin with the
/// leading edge on the `y` axis.
pub fn loft_rect_wing(
    airfoil: &Airfoil,
    span: f64,
    chord: f64,
    n_span: usize,
) -> Result<SurfaceMesh, GeometryError> {
    if !(span > 0.0) || !(chord > 0.0) {
        return Err(GeometryError::Degenerate("span and chord must be positive"));
    }
    if n_span < 2 {
        return Err(GeometryError::Degenerate(
            "at least two spanwise panels are required",
        ));
    }
    let ys = cosine_span(0.5 * span, n_span);
    let sections = ys
        .iter()
        .map(|&y| {
            airfoil.points[..airfoil.n_panels()]
                .iter()
                .map(|p| Point3::new(chord * p[0], y, chord * p[1]))
                .collect()
        })
        .collect();
    structured_loft(
        sections,
        section_chordwise(airfoil),
        vec![Vector3::y(); n_span + 1],
    )
}

/// Flat cap panels closing both ends of a structured loft.
///
/// Lower point `k` is paired with upper point `n - k`; the first and last
/// strips degenerate to triangles at the trailing and leading edges.
pub fn tip_caps(loft: &SurfaceMesh) -> Result<SurfaceMesh, GeometryError> {
    let coords = loft
        .loft
        .as_ref()
        .ok_or(GeometryError::MissingLoftCoordinates)?;
    let n = coords.section_len;
    let m = n / 2;
    let mut nodes = Vec::with_capacity(2 * n);
    let mut panels = Vec::with_capacity(2 * m);
    let mut chordwise = Vec::with_capacity(2 * n);
    let mut spanwise = Vec::with_capacity(2 * n);
    for (side, section) in [(0usize, 0usize), (1, coords.n_sections - 1)] {
        let base = side * n;
        for i in 0..n {
            nodes.push(loft.nodes[section * n + i]);
            chordwise.push(coords.chordwise[section * n + i]);
            spanwise.push(coords.spanwise[section * n + i]);
        }
        for k in 0..m {
            let quad = [
                base + k,
                base + k + 1,
                base + (n - k - 1) % n,
                base + (n - k) % n,
            ];
            panels.push(if side == 1 {
                quad
            } else {
                [quad[3], quad[2], quad[1], quad[0]]
            });
        }
    }
    let mut caps = SurfaceMesh::new(nodes, panels, MeshKind::NonLifting)?;
    caps.loft = Some(LoftCoords {
        chordwise,
        spanwise,
        section_len: n,
        n_sections: 2,
    });
    Ok(caps)
}

/// How tip sections are positioned chordwise relative to the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TipAlignment {
    TrailingEdge,
    LeadingEdge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KiteGeometry {
    pub aspect_ratio: f64,
    pub projected_aspect_ratio: f64,
    pub root_chord: f64,
    pub tip_chord_ratio: f64,
    pub airfoil_panels: usize,
    pub spanwise_panels: usize,
    pub tip_alignment: TipAlignment,
    /// Tether attachment point, measured aft of the root leading edge (m).
    pub attachment_from_le: f64,
}

impl Default for KiteGeometry {
    fn default() -> Self {
        KiteGeometry {
            aspect_ratio: 6.0,
            projected_aspect_ratio: 4.5,
            root_chord: 3.0,
            tip_chord_ratio: 0.25,
            airfoil_panels: 18,
            spanwise_panels: 18,
            tip_alignment: TipAlignment::TrailingEdge,
            attachment_from_le: 0.75,
        }
    }
}

impl KiteGeometry {
    fn validate(&self) -> Result<(), GeometryError> {
        if self.airfoil_panels < 2 || self.spanwise_panels < 2 {
            return Err(GeometryError::Degenerate("panel counts must be at least 2"));
        }
        if !(self.tip_chord_ratio > 0.0 && self.tip_chord_ratio <= 1.0) {
            return Err(GeometryError::Degenerate(
                "tip/chord ratio must lie in (0, 1]",
            ));
        }
        if !(self.projected_aspect_ratio > 0.0 && self.projected_aspect_ratio < self.aspect_ratio) {
            return Err(GeometryError::Degenerate(
                "projected aspect ratio must be below the aspect ratio",
            ));
        }
        if !(self.root_chord > 0.0) {
            return Err(GeometryError::Degenerate("root chord must be positive"));
        }
        Ok(())
    }
}

/// Solved circular arc of a kite loft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KiteArc {
    pub half_angle: f64,
    pub radius: f64,
    /// Arc length from tip to tip (m).
    pub arc_span: f64,
}

/// Section layout along the arc for a given half-angle and arc span:
/// (arc angle, chord) per station.
fn kite_stations(geom: &KiteGeometry, arc_span: f64, half_angle: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * arc_span;
    let tip = geom.root_chord * geom.tip_chord_ratio;
    cosine_span(half, geom.spanwise_panels)
        .into_iter()
        .map(|s| {
            let frac = s.abs() / half;
            (
                half_angle * s / half,
                geom.root_chord + (tip - geom.root_chord) * frac,
            )
        })
        .collect()
}

/// Planform measures of the discrete loft: (arc span, area, projected span,
/// projected area). Strips are trapezoids between consecutive chord lines.
fn kite_planform(stations: &[(f64, f64)], radius: f64) -> (f64, f64, f64, f64) {
    let (mut span, mut area, mut proj_area) = (0.0, 0.0, 0.0);
    for w in stations.windows(2) {
        let ((a0, c0), (a1, c1)) = (w[0], w[1]);
        let dy = radius * (a1.sin() - a0.sin());
        let dz = radius * (a1.cos() - a0.cos());
        let len = (dy * dy + dz * dz).sqrt();
        span += len;
        area += 0.5 * (c0 + c1) * len;
        proj_area += 0.5 * (c0 + c1) * dy.abs();
    }
    let (first, last) = (stations[0].0, stations[stations.len() - 1].0);
    let proj_span = radius * (last.sin() - first.sin());
    (span, area, proj_span, proj_area)
}

/// Solve the arc half-angle (bisection) and span so that the discrete loft has
/// the requested aspect ratio (polygonal arc span²/area) and projected aspect
/// ratio (projected span²/projected area).
pub fn kite_arc(geom: &KiteGeometry) -> Result<KiteArc, GeometryError> {
    geom.validate()?;
    // At fixed half-angle both the span and the area scale linearly with the
    // arc length, so the aspect ratio fixes the arc length directly.
    let measure = |half_angle: f64| {
        let unit = kite_stations(geom, 1.0, half_angle);
        let (span, area, _, _) = kite_planform(&unit, 0.5 / half_angle);
        let arc_span = geom.aspect_ratio * area / (span * span);
        let radius = 0.5 * arc_span / half_angle;
        let stations = kite_stations(geom, arc_span, half_angle);
        let (_, _, pspan, parea) = kite_planform(&stations, radius);
        (pspan * pspan / parea, arc_span, radius)
    };
    let target = geom.projected_aspect_ratio;
    let (mut lo, mut hi) = (1e-4, 0.5 * PI);
    if !((measure(lo).0 - target) * (measure(hi).0 - target) < 0.0) {
        return Err(GeometryError::NoArcSolution {
            aspect: geom.aspect_ratio,
            projected: target,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (measure(mid).0 - target) * (measure(lo).0 - target) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let half_angle = 0.5 * (lo + hi);
    let (_, arc_span, radius) = measure(half_angle);
    Ok(KiteArc {
        half_angle,
        radius,
        arc_span,
    })
}

/// C-shaped kite: Clark-Y sections on a circular arc in the body `y-z` plane,
/// apex at `z = 0`, tips bending toward `-z`. The body origin is the tether
/// attachment point on the root chord line.
pub fn loft_kite(geom: &KiteGeometry) -> Result<SurfaceMesh, GeometryError> {
    let arc = kite_arc(geom)?;
    let airfoil = clark_y_airfoil(geom.airfoil_panels)?;
    let stations = kite_stations(geom, arc.arc_span, arc.half_angle);
    let n = airfoil.n_panels();
    let mut sections = Vec::with_capacity(stations.len());
    let mut tangents = Vec::with_capacity(stations.len());
    for &(angle, chord) in &stations {
        let x_le = -geom.attachment_from_le
            + match geom.tip_alignment {
                TipAlignment::TrailingEdge => geom.root_chord - chord,
                TipAlignment::LeadingEdge => 0.0,
            };
        let radial = Vector3::new(0.0, angle.sin(), angle.cos());
        let on_arc = Point3::new(
            0.0,
            arc.radius * angle.sin(),
            arc.radius * (angle.cos() - 1.0),
        );
        sections.push(
            airfoil.points[..n]
                .iter()
                .map(|p| on_arc + Vector3::x() * (x_le + chord * p[0]) + radial * (chord * p[1]))
                .collect(),
        );
        tangents.push(Vector3::new(0.0, angle.cos(), -angle.sin()));
    }
    structured_loft(sections, section_chordwise(&airfoil), tangents)
}

/// Spanwise shear `Δ = u · x_b` along each node's recorded spanwise direction.
pub fn apply_steering(mesh: &SurfaceMesh, u: f64) -> Result<SurfaceMesh, GeometryError> {
    let loft = mesh
        .loft
        .as_ref()
        .ok_or(GeometryError::MissingLoftCoordinates)?;
    let mut out = mesh.clone();
    if u == 0.0 {
        return Ok(out);
    }
    for (k, node) in out.nodes.iter_mut().enumerate() {
        *node += loft.spanwise[k] * (u * loft.chordwise[k]);
    }
    out.rebuild()?;
    Ok(out)
}

fn check_rotation(rotation: &Matrix3<f64>) -> Result<(), GeometryError> {
    let dev = (rotation.transpose() * rotation - Matrix3::identity())
        .abs()
        .max();
    if dev > 1e-10 || (rotation.determinant() - 1.0).abs() > 1e-10 {
        return Err(GeometryError::NotOrthonormal(dev));
    }
    Ok(())
}

/// Rigid transform `x ↦ R x + t` of nodes, frames and loft directions.
pub fn transform(
    mesh: &SurfaceMesh,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
) -> Result<SurfaceMesh, GeometryError> {
    check_rotation(rotation)?;
    Ok(transform_unchecked(mesh, rotation, translation))
}

fn transform_unchecked(
    mesh: &SurfaceMesh,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
) -> SurfaceMesh {
    let map = |p: &Point3<f64>| Point3::from(rotation * p.coords + translation);
    let mut out = mesh.clone();
    for node in &mut out.nodes {
        *node = map(node);
    }
    for g in &mut out.geometry {
        g.frame.origin = map(&g.frame.origin);
        g.frame.tangent1 = rotation * g.frame.tangent1;
        g.frame.tangent2 = rotation * g.frame.tangent2;
        g.frame.normal = rotation * g.frame.normal;
        g.collocation = map(&g.collocation);
    }
    if let Some(loft) = &mut out.loft {
        for t in &mut loft.spanwise {
            *t = rotation * *t;
        }
    }
    out
}

/// Flat rectangular plate in the `x-y` plane with `+z` normals, uniform spacing.
pub fn flat_plate(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    kind: MeshKind,
) -> Result<SurfaceMesh, GeometryError> {
    if nx == 0 || ny == 0 || !(lx > 0.0) || !(ly > 0.0) {
        return Err(GeometryError::Degenerate(
            "plate dimensions must be positive",
        ));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(Point3::new(
                lx * i as f64 / nx as f64,
                ly * j as f64 / ny as f64,
                0.0,
            ));
        }
    }
    let mut panels = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = j * (nx + 1) + i;
            panels.push([a, a + 1, a + nx + 2, a + nx + 1]);
        }
    }
    SurfaceMesh::new(nodes, panels, kind)
}

/// Several meshes handled as one body with a global panel index.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshCollection {
    pub meshes: Vec<SurfaceMesh>,
    offsets: Vec<usize>,
}

impl MeshCollection {
    pub fn new(meshes: Vec<SurfaceMesh>) -> Result<Self, GeometryError> {
        if meshes.is_empty() {
            return Err(GeometryError::EmptyCollection);
        }
        let mut offsets = Vec::with_capacity(meshes.len());
        let mut total = 0;
        for m in &meshes {
            offsets.push(total);
            total += m.len();
        }
        Ok(MeshCollection { meshes, offsets })
    }

    pub fn len(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0) + self.meshes.last().map_or(0, SurfaceMesh::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset(&self, mesh: usize) -> usize {
        self.offsets[mesh]
    }

    /// Global index of panel `local` of member `mesh`.
    pub fn global_index(&self, mesh: usize, local: usize) -> usize {
        self.offsets[mesh] + local
    }

    /// Member and local index of a global panel index.
    pub fn locate(&self, global: usize) -> (usize, usize) {
        let mesh = self.offsets.partition_point(|&o| o <= global) - 1;
        (mesh, global - self.offsets[mesh])
    }

    pub fn panel(&self, global: usize) -> &PanelGeometry {
        let (m, l) = self.locate(global);
        &self.meshes[m].geometry[l]
    }

    pub fn panels(&self) -> impl Iterator<Item = &PanelGeometry> {
        self.meshes.iter().flat_map(|m| m.geometry.iter())
    }

    pub fn kinds(&self) -> impl Iterator<Item = MeshKind> + '_ {
        self.meshes
            .iter()
            .flat_map(|m| std::iter::repeat_n(m.kind, m.len()))
    }

    /// Trailing edges with panel indices mapped to the global numbering.
    pub fn trailing_edges(&self) -> Vec<(usize, TrailingEdge)> {
        let mut out = Vec::new();
        for (mi, m) in self.meshes.iter().enumerate() {
            if m.kind != MeshKind::WakeEmitting {
                continue;
            }
            for te in &m.trailing_edges {
                out.push((
                    mi,
                    TrailingEdge {
                        upper: te.upper + self.offsets[mi],
                        lower: te.lower + self.offsets[mi],
                        nodes: te.nodes,
                    },
                ));
            }
        }
        out
    }

    pub fn total_area(&self) -> f64 {
        self.meshes.iter().map(SurfaceMesh::total_area).sum()
    }

    pub fn area_vector(&self) -> Vector3<f64> {
        self.meshes.iter().map(SurfaceMesh::area_vector).sum()
    }

    pub fn transform(
        &self,
        rotation: &Matrix3<f64>,
        translation: &Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        check_rotation(rotation)?;
        Ok(MeshCollection {
            meshes: self
                .meshes
                .iter()
                .map(|m| transform_unchecked(m, rotation, translation))
                .collect(),
            offsets: self.offsets.clone(),
        })
    }

    pub fn apply_steering(&self, u: f64) -> Result<Self, GeometryError> {
        Ok(MeshCollection {
            meshes: self
                .meshes
                .iter()
                .map(|m| apply_steering(m, u))
                .collect::<Result<_, _>>()?,
            offsets: self.offsets.clone(),
        })
    }
}

/// A lofted lifting surface closed with tip caps.
pub fn closed_body(loft: SurfaceMesh) -> Result<MeshCollection, GeometryError> {
    let caps = tip_caps(&loft)?;
    MeshCollection::new(vec![loft, caps])
}

/// Mirror-symmetry defect of a node set about the plane `y = 0`: the largest
/// distance from a node's mirror image to the nearest node.
pub fn mirror_defect(nodes: &[Point3<f64>]) -> f64 {
    nodes
        .iter()
        .map(|p| {
            let m = Point3::new(p.x, -p.y, p.z);
            nodes
                .iter()
                .map(|q| (q - m).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
