//! Trailing-edge wake: Kutta shedding, convection and the row cap.
//!
//! Each row holds one quadrilateral per trailing-edge pair with node order
//! `(upstream_j, downstream_j, downstream_j+1, upstream_j+1)`, so its normal
//! agrees with the upper trailing-edge panel. The newest row is the last one
//! and is the only row whose strength is still an unknown of the next solve.

use nalgebra::{Matrix3, Point3, Vector3};
use thiserror::Error;

use crate::geometry::MeshCollection;
use crate::kernels::{self, panel_frame, KernelError, PanelFrame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WakeError {
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("wake row {row} panel {panel}: {source}")]
    Panel {
        row: usize,
        panel: usize,
        source: KernelError,
    },
    #[error("expected {expected} trailing-edge values, got {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("core radius must be positive, got {0}")]
    CoreRadius(f64),
}

/// Default number of rows kept before lumping.
pub const DEFAULT_MAX_ROWS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct WakeRow {
    pub panels: Vec<[Point3<f64>; 4]>,
    pub frames: Vec<PanelFrame>,
    pub strengths: Vec<f64>,
    /// Emission time (s).
    pub emitted: f64,
}

impl WakeRow {
    fn new(
        panels: Vec<[Point3<f64>; 4]>,
        strengths: Vec<f64>,
        emitted: f64,
        row: usize,
    ) -> Result<Self, WakeError> {
        let frames = frames_of(&panels, row)?;
        Ok(WakeRow {
            panels,
            frames,
            strengths,
            emitted,
        })
    }

    fn refresh(&mut self, row: usize) -> Result<(), WakeError> {
        self.frames = frames_of(&self.panels, row)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }
}

fn frames_of(panels: &[[Point3<f64>; 4]], row: usize) -> Result<Vec<PanelFrame>, WakeError> {
    panels
        .iter()
        .enumerate()
        .map(|(panel, nodes)| {
            panel_frame(nodes).map_err(|source| WakeError::Panel { row, panel, source })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WakeSheet {
    /// Oldest first.
    pub rows: Vec<WakeRow>,
    pub core_radius: f64,
    pub max_rows: usize,
    width: usize,
}

impl WakeSheet {
    pub fn new(width: usize, core_radius: f64, max_rows: usize) -> Result<Self, WakeError> {
        if !(core_radius > 0.0) {
            return Err(WakeError::CoreRadius(core_radius));
        }
        Ok(WakeSheet {
            rows: Vec::new(),
            core_radius,
            max_rows: max_rows.max(1),
            width,
        })
    }

    /// Empty sheet for `body` with the default core radius (10% of the mean
    /// trailing-edge segment length) and the given row cap.
    pub fn for_body(body: &MeshCollection, max_rows: usize) -> Result<Self, WakeError> {
        let te = trailing_edge_segments(body);
        let mean = te.iter().map(|[a, b]| (b - a).norm()).sum::<f64>() / te.len().max(1) as f64;
        let radius = if mean > 0.0 { 0.1 * mean } else { 1e-3 };
        WakeSheet::new(te.len(), radius, max_rows)
    }

    /// Number of trailing-edge pairs, i.e. panels per row.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_panels(&self) -> usize {
        self.rows.len() * self.width
    }

    pub fn newest(&self) -> Option<&WakeRow> {
        self.rows.last()
    }

    /// All panels with their strengths, oldest row first.
    pub fn panels(&self) -> impl Iterator<Item = (&PanelFrame, f64)> {
        self.rows
            .iter()
            .flat_map(|r| r.frames.iter().zip(r.strengths.iter().copied()))
    }

    /// Overwrite the strengths of the newest row (the folded unknowns).
    pub fn set_newest_strengths(&mut self, strengths: &[f64]) -> Result<(), WakeError> {
        self.check_width(strengths.len())?;
        if let Some(row) = self.rows.last_mut() {
            row.strengths.copy_from_slice(strengths);
        }
        Ok(())
    }

    fn check_width(&self, found: usize) -> Result<(), WakeError> {
        if found != self.width {
            return Err(WakeError::WidthMismatch {
                expected: self.width,
                found,
            });
        }
        Ok(())
    }

    /// Append a row between the trailing-edge segments `te` and the upstream
    /// nodes of the current newest row. The first row reaches `|v|·dt` down
    /// the direction of `freestream`. Rows beyond the cap are lumped.
    pub fn push_row(
        &mut self,
        te: &[[Point3<f64>; 2]],
        strengths: &[f64],
        freestream: &Vector3<f64>,
        dt: f64,
        time: f64,
    ) -> Result<(), WakeError> {
        if !(dt > 0.0) {
            return Err(WakeError::NonPositiveStep(dt));
        }
        self.check_width(te.len())?;
        self.check_width(strengths.len())?;
        let panels: Vec<[Point3<f64>; 4]> = match self.rows.last() {
            Some(prev) => te
                .iter()
                .zip(&prev.panels)
                .map(|([a, b], q)| [*a, q[0], q[3], *b])
                .collect(),
            None => {
                let step = *freestream * dt;
                te.iter()
                    .map(|[a, b]| [*a, a + step, b + step, *b])
                    .collect()
            }
        };
        let row = WakeRow::new(panels, strengths.to_vec(), time, self.rows.len())?;
        self.rows.push(row);
        self.enforce_cap();
        Ok(())
    }

    /// Move the upstream nodes of the newest row onto the trailing edge,
    /// stretching it instead of shedding a new row.
    pub fn reattach_newest(&mut self, te: &[[Point3<f64>; 2]]) -> Result<(), WakeError> {
        self.check_width(te.len())?;
        let idx = self.rows.len().saturating_sub(1);
        if let Some(row) = self.rows.last_mut() {
            for (p, [a, b]) in row.panels.iter_mut().zip(te) {
                p[0] = *a;
                p[3] = *b;
            }
            row.refresh(idx)?;
        }
        Ok(())
    }

    /// Rigidly moved copy, `x ↦ R x + t`; strengths and emission times kept.
    pub fn transformed(
        &self,
        rotation: &Matrix3<f64>,
        translation: &Vector3<f64>,
    ) -> Result<Self, WakeError> {
        let mut out = self.clone();
        for (k, row) in out.rows.iter_mut().enumerate() {
            for p in row.panels.iter_mut().flatten() {
                *p = Point3::from(rotation * p.coords + translation);
            }
            row.refresh(k)?;
        }
        Ok(out)
    }

    /// Drop the oldest rows beyond the cap. The dropped strength is merged
    /// into the new terminal row as an area-weighted mean, which leaves a
    /// uniform sheet unchanged.
    fn enforce_cap(&mut self) {
        while self.rows.len() > self.max_rows {
            let dropped = self.rows.remove(0);
            if let Some(term) = self.rows.first_mut() {
                for j in 0..term.strengths.len() {
                    let (at, ad) = (term.frames[j].area, dropped.frames[j].area);
                    term.strengths[j] =
                        (term.strengths[j] * at + dropped.strengths[j] * ad) / (at + ad);
                }
            }
        }
    }

    /// Translate every node by `freestream·dt`, or, when `induced` is set,
    /// by the locally evaluated total velocity from the freestream, the body
    /// and the wake itself (desingularized vortex rings).
    pub fn convect(
        &mut self,
        freestream: &Vector3<f64>,
        dt: f64,
        induced: Option<(&MeshCollection, &[f64], &[f64])>,
    ) -> Result<(), WakeError> {
        if dt == 0.0 || self.rows.is_empty() {
            return Ok(());
        }
        if dt < 0.0 {
            return Err(WakeError::NonPositiveStep(dt));
        }
        match induced {
            None => {
                let shift = *freestream * dt;
                for row in &mut self.rows {
                    for p in row.panels.iter_mut().flatten() {
                        *p += shift;
                    }
                    for f in &mut row.frames {
                        f.origin += shift;
                    }
                }
            }
            Some((body, mu, sigma)) => {
                let moved: Vec<Vec<[Point3<f64>; 4]>> = self
                    .rows
                    .iter()
                    .map(|row| {
                        row.panels
                            .iter()
                            .map(|quad| {
                                quad.map(|p| {
                                    p + (freestream + self.induced_velocity(body, mu, sigma, &p))
                                        * dt
                                })
                            })
                            .collect()
                    })
                    .collect();
                for (k, (row, panels)) in self.rows.iter_mut().zip(moved).enumerate() {
                    row.panels = panels;
                    row.refresh(k)?;
                }
            }
        }
        Ok(())
    }

    /// Perturbation velocity at a field point: body panels with exact source
    /// terms and softened doublet rings, wake panels with softened rings.
    pub fn induced_velocity(
        &self,
        body: &MeshCollection,
        mu: &[f64],
        sigma: &[f64],
        p: &Point3<f64>,
    ) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        for (k, g) in body.panels().enumerate() {
            let local = g.frame.to_local(p);
            let (_, d) = g.frame.nearest_edge(&local);
            let vd = kernels::desingularized_velocity(&g.frame, p, self.core_radius);
            let vs = if d > 1e-9 * g.frame.diagonal {
                kernels::source_doublet_velocities(&g.frame, p).0
            } else {
                Vector3::zeros()
            };
            v -= vd * mu[k] + vs * sigma[k];
        }
        for (frame, m) in self.panels() {
            v -= kernels::desingularized_velocity(frame, p, self.core_radius) * m;
        }
        v
    }

    /// Order-independent checksum of all rows except the newest.
    pub fn frozen_checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let n = self.rows.len().saturating_sub(1);
        for row in &self.rows[..n] {
            for s in &row.strengths {
                h ^= s.to_bits();
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Shed strength at a trailing-edge pair.
pub fn kutta_strength(mu_upper: f64, mu_lower: f64) -> f64 {
    mu_upper - mu_lower
}

/// Kutta strengths of every trailing-edge pair of `body`.
pub fn kutta_strengths(body: &MeshCollection, mu: &[f64]) -> Vec<f64> {
    body.trailing_edges()
        .iter()
        .map(|(_, te)| kutta_strength(mu[te.upper], mu[te.lower]))
        .collect()
}

/// Current trailing-edge node segments of `body`, one per pair.
pub fn trailing_edge_segments(body: &MeshCollection) -> Vec<[Point3<f64>; 2]> {
    body.trailing_edges()
        .iter()
        .map(|(m, te)| {
            let nodes = &body.meshes[*m].nodes;
            [nodes[te.nodes[0]], nodes[te.nodes[1]]]
        })
        .collect()
}

/// Append a new row at the trailing edge of `body` carrying the Kutta
/// strengths of `mu`.
pub fn shed_row(
    body: &MeshCollection,
    mu: &[f64],
    wake: &mut WakeSheet,
    freestream: &Vector3<f64>,
    dt: f64,
    time: f64,
) -> Result<(), WakeError> {
    let te = trailing_edge_segments(body);
    wake.push_row(&te, &kutta_strengths(body, mu), freestream, dt, time)
}

/// Convect `wake` over `dt`; see [`WakeSheet::convect`].
pub fn convect_wake(
    wake: &mut WakeSheet,
    freestream: &Vector3<f64>,
    dt: f64,
    induced: Option<(&MeshCollection, &[f64], &[f64])>,
) -> Result<(), WakeError> {
    wake.convect(freestream, dt, induced)
}
