//! Interior Dirichlet source-doublet system: source strengths, influence
//! assembly with the Kutta fold of the newest wake row, and the iterative
//! solve.
//!
//! The perturbation potential is `φ = -(Σ μ_j Φd_j + Σ σ_j Φs_j)` summed over
//! body and wake panels, with `Φd`, `Φs` the unit kernels of
//! [`crate::kernels`]. With `σ = n·(v∞ − v_body)` this makes the sources
//! cancel the normal inflow, and `μ` equals minus the exterior perturbation
//! potential on the surface. Row `i` of the system enforces `φ = 0` at the
//! interior collocation point of panel `i`.

use nalgebra::{DMatrix, DVector, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{MeshCollection, MeshKind};
use crate::kernels;
use crate::wake::{WakeRow, WakeSheet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("wake-emitting mesh {0} has no trailing-edge pairs")]
    MissingTrailingEdges(usize),
    #[error(
        "BiCGSTAB did not converge in {iterations} iterations (relative residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("direct solve failed: singular matrix")]
    Singular,
    #[error("probe point lies outside the body (enclosed solid-angle fraction {0})")]
    ProbeOutside(f64),
}

fn check_len(expected: usize, found: usize) -> Result<(), SolverError> {
    if expected != found {
        return Err(SolverError::LengthMismatch { expected, found });
    }
    Ok(())
}

/// Per-panel singularity strengths and the history needed by the unsteady
/// Bernoulli term.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityState {
    pub sigma: Vec<f64>,
    pub mu: Vec<f64>,
    pub mu_prev: Option<Vec<f64>>,
    pub t_prev: Option<f64>,
}

impl SingularityState {
    pub fn zeros(n: usize) -> Self {
        SingularityState {
            sigma: vec![0.0; n],
            mu: vec![0.0; n],
            mu_prev: None,
            t_prev: None,
        }
    }

    /// Record a freshly solved `mu` at time `t`, keeping the previous one.
    pub fn advance(&mut self, mu: Vec<f64>, t: f64) {
        let old = std::mem::replace(&mut self.mu, mu);
        if self.t_prev.is_some() || self.mu_prev.is_some() || old.iter().any(|&m| m != 0.0) {
            self.mu_prev = Some(old);
        }
        self.t_prev = Some(t);
    }
}

/// `σ_i = n_i · (v∞ − v_body,i)`.
pub fn source_strengths(
    body: &MeshCollection,
    freestream: &Vector3<f64>,
    body_velocity: &[Vector3<f64>],
) -> Result<Vec<f64>, SolverError> {
    check_len(body.len(), body_velocity.len())?;
    Ok(body
        .panels()
        .zip(body_velocity)
        .map(|(g, vb)| g.normal().dot(&(freestream - vb)))
        .collect())
}

/// Body-on-body potential coefficients: `a[(i, j)] = Φd_j(x_i)`,
/// `b[(i, j)] = Φs_j(x_i)` at collocation points `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyInfluence {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl BodyInfluence {
    /// Unchanged by rigid motion of the body, so it may be cached while the
    /// shape is fixed.
    pub fn new(body: &MeshCollection) -> Self {
        let n = body.len();
        let colloc: Vec<Point3<f64>> = body.panels().map(|g| g.collocation).collect();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        for (j, g) in body.panels().enumerate() {
            for (i, x) in colloc.iter().enumerate() {
                let (s, d) = kernels::source_doublet_potentials(&g.frame, x);
                a[(i, j)] = d;
                b[(i, j)] = s;
            }
            // Interior limit of the panel's own solid angle, exact.
            a[(j, j)] = -0.5;
        }
        BodyInfluence { a, b }
    }

    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Doublet potential of each panel of a wake row at the body collocation
/// points, `n_body × width`.
pub fn wake_row_influence(body: &MeshCollection, row: &WakeRow) -> DMatrix<f64> {
    let colloc: Vec<Point3<f64>> = body.panels().map(|g| g.collocation).collect();
    let mut w = DMatrix::zeros(colloc.len(), row.len());
    for (j, f) in row.frames.iter().enumerate() {
        for (i, x) in colloc.iter().enumerate() {
            w[(i, j)] = kernels::doublet_potential(f, x);
        }
    }
    w
}

/// Assembled linear system `a · μ = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceSystem {
    pub a: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Trailing-edge pairs as global (upper, lower) indices, validated against
/// the mesh kinds.
pub fn trailing_edge_pairs(body: &MeshCollection) -> Result<Vec<(usize, usize)>, SolverError> {
    for (k, m) in body.meshes.iter().enumerate() {
        if m.kind == MeshKind::WakeEmitting && m.trailing_edges.is_empty() {
            return Err(SolverError::MissingTrailingEdges(k));
        }
    }
    Ok(body
        .trailing_edges()
        .iter()
        .map(|(_, te)| (te.upper, te.lower))
        .collect())
}

/// Build the system from precomputed pieces. `newest` is the influence of
/// the newest wake row (folded through the Kutta relation), `frozen` yields
/// the influence and known strengths of every older row.
pub fn assemble_from<'a>(
    body: &BodyInfluence,
    sigma: &[f64],
    pairs: &[(usize, usize)],
    newest: Option<&DMatrix<f64>>,
    frozen: impl IntoIterator<Item = (&'a DMatrix<f64>, &'a [f64])>,
) -> Result<InfluenceSystem, SolverError> {
    let n = body.len();
    check_len(n, sigma.len())?;
    let mut a = body.a.clone();
    if let Some(w) = newest {
        check_len(pairs.len(), w.ncols())?;
        for (k, &(up, low)) in pairs.iter().enumerate() {
            let col = w.column(k);
            a.column_mut(up).axpy(1.0, &col, 1.0);
            a.column_mut(low).axpy(-1.0, &col, 1.0);
        }
    }
    let mut rhs = -(&body.b * DVector::from_column_slice(sigma));
    for (w, strengths) in frozen {
        check_len(w.ncols(), strengths.len())?;
        rhs.gemv(-1.0, w, &DVector::from_column_slice(strengths), 1.0);
    }
    Ok(InfluenceSystem { a, rhs })
}

/// Full assembly for the current body position and wake. Older rows enter
/// the right-hand side directly, without forming their matrices.
pub fn assemble(
    body: &MeshCollection,
    influence: &BodyInfluence,
    wake: &WakeSheet,
    sigma: &[f64],
) -> Result<InfluenceSystem, SolverError> {
    let pairs = trailing_edge_pairs(body)?;
    if wake.n_rows() > 0 {
        check_len(pairs.len(), wake.width())?;
    }
    let newest = wake.rows.last().map(|r| wake_row_influence(body, r));
    let mut system = assemble_from(
        influence,
        sigma,
        &pairs,
        newest.as_ref(),
        std::iter::empty(),
    )?;
    let older = &wake.rows[..wake.n_rows().saturating_sub(1)];
    for (i, g) in body.panels().enumerate() {
        let mut phi = 0.0;
        for row in older {
            for (f, m) in row.frames.iter().zip(&row.strengths) {
                phi += m * kernels::doublet_potential(f, &g.collocation);
            }
        }
        system.rhs[i] -= phi;
    }
    Ok(system)
}

/// Iterative solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Relative residual target `‖Aμ − b‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Systems smaller than this are solved by dense LU.
    pub direct_below: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 20_000,
            direct_below: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub direct: bool,
}

/// Solve for the doublet strengths. A zero right-hand side returns zeros
/// directly; `guess` seeds the iteration.
pub fn solve_doublets(
    system: &InfluenceSystem,
    opts: &SolveOptions,
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let n = system.rhs.len();
    check_len(n, system.a.nrows())?;
    check_len(n, system.a.ncols())?;
    let bnorm = system.rhs.norm();
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                residual: 0.0,
                direct: false,
            },
        ));
    }
    if n < opts.direct_below {
        let x = system
            .a
            .clone()
            .lu()
            .solve(&system.rhs)
            .ok_or(SolverError::Singular)?;
        let residual = (&system.a * &x - &system.rhs).norm() / bnorm;
        return Ok((
            x.as_slice().to_vec(),
            SolveReport {
                iterations: 0,
                residual,
                direct: true,
            },
        ));
    }
    let x0 = match guess {
        Some(g) => {
            check_len(n, g.len())?;
            DVector::from_column_slice(g)
        }
        None => DVector::zeros(n),
    };
    let (x, iterations, residual) = bicgstab(&system.a, &system.rhs, x0, opts.tol, opts.max_iter)?;
    Ok((
        x.as_slice().to_vec(),
        SolveReport {
            iterations,
            residual,
            direct: false,
        },
    ))
}

/// Unpreconditioned BiCGSTAB. Convergence is judged on the recursively
/// updated residual and confirmed on the true one before returning.
pub fn bicgstab(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    mut x: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize, f64), SolverError> {
    let bnorm = b.norm();
    let target = tol * bnorm;
    let mut r = b - a * &x;
    let mut it = 0;
    // Restart loop: a breakdown or a drift between recursive and true
    // residuals restarts from the current iterate.
    loop {
        let rnorm = r.norm();
        if rnorm <= target {
            return Ok((x, it, rnorm / bnorm));
        }
        if it >= max_iter {
            return Err(SolverError::NonConvergence {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        let r_hat = r.clone();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        let mut v = DVector::zeros(b.len());
        let mut p = DVector::zeros(b.len());
        let mut t = DVector::zeros(b.len());
        while it < max_iter {
            it += 1;
            let rho_new = r_hat.dot(&r);
            if rho_new.abs() < 1e-300 || omega == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            // p = r + β (p − ω v)
            p.axpy(-omega, &v, 1.0);
            p.axpy(1.0, &r, beta);
            v.gemv(1.0, a, &p, 0.0);
            let rv = r_hat.dot(&v);
            if rv.abs() < 1e-300 {
                break;
            }
            alpha = rho / rv;
            // s overwrites r
            r.axpy(-alpha, &v, 1.0);
            x.axpy(alpha, &p, 1.0);
            if r.norm() <= target {
                break;
            }
            t.gemv(1.0, a, &r, 0.0);
            let tt = t.dot(&t);
            if tt == 0.0 {
                break;
            }
            omega = t.dot(&r) / tt;
            x.axpy(omega, &r, 1.0);
            r.axpy(-omega, &t, 1.0);
            if r.norm() <= target {
                break;
            }
        }
        r = b - a * &x;
    }
}

/// Total perturbation potential at `probe` from body and wake singularities.
/// Fails unless the probe is enclosed by the body.
pub fn interior_potential_check(
    body: &MeshCollection,
    state: &SingularityState,
    wake: &WakeSheet,
    probe: &Point3<f64>,
) -> Result<f64, SolverError> {
    check_len(body.len(), state.mu.len())?;
    check_len(body.len(), state.sigma.len())?;
    let mut enclosed = 0.0;
    let mut phi = 0.0;
    for (k, g) in body.panels().enumerate() {
        let (s, d) = kernels::source_doublet_potentials(&g.frame, probe);
        enclosed += d;
        phi -= state.mu[k] * d + state.sigma[k] * s;
    }
    // A closed surface subtends -4π from inside and 0 from outside.
    if enclosed > -0.5 {
        return Err(SolverError::ProbeOutside(-enclosed));
    }
    for (f, m) in wake.panels() {
        phi -= m * kernels::doublet_potential(f, probe);
    }
    Ok(phi)
}

/// Largest residual of the Dirichlet rows `|Σ A μ + Σ B σ + wake|`.
pub fn dirichlet_residual(system: &InfluenceSystem, mu: &[f64]) -> f64 {
    let r = &system.a * DVector::from_column_slice(mu) - &system.rhs;
    r.amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{closed_body, flat_plate, loft_rect_wing, naca4_airfoil, SurfaceMesh};
    use crate::wake::shed_row;

    fn small_wing() -> MeshCollection {
        let foil = naca4_airfoil("0012", 12).unwrap();
        closed_body(loft_rect_wing(&foil, 3.0, 1.0, 6).unwrap()).unwrap()
    }

    #[test]
    fn source_strengths_project_freestream() {
        let plate = MeshCollection::new(vec![
            flat_plate(2, 2, 1.0, 1.0, MeshKind::NonLifting).unwrap()
        ])
        .unwrap();
        let still = vec![Vector3::zeros(); 4];
        let s = source_strengths(&plate, &Vector3::new(30.0, 0.0, 0.0), &still).unwrap();
        assert!(s.iter().all(|&x| x == 0.0));
        let s = source_strengths(&plate, &Vector3::new(0.0, 0.0, 30.0), &still).unwrap();
        assert!(s.iter().all(|&x| (x - 30.0).abs() < 1e-12));
        let moving = vec![Vector3::new(0.0, 0.0, 5.0); 4];
        let s = source_strengths(&plate, &Vector3::new(0.0, 0.0, 30.0), &moving).unwrap();
        assert!(s.iter().all(|&x| (x - 25.0).abs() < 1e-12));
        assert!(source_strengths(&plate, &Vector3::zeros(), &still[..3]).is_err());
    }

    #[test]
    fn diagonal_is_minus_half_and_rows_sum_to_minus_one() {
        let body = small_wing();
        let inf = BodyInfluence::new(&body);
        for i in 0..body.len() {
            assert!((inf.a[(i, i)] + 0.5).abs() < 1e-6);
            let sum: f64 = inf.a.row(i).sum();
            assert!((sum + 1.0).abs() < 1e-6, "row {i} sums to {sum}");
        }
    }

    #[test]
    fn zero_sources_without_wake_give_zero_rhs() {
        let body = small_wing();
        let inf = BodyInfluence::new(&body);
        let wake = WakeSheet::for_body(&body, 10).unwrap();
        let sys = assemble(&body, &inf, &wake, &vec![0.0; body.len()]).unwrap();
        assert_eq!(sys.rhs.amax(), 0.0);
        let (mu, rep) = solve_doublets(&sys, &SolveOptions::default(), None).unwrap();
        assert!(mu.iter().all(|&m| m == 0.0));
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn two_panel_toy_matches_kernel_calls() {
        let p0 = flat_plate(1, 1, 1.0, 1.0, MeshKind::NonLifting).unwrap();
        let nodes: Vec<Point3<f64>> = p0
            .nodes
            .iter()
            .map(|p| Point3::new(p.x, p.y, 1.0 - p.z))
            .collect();
        let p1 = SurfaceMesh::new(nodes, vec![[0, 2, 3, 1]], MeshKind::NonLifting).unwrap();
        let body = MeshCollection::new(vec![p0, p1]).unwrap();
        let inf = BodyInfluence::new(&body);
        for i in 0..2 {
            for j in 0..2 {
                let x = body.panel(i).collocation;
                let f = &body.panel(j).frame;
                let d = kernels::doublet_influence(f, &x).unwrap().potential;
                let s = kernels::source_influence(f, &x).unwrap().potential;
                if i == j {
                    assert_eq!(inf.a[(i, j)], -0.5);
                    assert!((d + 0.5).abs() < 1e-6);
                } else {
                    assert_eq!(inf.a[(i, j)], d);
                }
                assert_eq!(inf.b[(i, j)], s);
            }
        }
        let sigma = [1.0, -2.0];
        let sys = assemble_from(&inf, &sigma, &[], None, std::iter::empty()).unwrap();
        for i in 0..2 {
            let expect = -(inf.b[(i, 0)] * sigma[0] + inf.b[(i, 1)] * sigma[1]);
            assert_eq!(sys.rhs[i], expect);
        }
    }

    #[test]
    fn identity_system() {
        let sys = InfluenceSystem {
            a: DMatrix::identity(3, 3),
            rhs: DVector::from_vec(vec![1.0, 0.0, 0.0]),
        };
        let (mu, _) = solve_doublets(&sys, &SolveOptions::default(), None).unwrap();
        assert_eq!(mu, vec![1.0, 0.0, 0.0]);
        let iterative = SolveOptions {
            direct_below: 0,
            ..Default::default()
        };
        let (mu, _) = solve_doublets(&sys, &iterative, None).unwrap();
        assert_eq!(mu, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn nonconvergence_carries_residual() {
        // A rotation has no real eigenvalues; two iterations cannot solve it.
        let n = 50;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, (i + 1) % n)] = 1.0;
        }
        let sys = InfluenceSystem {
            a,
            rhs: DVector::from_fn(n, |i, _| (i as f64).sin() + 2.0),
        };
        let opts = SolveOptions {
            tol: 1e-12,
            max_iter: 2,
            direct_below: 0,
        };
        match solve_doublets(&sys, &opts, None) {
            Err(SolverError::NonConvergence {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn folded_wake_satisfies_kutta_rows() {
        let body = small_wing();
        let inf = BodyInfluence::new(&body);
        let alpha: f64 = 5f64.to_radians();
        let v = Vector3::new(alpha.cos(), 0.0, alpha.sin()) * 10.0;
        let sigma = source_strengths(&body, &v, &vec![Vector3::zeros(); body.len()]).unwrap();
        let mut wake = WakeSheet::for_body(&body, 10).unwrap();
        shed_row(&body, &vec![0.0; body.len()], &mut wake, &v, 0.1, 0.0).unwrap();
        let sys = assemble(&body, &inf, &wake, &sigma).unwrap();
        let (mu, rep) = solve_doublets(&sys, &SolveOptions::default(), None).unwrap();
        assert!(rep.residual <= 1e-10);
        // Check each row against an explicit sum with the wake at Kutta strength.
        let kutta = crate::wake::kutta_strengths(&body, &mu);
        wake.set_newest_strengths(&kutta).unwrap();
        for i in 0..body.len() {
            let x = body.panel(i).collocation;
            let mut row = 0.0;
            for (j, g) in body.panels().enumerate() {
                let (s, d) = kernels::source_doublet_potentials(&g.frame, &x);
                let d = if i == j { -0.5 } else { d };
                row += d * mu[j] + s * sigma[j];
            }
            for (f, m) in wake.panels() {
                row += m * kernels::doublet_potential(f, &x);
            }
            assert!(row.abs() < 1e-9, "row {i}: {row}");
        }
    }

    #[test]
    fn interior_check_detects_outside_probe() {
        let body = small_wing();
        let wake = WakeSheet::for_body(&body, 10).unwrap();
        let state = SingularityState::zeros(body.len());
        let inside = Point3::new(0.3, 0.0, 0.0);
        assert_eq!(
            interior_potential_check(&body, &state, &wake, &inside).unwrap(),
            0.0
        );
        let outside = Point3::new(0.3, 0.0, 0.5);
        assert!(matches!(
            interior_potential_check(&body, &state, &wake, &outside),
            Err(SolverError::ProbeOutside(_))
        ));
    }
}
