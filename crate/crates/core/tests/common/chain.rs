//! Tether oracles shared by the mechanics and acceptance suites.

use nalgebra::{DMatrix, DVector, Point3, Vector3};
use panelflow::dynamics::*;

pub fn rhs<'a>(
    p: &'a TetherParams,
    k: &'a KiteBodyParams,
    l: &'a MechLoads,
) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), DynamicsError> + 'a {
    move |_, y, dy| tether_rhs(y, p, k, l, dy)
}

/// Run in chunks of `dt`, returning the state after each chunk.
pub fn march(
    p: &TetherParams,
    loads: &MechLoads,
    s0: &MechState,
    dt: f64,
    chunks: usize,
) -> Vec<MechState> {
    let kite = KiteBodyParams::default();
    let opts = IntegratorOptions::default();
    let mut y = s0.to_vec();
    let mut guess = None;
    let mut out = Vec::with_capacity(chunks);
    for c in 0..chunks {
        let r = integrate(rhs(p, &kite, loads), &y, c as f64 * dt, dt, guess, &opts).unwrap();
        y = r.y;
        guess = Some(r.next_step);
        out.push(MechState::from_slice(&y, p.segments).unwrap());
    }
    out
}

/// Static chain by Newton iteration on the total potential
/// `Σ ½k(|d|−L)² − Σ m g·x`, with exact gradient and Hessian.
pub fn newton_chain(p: &TetherParams, start: &[Point3<f64>]) -> Vec<Point3<f64>> {
    let n = start.len();
    let mut x = DVector::from_iterator(3 * n, start.iter().flat_map(|q| q.coords.iter().copied()));
    let g = Vector3::from(p.gravity);
    let anchor = Vector3::from(p.anchor);
    let node = |x: &DVector<f64>, i: usize| Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
    for _ in 0..100 {
        let mut grad = DVector::zeros(3 * n);
        let mut hess = DMatrix::zeros(3 * n, 3 * n);
        for i in 0..n {
            let m = if i + 1 == n {
                p.node_mass + p.top_mass
            } else {
                p.node_mass
            };
            for c in 0..3 {
                grad[3 * i + c] -= m * g[c];
            }
            let a = if i == 0 { anchor } else { node(&x, i - 1) };
            let d = node(&x, i) - a;
            let len = d.norm();
            let u = d / len;
            let gs = u * (p.stiffness * (len - p.rest_length));
            let hs = u * u.transpose() * p.stiffness
                + (nalgebra::Matrix3::identity() - u * u.transpose())
                    * (p.stiffness * (1.0 - p.rest_length / len));
            for r in 0..3 {
                grad[3 * i + r] += gs[r];
                for c in 0..3 {
                    hess[(3 * i + r, 3 * i + c)] += hs[(r, c)];
                    if i > 0 {
                        let j = i - 1;
                        hess[(3 * j + r, 3 * j + c)] += hs[(r, c)];
                        hess[(3 * i + r, 3 * j + c)] -= hs[(r, c)];
                        hess[(3 * j + r, 3 * i + c)] -= hs[(r, c)];
                    }
                }
                if i > 0 {
                    grad[3 * (i - 1) + r] -= gs[r];
                }
            }
        }
        let step = hess.lu().solve(&grad).unwrap();
        x -= &step;
        if step.amax() < 1e-14 {
            break;
        }
    }
    (0..n).map(|i| Point3::from(node(&x, i))).collect()
}

pub fn perturbed(p: &TetherParams) -> MechState {
    let mut s = MechState::straight(p, &Vector3::new(0.3, 0.1, 1.0), 0.01);
    for (i, v) in s.velocities.iter_mut().enumerate() {
        let f = i as f64 + 1.0;
        *v = Vector3::new(0.5 * f.sin(), 0.3 * f.cos(), 0.2 * (-1f64).powi(i as i32));
    }
    s.psi_rate = 0.2;
    s
}
