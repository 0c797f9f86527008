//! Test-only oracles, independent of the closed-form kernels.
#![allow(dead_code)]

pub mod chain;
pub mod toys;

use nalgebra::{Point3, Rotation3, Vector3};
use panelflow::kernels::{panel_frame, PanelFrame};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// 8-point Gauss–Legendre nodes and weights on [0, 1].
fn gauss8() -> ([f64; 8], [f64; 8]) {
    let x = [
        -0.960_289_856_497_536_2,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ];
    let w = [
        0.101_228_536_290_376_3,
        0.222_381_034_453_374_5,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let mut xs = [0.0; 8];
    let mut ws = [0.0; 8];
    for i in 0..8 {
        xs[i] = 0.5 * (x[i] + 1.0);
        ws[i] = 0.5 * w[i];
    }
    (xs, ws)
}

/// Integrate `f` over triangle `abc` with a collapsed (Duffy) tensor rule
/// whose singular corner is `a`. Returns (∫f, ∫|f|) componentwise.
fn triangle_rule<const N: usize>(
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
    f: &impl Fn(&Point3<f64>) -> [f64; N],
) -> ([f64; N], [f64; N]) {
    let (xs, ws) = gauss8();
    let twice_area = (b - a).cross(&(c - a)).norm();
    let mut sum = [0.0; N];
    let mut abs = [0.0; N];
    for i in 0..8 {
        for j in 0..8 {
            let u = xs[i];
            let v = xs[j];
            let q = a + (b - a) * u + (c - b) * (u * v);
            let w = ws[i] * ws[j] * u * twice_area;
            let val = f(&q);
            for k in 0..N {
                sum[k] += w * val[k];
                abs[k] += w * val[k].abs();
            }
        }
    }
    (sum, abs)
}

fn adaptive<const N: usize>(
    a: Point3<f64>,
    b: Point3<f64>,
    c: Point3<f64>,
    f: &impl Fn(&Point3<f64>) -> [f64; N],
    tol: f64,
    depth: usize,
) -> ([f64; N], [f64; N]) {
    let (whole, _) = triangle_rule(&a, &b, &c, f);
    let ab = Point3::from((a.coords + b.coords) * 0.5);
    let bc = Point3::from((b.coords + c.coords) * 0.5);
    let ca = Point3::from((c.coords + a.coords) * 0.5);
    let kids = [(a, ab, ca), (ab, b, bc), (ca, bc, c), (bc, ca, ab)];
    let mut split = [0.0; N];
    let mut split_abs = [0.0; N];
    for (p, q, r) in kids {
        let (s, sa) = triangle_rule(&p, &q, &r, f);
        for k in 0..N {
            split[k] += s[k];
            split_abs[k] += sa[k];
        }
    }
    let err = (0..N)
        .map(|k| (split[k] - whole[k]).abs())
        .fold(0.0, f64::max);
    let scale = (0..N).map(|k| split_abs[k]).fold(0.0, f64::max);
    if err <= tol * scale || depth == 0 {
        return (split, split_abs);
    }
    let mut sum = [0.0; N];
    let mut abs = [0.0; N];
    for (p, q, r) in kids {
        let (s, sa) = adaptive(p, q, r, f, tol, depth - 1);
        for k in 0..N {
            sum[k] += s[k];
            abs[k] += sa[k];
        }
    }
    (sum, abs)
}

/// Adaptive quadrature of `f` over a planarised panel. When `apex` is given
/// (a point on the panel plane inside the panel), the panel is fanned from it
/// so near-singular integrands are resolved from the apex outward.
pub fn integrate_panel<const N: usize>(
    frame: &PanelFrame,
    apex: Option<Point3<f64>>,
    f: impl Fn(&Point3<f64>) -> [f64; N],
    tol: f64,
) -> ([f64; N], [f64; N]) {
    let corners: Vec<Point3<f64>> = (0..frame.n_corners)
        .map(|k| frame.corner_global(k))
        .collect();
    let mut sum = [0.0; N];
    let mut abs = [0.0; N];
    let mut add = |(s, sa): ([f64; N], [f64; N])| {
        for k in 0..N {
            sum[k] += s[k];
            abs[k] += sa[k];
        }
    };
    match apex {
        Some(p) => {
            for k in 0..corners.len() {
                let b = corners[k];
                let c = corners[(k + 1) % corners.len()];
                add(adaptive(p, b, c, &f, tol, 18));
            }
        }
        None => {
            for k in 1..corners.len() - 1 {
                add(adaptive(
                    corners[0],
                    corners[k],
                    corners[k + 1],
                    &f,
                    tol,
                    12,
                ));
            }
        }
    }
    (sum, abs)
}

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Oracle integrands for a unit source / doublet at `p`:
/// [source φ, source v (3), doublet φ, doublet v (3)].
pub fn kernel_integrands(
    frame: &PanelFrame,
    p: Point3<f64>,
) -> impl Fn(&Point3<f64>) -> [f64; 8] + '_ {
    let n = frame.normal;
    move |q: &Point3<f64>| {
        let d: Vector3<f64> = p - q;
        let r = d.norm();
        let r3 = r * r * r;
        let r5 = r3 * r * r;
        let dn = d.dot(&n);
        let src_v = d / r3;
        let dbl_v = n / r3 - d * (3.0 * dn / r5);
        [
            -1.0 / (FOUR_PI * r),
            src_v.x / FOUR_PI,
            src_v.y / FOUR_PI,
            src_v.z / FOUR_PI,
            dn / (FOUR_PI * r3),
            dbl_v.x / FOUR_PI,
            dbl_v.y / FOUR_PI,
            dbl_v.z / FOUR_PI,
        ]
    }
}

/// Closed-form doublet velocity from the source-logarithm route: the doublet
/// potential is the normal derivative of the source potential, so its
/// gradient follows from differentiating the edge logarithms and using
/// harmonicity for the normal component. Independent of the vortex-ring form.
pub fn doublet_velocity_from_logs(frame: &PanelFrame, p: &Point3<f64>) -> Vector3<f64> {
    let l = frame.to_local(p);
    let (mut vx, mut vy, mut vz) = (0.0, 0.0, 0.0);
    for k in 0..frame.n_corners {
        let [ax, ay] = frame.corner_local(k);
        let [bx, by] = frame.corner_local(k + 1);
        let (ex, ey) = (bx - ax, by - ay);
        let d = (ex * ex + ey * ey).sqrt();
        if d == 0.0 {
            continue;
        }
        let ra = ((l.x - ax).powi(2) + (l.y - ay).powi(2) + l.z * l.z).sqrt();
        let rb = ((l.x - bx).powi(2) + (l.y - by).powi(2) + l.z * l.z).sqrt();
        let s = ra + rb;
        let dlds = -2.0 * d / (s * s - d * d);
        let (nux, nuy) = (ey / d, -ex / d);
        let dsdz = l.z / ra + l.z / rb;
        let dsdx = (l.x - ax) / ra + (l.x - bx) / rb;
        let dsdy = (l.y - ay) / ra + (l.y - by) / rb;
        vx += nux * dlds * dsdz;
        vy += nuy * dlds * dsdz;
        vz -= nux * dlds * dsdx + nuy * dlds * dsdy;
    }
    frame.to_global_vector(&(Vector3::new(vx, vy, vz) / FOUR_PI))
}

/// Random convex-ish quadrilateral, arbitrarily oriented, with mild warp.
pub fn random_panel(rng: &mut ChaCha8Rng) -> PanelFrame {
    let base: f64 = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
    let mut nodes = [Point3::origin(); 4];
    for (k, node) in nodes.iter_mut().enumerate() {
        let ang = base + k as f64 * std::f64::consts::FRAC_PI_2 + rng.random_range(-0.4..0.4);
        let rad = rng.random_range(0.5..1.5);
        *node = Point3::new(
            rad * ang.cos(),
            rad * ang.sin(),
            rng.random_range(-0.02..0.02),
        );
    }
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let rot = Rotation3::new(axis.normalize() * rng.random_range(0.0..3.0));
    let shift = Vector3::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
    );
    let moved = nodes.map(|p| rot * p + shift);
    panel_frame(&moved).unwrap()
}

pub fn random_point(rng: &mut ChaCha8Rng, frame: &PanelFrame) -> Point3<f64> {
    loop {
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if dir.norm() < 0.1 || dir.norm() > 1.0 {
            continue;
        }
        let dist = frame.diagonal * rng.random_range(0.1..4.0);
        // Anchor somewhere over the panel so near points sit above it.
        let anchor = frame.origin
            + frame.tangent1 * rng.random_range(-0.3..0.3)
            + frame.tangent2 * rng.random_range(-0.3..0.3);
        let p = anchor + dir.normalize() * dist;
        let local = frame.to_local(&p);
        let (_, edge) = frame.nearest_edge(&local);
        if edge > 0.1 * frame.diagonal {
            return p;
        }
    }
}
