mod common;

use nalgebra::{Point3, Vector3};
use panelflow::kernels::{desingularized_kernel, doublet_influence, panel_frame, source_influence};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{
    doublet_velocity_from_logs, integrate_panel, kernel_integrands, random_panel, random_point,
};

#[test]
fn closed_forms_match_adaptive_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let frame = random_panel(&mut rng);
        let p = random_point(&mut rng, &frame);
        let (q, qa) = integrate_panel(&frame, None, kernel_integrands(&frame, p), 1e-13);
        let s = source_influence(&frame, &p).unwrap();
        let d = doublet_influence(&frame, &p).unwrap();

        let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(1e-300);
        assert!(
            rel(s.potential, q[0], q[0].abs()) < 1e-8,
            "source φ {} vs {}",
            s.potential,
            q[0]
        );
        // Signed integrands are compared against the integral of |f|, which
        // bounds the cancellation the quadrature itself is exposed to.
        assert!(
            rel(d.potential, q[4], q[4].abs().max(qa[4] * 1e-2)) < 1e-8,
            "doublet φ {} vs {}",
            d.potential,
            q[4]
        );
        let vs_scale = Vector3::new(q[1], q[2], q[3]).norm();
        let vd_scale = Vector3::new(q[5], q[6], q[7]).norm();
        assert!((s.velocity - Vector3::new(q[1], q[2], q[3])).norm() < 1e-6 * vs_scale);
        assert!((d.velocity - Vector3::new(q[5], q[6], q[7])).norm() < 1e-6 * vd_scale);
    }
}

#[test]
fn doublet_interior_limit_and_jump() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let frame = random_panel(&mut rng);
    let diag = frame.diagonal;
    // Quadrature limit sequence from the interior side, extrapolated linearly.
    let at = |h: f64| {
        let p = frame.origin + frame.normal * h;
        let (q, _) = integrate_panel(
            &frame,
            Some(frame.origin),
            kernel_integrands(&frame, p),
            1e-12,
        );
        q
    };
    let (h1, h2) = (-1e-3 * diag, -2e-3 * diag);
    let (q1, q2) = (at(h1), at(h2));
    let limit = 2.0 * q1[4] - q2[4];
    assert!((limit + 0.5).abs() < 1e-6, "quadrature limit {limit}");

    let below = doublet_influence(&frame, &(frame.origin - frame.normal * (1e-9 * diag))).unwrap();
    let above = doublet_influence(&frame, &(frame.origin + frame.normal * (1e-9 * diag))).unwrap();
    assert!((below.potential - limit).abs() < 1e-6);
    assert!((above.potential - 0.5).abs() < 1e-6);
    assert!((above.potential - below.potential - 1.0).abs() < 1e-6);
}

#[test]
fn source_self_normal_velocity_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let frame = random_panel(&mut rng);
    let diag = frame.diagonal;
    let at = |h: f64| {
        let p = frame.origin + frame.normal * h;
        let (q, _) = integrate_panel(
            &frame,
            Some(frame.origin),
            kernel_integrands(&frame, p),
            1e-12,
        );
        Vector3::new(q[1], q[2], q[3]).dot(&frame.normal)
    };
    let limit = 2.0 * at(1e-3 * diag) - at(2e-3 * diag);
    assert!((limit - 0.5).abs() < 1e-6, "quadrature limit {limit}");
    let s = source_influence(&frame, &(frame.origin + frame.normal * (1e-9 * diag))).unwrap();
    assert!((s.velocity.dot(&frame.normal) - limit).abs() < 1e-6);
}

#[test]
fn far_field_limits() {
    let nodes = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    let frame = panel_frame(&nodes).unwrap();
    let d = 100.0 * frame.diagonal;
    let axis = frame.origin + Vector3::new(0.0, 0.0, d);
    let s = source_influence(&frame, &axis).unwrap();
    let point_source = -1.0 / (4.0 * std::f64::consts::PI * d);
    assert!(((s.potential - point_source) / point_source).abs() < 0.01);

    // Oblique direction for the dipole limit.
    let dir = Vector3::new(0.6, 0.0, 0.8);
    let p = frame.origin + dir * d;
    let dbl = doublet_influence(&frame, &p).unwrap();
    let dipole = frame.area * 0.8 / (4.0 * std::f64::consts::PI * d * d);
    assert!(((dbl.potential - dipole) / dipole).abs() < 0.01);
    let (q, _) = integrate_panel(&frame, None, kernel_integrands(&frame, p), 1e-13);
    assert!(((dbl.potential - q[4]) / q[4]).abs() < 1e-8);
}

#[test]
fn velocity_is_gradient_of_potential() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let frame = random_panel(&mut rng);
        let p = random_point(&mut rng, &frame);
        if frame.to_local(&p).z.abs() < 0.05 * frame.diagonal {
            continue;
        }
        let h = 1e-5 * frame.diagonal;
        let mut fd_s = Vector3::zeros();
        let mut fd_d = Vector3::zeros();
        for axis in 0..3 {
            let mut e = Vector3::zeros();
            e[axis] = h;
            let sp = source_influence(&frame, &(p + e)).unwrap().potential;
            let sm = source_influence(&frame, &(p - e)).unwrap().potential;
            let dp = doublet_influence(&frame, &(p + e)).unwrap().potential;
            let dm = doublet_influence(&frame, &(p - e)).unwrap().potential;
            fd_s[axis] = (sp - sm) / (2.0 * h);
            fd_d[axis] = (dp - dm) / (2.0 * h);
        }
        let s = source_influence(&frame, &p).unwrap().velocity;
        let d = doublet_influence(&frame, &p).unwrap().velocity;
        assert!((s - fd_s).norm() < 1e-4 * s.norm(), "{s} vs {fd_s}");
        assert!((d - fd_d).norm() < 1e-4 * d.norm(), "{d} vs {fd_d}");
    }
}

#[test]
fn vortex_ring_matches_logarithmic_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..100 {
        let frame = random_panel(&mut rng);
        let p = random_point(&mut rng, &frame);
        let ring = doublet_influence(&frame, &p).unwrap().velocity;
        let logs = doublet_velocity_from_logs(&frame, &p);
        assert!(
            (ring - logs).norm() <= 1e-10 * ring.norm(),
            "{ring} vs {logs}"
        );
    }
}

#[test]
fn desingularized_kernel_limits() {
    let nodes = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    let frame = panel_frame(&nodes).unwrap();
    let delta = 1e-3;
    // A point near the middle of edge 0, well away from the other edges.
    let at = |d: f64| Point3::new(0.5, -d, 0.0);

    let on_edge = desingularized_kernel(&frame, &at(0.0), delta);
    assert_eq!(on_edge.velocity.norm(), 0.0);

    for (d, factor) in [(delta, 0.5), (10.0 * delta, 100.0 / 101.0)] {
        let p = at(d);
        let exact = doublet_influence(&frame, &p).unwrap();
        let soft = desingularized_kernel(&frame, &p, delta);
        assert_eq!(soft.potential, exact.potential);
        assert!((soft.velocity - exact.velocity * factor).norm() < 1e-12 * exact.velocity.norm());
    }
    let p = at(100.0 * delta);
    let exact = doublet_influence(&frame, &p).unwrap().velocity;
    let soft = desingularized_kernel(&frame, &p, delta).velocity;
    assert!((soft - exact).norm() < 1e-4 * exact.norm());

    // Monotone in distance along a line away from the edge.
    let mut last = 0.0;
    for i in 0..20 {
        let d = delta * 0.1 * (i as f64 + 1.0);
        let soft = desingularized_kernel(&frame, &at(d), delta).velocity.norm();
        let exact = doublet_influence(&frame, &at(d)).unwrap().velocity.norm();
        let ratio = soft / exact;
        assert!(ratio >= last);
        last = ratio;
    }
}
