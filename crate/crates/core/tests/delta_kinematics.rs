mod common;

use approx::assert_abs_diff_eq;
use nalgebra::DVector;

use common::{cp_closed, delta, delta_configs, delta_cut_body, f_closed};
use pkmdyn::dynamics::reference_guess;
use pkmdyn::limb_kin::{inverse_kinematics, limb_h, loop_residual, machine_ik, platform_pose, velocity_ik};
use pkmdyn::models::delta::{build_delta, DeltaParams};
use pkmdyn::models::SolverSpec;
use pkmdyn::se3::{log_pose, spatial_to_body};
use pkmdyn::trajectory::Trajectory;

#[test]
fn body_fixed_screws() {
    let pkm = delta();
    let limb = &pkm.limbs[0];
    let x: Vec<_> = limb.tree.screws.iter().zip(&limb.tree.reference).map(|(y, a)| spatial_to_body(y, a).coords).collect();
    let expect = [
        [0.0, -1.0, 0.0, 0.0, 0.0, -1.0 / 8.0],
        [0.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, 0.5, 0.0],
        [1.0, 0.0, 0.0, 0.0, 0.0, 1.0 / 25.0],
        [1.0, 0.0, 0.0, 0.0, 0.5, 0.0],
        [0.0, -1.0, 0.0, 0.0, 0.0, 7.0 / 100.0],
    ];
    for (k, e) in expect.iter().enumerate() {
        for i in 0..6 {
            assert_abs_diff_eq!(x[k][i], e[i], epsilon = 1e-14);
        }
    }
}

#[test]
fn spatial_screws() {
    let pkm = delta();
    let y: Vec<_> = pkm.limbs[0].tree.screws.iter().map(|s| s.coords).collect();
    let (r0, rp, a, b, c) = (0.15, 0.07, 0.25, 0.08, 1.0);
    let d: f64 = a + r0 - rp;
    let h = (c * c - d * d).sqrt();
    let expect = [
        [0.0, -1.0, 0.0, 0.0, 0.0, r0],
        [0.0, -1.0, 0.0, 0.0, 0.0, a + r0],
        [h / c, 0.0, d / c, -b * d / 2.0 / c, d * (a + r0) / c, b * h / 2.0 / c],
        [h / c, 0.0, d / c, -b * d / 2.0 / c, (-h * h + rp * d) / c, b * h / 2.0 / c],
        [h / c, 0.0, d / c, b * d / 2.0 / c, d * (a + r0) / c, -b * h / 2.0 / c],
        [0.0, -1.0, 0.0, -h, 0.0, rp],
    ];
    for (k, e) in expect.iter().enumerate() {
        for i in 0..6 {
            assert_abs_diff_eq!(y[k][i], e[i], epsilon = 1e-14);
        }
    }
}

#[test]
fn reference_platform_pose() {
    let p = DeltaParams::default();
    let h = p.h().unwrap() / 1000.0;
    assert_abs_diff_eq!(h, (1.0f64 - 0.33 * 0.33).sqrt(), epsilon = 1e-15);
    assert_abs_diff_eq!(h, 0.943981, epsilon = 1e-6);
    let pkm = delta();
    for limb in &pkm.limbs {
        let c = platform_pose(limb, &DVector::zeros(6));
        assert_abs_diff_eq!((c.rot - nalgebra::Matrix3::identity()).amax(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((c.pos - nalgebra::Vector3::new(0.0, 0.0, -h)).amax(), 0.0, epsilon = 1e-14);
    }
}

#[test]
fn loop_solution_both_pipelines() {
    let cj = delta();
    let cb = delta_cut_body();
    for t in delta_configs(100, 11) {
        let (_, loops, h) = limb_h(&cj.limbs[0], &t).unwrap();
        let hb = &loops[0].solution.h;
        assert_eq!(hb.shape(), (3, 1));
        for (v, e) in hb.iter().zip([-1.0, -1.0, 1.0]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-9);
        }
        assert_eq!(h.shape(), (6, 4));
        let (_, loops, hcb) = limb_h(&cb.limbs[0], &t).unwrap();
        let hb = &loops[0].solution.h;
        assert_eq!(hb.shape(), (4, 1));
        for (v, e) in hb.iter().zip([-1.0, -1.0, -1.0, 1.0]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-9);
        }
        assert_abs_diff_eq!((&h - &hcb).amax(), 0.0, epsilon = 1e-9);
        assert!(loop_residual(&cj.limbs[0], &t).unwrap() < 1e-14);
    }
}

#[test]
fn constraint_rows() {
    let pkm = delta();
    let t = &delta_configs(1, 3)[0];
    let (_, loops, _) = limb_h(&pkm.limbs[0], t).unwrap();
    assert_eq!(loops[0].g.nrows(), 5);
    let sv = loops[0].g.clone().svd(false, false).singular_values;
    assert_eq!(sv.iter().filter(|s| **s > 1e-9 * sv.max()).count(), 2);
}

#[test]
fn platform_pose_closed_form() {
    let pkm = delta();
    for t in delta_configs(100, 5) {
        let c = platform_pose(&pkm.limbs[0], &t).homogeneous();
        assert_abs_diff_eq!((c - cp_closed(&t)).amax(), 0.0, epsilon = 1e-12);
    }
}

#[test]
fn velocity_ik_closed_form() {
    let pkm = delta();
    assert_eq!(pkm.limbs[0].q_joints, vec![3, 0, 1, 5]);
    for t in delta_configs(100, 6) {
        let v = velocity_ik(&pkm.limbs[0], &pkm.task, &t).unwrap();
        let f = f_closed(&t);
        assert_abs_diff_eq!((&v.f - &f).amax(), 0.0, epsilon = 1e-9);
    }
    let f0 = f_closed(&DVector::zeros(6));
    assert_abs_diff_eq!(f0[(1, 0)], 4.0 * 33.0 / common::xi(), epsilon = 1e-15);
    assert_abs_diff_eq!(f0[(1, 2)], -4.0, epsilon = 1e-15);
}

#[test]
fn square_and_pseudoinverse_agree() {
    let mut file = build_delta(&DeltaParams::default()).unwrap();
    let sq = file.compile().unwrap();
    file.taskspace.solver = SolverSpec::Pseudoinverse;
    let ps = file.compile().unwrap();
    let x = sq.reference_x() + DVector::from_vec(vec![0.12, -0.2, 0.05]);
    let (a, _) = machine_ik(&sq, &x, &reference_guess(&sq)).unwrap();
    let (b, _) = machine_ik(&ps, &x, &reference_guess(&ps)).unwrap();
    for l in 0..3 {
        assert_abs_diff_eq!((&a[l] - &b[l]).amax(), 0.0, epsilon = 1e-9);
        let fa = velocity_ik(&sq.limbs[l], &sq.task, &a[l]).unwrap().f;
        let fb = velocity_ik(&ps.limbs[l], &ps.task, &b[l]).unwrap().f;
        assert_abs_diff_eq!((fa - fb).amax(), 0.0, epsilon = 1e-8);
    }
}

#[test]
fn ik_along_sinusoid() {
    let pkm = delta();
    let points = Trajectory::parse("sin", &pkm.reference_x(), None, None).unwrap().points();
    assert_eq!(points.len(), 1001);
    let mut guess = reference_guess(&pkm);
    let mut prev: Option<Vec<DVector<f64>>> = None;
    let mut within = 0;
    for p in &points {
        let target = pkm.task.pose(&p.x);
        if let Some(pr) = &prev {
            guess = pr.clone();
        }
        let mut sol = Vec::new();
        let mut worst = 0;
        for (l, limb) in pkm.limbs.iter().enumerate() {
            let (t, it) = inverse_kinematics(limb, &pkm.task, &target, &guess[l]).unwrap();
            let e = log_pose(&(platform_pose(limb, &t).inverse() * target)).amax();
            assert!(e <= 1e-10, "IK residual {e}");
            worst = worst.max(it);
            sol.push(t);
        }
        within += usize::from(worst <= 2);
        prev = Some(sol);
    }
    assert!(within as f64 >= 0.99 * points.len() as f64, "{within} of {} samples within two iterations", points.len());
}

#[test]
fn unreachable_target_reports_divergence() {
    let pkm = delta();
    let x = DVector::from_vec(vec![0.0, 0.0, -1.5]);
    let err = machine_ik(&pkm, &x, &reference_guess(&pkm)).unwrap_err();
    assert!(matches!(err.exit_code(), 3 | 4), "{err}");
}

#[test]
fn derivatives_match_finite_differences() {
    use pkmdyn::checks::{body_jacobian_error, derivative_errors, random_samples};
    for pkm in [delta(), delta_cut_body()] {
        for s in random_samples(&pkm, &[0.15, 0.15, 0.05], 0.8, 10, 17).unwrap() {
            for l in 0..3 {
                assert!(body_jacobian_error(&pkm.limbs[l], &s.thetas[l]) < 1e-6);
                let e = derivative_errors(&pkm, l, &s).unwrap();
                assert!(e.iter().all(|v| *v < 1e-6), "{e:?}");
            }
        }
    }
}

#[test]
fn mount_symmetry_at_reference() {
    use pkmdyn::checks::mount_symmetry_error;
    let pkm = delta();
    let e = mount_symmetry_error(&pkm, &reference_guess(&pkm)).unwrap().unwrap();
    assert!(e < 1e-10, "{e}");
    let fourbar = pkmdyn::models::fourbar::fourbar_pkm(&Default::default()).unwrap();
    assert!(mount_symmetry_error(&fourbar, &reference_guess(&fourbar)).unwrap().is_none());
}
