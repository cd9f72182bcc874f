use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

use pkmdyn::se3::{
    ad, body_to_spatial, exp_twist, gyroscopic_matrix, log_pose, so3_dexp, so3_exp, so3_log,
    spatial_to_body, twist, Mat6, Pose, ScrewAxis, ScrewFrame, ScrewKind, SpatialInertia, Vec6,
};

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-r..r).prop_map(Vector3::from)
}

fn vec6(r: f64) -> impl Strategy<Value = Vec6> {
    (vec3(r), vec3(r)).prop_map(|(a, b)| twist(&a, &b))
}

/// Twists with rotation angle below π − 0.05.
fn small_twist() -> impl Strategy<Value = Vec6> {
    (vec3(1.0), vec3(2.0), 0.0..(std::f64::consts::PI - 0.05)).prop_map(|(w, v, t)| {
        let w = if w.norm() < 1e-9 { Vector3::x() } else { w.normalize() };
        twist(&(w * t), &v)
    })
}

fn pose() -> impl Strategy<Value = Pose> {
    vec6(2.0).prop_map(|x| exp_twist(&x))
}

fn close(a: &Mat6, b: &Mat6, tol: f64) -> bool {
    (a - b).amax() <= tol * (1.0 + a.amax())
}

proptest! {
    #[test]
    fn log_inverts_exp(x in small_twist()) {
        let y = log_pose(&exp_twist(&x));
        prop_assert!((y - x).amax() < 1e-9, "{} vs {}", y, x);
    }

    #[test]
    fn exp_inverts_log(c in pose()) {
        let d = exp_twist(&log_pose(&c));
        prop_assert!((d.homogeneous() - c.homogeneous()).amax() < 1e-9);
    }

    #[test]
    fn exp_is_a_one_parameter_subgroup(x in vec6(1.5), s in -1.0..1.0f64, t in -1.0..1.0f64) {
        let a = exp_twist(&(x * s)) * exp_twist(&(x * t));
        let b = exp_twist(&(x * (s + t)));
        prop_assert!((a.homogeneous() - b.homogeneous()).amax() < 1e-12);
    }

    #[test]
    fn rotations_are_orthonormal(p in vec3(4.0)) {
        let r = so3_exp(&p);
        prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-13);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-13);
        if p.norm() < std::f64::consts::PI - 1e-3 {
            prop_assert!((so3_log(&r) - p).amax() < 1e-9);
        }
    }

    #[test]
    fn dexp_gives_body_angular_velocity(p in vec3(1.5), d in vec3(1.0)) {
        let h = 1e-6;
        let rp = so3_exp(&(p + d * h));
        let rm = so3_exp(&(p - d * h));
        let fd = so3_log(&(rm.transpose() * rp)) / (2.0 * h);
        let w = so3_dexp(&(-p)) * d;
        prop_assert!((fd - w).amax() < 1e-7 * (1.0 + w.amax()));
    }

    #[test]
    fn adjoint_is_a_homomorphism(a in pose(), b in pose()) {
        prop_assert!(close(&(a * b).adjoint(), &(a.adjoint() * b.adjoint()), 1e-12));
        prop_assert!(close(&a.adjoint_inv(), &a.inverse().adjoint(), 1e-12));
        prop_assert!(close(&(a.adjoint() * a.adjoint_inv()), &Mat6::identity(), 1e-12));
    }

    #[test]
    fn bracket_is_antisymmetric(x in vec6(3.0), y in vec6(3.0)) {
        prop_assert!((ad(&x) * y + ad(&y) * x).amax() < 1e-12);
        prop_assert!((ad(&x) * x).amax() < 1e-12);
    }

    #[test]
    fn bracket_satisfies_jacobi(x in vec6(2.0), y in vec6(2.0), z in vec6(2.0)) {
        let j = ad(&x) * (ad(&y) * z) + ad(&y) * (ad(&z) * x) + ad(&z) * (ad(&x) * y);
        prop_assert!(j.amax() < 1e-11);
    }

    #[test]
    fn adjoint_conjugates_bracket(c in pose(), x in vec6(3.0)) {
        let lhs = c.adjoint() * ad(&x) * c.adjoint_inv();
        let rhs = ad(&(c.adjoint() * x));
        prop_assert!(close(&lhs, &rhs, 1e-11));
    }

    #[test]
    fn gyroscopic_is_negative_transposed_bracket(v in vec6(3.0)) {
        prop_assert_eq!(gyroscopic_matrix(&v), -ad(&v).transpose());
    }

    #[test]
    fn power_is_frame_invariant(c in pose(), v in vec6(3.0), w in vec6(3.0)) {
        let v2 = c.adjoint() * v;
        let w2 = c.adjoint_inv().transpose() * w;
        prop_assert!((w2.dot(&v2) - w.dot(&v)).abs() < 1e-10 * (1.0 + w.norm() * v.norm()));
    }

    #[test]
    fn body_spatial_round_trip(a in pose(), x in vec6(2.0)) {
        let s = ScrewAxis { coords: x, frame: ScrewFrame::Spatial, kind: ScrewKind::Revolute };
        let b = spatial_to_body(&s, &a);
        prop_assert_eq!(b.frame, ScrewFrame::Body);
        let back = body_to_spatial(&b, &a);
        prop_assert!((back.coords - x).amax() < 1e-12 * (1.0 + x.amax()));
    }

    #[test]
    fn screw_exponential_conjugates(a in pose(), x in vec6(1.0), t in -2.0..2.0f64) {
        // exp(Ad_A X θ) = A exp(X θ) A⁻¹
        let lhs = exp_twist(&(a.adjoint() * x * t));
        let rhs = a * exp_twist(&(x * t)) * a.inverse();
        prop_assert!((lhs.homogeneous() - rhs.homogeneous()).amax() < 1e-10);
    }

    #[test]
    fn spatial_inertia_is_positive(m in 0.1..10.0f64, com in vec3(0.5), d in prop::array::uniform3(0.01..1.0f64)) {
        let i = SpatialInertia::from_com(m, com, Matrix3::from_diagonal(&Vector3::from(d)));
        let mm = i.matrix();
        prop_assert!((mm - mm.transpose()).amax() < 1e-14);
        prop_assert!(mm.symmetric_eigen().eigenvalues.min() > 0.0);
    }
}

#[test]
fn small_angles_are_accurate() {
    let axis = Vector3::new(0.3, -0.5, 0.8).normalize();
    for t in [0.0, 1e-9, 1e-8, 1e-7, 1e-6, 1e-3, 0.99e-2, 1e-2, 1.01e-2, 0.1] {
        let p = axis * t;
        let oracle = Rotation3::new(p);
        assert!((so3_exp(&p) - oracle.matrix()).amax() < 1e-15, "t = {t}");
        let x = twist(&p, &Vector3::new(1.0, 2.0, 3.0));
        let e = (log_pose(&exp_twist(&x)) - x).amax();
        assert!(e < 1e-14, "t = {t}: {e}");
    }
}
