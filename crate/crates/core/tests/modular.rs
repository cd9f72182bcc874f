mod common;

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector, Vector3};

use pkmdyn::dynamics::limb_tree_eom;
use pkmdyn::limb_kin::{acceleration_ik, platform_pose, velocity_ik};
use pkmdyn::modular::{instance_gravity_vector, instantiate_limb, rotational_mounts};
use pkmdyn::pkm::Mount;
use pkmdyn::se3::Pose;

fn dm(m: nalgebra::Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(6, 6, |i, j| m[(i, j)])
}

#[test]
fn mounts_rotate_about_vertical() {
    let m = rotational_mounts(3);
    assert_eq!(m[0], Mount::default());
    let a = 2.0 * std::f64::consts::PI / 3.0;
    assert_abs_diff_eq!((m[1].base.rot - Pose::rotation_about(&Vector3::z(), a).rot).amax(), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!((m[2].base.rot - Pose::rotation_about(&Vector3::z(), -a).rot).amax(), 0.0, epsilon = 1e-15);
}

#[test]
fn identity_mount_reproduces_limb() {
    let pkm = common::delta();
    let rep = &pkm.limbs[0];
    let inst = instantiate_limb(rep, Mount::default()).unwrap();
    for t in common::delta_configs(5, 9) {
        let a = velocity_ik(rep, &pkm.task, &t).unwrap();
        let b = velocity_ik(&inst, &pkm.task, &t).unwrap();
        assert_eq!(a.lp, b.lp);
        assert_eq!(a.h, b.h);
        assert_eq!(a.f, b.f);
    }
}

#[test]
fn instances_match_machine_limbs() {
    let pkm = common::delta();
    let mounts = rotational_mounts(3);
    for (l, m) in mounts.iter().enumerate() {
        let inst = instantiate_limb(&pkm.limbs[0], *m).unwrap();
        for (a, b) in inst.tree.screws.iter().zip(&pkm.limbs[l].tree.screws) {
            assert_abs_diff_eq!((a.coords - b.coords).amax(), 0.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn platform_jacobian_transforms_with_mount() {
    let pkm = common::delta();
    let rep = &pkm.limbs[0];
    for m in rotational_mounts(3) {
        let inst = instantiate_limb(rep, m).unwrap();
        for t in common::delta_configs(20, 12) {
            let c_rep = platform_pose(rep, &t);
            let c_inst = platform_pose(&inst, &t);
            let expect = m.base * c_rep * m.platform.inverse();
            assert_abs_diff_eq!((c_inst.homogeneous() - expect.homogeneous()).amax(), 0.0, epsilon = 1e-12);
            let lp_rep = velocity_ik(rep, &pkm.task, &t).unwrap().lp;
            let lp_inst = velocity_ik(&inst, &pkm.task, &t).unwrap().lp;
            let mapped = dm(m.platform.adjoint()) * &lp_rep;
            assert_abs_diff_eq!((&lp_inst - mapped).amax(), 0.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn gravity_in_construction_frame() {
    let pkm = common::delta();
    let rep = &pkm.limbs[0];
    let g = Vector3::new(0.3, -1.1, -9.81);
    let vt = DVector::from_vec(vec![0.2, -0.1, 0.4]);
    let zero = DVector::zeros(3);
    for m in rotational_mounts(3) {
        let inst = instantiate_limb(rep, m).unwrap();
        for t in common::delta_configs(10, 21) {
            let mi = acceleration_ik(&inst, &pkm.task, velocity_ik(&inst, &pkm.task, &t).unwrap(), &vt, &zero).unwrap();
            let mr = acceleration_ik(rep, &pkm.task, velocity_ik(rep, &pkm.task, &t).unwrap(), &vt, &zero).unwrap();
            let a = limb_tree_eom(&inst, &mi, &g);
            let b = limb_tree_eom(rep, &mr, &instance_gravity_vector(&m.base, &g));
            assert_abs_diff_eq!((&a.q_grav - &b.q_grav).amax(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((&a.m - &b.m).amax(), 0.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn gravity_vector_examples() {
    let g = Vector3::new(0.0, 0.0, -9.81);
    for m in rotational_mounts(3) {
        assert_abs_diff_eq!((instance_gravity_vector(&m.base, &g) - g).amax(), 0.0, epsilon = 1e-15);
    }
    let tilt = Pose::rotation_about(&Vector3::x(), std::f64::consts::FRAC_PI_2);
    let gy = instance_gravity_vector(&tilt, &g);
    assert_abs_diff_eq!((gy - Vector3::new(0.0, -9.81, 0.0)).amax(), 0.0, epsilon = 1e-14);
}
