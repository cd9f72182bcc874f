mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::{DVector, Vector3};

use pkmdyn::checks::{power_balance_error, random_samples, rel_err_vec};
use pkmdyn::dynamics::{
    actuator_eom, eval_phi, evaluate_state, forward_acceleration, inverse_dynamics, kinetic_energy,
    potential_energy, power_terms, reference_guess, rk4_step, static_torque, tree_eom, MachineState,
    ParallelSolver, TaskSample, ViscousFriction,
};
use pkmdyn::limb_kin::machine_ik;
use pkmdyn::models::fourbar::{fourbar_pkm, FourbarParams};
use pkmdyn::pkm::Pkm;
use pkmdyn::se3::Wrench;
use pkmdyn::simulation::{initial_state, simulate, TorqueSource};
use pkmdyn::trajectory::{run_inverse_dynamics, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn at_rest(pkm: &Pkm, x: &DVector<f64>) -> MachineState {
    let (thetas, _) = machine_ik(pkm, x, &reference_guess(pkm)).unwrap();
    MachineState { thetas, vt: DVector::zeros(pkm.dof()) }
}

fn energy(pkm: &Pkm, st: &MachineState) -> f64 {
    kinetic_energy(pkm, st).unwrap() + potential_energy(pkm, &st.thetas)
}

#[test]
fn tree_terms_match_newton_euler() {
    let pkm = common::delta();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for limb in &pkm.limbs {
        let n = limb.bar.len();
        for _ in 0..20 {
            let r = |rng: &mut ChaCha8Rng| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let (th, td, tdd) = (r(&mut rng), r(&mut rng), r(&mut rng));
            let cache = limb.bar.kinematics(&th);
            let jd = limb.bar.jacobian_dots(&cache, &td);
            let te = tree_eom(&limb.bar, &limb.inertias, &cache, &td, &pkm.gravity);
            let lhs = &te.m * &tdd + &te.c * &td + &te.q_grav;
            let rhs = eval_phi(&limb.inertias, &cache.jacobians, &jd, &cache.poses, &td, &tdd, &pkm.gravity);
            assert!(rel_err_vec(&lhs, &rhs) < 1e-12);
            // θ̇ᵀ(dM̄/dt − 2C̄)θ̇ = 0
            let mdot = {
                let h = 1e-6;
                let mp = tree_eom(&limb.bar, &limb.inertias, &limb.bar.kinematics(&(&th + &td * h)), &td, &pkm.gravity).m;
                let mm = tree_eom(&limb.bar, &limb.inertias, &limb.bar.kinematics(&(&th - &td * h)), &td, &pkm.gravity).m;
                (mp - mm) / (2.0 * h)
            };
            let p = td.dot(&((&mdot - &te.c * 2.0) * &td));
            assert!(p.abs() < 1e-6 * mdot.amax().max(1.0), "{p}");
        }
    }
}

#[test]
fn mass_matrices_symmetric_positive_definite() {
    for pkm in [common::delta(), fourbar_pkm(&FourbarParams::default()).unwrap()] {
        let amp = if pkm.limbs.len() == 3 { vec![0.15, 0.15, 0.05] } else { vec![0.02, 0.02, 0.1] };
        for s in random_samples(&pkm, &amp, 0.5, 20, 31).unwrap() {
            let ev = evaluate_state(&pkm, &MachineState { thetas: s.thetas, vt: s.vt }).unwrap();
            let m = &ev.terms.m;
            assert!((m - m.transpose()).amax() < 1e-12 * m.amax());
            assert!(m.clone().symmetric_eigen().eigenvalues.min() > 0.0);
            let a = actuator_eom(&ev.terms).unwrap();
            assert!((&a.m - a.m.transpose()).amax() < 1e-10 * a.m.amax());
            assert!(a.m.clone().symmetric_eigen().eigenvalues.min() > 0.0);
        }
    }
}

#[test]
fn static_forces_are_potential_gradient() {
    let pkm = common::delta();
    let x = pkm.reference_x() + DVector::from_vec(vec![0.1, -0.05, 0.08]);
    let g = reference_guess(&pkm);
    let r = static_torque(&pkm, &x, &g).unwrap();
    let f = r.j_ik.transpose() * &r.u;
    let h = 1e-6;
    let grad = DVector::from_fn(3, |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let vp = potential_energy(&pkm, &machine_ik(&pkm, &xp, &g).unwrap().0);
        let vm = potential_energy(&pkm, &machine_ik(&pkm, &xm, &g).unwrap().0);
        (vp - vm) / (2.0 * h)
    });
    assert!(rel_err_vec(&f, &grad) < 1e-7, "{f} vs {grad}");
}

#[test]
fn end_effector_load_balance() {
    let pkm = common::delta().with_gravity(Vector3::zeros());
    let x = pkm.reference_x() + DVector::from_vec(vec![-0.05, 0.1, 0.0]);
    let w_ee = Wrench::new(0.0, 0.0, 0.0, 3.0, -2.0, 5.0);
    let s = TaskSample { x: x.clone(), vt: DVector::zeros(3), vt_dot: DVector::zeros(3), w_ee };
    let r = inverse_dynamics(&pkm, &s, &reference_guess(&pkm)).unwrap();
    let bal = r.j_ik.transpose() * &r.u + pkm.task.pattern.transpose() * DVector::from_column_slice(w_ee.as_slice());
    assert!(bal.amax() < 1e-10);
}

#[test]
fn rest_without_gravity_needs_no_force() {
    let pkm = common::delta().with_gravity(Vector3::zeros());
    let x = pkm.reference_x() + DVector::from_vec(vec![0.05, 0.05, -0.05]);
    let u = static_torque(&pkm, &x, &reference_guess(&pkm)).unwrap().u;
    assert!(u.amax() < 1e-14);
}

#[test]
fn zero_amplitude_gives_constant_forces() {
    let pkm = common::delta();
    let traj = Trajectory::sinusoid(pkm.reference_x(), DVector::zeros(3), 1.0, 0.01, 1.0).unwrap();
    let rows = run_inverse_dynamics(&pkm, &traj.points(), &reference_guess(&pkm), None).unwrap();
    let u0 = static_torque(&pkm, &pkm.reference_x(), &reference_guess(&pkm)).unwrap().u;
    for r in &rows {
        assert!((&r.u - &u0).amax() < 1e-12);
    }
    assert_abs_diff_eq!(u0[0], u0[1], epsilon = 1e-12);
    assert_abs_diff_eq!(u0[0], u0[2], epsilon = 1e-12);
}

#[test]
fn periodic_trajectory_gives_periodic_forces() {
    let pkm = common::delta();
    let traj = Trajectory::parse("sin", &pkm.reference_x(), None, None).unwrap();
    let rows = run_inverse_dynamics(&pkm, &traj.points(), &reference_guess(&pkm), None).unwrap();
    assert_eq!(rows.len(), 1001);
    assert!((&rows[1000].u - &rows[0].u).amax() < 1e-9);
}

#[test]
fn parallel_matches_serial() {
    let pkm = common::delta();
    let samples = random_samples(&pkm, &[0.2, 0.2, 0.1], 1.0, 200, 77).unwrap();
    let guess = reference_guess(&pkm);
    for width in [None, Some(1), Some(2)] {
        let par = ParallelSolver::new(&pkm, width).unwrap();
        for s in &samples {
            let t = TaskSample { x: s.x.clone(), vt: s.vt.clone(), vt_dot: s.vt_dot.clone(), w_ee: Wrench::zeros() };
            let a = inverse_dynamics(&pkm, &t, &guess).unwrap();
            let b = par.inverse_dynamics(&pkm, &t, &guess).unwrap();
            assert_eq!(a.u, b.u);
        }
    }
}

#[test]
fn massless_limbs_fall_freely() {
    let pkm = common::delta().with_massless_limbs();
    let st = at_rest(&pkm, &pkm.reference_x());
    let ev = evaluate_state(&pkm, &st).unwrap();
    let a = forward_acceleration(&pkm, &ev, &st.vt, &DVector::zeros(3), &Wrench::zeros()).unwrap();
    assert!((a - DVector::from_column_slice(pkm.gravity.as_slice())).amax() < 1e-10);
}

#[test]
fn static_forces_hold_the_platform() {
    let pkm = common::delta();
    let x = pkm.reference_x() + DVector::from_vec(vec![0.1, 0.0, -0.05]);
    let st = at_rest(&pkm, &x);
    let u = static_torque(&pkm, &x, &st.thetas).unwrap().u;
    let ev = evaluate_state(&pkm, &st).unwrap();
    let a = forward_acceleration(&pkm, &ev, &st.vt, &u, &Wrench::zeros()).unwrap();
    assert!(a.amax() < 1e-10);
}

#[test]
fn actuator_and_task_forms_agree() {
    let pkm = common::delta();
    for s in random_samples(&pkm, &[0.2, 0.2, 0.1], 0.8, 10, 5).unwrap() {
        let t = TaskSample { x: s.x.clone(), vt: s.vt.clone(), vt_dot: s.vt_dot.clone(), w_ee: Wrench::zeros() };
        let r = inverse_dynamics(&pkm, &t, &s.thetas).unwrap();
        let ev = evaluate_state(&pkm, &MachineState { thetas: r.thetas.clone(), vt: s.vt.clone() }).unwrap();
        let a = actuator_eom(&ev.terms).unwrap();
        let q_dot = &ev.terms.j_ik * &s.vt;
        let q_ddot = &ev.terms.j_ik * &s.vt_dot + &ev.terms.j_ik_dot * &s.vt;
        let u = &a.m * q_ddot + &a.c * &q_dot + &a.q_grav + &a.q;
        assert!(rel_err_vec(&u, &r.u) < 1e-9);
        // actuator power equals taskspace power
        let p_act = r.u.dot(&q_dot);
        let p_task = (ev.terms.j_ik.transpose() * &r.u).dot(&s.vt);
        assert_abs_diff_eq!(p_act, p_task, epsilon = 1e-10 * p_act.abs().max(1.0));
    }
}

#[test]
fn friction_dissipates() {
    let mut pkm = common::delta();
    for limb in &mut pkm.limbs {
        limb.friction = vec![0.05; limb.n()];
    }
    let pkm = pkm.with_forces(Arc::new(ViscousFriction));
    for s in random_samples(&pkm, &[0.2, 0.2, 0.1], 1.0, 20, 13).unwrap() {
        let st = MachineState { thetas: s.thetas.clone(), vt: s.vt.clone() };
        let (_, diss) = power_terms(&pkm, &st, &DVector::zeros(3), &Wrench::zeros()).unwrap();
        assert!(diss > 0.0);
        let ev = evaluate_state(&pkm, &st).unwrap();
        assert_abs_diff_eq!(ev.terms.w.dot(&s.vt), diss, epsilon = 1e-12);
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert!(power_balance_error(&pkm, &st, &u, &Wrench::zeros()).unwrap() < 1e-7);
    }
}

#[test]
fn free_motion_conserves_energy() {
    for pkm in [common::delta(), fourbar_pkm(&FourbarParams::default()).unwrap()] {
        let mut st = at_rest(&pkm, &pkm.reference_x());
        let e0 = energy(&pkm, &st);
        let u = DVector::zeros(pkm.n_act());
        let mut drift: f64 = 0.0;
        for _ in 0..200 {
            st = rk4_step(&pkm, &st, &u, &Wrench::zeros(), 1e-3).unwrap();
            drift = drift.max((energy(&pkm, &st) - e0).abs());
        }
        assert!(drift / e0.abs().max(1.0) < 1e-6, "{} drift {drift}", pkm.name);
    }
}

#[test]
fn coasting_without_gravity_conserves_energy() {
    let pkm = common::delta().with_gravity(Vector3::zeros());
    let mut st = at_rest(&pkm, &pkm.reference_x());
    st.vt = DVector::from_vec(vec![0.1, -0.05, 0.05]);
    let e0 = kinetic_energy(&pkm, &st).unwrap();
    let u = DVector::zeros(3);
    for _ in 0..500 {
        st = rk4_step(&pkm, &st, &u, &Wrench::zeros(), 2e-3).unwrap();
    }
    let e1 = kinetic_energy(&pkm, &st).unwrap();
    assert!((e1 - e0).abs() / e0 < 1e-6, "{e0} → {e1}");
}

#[test]
fn replay_keeps_loops_closed() {
    let pkm = common::delta();
    let traj = Trajectory::parse("sin", &pkm.reference_x(), Some(0.01), Some(10.0)).unwrap();
    let st = initial_state(&pkm, &traj).unwrap();
    let mut src = TorqueSource::replay(&pkm, traj).unwrap();
    let rep = simulate(&pkm, st, &mut src, 2e-3, 10.0, 500).unwrap();
    assert!(rep.max_residual <= 1e-8, "residual {}", rep.max_residual);
    assert!(rep.max_tracking.unwrap() <= 1e-4, "tracking {:?}", rep.max_tracking);
}
