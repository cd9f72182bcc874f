//! Invariant checks at sampled configurations: derivatives against central
//! differences, loop closure, power balance and mount symmetry.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    evaluate_state, forward_acceleration, kinetic_energy, potential_energy, power_terms, reference_guess,
    MachineState,
};
use crate::error::Result;
use crate::limb_kin::{acceleration_ik, ik_jacobian, limb_h, loop_residual, machine_ik, velocity_ik, LimbMotion};
use crate::pkm::{LimbModel, Pkm};
use crate::se3::{log_pose, Wrench};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// `‖a − b‖∞ / max(1, ‖b‖∞)`.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

/// `‖a − b‖∞ / max(1, ‖b‖∞)` for vectors.
pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

/// Consistent machine state with actuator-space data at one sample.
#[derive(Clone, Debug)]
pub struct Sample {
    pub x: DVector<f64>,
    pub vt: DVector<f64>,
    pub vt_dot: DVector<f64>,
    pub thetas: Vec<DVector<f64>>,
}

/// Random samples `x = x_ref + amplitude∘U(−1, 1)` with random `V_t`, `V̇_t`
/// of magnitude `rate`, solved by IK from the reference configuration.
pub fn random_samples(pkm: &Pkm, amplitude: &[f64], rate: f64, count: usize, seed: u64) -> Result<Vec<Sample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = pkm.reference_x();
    let d = pkm.dof();
    let guess = reference_guess(pkm);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x = DVector::from_fn(d, |i, _| x0[i] + amplitude[i % amplitude.len()] * rng.random_range(-1.0..1.0));
        let vt = DVector::from_fn(d, |_, _| rate * rng.random_range(-1.0..1.0));
        let vt_dot = DVector::from_fn(d, |_, _| rate * rng.random_range(-1.0..1.0));
        let (thetas, _) = machine_ik(pkm, &x, &guess)?;
        out.push(Sample { x, vt, vt_dot, thetas });
    }
    Ok(out)
}

/// Limb motion at a sample.
pub fn limb_motion(pkm: &Pkm, l: usize, s: &Sample) -> Result<LimbMotion> {
    let limb = &pkm.limbs[l];
    let vel = velocity_ik(limb, &pkm.task, &s.thetas[l])?;
    acceleration_ik(limb, &pkm.task, vel, &s.vt, &s.vt_dot)
}

/// Largest relative error of the body Jacobians `J_k` against central
/// differences of the left-trivialized pose increment.
pub fn body_jacobian_error(limb: &LimbModel, theta: &DVector<f64>) -> f64 {
    let cache = limb.tree.kinematics(theta);
    let n = limb.n();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let mut fd = DMatrix::zeros(6, n);
        for j in 0..n {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += FD_STEP;
            tm[j] -= FD_STEP;
            let cp = limb.tree.kinematics(&tp).poses[k];
            let cm = limb.tree.kinematics(&tm).poses[k];
            let d = log_pose(&(cm.inverse() * cp)) / (2.0 * FD_STEP);
            fd.column_mut(j).copy_from(&d);
        }
        worst = worst.max(rel_err(&cache.jacobians[k], &fd));
    }
    worst
}

fn along<T>(theta: &DVector<f64>, dir: &DVector<f64>, f: impl Fn(&DVector<f64>) -> Result<T>) -> Result<(T, T)> {
    Ok((f(&(theta + dir * FD_STEP))?, f(&(theta - dir * FD_STEP))?))
}

/// Relative errors of `J̇_k`, `Ḣ`, `Ḟ` and `ϑ̈` against central differences along `ϑ̇`.
pub fn derivative_errors(pkm: &Pkm, l: usize, s: &Sample) -> Result<[f64; 4]> {
    let limb = &pkm.limbs[l];
    let m = limb_motion(pkm, l, s)?;
    let theta = &s.thetas[l];
    let td = &m.theta_dot;
    let (cp, cm) = along(theta, td, |t| Ok(limb.tree.kinematics(t)))?;
    let mut jd: f64 = 0.0;
    for k in 0..limb.n() {
        let fd = (&cp.jacobians[k] - &cm.jacobians[k]) / (2.0 * FD_STEP);
        jd = jd.max(rel_err(&m.jdots[k], &fd));
    }
    let (hp, hm) = along(theta, td, |t| Ok(limb_h(limb, t)?.2))?;
    let hd = rel_err(&m.h_dot, &((hp - hm) / (2.0 * FD_STEP)));
    let (vp, vm) = along(theta, td, |t| velocity_ik(limb, &pkm.task, t))?;
    let fd = rel_err(&m.f_dot, &((&vp.f - &vm.f) / (2.0 * FD_STEP)));
    let vtp = &s.vt + &s.vt_dot * FD_STEP;
    let vtm = &s.vt - &s.vt_dot * FD_STEP;
    let tdd = (vp.hf() * vtp - vm.hf() * vtm) / (2.0 * FD_STEP);
    let acc = rel_err_vec(&m.theta_ddot, &tdd);
    Ok([jd, hd, fd, acc])
}

/// Power balance residual `|P_in − P_diss − d/dt(T + V)| / max(1, |P_in|)`
/// at a machine state under actuator forces `u` and load `w_ee`, with the energy
/// rate taken by central differences along the forward-dynamics flow.
pub fn power_balance_error(pkm: &Pkm, st: &MachineState, u: &DVector<f64>, w_ee: &Wrench) -> Result<f64> {
    let ev = evaluate_state(pkm, st)?;
    let vd = forward_acceleration(pkm, &ev, &st.vt, u, w_ee)?;
    let energy = |h: f64| -> Result<f64> {
        let s = MachineState {
            thetas: st.thetas.iter().zip(&ev.motions).map(|(t, m)| t + &m.theta_dot * h).collect(),
            vt: &st.vt + &vd * h,
        };
        Ok(kinetic_energy(pkm, &s)? + potential_energy(pkm, &s.thetas))
    };
    let de = (energy(FD_STEP)? - energy(-FD_STEP)?) / (2.0 * FD_STEP);
    let (p_in, p_diss) = power_terms(pkm, st, u, w_ee)?;
    Ok((p_in - p_diss - de).abs() / p_in.abs().max(1.0))
}

/// Largest loop residual over the limbs.
pub fn loop_residual_max(pkm: &Pkm, thetas: &[DVector<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (limb, t) in pkm.limbs.iter().zip(thetas) {
        worst = worst.max(loop_residual(limb, t)?);
    }
    Ok(worst)
}

/// Mount symmetry of `J_IK`: for every limb `l`, `J_IK,l R_l = J_IK,0 R_0` with
/// `R_l` the base mount rotation (taskspace translation rotated with the mount).
/// `None` for machines with one limb or non-translational charts.
pub fn mount_symmetry_error(pkm: &Pkm, thetas: &[DVector<f64>]) -> Result<Option<f64>> {
    if pkm.limbs.len() < 2 || pkm.task.chart != crate::se3::TaskChart::Translation {
        return Ok(None);
    }
    let vels = pkm
        .limbs
        .iter()
        .zip(thetas)
        .map(|(l, t)| velocity_ik(l, &pkm.task, t))
        .collect::<Result<Vec<_>>>()?;
    let j = ik_jacobian(pkm, &vels);
    let rot = |l: usize| {
        let r = pkm.limbs[l].mount.base.rot;
        DMatrix::from_fn(3, 3, |i, k| r[(i, k)])
    };
    let mut row = 0;
    let mut blocks = Vec::new();
    for (l, limb) in pkm.limbs.iter().enumerate() {
        let k = limb.actuated.len();
        blocks.push(j.rows(row, k) * rot(l));
        row += k;
    }
    let mut worst: f64 = 0.0;
    for b in &blocks[1..] {
        if b.shape() != blocks[0].shape() {
            return Ok(None);
        }
        worst = worst.max((b - &blocks[0]).amax());
    }
    Ok(Some(worst))
}
