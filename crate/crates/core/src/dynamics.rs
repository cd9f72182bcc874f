//! Equations of motion at tree, limb, platform, task and actuator level,
//! inverse dynamics (serial and per-limb parallel) and forward dynamics.

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::limb_kin::{
    acceleration_ik, actuator_rows, close_loops, forward_kinematics, inverse_kinematics, stack_rows, velocity_ik,
    LimbMotion,
};
use crate::linalg::{inverse_fast, select_cols, select_entries, select_rows};
use crate::pkm::{LimbModel, Pkm};
use crate::se3::{gyroscopic_matrix, twist, Mat6, Pose, SpatialInertia, Twist, Vec6, Wrench};
use crate::tree_kin::{KinematicTree, KinematicsCache};

/// Per-limb generalized joint forces `Q̄` (all tree joints), entering `φ` on
/// the left-hand side, so positive values resist positive motion.
pub trait LimbForces: Send + Sync {
    fn joint_forces(&self, limb: &LimbModel, index: usize, theta: &DVector<f64>, theta_dot: &DVector<f64>)
        -> DVector<f64>;
}

/// No additional joint forces.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoForces;

impl LimbForces for NoForces {
    fn joint_forces(&self, limb: &LimbModel, _: usize, _: &DVector<f64>, _: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(limb.n())
    }
}

/// Viscous joint friction with the limb's per-joint coefficients.
#[derive(Clone, Copy, Debug, Default)]
pub struct ViscousFriction;

impl LimbForces for ViscousFriction {
    fn joint_forces(&self, limb: &LimbModel, _: usize, _: &DVector<f64>, theta_dot: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(limb.n(), limb.friction.iter().zip(theta_dot.iter()).map(|(c, v)| c * v))
    }
}

/// Tree-level terms of a platform-free limb.
#[derive(Clone, Debug)]
pub struct TreeEomTerms {
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q_grav: DVector<f64>,
}

fn gravity_wrench(m: &SpatialInertia, c: &Pose, g: &Vector3<f64>) -> Wrench {
    // M Ad(C)⁻¹ (0, g)
    m.matrix() * twist(&Vector3::zeros(), &(c.rot.transpose() * g))
}

/// `M̄ = JᵀMJ`, `C̄ = −Jᵀ(M A a + bᵀM)J`, `Q̄_grav = −Jᵀ stack(M_i Ad(C_i)⁻¹(0, g))`.
pub fn tree_eom(
    tree: &KinematicTree,
    inertias: &[SpatialInertia],
    cache: &KinematicsCache,
    theta_dot: &DVector<f64>,
    gravity: &Vector3<f64>,
) -> TreeEomTerms {
    let n = tree.len();
    let j = cache.system_jacobian();
    let mut mm = DMatrix::zeros(6 * n, 6 * n);
    let mut b = DMatrix::zeros(6 * n, 6 * n);
    let mut wg = DVector::zeros(6 * n);
    for i in 0..n {
        let mi = inertias[i].matrix();
        mm.view_mut((6 * i, 6 * i), (6, 6)).copy_from(&mi);
        let v: Twist = Vec6::from_column_slice((&cache.jacobians[i] * theta_dot).as_slice());
        b.view_mut((6 * i, 6 * i), (6, 6)).copy_from(&crate::se3::ad(&v));
        wg.rows_mut(6 * i, 6).copy_from(&gravity_wrench(&inertias[i], &cache.poses[i], gravity));
    }
    let (a, _) = tree.system_factors(cache);
    let aa = tree.rate_ad(theta_dot);
    let m = j.transpose() * &mm * &j;
    let c = -(j.transpose() * (&mm * a * aa + b.transpose() * &mm) * &j);
    let q_grav = -(j.transpose() * wg);
    TreeEomTerms { m, c, q_grav }
}

/// Body-wise evaluation of `φ = M̄ϑ̈ + C̄ϑ̇ + Q̄_grav` from per-body Newton-Euler wrenches.
pub fn eval_phi(
    inertias: &[SpatialInertia],
    jacobians: &[DMatrix<f64>],
    jdots: &[DMatrix<f64>],
    poses: &[Pose],
    theta_dot: &DVector<f64>,
    theta_ddot: &DVector<f64>,
    gravity: &Vector3<f64>,
) -> DVector<f64> {
    let mut phi = DVector::zeros(theta_dot.len());
    for i in 0..inertias.len() {
        let m = inertias[i].matrix();
        let v = Vec6::from_column_slice((&jacobians[i] * theta_dot).as_slice());
        let a = Vec6::from_column_slice((&jacobians[i] * theta_ddot + &jdots[i] * theta_dot).as_slice());
        let w = m * a + gyroscopic_matrix(&v) * m * v - gravity_wrench(&inertias[i], &poses[i], gravity);
        phi += jacobians[i].transpose() * DVector::from_column_slice(w.as_slice());
    }
    phi
}

/// Platform Newton-Euler wrench `M_p V̇_p + G_p M_p V_p + W_grav`.
pub fn platform_ne(m: &SpatialInertia, pose: &Pose, v: &Twist, vdot: &Vec6, gravity: &Vector3<f64>) -> Wrench {
    let mp: Mat6 = m.matrix();
    mp * vdot + gyroscopic_matrix(v) * mp * v - gravity_wrench(m, pose, gravity)
}

/// Bar-tree data of a limb: columns and bodies without the platform.
struct BarView {
    jac: Vec<DMatrix<f64>>,
    jdot: Vec<DMatrix<f64>>,
    poses: Vec<Pose>,
}

fn bar_view(limb: &LimbModel, cache: &KinematicsCache, jdots: &[DMatrix<f64>]) -> BarView {
    let cols = &limb.bar_joints;
    BarView {
        jac: cols.iter().map(|&b| select_cols(&cache.jacobians[b], cols)).collect(),
        jdot: cols.iter().map(|&b| select_cols(&jdots[b], cols)).collect(),
        poses: cols.iter().map(|&b| cache.poses[b]).collect(),
    }
}

/// `φ_(l)` of a limb in motion (bar joints only).
pub fn limb_phi(limb: &LimbModel, motion: &LimbMotion, gravity: &Vector3<f64>) -> DVector<f64> {
    let bv = bar_view(limb, &motion.vel.cache, &motion.jdots);
    let td = select_entries(&motion.theta_dot, &limb.bar_joints);
    let tdd = select_entries(&motion.theta_ddot, &limb.bar_joints);
    eval_phi(&limb.inertias, &bv.jac, &bv.jdot, &bv.poses, &td, &tdd, gravity)
}

/// Generalized force of one limb in taskspace: `(H̄F)ᵀφ_(l) + (HF)ᵀQ`.
pub fn limb_generalized_force(pkm: &Pkm, index: usize, motion: &LimbMotion) -> DVector<f64> {
    let limb = &pkm.limbs[index];
    let hf = motion.vel.hf();
    let hbf = select_rows(&hf, &limb.bar_joints);
    let phi = limb_phi(limb, motion, &pkm.gravity);
    let q = pkm.forces.joint_forces(limb, index, &motion.vel.theta, &motion.theta_dot);
    hbf.transpose() * phi + hf.transpose() * q
}

/// Platform twist and acceleration in the platform frame.
pub fn platform_state(pkm: &Pkm, vt: &DVector<f64>, vt_dot: &DVector<f64>) -> (Twist, Vec6) {
    let p = &pkm.task.pattern;
    (Vec6::from_column_slice((p * vt).as_slice()), Vec6::from_column_slice((p * vt_dot).as_slice()))
}

/// Platform contribution `P_pᵀ(φ_p − W_EE)`.
pub fn platform_generalized_force(
    pkm: &Pkm,
    x: &DVector<f64>,
    vt: &DVector<f64>,
    vt_dot: &DVector<f64>,
    w_ee: &Wrench,
) -> DVector<f64> {
    let (v, a) = platform_state(pkm, vt, vt_dot);
    let w = platform_ne(&pkm.platform.inertia, &pkm.task.pose(x), &v, &a, &pkm.gravity) - w_ee;
    pkm.task.pattern.transpose() * DVector::from_column_slice(w.as_slice())
}

/// Task-level terms of the assembled machine.
#[derive(Clone, Debug)]
pub struct TaskEomTerms {
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub w_grav: DVector<f64>,
    /// Generalized other forces `W_t`.
    pub w: DVector<f64>,
    pub j_ik: DMatrix<f64>,
    pub j_ik_dot: DMatrix<f64>,
}

/// Projected limb terms `(M̿, C̿, Q̿_grav)` onto `q_(l)`.
pub fn projected_limb_eom(
    tree: &TreeEomTerms,
    h_bar: &DMatrix<f64>,
    h_bar_dot: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let m = h_bar.transpose() * &tree.m * h_bar;
    let c = h_bar.transpose() * (&tree.m * h_bar_dot + &tree.c * h_bar);
    let g = h_bar.transpose() * &tree.q_grav;
    (m, c, g)
}

/// Tree terms of a limb's platform-free tree.
pub fn limb_tree_eom(limb: &LimbModel, motion: &LimbMotion, gravity: &Vector3<f64>) -> TreeEomTerms {
    let tb = select_entries(&motion.vel.theta, &limb.bar_joints);
    let td = select_entries(&motion.theta_dot, &limb.bar_joints);
    let cache = limb.bar.kinematics(&tb);
    tree_eom(&limb.bar, &limb.inertias, &cache, &td, gravity)
}

/// Assembles `M_t`, `C_t`, `W_grav`, `W_t`, `J_IK` for limb motions at `(x, V_t)`.
pub fn taskspace_eom(pkm: &Pkm, x: &DVector<f64>, vt: &DVector<f64>, motions: &[LimbMotion]) -> TaskEomTerms {
    let d = pkm.dof();
    let mut m = DMatrix::zeros(d, d);
    let mut c = DMatrix::zeros(d, d);
    let mut w_grav = DVector::zeros(d);
    let mut w = DVector::zeros(d);
    let mut jik = Vec::new();
    let mut jikd = Vec::new();
    for (l, (limb, mo)) in pkm.limbs.iter().zip(motions).enumerate() {
        let hf = mo.vel.hf();
        let hfd = mo.hf_dot();
        let hbf = select_rows(&hf, &limb.bar_joints);
        let hbfd = select_rows(&hfd, &limb.bar_joints);
        let te = limb_tree_eom(limb, mo, &pkm.gravity);
        m += hbf.transpose() * &te.m * &hbf;
        c += hbf.transpose() * (&te.c * &hbf + &te.m * &hbfd);
        w_grav += hbf.transpose() * &te.q_grav;
        w += hf.transpose() * pkm.forces.joint_forces(limb, l, &mo.vel.theta, &mo.theta_dot);
        jik.push(actuator_rows(limb, &hf));
        jikd.push(actuator_rows(limb, &hfd));
    }
    let p = &pkm.task.pattern;
    let mp = pkm.platform.inertia.matrix();
    let mp = DMatrix::from_fn(6, 6, |i, j| mp[(i, j)]);
    let (v, _) = platform_state(pkm, vt, &DVector::zeros(d));
    let g = gyroscopic_matrix(&v);
    let g = DMatrix::from_fn(6, 6, |i, j| g[(i, j)]);
    m += p.transpose() * &mp * p;
    c += p.transpose() * g * &mp * p;
    let wg = -gravity_wrench(&pkm.platform.inertia, &pkm.task.pose(x), &pkm.gravity);
    w_grav += p.transpose() * DVector::from_column_slice(wg.as_slice());
    TaskEomTerms { m, c, w_grav, w, j_ik: stack_rows(&jik), j_ik_dot: stack_rows(&jikd) }
}

/// Actuator-space terms.
#[derive(Clone, Debug)]
pub struct ActuatorEomTerms {
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q_grav: DVector<f64>,
    pub q: DVector<f64>,
    pub j_fk: DMatrix<f64>,
}

/// `M_a = J_FKᵀM_tJ_FK`, `C_a = J_FKᵀ(C_t − M_tJ_FKJ̇_IK)J_FK`.
pub fn actuator_eom(t: &TaskEomTerms) -> Result<ActuatorEomTerms> {
    let jfk = inverse_fast(&t.j_ik, "inverse kinematics Jacobian J_IK")?;
    let jt = jfk.transpose();
    Ok(ActuatorEomTerms {
        m: &jt * &t.m * &jfk,
        c: &jt * (&t.c - &t.m * &jfk * &t.j_ik_dot) * &jfk,
        q_grav: &jt * &t.w_grav,
        q: &jt * &t.w,
        j_fk: jfk,
    })
}

/// Result of one inverse-dynamics evaluation.
#[derive(Clone, Debug)]
pub struct InvDynResult {
    pub u: DVector<f64>,
    pub thetas: Vec<DVector<f64>>,
    pub theta_dots: Vec<DVector<f64>>,
    pub j_ik: DMatrix<f64>,
    /// Largest IK iteration count over the limbs.
    pub iterations: usize,
}

/// Taskspace sample for inverse dynamics.
#[derive(Clone, Debug)]
pub struct TaskSample {
    pub x: DVector<f64>,
    pub vt: DVector<f64>,
    pub vt_dot: DVector<f64>,
    pub w_ee: Wrench,
}

/// Output of one limb task.
#[derive(Clone, Debug)]
pub struct LimbTaskOutput {
    pub force: DVector<f64>,
    pub j_ik_rows: DMatrix<f64>,
    pub theta: DVector<f64>,
    pub theta_dot: DVector<f64>,
    pub iterations: usize,
}

/// Limb task: geometric, velocity and acceleration IK followed by `(H̄F)ᵀφ_(l) + (HF)ᵀQ`.
pub fn limb_task(pkm: &Pkm, index: usize, s: &TaskSample, guess: &DVector<f64>) -> Result<LimbTaskOutput> {
    let limb = &pkm.limbs[index];
    let target = pkm.task.pose(&s.x);
    let (theta, iterations) = inverse_kinematics(limb, &pkm.task, &target, guess)?;
    let vel = velocity_ik(limb, &pkm.task, &theta)?;
    let motion = acceleration_ik(limb, &pkm.task, vel, &s.vt, &s.vt_dot)?;
    let force = limb_generalized_force(pkm, index, &motion);
    let j_ik_rows = actuator_rows(limb, &motion.vel.hf());
    Ok(LimbTaskOutput { force, j_ik_rows, theta, theta_dot: motion.theta_dot, iterations })
}

/// Fixed-order reduction of limb and platform contributions into actuator forces.
pub fn reduce(outputs: Vec<LimbTaskOutput>, platform: DVector<f64>) -> Result<InvDynResult> {
    let mut total = DVector::zeros(platform.len());
    for o in &outputs {
        total += &o.force;
    }
    total += platform;
    let rows: Vec<DMatrix<f64>> = outputs.iter().map(|o| o.j_ik_rows.clone()).collect();
    let j_ik = stack_rows(&rows);
    let jt = j_ik.transpose();
    let lu = jt.clone().lu();
    let u = lu.solve(&total).filter(|_| {
        let d = lu.u().diagonal();
        let dmax = d.amax();
        dmax > 0.0 && d.iter().all(|v| v.abs() >= 1e-13 * dmax)
    });
    let u = u.ok_or_else(|| Error::singular("inverse kinematics Jacobian J_IK", crate::linalg::cond(&j_ik)))?;
    let iterations = outputs.iter().map(|o| o.iterations).max().unwrap_or(0);
    let (thetas, theta_dots) = outputs.into_iter().map(|o| (o.theta, o.theta_dot)).unzip();
    Ok(InvDynResult { u, thetas, theta_dots, j_ik, iterations })
}

/// Serial inverse dynamics `u = J_IK⁻ᵀ(φ_t − W_EE)`.
pub fn inverse_dynamics(pkm: &Pkm, s: &TaskSample, guess: &[DVector<f64>]) -> Result<InvDynResult> {
    let outputs = (0..pkm.limbs.len())
        .map(|l| limb_task(pkm, l, s, &guess[l]))
        .collect::<Result<Vec<_>>>()?;
    let platform = platform_generalized_force(pkm, &s.x, &s.vt, &s.vt_dot, &s.w_ee);
    reduce(outputs, platform)
}

/// Worker pool for per-limb parallel inverse dynamics (one task per limb plus one for the platform).
pub struct ParallelSolver {
    pool: rayon::ThreadPool,
    width: usize,
}

impl ParallelSolver {
    /// Pool of width `min(requested, L + 1)`; `None` requests `L + 1`.
    pub fn new(pkm: &Pkm, requested: Option<usize>) -> Result<Self> {
        let cap = pkm.limbs.len() + 1;
        let width = requested.unwrap_or(cap).clamp(1, cap);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(width)
            .build()
            .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool, width })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Parallel inverse dynamics; equal to [`inverse_dynamics`] up to the fixed reduction order.
    pub fn inverse_dynamics(&self, pkm: &Pkm, s: &TaskSample, guess: &[DVector<f64>]) -> Result<InvDynResult> {
        let nl = pkm.limbs.len();
        enum Out {
            Limb(Result<LimbTaskOutput>),
            Platform(DVector<f64>),
        }
        let outs: Vec<Out> = self.pool.install(|| {
            (0..=nl)
                .into_par_iter()
                .map(|t| {
                    if t < nl {
                        Out::Limb(limb_task(pkm, t, s, &guess[t]))
                    } else {
                        Out::Platform(platform_generalized_force(pkm, &s.x, &s.vt, &s.vt_dot, &s.w_ee))
                    }
                })
                .collect()
        });
        let mut limbs = Vec::with_capacity(nl);
        let mut platform = DVector::zeros(pkm.dof());
        for o in outs {
            match o {
                Out::Limb(r) => limbs.push(r?),
                Out::Platform(p) => platform = p,
            }
        }
        reduce(limbs, platform)
    }

    /// Runs `f` inside the pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

/// Joint-space state of the assembled machine for forward dynamics.
#[derive(Clone, Debug)]
pub struct MachineState {
    pub thetas: Vec<DVector<f64>>,
    pub vt: DVector<f64>,
}

/// Limb motions, taskspace terms and chart coordinates at a machine state.
pub struct StateEval {
    pub x: DVector<f64>,
    pub motions: Vec<LimbMotion>,
    pub terms: TaskEomTerms,
}

/// Chart coordinates of the platform from limb 0.
pub fn platform_x(pkm: &Pkm, theta0: &DVector<f64>) -> DVector<f64> {
    let c = pkm.limbs[0].tree.kinematics(theta0);
    pkm.task.coordinates(&c.poses[pkm.limbs[0].platform_body])
}

/// Evaluates limb velocities (with `V̇_t = 0` accelerations) and the taskspace terms.
pub fn evaluate_state(pkm: &Pkm, st: &MachineState) -> Result<StateEval> {
    let x = platform_x(pkm, &st.thetas[0]);
    let zero = DVector::zeros(pkm.dof());
    let motions = pkm
        .limbs
        .iter()
        .zip(&st.thetas)
        .map(|(l, t)| acceleration_ik(l, &pkm.task, velocity_ik(l, &pkm.task, t)?, &st.vt, &zero))
        .collect::<Result<Vec<_>>>()?;
    let terms = taskspace_eom(pkm, &x, &st.vt, &motions);
    Ok(StateEval { x, motions, terms })
}

/// `V̇_t = M_t⁻¹(W_EE + J_IKᵀu − C_tV_t − W_grav − W_t)`.
pub fn forward_acceleration(pkm: &Pkm, ev: &StateEval, vt: &DVector<f64>, u: &DVector<f64>, w_ee: &Wrench) -> Result<DVector<f64>> {
    let t = &ev.terms;
    let wee = pkm.task.pattern.transpose() * DVector::from_column_slice(w_ee.as_slice());
    let rhs = wee + t.j_ik.transpose() * u - &t.c * vt - &t.w_grav - &t.w;
    let minv = inverse_fast(&t.m, "taskspace mass matrix M_t")?;
    Ok(minv * rhs)
}

/// State derivative `(ϑ̇_(l) = H F V_t, V̇_t)`.
pub fn forward_dynamics_rhs(
    pkm: &Pkm,
    st: &MachineState,
    u: &DVector<f64>,
    w_ee: &Wrench,
) -> Result<(Vec<DVector<f64>>, DVector<f64>)> {
    let ev = evaluate_state(pkm, st)?;
    let vd = forward_acceleration(pkm, &ev, &st.vt, u, w_ee)?;
    Ok((ev.motions.into_iter().map(|m| m.theta_dot).collect(), vd))
}

/// Re-projection onto the constraint manifold: loops of limb 0 closed with
/// `q` fixed, then the remaining limbs solved for limb 0's platform pose.
pub fn reproject(pkm: &Pkm, st: &mut MachineState) -> Result<()> {
    let l0 = &pkm.limbs[0];
    let q = select_entries(&st.thetas[0], &l0.q_joints);
    let (t0, _) = forward_kinematics(l0, &q, &st.thetas[0])?;
    st.thetas[0] = t0;
    let c = l0.tree.kinematics(&st.thetas[0]);
    let target = c.poses[l0.platform_body];
    for l in 1..pkm.limbs.len() {
        let mut g = st.thetas[l].clone();
        close_loops(&pkm.limbs[l], &mut g)?;
        st.thetas[l] = inverse_kinematics(&pkm.limbs[l], &pkm.task, &target, &g)?.0;
    }
    Ok(())
}

/// One RK4 step of size `dt` followed by re-projection; `u` and `w_ee` held constant.
pub fn rk4_step(pkm: &Pkm, st: &MachineState, u: &DVector<f64>, w_ee: &Wrench, dt: f64) -> Result<MachineState> {
    let add = |s: &MachineState, k: &(Vec<DVector<f64>>, DVector<f64>), h: f64| MachineState {
        thetas: s.thetas.iter().zip(&k.0).map(|(t, d)| t + d * h).collect(),
        vt: &s.vt + &k.1 * h,
    };
    let k1 = forward_dynamics_rhs(pkm, st, u, w_ee)?;
    let k2 = forward_dynamics_rhs(pkm, &add(st, &k1, dt / 2.0), u, w_ee)?;
    let k3 = forward_dynamics_rhs(pkm, &add(st, &k2, dt / 2.0), u, w_ee)?;
    let k4 = forward_dynamics_rhs(pkm, &add(st, &k3, dt), u, w_ee)?;
    let mut out = MachineState {
        thetas: (0..st.thetas.len())
            .map(|l| &st.thetas[l] + (&k1.0[l] + &k2.0[l] * 2.0 + &k3.0[l] * 2.0 + &k4.0[l]) * (dt / 6.0))
            .collect(),
        vt: &st.vt + (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * (dt / 6.0),
    };
    reproject(pkm, &mut out)?;
    Ok(out)
}

/// Kinetic energy of all limb bodies and the platform.
pub fn kinetic_energy(pkm: &Pkm, st: &MachineState) -> Result<f64> {
    let mut t = 0.0;
    for (limb, th) in pkm.limbs.iter().zip(&st.thetas) {
        let vel = velocity_ik(limb, &pkm.task, th)?;
        let td = vel.hf() * &st.vt;
        for (k, &b) in limb.bar_joints.iter().enumerate() {
            let v = Vec6::from_column_slice((&vel.cache.jacobians[b] * &td).as_slice());
            t += 0.5 * v.dot(&(limb.inertias[k].matrix() * v));
        }
    }
    let (v, _) = platform_state(pkm, &st.vt, &st.vt);
    t += 0.5 * v.dot(&(pkm.platform.inertia.matrix() * v));
    Ok(t)
}

/// Gravitational potential energy `−Σ m_i gᵀ r_com,i`.
pub fn potential_energy(pkm: &Pkm, thetas: &[DVector<f64>]) -> f64 {
    let mut v = 0.0;
    for (limb, th) in pkm.limbs.iter().zip(thetas) {
        let c = limb.tree.kinematics(th);
        for (k, &b) in limb.bar_joints.iter().enumerate() {
            let m = &limb.inertias[k];
            v -= m.mass * pkm.gravity.dot(&c.poses[b].transform_point(&m.com));
        }
    }
    let cp = {
        let l0 = &pkm.limbs[0];
        l0.tree.kinematics(&thetas[0]).poses[l0.platform_body]
    };
    v - pkm.platform.inertia.mass * pkm.gravity.dot(&cp.transform_point(&pkm.platform.inertia.com))
}

/// Power delivered by actuators and end-effector load, and the dissipated power.
pub fn power_terms(pkm: &Pkm, st: &MachineState, u: &DVector<f64>, w_ee: &Wrench) -> Result<(f64, f64)> {
    let vels = pkm
        .limbs
        .iter()
        .zip(&st.thetas)
        .map(|(lb, th)| velocity_ik(lb, &pkm.task, th))
        .collect::<Result<Vec<_>>>()?;
    let mut diss = 0.0;
    for (l, (limb, vel)) in pkm.limbs.iter().zip(&vels).enumerate() {
        let td = vel.hf() * &st.vt;
        diss += td.dot(&pkm.forces.joint_forces(limb, l, &vel.theta, &td));
    }
    let jik = crate::limb_kin::ik_jacobian(pkm, &vels);
    let act = u.dot(&(jik * &st.vt));
    let ee = DVector::from_column_slice(w_ee.as_slice()).dot(&(&pkm.task.pattern * &st.vt));
    Ok((act + ee, diss))
}

/// Static actuator forces holding the platform at `x` (zero velocity).
pub fn static_torque(pkm: &Pkm, x: &DVector<f64>, guess: &[DVector<f64>]) -> Result<InvDynResult> {
    let d = pkm.dof();
    inverse_dynamics(
        pkm,
        &TaskSample { x: x.clone(), vt: DVector::zeros(d), vt_dot: DVector::zeros(d), w_ee: Wrench::zeros() },
        guess,
    )
}


/// Starting guesses at the reference configuration.
pub fn reference_guess(pkm: &Pkm) -> Vec<DVector<f64>> {
    pkm.limbs.iter().map(|l| DVector::zeros(l.n())).collect()
}
