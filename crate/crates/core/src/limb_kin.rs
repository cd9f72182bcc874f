//! Limb-level velocity, acceleration and geometric kinematics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{inverse_fast, max_abs, max_abs_vec, select_cols, select_entries, select_rows};
use crate::loops::{loop_solution_dot, LoopSolution};
use crate::pkm::{LimbModel, LoopKind, Pkm, SolverKind, TaskSpace};
use crate::se3::{log_pose, Pose};
use crate::tree_kin::KinematicsCache;

/// Residual tolerance of the Newton solvers.
pub const NEWTON_TOL: f64 = 1e-10;
/// Iteration cap of the Newton solvers.
pub const NEWTON_MAX_ITER: usize = 50;
/// Bound on deselected rows of `L_p F - P_p`.
pub const ROW_CHECK_TOL: f64 = 1e-8;

/// Loop state at one configuration.
#[derive(Clone, Debug)]
pub struct LoopState {
    pub eta: DVector<f64>,
    pub residual: DVector<f64>,
    pub g: DMatrix<f64>,
    pub solution: LoopSolution,
}

/// Velocity-level limb quantities at one configuration.
#[derive(Clone, Debug)]
pub struct LimbVelocity {
    pub theta: DVector<f64>,
    pub cache: KinematicsCache,
    pub loops: Vec<LoopState>,
    /// `H_(l)` (n_l×δ_l), tree-joint rows, columns in `q_joints` order.
    pub h: DMatrix<f64>,
    /// `L_p = J_p H` (6×δ_l).
    pub lp: DMatrix<f64>,
    /// `L_t` (r_l×δ_l).
    pub lt: DMatrix<f64>,
    /// `F_(l)` (δ_l×δ_p) with `q̇ = F V_t`.
    pub f: DMatrix<f64>,
    /// `L_t⁻¹` in square mode, `(L_pᵀL_p)⁻¹` in pseudoinverse mode.
    pub lt_inv: DMatrix<f64>,
}

impl LimbVelocity {
    /// `H F` (n_l×δ_p).
    pub fn hf(&self) -> DMatrix<f64> {
        &self.h * &self.f
    }
}

/// Acceleration-level limb quantities.
#[derive(Clone, Debug)]
pub struct LimbMotion {
    pub vel: LimbVelocity,
    pub q_dot: DVector<f64>,
    pub theta_dot: DVector<f64>,
    pub theta_ddot: DVector<f64>,
    pub h_dot: DMatrix<f64>,
    pub lt_dot: DMatrix<f64>,
    pub f_dot: DMatrix<f64>,
    /// `J̇_i` of every tree body.
    pub jdots: Vec<DMatrix<f64>>,
}

impl LimbMotion {
    /// `d/dt (H F)`.
    pub fn hf_dot(&self) -> DMatrix<f64> {
        &self.h_dot * &self.vel.f + &self.vel.h * &self.f_dot
    }
}

fn loop_states(limb: &LimbModel, theta: &DVector<f64>, cache: &KinematicsCache) -> Result<Vec<LoopState>> {
    limb.loops
        .iter()
        .map(|lp| {
            let eta = lp.eta(theta, cache);
            let (residual, g) = lp.constraint(cache, &eta)?;
            let solution = lp.solve(&g).map_err(|e| e.context(&format!("limb {}", limb.name)))?;
            Ok(LoopState { eta, residual, g, solution })
        })
        .collect()
}

/// Places the loop blocks into a limb matrix (tree rows, `q_joints` columns);
/// `free` is the entry of the free-joint columns (1 for `H`, 0 for `Ḣ`).
fn assemble(limb: &LimbModel, blocks: &[DMatrix<f64>], free: f64) -> DMatrix<f64> {
    let n = limb.n();
    let mut h = DMatrix::zeros(n, limb.dof());
    let mut col = 0;
    for (lp, blk) in limb.loops.iter().zip(blocks) {
        for (i, &v) in lp.partition.order().iter().enumerate() {
            if let Some(j) = lp.vars[v] {
                for c in 0..blk.ncols() {
                    h[(j, col + c)] = blk[(i, c)];
                }
            }
        }
        col += blk.ncols();
    }
    for &j in &limb.free_joints {
        h[(j, col)] = free;
        col += 1;
    }
    h
}

/// `H_(l)` at `theta`.
pub fn limb_h(limb: &LimbModel, theta: &DVector<f64>) -> Result<(KinematicsCache, Vec<LoopState>, DMatrix<f64>)> {
    let cache = limb.tree.kinematics(theta);
    let loops = loop_states(limb, theta, &cache)?;
    let blocks: Vec<DMatrix<f64>> = loops.iter().map(|s| s.solution.h.clone()).collect();
    let h = assemble(limb, &blocks, 1.0);
    Ok((cache, loops, h))
}

/// Velocity inverse kinematics map `F_(l)` at `theta`.
pub fn velocity_ik(limb: &LimbModel, task: &TaskSpace, theta: &DVector<f64>) -> Result<LimbVelocity> {
    let (cache, loops, h) = limb_h(limb, theta)?;
    let lp = &cache.jacobians[limb.platform_body] * &h;
    let sel = limb.selection();
    let lt = &sel * &lp;
    let (f, lt_inv) = match task.solver {
        SolverKind::Square => {
            let lt_inv = inverse_fast(&lt, &format!("limb {} taskspace Jacobian L_t", limb.name))?;
            let dt = &sel * &task.pattern;
            (&lt_inv * dt, lt_inv)
        }
        SolverKind::Pseudoinverse => {
            let n = lp.transpose() * &lp;
            let n_inv = inverse_fast(&n, &format!("limb {} normal matrix L_pᵀL_p", limb.name))?;
            (&n_inv * lp.transpose() * &task.pattern, n_inv)
        }
    };
    let mismatch = limb.mount.platform.adjoint_inv();
    let mismatch = DMatrix::from_fn(6, 6, |i, j| mismatch[(i, j)]) * (&lp * &f - &task.pattern);
    let bad = match task.solver {
        SolverKind::Square => (0..6).filter(|r| !limb.rows.contains(r)).map(|r| mismatch.row(r).amax()).fold(0.0, f64::max),
        SolverKind::Pseudoinverse => max_abs(&mismatch),
    };
    if bad > ROW_CHECK_TOL {
        return Err(Error::Validation(format!(
            "limb {}: platform twist rows outside the taskspace selection are not reproduced (error {:.3e})",
            limb.name, bad
        )));
    }
    Ok(LimbVelocity { theta: theta.clone(), cache, loops, h, lp, lt, f, lt_inv })
}

/// Acceleration inverse kinematics for given `V_t` and `V̇_t`.
pub fn acceleration_ik(
    limb: &LimbModel,
    task: &TaskSpace,
    vel: LimbVelocity,
    vt: &DVector<f64>,
    vt_dot: &DVector<f64>,
) -> Result<LimbMotion> {
    let q_dot = &vel.f * vt;
    let theta_dot = &vel.h * &q_dot;
    let jdots = limb.tree.jacobian_dots(&vel.cache, &theta_dot);
    let mut dblocks = Vec::with_capacity(limb.loops.len());
    for (lp, st) in limb.loops.iter().zip(&vel.loops) {
        let qv: Vec<usize> = st.solution.partition.q.iter().map(|&i| lp.vars[i].unwrap_or(0)).collect();
        let eta_dot = st.solution.h_natural() * select_entries(&theta_dot, &qv);
        let gd = lp.constraint_dot(&vel.cache, &st.g, &jdots, &theta_dot, &eta_dot);
        dblocks.push(loop_solution_dot(&st.g, &gd, &st.solution));
    }
    let h_dot = assemble(limb, &dblocks, 0.0);
    let lp_dot = &jdots[limb.platform_body] * &vel.h + &vel.cache.jacobians[limb.platform_body] * &h_dot;
    let lt_dot = limb.selection() * &lp_dot;
    let f_dot = match task.solver {
        SolverKind::Square => -(&vel.lt_inv * &lt_dot * &vel.f),
        SolverKind::Pseudoinverse => {
            let ldt = lp_dot.transpose();
            &vel.lt_inv * (&ldt * &task.pattern - (&ldt * &vel.lp + vel.lp.transpose() * &lp_dot) * &vel.f)
        }
    };
    let q_ddot = &vel.f * vt_dot + &f_dot * vt;
    let theta_ddot = &vel.h * q_ddot + &h_dot * &q_dot;
    Ok(LimbMotion { vel, q_dot, theta_dot, theta_ddot, h_dot, lt_dot, f_dot, jdots })
}

/// Largest loop residual at `theta`.
pub fn loop_residual(limb: &LimbModel, theta: &DVector<f64>) -> Result<f64> {
    let cache = limb.tree.kinematics(theta);
    let mut worst: f64 = 0.0;
    for lp in &limb.loops {
        let eta = lp.eta(theta, &cache);
        worst = worst.max(max_abs_vec(&lp.constraint(&cache, &eta)?.0));
    }
    Ok(worst)
}

/// Newton projection of the dependent loop variables with `q_(l)` held fixed.
pub fn close_loops(limb: &LimbModel, theta: &mut DVector<f64>) -> Result<usize> {
    if limb.loops.is_empty() {
        return Ok(0);
    }
    let cache = limb.tree.kinematics(theta);
    let mut cuts: Vec<f64> = limb
        .loops
        .iter()
        .map(|lp| match &lp.kind {
            LoopKind::CutBody(spec) => spec.cut_value(&cache),
            LoopKind::CutJoint(_) => 0.0,
        })
        .collect();
    let mut cache = Some(cache);
    for it in 0..=NEWTON_MAX_ITER {
        let c = cache.take().unwrap_or_else(|| limb.tree.kinematics(theta));
        let mut worst: f64 = 0.0;
        let mut evals = Vec::with_capacity(limb.loops.len());
        for (li, lp) in limb.loops.iter().enumerate() {
            let eta = match &lp.kind {
                LoopKind::CutBody(spec) => spec.eta(theta, cuts[li]),
                LoopKind::CutJoint(_) => lp.eta(theta, &c),
            };
            let (f, g) = lp.constraint(&c, &eta)?;
            if !f.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence { what: format!("limb {} loop closure", limb.name), iterations: it, residual: f64::NAN });
            }
            worst = worst.max(max_abs_vec(&f));
            evals.push((f, g));
        }
        if worst <= NEWTON_TOL {
            return Ok(it);
        }
        if it == NEWTON_MAX_ITER {
            return Err(Error::Divergence {
                what: format!("limb {} loop closure", limb.name),
                iterations: it,
                residual: worst,
            });
        }
        for (li, (lp, (f, g))) in limb.loops.iter().zip(&evals).enumerate() {
            let p = &lp.partition;
            let gy = select_cols(&select_rows(g, &p.rows), &p.y);
            let gy_inv = inverse_fast(&gy, &format!("limb {} loop closure block", limb.name))?;
            let dy = -(gy_inv * select_entries(f, &p.rows));
            for (k, &yi) in p.y.iter().enumerate() {
                match lp.vars[yi] {
                    Some(j) => theta[j] += dy[k],
                    None => cuts[li] += dy[k],
                }
            }
        }
    }
    unreachable!()
}

/// Geometric forward kinematics for given `q_(l)`: first-order predictor from
/// `guess` followed by Newton correction of the loops. Returns the Newton iterations.
pub fn forward_kinematics(limb: &LimbModel, q: &DVector<f64>, guess: &DVector<f64>) -> Result<(DVector<f64>, usize)> {
    if q.len() != limb.dof() {
        return Err(Error::Validation(format!("expected {} limb coordinates, got {}", limb.dof(), q.len())));
    }
    let mut theta = guess.clone();
    let dq = q - select_entries(&theta, &limb.q_joints);
    if max_abs_vec(&dq) > 0.0 {
        let (_, _, h) = limb_h(limb, &theta)?;
        theta += h * dq;
    }
    for (i, &j) in limb.q_joints.iter().enumerate() {
        theta[j] = q[i];
    }
    let it = close_loops(limb, &mut theta)?;
    Ok((theta, it))
}

/// Platform pose of a limb.
pub fn platform_pose(limb: &LimbModel, theta: &DVector<f64>) -> Pose {
    let c = limb.tree.kinematics(theta);
    c.poses[limb.platform_body]
}

/// Geometric inverse kinematics of one limb to a target platform pose.
/// Returns the joint state and the number of Newton iterations.
pub fn inverse_kinematics(
    limb: &LimbModel,
    task: &TaskSpace,
    target: &Pose,
    guess: &DVector<f64>,
) -> Result<(DVector<f64>, usize)> {
    let mut theta = guess.clone();
    close_loops(limb, &mut theta)?;
    let sel = limb.selection();
    for it in 0..=NEWTON_MAX_ITER {
        let (cache, _, h) = limb_h(limb, &theta)?;
        let cp = cache.poses[limb.platform_body];
        let e = log_pose(&(cp.inverse() * *target));
        let err = e.amax();
        if !err.is_finite() {
            return Err(Error::Divergence { what: format!("limb {} inverse kinematics", limb.name), iterations: it, residual: err });
        }
        if err <= NEWTON_TOL {
            return Ok((theta, it));
        }
        if it == NEWTON_MAX_ITER {
            return Err(Error::Divergence {
                what: format!("limb {} inverse kinematics", limb.name),
                iterations: it,
                residual: err,
            });
        }
        let e = DVector::from_column_slice(e.as_slice());
        let lp = &cache.jacobians[limb.platform_body] * &h;
        let dq = match task.solver {
            SolverKind::Square => {
                inverse_fast(&(&sel * &lp), &format!("limb {} taskspace Jacobian L_t", limb.name))? * (&sel * e)
            }
            SolverKind::Pseudoinverse => {
                inverse_fast(&(lp.transpose() * &lp), &format!("limb {} normal matrix", limb.name))? * lp.transpose() * e
            }
        };
        theta += h * dq;
        close_loops(limb, &mut theta)?;
    }
    unreachable!()
}

/// Inverse kinematics of all limbs to chart coordinates `x`.
/// Returns the limb states and the largest iteration count.
pub fn machine_ik(pkm: &Pkm, x: &DVector<f64>, guess: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, usize)> {
    let target = pkm.task.pose(x);
    let mut out = Vec::with_capacity(pkm.limbs.len());
    let mut worst = 0;
    for (limb, g) in pkm.limbs.iter().zip(guess) {
        let (t, it) = inverse_kinematics(limb, &pkm.task, &target, g)?;
        worst = worst.max(it);
        out.push(t);
    }
    Ok((out, worst))
}

/// Rows of `J_IK` contributed by one limb: actuated rows of `H F`.
pub fn actuator_rows(limb: &LimbModel, hf: &DMatrix<f64>) -> DMatrix<f64> {
    select_rows(hf, &limb.actuated)
}

/// Inverse kinematics Jacobian `J_IK` (n_act×δ_p) with `θ̇_act = J_IK V_t`.
pub fn ik_jacobian(pkm: &Pkm, vels: &[LimbVelocity]) -> DMatrix<f64> {
    let blocks: Vec<DMatrix<f64>> = pkm.limbs.iter().zip(vels).map(|(l, v)| actuator_rows(l, &v.hf())).collect();
    stack_rows(&blocks)
}

/// `J̇_IK`.
pub fn ik_jacobian_dot(pkm: &Pkm, motions: &[LimbMotion]) -> DMatrix<f64> {
    let blocks: Vec<DMatrix<f64>> = pkm.limbs.iter().zip(motions).map(|(l, m)| actuator_rows(l, &m.hf_dot())).collect();
    stack_rows(&blocks)
}

pub(crate) fn stack_rows(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Actuator coordinates gathered over all limbs.
pub fn actuator_values(pkm: &Pkm, thetas: &[DVector<f64>]) -> DVector<f64> {
    let v: Vec<f64> = pkm.limbs.iter().zip(thetas).flat_map(|(l, t)| l.actuated.iter().map(move |&a| t[a])).collect();
    DVector::from_vec(v)
}
