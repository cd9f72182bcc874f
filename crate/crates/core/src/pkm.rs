//! Assembled machine: limb models, platform and taskspace description.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::dynamics::{LimbForces, NoForces};
use crate::error::{Error, Result};
use crate::linalg::select_rows;
use crate::loops::{
    cut_joint_rows, cut_joint_rows_dot, solve_velocity_constraints, CutBodySpec, CutJointSpec, LoopSolution,
    Partition, PartitionMode,
};
use crate::se3::{so3_exp, Pose, SpatialInertia, TaskChart};
use crate::tree_kin::{KinematicTree, KinematicsCache};

/// Base and platform mount transforms of a limb instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mount {
    pub base: Pose,
    pub platform: Pose,
}

impl Default for Mount {
    fn default() -> Self {
        Self { base: Pose::identity(), platform: Pose::identity() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoopKind {
    CutJoint(CutJointSpec),
    CutBody(CutBodySpec),
}

/// One fundamental cycle of a limb with its fixed partition.
#[derive(Clone, Debug)]
pub struct LimbLoop {
    pub kind: LoopKind,
    /// Tree joint of each local variable; `None` marks a cut-body cut variable.
    pub vars: Vec<Option<usize>>,
    pub partition: Partition,
}

impl LimbLoop {
    pub fn tree_vars(&self) -> Vec<usize> {
        self.vars.iter().flatten().copied().collect()
    }

    /// Local variable values (cut variables taken from the current poses).
    pub fn eta(&self, theta: &DVector<f64>, cache: &KinematicsCache) -> DVector<f64> {
        match &self.kind {
            LoopKind::CutJoint(_) => DVector::from_iterator(self.vars.len(), self.vars.iter().map(|v| theta[v.unwrap_or(0)])),
            LoopKind::CutBody(spec) => spec.eta(theta, spec.cut_value(cache)),
        }
    }

    /// Residual (all rows) and constraint Jacobian over the local variables.
    pub fn constraint(&self, cache: &KinematicsCache, eta: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        match &self.kind {
            LoopKind::CutJoint(spec) => {
                let (f, g) = cut_joint_rows(spec, cache)?;
                let cols: Vec<usize> = self.tree_vars();
                Ok((f, crate::linalg::select_cols(&g, &cols)))
            }
            LoopKind::CutBody(spec) => {
                let (f, g) = spec.constraint(eta);
                Ok((DVector::from_column_slice(f.as_slice()), g))
            }
        }
    }

    /// `Ġ` over the local variables.
    pub fn constraint_dot(
        &self,
        cache: &KinematicsCache,
        g: &DMatrix<f64>,
        jdots: &[DMatrix<f64>],
        theta_dot: &DVector<f64>,
        eta_dot: &DVector<f64>,
    ) -> DMatrix<f64> {
        match &self.kind {
            LoopKind::CutJoint(spec) => {
                let gd = cut_joint_rows_dot(spec, cache, jdots, theta_dot);
                crate::linalg::select_cols(&gd, &self.tree_vars())
            }
            LoopKind::CutBody(spec) => spec.constraint_dot(g, eta_dot),
        }
    }

    pub fn solve(&self, g: &DMatrix<f64>) -> Result<LoopSolution> {
        solve_velocity_constraints(g, &PartitionMode::Fixed(self.partition.clone()))
    }
}

/// A limb instance with constraint bookkeeping and inertia data.
#[derive(Clone, Debug)]
pub struct LimbModel {
    pub name: String,
    pub tree: KinematicTree,
    pub joint_names: Vec<String>,
    pub body_names: Vec<String>,
    pub platform_body: usize,
    /// Tree without the platform body.
    pub bar: KinematicTree,
    /// Tree joint of each joint of `bar`.
    pub bar_joints: Vec<usize>,
    /// Inertia of each body of `bar`.
    pub inertias: Vec<SpatialInertia>,
    /// Viscous friction coefficient per tree joint.
    pub friction: Vec<f64>,
    pub loops: Vec<LimbLoop>,
    pub free_joints: Vec<usize>,
    /// Tree joints forming `q_(l)`.
    pub q_joints: Vec<usize>,
    pub actuated: Vec<usize>,
    /// Rows of the platform twist (in the mount frame) forming `L_t`, 0-based.
    pub rows: Vec<usize>,
    pub mount: Mount,
}

/// Ingredients of a limb before the partition is fixed.
pub struct LimbParts {
    pub name: String,
    pub tree: KinematicTree,
    pub joint_names: Vec<String>,
    pub body_names: Vec<String>,
    pub platform_body: usize,
    /// Inertia of every tree body (the platform entry is ignored).
    pub inertias: Vec<SpatialInertia>,
    pub friction: Vec<f64>,
    /// Loops with their local variables and optional pinned independent tree joints.
    pub loops: Vec<(LoopKind, Vec<Option<usize>>, Option<Vec<usize>>)>,
    pub actuated: Vec<usize>,
    pub rows: Vec<usize>,
    pub mount: Mount,
}

impl LimbModel {
    /// Fixes the loop partitions at the reference configuration.
    pub fn new(parts: LimbParts) -> Result<Self> {
        let n = parts.tree.len();
        if parts.platform_body >= n || !parts.tree.is_leaf(parts.platform_body) {
            return Err(Error::Topology(format!("platform of limb {} is not a leaf of its tree", parts.name)));
        }
        let bar = parts.tree.without_leaf(parts.platform_body)?;
        let bar_joints: Vec<usize> = (0..n).filter(|&i| i != parts.platform_body).collect();
        let inertias = bar_joints.iter().map(|&i| parts.inertias[i]).collect();
        let theta0 = DVector::zeros(n);
        let cache = parts.tree.kinematics(&theta0);
        let mut loops = Vec::new();
        let mut in_loop = vec![false; n];
        for (kind, vars, pinned) in parts.loops {
            for v in vars.iter().flatten() {
                if in_loop[*v] {
                    return Err(Error::Topology(format!("limb {}: loops share tree joint {v}", parts.name)));
                }
                in_loop[*v] = true;
            }
            let mut lp = LimbLoop { kind, vars, partition: Partition { rows: vec![], y: vec![], q: vec![] } };
            let eta = lp.eta(&theta0, &cache);
            let (f, g) = lp.constraint(&cache, &eta)?;
            if crate::linalg::max_abs_vec(&f) > 1e-9 {
                return Err(Error::Validation(format!(
                    "limb {}: reference configuration does not close a loop (residual {:.3e})",
                    parts.name,
                    crate::linalg::max_abs_vec(&f)
                )));
            }
            let mode = match pinned {
                Some(q) => PartitionMode::Pinned(
                    q.iter()
                        .map(|j| {
                            lp.vars.iter().position(|v| *v == Some(*j)).ok_or_else(|| {
                                Error::Validation(format!("independent joint {j} is not part of its loop"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => PartitionMode::Auto,
            };
            let sol = solve_velocity_constraints(&g, &mode).map_err(|e| e.context(&format!("limb {}", parts.name)))?;
            if sol.partition.q.iter().any(|&i| lp.vars[i].is_none()) {
                return Err(Error::Validation("a cut-joint variable cannot be independent".into()));
            }
            lp.partition = sol.partition;
            loops.push(lp);
        }
        let free_joints: Vec<usize> = (0..n).filter(|&i| !in_loop[i]).collect();
        let mut q_joints: Vec<usize> = loops
            .iter()
            .flat_map(|lp| lp.partition.q.iter().map(|&i| lp.vars[i].unwrap_or(0)).collect::<Vec<_>>())
            .collect();
        q_joints.extend(free_joints.iter().copied());
        for &a in &parts.actuated {
            if a >= n {
                return Err(Error::Validation(format!("actuated joint {a} out of range")));
            }
        }
        if parts.rows.iter().any(|&r| r >= 6) {
            return Err(Error::Validation("taskspace rows must lie in 1..=6".into()));
        }
        if parts.friction.len() != n {
            return Err(Error::Validation("friction vector length".into()));
        }
        Ok(Self {
            name: parts.name,
            tree: parts.tree,
            joint_names: parts.joint_names,
            body_names: parts.body_names,
            platform_body: parts.platform_body,
            bar,
            bar_joints,
            inertias,
            friction: parts.friction,
            loops,
            free_joints,
            q_joints,
            actuated: parts.actuated,
            rows: parts.rows,
            mount: parts.mount,
        })
    }

    pub fn n(&self) -> usize {
        self.tree.len()
    }

    /// Limb DOF `δ_l`.
    pub fn dof(&self) -> usize {
        self.q_joints.len()
    }

    /// `γ_l`.
    pub fn cycles(&self) -> usize {
        self.loops.len()
    }

    /// Joint variable count `N_l` including cut joints.
    pub fn total_joints(&self) -> usize {
        self.n()
            + self
                .loops
                .iter()
                .map(|l| match &l.kind {
                    LoopKind::CutJoint(s) => 6 - s.kind.rows(),
                    LoopKind::CutBody(_) => 1,
                })
                .sum::<usize>()
    }

    /// Rows of `Ad(S_p)⁻¹` selected for `L_t` (r_l×6).
    pub fn selection(&self) -> DMatrix<f64> {
        let adinv = self.mount.platform.adjoint_inv();
        let full = DMatrix::from_fn(6, 6, |i, j| adinv[(i, j)]);
        select_rows(&full, &self.rows)
    }

    /// Bar-tree joint values extracted from the full tree state.
    pub fn bar_values(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.bar_joints.len(), self.bar_joints.iter().map(|&j| theta[j]))
    }
}

/// Solver used for the limb velocity inverse kinematics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// `F = L_t⁻¹ D_t`.
    Square,
    /// `F = (L_pᵀL_p)⁻¹L_pᵀ P_p`.
    Pseudoinverse,
}

/// Taskspace chart, velocity distribution and platform reference.
#[derive(Clone, Debug)]
pub struct TaskSpace {
    pub chart: TaskChart,
    pub pattern: DMatrix<f64>,
    pub solver: SolverKind,
    /// Platform reference pose (orientation used by the translation chart).
    pub reference: Pose,
}

impl TaskSpace {
    pub fn new(chart: TaskChart, solver: SolverKind, reference: Pose) -> Result<Self> {
        if chart == TaskChart::Planar {
            let r = reference.rot;
            if (r[(2, 2)] - 1.0).abs() > 1e-12 {
                return Err(Error::Validation("planar chart requires a platform rotated about z only".into()));
            }
        }
        Ok(Self { chart, pattern: chart.pattern(), solver, reference })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Platform pose of the chart coordinates `x`.
    pub fn pose(&self, x: &DVector<f64>) -> Pose {
        match self.chart {
            TaskChart::Translation => Pose::new(self.reference.rot, Vector3::new(x[0], x[1], x[2])),
            TaskChart::Planar => Pose::new(
                so3_exp(&Vector3::new(0.0, 0.0, x[0])),
                Vector3::new(x[1], x[2], self.reference.pos.z),
            ),
            TaskChart::Spatial => {
                Pose::new(so3_exp(&Vector3::new(x[0], x[1], x[2])), Vector3::new(x[3], x[4], x[5]))
            }
        }
    }

    pub fn coordinates(&self, c: &Pose) -> DVector<f64> {
        self.chart.coordinates(c)
    }

    /// `V_t = H_t(x) ẋ`.
    pub fn rate_map(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.chart.rate_map(x, &self.reference.rot)
    }

    /// `(V_t, V̇_t)` from `(x, ẋ, ẍ)`.
    pub fn velocities(
        &self,
        x: &DVector<f64>,
        xd: &DVector<f64>,
        xdd: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let h = self.rate_map(x)?;
        let hd = self.chart.rate_map_dot(x, xd)?;
        Ok((&h * xd, h * xdd + hd * xd))
    }
}

/// Moving platform.
#[derive(Clone, Debug)]
pub struct PlatformBody {
    pub name: String,
    pub inertia: SpatialInertia,
    pub reference: Pose,
}

/// Assembled parallel kinematic machine.
#[derive(Clone)]
pub struct Pkm {
    pub name: String,
    pub limbs: Vec<LimbModel>,
    pub platform: PlatformBody,
    pub task: TaskSpace,
    pub gravity: Vector3<f64>,
    pub forces: Arc<dyn LimbForces>,
}

impl std::fmt::Debug for Pkm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pkm")
            .field("name", &self.name)
            .field("limbs", &self.limbs.len())
            .field("chart", &self.task.chart)
            .finish()
    }
}

impl Pkm {
    pub fn new(
        name: String,
        limbs: Vec<LimbModel>,
        platform: PlatformBody,
        task: TaskSpace,
        gravity: Vector3<f64>,
    ) -> Result<Self> {
        if limbs.is_empty() {
            return Err(Error::Topology("machine has no limbs".into()));
        }
        let n_act: usize = limbs.iter().map(|l| l.actuated.len()).sum();
        if n_act != task.dim() {
            return Err(Error::Validation(format!(
                "{} actuators for a platform with {} DOF; only non-redundant actuation is supported",
                n_act,
                task.dim()
            )));
        }
        for l in &limbs {
            if task.solver == SolverKind::Square && l.rows.len() != l.dof() {
                return Err(Error::Validation(format!(
                    "limb {}: {} taskspace rows for {} limb DOF; the square solver needs equal counts",
                    l.name,
                    l.rows.len(),
                    l.dof()
                )));
            }
        }
        let forces: Arc<dyn LimbForces> = if limbs.iter().any(|l| l.friction.iter().any(|&c| c != 0.0)) {
            Arc::new(crate::dynamics::ViscousFriction)
        } else {
            Arc::new(NoForces)
        };
        Ok(Self { name, limbs, platform, task, gravity, forces })
    }

    pub fn dof(&self) -> usize {
        self.task.dim()
    }

    pub fn n_act(&self) -> usize {
        self.limbs.iter().map(|l| l.actuated.len()).sum()
    }

    /// Reference chart coordinates of the platform.
    pub fn reference_x(&self) -> DVector<f64> {
        self.task.coordinates(&self.platform.reference)
    }

    /// Joint count over all limbs.
    pub fn total_joints(&self) -> usize {
        self.limbs.iter().map(|l| l.n()).sum()
    }

    /// Copy with all limb inertias set to zero.
    pub fn with_massless_limbs(&self) -> Pkm {
        let mut p = self.clone();
        for l in &mut p.limbs {
            for m in &mut l.inertias {
                *m = SpatialInertia::zero();
            }
        }
        p
    }

    pub fn with_gravity(&self, g: Vector3<f64>) -> Pkm {
        let mut p = self.clone();
        p.gravity = g;
        p
    }

    pub fn with_forces(&self, forces: Arc<dyn LimbForces>) -> Pkm {
        let mut p = self.clone();
        p.forces = forces;
        p
    }

    /// Platform rotation matrix at chart coordinates `x`.
    pub fn platform_rotation(&self, x: &DVector<f64>) -> Matrix3<f64> {
        self.task.pose(x).rot
    }
}
