//! Loop-closure constraints and their block-partitioned velocity solution.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::linalg::{cond, independent_rows, inverse_checked, pivot_columns, rank, select_cols, select_rows};
use crate::se3::{ad, exp_twist, log_pose, skew, Pose, ScrewAxis, ScrewKind, Vec6};
use crate::tree_kin::KinematicsCache;

/// Conditioning bound for the dependent block `G_y`.
pub const MAX_COND: f64 = 1e8;

/// Constraint rows imposed by a cut joint.
#[derive(Clone, Debug, PartialEq)]
pub enum CutJointKind {
    Spherical,
    /// Axis 1 of the frame at `k` and axis 2 of the frame at `r`.
    Universal,
    /// Axis 3 of both frames; keeps `ΔR(3,1) = ΔR(3,2) = 0`.
    Revolute,
    /// Explicit distance components (0-based) and orientation elements `(i, j)` of `ΔR`.
    Custom { distance: Vec<usize>, orientation: Vec<(usize, usize)> },
}

impl CutJointKind {
    pub fn distance_rows(&self) -> Vec<usize> {
        match self {
            CutJointKind::Custom { distance, .. } => distance.clone(),
            _ => vec![0, 1, 2],
        }
    }

    pub fn orientation_rows(&self) -> Vec<(usize, usize)> {
        match self {
            CutJointKind::Spherical => vec![],
            CutJointKind::Universal => vec![(0, 1)],
            CutJointKind::Revolute => vec![(2, 0), (2, 1)],
            CutJointKind::Custom { orientation, .. } => orientation.clone(),
        }
    }

    pub fn rows(&self) -> usize {
        self.distance_rows().len() + self.orientation_rows().len()
    }
}

/// Cut joint between tree bodies `k` and `r` (None = ground), with joint
/// frames `S_k`, `S_r` given relative to the body frames.
#[derive(Clone, Debug, PartialEq)]
pub struct CutJointSpec {
    pub k: Option<usize>,
    pub r: Option<usize>,
    pub frame_k: Pose,
    pub frame_r: Pose,
    pub kind: CutJointKind,
}

struct Endpoints<'a> {
    ck: Pose,
    cr: Pose,
    jk: Option<&'a DMatrix<f64>>,
    jr: Option<&'a DMatrix<f64>>,
}

fn endpoints<'a>(spec: &CutJointSpec, cache: &'a KinematicsCache) -> Endpoints<'a> {
    let pose = |b: Option<usize>| b.map_or_else(Pose::identity, |b| cache.poses[b]);
    Endpoints {
        ck: pose(spec.k),
        cr: pose(spec.r),
        jk: spec.k.map(|b| &cache.jacobians[b]),
        jr: spec.r.map(|b| &cache.jacobians[b]),
    }
}

fn unit(i: usize) -> Vector3<f64> {
    let mut v = Vector3::zeros();
    v[i] = 1.0;
    v
}

/// Rows of `B` with `ḟ = B (V_k; V_r)` and, if twists are given, `Ḃ`.
fn row_blocks(spec: &CutJointSpec, e: &Endpoints, twists: Option<(&Vec6, &Vec6)>) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let rkl = spec.frame_k.rot;
    let dk = spec.frame_k.pos;
    let rrl = spec.frame_r.rot;
    let dr = spec.frame_r.pos;
    let rk_t = e.ck.rot.transpose();
    let rkr = rk_t * e.cr.rot;
    let w = rk_t * (e.cr.pos - e.ck.pos) + rkr * dr;
    let u = w - dk;
    let (wk, vk, wr, vr) = match twists {
        Some((a, b)) => (
            Vector3::new(a[0], a[1], a[2]),
            Vector3::new(a[3], a[4], a[5]),
            Vector3::new(b[0], b[1], b[2]),
            Vector3::new(b[3], b[4], b[5]),
        ),
        None => (Vector3::zeros(), Vector3::zeros(), Vector3::zeros(), Vector3::zeros()),
    };
    let rkr_dot = -skew(&wk) * rkr + rkr * skew(&wr);
    let w_dot = w.cross(&wk) - vk - rkr * dr.cross(&wr) + rkr * vr;
    let dist = spec.kind.distance_rows();
    let orient = spec.kind.orientation_rows();
    let m = dist.len() + orient.len();
    let mut f = DVector::zeros(m);
    let mut b = DMatrix::zeros(m, 12);
    let mut bd = DMatrix::zeros(m, 12);
    let rho = rkl.transpose() * u;
    let blk = [skew(&w), -Matrix3::identity(), -rkr * skew(&dr), rkr];
    let blk_dot = [skew(&w_dot), Matrix3::zeros(), -rkr_dot * skew(&dr), rkr_dot];
    for (row, &c) in dist.iter().enumerate() {
        f[row] = rho[c];
        let sel = rkl.column(c).transpose();
        for (q, (m1, m2)) in blk.iter().zip(&blk_dot).enumerate() {
            b.view_mut((row, 3 * q), (1, 3)).copy_from(&(sel * m1));
            bd.view_mut((row, 3 * q), (1, 3)).copy_from(&(sel * m2));
        }
    }
    for (n, &(i, j)) in orient.iter().enumerate() {
        let row = dist.len() + n;
        let a = rkl * unit(i);
        let bb = rrl * unit(j);
        f[row] = a.dot(&(rkr * bb));
        let x = a.cross(&(rkr * bb));
        let y = (rkr.transpose() * a).cross(&bb);
        let xd = a.cross(&(rkr_dot * bb));
        let yd = (rkr_dot.transpose() * a).cross(&bb);
        b.view_mut((row, 0), (1, 3)).copy_from(&x.transpose());
        b.view_mut((row, 6), (1, 3)).copy_from(&(-y).transpose());
        bd.view_mut((row, 0), (1, 3)).copy_from(&xd.transpose());
        bd.view_mut((row, 6), (1, 3)).copy_from(&(-yd).transpose());
    }
    (f, b, bd)
}

fn stack(n: usize, jk: Option<&DMatrix<f64>>, jr: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(12, n);
    if let Some(j) = jk {
        s.view_mut((0, 0), (6, n)).copy_from(j);
    }
    if let Some(j) = jr {
        s.view_mut((6, 0), (6, n)).copy_from(j);
    }
    s
}

/// Residual and constraint Jacobian (`m×n`, all tree joints) of a cut joint.
pub fn cut_joint_rows(spec: &CutJointSpec, cache: &KinematicsCache) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if spec.kind.rows() == 0 {
        return Err(Error::Validation("cut joint imposes no constraint rows".into()));
    }
    let e = endpoints(spec, cache);
    let (f, b, _) = row_blocks(spec, &e, None);
    let n = cache.theta.len();
    Ok((f, b * stack(n, e.jk, e.jr)))
}

/// `Ġ = Ḃ (J_k; J_r) + B (J̇_k; J̇_r)`; `jdots` are the body Jacobian rates of the tree.
pub fn cut_joint_rows_dot(
    spec: &CutJointSpec,
    cache: &KinematicsCache,
    jdots: &[DMatrix<f64>],
    theta_dot: &DVector<f64>,
) -> DMatrix<f64> {
    let e = endpoints(spec, cache);
    let n = cache.theta.len();
    let tw = |j: Option<&DMatrix<f64>>| j.map_or_else(Vec6::zeros, |j| Vec6::from_column_slice((j * theta_dot).as_slice()));
    let (vk, vr) = (tw(e.jk), tw(e.jr));
    let (_, b, bd) = row_blocks(spec, &e, Some((&vk, &vr)));
    let j = stack(n, e.jk, e.jr);
    let jd = stack(n, spec.k.map(|k| &jdots[k]), spec.r.map(|r| &jdots[r]));
    bd * j + b * jd
}

/// Variable of a cut-body loop factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopVar {
    Tree(usize),
    Cut,
}

/// Cut-body constraint `g = ∏ exp(σ_i η_i Y_i)`, factors ordered from the
/// `r` side to the cut joint.
#[derive(Clone, Debug, PartialEq)]
pub struct CutBodySpec {
    pub factors: Vec<(LoopVar, i8, ScrewAxis)>,
    pub k: Option<usize>,
    pub r: Option<usize>,
    /// Screw of the cut joint at the reference, `Y_c`.
    pub cut_screw: ScrewAxis,
}

impl CutBodySpec {
    /// Tree joints of the loop, ascending; `η` is these followed by the cut variable.
    pub fn tree_vars(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .factors
            .iter()
            .filter_map(|(v, _, _)| if let LoopVar::Tree(j) = v { Some(*j) } else { None })
            .collect();
        v.sort_unstable();
        v
    }

    fn eta_index(&self, var: LoopVar, tree_vars: &[usize]) -> usize {
        match var {
            LoopVar::Tree(j) => tree_vars.iter().position(|&x| x == j).unwrap_or(0),
            LoopVar::Cut => tree_vars.len(),
        }
    }

    /// Value of the cut variable from `exp(θ_c Y_c) = P_k⁻¹ P_r`.
    pub fn cut_value(&self, cache: &KinematicsCache) -> f64 {
        let p = |b: Option<usize>| b.map_or_else(Pose::identity, |b| cache.joint_poses[b]);
        let xi = log_pose(&(p(self.k).inverse() * p(self.r)));
        let y = self.cut_screw.coords;
        match self.cut_screw.kind {
            ScrewKind::Prismatic => xi.fixed_rows::<3>(3).dot(&y.fixed_rows::<3>(3)),
            _ => xi.fixed_rows::<3>(0).dot(&y.fixed_rows::<3>(0)),
        }
    }

    /// `η` assembled from the tree state and the cut variable.
    pub fn eta(&self, theta: &DVector<f64>, cut: f64) -> DVector<f64> {
        let tv = self.tree_vars();
        let mut eta = DVector::zeros(tv.len() + 1);
        for (i, &j) in tv.iter().enumerate() {
            eta[i] = theta[j];
        }
        eta[tv.len()] = cut;
        eta
    }

    /// Residual `log g` and right-trivialized `G` (6×N, columns in `η` order).
    pub fn constraint(&self, eta: &DVector<f64>) -> (Vec6, DMatrix<f64>) {
        let tv = self.tree_vars();
        let mut g = DMatrix::zeros(6, tv.len() + 1);
        let mut prod = Pose::identity();
        for &(var, sigma, ref y) in &self.factors {
            let idx = self.eta_index(var, &tv);
            let col = prod.act(&(y.coords * sigma as f64));
            g.set_column(idx, &col);
            prod = prod * exp_twist(&(y.coords * (sigma as f64 * eta[idx])));
        }
        (log_pose(&prod), g)
    }

    /// `Ġ_m = Σ_{i<m} ad(G_i η̇_i) G_m` in product order.
    pub fn constraint_dot(&self, g: &DMatrix<f64>, eta_dot: &DVector<f64>) -> DMatrix<f64> {
        let tv = self.tree_vars();
        let mut out = DMatrix::zeros(6, g.ncols());
        let mut acc = Vec6::zeros();
        for &(var, _, _) in &self.factors {
            let idx = self.eta_index(var, &tv);
            let col = Vec6::from_column_slice(g.column(idx).as_slice());
            out.set_column(idx, &(ad(&acc) * col));
            acc += col * eta_dot[idx];
        }
        out
    }
}

/// Selection of constraint rows and of dependent/independent variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub rows: Vec<usize>,
    pub y: Vec<usize>,
    pub q: Vec<usize>,
}

impl Partition {
    /// Variable index of row `i` of `H` in partition order.
    pub fn order(&self) -> Vec<usize> {
        self.y.iter().chain(&self.q).copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PartitionMode {
    /// Rows and dependent columns chosen by pivoting.
    Auto,
    /// Independent variables fixed by the caller.
    Pinned(Vec<usize>),
    /// A previously computed partition.
    Fixed(Partition),
}

/// `H = [-G_y⁻¹ G_q; I]` in partition order.
#[derive(Clone, Debug)]
pub struct LoopSolution {
    pub h: DMatrix<f64>,
    pub partition: Partition,
    pub cond: f64,
    /// `G_y⁻¹` on the selected rows.
    pub gy_inv: DMatrix<f64>,
}

impl LoopSolution {
    /// `H` with rows in variable order.
    pub fn h_natural(&self) -> DMatrix<f64> {
        let order = self.partition.order();
        let mut out = DMatrix::zeros(self.h.nrows(), self.h.ncols());
        for (i, &v) in order.iter().enumerate() {
            out.set_row(v, &self.h.row(i));
        }
        out
    }
}

/// Chooses the partition for `G` (m×n).
pub fn choose_partition(g: &DMatrix<f64>, mode: &PartitionMode) -> Result<Partition> {
    let n = g.ncols();
    match mode {
        PartitionMode::Fixed(p) => Ok(p.clone()),
        PartitionMode::Auto => {
            let rows = independent_rows(g);
            let gr = select_rows(g, &rows);
            let mut y = pivot_columns(&gr, rows.len());
            y.sort_unstable();
            let q = (0..n).filter(|c| !y.contains(c)).collect();
            Ok(Partition { rows, y, q })
        }
        PartitionMode::Pinned(q) => {
            let r = rank(g);
            if q.len() + r != n || q.iter().any(|&c| c >= n) {
                return Err(Error::Validation(format!(
                    "{} independent coordinates pinned but the loop has {} variables and {} independent constraints",
                    q.len(),
                    n,
                    r
                )));
            }
            let rows = independent_rows(g);
            let y = (0..n).filter(|c| !q.contains(c)).collect();
            Ok(Partition { rows, y, q: q.clone() })
        }
    }
}

/// Solves `G η̇ = 0` for the dependent rates.
pub fn solve_velocity_constraints(g: &DMatrix<f64>, mode: &PartitionMode) -> Result<LoopSolution> {
    let partition = choose_partition(g, mode)?;
    let gr = select_rows(g, &partition.rows);
    let gy = select_cols(&gr, &partition.y);
    let gq = select_cols(&gr, &partition.q);
    let c = cond(&gy);
    if !(c <= MAX_COND) {
        if matches!(mode, PartitionMode::Auto) {
            return Err(Error::singular("loop constraint Jacobian", c));
        }
        return Err(Error::singular(format!("dependent block G_y for independent set {:?}", partition.q), c));
    }
    let gy_inv = inverse_checked(&gy, "dependent block G_y", MAX_COND)?;
    let top = -(&gy_inv * &gq);
    let (ny, nq) = (partition.y.len(), partition.q.len());
    let mut h = DMatrix::zeros(ny + nq, nq);
    h.view_mut((0, 0), (ny, nq)).copy_from(&top);
    h.view_mut((ny, 0), (nq, nq)).fill_with_identity();
    Ok(LoopSolution { h, partition, cond: c, gy_inv })
}

/// `Ḣ` in partition order: `G_y⁻¹(Ġ_y G_y⁻¹ G_q − Ġ_q)` on top, zero below.
pub fn loop_solution_dot(g: &DMatrix<f64>, g_dot: &DMatrix<f64>, sol: &LoopSolution) -> DMatrix<f64> {
    let p = &sol.partition;
    let gq = select_cols(&select_rows(g, &p.rows), &p.q);
    let gdr = select_rows(g_dot, &p.rows);
    let gyd = select_cols(&gdr, &p.y);
    let gqd = select_cols(&gdr, &p.q);
    let top = &sol.gy_inv * (gyd * &sol.gy_inv * gq - gqd);
    let (ny, nq) = (p.y.len(), p.q.len());
    let mut hd = DMatrix::zeros(ny + nq, nq);
    hd.view_mut((0, 0), (ny, nq)).copy_from(&top);
    hd
}

/// Limb-level `H` assembled from the loop solutions.
#[derive(Clone, Debug)]
pub struct LimbH {
    /// `H_(l)` (n_l×δ_l) with rows in tree-joint order.
    pub h: DMatrix<f64>,
    pub h_dot: DMatrix<f64>,
    /// Block-diagonal matrix before row permutation.
    pub blocks: DMatrix<f64>,
    /// Tree joint of each row of `blocks`.
    pub perm: Vec<usize>,
    /// Tree joints forming `q_(l)`, in column order.
    pub q_joints: Vec<usize>,
}

/// Loop contribution to `assemble_limb_h`: solution, its rate, and the tree
/// joint of each local variable (None for cut-body cut variables).
pub struct LoopBlock<'a> {
    pub solution: &'a LoopSolution,
    pub h_dot: &'a DMatrix<f64>,
    pub vars: &'a [Option<usize>],
}

/// Block-diagonal assembly of loop solutions and free joints, permuted to tree order.
pub fn assemble_limb_h(n: usize, loops: &[LoopBlock], free: &[usize]) -> Result<LimbH> {
    let mut seen = vec![false; n];
    let mut blocks = Vec::new();
    let mut dblocks = Vec::new();
    let mut perm = Vec::new();
    let mut q_joints = Vec::new();
    for lb in loops {
        let order = lb.solution.partition.order();
        let keep: Vec<usize> = (0..order.len()).filter(|&i| lb.vars[order[i]].is_some()).collect();
        for &i in &keep {
            let j = lb.vars[order[i]].unwrap_or(0);
            if j >= n || seen[j] {
                return Err(Error::Topology(format!("tree joint {j} belongs to more than one loop")));
            }
            seen[j] = true;
            perm.push(j);
        }
        for &qi in &lb.solution.partition.q {
            match lb.vars[qi] {
                Some(j) => q_joints.push(j),
                None => return Err(Error::Validation("a cut-joint variable cannot be independent".into())),
            }
        }
        blocks.push(select_rows(&lb.solution.h, &keep));
        dblocks.push(select_rows(lb.h_dot, &keep));
    }
    let mut free = free.to_vec();
    free.sort_unstable();
    for &j in &free {
        if j >= n || seen[j] {
            return Err(Error::Topology(format!("free joint {j} also belongs to a loop")));
        }
        seen[j] = true;
        perm.push(j);
        q_joints.push(j);
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Topology("tree joints not covered by loops or free joints".into()));
    }
    blocks.push(DMatrix::identity(free.len(), free.len()));
    dblocks.push(DMatrix::zeros(free.len(), free.len()));
    let blk = crate::linalg::block_diag(&blocks);
    let dblk = crate::linalg::block_diag(&dblocks);
    let mut h = DMatrix::zeros(n, blk.ncols());
    let mut h_dot = DMatrix::zeros(n, blk.ncols());
    for (i, &j) in perm.iter().enumerate() {
        h.set_row(j, &blk.row(i));
        h_dot.set_row(j, &dblk.row(i));
    }
    Ok(LimbH { h, h_dot, blocks: blk, perm, q_joints })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_gives_identity() {
        let g = DMatrix::zeros(0, 3);
        let s = solve_velocity_constraints(&g, &PartitionMode::Auto).unwrap();
        assert_eq!(s.h, DMatrix::identity(3, 3));
    }

    #[test]
    fn pinned_partition_and_rate() {
        let g = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, 0.0, 1.0, -1.0]);
        let s = solve_velocity_constraints(&g, &PartitionMode::Pinned(vec![2])).unwrap();
        assert_eq!(s.partition.y, vec![0, 1]);
        let hn = s.h_natural();
        assert!((&g * &hn).abs().max() < 1e-14);
        assert_eq!(s.h[(2, 0)], 1.0);
        let gd = DMatrix::zeros(2, 3);
        assert_eq!(loop_solution_dot(&g, &gd, &s), DMatrix::zeros(3, 1));
        let bad = solve_velocity_constraints(&g, &PartitionMode::Pinned(vec![0, 1]));
        assert!(bad.is_err());
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let s = solve_velocity_constraints(&g, &PartitionMode::Auto).unwrap();
        assert_eq!(s.partition.rows.len(), 2);
        assert!((&g * s.h_natural()).abs().max() < 1e-14);
    }

    #[test]
    fn limb_h_block_structure() {
        let s1 = LoopSolution {
            h: DMatrix::from_column_slice(3, 1, &[-1.0, -1.0, 1.0]),
            partition: Partition { rows: vec![0, 1], y: vec![1, 2], q: vec![0] },
            cond: 1.0,
            gy_inv: DMatrix::identity(2, 2),
        };
        let s2 = LoopSolution {
            h: DMatrix::from_fn(6, 2, |i, j| if i >= 4 { (i - 4 == j) as u8 as f64 } else { (i + 2 * j) as f64 }),
            partition: Partition { rows: vec![0, 1, 2, 3], y: vec![0, 1, 2, 3], q: vec![4, 5] },
            cond: 1.0,
            gy_inv: DMatrix::identity(4, 4),
        };
        let z1 = DMatrix::zeros(3, 1);
        let z2 = DMatrix::zeros(6, 2);
        let v1 = [Some(0), Some(1), Some(2)];
        let v2 = [Some(3), Some(4), Some(5), Some(6), Some(7), Some(8)];
        let lh = assemble_limb_h(
            9,
            &[LoopBlock { solution: &s1, h_dot: &z1, vars: &v1 }, LoopBlock { solution: &s2, h_dot: &z2, vars: &v2 }],
            &[],
        )
        .unwrap();
        assert_eq!(lh.blocks.view((0, 0), (3, 1)).into_owned(), s1.h);
        assert_eq!(lh.blocks.view((3, 1), (6, 2)).into_owned(), s2.h);
        assert_eq!(lh.blocks.view((0, 1), (3, 2)).abs().max(), 0.0);
        assert_eq!(lh.q_joints, vec![0, 7, 8]);
        let none = assemble_limb_h(2, &[], &[0, 1]).unwrap();
        assert_eq!(none.h, DMatrix::identity(2, 2));
    }
}
