//! Forward kinematics of tree-topology systems in product-of-exponentials form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::se3::{ad, exp_screw, spatial_to_body, Pose, ScrewAxis, Twist, Vec6};

/// Tree with canonical numbering: `parent[i] < i`, joint `i` moves body `i`.
#[derive(Clone, Debug)]
pub struct KinematicTree {
    pub parent: Vec<Option<usize>>,
    /// Zero-reference configuration `A_i` of each body.
    pub reference: Vec<Pose>,
    /// Joint screws `Y_i` in the inertial frame at the reference.
    pub screws: Vec<ScrewAxis>,
    /// Joint screws `X_i` in the body frame.
    pub body_screws: Vec<Vec6>,
    /// Joints on the ground path of each body, ascending.
    pub paths: Vec<Vec<usize>>,
}

impl KinematicTree {
    pub fn new(parent: Vec<Option<usize>>, reference: Vec<Pose>, screws: Vec<ScrewAxis>) -> Result<Self> {
        let n = parent.len();
        if reference.len() != n || screws.len() != n {
            return Err(Error::Validation("tree arrays have different lengths".into()));
        }
        for (i, p) in parent.iter().enumerate() {
            if p.is_some_and(|p| p >= i) {
                return Err(Error::Topology(format!("tree numbering is not canonical at body {i}")));
            }
        }
        for (i, (s, a)) in screws.iter().zip(&reference).enumerate() {
            s.validate().map_err(|e| e.context(&format!("joint {i}")))?;
            if !a.is_valid(1e-9) {
                return Err(Error::Validation(format!("reference pose of body {i} is not a rigid transformation")));
            }
        }
        let body_screws = screws.iter().zip(&reference).map(|(y, a)| spatial_to_body(y, a).coords).collect();
        let paths = (0..n)
            .map(|i| {
                let mut p = vec![i];
                let mut cur = i;
                while let Some(j) = parent[cur] {
                    p.push(j);
                    cur = j;
                }
                p.reverse();
                p
            })
            .collect();
        Ok(Self { parent, reference, screws, body_screws, paths })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// `j ≼ i`.
    pub fn precedes(&self, j: usize, i: usize) -> bool {
        self.paths[i].contains(&j)
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        !self.parent.iter().any(|&p| p == Some(i))
    }

    /// The tree with leaf body `leaf` removed; bodies after it shift down by one.
    pub fn without_leaf(&self, leaf: usize) -> Result<KinematicTree> {
        if leaf >= self.len() || !self.is_leaf(leaf) {
            return Err(Error::Topology(format!("body {leaf} is not a leaf")));
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != leaf).collect();
        let shift = |i: usize| if i > leaf { i - 1 } else { i };
        KinematicTree::new(
            keep.iter().map(|&i| self.parent[i].map(shift)).collect(),
            keep.iter().map(|&i| self.reference[i]).collect(),
            keep.iter().map(|&i| self.screws[i]).collect(),
        )
    }

    /// Poses, world screws and body Jacobians at `theta`.
    pub fn kinematics(&self, theta: &DVector<f64>) -> KinematicsCache {
        let n = self.len();
        assert_eq!(theta.len(), n, "joint vector length");
        let mut joint_poses: Vec<Pose> = Vec::with_capacity(n);
        let mut spatial = Vec::with_capacity(n);
        for i in 0..n {
            let parent = self.parent[i].map_or_else(Pose::identity, |p| joint_poses[p]);
            spatial.push(parent.act(&self.screws[i].coords));
            joint_poses.push(parent * exp_screw(&self.screws[i], theta[i]));
        }
        let poses: Vec<Pose> = joint_poses.iter().zip(&self.reference).map(|(p, a)| *p * *a).collect();
        let jacobians = (0..n)
            .map(|i| {
                let mut j = DMatrix::zeros(6, n);
                for &k in &self.paths[i] {
                    j.set_column(k, &poses[i].act_inv(&spatial[k]));
                }
                j
            })
            .collect();
        KinematicsCache { theta: theta.clone(), joint_poses, poses, spatial, jacobians }
    }

    /// Column form `J̇_{i,j} = Σ_{j≺k≼i} ad(J_{i,j}) J_{i,k} ϑ̇_k` for every body.
    pub fn jacobian_dots(&self, cache: &KinematicsCache, theta_dot: &DVector<f64>) -> Vec<DMatrix<f64>> {
        (0..self.len()).map(|i| self.jacobian_dot(cache, theta_dot, i)).collect()
    }

    pub fn jacobian_dot(&self, cache: &KinematicsCache, theta_dot: &DVector<f64>, i: usize) -> DMatrix<f64> {
        let n = self.len();
        let j = &cache.jacobians[i];
        let path = &self.paths[i];
        let mut out = DMatrix::zeros(6, n);
        // Suffix sums of J_{i,k} ϑ̇_k along the path.
        let mut acc = Vec6::zeros();
        for &k in path.iter().rev() {
            let col: Vec6 = j.fixed_view::<6, 1>(0, k).into_owned();
            out.set_column(k, &(ad(&col) * acc));
            acc += col * theta_dot[k];
        }
        out
    }

    /// Block-triangular `A` (6n×6n) and block-diagonal `X` (6n×n) with `J = A X`.
    pub fn system_factors(&self, cache: &KinematicsCache) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.len();
        let mut a = DMatrix::zeros(6 * n, 6 * n);
        let mut x = DMatrix::zeros(6 * n, n);
        for i in 0..n {
            let ci_inv = cache.poses[i].inverse();
            for &j in &self.paths[i] {
                let cij = ci_inv * cache.poses[j];
                a.view_mut((6 * i, 6 * j), (6, 6)).copy_from(&cij.adjoint());
            }
            x.view_mut((6 * i, i), (6, 1)).copy_from(&self.body_screws[i]);
        }
        (a, x)
    }

    /// `a = diag(ϑ̇_i ad_{X_i})`.
    pub fn rate_ad(&self, theta_dot: &DVector<f64>) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::zeros(6 * n, 6 * n);
        for i in 0..n {
            a.view_mut((6 * i, 6 * i), (6, 6)).copy_from(&(ad(&self.body_screws[i]) * theta_dot[i]));
        }
        a
    }
}

/// Kinematic quantities of a tree at one configuration.
#[derive(Clone, Debug)]
pub struct KinematicsCache {
    pub theta: DVector<f64>,
    /// `P_i = P_{parent} exp(ϑ_i Y_i)`.
    pub joint_poses: Vec<Pose>,
    /// Body poses `C_i = P_i A_i`.
    pub poses: Vec<Pose>,
    /// Current joint screws in the inertial frame, `S_i = Ad(P_{i-1}) Y_i`.
    pub spatial: Vec<Vec6>,
    /// Body-fixed Jacobians `J_i` (6×n).
    pub jacobians: Vec<DMatrix<f64>>,
}

impl KinematicsCache {
    /// Stacked system Jacobian (6n×n).
    pub fn system_jacobian(&self) -> DMatrix<f64> {
        let n = self.jacobians.len();
        let cols = self.theta.len();
        let mut j = DMatrix::zeros(6 * n, cols);
        for (i, ji) in self.jacobians.iter().enumerate() {
            j.view_mut((6 * i, 0), (6, cols)).copy_from(ji);
        }
        j
    }

    /// Body twist `V_k = J_k ϑ̇` and its rate `V̇_k = J_k ϑ̈ + J̇_k ϑ̇`.
    pub fn body_twist_and_acc(
        &self,
        tree: &KinematicTree,
        k: usize,
        theta_dot: &DVector<f64>,
        theta_ddot: &DVector<f64>,
    ) -> (Twist, Vec6) {
        let j = &self.jacobians[k];
        let jd = tree.jacobian_dot(self, theta_dot, k);
        let v = j * theta_dot;
        let a = j * theta_ddot + jd * theta_dot;
        (Vec6::from_column_slice(v.as_slice()), Vec6::from_column_slice(a.as_slice()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{log_pose, screw_from_geometry, ScrewKind};
    use nalgebra::Vector3;

    pub(crate) fn sample_tree() -> KinematicTree {
        let axes = [
            (Vector3::z(), Vector3::zeros(), ScrewKind::Revolute),
            (Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.3, 0.0, 0.1), ScrewKind::Revolute),
            (Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.3, 0.2, 0.1), ScrewKind::Prismatic),
            (Vector3::new(0.6, 0.0, 0.8), Vector3::new(0.5, 0.0, 0.4), ScrewKind::Revolute),
            (Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.1, 0.4, 0.0), ScrewKind::Helical(0.02)),
        ];
        let screws = axes.iter().map(|(e, y, k)| screw_from_geometry(e, y, *k).unwrap()).collect();
        let reference = (0..5)
            .map(|i| Pose::new(crate::se3::so3_exp(&Vector3::new(0.1 * i as f64, -0.2, 0.3)), Vector3::new(0.1 * i as f64, 0.05, 0.2)))
            .collect();
        KinematicTree::new(vec![None, Some(0), Some(1), Some(1), Some(0)], reference, screws).unwrap()
    }

    fn state() -> (DVector<f64>, DVector<f64>) {
        (
            DVector::from_vec(vec![0.3, -0.8, 0.15, 1.2, -0.4]),
            DVector::from_vec(vec![0.7, 0.2, -0.5, 1.1, 0.9]),
        )
    }

    #[test]
    fn zero_configuration_gives_references() {
        let t = sample_tree();
        let c = t.kinematics(&DVector::zeros(5));
        for i in 0..5 {
            assert!((c.poses[i].homogeneous() - t.reference[i].homogeneous()).abs().max() < 1e-15);
            let own = c.jacobians[i].column(i).into_owned();
            assert!((own - DVector::from_column_slice(t.body_screws[i].as_slice())).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let t = sample_tree();
        let (th, _) = state();
        let c = t.kinematics(&th);
        let eps = 1e-6;
        for j in 0..5 {
            let mut tp = th.clone();
            let mut tm = th.clone();
            tp[j] += eps;
            tm[j] -= eps;
            let (cp, cm) = (t.kinematics(&tp), t.kinematics(&tm));
            for i in 0..5 {
                let fd = (log_pose(&(c.poses[i].inverse() * cp.poses[i])) - log_pose(&(c.poses[i].inverse() * cm.poses[i])))
                    / (2.0 * eps);
                let col = c.jacobians[i].column(j);
                for r in 0..6 {
                    assert!((fd[r] - col[r]).abs() < 1e-6, "i{i} j{j} r{r} {} {}", fd[r], col[r]);
                }
                if !t.precedes(j, i) {
                    assert_eq!(col.norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn jacobian_dot_forms_agree() {
        let t = sample_tree();
        let (th, thd) = state();
        let c = t.kinematics(&th);
        let eps = 1e-6;
        let cp = t.kinematics(&(&th + &thd * eps));
        let cm = t.kinematics(&(&th - &thd * eps));
        let jd = t.jacobian_dots(&c, &thd);
        let (a, x) = t.system_factors(&c);
        let jsys = &a * &x;
        assert!((&jsys - c.system_jacobian()).abs().max() < 1e-14);
        let jdsys = -&a * t.rate_ad(&thd) * &jsys;
        for i in 0..5 {
            let fd = (&cp.jacobians[i] - &cm.jacobians[i]) / (2.0 * eps);
            assert!((&fd - &jd[i]).abs().max() < 1e-6);
            assert!((jdsys.view((6 * i, 0), (6, 5)) - &jd[i]).abs().max() < 1e-12);
        }
    }

    #[test]
    fn removing_a_leaf() {
        let t = sample_tree();
        let s = t.without_leaf(2).unwrap();
        assert_eq!(s.parent, vec![None, Some(0), Some(1), Some(0)]);
        assert!(t.without_leaf(1).is_err());
    }
}
