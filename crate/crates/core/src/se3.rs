//! Rigid-body primitives on SE(3).
//!
//! Twists are stored angular-first `(ω, v)`, wrenches torque-first `(τ, f)`,
//! so that `Wᵀ V` is the power. Poses are `(R, r)` pairs.

use std::ops::Mul;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};

pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;
/// Body twist `(ω, v)`.
pub type Twist = Vector6<f64>;
/// Wrench `(τ, f)`.
pub type Wrench = Vector6<f64>;

/// Below this angle the Rodrigues coefficients use their power series.
pub const SERIES_ANGLE: f64 = 1e-2;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

pub fn angular(x: &Vec6) -> Vector3<f64> {
    x.fixed_rows::<3>(0).into_owned()
}

pub fn linear(x: &Vec6) -> Vector3<f64> {
    x.fixed_rows::<3>(3).into_owned()
}

pub fn twist(omega: &Vector3<f64>, v: &Vector3<f64>) -> Vec6 {
    Vec6::new(omega.x, omega.y, omega.z, v.x, v.y, v.z)
}

fn blocks(a: &Matrix3<f64>, b: &Matrix3<f64>, c: &Matrix3<f64>, d: &Matrix3<f64>) -> Mat6 {
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(a);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(b);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(c);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(d);
    m
}

/// Rigid-body configuration: rotation `R` and position `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rot: Matrix3<f64>,
    pub pos: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rot: Matrix3<f64>, pos: Vector3<f64>) -> Self {
        Self { rot, pos }
    }

    pub fn identity() -> Self {
        Self { rot: Matrix3::identity(), pos: Vector3::zeros() }
    }

    pub fn from_translation(pos: Vector3<f64>) -> Self {
        Self { rot: Matrix3::identity(), pos }
    }

    pub fn from_rotation(rot: Matrix3<f64>) -> Self {
        Self { rot, pos: Vector3::zeros() }
    }

    /// Rotation by `angle` about the unit vector `axis` through the origin.
    pub fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Self {
        Self::from_rotation(so3_exp(&(axis.normalize() * angle)))
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rot.transpose();
        Self { rot: rt, pos: -(rt * self.pos) }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rot * p + self.pos
    }

    pub fn homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rot);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.pos);
        m
    }

    /// `Ad_C = [[R, 0], [r̃R, R]]`.
    pub fn adjoint(&self) -> Mat6 {
        let rr = skew(&self.pos) * self.rot;
        blocks(&self.rot, &Matrix3::zeros(), &rr, &self.rot)
    }

    /// `Ad_C⁻¹ = Ad_{C⁻¹}`.
    pub fn adjoint_inv(&self) -> Mat6 {
        let rt = self.rot.transpose();
        let c = -rt * skew(&self.pos);
        blocks(&rt, &Matrix3::zeros(), &c, &rt)
    }

    /// `Ad_C X` without forming the 6×6 matrix.
    pub fn act(&self, x: &Vec6) -> Vec6 {
        let w = self.rot * angular(x);
        let v = self.pos.cross(&w) + self.rot * linear(x);
        twist(&w, &v)
    }

    /// `Ad_C⁻¹ X` without forming the 6×6 matrix.
    pub fn act_inv(&self, x: &Vec6) -> Vec6 {
        let rt = self.rot.transpose();
        let w = angular(x);
        let v = linear(x) - self.pos.cross(&w);
        twist(&(rt * w), &(rt * v))
    }

    /// Orthonormality and orientation check.
    pub fn is_valid(&self, tol: f64) -> bool {
        let ortho = (self.rot.transpose() * self.rot - Matrix3::identity()).abs().max();
        ortho <= tol && (self.rot.determinant() - 1.0).abs() <= tol
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Pose { rot: self.rot * rhs.rot, pos: self.rot * rhs.pos + self.pos }
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        Pose { rot: self.rot * rhs.rot, pos: self.rot * rhs.pos + self.pos }
    }
}

/// Coefficients `(sin t / t, (1 - cos t)/t², (t - sin t)/t³)` of the
/// Rodrigues-type formulas.
fn rodrigues_coeffs(t: f64) -> (f64, f64, f64) {
    if t < SERIES_ANGLE {
        let t2 = t * t;
        let t4 = t2 * t2;
        (
            1.0 - t2 / 6.0 + t4 / 120.0 - t4 * t2 / 5040.0,
            0.5 - t2 / 24.0 + t4 / 720.0 - t4 * t2 / 40320.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t4 * t2 / 362880.0,
        )
    } else {
        let s = t.sin();
        let h = (0.5 * t).sin();
        (s / t, 2.0 * h * h / (t * t), (t - s) / (t * t * t))
    }
}

/// Exponential of `φ̃` on SO(3).
pub fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let t = phi.norm();
    let k = skew(phi);
    let (a, b, _) = rodrigues_coeffs(t);
    Matrix3::identity() + k * a + k * k * b
}

/// Differential of the SO(3) exponential, `dexp_φ = I + (1-cos t)/t² φ̃ + (t-sin t)/t³ φ̃²`.
///
/// With `R = exp(φ̃)`, the body-fixed angular velocity is `dexp_{-φ} φ̇`.
pub fn so3_dexp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let t = phi.norm();
    let k = skew(phi);
    let (_, b, c) = rodrigues_coeffs(t);
    Matrix3::identity() + k * b + k * k * c
}

/// Rotation vector of `R` with angle in `[0, π]`.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let w = unskew(&(r - r.transpose())) * 0.5;
    let sin = w.norm();
    let t = sin.atan2(cos);
    if t < 1e-4 {
        return w * (1.0 + t * t / 6.0);
    }
    if std::f64::consts::PI - t < 1e-4 {
        // sin t → 0: recover the axis from the symmetric part.
        let b = (r + Matrix3::identity()) * 0.5;
        let i = (0..3).max_by(|&a, &c| b[(a, a)].total_cmp(&b[(c, c)])).unwrap_or(0);
        let mut axis = b.column(i).into_owned();
        axis.normalize_mut();
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
        return axis * t;
    }
    w * (t / sin)
}

/// Exponential of a general twist coordinate vector `ξ = (ω, v)`.
pub fn exp_twist(xi: &Vec6) -> Pose {
    let phi = angular(xi);
    let v = linear(xi);
    let rot = so3_exp(&phi);
    let pos = so3_dexp(&phi) * v;
    Pose { rot, pos }
}

/// Twist coordinates `ξ` with `exp(ξ) = C`.
pub fn log_pose(c: &Pose) -> Vec6 {
    let phi = so3_log(&c.rot);
    let t = phi.norm();
    let k = skew(&phi);
    let coef = if t < 1e-2 {
        let t2 = t * t;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let h = 0.5 * t;
        (1.0 - h / h.tan()) / (t * t)
    };
    let vinv = Matrix3::identity() - k * 0.5 + k * k * coef;
    twist(&phi, &(vinv * c.pos))
}

/// Lie bracket matrix `ad_X = [[ξ̃, 0], [η̃, ξ̃]]` for `X = (ξ, η)`.
pub fn ad(x: &Vec6) -> Mat6 {
    let w = skew(&angular(x));
    let v = skew(&linear(x));
    blocks(&w, &Matrix3::zeros(), &v, &w)
}

/// `G(V) = -ad_Vᵀ = [[ω̃, ṽ], [0, ω̃]]`.
pub fn gyroscopic_matrix(v: &Twist) -> Mat6 {
    let w = skew(&angular(v));
    let l = skew(&linear(v));
    blocks(&w, &l, &Matrix3::zeros(), &w)
}

/// Joint type behind a screw axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScrewKind {
    Revolute,
    Prismatic,
    /// Pitch in m/rad.
    Helical(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScrewFrame {
    /// Represented in the inertial frame at the zero reference (`Y`).
    Spatial,
    /// Represented in the body-fixed frame (`X`).
    Body,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScrewAxis {
    pub coords: Vec6,
    pub frame: ScrewFrame,
    pub kind: ScrewKind,
}

impl ScrewAxis {
    /// Checks the normalization implied by the joint kind.
    pub fn validate(&self) -> Result<()> {
        let w = angular(&self.coords).norm();
        let v = linear(&self.coords).norm();
        let ok = match self.kind {
            ScrewKind::Revolute | ScrewKind::Helical(_) => (w - 1.0).abs() < 1e-9,
            ScrewKind::Prismatic => w < 1e-12 && (v - 1.0).abs() < 1e-9,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "screw axis {:?} of kind {:?} is not normalized",
                self.coords.as_slice(),
                self.kind
            )))
        }
    }
}

/// `exp(θ·axis)`.
pub fn exp_screw(axis: &ScrewAxis, theta: f64) -> Pose {
    exp_twist(&(axis.coords * theta))
}

/// Screw coordinates of a joint with axis direction `e` through point `y`.
///
/// Revolute `(e, y×e)`, prismatic `(0, e)`, helical `(e, y×e + h e)`.
pub fn screw_from_geometry(e: &Vector3<f64>, y: &Vector3<f64>, kind: ScrewKind) -> Result<ScrewAxis> {
    let n = e.norm();
    let coords = match kind {
        ScrewKind::Prismatic => {
            if n < 1e-12 {
                return Err(Error::Validation("prismatic axis direction is zero".into()));
            }
            twist(&Vector3::zeros(), &(e / n))
        }
        ScrewKind::Revolute | ScrewKind::Helical(_) => {
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!(
                    "joint axis ({}, {}, {}) is not a unit vector (norm {n})",
                    e.x, e.y, e.z
                )));
            }
            let h = if let ScrewKind::Helical(h) = kind { h } else { 0.0 };
            twist(e, &(y.cross(e) + e * h))
        }
    };
    Ok(ScrewAxis { coords, frame: ScrewFrame::Spatial, kind })
}

/// `X = Ad_A⁻¹ Y`.
pub fn spatial_to_body(y: &ScrewAxis, a: &Pose) -> ScrewAxis {
    ScrewAxis { coords: a.adjoint_inv() * y.coords, frame: ScrewFrame::Body, kind: y.kind }
}

/// `Y = Ad_A X`.
pub fn body_to_spatial(x: &ScrewAxis, a: &Pose) -> ScrewAxis {
    ScrewAxis { coords: a.adjoint() * x.coords, frame: ScrewFrame::Spatial, kind: x.kind }
}

/// Mass properties of a rigid body relative to its body-fixed frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialInertia {
    pub mass: f64,
    /// Center of mass in the body frame.
    pub com: Vector3<f64>,
    /// Inertia tensor about the body-frame origin.
    pub inertia: Matrix3<f64>,
}

impl SpatialInertia {
    pub fn zero() -> Self {
        Self { mass: 0.0, com: Vector3::zeros(), inertia: Matrix3::zeros() }
    }

    /// From the inertia tensor about the center of mass (parallel-axis shift).
    pub fn from_com(mass: f64, com: Vector3<f64>, inertia_com: Matrix3<f64>) -> Self {
        let d = skew(&com);
        Self { mass, com, inertia: inertia_com - d * d * mass }
    }

    /// `[[Θ, m d̃], [-m d̃, m I]]`.
    pub fn matrix(&self) -> Mat6 {
        let md = skew(&self.com) * self.mass;
        blocks(&self.inertia, &md, &(-md), &(Matrix3::identity() * self.mass))
    }

    pub fn validate(&self) -> Result<()> {
        if self.mass < 0.0 || !self.mass.is_finite() {
            return Err(Error::Validation(format!("negative mass {}", self.mass)));
        }
        let sym = (self.inertia - self.inertia.transpose()).abs().max();
        let eig = self.inertia.symmetric_eigenvalues();
        if sym > 1e-12 * (1.0 + self.inertia.abs().max()) || eig.min() < -1e-12 * (1.0 + eig.max().abs()) {
            return Err(Error::Validation("inertia tensor is not symmetric positive semidefinite".into()));
        }
        Ok(())
    }
}

/// Coordinate chart behind the taskspace velocity `V_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskChart {
    /// `x = r`; the platform keeps its reference orientation.
    Translation,
    /// `x = (φ, r_x, r_y)`: rotation about the inertial z-axis and in-plane position.
    Planar,
    /// `x = (φ, r)` with `R = exp(φ̃)`.
    Spatial,
}

impl TaskChart {
    pub fn dim(&self) -> usize {
        match self {
            TaskChart::Translation | TaskChart::Planar => 3,
            TaskChart::Spatial => 6,
        }
    }

    /// Velocity distribution matrix `P_p` (6×δ_p) with `V_p = P_p V_t`.
    pub fn pattern(&self) -> DMatrix<f64> {
        let rows: &[usize] = match self {
            TaskChart::Translation => &[3, 4, 5],
            TaskChart::Planar => &[2, 3, 4],
            TaskChart::Spatial => &[0, 1, 2, 3, 4, 5],
        };
        let mut p = DMatrix::zeros(6, rows.len());
        for (j, &i) in rows.iter().enumerate() {
            p[(i, j)] = 1.0;
        }
        p
    }

    /// `H_t(x)` (δ_p×δ_p) with `V_t = H_t ẋ`.
    ///
    /// `reference` is the platform orientation used by the translation chart.
    pub fn rate_map(&self, x: &DVector<f64>, reference: &Matrix3<f64>) -> Result<DMatrix<f64>> {
        Ok(match self {
            TaskChart::Translation => DMatrix::from_iterator(3, 3, reference.transpose().iter().copied()),
            TaskChart::Planar => {
                let (s, c) = x[0].sin_cos();
                DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c])
            }
            TaskChart::Spatial => {
                let phi = Vector3::new(x[0], x[1], x[2]);
                if phi.norm() > 2.0 * std::f64::consts::PI - 1e-6 {
                    return Err(Error::Singular {
                        what: format!("taskspace chart at rotation angle {}", phi.norm()),
                        cond: f64::INFINITY,
                    });
                }
                let mut m = DMatrix::zeros(6, 6);
                m.view_mut((0, 0), (3, 3)).copy_from(&so3_dexp(&(-phi)));
                m.view_mut((3, 3), (3, 3)).copy_from(&so3_exp(&phi).transpose());
                m
            }
        })
    }

    /// Time derivative of `H_t` along `ẋ`; only charts with closed forms are supported.
    pub fn rate_map_dot(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            TaskChart::Translation => Ok(DMatrix::zeros(3, 3)),
            TaskChart::Planar => {
                let (s, c) = x[0].sin_cos();
                let w = xdot[0];
                Ok(DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, -s * w, c * w, 0.0, -c * w, -s * w]))
            }
            TaskChart::Spatial => Err(Error::Validation(
                "analytic taskspace acceleration is only available for translation and planar charts".into(),
            )),
        }
    }

    /// `H_p(x) = P_p H_t(x)`: maps `ẋ` to the platform twist.
    pub fn velocity_map(&self, x: &DVector<f64>, reference: &Matrix3<f64>) -> Result<DMatrix<f64>> {
        Ok(self.pattern() * self.rate_map(x, reference)?)
    }

    /// Chart coordinates of a platform pose.
    pub fn coordinates(&self, c: &Pose) -> DVector<f64> {
        match self {
            TaskChart::Translation => DVector::from_column_slice(c.pos.as_slice()),
            TaskChart::Planar => {
                let phi = c.rot[(1, 0)].atan2(c.rot[(0, 0)]);
                DVector::from_vec(vec![phi, c.pos.x, c.pos.y])
            }
            TaskChart::Spatial => {
                let phi = so3_log(&c.rot);
                DVector::from_vec(vec![phi.x, phi.y, phi.z, c.pos.x, c.pos.y, c.pos.z])
            }
        }
    }

    /// Error between a target `x` and the current pose, expressed in `V_t` coordinates.
    pub fn error(&self, target: &DVector<f64>, c: &Pose, reference: &Matrix3<f64>) -> DVector<f64> {
        match self {
            TaskChart::Translation => {
                let d = Vector3::new(target[0], target[1], target[2]) - c.pos;
                DVector::from_column_slice((reference.transpose() * d).as_slice())
            }
            TaskChart::Planar => {
                let phi = c.rot[(1, 0)].atan2(c.rot[(0, 0)]);
                let mut dphi = target[0] - phi;
                dphi = (dphi + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
                let (s, co) = phi.sin_cos();
                let dx = target[1] - c.pos.x;
                let dy = target[2] - c.pos.y;
                DVector::from_vec(vec![dphi, co * dx + s * dy, -s * dx + co * dy])
            }
            TaskChart::Spatial => {
                let rt = so3_exp(&Vector3::new(target[0], target[1], target[2]));
                let dphi = so3_log(&(c.rot.transpose() * rt));
                let d = c.rot.transpose() * (Vector3::new(target[3], target[4], target[5]) - c.pos);
                DVector::from_vec(vec![dphi.x, dphi.y, dphi.z, d.x, d.y, d.z])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_exp(xi: &Vec6) -> Matrix4<f64> {
        let mut x = Matrix4::zeros();
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&angular(xi)));
        x.fixed_view_mut::<3, 1>(0, 3).copy_from(&linear(xi));
        let mut term = Matrix4::identity();
        let mut sum = Matrix4::identity();
        for k in 1..=20 {
            term = term * x / k as f64;
            sum += term;
        }
        sum
    }

    fn sample_pose(a: f64) -> Pose {
        exp_twist(&Vec6::new(0.3 * a, -0.7, 0.2 + a, 1.0, -0.4 * a, 0.25))
    }

    #[test]
    fn exp_identity_and_translation() {
        let y = screw_from_geometry(&Vector3::z(), &Vector3::zeros(), ScrewKind::Revolute).unwrap();
        assert_eq!(exp_screw(&y, 0.0), Pose::identity());
        let p = screw_from_geometry(&Vector3::z(), &Vector3::zeros(), ScrewKind::Prismatic).unwrap();
        let c = exp_screw(&p, 0.5);
        assert_eq!(c.rot, Matrix3::identity());
        assert!((c.pos - Vector3::new(0.0, 0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn exp_matches_series() {
        let y = screw_from_geometry(&Vector3::new(0.0, -1.0, 0.0), &Vector3::new(-0.15, 0.0, 0.0), ScrewKind::Revolute)
            .unwrap();
        let c = exp_screw(&y, std::f64::consts::FRAC_PI_2);
        assert!((c.homogeneous() - series_exp(&(y.coords * std::f64::consts::FRAC_PI_2))).abs().max() < 1e-12);
        let xi = Vec6::new(1e-9, -2e-9, 3e-9, 0.1, 0.2, 0.3);
        assert!((exp_twist(&xi).homogeneous() - series_exp(&xi)).abs().max() < 1e-15);
    }

    #[test]
    fn log_inverts_exp() {
        for xi in [
            Vec6::new(0.1, 0.2, -0.3, 1.0, 2.0, 3.0),
            Vec6::new(0.0, 0.0, 3.1, 0.5, 0.0, 0.0),
            Vec6::new(1e-9, 0.0, 0.0, 0.5, 0.1, 0.0),
            Vec6::new(0.0, 3.14159, 0.0, 0.0, 0.0, 1.0),
        ] {
            let back = log_pose(&exp_twist(&xi));
            assert!((back - xi).norm() < 1e-9, "{xi:?} -> {back:?}");
        }
    }

    #[test]
    fn adjoint_blocks_and_homomorphism() {
        assert_eq!(Pose::identity().adjoint(), Mat6::identity());
        let t = Pose::from_translation(Vector3::x());
        let ad_t = t.adjoint();
        assert_eq!(ad_t.fixed_view::<3, 3>(3, 0).into_owned(), skew(&Vector3::x()));
        let (c1, c2) = (sample_pose(0.4), sample_pose(-1.3));
        assert!(((c1 * c2).adjoint() - c1.adjoint() * c2.adjoint()).abs().max() < 1e-12);
        assert!((c1.adjoint_inv() * c1.adjoint() - Mat6::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn small_ad_properties() {
        assert_eq!(ad(&Vec6::zeros()), Mat6::zeros());
        let x = Vec6::new(0.3, -1.0, 2.0, 0.5, 0.1, -0.7);
        let y = Vec6::new(-0.2, 0.4, 1.1, 2.0, -0.3, 0.9);
        assert!((ad(&x) * x).norm() < 1e-14);
        assert!((ad(&x) * y + ad(&y) * x).norm() < 1e-14);
        assert_eq!(gyroscopic_matrix(&x), -ad(&x).transpose());
        let g = gyroscopic_matrix(&Vec6::new(0.0, 0.0, 0.0, 1.0, 2.0, 3.0));
        assert_eq!(g.fixed_view::<3, 3>(0, 3).into_owned(), skew(&Vector3::new(1.0, 2.0, 3.0)));
        assert_eq!(g.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::zeros());
    }

    #[test]
    fn screw_geometry_examples() {
        let y1 = screw_from_geometry(&Vector3::new(0.0, -1.0, 0.0), &Vector3::new(-0.15, 0.0, 0.0), ScrewKind::Revolute)
            .unwrap();
        assert!((y1.coords - Vec6::new(0.0, -1.0, 0.0, 0.0, 0.0, 0.15)).norm() < 1e-15);
        let z = screw_from_geometry(&Vector3::z(), &Vector3::zeros(), ScrewKind::Revolute).unwrap();
        assert_eq!(z.coords, Vec6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0));
        let hel = screw_from_geometry(&Vector3::z(), &Vector3::zeros(), ScrewKind::Helical(0.01)).unwrap();
        assert_eq!(hel.coords[5], 0.01);
        assert!(screw_from_geometry(&Vector3::new(0.0, 2.0, 0.0), &Vector3::zeros(), ScrewKind::Revolute).is_err());
    }

    #[test]
    fn body_spatial_round_trip() {
        let y = screw_from_geometry(&Vector3::new(0.6, 0.0, 0.8), &Vector3::new(0.1, -0.2, 0.3), ScrewKind::Revolute)
            .unwrap();
        let a = sample_pose(0.7);
        let back = body_to_spatial(&spatial_to_body(&y, &a), &a);
        assert!((back.coords - y.coords).norm() < 1e-12);
        assert_eq!(spatial_to_body(&y, &Pose::identity()).coords, y.coords);
    }

    #[test]
    fn spatial_inertia_layout() {
        let m = SpatialInertia::from_com(2.0, Vector3::new(0.1, 0.0, -0.2), Matrix3::from_diagonal(&Vector3::new(0.1, 0.2, 0.3)));
        let mm = m.matrix();
        assert_eq!(mm, mm.transpose());
        assert_eq!(mm.fixed_view::<3, 3>(3, 3).into_owned(), Matrix3::identity() * 2.0);
        m.validate().unwrap();
    }

    #[test]
    fn chart_maps() {
        let x = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let hp = TaskChart::Translation.velocity_map(&x, &Matrix3::identity()).unwrap();
        for j in 0..3 {
            assert_eq!(hp[(3 + j, j)], 1.0);
            assert_eq!(hp.column(j).sum(), 1.0);
        }
        let zero = DVector::zeros(6);
        let h = TaskChart::Spatial.rate_map(&zero, &Matrix3::identity()).unwrap();
        assert_eq!(h, DMatrix::identity(6, 6));

        // Finite-difference check of V_p = H_p ẋ for the spatial chart.
        let x = DVector::from_vec(vec![0.0, 0.0, std::f64::consts::FRAC_PI_4, 0.1, 0.2, 0.3]);
        let hp = TaskChart::Spatial.velocity_map(&x, &Matrix3::identity()).unwrap();
        let pose_of = |x: &DVector<f64>| Pose {
            rot: so3_exp(&Vector3::new(x[0], x[1], x[2])),
            pos: Vector3::new(x[3], x[4], x[5]),
        };
        let c0 = pose_of(&x);
        let eps = 1e-6;
        for j in 0..6 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += eps;
            xm[j] -= eps;
            let dp = log_pose(&(c0.inverse() * pose_of(&xp)));
            let dm = log_pose(&(c0.inverse() * pose_of(&xm)));
            let fd = (dp - dm) / (2.0 * eps);
            for i in 0..6 {
                assert!((fd[i] - hp[(i, j)]).abs() < 1e-6, "({i},{j}) {} vs {}", fd[i], hp[(i, j)]);
            }
        }
        let singular = DVector::from_vec(vec![0.0, 0.0, 2.0 * std::f64::consts::PI, 0.0, 0.0, 0.0]);
        assert!(matches!(TaskChart::Spatial.rate_map(&singular, &Matrix3::identity()), Err(Error::Singular { .. })));
    }
}
