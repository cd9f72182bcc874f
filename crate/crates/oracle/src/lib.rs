//! Maximal-coordinate reference solver for inverse dynamics.
//!
//! Every body carries its center-of-mass position and world rotation. Joints
//! are algebraic constraints (point coincidence and axis alignment), bodies
//! obey Newton-Euler equations at the center of mass in world axes, and the
//! actuator forces follow from projecting these equations onto the admissible
//! velocities. Only the model file, its unit normalization and the inertia
//! primitives are shared with the main library.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use pkmdyn::models::{ChartSpec, InertiaSpec, JointKind, ModelFile};
use pkmdyn::se3::Pose;

/// Position residual tolerance of the Newton projection.
pub const POSITION_TOL: f64 = 1e-13;
const MAX_ITER: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("position solve did not converge (residual {0:.3e})")]
    Divergence(f64),
    #[error("rank-deficient {0}")]
    Singular(String),
}

impl From<pkmdyn::Error> for OracleError {
    fn from(e: pkmdyn::Error) -> Self {
        OracleError::Model(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, OracleError>;

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues formula.
fn rot_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let t = w.norm();
    let k = skew(w);
    if t < 1e-12 {
        return Matrix3::identity() + k + k * k * 0.5;
    }
    Matrix3::identity() + k * (t.sin() / t) + k * k * ((1.0 - t.cos()) / (t * t))
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Two unit vectors perpendicular to `e` and to each other.
fn perpendiculars(e: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let k = e.iamin();
    let mut t = Vector3::zeros();
    t[k] = 1.0;
    let u1 = (t - e * e.dot(&t)).normalize();
    [u1, e.cross(&u1)]
}

#[derive(Clone, Debug)]
struct Body {
    name: String,
    mass: f64,
    /// Center of mass in the body frame.
    com: Vector3<f64>,
    /// Inertia about the center of mass in body axes.
    ic: Matrix3<f64>,
    /// Reference frame pose.
    reference: Pose,
}

/// Revolute joint between bodies `a` (parent) and `b` (child); `None` is ground.
#[derive(Clone, Debug)]
struct Joint {
    name: String,
    a: Option<usize>,
    b: Option<usize>,
    /// Joint point relative to the center of mass of `a` in `a` axes (world point for ground).
    sa: Vector3<f64>,
    sb: Vector3<f64>,
    /// Axis in `a` axes and its two perpendiculars.
    ea: Vector3<f64>,
    ua: [Vector3<f64>; 2],
    /// Axis in `b` axes.
    eb: Vector3<f64>,
    actuated: bool,
}

/// Body state: world rotation and center-of-mass position.
#[derive(Clone, Debug)]
struct State {
    r: Vec<Matrix3<f64>>,
    p: Vec<Vector3<f64>>,
}

/// Result of one inverse-dynamics evaluation.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub u: DVector<f64>,
    /// Largest constraint residual after the position solve.
    pub residual: f64,
    /// Largest violation of the velocity constraints.
    pub velocity_residual: f64,
}

/// Maximal-coordinate model with a warm-started position state.
#[derive(Clone, Debug)]
pub struct Oracle {
    bodies: Vec<Body>,
    joints: Vec<Joint>,
    platform: usize,
    chart: ChartSpec,
    platform_reference: Pose,
    gravity: Vector3<f64>,
    state: State,
    actuators: Vec<String>,
}

fn inertia_of(spec: &InertiaSpec) -> Result<(f64, Vector3<f64>, Matrix3<f64>)> {
    Ok(match spec {
        InertiaSpec::None => (0.0, Vector3::zeros(), Matrix3::zeros()),
        InertiaSpec::Primitive(p) => (p.mass_value()?, Vector3::from(p.center), p.central_inertia()?),
        InertiaSpec::Explicit(e) => {
            let i = &e.inertia;
            (e.mass, Vector3::from(e.com), Matrix3::from_fn(|r, c| i[r][c]))
        }
    })
}

impl Oracle {
    /// Builds the maximal-coordinate model of all limb instances; revolute joints only.
    pub fn from_model(file: &ModelFile) -> Result<Self> {
        let m = file.normalized();
        if m.taskspace.chart == ChartSpec::Spatial {
            return Err(OracleError::Unsupported("spatial chart".into()));
        }
        let platform_reference = m.platform.pose.to_pose("platform")?;
        let instances: Vec<(String, Pose, usize)> = if m.mounts.is_empty() {
            m.limbs.iter().enumerate().map(|(i, l)| (l.name.clone(), Pose::identity(), i)).collect()
        } else {
            let mut out = Vec::new();
            for (k, ms) in m.mounts.iter().enumerate() {
                let base = ms.base.to_pose("mount base")?;
                let plat = ms.platform.to_pose("mount platform")?;
                let rep = m.limbs.iter().position(|l| l.name == ms.limb).ok_or_else(|| {
                    OracleError::Model(format!("mount {k} refers to unknown limb {}", ms.limb))
                })?;
                let stamped = base * platform_reference * plat.inverse();
                let err = (stamped.rot - platform_reference.rot).amax() + (stamped.pos - platform_reference.pos).amax();
                if err > 1e-9 {
                    return Err(OracleError::Model(format!("mount {k} does not map the platform onto itself")));
                }
                let n = m.mounts[..=k].iter().filter(|x| x.limb == ms.limb).count();
                out.push((format!("{}{}", ms.limb, n), base, rep));
            }
            out
        };
        let mut bodies = Vec::new();
        let mut joints = Vec::new();
        let mut actuators = Vec::new();
        let mut staged = Vec::new();
        for (inst, base, li) in &instances {
            let limb = &m.limbs[*li];
            let first = bodies.len();
            for bn in &limb.bodies {
                let b = m
                    .bodies
                    .iter()
                    .find(|b| &b.name == bn)
                    .ok_or_else(|| OracleError::Model(format!("unknown body {bn}")))?;
                let (mass, com, ic) = inertia_of(&b.inertia)?;
                bodies.push(Body {
                    name: format!("{inst}.{}", b.name),
                    mass,
                    com,
                    ic,
                    reference: *base * b.pose.to_pose("body")?,
                });
            }
            staged.push((inst.clone(), *base, limb.clone(), first));
        }
        let platform = bodies.len();
        let (pm, pc, pi) = inertia_of(&m.platform.inertia)?;
        bodies.push(Body { name: m.platform.name.clone(), mass: pm, com: pc, ic: pi, reference: platform_reference });
        for (inst, base, limb, first) in staged {
            let index = |name: &str| -> Result<Option<usize>> {
                if name == pkmdyn::models::GROUND_NAME {
                    Ok(None)
                } else if name == m.platform.name {
                    Ok(Some(platform))
                } else {
                    limb.bodies
                        .iter()
                        .position(|b| b == name)
                        .map(|k| Some(first + k))
                        .ok_or_else(|| OracleError::Model(format!("joint body {name} not in limb {}", limb.name)))
                }
            };
            for jn in &limb.joints {
                let j = m
                    .joints
                    .iter()
                    .find(|j| &j.name == jn)
                    .ok_or_else(|| OracleError::Model(format!("unknown joint {jn}")))?;
                if j.kind != JointKind::Revolute {
                    return Err(OracleError::Unsupported(format!("joint {} of kind {:?}", j.name, j.kind)));
                }
                let y = base.transform_point(&Vector3::from(j.point));
                let e = (base.rot * Vector3::from(j.axis)).normalize();
                let a = index(&j.parent)?;
                let b = index(&j.child)?;
                let local = |body: Option<usize>| -> (Vector3<f64>, Vector3<f64>) {
                    match body {
                        None => (y, e),
                        Some(i) => {
                            let r = &bodies[i].reference;
                            (r.rot.transpose() * (y - r.pos) - bodies[i].com, r.rot.transpose() * e)
                        }
                    }
                };
                let (sa, ea) = local(a);
                let (sb, eb) = local(b);
                if j.actuated {
                    actuators.push(format!("{inst}.{}", j.name));
                }
                joints.push(Joint {
                    name: format!("{inst}.{}", j.name),
                    a,
                    b,
                    sa,
                    sb,
                    ea,
                    ua: perpendiculars(&ea),
                    eb,
                    actuated: j.actuated,
                });
            }
        }
        let state = State {
            r: bodies.iter().map(|b| b.reference.rot).collect(),
            p: bodies.iter().map(|b| b.reference.pos + b.reference.rot * b.com).collect(),
        };
        let o = Self {
            bodies,
            joints,
            platform,
            chart: m.taskspace.chart,
            platform_reference,
            gravity: Vector3::from(m.gravity),
            state,
            actuators,
        };
        let r = o.residual(&o.state);
        if r > 1e-9 {
            return Err(OracleError::Model(format!("joints do not close at the reference (residual {r:.3e})")));
        }
        Ok(o)
    }

    /// Actuated joints as `instance.joint` in the order of `u`.
    pub fn actuator_names(&self) -> &[String] {
        &self.actuators
    }

    pub fn body_count(&self) -> usize {
        self.bodies.len()
    }

    pub fn body_names(&self) -> Vec<&str> {
        self.bodies.iter().map(|b| b.name.as_str()).collect()
    }

    pub fn joint_names(&self) -> Vec<&str> {
        self.joints.iter().map(|j| j.name.as_str()).collect()
    }

    /// Number of constraint rows (five per revolute joint).
    pub fn constraint_count(&self) -> usize {
        5 * self.joints.len()
    }

    /// Platform frame pose, frame velocity terms and their derivatives from chart data:
    /// `(R, o, ω, ȯ, α, ö)` in world axes.
    #[allow(clippy::type_complexity)]
    fn platform_motion(
        &self,
        x: &DVector<f64>,
        xd: &DVector<f64>,
        xdd: &DVector<f64>,
    ) -> (Matrix3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        match self.chart {
            ChartSpec::Planar => (
                rot_z(x[0]),
                Vector3::new(x[1], x[2], self.platform_reference.pos.z),
                Vector3::new(0.0, 0.0, xd[0]),
                Vector3::new(xd[1], xd[2], 0.0),
                Vector3::new(0.0, 0.0, xdd[0]),
                Vector3::new(xdd[1], xdd[2], 0.0),
            ),
            _ => (
                self.platform_reference.rot,
                Vector3::new(x[0], x[1], x[2]),
                Vector3::zeros(),
                Vector3::new(xd[0], xd[1], xd[2]),
                Vector3::zeros(),
                Vector3::new(xdd[0], xdd[1], xdd[2]),
            ),
        }
    }

    fn anchors(&self, s: &State, j: &Joint) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        // World anchor offsets ra, rb and points pa, pb.
        let (ra, pa) = match j.a {
            None => (Vector3::zeros(), j.sa),
            Some(i) => {
                let r = s.r[i] * j.sa;
                (r, s.p[i] + r)
            }
        };
        let (rb, pb) = match j.b {
            None => (Vector3::zeros(), j.sb),
            Some(i) => {
                let r = s.r[i] * j.sb;
                (r, s.p[i] + r)
            }
        };
        (ra, pa, rb, pb)
    }

    fn axes(&self, s: &State, j: &Joint) -> ([Vector3<f64>; 2], Vector3<f64>) {
        let ra = j.a.map_or(Matrix3::identity(), |i| s.r[i]);
        let rb = j.b.map_or(Matrix3::identity(), |i| s.r[i]);
        ([ra * j.ua[0], ra * j.ua[1]], rb * j.eb)
    }

    /// Constraint values `Φ`.
    fn phi(&self, s: &State) -> DVector<f64> {
        let mut f = DVector::zeros(self.constraint_count());
        for (k, j) in self.joints.iter().enumerate() {
            let (_, pa, _, pb) = self.anchors(s, j);
            f.fixed_rows_mut::<3>(5 * k).copy_from(&(pa - pb));
            let (u, e) = self.axes(s, j);
            f[5 * k + 3] = u[0].dot(&e);
            f[5 * k + 4] = u[1].dot(&e);
        }
        f
    }

    fn residual(&self, s: &State) -> f64 {
        self.phi(s).amax()
    }

    /// Constraint Jacobian with respect to `(δp, δφ)` of every body.
    fn jacobian(&self, s: &State) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.constraint_count(), 6 * self.bodies.len());
        for (k, jn) in self.joints.iter().enumerate() {
            let (ra, _, rb, _) = self.anchors(s, jn);
            let (u, e) = self.axes(s, jn);
            let row = 5 * k;
            if let Some(i) = jn.a {
                jac.view_mut((row, 6 * i), (3, 3)).copy_from(&Matrix3::identity());
                jac.view_mut((row, 6 * i + 3), (3, 3)).copy_from(&(-skew(&ra)));
                for c in 0..2 {
                    let w = u[c].cross(&e);
                    jac.view_mut((row + 3 + c, 6 * i + 3), (1, 3)).copy_from(&w.transpose());
                }
            }
            if let Some(i) = jn.b {
                jac.view_mut((row, 6 * i), (3, 3)).copy_from(&(-Matrix3::identity()));
                jac.view_mut((row, 6 * i + 3), (3, 3)).copy_from(&skew(&rb));
                for c in 0..2 {
                    let w = u[c].cross(&e);
                    jac.view_mut((row + 3 + c, 6 * i + 3), (1, 3)).copy_from(&(-w.transpose()));
                }
            }
        }
        jac
    }

    /// `γ = −Φ̇_q v` (acceleration right-hand side without the `Φ_q a` term).
    fn gamma(&self, s: &State, v: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.constraint_count());
        let w = |b: Option<usize>| b.map_or(Vector3::zeros(), |i| v.fixed_rows::<3>(6 * i + 3).into_owned());
        for (k, jn) in self.joints.iter().enumerate() {
            let (ra, _, rb, _) = self.anchors(s, jn);
            let (wa, wb) = (w(jn.a), w(jn.b));
            let lin = -wa.cross(&wa.cross(&ra)) + wb.cross(&wb.cross(&rb));
            g.fixed_rows_mut::<3>(5 * k).copy_from(&lin);
            let (u, e) = self.axes(s, jn);
            for c in 0..2 {
                let d = wa.cross(&u[c]).cross(&e) + u[c].cross(&wb.cross(&e));
                g[5 * k + 3 + c] = -d.dot(&(wa - wb));
            }
        }
        g
    }

    fn free_columns(&self) -> Vec<usize> {
        (0..6 * self.bodies.len()).filter(|&c| c / 6 != self.platform).collect()
    }

    fn split(&self, jac: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let free = self.free_columns();
        let jf = DMatrix::from_fn(jac.nrows(), free.len(), |r, c| jac[(r, free[c])]);
        let jp = jac.columns(6 * self.platform, 6).into_owned();
        (jf, jp)
    }

    /// Least-squares solver for the full-column-rank free-body Jacobian.
    fn lstsq(jf: &DMatrix<f64>) -> Result<impl Fn(&DMatrix<f64>) -> DMatrix<f64>> {
        let qr = jf.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let d = r.diagonal();
        let dmax = d.amax();
        if !(dmax > 0.0) || d.iter().any(|v| v.abs() < 1e-12 * dmax) {
            return Err(OracleError::Singular("free-body constraint Jacobian".into()));
        }
        Ok(move |b: &DMatrix<f64>| {
            let y = q.transpose() * b;
            r.solve_upper_triangular(&y).expect("checked diagonal")
        })
    }

    fn set_platform(&self, s: &mut State, rot: &Matrix3<f64>, o: &Vector3<f64>) {
        let b = &self.bodies[self.platform];
        s.r[self.platform] = *rot;
        s.p[self.platform] = o + rot * b.com;
    }

    /// Newton projection of the free bodies with the platform pose prescribed.
    fn solve_positions(&mut self, rot: &Matrix3<f64>, o: &Vector3<f64>) -> Result<f64> {
        let mut s = self.state.clone();
        self.set_platform(&mut s, rot, o);
        let free = self.free_columns();
        for _ in 0..MAX_ITER {
            let f = self.phi(&s);
            let res = f.amax();
            if res <= POSITION_TOL {
                self.state = s;
                return Ok(res);
            }
            let (jf, _) = self.split(&self.jacobian(&s));
            let solve = Self::lstsq(&jf)?;
            let step = solve(&DMatrix::from_column_slice(f.len(), 1, (-f).as_slice()));
            for (k, &c) in free.iter().enumerate() {
                let (b, i) = (c / 6, c % 6);
                if i < 3 {
                    s.p[b][i] += step[k];
                }
            }
            for b in 0..self.bodies.len() {
                if b == self.platform {
                    continue;
                }
                let k = free.iter().position(|&c| c == 6 * b + 3).expect("free body column");
                let dphi = Vector3::new(step[k], step[k + 1], step[k + 2]);
                s.r[b] = rot_exp(&dphi) * s.r[b];
            }
        }
        Err(OracleError::Divergence(self.residual(&s)))
    }

    /// Inverse dynamics at chart coordinates `x` with rates `ẋ`, `ẍ` and an
    /// optional platform wrench `(τ, f)` in platform axes about the platform frame origin.
    pub fn inverse_dynamics(
        &mut self,
        x: &DVector<f64>,
        xd: &DVector<f64>,
        xdd: &DVector<f64>,
        w_ee: Option<[f64; 6]>,
    ) -> Result<OracleSolution> {
        let (rot, o, w, od, al, odd) = self.platform_motion(x, xd, xdd);
        let residual = self.solve_positions(&rot, &o)?;
        let s = self.state.clone();
        let nb = self.bodies.len();
        let pb = &self.bodies[self.platform];
        let c = rot * pb.com;
        let mut vp = DVector::zeros(6);
        vp.fixed_rows_mut::<3>(0).copy_from(&(od + w.cross(&c)));
        vp.fixed_rows_mut::<3>(3).copy_from(&w);
        let mut ap = DVector::zeros(6);
        ap.fixed_rows_mut::<3>(0).copy_from(&(odd + al.cross(&c) + w.cross(&w.cross(&c))));
        ap.fixed_rows_mut::<3>(3).copy_from(&al);
        // Platform twist per unit chart rate.
        let d = x.len();
        let mut pmap = DMatrix::zeros(6, d);
        for k in 0..d {
            let mut e = DVector::zeros(d);
            e[k] = 1.0;
            let (_, _, wk, odk, _, _) = self.platform_motion(x, &e, &DVector::zeros(d));
            pmap.fixed_view_mut::<3, 1>(0, k).copy_from(&(odk + wk.cross(&c)));
            pmap.fixed_view_mut::<3, 1>(3, k).copy_from(&wk);
        }
        let jac = self.jacobian(&s);
        let (jf, jp) = self.split(&jac);
        let solve = Self::lstsq(&jf)?;
        let free = self.free_columns();
        let scatter = |vf: &DMatrix<f64>, vplat: &DMatrix<f64>| {
            let mut out = DMatrix::zeros(6 * nb, vf.ncols());
            for (k, &cidx) in free.iter().enumerate() {
                out.row_mut(cidx).copy_from(&vf.row(k));
            }
            out.rows_mut(6 * self.platform, 6).copy_from(vplat);
            out
        };
        let vpm = DMatrix::from_column_slice(6, 1, vp.as_slice());
        let v = scatter(&solve(&(-(&jp * &vpm))), &vpm).column(0).into_owned();
        let velocity_residual = (&jac * &v).amax();
        let g = self.gamma(&s, &v);
        let apm = DMatrix::from_column_slice(6, 1, ap.as_slice());
        let gm = DMatrix::from_column_slice(g.len(), 1, g.as_slice());
        let a = scatter(&solve(&(gm - &jp * &apm)), &apm).column(0).into_owned();
        let n = scatter(&solve(&(-(&jp * &pmap))), &pmap);
        // Newton-Euler residual minus applied loads, per body.
        let mut rhs = DVector::zeros(6 * nb);
        for (i, b) in self.bodies.iter().enumerate() {
            let wi: Vector3<f64> = v.fixed_rows::<3>(6 * i + 3).into_owned();
            let ai: Vector3<f64> = a.fixed_rows::<3>(6 * i).into_owned();
            let ali: Vector3<f64> = a.fixed_rows::<3>(6 * i + 3).into_owned();
            let iw = s.r[i] * b.ic * s.r[i].transpose();
            let f = (ai - self.gravity) * b.mass;
            let t = iw * ali + wi.cross(&(iw * wi));
            rhs.fixed_rows_mut::<3>(6 * i).copy_from(&f);
            rhs.fixed_rows_mut::<3>(6 * i + 3).copy_from(&t);
        }
        if let Some(wee) = w_ee {
            let i = self.platform;
            let f = rot * Vector3::new(wee[3], wee[4], wee[5]);
            let t = rot * Vector3::new(wee[0], wee[1], wee[2]) + (o - s.p[i]).cross(&f);
            let mut seg = rhs.fixed_rows_mut::<3>(6 * i);
            seg -= f;
            let mut seg = rhs.fixed_rows_mut::<3>(6 * i + 3);
            seg -= t;
        }
        // Actuator torques about the joint axes, +u on the child and −u on the parent.
        let act: Vec<&Joint> = self.joints.iter().filter(|j| j.actuated).collect();
        let mut bmat = DMatrix::zeros(6 * nb, act.len());
        for (k, j) in act.iter().enumerate() {
            let e = j.a.map_or(j.ea, |i| s.r[i] * j.ea);
            if let Some(i) = j.b {
                bmat.fixed_view_mut::<3, 1>(6 * i + 3, k).copy_from(&e);
            }
            if let Some(i) = j.a {
                bmat.fixed_view_mut::<3, 1>(6 * i + 3, k).copy_from(&(-e));
            }
        }
        let lhs = n.transpose() * bmat;
        let r = n.transpose() * rhs;
        let u = lhs
            .lu()
            .solve(&r)
            .ok_or_else(|| OracleError::Singular("projected actuation matrix".into()))?;
        Ok(OracleSolution { u, residual, velocity_residual })
    }

    /// World rotation and center of mass of body `i` in the current state.
    pub fn body_state(&self, i: usize) -> (Matrix3<f64>, Vector3<f64>) {
        (self.state.r[i], self.state.p[i])
    }

    /// Resets the warm start to the reference configuration.
    pub fn reset(&mut self) {
        self.state = State {
            r: self.bodies.iter().map(|b| b.reference.rot).collect(),
            p: self.bodies.iter().map(|b| b.reference.pos + b.reference.rot * b.com).collect(),
        };
    }
}
