//! Declarative model files and the shipped model builders.

pub mod delta;
pub mod fourbar;
pub mod inertia;
pub mod irsbot;

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::{CutBodySpec, CutJointKind, CutJointSpec, LoopVar};
use crate::modular::instantiate_limb;
use crate::pkm::{LimbModel, LimbParts, LoopKind, Mount, Pkm, PlatformBody, SolverKind, TaskSpace};
use crate::se3::{screw_from_geometry, Pose, ScrewKind, SpatialInertia, TaskChart};
use crate::topology::{build_spanning_tree, cycles_of_tree, partition_limbs, Edge, MechanismGraph, LimbSubgraph};
use crate::tree_kin::KinematicTree;

pub use inertia::{Axis, InertiaPrimitive, PrimitiveKind};

/// Name of the fixed ground body in joint references.
pub const GROUND_NAME: &str = "ground";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    M,
    Mm,
}

impl Units {
    /// Divisor converting lengths to meters.
    pub fn length_divisor(&self) -> f64 {
        match self {
            Units::M => 1.0,
            Units::Mm => 1000.0,
        }
    }
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn is_identity_rows(r: &[[f64; 3]; 3]) -> bool {
    *r == identity_rows()
}

/// Pose with the rotation given row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub position: [f64; 3],
    #[serde(default = "identity_rows", skip_serializing_if = "is_identity_rows")]
    pub rotation: [[f64; 3]; 3],
}

impl PoseSpec {
    pub fn identity() -> Self {
        Self { position: [0.0; 3], rotation: identity_rows() }
    }

    pub fn from_pose(p: &Pose) -> Self {
        let r = p.rot;
        Self {
            position: [p.pos.x, p.pos.y, p.pos.z],
            rotation: [[r[(0, 0)], r[(0, 1)], r[(0, 2)]], [r[(1, 0)], r[(1, 1)], r[(1, 2)]], [r[(2, 0)], r[(2, 1)], r[(2, 2)]]],
        }
    }

    pub fn to_pose(&self, what: &str) -> Result<Pose> {
        let r = &self.rotation;
        let rot = Matrix3::new(r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]);
        let p = Pose::new(rot, Vector3::from(self.position));
        if !p.is_valid(1e-9) {
            return Err(Error::Validation(format!("{what}: rotation is not orthonormal with determinant +1")));
        }
        Ok(p)
    }

    fn scaled(&self, f: f64) -> Self {
        Self { position: self.position.map(|v| v / f), rotation: self.rotation }
    }
}

/// Inertia tensor about the center of mass in body axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInertia {
    pub mass: f64,
    pub com: [f64; 3],
    pub inertia: [[f64; 3]; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InertiaSpec {
    None,
    Primitive(InertiaPrimitive),
    Explicit(ExplicitInertia),
}

impl InertiaSpec {
    /// Spatial inertia; lengths must already be in meters.
    pub fn spatial(&self) -> Result<SpatialInertia> {
        let m = match self {
            InertiaSpec::None => SpatialInertia::zero(),
            InertiaSpec::Primitive(p) => p.spatial_inertia()?,
            InertiaSpec::Explicit(e) => {
                let i = &e.inertia;
                let ic = Matrix3::new(i[0][0], i[0][1], i[0][2], i[1][0], i[1][1], i[1][2], i[2][0], i[2][1], i[2][2]);
                SpatialInertia::from_com(e.mass, Vector3::from(e.com), ic)
            }
        };
        m.validate()?;
        Ok(m)
    }

    fn scaled(&self, f: f64) -> Self {
        match self {
            InertiaSpec::None => InertiaSpec::None,
            InertiaSpec::Primitive(p) => InertiaSpec::Primitive(p.scaled(f)),
            InertiaSpec::Explicit(e) => InertiaSpec::Explicit(ExplicitInertia {
                mass: e.mass,
                com: e.com.map(|v| v / f),
                inertia: e.inertia.map(|r| r.map(|v| v / (f * f))),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub name: String,
    /// Reference pose in the construction frame.
    pub pose: PoseSpec,
    pub inertia: InertiaSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Helical,
    Universal,
    Spherical,
}

impl JointKind {
    pub fn dof(&self) -> usize {
        match self {
            JointKind::Universal => 2,
            JointKind::Spherical => 3,
            _ => 1,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Joint axis `e` (first axis of universal and spherical joints).
    pub axis: [f64; 3],
    /// Second axis of universal and spherical joints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<[f64; 3]>,
    /// Point `y` on the axis.
    pub point: [f64; 3],
    /// Pitch of helical joints (length per radian).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub actuated: bool,
    /// Viscous friction coefficient (SI).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub friction: f64,
}

impl JointSpec {
    fn scaled(&self, f: f64) -> Self {
        Self { point: self.point.map(|v| v / f), pitch: self.pitch.map(|p| p / f), ..self.clone() }
    }

    /// One-DOF components `(axis, kind)`.
    fn components(&self) -> Result<Vec<(Vector3<f64>, ScrewKind)>> {
        let e = Vector3::from(self.axis);
        let second = || -> Result<Vector3<f64>> {
            let e2 = Vector3::from(
                self.axis2.ok_or_else(|| Error::Validation(format!("joint {} needs axis2", self.name)))?,
            );
            if e.dot(&e2).abs() > 1e-9 {
                return Err(Error::Validation(format!("joint {}: axis and axis2 are not perpendicular", self.name)));
            }
            Ok(e2)
        };
        Ok(match self.kind {
            JointKind::Revolute => vec![(e, ScrewKind::Revolute)],
            JointKind::Prismatic => vec![(e, ScrewKind::Prismatic)],
            JointKind::Helical => vec![(
                e,
                ScrewKind::Helical(
                    self.pitch.ok_or_else(|| Error::Validation(format!("helical joint {} needs a pitch", self.name)))?,
                ),
            )],
            JointKind::Universal => vec![(e, ScrewKind::Revolute), (second()?, ScrewKind::Revolute)],
            JointKind::Spherical => {
                let e2 = second()?;
                vec![(e, ScrewKind::Revolute), (e2, ScrewKind::Revolute), (e.cross(&e2), ScrewKind::Revolute)]
            }
        })
    }

    /// Joint frame at the reference: `z` along the axis for one-DOF joints,
    /// `(axis, axis2, axis × axis2)` for universal and spherical joints.
    fn frame(&self) -> Pose {
        let e = Vector3::from(self.axis).normalize();
        let rot = match (self.kind, self.axis2) {
            (JointKind::Universal | JointKind::Spherical, Some(a2)) => {
                let y = Vector3::from(a2).normalize();
                Matrix3::from_columns(&[e, y, e.cross(&y)])
            }
            _ => {
                let i = e.iamin();
                let mut b = Vector3::zeros();
                b[i] = 1.0;
                let x = (b - e * e.dot(&b)).normalize();
                Matrix3::from_columns(&[x, e.cross(&x), e])
            }
        };
        Pose::new(rot, Vector3::from(self.point))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    #[default]
    CutJoint,
    CutBody,
}

fn is_default_formulation(f: &Formulation) -> bool {
    *f == Formulation::CutJoint
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimbSpec {
    pub name: String,
    /// Moving bodies of the limb (platform excluded).
    pub bodies: Vec<String>,
    /// Joints of the limb in numbering order, cut joints included.
    pub joints: Vec<String>,
    #[serde(default)]
    pub cut_joints: Vec<String>,
    /// Joints pinned as independent loop coordinates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub independent: Vec<String>,
    /// 1-based rows of the platform twist forming `L_t`.
    pub taskspace_rows: Vec<usize>,
    #[serde(default, skip_serializing_if = "is_default_formulation")]
    pub formulation: Formulation,
    /// Expected `D_t` (rows × platform DOF) in the construction frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_t: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformSpec {
    pub name: String,
    pub pose: PoseSpec,
    pub inertia: InertiaSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MountSpec {
    pub limb: String,
    pub base: PoseSpec,
    pub platform: PoseSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartSpec {
    Translation,
    Planar,
    Spatial,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverSpec {
    #[default]
    Square,
    Pseudoinverse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskspaceSpec {
    pub chart: ChartSpec,
    #[serde(default)]
    pub solver: SolverSpec,
}

/// Model file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    pub units: Units,
    /// Gravity in length units per s².
    pub gravity: [f64; 3],
    pub bodies: Vec<BodySpec>,
    pub joints: Vec<JointSpec>,
    pub limbs: Vec<LimbSpec>,
    pub platform: PlatformSpec,
    /// Limb instances; empty means every limb once at its construction frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mounts: Vec<MountSpec>,
    pub taskspace: TaskspaceSpec,
}

impl ModelFile {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let s = std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.to_path_buf(), source })?;
        Self::from_json(&s).map_err(|e| match e {
            Error::Json(j) => Error::Validation(format!("{}: {j}", p.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap_or_default();
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let p = path.as_ref();
        std::fs::write(p, self.to_json()).map_err(|source| Error::Io { path: p.to_path_buf(), source })
    }

    /// Copy with all lengths in meters.
    pub fn normalized(&self) -> ModelFile {
        let f = self.units.length_divisor();
        if f == 1.0 {
            return self.clone();
        }
        ModelFile {
            name: self.name.clone(),
            units: Units::M,
            gravity: self.gravity.map(|v| v / f),
            bodies: self
                .bodies
                .iter()
                .map(|b| BodySpec { name: b.name.clone(), pose: b.pose.scaled(f), inertia: b.inertia.scaled(f) })
                .collect(),
            joints: self.joints.iter().map(|j| j.scaled(f)).collect(),
            limbs: self.limbs.clone(),
            platform: PlatformSpec {
                name: self.platform.name.clone(),
                pose: self.platform.pose.scaled(f),
                inertia: self.platform.inertia.scaled(f),
            },
            mounts: self
                .mounts
                .iter()
                .map(|m| MountSpec { limb: m.limb.clone(), base: m.base.scaled(f), platform: m.platform.scaled(f) })
                .collect(),
            taskspace: self.taskspace.clone(),
        }
    }

    /// Builds the assembled machine.
    pub fn compile(&self) -> Result<Pkm> {
        let m = self.normalized();
        if m.gravity.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("gravity must be finite".into()));
        }
        let mut names = HashMap::new();
        for b in &m.bodies {
            if b.name == GROUND_NAME || b.name == m.platform.name || names.insert(b.name.as_str(), b).is_some() {
                return Err(Error::Validation(format!("duplicate or reserved body name {}", b.name)));
            }
        }
        let mut joints = HashMap::new();
        for j in &m.joints {
            if joints.insert(j.name.as_str(), j).is_some() {
                return Err(Error::Validation(format!("duplicate joint name {}", j.name)));
            }
        }
        let mut used: HashMap<&str, &str> = HashMap::new();
        for l in &m.limbs {
            for b in &l.bodies {
                if let Some(other) = used.insert(b.as_str(), l.name.as_str()) {
                    return Err(Error::Topology(format!("body {b} appears in limbs {other} and {}", l.name)));
                }
            }
        }
        let platform_pose = m.platform.pose.to_pose("platform pose")?;
        let chart = match m.taskspace.chart {
            ChartSpec::Translation => TaskChart::Translation,
            ChartSpec::Planar => TaskChart::Planar,
            ChartSpec::Spatial => TaskChart::Spatial,
        };
        let solver = match m.taskspace.solver {
            SolverSpec::Square => SolverKind::Square,
            SolverSpec::Pseudoinverse => SolverKind::Pseudoinverse,
        };
        let task = TaskSpace::new(chart, solver, platform_pose)?;
        let mut reps = HashMap::new();
        for l in &m.limbs {
            let limb = build_limb(&m, l, &names, &joints, &platform_pose, &task)
                .map_err(|e| e.context(&format!("limb {}", l.name)))?;
            reps.insert(l.name.as_str(), limb);
        }
        let limbs = if m.mounts.is_empty() {
            m.limbs.iter().map(|l| reps[l.name.as_str()].clone()).collect()
        } else {
            let mut count: HashMap<&str, usize> = HashMap::new();
            m.mounts
                .iter()
                .map(|ms| {
                    let rep = reps
                        .get(ms.limb.as_str())
                        .ok_or_else(|| Error::Validation(format!("mount refers to unknown limb {}", ms.limb)))?;
                    let mount = Mount { base: ms.base.to_pose("mount base")?, platform: ms.platform.to_pose("mount platform")? };
                    let k = count.entry(ms.limb.as_str()).or_insert(0);
                    *k += 1;
                    let mut inst = instantiate_limb(rep, mount)?;
                    inst.name = format!("{}{}", ms.limb, k);
                    Ok(inst)
                })
                .collect::<Result<Vec<_>>>()?
        };
        let platform = PlatformBody {
            name: m.platform.name.clone(),
            inertia: m.platform.inertia.spatial().map_err(|e| e.context("platform inertia"))?,
            reference: platform_pose,
        };
        Pkm::new(m.name.clone(), limbs, platform, task, Vector3::from(m.gravity))
    }

    /// Topological graph of the assembled machine: vertex 0 is the ground,
    /// then the bodies of every limb instance in mount order, the platform last.
    pub fn machine_graph(&self) -> Result<MechanismGraph> {
        let instances: Vec<&LimbSpec> = if self.mounts.is_empty() {
            self.limbs.iter().collect()
        } else {
            self.mounts
                .iter()
                .map(|ms| {
                    self.limbs
                        .iter()
                        .find(|l| l.name == ms.limb)
                        .ok_or_else(|| Error::Validation(format!("mount refers to unknown limb {}", ms.limb)))
                })
                .collect::<Result<_>>()?
        };
        let pv = 1 + instances.iter().map(|l| l.bodies.len()).sum::<usize>();
        let mut edges = Vec::new();
        let mut next = 1;
        for l in instances {
            let mut vid: HashMap<&str, usize> = HashMap::from([(GROUND_NAME, 0), (self.platform.name.as_str(), pv)]);
            for b in &l.bodies {
                vid.insert(b.as_str(), next);
                next += 1;
            }
            for jn in &l.joints {
                let j = self
                    .joints
                    .iter()
                    .find(|j| &j.name == jn)
                    .ok_or_else(|| Error::Validation(format!("unknown joint {jn}")))?;
                let end = |n: &str| {
                    vid.get(n).copied().ok_or_else(|| Error::Validation(format!("joint {jn} refers to body {n} outside limb {}", l.name)))
                };
                edges.push(Edge::new(edges.len() + 1, end(&j.parent)?, end(&j.child)?, j.kind.dof()));
            }
        }
        MechanismGraph::new((0..=pv).collect(), edges, pv)
    }
}

/// Loads and compiles a model file.
pub fn load_pkm(path: impl AsRef<Path>) -> Result<Pkm> {
    ModelFile::load(path)?.compile()
}

fn build_limb(
    m: &ModelFile,
    spec: &LimbSpec,
    bodies: &HashMap<&str, &BodySpec>,
    joints: &HashMap<&str, &JointSpec>,
    platform_pose: &Pose,
    task: &TaskSpace,
) -> Result<LimbModel> {
    let mut vid: HashMap<&str, usize> = HashMap::new();
    vid.insert(GROUND_NAME, 0);
    for (i, b) in spec.bodies.iter().enumerate() {
        if !bodies.contains_key(b.as_str()) {
            return Err(Error::Validation(format!("unknown body {b}")));
        }
        if vid.insert(b.as_str(), i + 1).is_some() {
            return Err(Error::Validation(format!("body {b} listed twice")));
        }
    }
    let pv = spec.bodies.len() + 1;
    vid.insert(m.platform.name.as_str(), pv);
    let mut js = Vec::new();
    let mut edges = Vec::new();
    for (i, jn) in spec.joints.iter().enumerate() {
        let j = *joints.get(jn.as_str()).ok_or_else(|| Error::Validation(format!("unknown joint {jn}")))?;
        let end = |n: &str| {
            vid.get(n).copied().ok_or_else(|| Error::Validation(format!("joint {jn} refers to body {n} outside the limb")))
        };
        edges.push(Edge::new(i + 1, end(&j.parent)?, end(&j.child)?, j.kind.dof()));
        js.push(j);
    }
    let cuts: Vec<usize> = spec
        .cut_joints
        .iter()
        .map(|c| {
            spec.joints
                .iter()
                .position(|j| j == c)
                .map(|i| i + 1)
                .ok_or_else(|| Error::Validation(format!("cut joint {c} is not a joint of the limb")))
        })
        .collect::<Result<_>>()?;
    let graph = MechanismGraph::new((0..=pv).collect(), edges, pv)?;
    let parts = partition_limbs(&graph)?;
    if parts.len() != 1 {
        return Err(Error::Topology(format!("limb graph splits into {} limbs", parts.len())));
    }
    let sub: LimbSubgraph = parts.into_iter().next().unwrap_or_else(|| LimbSubgraph::from_graph(&graph));
    let st = build_spanning_tree(&sub, &cuts)?;
    let cycles = cycles_of_tree(&sub, &st);

    // Expand multi-DOF tree joints into chains of one-DOF joints with massless bodies.
    let pose_of_vertex = |v: usize| -> Result<Pose> {
        if v == pv {
            Ok(*platform_pose)
        } else {
            bodies[spec.bodies[v - 1].as_str()].pose.to_pose(&format!("pose of body {}", spec.bodies[v - 1]))
        }
    };
    let mut parent = Vec::new();
    let mut reference = Vec::new();
    let mut screws = Vec::new();
    let mut joint_names = Vec::new();
    let mut body_names = Vec::new();
    let mut inertias = Vec::new();
    let mut friction = Vec::new();
    let mut actuated = Vec::new();
    let mut real = vec![0usize; st.len()];
    let mut comps_of_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for t in 0..st.len() {
        let e = st.tree_edges[t];
        let j = js[e - 1];
        let v = st.bodies[t];
        let a = pose_of_vertex(v)?;
        let comps = j.components()?;
        let d = comps.len();
        let mut idxs = Vec::new();
        for (c, (axis, kind)) in comps.into_iter().enumerate() {
            let idx = parent.len();
            let p = if c == 0 { st.parent[t].map(|pt| real[pt]) } else { Some(idx - 1) };
            parent.push(p);
            reference.push(a);
            screws.push(
                screw_from_geometry(&axis, &Vector3::from(j.point), kind)
                    .map_err(|err| err.context(&format!("joint {}", j.name)))?,
            );
            joint_names.push(if d == 1 { j.name.clone() } else { format!("{}.{}", j.name, c + 1) });
            friction.push(j.friction);
            if j.actuated {
                actuated.push(idx);
            }
            if c + 1 == d {
                if v == pv {
                    body_names.push(m.platform.name.clone());
                    inertias.push(SpatialInertia::zero());
                } else {
                    let b = bodies[spec.bodies[v - 1].as_str()];
                    body_names.push(b.name.clone());
                    inertias.push(b.inertia.spatial().map_err(|err| err.context(&format!("body {}", b.name)))?);
                }
            } else {
                body_names.push(format!("{}.{}", j.name, c + 1));
                inertias.push(SpatialInertia::zero());
            }
            idxs.push(idx);
        }
        real[t] = *idxs.last().unwrap_or(&0);
        comps_of_edge.insert(e, idxs);
    }
    let tree = KinematicTree::new(parent, reference.clone(), screws.clone())?;
    let platform_body = real[st.body_of_vertex(pv).ok_or_else(|| Error::Topology("platform missing from tree".into()))?];

    let pin: Vec<usize> = spec
        .independent
        .iter()
        .map(|n| {
            let i = spec
                .joints
                .iter()
                .position(|j| j == n)
                .ok_or_else(|| Error::Validation(format!("independent joint {n} is not a joint of the limb")))?;
            comps_of_edge
                .get(&(i + 1))
                .cloned()
                .ok_or_else(|| Error::Validation(format!("independent joint {n} is a cut joint")))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut loops = Vec::new();
    for cyc in &cycles {
        let cj = js[cyc.cut_edge - 1];
        if cj.actuated {
            return Err(Error::Validation(format!("cut joint {} cannot be actuated", cj.name)));
        }
        let k = cyc.k.map(|b| real[b]);
        let r = cyc.r.map(|b| real[b]);
        let mut vars: Vec<usize> = cyc.edges[1..].iter().flat_map(|e| comps_of_edge[e].clone()).collect();
        vars.sort_unstable();
        let pinned: Vec<usize> = pin.iter().copied().filter(|p| vars.contains(p)).collect();
        let pinned = if pinned.is_empty() { None } else { Some(pinned) };
        let kind = match spec.formulation {
            Formulation::CutJoint => {
                let kind = match cj.kind {
                    JointKind::Revolute => CutJointKind::Revolute,
                    JointKind::Universal => CutJointKind::Universal,
                    JointKind::Spherical => CutJointKind::Spherical,
                    JointKind::Prismatic => {
                        CutJointKind::Custom { distance: vec![0, 1], orientation: vec![(2, 0), (2, 1), (1, 0)] }
                    }
                    JointKind::Helical => {
                        return Err(Error::Validation(format!(
                            "helical cut joint {} needs the cut-body formulation",
                            cj.name
                        )))
                    }
                };
                let fj = cj.frame();
                let rel = |b: Option<usize>| b.map_or(fj, |b| reference[b].inverse() * fj);
                LoopKind::CutJoint(CutJointSpec { k, r, frame_k: rel(k), frame_r: rel(r), kind })
            }
            Formulation::CutBody => {
                let comps = cj.components()?;
                if comps.len() != 1 {
                    return Err(Error::Validation(format!(
                        "cut-body formulation needs a one-DOF cut joint, {} has {}",
                        cj.name,
                        comps.len()
                    )));
                }
                let cut_screw = screw_from_geometry(&comps[0].0, &Vector3::from(cj.point), comps[0].1)?;
                let path = |b: Option<usize>| b.map(|b| tree.paths[b].clone()).unwrap_or_default();
                let (pk, pr) = (path(k), path(r));
                let common = pk.iter().zip(&pr).take_while(|(a, b)| a == b).count();
                let mut factors: Vec<(LoopVar, i8, crate::se3::ScrewAxis)> =
                    pk[common..].iter().map(|&j| (LoopVar::Tree(j), 1, screws[j])).collect();
                factors.push((LoopVar::Cut, 1, cut_screw));
                factors.extend(pr[common..].iter().rev().map(|&j| (LoopVar::Tree(j), -1, screws[j])));
                LoopKind::CutBody(CutBodySpec { factors, k, r, cut_screw })
            }
        };
        let mut v: Vec<Option<usize>> = vars.into_iter().map(Some).collect();
        if spec.formulation == Formulation::CutBody {
            v.push(None);
        }
        loops.push((kind, v, pinned));
    }

    if spec.taskspace_rows.iter().any(|&r| r == 0 || r > 6) {
        return Err(Error::Validation("taskspace rows must lie in 1..=6".into()));
    }
    let rows: Vec<usize> = spec.taskspace_rows.iter().map(|r| r - 1).collect();
    if let Some(dt) = &spec.d_t {
        let expect = crate::linalg::select_rows(&task.pattern, &rows);
        let given = DMatrix::from_fn(dt.len(), dt.first().map_or(0, |r| r.len()), |i, j| dt[i].get(j).copied().unwrap_or(f64::NAN));
        if given.shape() != expect.shape() || (given - expect).amax() > 1e-12 {
            return Err(Error::Validation("declared D_t does not match the row selection of P_p".into()));
        }
    }
    LimbModel::new(LimbParts {
        name: spec.name.clone(),
        tree,
        joint_names,
        body_names,
        platform_body,
        inertias,
        friction,
        loops,
        actuated,
        rows,
        mount: Mount::default(),
    })
}
