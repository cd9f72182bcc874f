//! Planar four-bar test rig: a rotating base carrying a four-bar loop whose
//! coupler holds the platform through a revolute joint.

use serde::{Deserialize, Serialize};

use super::{
    Axis, BodySpec, ChartSpec, InertiaPrimitive, InertiaSpec, JointKind, JointSpec, LimbSpec, ModelFile,
    PlatformSpec, PoseSpec, PrimitiveKind, SolverSpec, TaskspaceSpec, Units,
};
use crate::error::{Error, Result};
use crate::pkm::Pkm;
use crate::se3::Pose;
use nalgebra::Vector3;

/// Link lengths (m), masses (kg) and reference crank angle (rad).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourbarParams {
    /// Base, crank, coupler and rocker lengths `L1..L4`.
    pub lengths: [f64; 4],
    /// Link masses in the same order.
    pub masses: [f64; 4],
    /// Distance of the crank pivot from the base pivot.
    pub base_offset: f64,
    pub crank_angle: f64,
    pub platform_mass: f64,
    pub link_diameter: f64,
}

impl Default for FourbarParams {
    fn default() -> Self {
        Self {
            lengths: [0.3, 0.2, 0.34, 0.25],
            masses: [1.0, 0.5, 0.8, 0.6],
            base_offset: 0.25,
            crank_angle: 1.2,
            platform_mass: 0.4,
            link_diameter: 0.02,
        }
    }
}

impl FourbarParams {
    /// Parallelogram variant (`L1 = L3`, `L2 = L4`).
    pub fn parallelogram() -> Self {
        Self { lengths: [0.3, 0.2, 0.3, 0.2], ..Self::default() }
    }
}

fn rot_z(angle: f64) -> [[f64; 3]; 3] {
    PoseSpec::from_pose(&Pose::rotation_about(&Vector3::z(), angle)).rotation
}

fn rod(length: f64, mass: f64, diameter: f64) -> InertiaSpec {
    InertiaSpec::Primitive(InertiaPrimitive {
        kind: PrimitiveKind::Rod,
        axis: Axis::X,
        length: Some(length),
        diameter: Some(diameter),
        size: None,
        density: None,
        mass: Some(mass),
        center: [0.0; 3],
    })
}

fn revolute(name: &str, parent: &str, child: &str, point: [f64; 2], actuated: bool) -> JointSpec {
    JointSpec {
        name: name.into(),
        kind: JointKind::Revolute,
        parent: parent.into(),
        child: child.into(),
        axis: [0.0, 0.0, 1.0],
        axis2: None,
        point: [point[0], point[1], 0.0],
        pitch: None,
        actuated,
        friction: 0.0,
    }
}

/// Planar four-bar model file (units m, gravity along −y).
pub fn build_fourbar(p: &FourbarParams) -> Result<ModelFile> {
    let [l1, l2, l3, l4] = p.lengths;
    if p.lengths.iter().chain(&p.masses).any(|v| !(*v > 0.0)) || !(p.link_diameter > 0.0) || !(p.platform_mass > 0.0) {
        return Err(Error::Validation("four-bar lengths, masses and diameter must be positive".into()));
    }
    let b1 = [p.base_offset, 0.0];
    let b2 = [p.base_offset + l1, 0.0];
    let (s, c) = p.crank_angle.sin_cos();
    let cp = [b1[0] + l2 * c, b1[1] + l2 * s];
    // Rocker tip: intersection of the coupler and rocker circles, left of C→B2.
    let dx = b2[0] - cp[0];
    let dy = b2[1] - cp[1];
    let dist = dx.hypot(dy);
    let along = (l3 * l3 - l4 * l4 + dist * dist) / (2.0 * dist);
    let off2 = l3 * l3 - along * along;
    if !(off2 > 0.0) || dist == 0.0 {
        return Err(Error::Validation("four-bar does not close at the reference crank angle".into()));
    }
    let off = off2.sqrt();
    let (ux, uy) = (dx / dist, dy / dist);
    let dp = [cp[0] + along * ux - off * uy, cp[1] + along * uy + off * ux];
    let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, 0.0];
    let ang = |a: [f64; 2], b: [f64; 2]| (b[1] - a[1]).atan2(b[0] - a[0]);
    let link = |name: &str, a: [f64; 2], b: [f64; 2], mass: f64, len: f64| BodySpec {
        name: name.into(),
        pose: PoseSpec { position: mid(a, b), rotation: rot_z(ang(a, b)) },
        inertia: rod(len, mass, p.link_diameter),
    };
    let bodies = vec![
        link("base", b1, b2, p.masses[0], l1),
        link("crank", b1, cp, p.masses[1], l2),
        link("coupler", cp, dp, p.masses[2], l3),
        link("rocker", b2, dp, p.masses[3], l4),
    ];
    let m = mid(cp, dp);
    let joints = vec![
        revolute("J1", "ground", "base", [0.0, 0.0], true),
        revolute("J2", "base", "crank", b1, true),
        revolute("J3", "crank", "coupler", cp, false),
        revolute("J4", "base", "rocker", b2, false),
        revolute("J5", "coupler", "rocker", dp, false),
        revolute("J6", "coupler", "platform", [m[0], m[1]], true),
    ];
    let limb = LimbSpec {
        name: "chain".into(),
        bodies: bodies.iter().map(|b| b.name.clone()).collect(),
        joints: joints.iter().map(|j| j.name.clone()).collect(),
        cut_joints: vec!["J5".into()],
        independent: vec!["J3".into()],
        taskspace_rows: vec![3, 4, 5],
        formulation: Default::default(),
        d_t: None,
    };
    Ok(ModelFile {
        name: "fourbar".into(),
        units: Units::M,
        gravity: [0.0, -9.81, 0.0],
        bodies,
        joints,
        limbs: vec![limb],
        platform: PlatformSpec {
            name: "platform".into(),
            pose: PoseSpec { position: m, rotation: rot_z(0.0) },
            inertia: InertiaSpec::Primitive(InertiaPrimitive {
                kind: PrimitiveKind::Box,
                axis: Axis::Z,
                length: None,
                diameter: None,
                size: Some([0.1, 0.06, 0.02]),
                density: None,
                mass: Some(p.platform_mass),
                center: [0.02, 0.01, 0.0],
            }),
        },
        mounts: vec![],
        taskspace: TaskspaceSpec { chart: ChartSpec::Planar, solver: SolverSpec::Square },
    })
}

pub fn fourbar_pkm(p: &FourbarParams) -> Result<Pkm> {
    build_fourbar(p)?.compile()
}
