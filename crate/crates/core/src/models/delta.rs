//! Delta robot with parallelogram lower arms.

use serde::{Deserialize, Serialize};

use super::{
    Axis, BodySpec, ChartSpec, InertiaPrimitive, InertiaSpec, JointKind, JointSpec, LimbSpec, ModelFile, MountSpec,
    PlatformSpec, PoseSpec, PrimitiveKind, SolverSpec, TaskspaceSpec, Units,
};
use crate::error::{Error, Result};
use crate::modular::rotational_mounts;
use crate::pkm::Pkm;

/// Delta geometry in millimeters and material density in kg/m³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaParams {
    /// Base radius.
    pub r0: f64,
    /// Platform radius.
    pub rp: f64,
    /// Upper arm length.
    pub a: f64,
    /// Parallelogram width.
    pub b: f64,
    /// Lower arm (rod) length.
    pub c: f64,
    pub density: f64,
}

impl Default for DeltaParams {
    fn default() -> Self {
        Self { r0: 150.0, rp: 70.0, a: 250.0, b: 80.0, c: 1000.0, density: 2700.0 }
    }
}

impl DeltaParams {
    /// Horizontal rod offset `d = a + R0 − Rp`.
    pub fn d(&self) -> f64 {
        self.a + self.r0 - self.rp
    }

    /// Platform depth `h = √(c² − d²)`.
    pub fn h(&self) -> Result<f64> {
        let d = self.d();
        let s = self.c * self.c - d * d;
        if !(s > 0.0) {
            return Err(Error::Validation(format!(
                "rod length c = {} does not exceed the horizontal offset d = {d}; no real platform height",
                self.c
            )));
        }
        Ok(s.sqrt())
    }
}

fn cyl(kind: PrimitiveKind, axis: Axis, length: f64, diameter: f64, density: f64) -> InertiaSpec {
    InertiaSpec::Primitive(InertiaPrimitive::cylinder(kind, axis, length, diameter, density))
}

fn joint(name: &str, parent: &str, child: &str, axis: [f64; 3], point: [f64; 3]) -> JointSpec {
    JointSpec {
        name: name.into(),
        kind: JointKind::Revolute,
        parent: parent.into(),
        child: child.into(),
        axis,
        axis2: None,
        point,
        pitch: None,
        actuated: false,
        friction: 0.0,
    }
}

/// Delta model file (units mm): one representative limb and three mounts at 0, +120° and −120°.
pub fn build_delta(p: &DeltaParams) -> Result<ModelFile> {
    for (v, n) in [(p.r0, "R0"), (p.rp, "Rp"), (p.a, "a"), (p.b, "b"), (p.c, "c"), (p.density, "density")] {
        if !(v > 0.0) {
            return Err(Error::Validation(format!("Delta parameter {n} must be positive")));
        }
    }
    let h = p.h()?;
    let d = p.d();
    let c = p.c;
    // Rod frames: x along the parallelogram axis e3, z along the rod.
    let rod = [[h / c, 0.0, -d / c], [0.0, 1.0, 0.0], [d / c, 0.0, h / c]];
    let e3 = [h / c, 0.0, d / c];
    let ey = [0.0, -1.0, 0.0];
    let pose = |position: [f64; 3], rotation: [[f64; 3]; 3]| PoseSpec { position, rotation };
    let eye = PoseSpec::identity().rotation;
    let rho = p.density;
    let bodies = vec![
        BodySpec {
            name: "upper_arm".into(),
            pose: pose([-p.a / 2.0 - p.r0, 0.0, 0.0], eye),
            inertia: cyl(PrimitiveKind::SolidCylinder, Axis::X, p.a, 30.0, rho),
        },
        BodySpec {
            name: "elbow".into(),
            pose: pose([-p.a - p.r0, 0.0, 0.0], rod),
            inertia: cyl(PrimitiveKind::SolidCylinder, Axis::Y, p.b, 20.0, rho),
        },
        BodySpec {
            name: "rod_a".into(),
            pose: pose([-d / 2.0 - p.rp, -p.b / 2.0, -h / 2.0], rod),
            inertia: cyl(PrimitiveKind::Rod, Axis::Z, c, 10.0, rho),
        },
        BodySpec {
            name: "wrist".into(),
            pose: pose([-p.rp, 0.0, -h], rod),
            inertia: cyl(PrimitiveKind::SolidCylinder, Axis::Y, p.b, 20.0, rho),
        },
        BodySpec {
            name: "rod_b".into(),
            pose: pose([-d / 2.0 - p.rp, p.b / 2.0, -h / 2.0], rod),
            inertia: cyl(PrimitiveKind::Rod, Axis::Z, c, 10.0, rho),
        },
    ];
    let mut j1 = joint("J1", "ground", "upper_arm", ey, [-p.r0, 0.0, 0.0]);
    j1.actuated = true;
    let joints = vec![
        j1,
        joint("J2", "upper_arm", "elbow", ey, [-p.r0 - p.a, 0.0, 0.0]),
        joint("J3", "elbow", "rod_a", e3, [-p.r0 - p.a, -p.b / 2.0, 0.0]),
        joint("J4", "rod_a", "wrist", e3, [-p.rp, -p.b / 2.0, -h]),
        joint("J5", "elbow", "rod_b", e3, [-p.r0 - p.a, p.b / 2.0, 0.0]),
        joint("J6", "wrist", "platform", ey, [-p.rp, 0.0, -h]),
        joint("J7", "wrist", "rod_b", e3, [-p.rp, p.b / 2.0, -h]),
    ];
    let limb = LimbSpec {
        name: "leg".into(),
        bodies: bodies.iter().map(|b| b.name.clone()).collect(),
        joints: joints.iter().map(|j| j.name.clone()).collect(),
        cut_joints: vec!["J7".into()],
        independent: vec!["J4".into()],
        taskspace_rows: vec![2, 4, 5, 6],
        formulation: Default::default(),
        d_t: Some(vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]),
    };
    let mounts = rotational_mounts(3)
        .iter()
        .map(|m| MountSpec {
            limb: "leg".into(),
            base: PoseSpec::from_pose(&m.base),
            platform: PoseSpec::from_pose(&m.platform),
        })
        .collect();
    Ok(ModelFile {
        name: "delta_mpp3h".into(),
        units: Units::Mm,
        gravity: [0.0, 0.0, -9810.0],
        bodies,
        joints,
        limbs: vec![limb],
        platform: PlatformSpec {
            name: "platform".into(),
            pose: pose([0.0, 0.0, -h], eye),
            inertia: cyl(PrimitiveKind::SolidCylinder, Axis::Z, 100.0, 90.0, rho),
        },
        mounts,
        taskspace: TaskspaceSpec { chart: ChartSpec::Translation, solver: SolverSpec::Square },
    })
}

/// Compiled Delta robot.
pub fn delta_pkm(p: &DeltaParams) -> Result<Pkm> {
    build_delta(p)?.compile()
}

/// Same Delta with the loops expressed by the cut-body product formulation.
pub fn delta_pkm_cut_body(p: &DeltaParams) -> Result<Pkm> {
    let mut f = build_delta(p)?;
    f.limbs[0].formulation = super::Formulation::CutBody;
    f.compile()
}
