//! Representative-limb instancing through base and platform mount transforms.

use nalgebra::Vector3;

use crate::error::Result;
use crate::loops::{CutBodySpec, CutJointSpec};
use crate::pkm::{LimbModel, LoopKind, Mount};
use crate::se3::{Pose, ScrewAxis};
use crate::tree_kin::KinematicTree;

fn move_screw(s: &ScrewAxis, base: &Pose) -> ScrewAxis {
    ScrewAxis { coords: base.act(&s.coords), ..*s }
}

/// Stamps a limb defined in construction frames at `mount`:
/// `Y(l) = Ad(S_0)Y′`, `A(l) = S_0 A′`, `A_p(l) = S_0 A′_p S_p⁻¹`.
pub fn instantiate_limb(rep: &LimbModel, mount: Mount) -> Result<LimbModel> {
    let s0 = mount.base;
    let sp_inv = mount.platform.inverse();
    let pb = rep.platform_body;
    let reference = rep
        .tree
        .reference
        .iter()
        .enumerate()
        .map(|(i, a)| if i == pb { s0 * *a * sp_inv } else { s0 * *a })
        .collect();
    let screws = rep.tree.screws.iter().map(|s| move_screw(s, &s0)).collect();
    let tree = KinematicTree::new(rep.tree.parent.clone(), reference, screws)?;
    let bar = tree.without_leaf(pb)?;
    let on_platform = |b: Option<usize>, f: &Pose| if b == Some(pb) { mount.platform * *f } else { *f };
    let loops = rep
        .loops
        .iter()
        .map(|lp| {
            let kind = match &lp.kind {
                LoopKind::CutJoint(s) => LoopKind::CutJoint(CutJointSpec {
                    frame_k: on_platform(s.k, &s.frame_k),
                    frame_r: on_platform(s.r, &s.frame_r),
                    ..s.clone()
                }),
                LoopKind::CutBody(s) => LoopKind::CutBody(CutBodySpec {
                    factors: s.factors.iter().map(|(v, g, y)| (*v, *g, move_screw(y, &s0))).collect(),
                    cut_screw: move_screw(&s.cut_screw, &s0),
                    ..s.clone()
                }),
            };
            crate::pkm::LimbLoop { kind, vars: lp.vars.clone(), partition: lp.partition.clone() }
        })
        .collect();
    Ok(LimbModel { tree, bar, loops, mount, ..rep.clone() })
}

/// Gravity vector `R_0ᵀ g₀` seen by the representative limb.
pub fn instance_gravity_vector(base: &Pose, g: &Vector3<f64>) -> Vector3<f64> {
    base.rot.transpose() * g
}

/// Delta-style mounts rotated by `2πk/L` about the inertial z-axis, with the
/// second and third mounts at `+2π/3` and `−2π/3` for three limbs.
pub fn rotational_mounts(count: usize) -> Vec<Mount> {
    (0..count)
        .map(|k| {
            let mut angle = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            if angle > std::f64::consts::PI {
                angle -= 2.0 * std::f64::consts::PI;
            }
            let r = Pose::rotation_about(&Vector3::z(), angle);
            Mount { base: r, platform: r }
        })
        .collect()
}
