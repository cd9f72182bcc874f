//! Limb velocity inverse kinematics: F maps the platform velocity to the independent joint rates.

use nalgebra::DVector;
use pkmdyn::limb_kin::velocity_ik;
use pkmdyn::models::delta::{delta_pkm, DeltaParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pkm = delta_pkm(&DeltaParams::default())?;
    let (t1, t2, t4, t6) = (0.3, -0.5, 0.2, 0.4);
    let theta = DVector::from_vec(vec![t1, t2, -t4, t4, -t4, t6]);
    for limb in &pkm.limbs {
        let v = velocity_ik(limb, &pkm.task, &theta)?;
        println!("{}: F (q = {:?})\n{}", limb.name, limb.q_joints, v.f);
        let vt = DVector::from_vec(vec![0.1, 0.0, -0.2]);
        println!("  joint rates for V_t = {:?}: {:?}", vt.as_slice(), (v.hf() * &vt).as_slice());
    }
    Ok(())
}
