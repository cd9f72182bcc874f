//! Loop constraint solution H of a Delta limb for the cut-joint and cut-body formulations.

use nalgebra::DVector;
use pkmdyn::limb_kin::{limb_h, loop_residual};
use pkmdyn::models::delta::{delta_pkm, delta_pkm_cut_body, DeltaParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = DeltaParams::default();
    let (t1, t2, t4, t6) = (0.3, -0.5, 0.2, 0.4);
    let theta = DVector::from_vec(vec![t1, t2, -t4, t4, -t4, t6]);
    for (label, pkm) in [("cut joint", delta_pkm(&p)?), ("cut body", delta_pkm_cut_body(&p)?)] {
        let limb = &pkm.limbs[0];
        let (_, loops, h) = limb_h(limb, &theta)?;
        println!("{label}: loop residual {:.2e}, independent joints {:?}", loop_residual(limb, &theta)?, limb.q_joints);
        for (k, lp) in loops.iter().enumerate() {
            println!("  loop {k}: G rows {}, H block\n{}", lp.g.nrows(), lp.solution.h);
        }
        println!("  limb H ({}x{}):\n{}", h.nrows(), h.ncols(), h);
    }
    Ok(())
}
