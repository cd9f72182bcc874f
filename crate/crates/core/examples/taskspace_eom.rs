//! Taskspace and actuator-space equations of motion of the Delta at one state.

use nalgebra::DVector;
use pkmdyn::dynamics::{actuator_eom, evaluate_state, reference_guess, MachineState};
use pkmdyn::limb_kin::machine_ik;
use pkmdyn::models::delta::{delta_pkm, DeltaParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pkm = delta_pkm(&DeltaParams::default())?;
    let x = pkm.reference_x() + DVector::from_vec(vec![0.1, -0.05, 0.05]);
    let (thetas, _) = machine_ik(&pkm, &x, &reference_guess(&pkm))?;
    let st = MachineState { thetas, vt: DVector::from_vec(vec![0.2, 0.1, -0.3]) };
    let ev = evaluate_state(&pkm, &st)?;
    let t = &ev.terms;
    println!("M_t{}C_t{}W_grav{}J_IK{}", t.m, t.c, t.w_grav, t.j_ik);
    let a = actuator_eom(t)?;
    println!("M_a{}Q_grav{}", a.m, a.q_grav);
    println!("eigenvalues of M_t: {:?}", t.m.clone().symmetric_eigen().eigenvalues.as_slice());
    Ok(())
}
