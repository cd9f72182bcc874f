//! Inverse dynamics of the Delta along the sinusoidal straight-line trajectory.

use pkmdyn::dynamics::{reference_guess, static_torque};
use pkmdyn::models::delta::{delta_pkm, DeltaParams};
use pkmdyn::trajectory::{run_inverse_dynamics, Trajectory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pkm = delta_pkm(&DeltaParams::default())?;
    let traj = Trajectory::parse("sin", &pkm.reference_x(), None, None)?;
    let points = traj.points();
    let rows = run_inverse_dynamics(&pkm, &points, &reference_guess(&pkm), None)?;
    println!("{} samples", rows.len());
    for r in rows.iter().step_by(125) {
        println!("t = {:>5.2}  u = {:>9.5?}  IK iterations {}", r.t, r.u.as_slice(), r.iterations);
    }
    let st = static_torque(&pkm, &pkm.reference_x(), &reference_guess(&pkm))?;
    println!("static torque at the reference point: {:.5?}", st.u.as_slice());
    Ok(())
}
