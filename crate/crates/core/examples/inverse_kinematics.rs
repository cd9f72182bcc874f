//! Geometric inverse kinematics of the Delta along a few platform positions.

use nalgebra::DVector;
use pkmdyn::dynamics::reference_guess;
use pkmdyn::limb_kin::{actuator_values, machine_ik};
use pkmdyn::models::delta::{delta_pkm, DeltaParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pkm = delta_pkm(&DeltaParams::default())?;
    let x0 = pkm.reference_x();
    let mut guess = reference_guess(&pkm);
    for k in 0..=5 {
        let s = k as f64 / 5.0;
        let x = &x0 + DVector::from_vec(vec![0.3 * s, 0.4 * s, 0.1 * s]);
        let (thetas, iters) = machine_ik(&pkm, &x, &guess)?;
        println!(
            "x = {:>7.4?}  actuators = {:>8.5?}  iterations {}",
            x.as_slice(),
            actuator_values(&pkm, &thetas).as_slice(),
            iters
        );
        guess = thetas;
    }
    Ok(())
}
