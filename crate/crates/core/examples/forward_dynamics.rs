//! Forward dynamics driven by replayed inverse-dynamics torques, and free motion under gravity.

use pkmdyn::dynamics::{kinetic_energy, potential_energy};
use pkmdyn::models::delta::{delta_pkm, DeltaParams};
use pkmdyn::simulation::{initial_state, simulate, TorqueSource};
use pkmdyn::trajectory::Trajectory;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pkm = delta_pkm(&DeltaParams::default())?;
    let traj = Trajectory::parse("sin", &pkm.reference_x(), None, None)?;
    let st = initial_state(&pkm, &traj)?;
    let mut source = TorqueSource::replay(&pkm, traj)?;
    let rep = simulate(&pkm, st, &mut source, 1e-4, 0.2, 500)?;
    println!(
        "replay 0.2 s: max tracking error {:.3e} m, max loop residual {:.3e}",
        rep.max_tracking.unwrap_or(f64::NAN),
        rep.max_residual
    );

    let rest = Trajectory::parse("sin:amp=0,0,0", &pkm.reference_x(), None, None)?;
    let st = initial_state(&pkm, &rest)?;
    let e0 = kinetic_energy(&pkm, &st)? + potential_energy(&pkm, &st.thetas);
    let mut zero = TorqueSource::Table { t: vec![0.0], u: vec![nalgebra::DVector::zeros(pkm.n_act())] };
    let mut state = st;
    // Falling further reaches full arm extension (a singular configuration) near t = 0.25 s.
    for k in 0..4 {
        let rep = simulate(&pkm, state, &mut zero, 1e-4, 0.05, 100)?;
        let last = rep.rows.last().expect("rows");
        state = rep.final_state;
        let e = kinetic_energy(&pkm, &state)? + potential_energy(&pkm, &state.thetas);
        println!("free motion t = {:.2}: x = {:>8.4?}, energy drift {:.3e}", 0.05 * (k + 1) as f64, last.x.as_slice(), e - e0);
    }
    Ok(())
}
