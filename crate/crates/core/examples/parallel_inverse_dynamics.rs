//! Per-limb parallel inverse dynamics compared with the serial evaluation.

use pkmdyn::dynamics::{reference_guess, ParallelSolver};
use pkmdyn::models::delta::{delta_pkm, DeltaParams};
use pkmdyn::trajectory::{run_inverse_dynamics, Trajectory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pkm = delta_pkm(&DeltaParams::default())?;
    let points = Trajectory::parse("sin", &pkm.reference_x(), None, None)?.points();
    let guess = reference_guess(&pkm);
    let serial = run_inverse_dynamics(&pkm, &points, &guess, None)?;
    let solver = ParallelSolver::new(&pkm, None)?;
    let parallel = run_inverse_dynamics(&pkm, &points, &guess, Some(&solver))?;
    let diff = serial.iter().zip(&parallel).map(|(a, b)| (&a.u - &b.u).amax()).fold(0.0, f64::max);
    println!("{} samples on {} workers, max |u_parallel - u_serial| = {diff:.3e}", points.len(), solver.width());
    Ok(())
}
