//! Reduced-coordinate inverse dynamics against the maximal-coordinate reference solver.

use pkmdyn::checks::rel_err_vec;
use pkmdyn::dynamics::reference_guess;
use pkmdyn::models::fourbar::{build_fourbar, FourbarParams};
use pkmdyn::trajectory::{run_inverse_dynamics, Trajectory};
use pkmdyn_oracle::Oracle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let file = build_fourbar(&FourbarParams::default())?;
    let pkm = file.compile()?;
    let mut oracle = Oracle::from_model(&file)?;
    println!("{} bodies, {} constraint rows, actuators {:?}", oracle.body_count(), oracle.constraint_count(), oracle.actuator_names());
    let points = Trajectory::parse("sin:amp=0.2,0.03,0.02:period=2", &pkm.reference_x(), None, None)?.points();
    let rows = run_inverse_dynamics(&pkm, &points, &reference_guess(&pkm), None)?;
    let mut worst: f64 = 0.0;
    for (p, r) in points.iter().zip(&rows) {
        let sol = oracle.inverse_dynamics(&p.x, &p.xd, &p.xdd, None)?;
        worst = worst.max(rel_err_vec(&r.u, &sol.u));
    }
    println!("{} samples, max relative torque difference {worst:.3e}", points.len());
    Ok(())
}
