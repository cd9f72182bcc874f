use nalgebra::DVector;

use pkmdyn::checks::rel_err_vec;
use pkmdyn::dynamics::{inverse_dynamics, reference_guess, TaskSample};
use pkmdyn::models::delta::{build_delta, DeltaParams};
use pkmdyn::models::fourbar::{build_fourbar, FourbarParams};
use pkmdyn::models::ModelFile;
use pkmdyn::se3::Wrench;
use pkmdyn::trajectory::{run_inverse_dynamics, Trajectory};
use pkmdyn_oracle::Oracle;

const TOL: f64 = 1e-6;

fn worst_difference(file: &ModelFile, spec: &str, dt: f64, duration: Option<f64>) -> f64 {
    let pkm = file.compile().unwrap();
    let mut oracle = Oracle::from_model(file).unwrap();
    let points = Trajectory::parse(spec, &pkm.reference_x(), Some(dt), duration).unwrap().points();
    let rows = run_inverse_dynamics(&pkm, &points, &reference_guess(&pkm), None).unwrap();
    let mut worst: f64 = 0.0;
    for (p, r) in points.iter().zip(&rows) {
        let sol = oracle.inverse_dynamics(&p.x, &p.xd, &p.xdd, None).unwrap();
        assert!(sol.residual < 1e-10 && sol.velocity_residual < 1e-10);
        worst = worst.max(rel_err_vec(&r.u, &sol.u));
    }
    worst
}

#[test]
fn fourbar_agrees() {
    let file = build_fourbar(&FourbarParams::default()).unwrap();
    let e = worst_difference(&file, "sin:amp=0.2,0.03,0.02:period=2", 0.01, None);
    assert!(e < TOL, "{e}");
}

#[test]
fn parallelogram_agrees() {
    let file = build_fourbar(&FourbarParams::parallelogram()).unwrap();
    let e = worst_difference(&file, "sin:amp=0.02,0.02,0.1:period=1", 0.01, None);
    assert!(e < TOL, "{e}");
}

#[test]
fn delta_agrees() {
    let file = build_delta(&DeltaParams::default()).unwrap();
    let e = worst_difference(&file, "sin", 0.05, None);
    assert!(e < TOL, "{e}");
}

#[test]
fn delta_with_load_agrees() {
    let file = build_delta(&DeltaParams::default()).unwrap();
    let pkm = file.compile().unwrap();
    let mut oracle = Oracle::from_model(&file).unwrap();
    let w = [0.0, 0.0, 0.0, 4.0, -3.0, 10.0];
    let x = pkm.reference_x() + DVector::from_vec(vec![0.1, -0.1, 0.05]);
    let xd = DVector::from_vec(vec![0.3, 0.2, -0.1]);
    let xdd = DVector::from_vec(vec![-1.0, 2.0, 0.5]);
    let s = TaskSample { x: x.clone(), vt: xd.clone(), vt_dot: xdd.clone(), w_ee: Wrench::from_column_slice(&w) };
    let u = inverse_dynamics(&pkm, &s, &reference_guess(&pkm)).unwrap().u;
    let sol = oracle.inverse_dynamics(&x, &xd, &xdd, Some(w)).unwrap();
    assert!(rel_err_vec(&u, &sol.u) < TOL, "{u} vs {}", sol.u);
}

#[test]
fn maximal_model_size() {
    let file = build_delta(&DeltaParams::default()).unwrap();
    let oracle = Oracle::from_model(&file).unwrap();
    assert_eq!(oracle.body_count(), 16);
    assert_eq!(oracle.actuator_names().len(), 3);
    // 21 revolute joints with 5 constraint rows each
    assert_eq!(oracle.constraint_count(), 105);
}
