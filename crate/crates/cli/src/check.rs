//! Invariant suite run by the `check` command.

use std::fmt;

use nalgebra::DVector;

use pkmdyn::checks::{
    body_jacobian_error, derivative_errors, loop_residual_max, mount_symmetry_error, power_balance_error,
    random_samples, rel_err_vec, Sample,
};
use pkmdyn::dynamics::{evaluate_state, inverse_dynamics, reference_guess, MachineState, TaskSample};
use pkmdyn::models::ModelFile;
use pkmdyn::pkm::Pkm;
use pkmdyn::se3::Wrench;
use pkmdyn::trajectory::{run_inverse_dynamics, Trajectory};
use pkmdyn_oracle::{Oracle, OracleError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        write!(f, "{s} {}: {}", self.name, self.detail)
    }
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub seed: u64,
    pub samples: usize,
    pub amplitude: f64,
}

pub const JACOBIAN_TOL: f64 = 1e-6;
pub const LOOP_TOL: f64 = 1e-9;
pub const POWER_TOL: f64 = 1e-7;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 1e-6;

fn bounded(name: &'static str, value: pkmdyn::Result<f64>, tol: f64, what: &str) -> CheckResult {
    match value {
        Ok(v) if v <= tol => CheckResult { name, status: Status::Pass, detail: format!("{what} {v:.3e} (tol {tol:.0e})") },
        Ok(v) => CheckResult { name, status: Status::Fail, detail: format!("{what} {v:.3e} (tol {tol:.0e})") },
        Err(e) => CheckResult { name, status: Status::Fail, detail: e.to_string() },
    }
}

fn over_samples(samples: &[Sample], mut f: impl FnMut(&Sample) -> pkmdyn::Result<f64>) -> pkmdyn::Result<f64> {
    samples.iter().try_fold(0.0_f64, |m, s| Ok(m.max(f(s)?)))
}

fn mass_matrix_check(pkm: &Pkm, samples: &[Sample]) -> CheckResult {
    let name = "mass-matrix";
    let mut asym: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for s in samples {
        let st = MachineState { thetas: s.thetas.clone(), vt: s.vt.clone() };
        match evaluate_state(pkm, &st) {
            Ok(ev) => {
                let m = &ev.terms.m;
                asym = asym.max((m - m.transpose()).amax() / m.amax().max(1.0));
                min_eig = min_eig.min(m.clone().symmetric_eigen().eigenvalues.min());
            }
            Err(e) => return CheckResult { name, status: Status::Fail, detail: e.to_string() },
        }
    }
    let ok = asym <= 1e-12 && min_eig > 0.0;
    CheckResult {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail: format!("M_t asymmetry {asym:.3e}, smallest eigenvalue {min_eig:.3e}"),
    }
}

fn oracle_check(file: &ModelFile, pkm: &Pkm, amplitude: f64) -> CheckResult {
    let name = "oracle-equivalence";
    let mut oracle = match Oracle::from_model(file) {
        Ok(o) => o,
        Err(OracleError::Unsupported(m)) => {
            return CheckResult { name, status: Status::Skip, detail: format!("reference solver does not support {m}") }
        }
        Err(e) => return CheckResult { name, status: Status::Fail, detail: e.to_string() },
    };
    let d = pkm.dof();
    let traj = match Trajectory::sinusoid(pkm.reference_x(), DVector::from_element(d, amplitude), 1.0, 0.01, 0.5) {
        Ok(t) => t,
        Err(e) => return CheckResult { name, status: Status::Fail, detail: e.to_string() },
    };
    let points = traj.points();
    let rows = match run_inverse_dynamics(pkm, &points, &reference_guess(pkm), None) {
        Ok(r) => r,
        Err(e) => return CheckResult { name, status: Status::Fail, detail: e.to_string() },
    };
    let mut worst: f64 = 0.0;
    for (p, r) in points.iter().zip(&rows) {
        match oracle.inverse_dynamics(&p.x, &p.xd, &p.xdd, None) {
            Ok(sol) => worst = worst.max(rel_err_vec(&r.u, &sol.u)),
            Err(e) => return CheckResult { name, status: Status::Fail, detail: format!("t = {}: {e}", p.t) },
        }
    }
    bounded(name, Ok(worst), ORACLE_TOL, &format!("{} samples, max relative torque error", points.len()))
}

/// Runs every check; failures are reported per check, never aborting the suite.
pub fn run_checks(file: &ModelFile, pkm: &Pkm, opts: &CheckOptions) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let samples = match random_samples(pkm, &[opts.amplitude], 0.5, opts.samples, opts.seed) {
        Ok(s) => s,
        Err(e) => {
            out.push(CheckResult { name: "sampling", status: Status::Fail, detail: e.to_string() });
            return out;
        }
    };
    let n = samples.len();
    out.push(bounded(
        "loop-residual",
        over_samples(&samples, |s| loop_residual_max(pkm, &s.thetas)),
        LOOP_TOL,
        &format!("{n} samples, max residual"),
    ));
    out.push(bounded(
        "body-jacobian-fd",
        over_samples(&samples, |s| {
            Ok(pkm.limbs.iter().zip(&s.thetas).map(|(l, t)| body_jacobian_error(l, t)).fold(0.0, f64::max))
        }),
        JACOBIAN_TOL,
        "max relative error",
    ));
    let labels = ["jdot-fd", "hdot-fd", "fdot-fd", "theta-ddot-fd"];
    let errs = (|| {
        let mut worst = [0.0_f64; 4];
        for s in &samples {
            for l in 0..pkm.limbs.len() {
                let e = derivative_errors(pkm, l, s)?;
                for k in 0..4 {
                    worst[k] = worst[k].max(e[k]);
                }
            }
        }
        Ok::<_, pkmdyn::Error>(worst)
    })();
    for (k, name) in labels.into_iter().enumerate() {
        let v = errs.as_ref().map(|w| w[k]).map_err(|e| pkmdyn::Error::Validation(e.to_string()));
        out.push(bounded(name, v, JACOBIAN_TOL, "max relative error"));
    }
    out.push(mass_matrix_check(pkm, &samples));
    out.push(bounded(
        "power-balance",
        over_samples(&samples, |s| {
            let task = TaskSample { x: s.x.clone(), vt: s.vt.clone(), vt_dot: s.vt_dot.clone(), w_ee: Wrench::zeros() };
            let r = inverse_dynamics(pkm, &task, &s.thetas)?;
            let st = MachineState { thetas: r.thetas, vt: s.vt.clone() };
            power_balance_error(pkm, &st, &r.u, &Wrench::zeros())
        }),
        POWER_TOL,
        "max relative error",
    ));
    out.push(match mount_symmetry_error(pkm, &reference_guess(pkm)) {
        Ok(Some(e)) => bounded("mount-symmetry", Ok(e), SYMMETRY_TOL, "J_IK deviation at reference"),
        Ok(None) => CheckResult {
            name: "mount-symmetry",
            status: Status::Skip,
            detail: "needs several limbs and a translational chart".into(),
        },
        Err(e) => CheckResult { name: "mount-symmetry", status: Status::Fail, detail: e.to_string() },
    });
    out.push(oracle_check(file, pkm, opts.amplitude));
    out
}
