//! Serial versus per-limb parallel timing of the inverse-dynamics pipeline.

use std::fmt;
use std::hint::black_box;
use std::time::Instant;

use nalgebra::DVector;

use crate::dynamics::{
    inverse_dynamics, limb_task, platform_generalized_force, reference_guess, ParallelSolver, TaskSample,
};
use crate::error::{Error, Result};
use crate::pkm::Pkm;
use crate::trajectory::{run_inverse_dynamics, task_sample, TrajectoryPoint};

/// One timing row.
#[derive(Clone, Debug)]
pub struct BenchRow {
    /// Experiment label: `1`, `2`, `3`, `3.1`.. `3.L`, `3.p`, `S`.
    pub exp: String,
    /// Worker count the row refers to.
    pub nodes: usize,
    pub equations: String,
    /// Mean wall-clock time per evaluation in microseconds.
    pub micros: f64,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub model: String,
    pub evals: usize,
    pub width: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, exp: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.exp == exp)
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model {}: {} evaluations per row, parallel width {}", self.model, self.evals, self.width)?;
        writeln!(f, "times are wall-clock means on this machine (hardware-dependent)")?;
        writeln!(f, "{:<5} {:>5}  {:<52} {:>12}", "exp", "nodes", "equations", "us/eval")?;
        for r in &self.rows {
            writeln!(f, "{:<5} {:>5}  {:<52} {:>12.3}", r.exp, r.nodes, r.equations, r.micros)?;
        }
        Ok(())
    }
}

fn time_per_eval(evals: usize, mut f: impl FnMut(usize) -> Result<()>) -> Result<f64> {
    let start = Instant::now();
    for k in 0..evals {
        f(k)?;
    }
    Ok(start.elapsed().as_secs_f64() * 1e6 / evals as f64)
}

/// `φ_t − W_EE`: IK of all limbs and the summed taskspace forces, without the final solve.
pub fn taskspace_force(pkm: &Pkm, s: &TaskSample, guess: &[DVector<f64>]) -> Result<DVector<f64>> {
    let mut total = DVector::zeros(pkm.dof());
    for (l, g) in guess.iter().enumerate() {
        total += limb_task(pkm, l, s, g)?.force;
    }
    total += platform_generalized_force(pkm, &s.x, &s.vt, &s.vt_dot, &s.w_ee);
    Ok(total)
}

/// Times every experiment over `evals` evaluations cycling through `points`,
/// each sample warm-started from the solution at the previous sample.
pub fn run_bench(pkm: &Pkm, points: &[TrajectoryPoint], evals: usize, threads: Option<usize>) -> Result<BenchReport> {
    if points.is_empty() || evals == 0 {
        return Err(Error::Validation("benchmark needs at least one sample and one evaluation".into()));
    }
    let rows = run_inverse_dynamics(pkm, points, &reference_guess(pkm), None)?;
    let samples = points.iter().map(|p| task_sample(pkm, p)).collect::<Result<Vec<_>>>()?;
    let n = samples.len();
    let seeds: Vec<Vec<DVector<f64>>> =
        (0..n).map(|i| rows[if i == 0 { n - 1 } else { i - 1 }].thetas.clone()).collect();
    let par = ParallelSolver::new(pkm, threads)?;
    let one = ParallelSolver::new(pkm, Some(1))?;
    let nl = pkm.limbs.len();
    let mut out = Vec::new();
    let mut push = |exp: String, nodes: usize, equations: String, micros: f64| {
        out.push(BenchRow { exp, nodes, equations, micros });
    };

    let t = time_per_eval(evals, |k| {
        let i = k % n;
        black_box(inverse_dynamics(pkm, &samples[i], &seeds[i])?);
        Ok(())
    })?;
    push("1".into(), 1, "IK & inverse dynamics u".into(), t);
    let t = time_per_eval(evals, |k| {
        let i = k % n;
        black_box(taskspace_force(pkm, &samples[i], &seeds[i])?);
        Ok(())
    })?;
    push("2".into(), 1, "IK of all limbs & taskspace EOM (phi_t - W_EE)".into(), t);
    let t = time_per_eval(evals, |k| {
        let i = k % n;
        black_box(par.inverse_dynamics(pkm, &samples[i], &seeds[i])?);
        Ok(())
    })?;
    push("3".into(), par.width(), "IK & limb terms in parallel, joined inverse dynamics".into(), t);
    for l in 0..nl {
        let t = time_per_eval(evals, |k| {
            let i = k % n;
            black_box(limb_task(pkm, l, &samples[i], &seeds[i][l])?);
            Ok(())
        })?;
        push(format!("3.{}", l + 1), par.width(), format!("IK & limb terms for limb {}", l + 1), t);
    }
    let t = time_per_eval(evals, |k| {
        let s = &samples[k % n];
        black_box(platform_generalized_force(pkm, &s.x, &s.vt, &s.vt_dot, &s.w_ee));
        Ok(())
    })?;
    push("3.p".into(), par.width(), "platform terms".into(), t);
    let t = time_per_eval(evals, |k| {
        let i = k % n;
        black_box(one.inverse_dynamics(pkm, &samples[i], &seeds[i])?);
        Ok(())
    })?;
    push("S".into(), 1, "parallel code path on one worker (overhead)".into(), t);
    Ok(BenchReport { model: pkm.name.clone(), evals, width: par.width(), rows: out })
}
