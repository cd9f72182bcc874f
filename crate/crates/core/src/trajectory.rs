//! Taskspace trajectories, trajectory-level inverse dynamics and CSV output.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::dynamics::{inverse_dynamics, InvDynResult, ParallelSolver, TaskSample};
use crate::error::{Error, Result};
use crate::limb_kin::actuator_values;
use crate::pkm::Pkm;
use crate::se3::Wrench;

/// Default sinusoid amplitude (m) for three-dimensional charts.
pub const DEFAULT_AMPLITUDE: [f64; 3] = [0.3, 0.4, 0.1];
/// Default sinusoid period (s).
pub const DEFAULT_PERIOD: f64 = 10.0;
/// Default sampling step (s).
pub const DEFAULT_DT: f64 = 0.01;

/// Chart coordinates and their first two time derivatives at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: DVector<f64>,
    pub xd: DVector<f64>,
    pub xdd: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Trajectory {
    /// `x(t) = origin + amplitude·sin(2πt/period)`, derivatives analytic.
    Sinusoid { origin: DVector<f64>, amplitude: DVector<f64>, period: f64, dt: f64, duration: f64 },
    /// Explicit samples.
    Samples(Vec<TrajectoryPoint>),
}

fn parse_vec(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Validation(format!("bad number '{v}' in trajectory: {e}"))))
        .collect()
}

impl Trajectory {
    pub fn sinusoid(origin: DVector<f64>, amplitude: DVector<f64>, period: f64, dt: f64, duration: f64) -> Result<Self> {
        if origin.len() != amplitude.len() {
            return Err(Error::Validation(format!(
                "trajectory amplitude has {} entries for {} chart coordinates",
                amplitude.len(),
                origin.len()
            )));
        }
        if !(dt > 0.0) || !(period > 0.0) || !(duration >= 0.0) || !dt.is_finite() {
            return Err(Error::Validation(format!(
                "trajectory needs dt > 0, period > 0 and duration ≥ 0 (dt {dt}, period {period}, duration {duration})"
            )));
        }
        Ok(Trajectory::Sinusoid { origin, amplitude, period, dt, duration })
    }

    /// Parses `sin[:amp=a,b,..][:period=T][:origin=x,y,..]` or, if `spec` names
    /// an existing file, loads CSV samples. `origin` defaults to `reference`.
    pub fn parse(spec: &str, reference: &DVector<f64>, dt: Option<f64>, duration: Option<f64>) -> Result<Self> {
        let path = Path::new(spec);
        if path.is_file() {
            return Self::load_csv(path);
        }
        let mut parts = spec.split(':');
        let kind = parts.next().unwrap_or_default();
        if kind != "sin" && kind != "sinusoid" {
            return Err(Error::Validation(format!(
                "trajectory '{spec}' is neither a file nor a sinusoid spec (sin[:amp=..][:period=..][:origin=..])"
            )));
        }
        let mut amp = (reference.len() == 3).then(|| DEFAULT_AMPLITUDE.to_vec());
        let mut period = DEFAULT_PERIOD;
        let mut origin = reference.clone();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("trajectory option '{p}' is not key=value")))?;
            match k {
                "amp" => amp = Some(parse_vec(v)?),
                "period" => period = parse_vec(v)?.first().copied().unwrap_or(f64::NAN),
                "origin" => origin = DVector::from_vec(parse_vec(v)?),
                _ => return Err(Error::Validation(format!("unknown trajectory option '{k}'"))),
            }
        }
        let amp = amp.ok_or_else(|| Error::Validation("sinusoid amplitude required for this chart".into()))?;
        let dt = dt.unwrap_or(DEFAULT_DT);
        let duration = duration.unwrap_or(period);
        Self::sinusoid(origin, DVector::from_vec(amp), period, dt, duration)
    }

    /// Reads samples with header `t, x0.., xd0.., xdd0..`.
    pub fn from_csv_reader(r: impl Read) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rd.headers()?.clone();
        let cols = header.len();
        if cols < 4 || (cols - 1) % 3 != 0 || &header[0] != "t" {
            return Err(Error::Validation(format!(
                "trajectory CSV header must be t, x0.., xd0.., xdd0.. (got {} columns)",
                cols
            )));
        }
        let d = (cols - 1) / 3;
        let mut pts: Vec<TrajectoryPoint> = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Validation(format!("trajectory CSV row {}: {e}", i + 1)))?;
            let t = v[0];
            if let Some(prev) = pts.last() {
                if !(t > prev.t) {
                    return Err(Error::Validation(format!("trajectory CSV row {}: time not increasing", i + 1)));
                }
            }
            pts.push(TrajectoryPoint {
                t,
                x: DVector::from_column_slice(&v[1..1 + d]),
                xd: DVector::from_column_slice(&v[1 + d..1 + 2 * d]),
                xdd: DVector::from_column_slice(&v[1 + 2 * d..]),
            });
        }
        if pts.is_empty() {
            return Err(Error::Validation("trajectory CSV has no samples".into()));
        }
        Ok(Trajectory::Samples(pts))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|source| Error::Io { path: path.into(), source })?;
        Self::from_csv_reader(f).map_err(|e| e.context(&path.display().to_string()))
    }

    /// Writes the samples in the format read by [`Trajectory::from_csv_reader`].
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let pts = self.points();
        let d = pts.first().map_or(0, |p| p.x.len());
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        for pre in ["x", "xd", "xdd"] {
            header.extend((0..d).map(|i| format!("{pre}{i}")));
        }
        wr.write_record(&header)?;
        for p in &pts {
            let row = std::iter::once(p.t).chain(p.x.iter().copied()).chain(p.xd.iter().copied()).chain(p.xdd.iter().copied());
            wr.write_record(row.map(fmt_num))?;
        }
        wr.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Number of chart coordinates.
    pub fn dim(&self) -> usize {
        match self {
            Trajectory::Sinusoid { origin, .. } => origin.len(),
            Trajectory::Samples(p) => p[0].x.len(),
        }
    }

    /// Sample at time `t` (sinusoid only).
    pub fn at(&self, t: f64) -> Option<TrajectoryPoint> {
        match self {
            Trajectory::Sinusoid { origin, amplitude, period, .. } => {
                let w = 2.0 * PI / period;
                let (s, c) = (w * t).sin_cos();
                Some(TrajectoryPoint {
                    t,
                    x: origin + amplitude * s,
                    xd: amplitude * (w * c),
                    xdd: amplitude * (-w * w * s),
                })
            }
            Trajectory::Samples(_) => None,
        }
    }

    pub fn points(&self) -> Vec<TrajectoryPoint> {
        match self {
            Trajectory::Sinusoid { dt, duration, .. } => {
                let n = (duration / dt + 1e-9).floor() as usize;
                (0..=n).filter_map(|k| self.at(k as f64 * dt)).collect()
            }
            Trajectory::Samples(p) => p.clone(),
        }
    }
}

/// Converts chart derivatives into an inverse-dynamics sample without end-effector load.
pub fn task_sample(pkm: &Pkm, p: &TrajectoryPoint) -> Result<TaskSample> {
    if p.x.len() != pkm.dof() {
        return Err(Error::Validation(format!(
            "trajectory has {} coordinates but the platform has {} DOF",
            p.x.len(),
            pkm.dof()
        )));
    }
    let (vt, vt_dot) = pkm.task.velocities(&p.x, &p.xd, &p.xdd)?;
    Ok(TaskSample { x: p.x.clone(), vt, vt_dot, w_ee: Wrench::zeros() })
}

/// One row of an inverse-dynamics run.
#[derive(Clone, Debug)]
pub struct InvDynRow {
    pub t: f64,
    pub x: DVector<f64>,
    pub theta_act: DVector<f64>,
    pub u: DVector<f64>,
    pub thetas: Vec<DVector<f64>>,
    pub iterations: usize,
}

/// Inverse dynamics along a trajectory with warm-started IK.
///
/// The IK seed of each sample is `ϑ_prev + ϑ̇_prev Δt`; the first sample starts
/// from `guess`. With `parallel`, each sample is evaluated by the worker pool.
pub fn run_inverse_dynamics(
    pkm: &Pkm,
    points: &[TrajectoryPoint],
    guess: &[DVector<f64>],
    parallel: Option<&ParallelSolver>,
) -> Result<Vec<InvDynRow>> {
    let mut seed: Vec<DVector<f64>> = guess.to_vec();
    let mut rows = Vec::with_capacity(points.len());
    let mut prev: Option<(f64, InvDynResult)> = None;
    for p in points {
        if let Some((tp, r)) = &prev {
            let h = p.t - tp;
            seed = r.thetas.iter().zip(&r.theta_dots).map(|(t, td)| t + td * h).collect();
        }
        let s = task_sample(pkm, p)?;
        let r = match parallel {
            Some(ps) => ps.inverse_dynamics(pkm, &s, &seed),
            None => inverse_dynamics(pkm, &s, &seed),
        }
        .map_err(|e| e.context(&format!("t = {}", p.t)))?;
        rows.push(InvDynRow {
            t: p.t,
            x: p.x.clone(),
            theta_act: actuator_values(pkm, &r.thetas),
            u: r.u.clone(),
            thetas: r.thetas.clone(),
            iterations: r.iterations,
        });
        prev = Some((p.t, r));
    }
    Ok(rows)
}

/// Numeric field format of all CSV output: 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

/// Header of the inverse-dynamics CSV.
pub fn invdyn_header(pkm: &Pkm) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..pkm.dof()).map(|i| format!("x{i}")));
    h.extend((0..pkm.n_act()).map(|i| format!("theta_act{i}")));
    h.extend((0..pkm.n_act()).map(|i| format!("u{i}")));
    for (l, limb) in pkm.limbs.iter().enumerate() {
        h.extend((0..limb.n()).map(|j| format!("l{l}_theta{j}")));
    }
    h
}

pub fn write_invdyn_csv(pkm: &Pkm, rows: &[InvDynRow], w: impl Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(invdyn_header(pkm))?;
    for r in rows {
        let vals = std::iter::once(r.t)
            .chain(r.x.iter().copied())
            .chain(r.theta_act.iter().copied())
            .chain(r.u.iter().copied())
            .chain(r.thetas.iter().flat_map(|t| t.iter().copied()));
        wr.write_record(vals.map(fmt_num))?;
    }
    wr.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
