//! Forward-dynamics simulation driven by actuator force histories.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::checks::loop_residual_max;
use crate::dynamics::{
    forward_dynamics_rhs, inverse_dynamics, platform_x, reference_guess, reproject, InvDynResult, MachineState,
};
use crate::error::{Error, Result};
use crate::pkm::Pkm;
use crate::se3::Wrench;
use crate::trajectory::{fmt_num, task_sample, Trajectory};

/// Loop residual above which a simulation is aborted.
pub const RESIDUAL_ABORT: f64 = 1e-4;

/// Actuator forces as a function of time.
pub enum TorqueSource {
    /// Inverse-dynamics forces along an analytic trajectory, evaluated at every RK4 stage.
    Replay { trajectory: Trajectory, guess: Vec<DVector<f64>> },
    /// Piecewise-linear table, held constant outside its time range.
    Table { t: Vec<f64>, u: Vec<DVector<f64>> },
}

impl TorqueSource {
    pub fn replay(pkm: &Pkm, trajectory: Trajectory) -> Result<Self> {
        if trajectory.at(0.0).is_none() {
            return Err(Error::Validation("torque replay needs an analytic trajectory".into()));
        }
        Ok(TorqueSource::Replay { trajectory, guess: reference_guess(pkm) })
    }

    /// Reads a table with a `t` column and `u0, u1, ..` columns (other columns ignored),
    /// for example the output of the inverse-dynamics command.
    pub fn from_csv_reader(r: impl Read, n_act: usize) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rd.headers()?.clone();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Validation(format!("torque table has no column {name}")))
        };
        let tc = col("t")?;
        let uc = (0..n_act).map(|i| col(&format!("u{i}"))).collect::<Result<Vec<_>>>()?;
        let (mut t, mut u) = (Vec::new(), Vec::new());
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| {
                rec[c].parse::<f64>().map_err(|e| Error::Validation(format!("torque table row {}: {e}", i + 1)))
            };
            let ti = num(tc)?;
            if t.last().is_some_and(|&p| !(ti > p)) {
                return Err(Error::Validation(format!("torque table row {}: time not increasing", i + 1)));
            }
            t.push(ti);
            u.push(DVector::from_vec(uc.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?));
        }
        if t.is_empty() {
            return Err(Error::Validation("torque table is empty".into()));
        }
        Ok(TorqueSource::Table { t, u })
    }

    pub fn load_csv(path: &Path, n_act: usize) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|source| Error::Io { path: path.into(), source })?;
        Self::from_csv_reader(f, n_act)
    }

    /// Actuator forces at time `t`.
    pub fn at(&mut self, pkm: &Pkm, t: f64) -> Result<DVector<f64>> {
        match self {
            TorqueSource::Replay { trajectory, guess } => {
                let p = trajectory.at(t).expect("analytic trajectory");
                let r: InvDynResult = inverse_dynamics(pkm, &task_sample(pkm, &p)?, guess)
                    .map_err(|e| e.context(&format!("torque replay at t = {t}")))?;
                *guess = r.thetas;
                Ok(r.u)
            }
            TorqueSource::Table { t: ts, u } => {
                let k = ts.partition_point(|&s| s <= t);
                Ok(if k == 0 {
                    u[0].clone()
                } else if k == ts.len() {
                    u[k - 1].clone()
                } else {
                    let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
                    &u[k - 1] * (1.0 - w) + &u[k] * w
                })
            }
        }
    }
}

/// One RK4 step with time-varying actuator forces, followed by re-projection.
pub fn rk4_step_driven(
    pkm: &Pkm,
    st: &MachineState,
    t: f64,
    dt: f64,
    source: &mut TorqueSource,
    w_ee: &Wrench,
) -> Result<MachineState> {
    let add = |s: &MachineState, k: &(Vec<DVector<f64>>, DVector<f64>), h: f64| MachineState {
        thetas: s.thetas.iter().zip(&k.0).map(|(th, d)| th + d * h).collect(),
        vt: &s.vt + &k.1 * h,
    };
    let u0 = source.at(pkm, t)?;
    let um = source.at(pkm, t + dt / 2.0)?;
    let u1 = source.at(pkm, t + dt)?;
    let k1 = forward_dynamics_rhs(pkm, st, &u0, w_ee)?;
    let k2 = forward_dynamics_rhs(pkm, &add(st, &k1, dt / 2.0), &um, w_ee)?;
    let k3 = forward_dynamics_rhs(pkm, &add(st, &k2, dt / 2.0), &um, w_ee)?;
    let k4 = forward_dynamics_rhs(pkm, &add(st, &k3, dt), &u1, w_ee)?;
    let mut out = MachineState {
        thetas: (0..st.thetas.len())
            .map(|l| &st.thetas[l] + (&k1.0[l] + &k2.0[l] * 2.0 + &k3.0[l] * 2.0 + &k4.0[l]) * (dt / 6.0))
            .collect(),
        vt: &st.vt + (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * (dt / 6.0),
    };
    reproject(pkm, &mut out)?;
    Ok(out)
}

/// Recorded simulation sample.
#[derive(Clone, Debug)]
pub struct SimRow {
    pub t: f64,
    pub x: DVector<f64>,
    pub vt: DVector<f64>,
    pub u: DVector<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct SimReport {
    pub rows: Vec<SimRow>,
    pub max_residual: f64,
    /// Largest `‖x − x_ref‖∞` against the replayed trajectory.
    pub max_tracking: Option<f64>,
    pub final_state: MachineState,
}

/// Consistent state at the start of a trajectory.
pub fn initial_state(pkm: &Pkm, trajectory: &Trajectory) -> Result<MachineState> {
    let p = trajectory.points().into_iter().next().ok_or_else(|| Error::Validation("empty trajectory".into()))?;
    let s = task_sample(pkm, &p)?;
    let (thetas, _) = crate::limb_kin::machine_ik(pkm, &s.x, &reference_guess(pkm))?;
    Ok(MachineState { thetas, vt: s.vt })
}

/// Integrates from `st` over `duration` with step `dt`, recording every `record_every`-th step.
pub fn simulate(
    pkm: &Pkm,
    mut st: MachineState,
    source: &mut TorqueSource,
    dt: f64,
    duration: f64,
    record_every: usize,
) -> Result<SimReport> {
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::Validation(format!("simulation needs dt > 0 and duration ≥ 0 (dt {dt})")));
    }
    let reference = match source {
        TorqueSource::Replay { trajectory, .. } => Some(trajectory.clone()),
        TorqueSource::Table { .. } => None,
    };
    let steps = (duration / dt + 1e-9).floor() as usize;
    let every = record_every.max(1);
    let w_ee = Wrench::zeros();
    let mut rows = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut max_tracking: Option<f64> = reference.as_ref().map(|_| 0.0);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let residual = loop_residual_max(pkm, &st.thetas)?;
        max_residual = max_residual.max(residual);
        if residual > RESIDUAL_ABORT {
            return Err(Error::Divergence {
                what: format!("loop closure at t = {t} (last recorded residual {max_residual:.3e})"),
                iterations: k,
                residual,
            });
        }
        let x = platform_x(pkm, &st.thetas[0]);
        if let (Some(tr), Some(m)) = (&reference, max_tracking.as_mut()) {
            let p = tr.at(t).expect("analytic trajectory");
            *m = m.max((&x - &p.x).amax());
        }
        if k % every == 0 || k == steps {
            let u = source.at(pkm, t)?;
            rows.push(SimRow { t, x, vt: st.vt.clone(), u, residual });
        }
        if k < steps {
            st = rk4_step_driven(pkm, &st, t, dt, source, &w_ee).map_err(|e| e.context(&format!("t = {t}")))?;
        }
    }
    Ok(SimReport { rows, max_residual, max_tracking, final_state: st })
}

pub fn simulation_header(pkm: &Pkm) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..pkm.dof()).map(|i| format!("x{i}")));
    h.extend((0..pkm.dof()).map(|i| format!("v{i}")));
    h.extend((0..pkm.n_act()).map(|i| format!("u{i}")));
    h.push("loop_residual".into());
    h
}

pub fn write_simulation_csv(pkm: &Pkm, rows: &[SimRow], w: impl Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(simulation_header(pkm))?;
    for r in rows {
        let vals = std::iter::once(r.t)
            .chain(r.x.iter().copied())
            .chain(r.vt.iter().copied())
            .chain(r.u.iter().copied())
            .chain(std::iter::once(r.residual));
        wr.write_record(vals.map(fmt_num))?;
    }
    wr.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolation() {
        let csv = "t,u0,u1\n0,0,1\n1,2,3\n";
        let mut s = TorqueSource::from_csv_reader(csv.as_bytes(), 2).unwrap();
        let pkm = crate::models::fourbar::fourbar_pkm(&Default::default()).unwrap();
        assert_eq!(s.at(&pkm, 0.25).unwrap().as_slice(), &[0.5, 1.5]);
        assert_eq!(s.at(&pkm, 5.0).unwrap().as_slice(), &[2.0, 3.0]);
        assert_eq!(s.at(&pkm, -1.0).unwrap().as_slice(), &[0.0, 1.0]);
        assert!(TorqueSource::from_csv_reader("t,u0\n0,1\n".as_bytes(), 2).is_err());
        assert!(TorqueSource::from_csv_reader("t,u0\n1,1\n0,1\n".as_bytes(), 1).is_err());
    }
}
