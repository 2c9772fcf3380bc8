//! Pulse optimization and duration continuation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::gate::{gate_report, GateReport};
use super::model::{MergeModel, Objective};
use super::pulse::ControlPulse;
use super::simplex::{maximize, SimplexSettings};
use crate::{Error, Result};

/// Initial simplex steps for depth and phase knots.
pub const DEPTH_STEP: f64 = 3.0;
pub const PHASE_STEP: f64 = 0.03;

/// Knot values as one parameter vector: depths then phases.
pub fn pulse_parameters(pulse: &ControlPulse) -> Vec<f64> {
    pulse
        .knots
        .iter()
        .map(|k| k.a1)
        .chain(pulse.knots.iter().map(|k| k.phi))
        .collect()
}

/// Inverse of [`pulse_parameters`] on uniform knots. Depths enter as `|p|`.
pub fn pulse_from_parameters(tau: f64, params: &[f64]) -> Result<ControlPulse> {
    let m = params.len() / 2;
    let a: Vec<f64> = params[..m].iter().map(|p| p.abs()).collect();
    ControlPulse::uniform(tau, &a, &params[m..])
}

#[derive(Debug, Clone)]
pub struct Optimized {
    pub pulse: ControlPulse,
    pub fidelity: f64,
    pub evals: usize,
}

/// Nelder-Mead over the knot values of `seed` stretched to `tau`.
pub fn optimize(
    model: &MergeModel,
    tau: f64,
    seed: &ControlPulse,
    objective: Objective,
    settings: &SimplexSettings,
) -> Result<Optimized> {
    let knots = model.config.interior_knots + 2;
    let start = if seed.knots.len() == knots {
        seed.rescaled(tau)?
    } else {
        seed.rescaled(tau)?.resampled(knots)?
    };
    let x0 = pulse_parameters(&start);
    let steps: Vec<f64> = (0..x0.len())
        .map(|i| if i < knots { DEPTH_STEP } else { PHASE_STEP })
        .collect();
    let f = |p: &[f64]| -> f64 {
        pulse_from_parameters(tau, p)
            .and_then(|pulse| model.fidelity(&pulse, objective))
            .unwrap_or(0.0)
    };
    let r = maximize(f, &x0, &steps, settings)?;
    log::info!(
        "tau = {:.1} us: {:?} fidelity {:.6} after {} evaluations",
        tau * 1e6,
        objective,
        r.value,
        r.evals
    );
    Ok(Optimized {
        pulse: pulse_from_parameters(tau, &r.best)?,
        fidelity: r.value,
        evals: r.evals,
    })
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    /// s
    pub tau: f64,
    /// best over both passes
    pub best: Option<Optimized>,
    /// descending, ascending
    pub passes: [Option<f64>; 2],
    pub failures: Vec<String>,
}

fn keep(point: &mut SweepPoint, pass: usize, result: Result<Optimized>) -> Option<ControlPulse> {
    match result {
        Ok(o) => {
            point.passes[pass] = Some(o.fidelity);
            let pulse = o.pulse.clone();
            if point.best.as_ref().is_none_or(|b| o.fidelity > b.fidelity) {
                point.best = Some(o);
            }
            Some(pulse)
        }
        Err(e) => {
            log::warn!("tau = {:.1} us, pass {}: {e}", point.tau * 1e6, pass + 1);
            point.failures.push(format!("pass {}: {e}", pass + 1));
            None
        }
    }
}

/// Two passes over `taus`: longest to shortest, then back up, each point
/// warm-started from its neighbour's optimum. Per-point failures are
/// recorded and the pass continues from the last good pulse.
pub fn continuation_sweep(
    model: &MergeModel,
    taus: &[f64],
    seed: &ControlPulse,
    objective: Objective,
    settings: &SimplexSettings,
) -> Result<Vec<SweepPoint>> {
    if taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("sweep durations must be positive".into()));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut points: Vec<SweepPoint> = sorted
        .iter()
        .map(|&tau| SweepPoint {
            tau,
            best: None,
            passes: [None, None],
            failures: Vec::new(),
        })
        .collect();
    let mut warm = seed.clone();
    for p in points.iter_mut().rev() {
        if let Some(next) = keep(p, 0, optimize(model, p.tau, &warm, objective, settings)) {
            warm = next;
        }
    }
    for p in points.iter_mut() {
        if let Some(next) = keep(p, 1, optimize(model, p.tau, &warm, objective, settings)) {
            warm = next;
        }
    }
    Ok(points)
}

/// Gate reports for every point that produced a pulse.
pub fn sweep_reports(model: &MergeModel, points: &[SweepPoint], config_hash: &str) -> Vec<Result<GateReport>> {
    points
        .iter()
        .filter_map(|p| p.best.as_ref())
        .map(|b| gate_report(model, &b.pulse, config_hash))
        .collect()
}

pub const SWEEP_HEADER: [&str; 8] = [
    "tau_us",
    "F_target",
    "F_all",
    "F_error",
    "T_swap_us",
    "T_sqrtswap_us",
    "P_sc_swap",
    "P_sc_sqrtswap",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau_us: f64,
    pub f_target: f64,
    pub f_all: f64,
    pub f_error: f64,
    pub t_swap_us: f64,
    pub t_sqrtswap_us: f64,
    pub p_sc_swap: f64,
    pub p_sc_sqrtswap: f64,
}

impl From<&GateReport> for SweepRow {
    fn from(r: &GateReport) -> Self {
        SweepRow {
            tau_us: r.tau * 1e6,
            f_target: r.f_target,
            f_all: r.f_all,
            f_error: r.f_error,
            t_swap_us: r.t_swap * 1e6,
            t_sqrtswap_us: r.t_sqrt_swap * 1e6,
            p_sc_swap: r.p_sc_swap,
            p_sc_sqrtswap: r.p_sc_sqrt_swap,
        }
    }
}

impl SweepRow {
    fn values(&self) -> [f64; 8] {
        [
            self.tau_us,
            self.f_target,
            self.f_all,
            self.f_error,
            self.t_swap_us,
            self.t_sqrtswap_us,
            self.p_sc_swap,
            self.p_sc_sqrtswap,
        ]
    }
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(SWEEP_HEADER).map_err(io)?;
    for r in rows {
        w.write_record(r.values().iter().map(|v| format!("{v:.16e}")))
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if header.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(Error::Parse("unexpected sweep header".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let v: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let v = v.map_err(|e| Error::Parse(e.to_string()))?;
        if v.len() != 8 {
            return Err(Error::Parse(format!("sweep row has {} fields", v.len())));
        }
        rows.push(SweepRow {
            tau_us: v[0],
            f_target: v[1],
            f_all: v[2],
            f_error: v[3],
            t_swap_us: v[4],
            t_sqrtswap_us: v[5],
            p_sc_swap: v[6],
            p_sc_sqrtswap: v[7],
        });
    }
    Ok(rows)
}
