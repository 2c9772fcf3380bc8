//! Gate assembly: merge, hold, split.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::model::{Detail, MergeModel};
use super::pulse::{ControlPulse, Interpolation, Knot};
use crate::constants::{C, HBAR};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Swap,
    SqrtSwap,
}

impl GateKind {
    /// Exchange phase of one quantum of this gate, rad.
    pub fn unit_phase(self) -> f64 {
        match self {
            GateKind::Swap => PI,
            GateKind::SqrtSwap => 0.5 * PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateTiming {
    /// s
    pub total: f64,
    /// s
    pub hold: f64,
    /// odd multiple of the unit phase reached
    pub multiple: u32,
    /// rad
    pub phase: f64,
}

/// Hold time that brings `2 merge_phase + U_int t_hold / hbar` to the
/// smallest odd multiple of the gate's unit phase not below `2 merge_phase`.
///
/// Odd multiples only: `3 pi / 2` is a square root of SWAP, `pi` is not.
pub fn assemble_gate_times(tau: f64, merge_phase: f64, u_int: f64, gate: GateKind) -> Result<GateTiming> {
    if !(u_int > 0.0) {
        return Err(Error::NoOverlap);
    }
    if !(tau >= 0.0 && merge_phase >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "merge time and phase must be non-negative, got {tau} / {merge_phase}"
        )));
    }
    let unit = gate.unit_phase();
    let base = 2.0 * merge_phase;
    let mut m = (base / unit).ceil().max(1.0) as u32;
    if m.is_multiple_of(2) {
        m += 1;
    }
    let phase = m as f64 * unit;
    let hold = ((phase - base) * HBAR / u_int).max(0.0);
    Ok(GateTiming {
        total: 2.0 * tau + hold,
        hold,
        multiple: m,
        phase,
    })
}

/// `1 - exp(-(2 N_merge + R_hold t_hold))`: the split replays the merge.
pub fn gate_scattering(merge_photons: f64, hold_rate: f64, hold: f64) -> f64 {
    let n = 2.0 * merge_photons + hold_rate * hold;
    -(-n).exp_m1()
}

/// Retro-reflector phase shift `2 pi d dnu / c` from a laser frequency step.
pub fn frequency_to_phase(delta_nu: f64, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mirror distance must be positive, got {distance}"
        )));
    }
    Ok(2.0 * PI * distance * delta_nu / C)
}

/// Knot table in a serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    /// s
    pub tau: f64,
    pub interpolation: Interpolation,
    pub knots: Vec<Knot>,
}

impl From<&ControlPulse> for PulseRecord {
    fn from(p: &ControlPulse) -> Self {
        PulseRecord {
            tau: p.tau,
            interpolation: p.interpolation,
            knots: p.knots.clone(),
        }
    }
}

impl TryFrom<&PulseRecord> for ControlPulse {
    type Error = Error;
    fn try_from(r: &PulseRecord) -> Result<Self> {
        ControlPulse::new(r.knots.clone(), r.interpolation)
    }
}

pub const GATE_REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub version: u32,
    pub config_hash: String,
    pub cycles: u32,
    /// s
    pub tau: f64,
    pub f_target: f64,
    pub f_all: f64,
    pub f_error: f64,
    /// rad, one merge
    pub merge_phase: f64,
    /// interaction energy in the merged well, J
    pub u_int: f64,
    pub swap: GateTiming,
    pub sqrt_swap: GateTiming,
    /// s
    pub t_swap: f64,
    /// s
    pub t_sqrt_swap: f64,
    pub p_sc_swap: f64,
    pub p_sc_sqrt_swap: f64,
    pub merge_photons: f64,
    /// 1/s
    pub hold_rate: f64,
    pub failure: Option<String>,
    pub pulse: PulseRecord,
}

/// Full evaluation of one pulse: all fidelities, gate times and scattering.
pub fn gate_report(model: &MergeModel, pulse: &ControlPulse, config_hash: &str) -> Result<GateReport> {
    let full = model.evaluate(pulse, Detail::Full)?;
    let (f_error, _) = model.evaluate_error(pulse, &model.config.error_box)?;
    // the nominal point is inside the box; keep the ordering exact
    let f_error = f_error.min(full.f_all);
    let timing = |g| {
        assemble_gate_times(pulse.tau, full.merge_phase, full.u_int_final, g).unwrap_or(GateTiming {
            total: f64::NAN,
            hold: f64::NAN,
            multiple: 0,
            phase: f64::NAN,
        })
    };
    let swap = timing(GateKind::Swap);
    let sqrt_swap = timing(GateKind::SqrtSwap);
    let p_sc = |t: &GateTiming| gate_scattering(full.merge_photons, full.final_rate, t.hold);
    Ok(GateReport {
        version: GATE_REPORT_VERSION,
        config_hash: config_hash.to_string(),
        cycles: model.config.cycles,
        tau: pulse.tau,
        f_target: full.f_target,
        f_all: full.f_all,
        f_error,
        merge_phase: full.merge_phase,
        u_int: full.u_int_final,
        t_swap: swap.total,
        t_sqrt_swap: sqrt_swap.total,
        p_sc_swap: p_sc(&swap),
        p_sc_sqrt_swap: p_sc(&sqrt_swap),
        swap,
        sqrt_swap,
        merge_photons: full.merge_photons,
        hold_rate: full.final_rate,
        failure: full.failure,
        pulse: PulseRecord::from(pulse),
    })
}
