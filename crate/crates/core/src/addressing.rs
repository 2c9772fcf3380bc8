//! Site-selective microwave addressing in the superlattice.
//!
//! A square microwave pulse resonant with the target well drives the other
//! wells off resonance by `Delta_R = (dU_i - dU_target) / hbar`. Keeping their
//! peak population below `P_t` fixes the Rabi frequency and hence the gate
//! time; photon scattering during that time sets the success probability.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomphys::{self, QubitState};
use crate::constants::HBAR;
use crate::superlattice::{ShiftEvaluation, SuperlatticeConfig};
use crate::{Error, Result};

/// Maximum tolerated off-target excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub p_t: f64,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec { p_t: 0.01 }
    }
}

impl ThresholdSpec {
    pub fn new(p_t: f64) -> Result<Self> {
        if !(p_t > 0.0 && p_t < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold population must lie in (0, 1), got {p_t}"
            )));
        }
        if p_t > 0.1 {
            log::warn!("threshold population {p_t} is outside the small-P_t regime");
        }
        Ok(ThresholdSpec { p_t })
    }
}

/// Off-resonant two-level excitation `(chi/Omega)^2 sin^2(Omega t / 2)`.
pub fn rabi_population(chi: f64, detuning: f64, t: f64) -> f64 {
    let omega = chi.hypot(detuning);
    if omega == 0.0 {
        return 0.0;
    }
    let r = chi / omega;
    let s = (0.5 * omega * t).sin();
    r * r * s * s
}

/// Detuning at which the peak off-resonant population equals `p_t`.
pub fn threshold_detuning(chi: f64, p_t: f64) -> f64 {
    chi * ((1.0 - p_t) / p_t).sqrt()
}

/// Resonant pi-pulse time when the closest neighbour sits at the threshold.
pub fn gate_time(min_detuning: f64, p_t: f64) -> Result<f64> {
    if !(p_t > 0.0 && p_t < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold population must lie in (0, 1), got {p_t}"
        )));
    }
    if !(min_detuning.abs() > 0.0) || !min_detuning.is_finite() {
        return Err(Error::Unaddressable(format!(
            "minimum detuning {min_detuning} rad/s leaves no spectral selectivity"
        )));
    }
    Ok(PI / (p_t.sqrt() * min_detuning.abs()))
}

/// Which well is addressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetChoice {
    #[default]
    Deepest,
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AddressingResult {
    /// min over i != target of |Delta_R|, rad/s
    pub min_detuning: f64,
    /// hbar min|Delta_R| / (eta E_r(lambda1))
    pub detuning_over_eta_er: f64,
    pub gate_time: f64,
    pub success_probability: f64,
    pub limiting_site: usize,
    pub target_site: usize,
    /// Wells merged or failed to pair between the two states.
    pub reduced: bool,
}

/// Scattering rate during the pulse for the atom in `target_site`, taking the
/// worse of the two qubit states. Three primary standing waves (one per axis,
/// the transverse ones at their antinode) plus the secondary beam along x.
pub fn target_scattering_rate(config: &SuperlatticeConfig, target_site: usize) -> Result<f64> {
    let sl = config.build()?;
    let set = sl.wells()?;
    let well = set
        .wells
        .get(target_site)
        .ok_or_else(|| Error::InvalidParameter(format!("no well with index {target_site}")))?;
    let sp = &config.species;
    let u_ref = atomphys::dipole_potential(sp, QubitState::ZERO, config.lambda1, config.pol1, 1.0)?;
    let i1 = sl.energy_scale() / u_ref.abs();
    let i2 = config.a * i1;
    let k1 = 2.0 * PI / config.lambda1;
    let k2 = 2.0 * PI / config.lambda2;
    let mut worst = 0.0f64;
    for (state, x) in [
        (QubitState::ZERO, well.position_state0),
        (QubitState::ONE, well.position_state1),
    ] {
        let g1 = atomphys::scattering_rate(sp, state, config.lambda1, i1)?;
        let g2 = atomphys::scattering_rate(sp, state, config.lambda2, i2)?;
        let c1 = (k1 * x + config.phi1).cos().powi(2);
        let c2 = (k2 * x + config.phi2).cos().powi(2);
        worst = worst.max(g1 * (c1 + 2.0) + g2 * c2);
    }
    Ok(worst)
}

/// Probability of no photon scattered by the target during `t_a`.
pub fn success_probability(config: &SuperlatticeConfig, target_site: usize, t_a: f64) -> Result<f64> {
    if !(t_a >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gate time must be non-negative, got {t_a}"
        )));
    }
    Ok((-target_scattering_rate(config, target_site)? * t_a).exp())
}

pub fn analyze(
    config: &SuperlatticeConfig,
    threshold: ThresholdSpec,
    target: TargetChoice,
) -> Result<AddressingResult> {
    let sl = config.build()?;
    let mut shifts = sl.differential_shifts(ShiftEvaluation::PerState)?;
    if let TargetChoice::Index(i) = target {
        if i >= shifts.shifts.len() {
            return Err(Error::InvalidParameter(format!(
                "target well {i} out of range, {} wells found",
                shifts.shifts.len()
            )));
        }
        shifts.target = i;
    }
    let (limiting_site, du) = shifts
        .min_relative()
        .ok_or_else(|| Error::Unaddressable("fewer than two wells per period".into()))?;
    let min_detuning = du / HBAR;
    let gate_time = gate_time(min_detuning, threshold.p_t)?;
    let success_probability = success_probability(config, shifts.target, gate_time)?;
    Ok(AddressingResult {
        min_detuning,
        detuning_over_eta_er: du / shifts.energy_scale,
        gate_time,
        success_probability,
        limiting_site,
        target_site: shifts.target,
        reduced: shifts.reduced,
    })
}

/// Inclusive linear axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidParameter("axis needs at least one point".into()));
        }
        if !(start.is_finite() && stop.is_finite()) || (points > 1 && !(stop > start)) {
            return Err(Error::InvalidParameter(format!("empty axis range [{start}, {stop}]")));
        }
        Ok(Axis { start, stop, points })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.points == 1 {
            self.start
        } else {
            self.start + (self.stop - self.start) * i as f64 / (self.points - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanCell {
    pub lambda2: f64,
    pub a: f64,
    pub outcome: std::result::Result<AddressingResult, String>,
}

/// Rows ordered by lambda2 (outer) then A (inner).
#[derive(Debug, Clone)]
pub struct ScanMap {
    pub lambda2: Axis,
    pub a: Axis,
    pub cells: Vec<ScanCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub cells: usize,
    pub failed_cells: usize,
    pub reduced_cells: usize,
    pub max_success_probability: f64,
    pub argmax_lambda2_nm: f64,
    pub argmax_a: f64,
    pub max_detuning_over_eta_er: f64,
    pub argmax_detuning_lambda2_nm: f64,
    pub argmax_detuning_a: f64,
}

/// Evaluates [`analyze`] on every (lambda2, A) cell. `template` supplies the
/// primary beam, polarizations, depth and species; its `lambda2` and `A` are
/// replaced per cell. Cells run in parallel and are returned in index order.
pub fn scan_map(
    template: &SuperlatticeConfig,
    lambda2: Axis,
    a: Axis,
    threshold: ThresholdSpec,
    target: TargetChoice,
) -> Result<ScanMap> {
    let margin = template.species.d1_wavelength();
    if lambda2.start <= margin {
        return Err(Error::InvalidParameter(format!(
            "scan must stay red of D1 ({:.3} nm), starts at {:.3} nm",
            margin * 1e9,
            lambda2.start * 1e9
        )));
    }
    if lambda2.stop >= template.lambda1 {
        return Err(Error::InvalidParameter(
            "secondary wavelengths must stay below the primary wavelength".into(),
        ));
    }
    let n_a = a.points;
    let cells = (0..lambda2.points * n_a)
        .into_par_iter()
        .map(|idx| {
            let mut cfg = template.clone();
            cfg.lambda2 = lambda2.value(idx / n_a);
            cfg.a = a.value(idx % n_a);
            let outcome = analyze(&cfg, threshold, target).map_err(|e| e.to_string());
            ScanCell {
                lambda2: cfg.lambda2,
                a: cfg.a,
                outcome,
            }
        })
        .collect();
    Ok(ScanMap { lambda2, a, cells })
}

fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

impl ScanMap {
    pub fn cell(&self, i_lambda: usize, i_a: usize) -> &ScanCell {
        &self.cells[i_lambda * self.a.points + i_a]
    }

    pub fn summary(&self) -> ScanSummary {
        let mut s = ScanSummary {
            cells: self.cells.len(),
            failed_cells: 0,
            reduced_cells: 0,
            max_success_probability: f64::NAN,
            argmax_lambda2_nm: f64::NAN,
            argmax_a: f64::NAN,
            max_detuning_over_eta_er: f64::NAN,
            argmax_detuning_lambda2_nm: f64::NAN,
            argmax_detuning_a: f64::NAN,
        };
        let mut best_p = f64::NEG_INFINITY;
        let mut best_d = f64::NEG_INFINITY;
        for c in &self.cells {
            match &c.outcome {
                Ok(r) => {
                    if r.reduced {
                        s.reduced_cells += 1;
                        continue;
                    }
                    if r.success_probability > best_p {
                        best_p = r.success_probability;
                        s.max_success_probability = best_p;
                        s.argmax_lambda2_nm = c.lambda2 * 1e9;
                        s.argmax_a = c.a;
                    }
                    if r.detuning_over_eta_er > best_d {
                        best_d = r.detuning_over_eta_er;
                        s.max_detuning_over_eta_er = best_d;
                        s.argmax_detuning_lambda2_nm = c.lambda2 * 1e9;
                        s.argmax_detuning_a = c.a;
                    }
                }
                Err(_) => s.failed_cells += 1,
            }
        }
        s
    }

    /// CSV with one row per cell; failed cells have empty value columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record([
            "lambda2_nm",
            "A",
            "detuning_over_etaEr",
            "gate_time_s_at_eta",
            "success_probability",
        ])
        .map_err(csv_err)?;
        for c in &self.cells {
            let (d, t, p) = match &c.outcome {
                Ok(r) => (r.detuning_over_eta_er, r.gate_time, r.success_probability),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            w.write_record([fmt17(c.lambda2 * 1e9), fmt17(c.a), fmt17(d), fmt17(t), fmt17(p)])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One parsed row of a scan CSV: `lambda2_nm, A` then optional values.
pub type CsvRow = [Option<f64>; 5];

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let mut row = [None; 5];
        for (slot, field) in row.iter_mut().zip(rec.iter()) {
            if !field.is_empty() {
                *slot = Some(
                    field
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad number '{field}'")))?,
                );
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
