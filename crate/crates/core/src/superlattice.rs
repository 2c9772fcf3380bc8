//! Two-colour superlattice potential and its wells.
//!
//! Both beams are evaluated with the state-dependent dipole potential of
//! [`crate::atomphys`]. The overall scale is fixed so that the primary beam
//! alone gives a depth of `eta * E_r(lambda1)` for |0>; the secondary beam
//! carries `A` times the primary intensity. Each qubit state therefore sees
//!
//! ```text
//! U_s(x) = -eta E_r(l1) [ c1_s cos^2(k1 x + phi1) + A c2_s cos^2(k2 x + phi2) ]
//! c1_s = U_s(l1, P1) / U_0(l1, P1),   c2_s = U_s(l2, P2) / U_0(l1, P1)
//! ```

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::atomphys::{self, Polarization, QubitState, Species};
use crate::{Error, Result};

/// Samples per half secondary wavelength in the well pre-scan.
const SCAN_SAMPLES_PER_HALF_WAVE: f64 = 256.0;
/// Relative position tolerance of the refined minima (in units of a_SLP).
const POSITION_TOL: f64 = 1e-12;

/// Length of one superlattice period.
pub fn slp_length(lambda1: f64, lambda2: f64) -> Result<f64> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(Error::InvalidParameter("wavelengths must be positive".into()));
    }
    if !(lambda2 < lambda1) {
        return Err(Error::InvalidParameter(format!(
            "secondary wavelength {lambda2:e} must be shorter than primary {lambda1:e}"
        )));
    }
    Ok(0.5 / (1.0 / lambda2 - 1.0 / lambda1))
}

/// Secondary wavelength giving `n` secondary cycles per superlattice period.
pub fn wavelength_for_cycles(lambda1: f64, n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("cycle count must be >= 2, got {n}")));
    }
    if !(lambda1 > 0.0) {
        return Err(Error::InvalidParameter("wavelength must be positive".into()));
    }
    Ok(lambda1 * (n - 1) as f64 / n as f64)
}

/// Integer `n` with `lambda1/lambda2 = (n-1)/n`, if one exists to 1e-9.
pub fn cycles_of(lambda1: f64, lambda2: f64) -> Option<u32> {
    if !(lambda2 < lambda1) || lambda2 <= 0.0 {
        return None;
    }
    let n = lambda1 / (lambda1 - lambda2);
    let rounded = n.round();
    if rounded >= 2.0 && (n - rounded).abs() < 1e-9 * rounded {
        Some(rounded as u32)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperlatticeConfig {
    /// Primary (longer) wavelength, m.
    pub lambda1: f64,
    /// Secondary wavelength, m.
    pub lambda2: f64,
    /// Primary depth in units of E_r(lambda1).
    pub eta: f64,
    /// Secondary-to-primary intensity ratio.
    #[serde(rename = "A")]
    pub a: f64,
    pub pol1: Polarization,
    pub pol2: Polarization,
    #[serde(default)]
    pub phi1: f64,
    #[serde(default)]
    pub phi2: f64,
    pub species: Species,
}

impl SuperlatticeConfig {
    pub fn new(
        species: Species,
        lambda1: f64,
        lambda2: f64,
        eta: f64,
        a: f64,
        pol1: Polarization,
        pol2: Polarization,
    ) -> Self {
        SuperlatticeConfig {
            lambda1,
            lambda2,
            eta,
            a,
            pol1,
            pol2,
            phi1: 0.0,
            phi2: 0.0,
            species,
        }
    }

    /// Configuration with `lambda2 = lambda1 (n-1)/n`.
    pub fn with_cycles(
        species: Species,
        lambda1: f64,
        n: u32,
        eta: f64,
        a: f64,
        pol1: Polarization,
        pol2: Polarization,
    ) -> Result<Self> {
        let lambda2 = wavelength_for_cycles(lambda1, n)?;
        Ok(Self::new(species, lambda1, lambda2, eta, a, pol1, pol2))
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.eta > 0.0) {
            problems.push(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.a >= 0.0) {
            problems.push(format!("A must be non-negative, got {}", self.a));
        }
        if let Err(e) = slp_length(self.lambda1, self.lambda2) {
            problems.push(e.to_string());
        }
        for lam in [self.lambda1, self.lambda2] {
            if let Err(e) = self.species.check_red_detuned(lam) {
                problems.push(e.to_string());
            }
        }
        if !(self.phi1.is_finite() && self.phi2.is_finite()) {
            problems.push("phases must be finite".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    pub fn slp_length(&self) -> Result<f64> {
        slp_length(self.lambda1, self.lambda2)
    }

    pub fn cycles(&self) -> Option<u32> {
        cycles_of(self.lambda1, self.lambda2)
    }

    /// Recoil energy of the primary wavelength, J.
    pub fn recoil1(&self) -> Result<f64> {
        atomphys::recoil_energy(&self.species, self.lambda1)
    }

    pub fn build(&self) -> Result<Superlattice> {
        Superlattice::new(self)
    }
}

/// Evaluator with the state coefficients precomputed.
#[derive(Debug, Clone)]
pub struct Superlattice {
    k1: f64,
    k2: f64,
    phi1: f64,
    phi2: f64,
    a: f64,
    /// eta * E_r(lambda1), J
    scale: f64,
    /// (c1, c2) for |0>, |1>
    coeffs: [(f64, f64); 2],
    slp: f64,
    lambda2: f64,
    cycles: Option<u32>,
}

fn state_slot(state: QubitState) -> Result<usize> {
    match state {
        QubitState::ZERO => Ok(0),
        QubitState::ONE => Ok(1),
        other => Err(Error::InvalidParameter(format!(
            "state |F={}, m_F={}> is not a qubit state",
            other.f, other.m_f
        ))),
    }
}

impl Superlattice {
    pub fn new(config: &SuperlatticeConfig) -> Result<Self> {
        config.validate()?;
        let sp = &config.species;
        let reference = atomphys::dipole_potential(sp, QubitState::ZERO, config.lambda1, config.pol1, 1.0)?;
        let mut coeffs = [(0.0, 0.0); 2];
        for (slot, state) in QubitState::basis().into_iter().enumerate() {
            let u1 = atomphys::dipole_potential(sp, state, config.lambda1, config.pol1, 1.0)?;
            let u2 = atomphys::dipole_potential(sp, state, config.lambda2, config.pol2, 1.0)?;
            coeffs[slot] = (u1 / reference, u2 / reference);
        }
        Ok(Superlattice {
            k1: 2.0 * PI / config.lambda1,
            k2: 2.0 * PI / config.lambda2,
            phi1: config.phi1,
            phi2: config.phi2,
            a: config.a,
            scale: config.eta * config.recoil1()?,
            coeffs,
            slp: config.slp_length()?,
            lambda2: config.lambda2,
            cycles: config.cycles(),
        })
    }

    pub fn slp_length(&self) -> f64 {
        self.slp
    }

    /// `eta * E_r(lambda1)` in joules.
    pub fn energy_scale(&self) -> f64 {
        self.scale
    }

    /// Relative depth coefficients `(c1, c2)` of a qubit state.
    pub fn coefficients(&self, state: QubitState) -> Result<(f64, f64)> {
        Ok(self.coeffs[state_slot(state)?])
    }

    fn eval(&self, slot: usize, x: f64) -> f64 {
        let (c1, c2) = self.coeffs[slot];
        let p = (self.k1 * x + self.phi1).cos();
        let s = (self.k2 * x + self.phi2).cos();
        -self.scale * (c1 * p * p + self.a * c2 * s * s)
    }

    fn slope(&self, slot: usize, x: f64) -> f64 {
        let (c1, c2) = self.coeffs[slot];
        let p = (2.0 * (self.k1 * x + self.phi1)).sin();
        let s = (2.0 * (self.k2 * x + self.phi2)).sin();
        self.scale * (c1 * self.k1 * p + self.a * c2 * self.k2 * s)
    }

    /// Potential energy of `state` at `x`, J.
    pub fn potential(&self, state: QubitState, x: f64) -> Result<f64> {
        Ok(self.eval(state_slot(state)?, x))
    }

    pub fn potential_many(&self, state: QubitState, xs: &[f64]) -> Result<Vec<f64>> {
        let slot = state_slot(state)?;
        Ok(xs.iter().map(|&x| self.eval(slot, x)).collect())
    }

    /// Position, within `[0, a_SLP)`, of the deepest |0> minimum.
    fn deepest_centre(&self) -> f64 {
        let n = ((self.slp / (0.5 * self.lambda2)) * SCAN_SAMPLES_PER_HALF_WAVE).ceil() as usize;
        let dx = self.slp / n as f64;
        let (mut best_x, mut best_u) = (0.0, f64::INFINITY);
        for i in 0..n {
            let x = i as f64 * dx;
            let u = self.eval(0, x);
            if u < best_u {
                best_u = u;
                best_x = x;
            }
        }
        self.refine(0, best_x - dx, best_x + dx).unwrap_or(best_x)
    }

    /// Bisection on the analytic slope inside a sign-changing bracket.
    fn refine(&self, slot: usize, mut lo: f64, mut hi: f64) -> Option<f64> {
        if !(self.slope(slot, lo) <= 0.0 && self.slope(slot, hi) >= 0.0) {
            return None;
        }
        let tol = POSITION_TOL * self.slp;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.slope(slot, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Local minima of one state within one superlattice period centred on
    /// the deepest well.
    pub fn find_wells(&self, state: QubitState) -> Result<WellScan> {
        let slot = state_slot(state)?;
        let centre = self.deepest_centre();
        let periodic = self.cycles.is_some();
        let n = ((self.slp / (0.5 * self.lambda2)) * SCAN_SAMPLES_PER_HALF_WAVE).ceil() as usize;
        let dx = self.slp / n as f64;
        let x0 = centre - 0.5 * self.slp;
        let xs: Vec<f64> = (0..=n).map(|i| x0 + i as f64 * dx).collect();
        let us: Vec<f64> = xs.iter().map(|&x| self.eval(slot, x)).collect();
        let mut minima = Vec::new();
        let range = if periodic { 0..n } else { 1..n };
        for i in range {
            let prev = if i == 0 { us[n - 1] } else { us[i - 1] };
            let next = us[i + 1];
            if us[i] < prev && us[i] <= next {
                let lo = xs[i] - dx;
                let hi = xs[i] + dx;
                let mut x = self.refine(slot, lo, hi).unwrap_or(xs[i]);
                if periodic {
                    // fold back into the half-open window
                    if x < x0 {
                        x += self.slp;
                    } else if x >= x0 + self.slp {
                        x -= self.slp;
                    }
                }
                minima.push(Minimum {
                    position: x,
                    depth: self.eval(slot, x),
                });
            }
        }
        minima.sort_by(|a, b| a.position.total_cmp(&b.position));
        minima.dedup_by(|a, b| (a.position - b.position).abs() < 1e-9 * self.slp);
        let reduced = match self.cycles {
            Some(n) => minima.len() != n as usize,
            None => false,
        };
        Ok(WellScan {
            state,
            minima,
            centre,
            reduced,
        })
    }

    /// Wells of both qubit states, paired by position.
    pub fn wells(&self) -> Result<WellSet> {
        let s0 = self.find_wells(QubitState::ZERO)?;
        let s1 = self.find_wells(QubitState::ONE)?;
        let mut reduced = s0.reduced || s1.reduced || s0.minima.len() != s1.minima.len();
        let mut wells = Vec::with_capacity(s0.minima.len());
        let mut used = vec![false; s1.minima.len()];
        for m0 in &s0.minima {
            let best = s1.minima.iter().enumerate().filter(|(j, _)| !used[*j]).min_by(|a, b| {
                (a.1.position - m0.position)
                    .abs()
                    .total_cmp(&(b.1.position - m0.position).abs())
            });
            let Some((j, m1)) = best else {
                reduced = true;
                continue;
            };
            if (m1.position - m0.position).abs() > 0.25 * self.lambda2 {
                reduced = true;
                continue;
            }
            used[j] = true;
            wells.push(Well {
                index: wells.len(),
                position_state0: m0.position,
                position_state1: m1.position,
                depth_state0: m0.depth,
                depth_state1: m1.depth,
                hyperfine_shift: m1.depth - m0.depth,
            });
        }
        let target = wells
            .iter()
            .min_by(|a, b| a.depth_state0.total_cmp(&b.depth_state0))
            .map(|w| w.index)
            .ok_or_else(|| Error::Unaddressable("no wells found".into()))?;
        Ok(WellSet { wells, target, reduced })
    }

    /// Differential hyperfine shifts per well.
    pub fn differential_shifts(&self, mode: ShiftEvaluation) -> Result<Shifts> {
        let set = self.wells()?;
        let shifts = set
            .wells
            .iter()
            .map(|w| match mode {
                ShiftEvaluation::PerState => (w.index, w.hyperfine_shift),
                ShiftEvaluation::Shared => (
                    w.index,
                    self.eval(1, w.position_state0) - self.eval(0, w.position_state0),
                ),
            })
            .collect();
        Ok(Shifts {
            shifts,
            target: set.target,
            reduced: set.reduced,
            energy_scale: self.scale,
        })
    }

    /// Writes `x_m U_J` rows for one state.
    pub fn write_samples<W: Write>(
        &self,
        out: &mut W,
        state: QubitState,
        x_min: f64,
        x_max: f64,
        points: usize,
    ) -> Result<()> {
        let slot = state_slot(state)?;
        if points < 2 || !(x_max > x_min) {
            return Err(Error::InvalidParameter("sampling range is empty".into()));
        }
        writeln!(out, "# x_m U_J")?;
        let step = (x_max - x_min) / (points - 1) as f64;
        for i in 0..points {
            let x = x_min + i as f64 * step;
            writeln!(out, "{:.17e} {:.17e}", x, self.eval(slot, x))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub position: f64,
    pub depth: f64,
}

/// Minima of a single state.
#[derive(Debug, Clone)]
pub struct WellScan {
    pub state: QubitState,
    pub minima: Vec<Minimum>,
    /// Centre of the scanned period (the deepest |0> well).
    pub centre: f64,
    /// Fewer (or more) minima than secondary cycles, e.g. after wells merge.
    pub reduced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub index: usize,
    pub position_state0: f64,
    pub position_state1: f64,
    pub depth_state0: f64,
    pub depth_state1: f64,
    /// U(|1>) - U(|0>) at each state's own minimum, J.
    pub hyperfine_shift: f64,
}

#[derive(Debug, Clone)]
pub struct WellSet {
    pub wells: Vec<Well>,
    /// Index of the deepest well.
    pub target: usize,
    pub reduced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftEvaluation {
    /// Each state at its own minimum.
    #[default]
    PerState,
    /// Both states at the |0> minimum.
    Shared,
}

#[derive(Debug, Clone)]
pub struct Shifts {
    /// (well index, shift in J)
    pub shifts: Vec<(usize, f64)>,
    pub target: usize,
    pub reduced: bool,
    /// eta * E_r(lambda1), J
    pub energy_scale: f64,
}

impl Shifts {
    /// Smallest |dU_i - dU_target| over i != target, with the limiting well.
    pub fn min_relative(&self) -> Option<(usize, f64)> {
        let t = self.shifts.iter().find(|(i, _)| *i == self.target)?.1;
        self.shifts
            .iter()
            .filter(|(i, _)| *i != self.target)
            .map(|&(i, s)| (i, (s - t).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Convenience wrapper over [`Superlattice::potential`].
pub fn potential(config: &SuperlatticeConfig, state: QubitState, x: f64) -> Result<f64> {
    config.build()?.potential(state, x)
}

pub fn find_wells(config: &SuperlatticeConfig, state: QubitState) -> Result<WellScan> {
    config.build()?.find_wells(state)
}

pub fn differential_shifts(config: &SuperlatticeConfig) -> Result<Shifts> {
    config.build()?.differential_shifts(ShiftEvaluation::PerState)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NM: f64 = 1e-9;

    fn reference_cell() -> SuperlatticeConfig {
        SuperlatticeConfig::with_cycles(
            Species::rb87(),
            1064.0 * NM,
            5,
            1.0,
            0.28,
            Polarization::SigmaPlus,
            Polarization::SigmaPlus,
        )
        .unwrap()
    }

    #[test]
    fn slp_and_cycles() {
        assert!((slp_length(1064.0 * NM, 851.2 * NM).unwrap() / NM - 2128.0).abs() < 1e-6);
        assert!((slp_length(1064.0 * NM, 957.6 * NM).unwrap() / NM - 4788.0).abs() < 1e-6);
        assert!(slp_length(1064.0 * NM, 1064.0 * NM).is_err());
        assert!((wavelength_for_cycles(1064.0 * NM, 5).unwrap() / NM - 851.2).abs() < 1e-9);
        assert!((wavelength_for_cycles(1064.0 * NM, 10).unwrap() / NM - 957.6).abs() < 1e-9);
        assert!((wavelength_for_cycles(1064.0 * NM, 2).unwrap() / NM - 532.0).abs() < 1e-9);
        assert!(wavelength_for_cycles(1064.0 * NM, 1).is_err());
        assert_eq!(cycles_of(1064.0 * NM, 851.2 * NM), Some(5));
        assert_eq!(cycles_of(1064.0 * NM, 900.0 * NM), None);
    }

    #[test]
    fn periodic_over_one_slp() {
        let sl = reference_cell().build().unwrap();
        let a = sl.slp_length();
        for k in 0..10_000 {
            let x = -3.0e-6 + 6.0e-6 * k as f64 / 10_000.0;
            for s in QubitState::basis() {
                let u = sl.potential(s, x).unwrap();
                let v = sl.potential(s, x + a).unwrap();
                assert!((u - v).abs() <= 1e-9 * sl.energy_scale(), "{x} {u} {v}");
            }
        }
    }

    #[test]
    fn deepest_well_at_origin_with_shared_minimum() {
        let sl = reference_cell().build().unwrap();
        let set = sl.wells().unwrap();
        let t = set.wells[set.target];
        assert!(t.position_state0.abs() < 1e-12 * sl.slp_length());
        assert!(t.position_state1.abs() < 1e-12 * sl.slp_length());
    }

    #[test]
    fn reference_cell_has_five_symmetric_wells() {
        let sl = reference_cell().build().unwrap();
        let set = sl.wells().unwrap();
        assert!(!set.reduced);
        assert_eq!(set.wells.len(), 5);
        let lam2 = 851.2 * NM;
        let pos: Vec<f64> = set.wells.iter().map(|w| w.position_state0).collect();
        for (a, b) in pos.iter().zip(pos.iter().rev()) {
            assert!((a + b).abs() < 1e-9 * lam2);
        }
        for w in &set.wells {
            assert!((w.position_state1 - w.position_state0).abs() < 0.02 * lam2);
            assert!(w.depth_state0 < 0.0 && w.depth_state1 < 0.0);
        }
    }

    #[test]
    fn reference_cell_minimum_detuning() {
        let cfg = reference_cell();
        let shifts = differential_shifts(&cfg).unwrap();
        let (_, d) = shifts.min_relative().unwrap();
        let ratio = d / shifts.energy_scale;
        assert!((ratio - 0.016).abs() < 0.15 * 0.016, "{ratio}");
        let shared = cfg
            .build()
            .unwrap()
            .differential_shifts(ShiftEvaluation::Shared)
            .unwrap();
        let (_, ds) = shared.min_relative().unwrap();
        // the per-state position shifts only push neighbours further away
        assert!(ds < d);
        assert!(((ds - d) / d).abs() < 0.05);
    }

    #[test]
    fn primary_only_minima() {
        let mut cfg = reference_cell();
        cfg.a = 0.0;
        cfg.phi1 = 0.3;
        let scan = find_wells(&cfg, QubitState::ZERO).unwrap();
        let k1 = 2.0 * PI / cfg.lambda1;
        assert_eq!(scan.minima.len(), 4);
        for m in &scan.minima {
            let phase = (k1 * m.position + cfg.phi1) / PI;
            assert!((phase - phase.round()).abs() < 1e-10, "{phase}");
        }
    }

    #[test]
    fn shifts_scale_with_eta() {
        let cfg = reference_cell();
        let mut doubled = cfg.clone();
        doubled.eta = 2.0;
        let a = differential_shifts(&cfg).unwrap();
        let b = differential_shifts(&doubled).unwrap();
        for ((_, x), (_, y)) in a.shifts.iter().zip(&b.shifts) {
            assert!((y - 2.0 * x).abs() <= 1e-12 * x.abs().max(1e-40));
        }
    }

    #[test]
    fn linear_light_without_hfs_gives_no_shift() {
        let mut sp = Species::rb87();
        let w1 = sp.omega_d1[&1];
        let w2 = sp.omega_d2[&1];
        sp.omega_d1.insert(2, w1);
        sp.omega_d2.insert(2, w2);
        sp.hfs_ground_split = 0.0;
        let cfg = SuperlatticeConfig::with_cycles(
            sp,
            1064.0 * NM,
            5,
            1.0,
            0.28,
            Polarization::Linear,
            Polarization::Linear,
        )
        .unwrap();
        let shifts = differential_shifts(&cfg).unwrap();
        for (_, s) in shifts.shifts {
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn sample_export() {
        let sl = reference_cell().build().unwrap();
        let mut buf = Vec::new();
        sl.write_samples(&mut buf, QubitState::ZERO, 0.0, 1e-6, 11).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 11);
        let cols: Vec<f64> = rows[0].split_whitespace().map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[1], sl.potential(QubitState::ZERO, 0.0).unwrap());
    }
}
