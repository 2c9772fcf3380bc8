//! Run configuration file.
//!
//! TOML with file units nm, us and kHz. Every block is optional; missing
//! fields take the defaults below. Command-line flags override file values.
//!
//! ```toml
//! species = "data/rb87.toml"   # built-in Rb-87 when absent
//! output = "out"
//!
//! [superlattice]
//! lambda1_nm = 1064.0
//! cycles = 5                   # or lambda2_nm = 851.2
//! eta = 1.0
//! a = 0.28
//! pol1 = 1
//! pol2 = 1
//!
//! [addressing]
//! p_t = 0.01
//! lambda2_nm = [800.0, 1050.0]
//! a = [0.05, 1.0]
//! points = [200, 200]
//!
//! [merge]
//! tau_us = [250.0, 300.0]      # one or more durations
//! objective = "error"
//! knots = 8
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::addressing::{Axis, TargetChoice, ThresholdSpec};
use crate::atomphys::{Polarization, Species};
use crate::mergeopt::{ErrorBox, MergeConfig, Objective, SimplexSettings};
use crate::superlattice::{wavelength_for_cycles, SuperlatticeConfig};
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_CYCLES: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuperlatticeBlock {
    pub lambda1_nm: f64,
    /// 5 when neither this nor `lambda2_nm` is given
    pub cycles: Option<u32>,
    pub lambda2_nm: Option<f64>,
    pub eta: f64,
    pub a: f64,
    pub pol1: Polarization,
    pub pol2: Polarization,
    pub phi1: f64,
    pub phi2: f64,
}

impl Default for SuperlatticeBlock {
    fn default() -> Self {
        SuperlatticeBlock {
            lambda1_nm: 1064.0,
            cycles: None,
            lambda2_nm: None,
            eta: 1.0,
            a: 0.28,
            pol1: Polarization::SigmaPlus,
            pol2: Polarization::SigmaPlus,
            phi1: 0.0,
            phi2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AddressingBlock {
    pub p_t: f64,
    pub lambda2_nm: [f64; 2],
    pub a: [f64; 2],
    /// points along lambda2, A
    pub points: [usize; 2],
    /// well index, deepest well when absent
    pub target: Option<usize>,
}

impl Default for AddressingBlock {
    fn default() -> Self {
        AddressingBlock {
            p_t: 0.01,
            lambda2_nm: [800.0, 1050.0],
            a: [0.05, 1.0],
            points: [200, 200],
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorBoxBlock {
    pub amp_frac: f64,
    /// in units of pi
    pub phase_offset_pi: f64,
    pub grid: usize,
}

impl Default for ErrorBoxBlock {
    fn default() -> Self {
        ErrorBoxBlock {
            amp_frac: 1e-3,
            phase_offset_pi: 2e-3,
            grid: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeBlock {
    /// durations to optimize; two or more run a continuation sweep
    pub tau_us: Vec<f64>,
    /// inclusive range with step, appended to `tau_us`
    pub tau_range_us: Option<[f64; 3]>,
    pub objective: Objective,
    pub knots: usize,
    pub a2: f64,
    /// 0 selects the default for the cycle count
    pub grid_points: usize,
    /// hbar / E_r(lambda2)
    pub dt: f64,
    pub max_evals: usize,
    pub restarts: usize,
    pub transverse_nm: f64,
    pub transverse_depth: f64,
    /// overrides the transverse lattice, both in kHz
    pub nu_y_khz: Option<f64>,
    pub nu_z_khz: Option<f64>,
    pub error_box: ErrorBoxBlock,
    /// write density trajectories of the final pulses
    pub trajectories: bool,
    /// starting pulse file; smooth-step ramp when absent
    pub seed_pulse: Option<PathBuf>,
}

impl Default for MergeBlock {
    fn default() -> Self {
        MergeBlock {
            tau_us: vec![289.0],
            tau_range_us: None,
            objective: Objective::Error,
            knots: 8,
            a2: 32.0,
            grid_points: 0,
            dt: 1e-3,
            max_evals: 20_000,
            restarts: 3,
            transverse_nm: 1064.0,
            transverse_depth: 32.0,
            nu_y_khz: None,
            nu_z_khz: None,
            error_box: ErrorBoxBlock::default(),
            trajectories: false,
            seed_pulse: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub species: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub superlattice: SuperlatticeBlock,
    pub addressing: AddressingBlock,
    pub merge: MergeBlock,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // relative paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.species, &mut cfg.merge.seed_pulse].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form, output switches excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.merge.trajectories = false;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn load_species(&self) -> Result<Species> {
        match &self.species {
            None => Ok(Species::rb87()),
            // the error already names the path
            Some(p) => Species::from_file(p),
        }
    }

    pub fn cycles(&self) -> Option<u32> {
        match (self.superlattice.cycles, self.superlattice.lambda2_nm) {
            (Some(n), _) => Some(n),
            (None, None) => Some(DEFAULT_CYCLES),
            (None, Some(l)) => crate::superlattice::cycles_of(self.superlattice.lambda1_nm * 1e-9, l * 1e-9),
        }
    }

    pub fn lambda2(&self) -> Result<f64> {
        let s = &self.superlattice;
        match (s.cycles, s.lambda2_nm) {
            (None, Some(l)) => Ok(l * 1e-9),
            (Some(n), None) => wavelength_for_cycles(s.lambda1_nm * 1e-9, n),
            (Some(n), Some(l)) => {
                let want = wavelength_for_cycles(s.lambda1_nm * 1e-9, n)?;
                if ((l * 1e-9 - want) / want).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "lambda2_nm = {l} contradicts cycles = {n} (expected {:.4} nm)",
                        want * 1e9
                    )));
                }
                Ok(want)
            }
            (None, None) => wavelength_for_cycles(s.lambda1_nm * 1e-9, DEFAULT_CYCLES),
        }
    }

    pub fn superlattice(&self, species: &Species) -> Result<SuperlatticeConfig> {
        let s = &self.superlattice;
        let mut c = SuperlatticeConfig::new(
            species.clone(),
            s.lambda1_nm * 1e-9,
            self.lambda2()?,
            s.eta,
            s.a,
            s.pol1,
            s.pol2,
        );
        c.phi1 = s.phi1;
        c.phi2 = s.phi2;
        Ok(c)
    }

    pub fn threshold(&self) -> Result<ThresholdSpec> {
        ThresholdSpec::new(self.addressing.p_t)
    }

    pub fn target(&self) -> TargetChoice {
        match self.addressing.target {
            None => TargetChoice::Deepest,
            Some(i) => TargetChoice::Index(i),
        }
    }

    pub fn scan_axes(&self) -> Result<(Axis, Axis)> {
        let a = &self.addressing;
        if a.lambda2_nm[0] > a.lambda2_nm[1] || a.a[0] > a.a[1] {
            return Err(Error::Config("scan ranges must be ordered low to high".into()));
        }
        Ok((
            Axis::new(a.lambda2_nm[0] * 1e-9, a.lambda2_nm[1] * 1e-9, a.points[0])?,
            Axis::new(a.a[0], a.a[1], a.points[1])?,
        ))
    }

    pub fn merge_config(&self) -> Result<MergeConfig> {
        let m = &self.merge;
        let cycles = self
            .cycles()
            .ok_or_else(|| Error::Config("merge needs lambda1/lambda2 = (n - 1)/n for an integer n".into()))?;
        Ok(MergeConfig {
            lambda1: self.superlattice.lambda1_nm * 1e-9,
            cycles,
            a2: m.a2,
            grid_points: m.grid_points,
            dt: m.dt,
            interior_knots: m.knots,
            transverse_wavelength: m.transverse_nm * 1e-9,
            transverse_depth: m.transverse_depth,
            trap_frequencies: match (m.nu_y_khz, m.nu_z_khz) {
                (Some(y), Some(z)) => Some([y * 1e3, z * 1e3]),
                _ => None,
            },
            error_box: ErrorBox {
                amp_frac: m.error_box.amp_frac,
                phase_offset: m.error_box.phase_offset_pi * std::f64::consts::PI,
                grid: m.error_box.grid,
            },
            ..MergeConfig::default()
        })
    }

    pub fn simplex(&self) -> SimplexSettings {
        SimplexSettings {
            max_evals: self.merge.max_evals,
            restarts: self.merge.restarts,
            ..SimplexSettings::default()
        }
    }

    /// Durations in seconds, sorted and deduplicated.
    pub fn taus(&self) -> Result<Vec<f64>> {
        let mut t: Vec<f64> = self.merge.tau_us.clone();
        if let Some([lo, hi, step]) = self.merge.tau_range_us {
            if !(step > 0.0) || hi < lo {
                return Err(Error::Config(format!("bad tau range [{lo}, {hi}] step {step}")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            t.extend((0..=n).map(|k| lo + step * k as f64));
        }
        if t.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("durations must be positive".into()));
        }
        t.sort_by(f64::total_cmp);
        t.dedup();
        Ok(t.into_iter().map(|t| t * 1e-6).collect())
    }

    /// Every violation in the file, not only the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let species = match self.load_species() {
            Ok(s) => Some(s),
            Err(e) => {
                out.push(e.to_string());
                None
            }
        };
        if let Some(sp) = &species {
            match self.superlattice(sp) {
                Ok(c) => {
                    if let Err(e) = c.validate() {
                        out.push(format!("superlattice: {e}"));
                    }
                }
                Err(e) => out.push(format!("superlattice: {e}")),
            }
        } else if let Err(e) = self.lambda2() {
            out.push(format!("superlattice: {e}"));
        }
        if let Err(e) = self.threshold() {
            out.push(format!("addressing: {e}"));
        }
        if let Err(e) = self.scan_axes() {
            out.push(format!("addressing: {e}"));
        }
        if let Some(sp) = &species {
            let lo = self.addressing.lambda2_nm[0] * 1e-9;
            if let Err(e) = sp.check_red_detuned(lo) {
                out.push(format!("addressing: scan start {e}"));
            }
        }
        match self.merge_config() {
            Ok(m) => out.extend(m.problems().into_iter().map(|p| format!("merge: {p}"))),
            Err(e) => out.push(format!("merge: {e}")),
        }
        if let Err(e) = self.taus() {
            out.push(format!("merge: {e}"));
        }
        if self.merge.nu_y_khz.is_some() != self.merge.nu_z_khz.is_some() {
            out.push("merge: nu_y_khz and nu_z_khz must be given together".into());
        }
        for nu in [self.merge.nu_y_khz, self.merge.nu_z_khz].into_iter().flatten() {
            if !(nu > 0.0) {
                out.push(format!("merge: trap frequency must be positive, got {nu} kHz"));
            }
        }
        if let Some(p) = &self.merge.seed_pulse {
            if !p.exists() {
                out.push(format!("merge: seed pulse {} does not exist", p.display()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::from_toml_str("[superlattice]\ncycles = 10\n[merge]\ntau_us = [400.0]\n").unwrap();
        assert!((c.lambda2().unwrap() - 957.6e-9).abs() < 1e-15);
        assert_eq!(c.merge_config().unwrap().cycles, 10);
        assert!(c.problems().is_empty(), "{:?}", c.problems());
        assert!(RunConfig::from_toml_str("[merge]\nbogus = 1\n").is_err());
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.merge.knots = 6;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn tau_range() {
        let c = RunConfig::from_toml_str("[merge]\ntau_us = [289.0]\ntau_range_us = [100.0, 400.0, 100.0]\n").unwrap();
        let t: Vec<f64> = c.taus().unwrap().iter().map(|t| (t * 1e6).round()).collect();
        assert_eq!(t, vec![100.0, 200.0, 289.0, 300.0, 400.0]);
    }

    #[test]
    fn all_problems_reported() {
        let c = RunConfig::from_toml_str(
            "species = \"/nonexistent/species.toml\"\n[addressing]\np_t = 2.0\n[merge]\nknots = 4\ndt = -1.0\n",
        )
        .unwrap();
        let p = c.problems();
        assert!(p.len() >= 3, "{p:?}");
        assert!(p.iter().any(|s| s.contains("/nonexistent/species.toml")));
    }
}
