//! Atomic species data and the far-detuned light-atom formulas.
//!
//! The dipole potential and scattering rate are the standard two-line
//! (D1 + D2) expressions for a ground-state alkali atom, valid when the laser
//! is detuned from both lines by more than the excited-state hyperfine
//! structure. Intensities are carried as dimensionless relative scales; the
//! absolute calibration is done by the callers in recoil units.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::{C, H, HBAR};
use crate::{Error, Result};

const RB87_RECORD: &str = include_str!("../data/rb87.toml");

/// Ground hyperfine level `F` and magnetic sublevel `m_F` of a qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitState {
    pub f: i32,
    pub m_f: i32,
}

impl QubitState {
    /// |0> = |F=1, m_F=1>
    pub const ZERO: QubitState = QubitState { f: 1, m_f: 1 };
    /// |1> = |F=2, m_F=2>
    pub const ONE: QubitState = QubitState { f: 2, m_f: 2 };

    pub fn new(f: i32, m_f: i32) -> Result<Self> {
        if f < 0 || m_f.abs() > f {
            return Err(Error::InvalidParameter(format!("|m_F|={} exceeds F={}", m_f.abs(), f)));
        }
        Ok(QubitState { f, m_f })
    }

    /// The two computational basis states, in index order.
    pub fn basis() -> [QubitState; 2] {
        [Self::ZERO, Self::ONE]
    }
}

/// Optical polarization entering the light shift: linear (0) or sigma+/-.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum Polarization {
    SigmaMinus,
    Linear,
    SigmaPlus,
}

impl Polarization {
    pub fn value(self) -> f64 {
        match self {
            Polarization::SigmaMinus => -1.0,
            Polarization::Linear => 0.0,
            Polarization::SigmaPlus => 1.0,
        }
    }
}

impl TryFrom<i32> for Polarization {
    type Error = Error;

    fn try_from(p: i32) -> Result<Self> {
        match p {
            -1 => Ok(Polarization::SigmaMinus),
            0 => Ok(Polarization::Linear),
            1 => Ok(Polarization::SigmaPlus),
            other => Err(Error::InvalidParameter(format!(
                "polarization must be -1, 0 or +1, got {other}"
            ))),
        }
    }
}

impl From<Polarization> for i32 {
    fn from(p: Polarization) -> i32 {
        p.value() as i32
    }
}

/// One laser beam: wavelength, polarization and relative intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub wavelength: f64,
    pub polarization: Polarization,
    pub intensity_scale: f64,
}

impl BeamSpec {
    pub fn new(species: &Species, wavelength: f64, polarization: Polarization, intensity_scale: f64) -> Result<Self> {
        species.check_red_detuned(wavelength)?;
        if !(intensity_scale >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "intensity scale must be non-negative, got {intensity_scale}"
            )));
        }
        Ok(BeamSpec {
            wavelength,
            polarization,
            intensity_scale,
        })
    }
}

/// On-disk layout of a species record. Field names are part of the file
/// schema; every field is required.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct SpeciesRecord {
    name: String,
    mass: f64,
    omega0: f64,
    gamma: f64,
    omega_D1_F: BTreeMap<String, f64>,
    omega_D2_F: BTreeMap<String, f64>,
    gF: BTreeMap<String, f64>,
    scattering_length: f64,
    hfs_ground_split: f64,
}

/// Atomic constants for one alkali species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpeciesRecord", into = "SpeciesRecord")]
pub struct Species {
    pub name: String,
    /// kg
    pub mass: f64,
    /// Reference optical angular frequency of the dipole prefactor, rad/s.
    pub omega0: f64,
    /// Natural linewidth, rad/s.
    pub gamma: f64,
    /// D1 transition angular frequency per ground level F.
    pub omega_d1: BTreeMap<i32, f64>,
    /// D2 transition angular frequency per ground level F.
    pub omega_d2: BTreeMap<i32, f64>,
    /// Lande factor per ground level F.
    pub g_f: BTreeMap<i32, f64>,
    /// s-wave scattering length, m.
    pub scattering_length: f64,
    /// Ground hyperfine splitting, rad/s.
    pub hfs_ground_split: f64,
}

fn parse_levels(field: &str, raw: BTreeMap<String, f64>) -> Result<BTreeMap<i32, f64>> {
    raw.into_iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<i32>()
                .map(|f| (f, v))
                .map_err(|_| Error::Species(format!("{field}: key '{k}' is not an integer F")))
        })
        .collect()
}

impl TryFrom<SpeciesRecord> for Species {
    type Error = Error;

    fn try_from(r: SpeciesRecord) -> Result<Self> {
        let species = Species {
            name: r.name,
            mass: r.mass,
            omega0: r.omega0,
            gamma: r.gamma,
            omega_d1: parse_levels("omega_D1_F", r.omega_D1_F)?,
            omega_d2: parse_levels("omega_D2_F", r.omega_D2_F)?,
            g_f: parse_levels("gF", r.gF)?,
            scattering_length: r.scattering_length,
            hfs_ground_split: r.hfs_ground_split,
        };
        species.validate()?;
        Ok(species)
    }
}

impl From<Species> for SpeciesRecord {
    fn from(s: Species) -> Self {
        let names = |m: BTreeMap<i32, f64>| m.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        SpeciesRecord {
            name: s.name,
            mass: s.mass,
            omega0: s.omega0,
            gamma: s.gamma,
            omega_D1_F: names(s.omega_d1),
            omega_D2_F: names(s.omega_d2),
            gF: names(s.g_f),
            scattering_length: s.scattering_length,
            hfs_ground_split: s.hfs_ground_split,
        }
    }
}

impl Species {
    /// Built-in rubidium-87 record (`data/rb87.toml`).
    pub fn rb87() -> Species {
        Self::from_toml_str(RB87_RECORD).expect("built-in Rb-87 record is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Species> {
        toml::from_str(text).map_err(|e| Error::Species(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Species> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Species(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Species(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("species record serializes")
    }

    /// Checks the record invariants, reporting every violation found.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.mass > 0.0) {
            problems.push(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.omega0 > 0.0) {
            problems.push(format!("omega0 must be positive, got {}", self.omega0));
        }
        if !(self.gamma > 0.0) {
            problems.push(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.hfs_ground_split >= 0.0) {
            problems.push("hfs_ground_split must be non-negative".to_string());
        }
        for f in [1, 2] {
            for (field, map) in [
                ("omega_D1_F", &self.omega_d1),
                ("omega_D2_F", &self.omega_d2),
                ("gF", &self.g_f),
            ] {
                if !map.contains_key(&f) {
                    problems.push(format!("{field} is missing level F={f}"));
                }
            }
        }
        for (f, &w1) in &self.omega_d1 {
            match self.omega_d2.get(f) {
                Some(&w2) if w2 > w1 => {}
                Some(_) => problems.push(format!("D2 must lie above D1 for F={f}")),
                None => problems.push(format!("omega_D2_F is missing level F={f}")),
            }
        }
        for (name, map) in [("omega_D1_F", &self.omega_d1), ("omega_D2_F", &self.omega_d2)] {
            if let (Some(&lower), Some(&upper)) = (map.get(&1), map.get(&2)) {
                let split = lower - upper;
                let tol = 1e-6 * self.hfs_ground_split.max(f64::MIN_POSITIVE);
                if (split - self.hfs_ground_split).abs() > tol.max(1e-6 * lower * f64::EPSILON) {
                    problems.push(format!(
                        "{name}: F=1 minus F=2 frequency {split:.6e} does not match hfs_ground_split {:.6e}",
                        self.hfs_ground_split
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Species(problems.join("; ")))
        }
    }

    fn level(&self, f: i32) -> Result<(f64, f64, f64)> {
        match (self.omega_d1.get(&f), self.omega_d2.get(&f), self.g_f.get(&f)) {
            (Some(&w1), Some(&w2), Some(&g)) => Ok((w1, w2, g)),
            _ => Err(Error::UnknownLevel(f)),
        }
    }

    /// Vacuum wavelength of the D1 line from the lower ground level, m.
    pub fn d1_wavelength(&self) -> f64 {
        let w = self.omega_d1.values().cloned().fold(f64::MIN, f64::max);
        2.0 * PI * C / w
    }

    /// Rejects wavelengths that are not red of both D lines by more than the
    /// ground hyperfine splitting (a conservative stand-in for the excited
    /// state structure).
    pub fn check_red_detuned(&self, wavelength: f64) -> Result<()> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        let omega_l = 2.0 * PI * C / wavelength;
        let margin = self.hfs_ground_split;
        for &w in self.omega_d1.values().chain(self.omega_d2.values()) {
            if omega_l - w > -margin {
                return Err(Error::NotRedDetuned {
                    wavelength_nm: wavelength * 1e9,
                });
            }
        }
        Ok(())
    }

    fn detunings(&self, f: i32, wavelength: f64) -> Result<(f64, f64, f64)> {
        let (w1, w2, g) = self.level(f)?;
        self.check_red_detuned(wavelength)?;
        let omega_l = 2.0 * PI * C / wavelength;
        Ok((omega_l - w1, omega_l - w2, g))
    }
}

/// Dipole potential of `state` in light of the given wavelength, polarization
/// and relative intensity. Negative for red detuning.
pub fn dipole_potential(
    species: &Species,
    state: QubitState,
    wavelength: f64,
    polarization: Polarization,
    intensity: f64,
) -> Result<f64> {
    let (d1, d2, g_f) = species.detunings(state.f, wavelength)?;
    let pgm = polarization.value() * g_f * state.m_f as f64;
    let prefactor = PI * C * C * species.gamma / (2.0 * species.omega0.powi(3));
    Ok(prefactor * ((2.0 + pgm) / d2 + (1.0 - pgm) / d1) * intensity)
}

/// Photon scattering rate (1/s) at the given relative intensity.
pub fn scattering_rate(species: &Species, state: QubitState, wavelength: f64, intensity: f64) -> Result<f64> {
    let (d1, d2, _) = species.detunings(state.f, wavelength)?;
    let prefactor = PI * C * C * species.gamma * species.gamma / (2.0 * HBAR * species.omega0.powi(3));
    Ok(prefactor * (2.0 / (d2 * d2) + 1.0 / (d1 * d1)) * intensity)
}

/// Scattering rate per unit of potential depth, 1/(J s). Multiply by a trap
/// depth in joules to get the rate at the intensity producing that depth.
pub fn scattering_per_depth(
    species: &Species,
    state: QubitState,
    wavelength: f64,
    polarization: Polarization,
) -> Result<f64> {
    let u = dipole_potential(species, state, wavelength, polarization, 1.0)?;
    let g = scattering_rate(species, state, wavelength, 1.0)?;
    Ok(g / u.abs())
}

/// Recoil energy h^2 / (2 m lambda^2), J.
pub fn recoil_energy(species: &Species, wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    Ok(H * H / (2.0 * species.mass * wavelength * wavelength))
}

#[cfg(test)]
mod tests {
    use super::*;

    const NM: f64 = 1e-9;

    #[test]
    fn builtin_record_round_trips() {
        let rb = Species::rb87();
        let back = Species::from_toml_str(&rb.to_toml_string()).unwrap();
        assert_eq!(rb, back);
        assert!((rb.d1_wavelength() / NM - 794.97).abs() < 0.01);
    }

    #[test]
    fn missing_field_is_rejected() {
        let text = RB87_RECORD.replace("scattering_length = 5.820949319933e-9\n", "");
        let err = Species::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("scattering_length"), "{err}");
    }

    #[test]
    fn inconsistent_hfs_is_rejected() {
        let text = RB87_RECORD.replace("hfs_ground_split = 42943577360.06965", "hfs_ground_split = 4.3e10");
        assert!(Species::from_toml_str(&text).is_err());
    }

    #[test]
    fn red_detuned_potential_is_negative() {
        let rb = Species::rb87();
        let u_plus = dipole_potential(&rb, QubitState::ZERO, 1064.0 * NM, Polarization::SigmaPlus, 1.0).unwrap();
        let u_lin = dipole_potential(&rb, QubitState::ZERO, 1064.0 * NM, Polarization::Linear, 1.0).unwrap();
        assert!(u_plus < 0.0 && u_lin < 0.0);
        // g_F m_F = -1/2 for |0>: sigma+ weakens the D2 term and strengthens D1
        let (d1, d2, _) = rb.detunings(1, 1064.0 * NM).unwrap();
        let ratio = (u_plus / u_lin) * (2.0 / d2 + 1.0 / d1);
        assert!((ratio - (1.5 / d2 + 1.5 / d1)).abs() < 1e-12 * ratio.abs());
    }

    #[test]
    fn linear_polarization_ignores_m_f() {
        let rb = Species::rb87();
        let a = dipole_potential(
            &rb,
            QubitState::new(2, 2).unwrap(),
            900.0 * NM,
            Polarization::Linear,
            1.0,
        )
        .unwrap();
        let b = dipole_potential(
            &rb,
            QubitState::new(2, -1).unwrap(),
            900.0 * NM,
            Polarization::Linear,
            1.0,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn differential_shift_falls_with_wavelength() {
        let rb = Species::rb87();
        let du = |lam: f64| {
            let u1 = dipole_potential(&rb, QubitState::ONE, lam, Polarization::SigmaPlus, 1.0).unwrap();
            let u0 = dipole_potential(&rb, QubitState::ZERO, lam, Polarization::SigmaPlus, 1.0).unwrap();
            (u1 / u0, (u1 - u0).abs())
        };
        let (ratio, _) = du(1064.0 * NM);
        assert!((ratio - 1.0).abs() > 1e-3);
        let mut previous = f64::INFINITY;
        for k in 0..40 {
            let (_, d) = du((1100.0 + 25.0 * k as f64) * NM);
            assert!(d < previous);
            previous = d;
        }
    }

    #[test]
    fn far_infrared_potential_follows_detuning() {
        let rb = Species::rb87();
        let near = dipole_potential(&rb, QubitState::ZERO, 1064.0 * NM, Polarization::Linear, 1.0).unwrap();
        let far = dipole_potential(&rb, QubitState::ZERO, 10_000.0 * NM, Polarization::Linear, 1.0).unwrap();
        let (d1n, d2n, _) = rb.detunings(1, 1064.0 * NM).unwrap();
        let (d1f, d2f, _) = rb.detunings(1, 10_000.0 * NM).unwrap();
        let expected = (2.0 / d2f + 1.0 / d1f) / (2.0 / d2n + 1.0 / d1n);
        assert!(((far / near) - expected).abs() < 1e-12);
        assert!(far.abs() < near.abs());
    }

    #[test]
    fn scattering_is_linear_and_grows_towards_resonance() {
        let rb = Species::rb87();
        let r1 = scattering_rate(&rb, QubitState::ZERO, 1064.0 * NM, 1.0).unwrap();
        let r2 = scattering_rate(&rb, QubitState::ZERO, 1064.0 * NM, 2.0).unwrap();
        assert_eq!(r2, 2.0 * r1);
        let near = scattering_rate(&rb, QubitState::ZERO, 851.2 * NM, 1.0).unwrap();
        assert!(near / r1 > 1.0);
        assert!(r1 > 0.0);
    }

    #[test]
    fn blue_and_intermediate_wavelengths_are_rejected() {
        let rb = Species::rb87();
        for lam in [794.0, 787.0, 700.0] {
            assert!(matches!(
                scattering_rate(&rb, QubitState::ZERO, lam * NM, 1.0),
                Err(Error::NotRedDetuned { .. })
            ));
            assert!(dipole_potential(&rb, QubitState::ONE, lam * NM, Polarization::Linear, 1.0).is_err());
        }
    }

    #[test]
    fn unknown_level_is_rejected() {
        let rb = Species::rb87();
        let err = dipole_potential(&rb, QubitState { f: 3, m_f: 0 }, 1064.0 * NM, Polarization::Linear, 1.0);
        assert!(matches!(err, Err(Error::UnknownLevel(3))));
    }

    #[test]
    fn recoil_energy_anchor() {
        let rb = Species::rb87();
        let er = recoil_energy(&rb, 1064.0 * NM).unwrap();
        assert!((er / H - 2027.8).abs() < 1.0);
        let er2 = recoil_energy(&rb, 851.2 * NM).unwrap();
        assert!((er2 / er - 1.5625).abs() < 1e-12);
        let er_half = recoil_energy(&rb, 532.0 * NM).unwrap();
        assert!((er_half / er - 4.0).abs() < 1e-12);
        assert!(recoil_energy(&rb, 0.0).is_err());
    }

    #[test]
    fn qubit_state_bounds() {
        assert!(QubitState::new(1, 2).is_err());
        assert!(QubitState::new(2, -2).is_ok());
        assert!(Polarization::try_from(2).is_err());
    }
}
