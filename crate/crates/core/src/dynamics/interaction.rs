//! Contact interaction of two atoms in one transverse ground state.

use serde::{Deserialize, Serialize};

use super::Wavefunction;
use crate::atomphys::{self, Species};
use crate::constants::H;
use crate::{Error, Result};

/// Effective 1D coupling `g1d = 2 a_s h sqrt(nu_y nu_z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    /// J m
    pub g1d: f64,
    /// Hz
    pub nu_y: f64,
    /// Hz
    pub nu_z: f64,
}

impl InteractionSpec {
    pub fn new(scattering_length: f64, nu_y: f64, nu_z: f64) -> Result<Self> {
        if !(nu_y > 0.0 && nu_z > 0.0 && scattering_length > 0.0) {
            return Err(Error::InvalidParameter(
                "trap frequencies and scattering length must be positive".into(),
            ));
        }
        Ok(InteractionSpec {
            g1d: 2.0 * scattering_length * H * (nu_y * nu_z).sqrt(),
            nu_y,
            nu_z,
        })
    }

    /// Transverse confinement from standing waves of `depth_er` recoils at
    /// `wavelength`, using the harmonic frequency `nu = (2 E_r / h) sqrt(s)`.
    pub fn from_transverse_lattice(species: &Species, wavelength: f64, depth_er: f64) -> Result<Self> {
        if !(depth_er > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transverse depth must be positive, got {depth_er}"
            )));
        }
        let nu = 2.0 * atomphys::recoil_energy(species, wavelength)? / H * depth_er.sqrt();
        Self::new(species.scattering_length, nu, nu)
    }

    /// Same spec with `g1d` scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        InteractionSpec {
            g1d: self.g1d * factor,
            ..*self
        }
    }
}

/// `int |psi_a|^2 |psi_b|^2 dx` in inverse grid length units.
pub fn density_overlap(a: &Wavefunction, b: &Wavefunction) -> Result<f64> {
    if !a.grid.same_as(&b.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.norm_sqr() * y.norm_sqr())
        .sum::<f64>()
        * a.grid.dx)
}

/// Triplet-singlet splitting `U_int = 2 g1d int |psi_g|^2 |psi_e|^2 dx`, J,
/// for wavefunctions on a grid measured in metres.
pub fn interaction_energy(psi_g: &Wavefunction, psi_e: &Wavefunction, spec: &InteractionSpec) -> Result<f64> {
    Ok(2.0 * spec.g1d * density_overlap(psi_g, psi_e)?)
}

/// As [`interaction_energy`] with the coupling already in grid units.
pub fn interaction_energy_natural(psi_g: &Wavefunction, psi_e: &Wavefunction, g: f64) -> Result<f64> {
    Ok(2.0 * g * density_overlap(psi_g, psi_e)?)
}

/// `(1/hbar) int U_int dt` by the trapezoidal rule over `(t, U_int)` samples.
pub fn accumulated_phase(samples: &[(f64, f64)], hbar: f64) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum::<f64>()
        / hbar
}
