//! One-dimensional wave-packet engine.
//!
//! Everything here is unit-agnostic: the Hamiltonian is
//! `H = -c d^2/dx^2 + V(x, t)` with `hbar = 1` and a caller supplied kinetic
//! coefficient `c` (`hbar^2 / 2m` in the caller's units). [`NaturalUnits`]
//! provides the lattice units used by the merge model, where lengths are
//! `lambda2 / 2`, energies are `E_r(lambda2)` and `c = 1 / pi^2`.

mod eigen;
mod interaction;
mod propagate;
mod trajectory;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomphys::{self, Species};
use crate::constants::HBAR;
use crate::{Error, Result};

pub use eigen::{
    eigenstates, eigenstates_checked, spectral_well_states, tridiagonal_eigen, well_states, CheckedSpectrum, WellStates,
};
pub use interaction::{
    accumulated_phase, density_overlap, interaction_energy, interaction_energy_natural, InteractionSpec,
};
pub use propagate::{PropagationStats, SplitStep, StepView};
pub use trajectory::{read_trajectory, Trajectory, TrajectoryWriter, TRAJECTORY_VERSION};

/// Uniform periodic grid: `x_i = x_min + i dx`, `dx = (x_max - x_min) / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Grid> {
        if !n_points.is_power_of_two() || n_points < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid size must be a power of two >= 4, got {n_points}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParameter(format!("empty grid domain [{x_min}, {x_max}]")));
        }
        if n_points < 256 {
            log::debug!("grid with {n_points} points is below production resolution");
        }
        Ok(Grid {
            x_min,
            x_max,
            n_points,
            dx: (x_max - x_min) / n_points as f64,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / self.length();
        (0..n)
            .map(|i| {
                let j = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                j * dk
            })
            .collect()
    }

    /// Grid with identical points, `dx` apart, for compatibility checks.
    pub fn same_as(&self, other: &Grid) -> bool {
        self.n_points == other.n_points
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.length()
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
    }

    /// Index of the grid point closest to `x` (clamped).
    pub fn index_of(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx).round();
        i.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

/// Complex amplitudes on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub grid: Grid,
    pub amplitudes: Vec<Complex64>,
}

impl Wavefunction {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points {
            return Err(Error::GridMismatch);
        }
        Ok(Wavefunction { grid, amplitudes })
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Normalized `exp(-(x-x0)^2 / 2 s^2 + i k0 x)`.
    pub fn gaussian(grid: Grid, x0: f64, s: f64, k0: f64) -> Self {
        let amplitudes = grid
            .points()
            .into_iter()
            .map(|x| {
                let d = x - x0;
                Complex64::from_polar((-0.5 * d * d / (s * s)).exp(), k0 * x)
            })
            .collect();
        let mut psi = Wavefunction { grid, amplitudes };
        psi.normalize();
        psi
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        }
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Wavefunction) -> Result<Complex64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx)
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Norm of the part of the state within the outer 1/64 of the domain on
    /// either side, `sqrt(int_edge |psi|^2 dx)`.
    pub fn edge_amplitude(&self) -> f64 {
        edge_amplitude(&self.amplitudes, self.grid.dx)
    }

    pub fn mean_position(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * self.grid.x(i))
            .sum::<f64>()
            * self.grid.dx
    }

    /// Position variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean_position();
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let d = self.grid.x(i) - m;
                a.norm_sqr() * d * d
            })
            .sum::<f64>()
            * self.grid.dx
    }

    /// `<V>` for a potential sampled on the grid.
    pub fn expectation(&self, v: &[f64]) -> f64 {
        self.amplitudes
            .iter()
            .zip(v)
            .map(|(a, v)| a.norm_sqr() * v)
            .sum::<f64>()
            * self.grid.dx
    }
}

pub(crate) fn edge_amplitude(amplitudes: &[Complex64], dx: f64) -> f64 {
    let n = amplitudes.len();
    let m = (n / 64).max(1);
    let p: f64 = amplitudes[..m]
        .iter()
        .chain(&amplitudes[n - m..])
        .map(|a| a.norm_sqr())
        .sum();
    (p * dx).sqrt()
}

/// Potential `V(x, t)` sampled on a set of points.
pub trait TimedPotential: Sync {
    fn fill(&self, t: f64, x: &[f64], out: &mut [f64]);
}

/// Static potential given by a closure.
pub struct StaticPotential<F: Fn(f64) -> f64 + Sync>(pub F);

impl<F: Fn(f64) -> f64 + Sync> TimedPotential for StaticPotential<F> {
    fn fill(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(x) {
            *o = (self.0)(x);
        }
    }
}

/// Lattice units of a secondary wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalUnits {
    /// lambda2 / 2, m
    pub length: f64,
    /// E_r(lambda2), J
    pub energy: f64,
    /// hbar / E_r(lambda2), s
    pub time: f64,
}

impl NaturalUnits {
    /// Kinetic coefficient `hbar^2 / 2m` in these units.
    pub const KINETIC: f64 = 1.0 / (PI * PI);

    pub fn new(species: &Species, lambda2: f64) -> Result<Self> {
        let energy = atomphys::recoil_energy(species, lambda2)?;
        Ok(NaturalUnits {
            length: 0.5 * lambda2,
            energy,
            time: HBAR / energy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rules() {
        assert!(Grid::new(0.0, 1.0, 100).is_err());
        assert!(Grid::new(1.0, 1.0, 64).is_err());
        let g = Grid::new(-1.0, 1.0, 8).unwrap();
        assert_eq!(g.dx, 0.25);
        assert_eq!(g.x(7), 0.75);
        let k = g.wavenumbers();
        assert_eq!(k[1], PI);
        assert_eq!(k[4], -4.0 * PI);
    }

    #[test]
    fn gaussian_moments() {
        let g = Grid::new(-20.0, 20.0, 1024).unwrap();
        let psi = Wavefunction::gaussian(g, 1.0, 1.5, 0.0);
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-14);
        assert!((psi.mean_position() - 1.0).abs() < 1e-12);
        assert!((psi.variance() - 0.5 * 1.5 * 1.5).abs() < 1e-12);
        assert!(psi.edge_amplitude() < 1e-6);
    }

    #[test]
    fn overlap_checks_grid() {
        let a = Wavefunction::gaussian(Grid::new(-5.0, 5.0, 64).unwrap(), 0.0, 1.0, 0.0);
        let b = Wavefunction::gaussian(Grid::new(-5.0, 5.0, 128).unwrap(), 0.0, 1.0, 0.0);
        assert!(matches!(a.overlap(&b), Err(Error::GridMismatch)));
        assert!((a.overlap(&a).unwrap().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn natural_units_for_851_nm() {
        let u = NaturalUnits::new(&Species::rb87(), 851.2e-9).unwrap();
        assert!((u.time * 1e6 - 50.2).abs() < 0.1, "{}", u.time);
    }
}
