//! Merge dynamics of one superlattice period and the three fidelity classes.
//!
//! Everything inside is in lattice units of the secondary wavelength: length
//! `lambda2 / 2`, energy `E_r(lambda2)`, time `hbar / E_r(lambda2)`. The
//! potential is
//!
//! ```text
//! V(x, t) = -A1(t) cos^2(pi r x + phi(t)) - A2 sin^2(pi x),   r = (n - 1) / n
//! ```
//!
//! so the targets sit in the secondary wells at `x = -1/2, +1/2` on either
//! side of the primary antinode at the origin, and the `n - 2` spectators sit
//! at `x = 3/2, ..., n - 3/2`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pulse::ControlPulse;
use crate::atomphys::{self, Polarization, QubitState, Species};
use crate::dynamics::{
    density_overlap, spectral_well_states, tridiagonal_eigen, well_states, Grid, InteractionSpec, NaturalUnits,
    SplitStep, StepView, TimedPotential, TrajectoryWriter, Wavefunction,
};
use crate::superlattice::wavelength_for_cycles;
use crate::{Error, Result};

/// Global control offsets: `A1 (1 + e_A)`, `phi + e_phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBox {
    /// relative amplitude half width
    pub amp_frac: f64,
    /// phase half width, rad
    pub phase_offset: f64,
    /// points per axis
    pub grid: usize,
}

impl Default for ErrorBox {
    fn default() -> Self {
        ErrorBox {
            amp_frac: 1e-3,
            phase_offset: 2e-3 * PI,
            grid: 3,
        }
    }
}

impl ErrorBox {
    pub fn zero() -> Self {
        ErrorBox {
            amp_frac: 0.0,
            phase_offset: 0.0,
            grid: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amp_frac >= 0.0 && self.amp_frac < 1.0) || !(self.phase_offset >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "error box half widths must be non-negative (amplitude below 1), got {} / {}",
                self.amp_frac, self.phase_offset
            )));
        }
        if self.grid == 0 || (self.grid.is_multiple_of(2) && (self.amp_frac > 0.0 || self.phase_offset > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "error grid needs an odd number of points per axis so the nominal point is included, got {}",
                self.grid
            )));
        }
        Ok(())
    }

    /// Grid points as `(e_A, e_phi)`, row-major in amplitude.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let axis = |w: f64| -> Vec<f64> {
            if self.grid <= 1 || w == 0.0 {
                return vec![0.0];
            }
            let m = (self.grid - 1) as f64;
            (0..self.grid).map(|k| -w + 2.0 * w * k as f64 / m).collect()
        };
        let amps = axis(self.amp_frac);
        let phases = axis(self.phase_offset);
        amps.iter().flat_map(|&a| phases.iter().map(move |&p| (a, p))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Target,
    All,
    Error,
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(Objective::Target),
            "all" => Ok(Objective::All),
            "error" => Ok(Objective::Error),
            other => Err(Error::Config(format!(
                "unknown objective '{other}' (target, all, error)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeConfig {
    /// m
    pub lambda1: f64,
    /// secondary wells per superlattice period
    pub cycles: u32,
    /// secondary depth, E_r(lambda2)
    pub a2: f64,
    /// 0 picks 2048 points for n <= 5 and 4096 above
    pub grid_points: usize,
    /// natural time units
    pub dt: f64,
    pub interior_knots: usize,
    /// m
    pub transverse_wavelength: f64,
    /// E_r(transverse_wavelength)
    pub transverse_depth: f64,
    /// transverse trap frequencies for the contact coupling, Hz; taken from
    /// the transverse lattice when absent
    pub trap_frequencies: Option<[f64; 2]>,
    /// E_r(lambda2)
    pub max_endpoint_split: f64,
    /// edge-strip norm treated as escape; the domain is one full period, so
    /// smaller edge weight is ordinary tunnelling between neighbouring wells
    pub escape_norm: f64,
    pub error_box: ErrorBox,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            lambda1: 1064e-9,
            cycles: 5,
            a2: 32.0,
            grid_points: 0,
            dt: 1e-3,
            interior_knots: 8,
            transverse_wavelength: 1064e-9,
            transverse_depth: 32.0,
            trap_frequencies: None,
            max_endpoint_split: 1e-3,
            escape_norm: 1e-3,
            error_box: ErrorBox::default(),
        }
    }
}

impl MergeConfig {
    /// Reduced settings for quick runs: 512 points, `dt = 0.01`, 4 knots.
    pub fn smoke(cycles: u32) -> Self {
        MergeConfig {
            cycles,
            grid_points: 512,
            dt: 0.01,
            interior_knots: 4,
            ..Default::default()
        }
    }

    pub fn lambda2(&self) -> Result<f64> {
        wavelength_for_cycles(self.lambda1, self.cycles)
    }

    pub fn points(&self) -> usize {
        match self.grid_points {
            0 if self.cycles <= 5 => 2048,
            0 => 4096,
            p => p,
        }
    }

    /// Every violation, not only the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.cycles < 3 {
            out.push(format!("merge needs at least 3 cycles per period, got {}", self.cycles));
        }
        if !(self.lambda1 > 0.0) {
            out.push(format!("lambda1 must be positive, got {}", self.lambda1));
        }
        if !(self.a2 > 0.0) {
            out.push(format!("secondary depth must be positive, got {}", self.a2));
        }
        let p = self.points();
        if p < 64 || !p.is_power_of_two() {
            out.push(format!("grid points must be a power of two >= 64, got {p}"));
        }
        if !(self.dt > 0.0) {
            out.push(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.transverse_wavelength > 0.0 && self.transverse_depth > 0.0) {
            out.push("transverse lattice wavelength and depth must be positive".into());
        }
        if !(self.escape_norm > 0.0) {
            out.push("escape threshold must be positive".into());
        }
        if !(self.max_endpoint_split > 0.0) {
            out.push("endpoint split bound must be positive".into());
        }
        if let Err(e) = self.error_box.validate() {
            out.push(e.to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("; ")))
        }
    }
}

/// Trigonometric tables of one grid: `cos(pi r x)`, `sin(pi r x)`, `sin^2(pi x)`.
#[derive(Debug, Clone)]
struct GridTables {
    x0: f64,
    len: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    sec: Vec<f64>,
}

impl GridTables {
    fn new(grid: &Grid, r: f64) -> Self {
        let x = grid.points();
        GridTables {
            x0: x[0],
            len: x.len(),
            cos: x.iter().map(|x| (PI * r * x).cos()).collect(),
            sin: x.iter().map(|x| (PI * r * x).sin()).collect(),
            sec: x.iter().map(|x| (PI * x).sin().powi(2)).collect(),
        }
    }

    fn matches(&self, x: &[f64]) -> bool {
        x.len() == self.len && x[0] == self.x0
    }
}

/// Potential for one pulse in natural time, with a global offset applied.
pub struct MergePotential<'a> {
    pulse: &'a ControlPulse,
    tables: &'a [GridTables],
    r: f64,
    a2: f64,
    amp: f64,
    phase: f64,
}

impl MergePotential<'_> {
    pub fn controls(&self, t: f64) -> (f64, f64) {
        (self.pulse.a1(t) * (1.0 + self.amp), self.pulse.phi(t) + self.phase)
    }
}

impl TimedPotential for MergePotential<'_> {
    fn fill(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let (a1, phi) = self.controls(t);
        let a2 = self.a2;
        if let Some(tab) = self.tables.iter().find(|t| t.matches(x)) {
            let (sp, cp) = phi.sin_cos();
            for (((o, c), s), q) in out.iter_mut().zip(&tab.cos).zip(&tab.sin).zip(&tab.sec) {
                let cc = c * cp - s * sp;
                *o = -a1 * cc * cc - a2 * q;
            }
            return;
        }
        let kr = PI * self.r;
        for (o, &x) in out.iter_mut().zip(x) {
            let c = (kr * x + phi).cos();
            let s = (PI * x).sin();
            *o = -a1 * c * c - a2 * s * s;
        }
    }
}

/// Outcome of one forward merge. Failures (escape, missing bound state,
/// coupled start) give zero fidelities and a diagnostic instead of an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvaluation {
    pub f_target: f64,
    pub f_all: f64,
    pub p_g: f64,
    pub p_e: f64,
    /// `true` when the right atom ends in the ground state.
    pub swapped: bool,
    pub neighbour_survival: Vec<f64>,
    /// tunnelling split between the target wells at t = 0, E_r(lambda2)
    pub start_split: f64,
    /// `int U_int dt / hbar` over the merge, rad (full detail only)
    pub merge_phase: f64,
    /// interaction splitting of the merged well's two lowest states, J (full detail only)
    pub u_int_final: f64,
    /// expected photons scattered by all atoms of the period during the merge (full detail only)
    pub merge_photons: f64,
    /// scattering rate of all atoms in the final potential, 1/s (full detail only)
    pub final_rate: f64,
    pub failure: Option<String>,
}

impl MergeEvaluation {
    fn failed(reason: String, neighbours: usize, start_split: f64) -> Self {
        MergeEvaluation {
            f_target: 0.0,
            f_all: 0.0,
            p_g: 0.0,
            p_e: 0.0,
            swapped: false,
            neighbour_survival: vec![0.0; neighbours],
            start_split,
            merge_phase: 0.0,
            u_int_final: 0.0,
            merge_photons: 0.0,
            final_rate: 0.0,
            failure: Some(reason),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detail {
    /// Targets only.
    Target,
    /// Targets and spectators.
    All,
    /// Everything, including phase and scattering integrals.
    Full,
}

/// Per-atom scattering coefficients in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterModel {
    /// photons per natural time per unit of `A1 <cos^2>`
    pub primary: f64,
    /// photons per natural time per unit of `A2 <sin^2>`
    pub secondary: f64,
    /// transverse lattices, photons per natural time
    pub transverse: f64,
}

/// Precomputed geometry and units for one [`MergeConfig`].
#[derive(Debug, Clone)]
pub struct MergeModel {
    pub config: MergeConfig,
    pub species: Species,
    pub units: NaturalUnits,
    pub lambda2: f64,
    pub r: f64,
    /// `[-floor(n/2), n - floor(n/2))`, holds the targets
    pub grid_a: Grid,
    /// `[0, n)`, holds the spectators
    pub grid_b: Grid,
    pub interaction: InteractionSpec,
    /// contact coupling in natural units
    pub g: f64,
    pub scatter: ScatterModel,
    tables: Vec<GridTables>,
}

fn worst_kappa(species: &Species, wavelength: f64) -> Result<f64> {
    let mut k = 0.0f64;
    for s in QubitState::basis() {
        k = k.max(atomphys::scattering_per_depth(
            species,
            s,
            wavelength,
            Polarization::Linear,
        )?);
    }
    Ok(k)
}

impl MergeModel {
    pub fn new(species: &Species, config: &MergeConfig) -> Result<Self> {
        config.validate()?;
        let lambda2 = config.lambda2()?;
        species.check_red_detuned(lambda2)?;
        species.check_red_detuned(config.lambda1)?;
        species.check_red_detuned(config.transverse_wavelength)?;
        let units = NaturalUnits::new(species, lambda2)?;
        let n = config.cycles as f64;
        let points = config.points();
        // both grids end on secondary barriers, away from any target
        let a0 = -(0.5 * n).floor();
        let grid_a = Grid::new(a0, a0 + n, points)?;
        let grid_b = Grid::new(0.0, n, points)?;
        let interaction = match config.trap_frequencies {
            Some([ny, nz]) => InteractionSpec::new(species.scattering_length, ny, nz)?,
            None => InteractionSpec::from_transverse_lattice(
                species,
                config.transverse_wavelength,
                config.transverse_depth,
            )?,
        };
        let g = interaction.g1d / (units.energy * units.length);
        let er_t = atomphys::recoil_energy(species, config.transverse_wavelength)?;
        let kt = worst_kappa(species, config.transverse_wavelength)?;
        let scatter = ScatterModel {
            primary: worst_kappa(species, config.lambda1)? * units.energy * units.time,
            secondary: worst_kappa(species, lambda2)? * units.energy * units.time,
            // two standing waves, atoms at their antinodes
            transverse: 2.0 * kt * config.transverse_depth * er_t * units.time,
        };
        let r = (n - 1.0) / n;
        let tables = vec![GridTables::new(&grid_a, r), GridTables::new(&grid_b, r)];
        Ok(MergeModel {
            tables,
            config: config.clone(),
            species: species.clone(),
            units,
            lambda2,
            r,
            grid_a,
            grid_b,
            interaction,
            g,
            scatter,
        })
    }

    fn stepper(&self, grid: Grid) -> SplitStep {
        SplitStep::new(grid, NaturalUnits::KINETIC).with_escape_amplitude(self.config.escape_norm)
    }

    pub fn neighbours(&self) -> usize {
        self.config.cycles as usize - 2
    }

    /// Spectator starting positions on grid B.
    pub fn neighbour_sites(&self) -> Vec<f64> {
        (0..self.neighbours()).map(|k| k as f64 + 1.5).collect()
    }

    /// Pulse with its time axis converted to natural units.
    pub fn natural_pulse(&self, pulse: &ControlPulse) -> Result<ControlPulse> {
        pulse.rescaled(pulse.tau / self.units.time)
    }

    /// Pulse with its time axis converted back to seconds.
    pub fn si_pulse(&self, pulse: &ControlPulse) -> Result<ControlPulse> {
        pulse.rescaled(pulse.tau * self.units.time)
    }

    pub fn potential<'a>(&'a self, natural: &'a ControlPulse, amp: f64, phase: f64) -> MergePotential<'a> {
        MergePotential {
            pulse: natural,
            tables: &self.tables,
            r: self.r,
            a2: self.config.a2,
            amp,
            phase,
        }
    }

    /// Seed ramp: smooth step of `A1` from 0 up to 2.5 `A2` at `phi = 0.1`.
    pub fn seed_pulse(&self, tau: f64) -> Result<ControlPulse> {
        ControlPulse::smooth_step(tau, self.config.interior_knots + 2, 0.0, 2.5 * self.config.a2, 0.1)
    }

    /// Tunnelling split `2J` between the two target wells of `v` on grid A.
    ///
    /// Uses `(E1 - E0)^2 = eps^2 + 4 J^2` with `eps` the difference of the
    /// single-well ground energies, so a tilt alone does not count.
    pub fn target_split(&self, v: &[f64]) -> Result<f64> {
        let c = NaturalUnits::KINETIC;
        let left = well_states(&self.grid_a, v, c, -0.5, 1)?;
        let right = well_states(&self.grid_a, v, c, 0.5, 1)?;
        if left.minimum == right.minimum {
            return Err(Error::Eigensolver("target wells are not separated".into()));
        }
        let (l, r) = if left.minimum < right.minimum {
            (&left, &right)
        } else {
            (&right, &left)
        };
        let lo = l.window.0;
        let hi = r.window.1;
        let dx = self.grid_a.dx;
        let k = c / (dx * dx);
        let diag: Vec<f64> = v[lo..=hi].iter().map(|v| 2.0 * k + v).collect();
        let off = vec![-k; hi - lo];
        let (e, _) = tridiagonal_eigen(&diag, &off, 2)?;
        let gap = e[1] - e[0];
        let eps = left.energies[0] - right.energies[0];
        Ok((gap * gap - eps * eps).max(0.0).sqrt())
    }

    /// Split at both ends of a natural-time pulse.
    pub fn endpoint_splits(&self, natural: &ControlPulse) -> Result<(f64, f64)> {
        let pot = self.potential(natural, 0.0, 0.0);
        let mut v = vec![0.0; self.grid_a.n_points];
        let x = self.grid_a.points();
        pot.fill(0.0, &x, &mut v);
        let start = self.target_split(&v)?;
        pot.fill(natural.tau, &x, &mut v);
        let end = self.target_split(&v).unwrap_or(f64::INFINITY);
        Ok((start, end))
    }

    /// Forward merge of a pulse given in seconds.
    pub fn evaluate(&self, pulse: &ControlPulse, detail: Detail) -> Result<MergeEvaluation> {
        self.evaluate_offset(pulse, detail, 0.0, 0.0)
    }

    pub fn evaluate_offset(
        &self,
        pulse: &ControlPulse,
        detail: Detail,
        amp: f64,
        phase: f64,
    ) -> Result<MergeEvaluation> {
        let natural = self.natural_pulse(pulse)?;
        Ok(self.run(&natural, detail, amp, phase, true))
    }

    /// `check_split` enforces the decoupled-start condition; the error box
    /// checks it once on the nominal pulse only.
    fn run(&self, pulse: &ControlPulse, detail: Detail, amp: f64, phase: f64, check_split: bool) -> MergeEvaluation {
        let nb = self.neighbours();
        let c = NaturalUnits::KINETIC;
        let pot = self.potential(pulse, amp, phase);
        let tau = pulse.tau;
        let xa = self.grid_a.points();
        let xb = self.grid_b.points();
        let sample = |x: &[f64], t: f64| {
            let mut v = vec![0.0; x.len()];
            pot.fill(t, x, &mut v);
            v
        };

        let va = sample(&xa, 0.0);
        let start_split = match self.target_split(&va) {
            Ok(s) => s,
            Err(e) => return MergeEvaluation::failed(format!("initial wells: {e}"), nb, f64::NAN),
        };
        if check_split && !(start_split < self.config.max_endpoint_split) {
            return MergeEvaluation::failed(
                format!(
                    "target wells coupled at t = 0: split {start_split:.3e} exceeds {:.1e}",
                    self.config.max_endpoint_split
                ),
                nb,
                start_split,
            );
        }
        let mut targets = Vec::with_capacity(2);
        for x0 in [-0.5, 0.5] {
            match spectral_well_states(&self.grid_a, &va, c, x0, 1) {
                Ok(w) => targets.push(w.states[0].clone()),
                Err(e) => return MergeEvaluation::failed(format!("initial target state: {e}"), nb, start_split),
            }
        }

        let mut spectators = Vec::new();
        if detail != Detail::Target {
            let vb = sample(&xb, 0.0);
            for x0 in self.neighbour_sites() {
                match spectral_well_states(&self.grid_b, &vb, c, x0, 1) {
                    Ok(w) => spectators.push(w.states[0].clone()),
                    Err(e) => return MergeEvaluation::failed(format!("initial spectator state: {e}"), nb, start_split),
                }
            }
        }

        let full = detail == Detail::Full;
        let sc = self.scatter;
        let (kr, a2) = (PI * self.r, self.config.a2);
        // trapezoid accumulators over (t, value)
        let mut phase_int = Trapezoid::default();
        let mut photons = Trapezoid::default();
        let photon_rate = |t: f64, states: &[Wavefunction], tab: &GridTables| -> f64 {
            let (a1, phi) = pot.controls(t);
            let (sp, cp) = phi.sin_cos();
            states
                .iter()
                .map(|s| {
                    let mut cos2 = 0.0;
                    let mut sin2 = 0.0;
                    for (((a, c), sn), q) in s.amplitudes.iter().zip(&tab.cos).zip(&tab.sin).zip(&tab.sec) {
                        let p = a.norm_sqr();
                        let cc = c * cp - sn * sp;
                        cos2 += p * cc * cc;
                        sin2 += p * q;
                    }
                    let dx = s.grid.dx;
                    sc.primary * a1 * cos2 * dx + sc.secondary * a2 * sin2 * dx + sc.transverse
                })
                .sum()
        };

        let dt = self.config.dt;
        let mut prop_a = self.stepper(self.grid_a);
        let g = self.g;
        let res = if full {
            let mut gamma_a = Trapezoid::default();
            let mut obs = |v: &StepView| {
                let u = 2.0 * g * density_overlap(&v.states[0], &v.states[1]).unwrap_or(0.0);
                phase_int.add(v.t, u);
                gamma_a.add(v.t, photon_rate(v.t, v.states, &self.tables[0]));
            };
            let r = prop_a.propagate(&mut targets, &pot, 0.0, tau, dt, Some(&mut obs));
            photons.total += gamma_a.total;
            r
        } else {
            prop_a.propagate(&mut targets, &pot, 0.0, tau, dt, None)
        };
        if let Err(e) = res {
            return MergeEvaluation::failed(format!("target propagation: {e}"), nb, start_split);
        }
        if !spectators.is_empty() {
            // spectator leakage shows up in the survival product; on the
            // periodic domain the edge strips are target wells, not a boundary
            let mut prop_b = SplitStep::new(self.grid_b, NaturalUnits::KINETIC).with_escape_amplitude(f64::INFINITY);
            let res = if full {
                let mut gamma_b = Trapezoid::default();
                let mut obs = |v: &StepView| gamma_b.add(v.t, photon_rate(v.t, v.states, &self.tables[1]));
                let r = prop_b.propagate(&mut spectators, &pot, 0.0, tau, dt, Some(&mut obs));
                photons.total += gamma_b.total;
                r
            } else {
                prop_b.propagate(&mut spectators, &pot, 0.0, tau, dt, None)
            };
            if let Err(e) = res {
                return MergeEvaluation::failed(format!("spectator propagation: {e}"), nb, start_split);
            }
        }

        let vf = sample(&xa, tau);
        let (_, phi_f) = pot.controls(tau);
        let guess = (-phi_f / kr).clamp(-0.5, 0.5);
        let merged = match spectral_well_states(&self.grid_a, &vf, c, guess, 2) {
            Ok(w) => w,
            Err(e) => return MergeEvaluation::failed(format!("merged well: {e}"), nb, start_split),
        };
        let (g0, e1) = (&merged.states[0], &merged.states[1]);
        let ov = |a: &Wavefunction, b: &Wavefunction| a.overlap(b).map(|z| z.norm_sqr()).unwrap_or(0.0);
        let (lg, re) = (ov(g0, &targets[0]), ov(e1, &targets[1]));
        let (rg, le) = (ov(g0, &targets[1]), ov(e1, &targets[0]));
        let swapped = rg * le > lg * re;
        let (p_g, p_e) = if swapped { (rg, le) } else { (lg, re) };
        let f_target = p_g * p_e;

        let mut survival = Vec::new();
        if !spectators.is_empty() {
            let vbf = sample(&xb, tau);
            for s in &spectators {
                let p = spectral_well_states(&self.grid_b, &vbf, c, s.mean_position(), 1)
                    .map(|w| ov(&w.states[0], s))
                    .unwrap_or(0.0);
                survival.push(p);
            }
        }
        let f_all = if detail == Detail::Target {
            f_target
        } else {
            f_target * survival.iter().product::<f64>()
        };

        let mut eval = MergeEvaluation {
            f_target,
            f_all,
            p_g,
            p_e,
            swapped,
            neighbour_survival: survival,
            start_split,
            merge_phase: 0.0,
            u_int_final: 0.0,
            merge_photons: 0.0,
            final_rate: 0.0,
            failure: None,
        };
        if full {
            let u = 2.0 * g * density_overlap(g0, e1).unwrap_or(0.0);
            let mut finals: Vec<Wavefunction> = merged.states.clone();
            let vbf = sample(&xb, tau);
            for s in &spectators {
                finals.push(
                    spectral_well_states(&self.grid_b, &vbf, c, s.mean_position(), 1)
                        .map(|w| w.states[0].clone())
                        .unwrap_or_else(|_| s.clone()),
                );
            }
            let rate =
                photon_rate(tau, &finals[..2], &self.tables[0]) + photon_rate(tau, &finals[2..], &self.tables[1]);
            eval.merge_phase = phase_int.total;
            eval.u_int_final = u * self.units.energy;
            eval.merge_photons = photons.total;
            eval.final_rate = rate / self.units.time;
        }
        eval
    }

    /// Worst `F_all` over the error box, with the evaluation that produced it.
    pub fn evaluate_error(&self, pulse: &ControlPulse, ebox: &ErrorBox) -> Result<(f64, MergeEvaluation)> {
        ebox.validate()?;
        let natural = self.natural_pulse(pulse)?;
        let pot = self.potential(&natural, 0.0, 0.0);
        let mut v = vec![0.0; self.grid_a.n_points];
        pot.fill(0.0, &self.grid_a.points(), &mut v);
        match self.target_split(&v) {
            Ok(s) if s < self.config.max_endpoint_split => {}
            _ => return Ok((0.0, self.run(&natural, Detail::All, 0.0, 0.0, true))),
        }
        let evals: Vec<MergeEvaluation> = ebox
            .points()
            .into_par_iter()
            .map(|(a, p)| self.run(&natural, Detail::All, a, p, false))
            .collect();
        let mut worst = 0;
        for (i, e) in evals.iter().enumerate() {
            if e.f_all < evals[worst].f_all {
                worst = i;
            }
        }
        let f = evals[worst].f_all;
        Ok((f, evals.into_iter().nth(worst).unwrap()))
    }

    pub fn fidelity(&self, pulse: &ControlPulse, objective: Objective) -> Result<f64> {
        Ok(match objective {
            Objective::Target => self.evaluate(pulse, Detail::Target)?.f_target,
            Objective::All => self.evaluate(pulse, Detail::All)?.f_all,
            Objective::Error => self.evaluate_error(pulse, &self.config.error_box)?.0,
        })
    }

    /// `F_all` over a rectangular grid of offsets, row-major in amplitude.
    pub fn landscape(&self, pulse: &ControlPulse, amps: &[f64], phases: &[f64]) -> Result<Vec<Vec<f64>>> {
        let natural = self.natural_pulse(pulse)?;
        let cells: Vec<(f64, f64)> = amps.iter().flat_map(|&a| phases.iter().map(move |&p| (a, p))).collect();
        let f: Vec<f64> = cells
            .into_par_iter()
            .map(|(a, p)| self.run(&natural, Detail::All, a, p, false).f_all)
            .collect();
        Ok(f.chunks(phases.len().max(1)).map(|c| c.to_vec()).collect())
    }

    /// Dumps the target pair's densities during the merge, about `frames`
    /// frames evenly spaced in time. Lengths in m, times in s.
    pub fn write_trajectory<W: Write>(&self, pulse: &ControlPulse, out: W, frames: usize) -> Result<W> {
        let natural = self.natural_pulse(pulse)?;
        let c = NaturalUnits::KINETIC;
        let pot = self.potential(&natural, 0.0, 0.0);
        let xa = self.grid_a.points();
        let mut v0 = vec![0.0; xa.len()];
        pot.fill(0.0, &xa, &mut v0);
        let mut states = Vec::with_capacity(2);
        for x0 in [-0.5, 0.5] {
            states.push(spectral_well_states(&self.grid_a, &v0, c, x0, 1)?.states.remove(0));
        }
        let steps = (natural.tau / self.config.dt).ceil().max(1.0) as usize;
        let every = (steps / frames.max(1)).max(1);
        let mut writer = TrajectoryWriter::new(out, self.grid_a, 2, self.units.length, self.units.time)?;
        let mut failure = None;
        let mut obs = |v: &StepView| {
            if failure.is_none() && (v.step.is_multiple_of(every) || v.step == steps) {
                if let Err(e) = writer.frame(v.t, v.states) {
                    failure = Some(e);
                }
            }
        };
        self.stepper(self.grid_a)
            .propagate(&mut states, &pot, 0.0, natural.tau, self.config.dt, Some(&mut obs))?;
        if let Some(e) = failure {
            return Err(e);
        }
        writer.finish()
    }

    /// Splits the ideal merged pair with the reversed pulse and projects onto
    /// the initial separated states: `|<L|psi_g>|^2 |<R|psi_e>|^2` under the
    /// assignment the forward merge chose.
    pub fn reversal_overlap(&self, pulse: &ControlPulse) -> Result<f64> {
        let natural = self.natural_pulse(pulse)?;
        let forward = self.run(&natural, Detail::Target, 0.0, 0.0, true);
        if let Some(f) = forward.failure {
            return Err(Error::InvalidParameter(format!("forward merge failed: {f}")));
        }
        let c = NaturalUnits::KINETIC;
        let pot = self.potential(&natural, 0.0, 0.0);
        let xa = self.grid_a.points();
        let mut vf = vec![0.0; xa.len()];
        pot.fill(natural.tau, &xa, &mut vf);
        let (_, phi_f) = pot.controls(natural.tau);
        let guess = (-phi_f / (PI * self.r)).clamp(-0.5, 0.5);
        let merged = spectral_well_states(&self.grid_a, &vf, c, guess, 2)?;
        let mut v0 = vec![0.0; xa.len()];
        pot.fill(0.0, &xa, &mut v0);
        let left = spectral_well_states(&self.grid_a, &v0, c, -0.5, 1)?.states.remove(0);
        let right = spectral_well_states(&self.grid_a, &v0, c, 0.5, 1)?.states.remove(0);

        let reversed = natural.reversed()?;
        let rpot = self.potential(&reversed, 0.0, 0.0);
        let mut states = merged.states.clone();
        self.stepper(self.grid_a)
            .propagate(&mut states, &rpot, 0.0, reversed.tau, self.config.dt, None)?;
        let ov = |a: &Wavefunction, b: &Wavefunction| -> Result<f64> { Ok(a.overlap(b)?.norm_sqr()) };
        let (g_home, e_home) = if forward.swapped {
            (&right, &left)
        } else {
            (&left, &right)
        };
        Ok(ov(g_home, &states[0])? * ov(e_home, &states[1])?)
    }
}

#[derive(Default)]
struct Trapezoid {
    last: Option<(f64, f64)>,
    total: f64,
}

impl Trapezoid {
    fn add(&mut self, t: f64, y: f64) {
        if let Some((t0, y0)) = self.last {
            self.total += 0.5 * (t - t0) * (y + y0);
        }
        self.last = Some((t, y));
    }
}
