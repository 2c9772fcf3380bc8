//! Strang split-step Fourier propagation.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{edge_amplitude, Grid, TimedPotential, Wavefunction};
use crate::{Error, Result};

/// Edge-strip norm above which a state counts as escaped.
pub const ESCAPE_AMPLITUDE: f64 = 1e-4;

/// Observer payload after every step (and once before the first).
pub struct StepView<'a> {
    pub step: usize,
    pub t: f64,
    pub states: &'a [Wavefunction],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationStats {
    pub steps: usize,
    pub dt: f64,
    /// Largest |V| dt seen, the phase wound per half step is half of it.
    pub max_phase_per_step: f64,
}

/// Propagator for one grid and one kinetic coefficient. Reusable across
/// calls; owns its FFT plans and scratch space.
pub struct SplitStep {
    grid: Grid,
    kinetic: f64,
    x: Vec<f64>,
    ek: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    kin_dt: f64,
    kin_phase: Vec<Complex64>,
    v: Vec<f64>,
    v_phase: Vec<Complex64>,
    escape_amplitude: f64,
}

impl SplitStep {
    pub fn new(grid: Grid, kinetic: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n_points);
        let inv = planner.plan_fft_inverse(grid.n_points);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let ek = grid.wavenumbers().into_iter().map(|k| kinetic * k * k).collect();
        SplitStep {
            grid,
            kinetic,
            x: grid.points(),
            ek,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            kin_dt: f64::NAN,
            kin_phase: vec![Complex64::new(0.0, 0.0); grid.n_points],
            v: vec![0.0; grid.n_points],
            v_phase: vec![Complex64::new(0.0, 0.0); grid.n_points],
            escape_amplitude: ESCAPE_AMPLITUDE,
        }
    }

    /// Overrides the escape threshold; `f64::INFINITY` disables the guard.
    pub fn with_escape_amplitude(mut self, amplitude: f64) -> Self {
        self.escape_amplitude = amplitude;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kinetic(&self) -> f64 {
        self.kinetic
    }

    pub fn points(&self) -> &[f64] {
        &self.x
    }

    fn prepare_kinetic(&mut self, dt: f64) {
        if self.kin_dt == dt {
            return;
        }
        let inv_n = 1.0 / self.grid.n_points as f64;
        for (p, &e) in self.kin_phase.iter_mut().zip(&self.ek) {
            *p = Complex64::from_polar(inv_n, -e * dt);
        }
        self.kin_dt = dt;
    }

    /// Propagates every state from `t0` to `t1` with uniform steps no longer
    /// than `dt`, evaluating the potential at each step's midpoint.
    pub fn propagate(
        &mut self,
        states: &mut [Wavefunction],
        potential: &dyn TimedPotential,
        t0: f64,
        t1: f64,
        dt: f64,
        mut observer: Option<&mut dyn FnMut(&StepView)>,
    ) -> Result<PropagationStats> {
        if !(dt > 0.0) || !(t1 >= t0) {
            return Err(Error::InvalidParameter(format!(
                "invalid propagation interval [{t0}, {t1}] with dt = {dt}"
            )));
        }
        for s in states.iter() {
            if !s.grid.same_as(&self.grid) {
                return Err(Error::GridMismatch);
            }
        }
        let steps = ((t1 - t0) / dt - 1e-9).ceil().max(0.0) as usize;
        let h = if steps == 0 { 0.0 } else { (t1 - t0) / steps as f64 };
        if let Some(obs) = observer.as_mut() {
            obs(&StepView { step: 0, t: t0, states });
        }
        let mut max_phase = 0.0f64;
        if steps > 0 {
            self.prepare_kinetic(h);
        }
        let mut warned = false;
        for step in 0..steps {
            let tm = t0 + (step as f64 + 0.5) * h;
            potential.fill(tm, &self.x, &mut self.v);
            let mut vmax = 0.0f64;
            for (p, &v) in self.v_phase.iter_mut().zip(&self.v) {
                *p = Complex64::from_polar(1.0, -0.5 * v * h);
                vmax = vmax.max(v.abs());
            }
            max_phase = max_phase.max(vmax * h);
            if vmax * h > std::f64::consts::PI && !warned {
                log::warn!("potential phase per step {:.3} rad exceeds pi; reduce dt", vmax * h);
                warned = true;
            }
            for s in states.iter_mut() {
                let a = &mut s.amplitudes;
                a.iter_mut().zip(&self.v_phase).for_each(|(a, p)| *a *= p);
                self.fwd.process_with_scratch(a, &mut self.scratch);
                a.iter_mut().zip(&self.kin_phase).for_each(|(a, p)| *a *= p);
                self.inv.process_with_scratch(a, &mut self.scratch);
                a.iter_mut().zip(&self.v_phase).for_each(|(a, p)| *a *= p);
                let edge = edge_amplitude(a, self.grid.dx);
                if !(edge <= self.escape_amplitude) {
                    return Err(Error::Escaped { amplitude: edge });
                }
            }
            if let Some(obs) = observer.as_mut() {
                obs(&StepView {
                    step: step + 1,
                    t: t0 + (step + 1) as f64 * h,
                    states,
                });
            }
        }
        Ok(PropagationStats {
            steps,
            dt: h,
            max_phase_per_step: max_phase,
        })
    }

    /// `<psi| -c d^2 + V |psi>` with the kinetic part evaluated spectrally.
    pub fn energy(&mut self, psi: &Wavefunction, v: &[f64]) -> Result<f64> {
        if !psi.grid.same_as(&self.grid) || v.len() != self.grid.n_points {
            return Err(Error::GridMismatch);
        }
        let mut buf = psi.amplitudes.clone();
        self.fwd.process_with_scratch(&mut buf, &mut self.scratch);
        let n = self.grid.n_points as f64;
        let kin: f64 = buf.iter().zip(&self.ek).map(|(a, e)| a.norm_sqr() * e).sum::<f64>() * self.grid.dx / n;
        Ok(kin + psi.expectation(v))
    }

    /// Potential samples at time `t` on this grid.
    pub fn sample(&self, potential: &dyn TimedPotential, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_points];
        potential.fill(t, &self.x, &mut out);
        out
    }
}
