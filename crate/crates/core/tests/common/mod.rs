//! Dynamics oracles shared by the test suites. Each returns the measured
//! quantity so callers choose how to judge it.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use slgate::dynamics::{
    density_overlap, eigenstates, interaction_energy_natural, Grid, SplitStep, StaticPotential, TimedPotential,
    Wavefunction,
};

/// Harmonic trap whose centre moves as `0.5 sin(t)`.
pub struct Shaken;

impl TimedPotential for Shaken {
    fn fill(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let c = 0.5 * t.sin();
        for (o, &x) in out.iter_mut().zip(x) {
            *o = 0.5 * (x - c) * (x - c) + 0.05 * x.powi(4);
        }
    }
}

fn evolve(dt: f64) -> Wavefunction {
    let g = Grid::new(-10.0, 10.0, 256).unwrap();
    let mut s = vec![Wavefunction::gaussian(g, 0.3, 0.8, 0.4)];
    SplitStep::new(g, 0.5)
        .propagate(&mut s, &Shaken, 0.0, 2.0, dt, None)
        .unwrap();
    s.pop().unwrap()
}

fn distance(a: &Wavefunction, b: &Wavefunction) -> f64 {
    a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Observed orders between successive halvings of dt.
pub fn strang_orders() -> Vec<f64> {
    let reference = evolve(0.1 / 256.0);
    let e: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| distance(&evolve(dt), &reference))
        .collect();
    e.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// |Δ‖ψ‖²| after 10^4 steps in a driven anharmonic trap.
pub fn norm_drift() -> f64 {
    let g = Grid::new(-10.0, 10.0, 512).unwrap();
    let mut s = vec![Wavefunction::gaussian(g, -1.0, 0.7, 1.5)];
    let n0 = s[0].norm_sqr();
    let stats = SplitStep::new(g, 0.5)
        .propagate(&mut s, &Shaken, 0.0, 10.0, 1e-3, None)
        .unwrap();
    assert_eq!(stats.steps, 10_000);
    (s[0].norm_sqr() - n0).abs()
}

/// Relative width error of a freely spreading Gaussian.
pub fn dispersion_error() -> f64 {
    let g = Grid::new(-80.0, 80.0, 4096).unwrap();
    let (c, s0, t) = (0.5, 1.0, 4.0);
    let mut s = vec![Wavefunction::gaussian(g, 0.0, s0, 0.0)];
    SplitStep::new(g, c)
        .propagate(&mut s, &StaticPotential(|_| 0.0), 0.0, t, 0.05, None)
        .unwrap();
    let width = (2.0 * s[0].variance()).sqrt();
    let want = s0 * (1.0 + (2.0 * c * t / (s0 * s0)).powi(2)).sqrt();
    ((width - want) / want).abs()
}

/// Largest relative deviation of harmonic level spacings from one quantum.
pub fn harmonic_spacing_error() -> f64 {
    let g = Grid::new(-10.0, 10.0, 1024).unwrap();
    let v: Vec<f64> = g.points().iter().map(|x| 0.5 * x * x).collect();
    let levels = eigenstates(&v, &g, 0.5, 6).unwrap();
    levels
        .windows(2)
        .map(|w| (w[1].0 - w[0].0 - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Relative error of the contact energy of two identical Gaussians.
pub fn gaussian_interaction_error() -> f64 {
    let g = Grid::new(-15.0, 15.0, 4096).unwrap();
    let s = 0.9;
    let psi = Wavefunction::gaussian(g, 0.2, s, 0.0);
    let coupling = 0.37;
    // |psi|^2 has standard deviation s / sqrt 2
    let want = coupling / (s * (2.0 * PI).sqrt());
    let got = coupling * density_overlap(&psi, &psi).unwrap();
    ((got - want) / want).abs()
}

/// Exact diagonalization of two contact-coupled particles in the
/// exchange-symmetric sector of a small grid. The gap between the second
/// symmetric level and the lowest antisymmetric one (which the contact term
/// cannot shift) is the triplet-singlet splitting `U_int`. Returns the
/// relative error of the mean-field estimate.
pub fn two_particle_error() -> f64 {
    let n = 64;
    let g = Grid::new(-6.0, 6.0, n).unwrap();
    let c = 0.5;
    let coupling = 0.02;
    let x = g.points();
    let v: Vec<f64> = x.iter().map(|x| 0.5 * x * x).collect();

    let k = c / (g.dx * g.dx);
    // the same three-point stencil the library uses, hard walls
    let h = |i: usize, j: usize| -> f64 {
        if i == j {
            2.0 * k + v[i]
        } else {
            -k
        }
    };
    let near = |a: usize| a.saturating_sub(1)..=(a + 1).min(n - 1);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let index = |i: usize, j: usize| -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * n - a * (a + 1) / 2 + b
    };
    let norm = |i: usize, j: usize| if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
    let dim = pairs.len();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for (col, &(i, j)) in pairs.iter().enumerate() {
        // H applied to |ij> + |ji>, expanded on product states
        let mut terms: Vec<((usize, usize), f64)> = Vec::new();
        let src = if i == j { vec![(i, j)] } else { vec![(i, j), (j, i)] };
        for (a, b) in src {
            let w = norm(i, j);
            for q in near(a) {
                terms.push(((q, b), w * h(q, a)));
            }
            for q in near(b) {
                terms.push(((a, q), w * h(q, b)));
            }
            if a == b {
                terms.push(((a, b), w * coupling / g.dx));
            }
        }
        for ((p, q), val) in terms {
            // <S_pq| on the product state |pq>
            m[(index(p, q), col)] += val * norm(p, q);
        }
    }
    let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);

    let levels = eigenstates(&v, &g, c, 2).unwrap();
    let antisym = levels[0].0 + levels[1].0;
    let exact = e[1] - antisym;
    let mean_field = interaction_energy_natural(&levels[0].1, &levels[1].1, coupling).unwrap();
    ((mean_field - exact) / exact).abs()
}
