//! Adaptive Nelder-Mead maximizer.
//!
//! Coefficients scale with dimension (Gao and Han): reflection 1, expansion
//! `1 + 2/n`, contraction `3/4 - 1/(2n)`, shrink `1 - 1/n`. A flat simplex
//! at or below zero (every vertex a failed evaluation) is reported as an
//! error.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexSettings {
    pub max_evals: usize,
    /// stop once every vertex lies within this distance of the best one
    pub tolerance: f64,
    /// extra runs restarted around the incumbent
    pub restarts: usize,
    /// initial simplex size of each restart relative to the previous one
    pub restart_shrink: f64,
}

impl Default for SimplexSettings {
    fn default() -> Self {
        SimplexSettings {
            max_evals: 20_000,
            tolerance: 1e-6,
            restarts: 3,
            restart_shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// best value after each run (first run, then each restart)
    pub history: Vec<f64>,
}

struct Budget<'a, F: FnMut(&[f64]) -> f64> {
    f: &'a mut F,
    used: usize,
    max: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budget<'_, F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.used += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn left(&self) -> bool {
        self.used < self.max
    }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn sort(simplex: &mut [(Vec<f64>, f64)]) {
    // stable: ties keep insertion order, so runs are reproducible
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
}

fn run<F: FnMut(&[f64]) -> f64>(
    budget: &mut Budget<F>,
    start: &[f64],
    start_value: Option<f64>,
    steps: &[f64],
    tolerance: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = start.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut simplex = Vec::with_capacity(n + 1);
    let f0 = match start_value {
        Some(v) => v,
        None => budget.call(start),
    };
    simplex.push((start.to_vec(), f0));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += steps[i];
        let v = budget.call(&x);
        simplex.push((x, v));
    }
    if simplex.iter().all(|(_, v)| *v <= 0.0 && *v == f0) {
        return Err(Error::Optimizer(
            "every vertex of the initial simplex has zero fidelity; try a different seed pulse".into(),
        ));
    }
    sort(&mut simplex);
    let point = |c: &[f64], w: &[f64], s: f64| -> Vec<f64> { c.iter().zip(w).map(|(c, w)| c + s * (c - w)).collect() };
    while budget.left() && diameter(&simplex) >= tolerance {
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / nf;
            }
        }
        let worst = simplex[n].clone();
        let xr = point(&centroid, &worst.0, alpha);
        let fr = budget.call(&xr);
        if fr > simplex[0].1 {
            let xe = point(&centroid, &worst.0, beta);
            let fe = budget.call(&xe);
            simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc, accept) = if fr > worst.1 {
                let xc = point(&centroid, &worst.0, gamma * alpha);
                let fc = budget.call(&xc);
                (xc, fc, fc >= fr)
            } else {
                let xc = point(&centroid, &worst.0, -gamma);
                let fc = budget.call(&xc);
                (xc, fc, fc > worst.1)
            };
            if accept {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    if !budget.left() {
                        break;
                    }
                    let x: Vec<f64> = best.iter().zip(&v.0).map(|(b, x)| b + delta * (x - b)).collect();
                    let f = budget.call(&x);
                    *v = (x, f);
                }
            }
        }
        sort(&mut simplex);
    }
    let (x, v) = simplex.swap_remove(0);
    Ok((x, v))
}

/// Maximizes `f` from `start` with per-coordinate initial steps.
///
/// Deterministic: the same inputs and settings give bit-identical output.
pub fn maximize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    steps: &[f64],
    settings: &SimplexSettings,
) -> Result<SimplexResult> {
    if start.is_empty() || start.len() != steps.len() {
        return Err(Error::InvalidParameter(
            "start point and steps must be non-empty and match".into(),
        ));
    }
    let mut budget = Budget {
        f: &mut f,
        used: 0,
        max: settings.max_evals.max(start.len() + 2),
    };
    let (mut best, mut value) = run(&mut budget, start, None, steps, settings.tolerance)?;
    let mut history = vec![value];
    let mut scale = 1.0;
    for _ in 0..settings.restarts {
        if !budget.left() {
            break;
        }
        scale *= settings.restart_shrink;
        let s: Vec<f64> = steps.iter().map(|s| s * scale).collect();
        if let Ok((x, v)) = run(&mut budget, &best, Some(value), &s, settings.tolerance) {
            if v > value {
                best = x;
                value = v;
            }
        }
        history.push(value);
    }
    Ok(SimplexResult {
        best,
        value,
        evals: budget.used,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen(x: &[f64]) -> f64 {
        -x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum::<f64>()
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let s = SimplexSettings {
            max_evals: 20_000,
            tolerance: 1e-10,
            ..Default::default()
        };
        // in three dimensions the only minimum is (1, 1, 1); four already has a local one
        let r = maximize(rosen, &[-1.2, 1.0, 0.5], &[0.5; 3], &s).unwrap();
        for x in &r.best {
            assert!((x - 1.0).abs() < 1e-4, "{:?}", r.best);
        }
        assert!(r.evals <= 20_000);
    }

    #[test]
    fn respects_budget_and_is_deterministic() {
        let s = SimplexSettings {
            max_evals: 150,
            ..Default::default()
        };
        let a = maximize(rosen, &[0.0; 6], &[0.1; 6], &s).unwrap();
        let b = maximize(rosen, &[0.0; 6], &[0.1; 6], &s).unwrap();
        assert_eq!(a, b);
        assert!(a.evals <= 150);
        assert!(a.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn zero_simplex_is_an_error() {
        let r = maximize(|_: &[f64]| 0.0, &[1.0, 2.0], &[0.1, 0.1], &SimplexSettings::default());
        assert!(matches!(r, Err(Error::Optimizer(_))));
    }

    #[test]
    fn quadratic_peak() {
        let f = |x: &[f64]| 1.0 - (x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.1).powi(2);
        let r = maximize(f, &[0.0, 0.0], &[0.2, 0.2], &SimplexSettings::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        assert!((r.best[0] - 0.3).abs() < 1e-5 && (r.best[1] + 0.1).abs() < 1e-5);
    }
}
