//! Stationary states of the three-point finite-difference Hamiltonian.
//!
//! Eigenvalues come from Sturm-sequence bisection and eigenvectors from
//! inverse iteration, so only the requested lowest levels are computed.
//! Walls are hard (Dirichlet) just outside the sampled points.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{Grid, Wavefunction};
use crate::{Error, Result};

/// Number of eigenvalues of the symmetric tridiagonal matrix below `lam`.
fn sturm_count(diag: &[f64], off: &[f64], lam: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = diag[0] - lam;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        if q == 0.0 {
            q = tiny;
        }
        q = diag[i] - lam - off[i - 1] * off[i - 1] / q;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// Solves `(T - shift) y = b` in place with partial pivoting.
fn shifted_solve(diag: &[f64], off: &[f64], shift: f64, b: &mut [f64], pivot_floor: f64) {
    let n = diag.len();
    let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
    let mut du: Vec<f64> = off.to_vec();
    let mut dl: Vec<f64> = off.to_vec();
    let guard = |x: f64| {
        if x.abs() < pivot_floor {
            pivot_floor.copysign(x)
        } else {
            x
        }
    };
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            d[i] = guard(d[i]);
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    d[n - 1] = guard(d[n - 1]);
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Lowest `count` eigenpairs of the symmetric tridiagonal matrix with
/// diagonal `diag` and off-diagonal `off`. Eigenvectors are unit vectors with
/// their largest component positive.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64], count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::Eigensolver("inconsistent tridiagonal dimensions".into()));
    }
    if count > n {
        return Err(Error::Eigensolver(format!(
            "requested {count} levels from a {n}x{n} matrix"
        )));
    }
    if diag.iter().chain(off).any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("matrix has non-finite entries".into()));
    }
    let (g_lo, g_hi) = gershgorin(diag, off);
    let scale = g_lo.abs().max(g_hi.abs()).max(f64::MIN_POSITIVE);
    let mut values = Vec::with_capacity(count);
    for k in 0..count {
        let (mut lo, mut hi) = (g_lo, g_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 4.0 * f64::EPSILON * scale || mid <= lo || mid >= hi {
                break;
            }
            if sturm_count(diag, off, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        values.push(0.5 * (lo + hi));
    }
    for w in values.windows(2) {
        if w[1] - w[0] <= 1e-12 * scale {
            return Err(Error::Eigensolver(format!(
                "levels {:.15e} and {:.15e} are degenerate to solver tolerance",
                w[0], w[1]
            )));
        }
    }
    let pivot_floor = f64::EPSILON * scale;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (k, &lam) in values.iter().enumerate() {
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_75 * (k as f64 + 1.0)).sin())
            .collect();
        normalize(&mut v);
        // near neighbours in the spectrum need explicit orthogonalization
        let cluster: Vec<usize> = (0..k).filter(|&j| (values[j] - lam).abs() < 1e-6 * scale).collect();
        for _ in 0..4 {
            shifted_solve(diag, off, lam, &mut v, pivot_floor);
            for &j in &cluster {
                let dot: f64 = v.iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(&vectors[j]).for_each(|(a, b)| *a -= dot * b);
            }
            normalize(&mut v);
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Eigensolver(format!("inverse iteration diverged at level {k}")));
        }
        let imax = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[imax] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.push(v);
    }
    Ok((values, vectors))
}

fn fd_matrix(v: &[f64], dx: f64, kinetic: f64) -> (Vec<f64>, Vec<f64>) {
    let d0 = 2.0 * kinetic / (dx * dx);
    let diag = v.iter().map(|v| d0 + v).collect();
    let off = vec![-kinetic / (dx * dx); v.len().saturating_sub(1)];
    (diag, off)
}

fn to_wavefunction(grid: Grid, vec: &[f64], offset: usize) -> Wavefunction {
    let mut full = vec![0.0; grid.n_points];
    full[offset..offset + vec.len()].copy_from_slice(vec);
    let mut psi = Wavefunction::from_real(grid, &full).expect("length matches grid");
    psi.normalize();
    psi
}

/// Lowest `count` levels of `-kinetic d^2/dx^2 + v` on the whole grid.
pub fn eigenstates(v: &[f64], grid: &Grid, kinetic: f64, count: usize) -> Result<Vec<(f64, Wavefunction)>> {
    if v.len() != grid.n_points {
        return Err(Error::GridMismatch);
    }
    let (diag, off) = fd_matrix(v, grid.dx, kinetic);
    let (values, vectors) = tridiagonal_eigen(&diag, &off, count)?;
    Ok(values
        .into_iter()
        .zip(vectors)
        .map(|(e, vec)| (e, to_wavefunction(*grid, &vec, 0)))
        .collect())
}

/// Levels on the given grid plus a Richardson estimate from twice the
/// resolution.
#[derive(Debug, Clone)]
pub struct CheckedSpectrum {
    pub levels: Vec<(f64, Wavefunction)>,
    pub fine_energies: Vec<f64>,
    /// `(4 E_2N - E_N) / 3`
    pub extrapolated: Vec<f64>,
    /// max |E_N - extrapolated| / max(1, |extrapolated|)
    pub max_rel_error: f64,
}

pub fn eigenstates_checked(v: &dyn Fn(f64) -> f64, grid: &Grid, kinetic: f64, count: usize) -> Result<CheckedSpectrum> {
    let coarse: Vec<f64> = grid.points().into_iter().map(v).collect();
    let levels = eigenstates(&coarse, grid, kinetic, count)?;
    let fine_grid = Grid::new(grid.x_min, grid.x_max, 2 * grid.n_points)?;
    let fine: Vec<f64> = fine_grid.points().into_iter().map(v).collect();
    let (diag, off) = fd_matrix(&fine, fine_grid.dx, kinetic);
    let (fine_energies, _) = tridiagonal_eigen(&diag, &off, count)?;
    let extrapolated: Vec<f64> = levels
        .iter()
        .zip(&fine_energies)
        .map(|((e, _), f)| (4.0 * f - e) / 3.0)
        .collect();
    let max_rel_error = levels
        .iter()
        .zip(&extrapolated)
        .map(|((e, _), x)| (e - x).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max);
    Ok(CheckedSpectrum {
        levels,
        fine_energies,
        extrapolated,
        max_rel_error,
    })
}

/// States localized in one well of a multi-well potential.
#[derive(Debug, Clone)]
pub struct WellStates {
    pub energies: Vec<f64>,
    pub states: Vec<Wavefunction>,
    /// Grid index of the well minimum.
    pub minimum: usize,
    /// Grid indices of the bounding maxima.
    pub barriers: (usize, usize),
    /// Grid index range `[lo, hi]` of the Dirichlet window.
    pub window: (usize, usize),
}

/// Lowest `count` states of the well nearest `x_guess`.
///
/// Walks downhill from `x_guess` to the well minimum and outwards to the two
/// bounding maxima. The Dirichlet window extends a quarter of the well width
/// past each maximum; only window states with most of their weight between
/// the maxima are kept.
pub fn well_states(grid: &Grid, v: &[f64], kinetic: f64, x_guess: f64, count: usize) -> Result<WellStates> {
    let n = grid.n_points;
    if v.len() != n {
        return Err(Error::GridMismatch);
    }
    let mut i = grid.index_of(x_guess);
    loop {
        if i + 1 < n && v[i + 1] < v[i] {
            i += 1;
        } else if i > 0 && v[i - 1] < v[i] {
            i -= 1;
        } else {
            break;
        }
    }
    let minimum = i;
    let mut l = minimum;
    while l > 0 && v[l - 1] >= v[l] {
        l -= 1;
    }
    let mut r = minimum;
    while r + 1 < n && v[r + 1] >= v[r] {
        r += 1;
    }
    let ext = (r - l) / 4;
    let lo = l.saturating_sub(ext);
    let hi = (r + ext).min(n - 1);
    let (diag, off) = fd_matrix(&v[lo..=hi], grid.dx, kinetic);
    let len = hi - lo + 1;
    let wanted = (count + 4).min(len);
    let (values, vectors) = tridiagonal_eigen(&diag, &off, wanted)?;
    let mut energies = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    for (e, vec) in values.into_iter().zip(vectors) {
        let inside: f64 = vec[(l - lo)..=(r - lo)].iter().map(|x| x * x).sum();
        if inside > 0.5 {
            energies.push(e);
            states.push(to_wavefunction(*grid, &vec, lo));
            if states.len() == count {
                break;
            }
        }
    }
    if states.len() < count {
        return Err(Error::Eigensolver(format!(
            "well at x = {:.6} holds only {} localized level(s), {} requested",
            grid.x(minimum),
            states.len(),
            count
        )));
    }
    Ok(WellStates {
        energies,
        states,
        minimum,
        barriers: (l, r),
        window: (lo, hi),
    })
}

/// Periodic spectral kinetic kernel: `T[i][j] = kernel[|i - j|]` for the
/// FFT kinetic operator on `grid`.
fn spectral_kernel(grid: &Grid, kinetic: f64, len: usize) -> Vec<f64> {
    let n = grid.n_points;
    let mut buf: Vec<Complex64> = grid
        .wavenumbers()
        .into_iter()
        .map(|k| Complex64::new(kinetic * k * k / n as f64, 0.0))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().take(len).map(|z| z.re).collect()
}

/// [`well_states`] re-solved with the spectral kinetic operator.
///
/// The finite-difference levels fix the window and serve as shifts for a
/// few steps of inverse iteration with the dense window Hamiltonian built
/// from the same kinetic operator the split-step propagator applies. The
/// resulting states are stationary under propagation to `O(dt^2)` instead of
/// `O(dx^2)`, which matters on coarse grids.
pub fn spectral_well_states(grid: &Grid, v: &[f64], kinetic: f64, x_guess: f64, count: usize) -> Result<WellStates> {
    let fd = well_states(grid, v, kinetic, x_guess, count)?;
    let (lo, hi) = fd.window;
    let len = hi - lo + 1;
    let kernel = spectral_kernel(grid, kinetic, len);
    let h = DMatrix::from_fn(len, len, |i, j| {
        kernel[i.abs_diff(j)] + if i == j { v[lo + i] } else { 0.0 }
    });
    let mut energies = Vec::with_capacity(count);
    let mut states: Vec<Wavefunction> = Vec::with_capacity(count);
    let mut found: Vec<DVector<f64>> = Vec::with_capacity(count);
    for (e, psi) in fd.energies.iter().zip(&fd.states) {
        let mut y = DVector::from_iterator(len, psi.amplitudes[lo..=hi].iter().map(|a| a.re));
        let mut shifted = h.clone();
        for i in 0..len {
            shifted[(i, i)] -= e;
        }
        let lu = shifted.lu();
        for _ in 0..3 {
            y = lu
                .solve(&y)
                .ok_or_else(|| Error::Eigensolver("singular window Hamiltonian".into()))?;
            for f in &found {
                let p = f.dot(&y);
                y.axpy(-p, f, 1.0);
            }
            y.normalize_mut();
        }
        let imax = y.iamax();
        if y[imax] < 0.0 {
            y.neg_mut();
        }
        energies.push(y.dot(&(&h * &y)));
        states.push(to_wavefunction(*grid, y.as_slice(), lo));
        found.push(y);
    }
    Ok(WellStates { energies, states, ..fd })
}
