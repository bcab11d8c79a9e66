//! Band structure of the periodic part of the Hamiltonian in the shifted
//! plane-wave (Bloch) basis.
//!
//! A basis state `|q⟩|n_b⟩` carries physical momentum
//! `p = q + (2·n_b − 1)·2` (units of ħk0). The kinetic energy is diagonal,
//! `p²` in recoil units, and the lattice `(V/2)·cos(4k0x)` couples adjacent
//! band indices with strength `V/4`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

/// Default plane-wave truncation: band indices `-12..=13`.
pub const DEFAULT_N_MAX: usize = 12;

/// Lower edge of the first Brillouin zone `[-2, 2)` in ħk0.
pub const BZ_MIN: f64 = -2.0;
/// Width of the first Brillouin zone (reciprocal lattice vector `4ħk0`).
pub const BZ_WIDTH: f64 = 4.0;

/// Physical momentum of the plane wave `|q⟩|n_b⟩`.
pub fn plane_wave_momentum(q: f64, n_b: i64) -> f64 {
    q + (2 * n_b - 1) as f64 * 2.0
}

/// Kinetic energy of `|q⟩|n_b⟩` in `E_r`.
pub fn kinetic(q: f64, n_b: i64) -> f64 {
    let p = plane_wave_momentum(q, n_b);
    p * p
}

/// Band indices spanned by [`hp_matrix`] for a given truncation.
pub fn band_indices(n_max: usize) -> std::ops::RangeInclusive<i64> {
    -(n_max as i64)..=(n_max as i64 + 1)
}

/// Tridiagonal matrix of the periodic Hamiltonian at quasi-momentum `q`,
/// rows ordered by ascending band index `-n_max..=n_max+1`.
pub fn hp_matrix(q: f64, v: f64, n_max: usize) -> Result<DMatrix<f64>> {
    if n_max < 1 {
        return Err(Error::Domain(format!("n_max must be >= 1, got {n_max}")));
    }
    let bands: Vec<i64> = band_indices(n_max).collect();
    let dim = bands.len();
    let mut h = DMatrix::zeros(dim, dim);
    for (i, &n_b) in bands.iter().enumerate() {
        h[(i, i)] = kinetic(q, n_b);
        if i + 1 < dim {
            h[(i, i + 1)] = 0.25 * v;
            h[(i + 1, i)] = 0.25 * v;
        }
    }
    Ok(h)
}

fn sorted_eigen(h: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = h.nrows();
    let norm = h.norm();
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Eigen(format!(
            "symmetric eigensolver did not converge (dim {dim}, Frobenius norm {norm:.3e})"
        ))
    })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Lowest `n_bands` eigenvalues of [`hp_matrix`], ascending.
pub fn band_energies(q: f64, v: f64, n_bands: usize, n_max: usize) -> Result<Vec<f64>> {
    if n_bands > 2 * n_max {
        return Err(Error::Domain(format!(
            "n_bands = {n_bands} exceeds 2·n_max = {}",
            2 * n_max
        )));
    }
    let (values, _) = sorted_eigen(hp_matrix(q, v, n_max)?)?;
    Ok(values[..n_bands].to_vec())
}

/// Eigenvalues of the two-band truncation (`n_b ∈ {0, 1}` only), ascending.
pub fn two_band_energies(q: f64, v: f64) -> [f64; 2] {
    let a = kinetic(q, 0);
    let b = kinetic(q, 1);
    let mean = 0.5 * (a + b);
    let half = (0.25 * (a - b) * (a - b) + 0.0625 * v * v).sqrt();
    [mean - half, mean + half]
}

/// Band table over a uniform grid on `[-2, 2)`.
#[derive(Debug, Clone, Serialize)]
pub struct BandTable {
    pub v: f64,
    pub n_max: usize,
    pub q_grid: Vec<f64>,
    /// `energies[band][iq]`
    pub energies: Vec<Vec<f64>>,
    /// Free-particle reference (`v = 0`), same layout.
    pub free: Vec<Vec<f64>>,
    /// `eigenvectors[band][iq]` are plane-wave coefficients over
    /// [`band_indices`].
    pub eigenvectors: Vec<Vec<Vec<f64>>>,
}

impl BandTable {
    pub fn n_bands(&self) -> usize {
        self.energies.len()
    }

    /// Gap between band 1 and band 0 at every q.
    pub fn gaps(&self) -> Vec<f64> {
        self.energies[1]
            .iter()
            .zip(&self.energies[0])
            .map(|(hi, lo)| hi - lo)
            .collect()
    }
}

pub fn dispersion_scan(v: f64, n_bands: usize, q_resolution: usize) -> Result<BandTable> {
    dispersion_scan_with(v, n_bands, q_resolution, DEFAULT_N_MAX)
}

pub fn dispersion_scan_with(
    v: f64,
    n_bands: usize,
    q_resolution: usize,
    n_max: usize,
) -> Result<BandTable> {
    if q_resolution < 2 {
        return Err(Error::Domain(format!(
            "q_resolution must be >= 2, got {q_resolution}"
        )));
    }
    if n_bands == 0 || n_bands > 2 * n_max {
        return Err(Error::Domain(format!(
            "n_bands must be in 1..={}, got {n_bands}",
            2 * n_max
        )));
    }
    let dq = BZ_WIDTH / q_resolution as f64;
    let q_grid: Vec<f64> = (0..q_resolution).map(|i| BZ_MIN + i as f64 * dq).collect();

    let mut energies = vec![Vec::with_capacity(q_resolution); n_bands];
    let mut free = vec![Vec::with_capacity(q_resolution); n_bands];
    let mut eigenvectors = vec![Vec::with_capacity(q_resolution); n_bands];
    for &q in &q_grid {
        let (values, vectors) = sorted_eigen(hp_matrix(q, v, n_max)?)?;
        let free_values = band_energies(q, 0.0, n_bands, n_max)?;
        for b in 0..n_bands {
            energies[b].push(values[b]);
            free[b].push(free_values[b]);
            eigenvectors[b].push(vectors.column(b).iter().copied().collect());
        }
    }
    Ok(BandTable {
        v,
        n_max,
        q_grid,
        energies,
        free,
        eigenvectors,
    })
}
