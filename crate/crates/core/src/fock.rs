//! Ideal quantum Rabi model in a truncated Fock space.
//!
//! `H = w0·a†a + (wq/2)·σz + i·g·σx·(a† − a)` with `σx = diag(+1, −1)` over
//! the band index `(n_b = 0, n_b = 1)` and `σz` the band flip.
//!
//! Propagation is spectral. The gauge `|n⟩ → iⁿ|n⟩` turns `i(a† − a)` into
//! `a + a†`, after which the Hamiltonian is real and commutes with the
//! parity `σz·(−1)^{a†a}`. Each parity sector is a symmetric tridiagonal
//! chain of length `N + 1`, diagonalised once.
//!
//! Quadratures use `x̂ = −(a + a†)/√w0` (units `1/k0`) and
//! `q̂ = −i(√w0/2)(a† − a)` (units `ħk0`); with these the two-band kinetic
//! term `4q(2n_b − 1)` equals the coupling above and `[x̂, q̂] = i`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::full::QubitAmplitudes;
use crate::series::{ObservableSeries, Observables, Sample};
use crate::units::RabiParams;

/// Cutoff used by the builtin scenarios.
pub const DEFAULT_CUTOFF: usize = 600;
/// Largest population tolerated in the top 5% of Fock levels.
pub const CUTOFF_HEALTH_LIMIT: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    /// `amplitudes[n_b][n]`, `n = 0..=cutoff`.
    pub amplitudes: [Vec<Complex64>; 2],
}

impl FockState {
    pub fn cutoff(&self) -> usize {
        self.amplitudes[0].len() - 1
    }

    /// Oscillator vacuum with the given qubit state.
    pub fn vacuum(qubit: QubitAmplitudes, cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::Domain("Fock cutoff must be >= 1".into()));
        }
        let mut amplitudes = [vec![ZERO; cutoff + 1], vec![ZERO; cutoff + 1]];
        amplitudes[0][0] = qubit.c0;
        amplitudes[1][0] = qubit.c1;
        Ok(Self { amplitudes })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().flatten().map(|a| a.norm_sqr()).sum()
    }

    /// `|⟨self|other⟩|²`
    pub fn fidelity(&self, other: &FockState) -> Result<f64> {
        if self.cutoff() != other.cutoff() {
            return Err(Error::Usage("fidelity between different Fock cutoffs".into()));
        }
        let overlap: Complex64 = self
            .amplitudes
            .iter()
            .flatten()
            .zip(other.amplitudes.iter().flatten())
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(overlap.norm_sqr())
    }

    /// Population of the top 5% of Fock levels.
    pub fn top_population(&self) -> f64 {
        let n = self.cutoff();
        let start = n + 1 - ((n + 1) / 20).max(1);
        self.amplitudes
            .iter()
            .map(|b| b[start..].iter().map(|a| a.norm_sqr()).sum::<f64>())
            .sum()
    }

    pub fn cutoff_healthy(&self) -> bool {
        self.top_population() < CUTOFF_HEALTH_LIMIT
    }

    /// `⟨a⟩` summed over both qubit levels, and per level.
    fn annihilation(&self) -> [Complex64; 2] {
        let mut out = [ZERO; 2];
        for (b, amps) in self.amplitudes.iter().enumerate() {
            out[b] = amps
                .windows(2)
                .enumerate()
                .map(|(n, w)| w[0].conj() * w[1] * ((n + 1) as f64).sqrt())
                .sum();
        }
        out
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .flat_map(|b| b.iter().enumerate())
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum()
    }

    pub fn sigma_x(&self) -> f64 {
        let p0: f64 = self.amplitudes[0].iter().map(|a| a.norm_sqr()).sum();
        let p1: f64 = self.amplitudes[1].iter().map(|a| a.norm_sqr()).sum();
        p0 - p1
    }

    pub fn sigma_z(&self) -> f64 {
        let c: Complex64 = self.amplitudes[0]
            .iter()
            .zip(&self.amplitudes[1])
            .map(|(a, b)| a.conj() * b)
            .sum();
        2.0 * c.re
    }

    /// `⟨σz·(−1)^{a†a}⟩`
    pub fn parity(&self) -> f64 {
        let c: f64 = self.amplitudes[0]
            .iter()
            .zip(&self.amplitudes[1])
            .enumerate()
            .map(|(n, (a, b))| {
                let s = if n % 2 == 0 { 1.0 } else { -1.0 };
                s * (a.conj() * b).re
            })
            .sum();
        2.0 * c
    }
}

/// `(⟨x⟩ [1/k0], ⟨q⟩ [ħk0])`
pub fn quadratures(state: &FockState, w0: f64) -> (f64, f64) {
    let [a0, a1] = state.annihilation();
    let a = a0 + a1;
    let sw = w0.sqrt();
    (-2.0 * a.re / sw, -sw * a.im)
}

/// Vacuum variances `(k0²⟨x²⟩, ⟨q²⟩/(ħk0)²)` of the quadrature map.
pub fn vacuum_variances(w0: f64) -> (f64, f64) {
    // ⟨(a + a†)²⟩ = ⟨-(a† − a)²⟩ = 1 in the vacuum
    (1.0 / w0, 0.25 * w0)
}

pub fn observables(state: &FockState, rp: &RabiParams) -> Observables {
    let [a0, a1] = state.annihilation();
    let (x, q) = quadratures(state, rp.w0);
    let sigma_x = state.sigma_x();
    let sigma_z = state.sigma_z();
    // ⟨i(a† − a)⟩ = 2·Im⟨a⟩ per qubit level, weighted by σx = ±1
    let coupling = 2.0 * (a0.im - a1.im);
    Observables {
        x,
        p: q - 2.0 * sigma_x,
        q,
        sigma_x,
        sigma_z,
        leakage: 0.0,
        norm: state.norm(),
        energy: rp.w0 * state.mean_photon_number() + 0.5 * rp.wq * sigma_z + rp.g * coupling,
    }
}

/// Dense Hamiltonian in the basis `index = n_b·(N + 1) + n`.
pub fn build_hamiltonian(rp: &RabiParams, cutoff: usize) -> Result<DMatrix<Complex64>> {
    if cutoff < 1 {
        return Err(Error::Domain("Fock cutoff must be >= 1".into()));
    }
    let len = cutoff + 1;
    let mut h = DMatrix::from_element(2 * len, 2 * len, ZERO);
    for b in 0..2 {
        let s = if b == 0 { 1.0 } else { -1.0 };
        let off = b * len;
        for n in 0..len {
            h[(off + n, off + n)] = Complex64::new(rp.w0 * n as f64, 0.0);
            h[(n, len + n)] = Complex64::new(0.5 * rp.wq, 0.0);
            h[(len + n, n)] = Complex64::new(0.5 * rp.wq, 0.0);
            if n + 1 < len {
                let c = rp.g * s * ((n + 1) as f64).sqrt();
                // i·g·s·(a† − a): ⟨n+1|a†|n⟩ = √(n+1), ⟨n|a|n+1⟩ = √(n+1)
                h[(off + n + 1, off + n)] = Complex64::new(0.0, c);
                h[(off + n, off + n + 1)] = Complex64::new(0.0, -c);
            }
        }
    }
    Ok(h)
}

/// One parity sector: eigenpairs of a real symmetric tridiagonal chain.
struct Sector {
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
    /// Qubit eigenvalue of `σz` (+1 for `|+⟩`) at even `n`.
    even_sign: f64,
}

impl Sector {
    fn new(rp: &RabiParams, cutoff: usize, even_sign: f64) -> Result<Self> {
        let len = cutoff + 1;
        let mut h = DMatrix::zeros(len, len);
        for n in 0..len {
            let e = if n % 2 == 0 { even_sign } else { -even_sign };
            h[(n, n)] = rp.w0 * n as f64 + 0.5 * rp.wq * e;
            if n + 1 < len {
                let c = rp.g * ((n + 1) as f64).sqrt();
                h[(n, n + 1)] = c;
                h[(n + 1, n)] = c;
            }
        }
        let norm = h.norm();
        let eig = SymmetricEigen::try_new(h, f64::EPSILON, 100_000).ok_or_else(|| {
            Error::Eigen(format!(
                "Rabi parity sector did not converge (dim {len}, norm {norm:.3e})"
            ))
        })?;
        Ok(Self {
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
            even_sign,
        })
    }
}

/// Spectral propagator: `e^{-iHt}` applied exactly for any `t`.
pub struct RabiPropagator {
    rp: RabiParams,
    cutoff: usize,
    sectors: [Sector; 2],
}

impl RabiPropagator {
    pub fn new(rp: &RabiParams, cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::Domain("Fock cutoff must be >= 1".into()));
        }
        Ok(Self {
            rp: *rp,
            cutoff,
            sectors: [Sector::new(rp, cutoff, 1.0)?, Sector::new(rp, cutoff, -1.0)?],
        })
    }

    pub fn params(&self) -> &RabiParams {
        &self.rp
    }

    /// All eigenvalues, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .sectors
            .iter()
            .flat_map(|s| s.energies.iter().copied())
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// Sector chain amplitudes of a state.
    fn to_chains(&self, state: &FockState) -> [Vec<Complex64>; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let len = self.cutoff + 1;
        let mut chains = [vec![ZERO; len], vec![ZERO; len]];
        for n in 0..len {
            let gauge = gauge_phase(n).conj();
            let c0 = state.amplitudes[0][n] * gauge;
            let c1 = state.amplitudes[1][n] * gauge;
            let plus = (c0 + c1) * h;
            let minus = (c0 - c1) * h;
            for (chain, sector) in chains.iter_mut().zip(&self.sectors) {
                let e = if n % 2 == 0 { sector.even_sign } else { -sector.even_sign };
                chain[n] = if e > 0.0 { plus } else { minus };
            }
        }
        chains
    }

    fn from_chains(&self, chains: &[Vec<Complex64>; 2]) -> FockState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let len = self.cutoff + 1;
        let mut out = FockState { amplitudes: [vec![ZERO; len], vec![ZERO; len]] };
        for n in 0..len {
            let (mut plus, mut minus) = (ZERO, ZERO);
            for (chain, sector) in chains.iter().zip(&self.sectors) {
                let e = if n % 2 == 0 { sector.even_sign } else { -sector.even_sign };
                if e > 0.0 {
                    plus = chain[n];
                } else {
                    minus = chain[n];
                }
            }
            let gauge = gauge_phase(n);
            out.amplitudes[0][n] = (plus + minus) * h * gauge;
            out.amplitudes[1][n] = (plus - minus) * h * gauge;
        }
        out
    }

    /// Eigenbasis coefficients of `state`, one vector per sector.
    fn decompose(&self, state: &FockState) -> Result<[Vec<Complex64>; 2]> {
        if state.cutoff() != self.cutoff {
            return Err(Error::Usage(format!(
                "state cutoff {} differs from propagator cutoff {}",
                state.cutoff(),
                self.cutoff
            )));
        }
        let chains = self.to_chains(state);
        let mut out = [Vec::new(), Vec::new()];
        for ((o, chain), sector) in out.iter_mut().zip(&chains).zip(&self.sectors) {
            *o = sector
                .vectors
                .column_iter()
                .map(|v| v.iter().zip(chain).map(|(&vi, &c)| c * vi).sum())
                .collect();
        }
        Ok(out)
    }

    fn compose(&self, coeffs: &[Vec<Complex64>; 2], t: f64) -> FockState {
        let len = self.cutoff + 1;
        let mut chains = [vec![ZERO; len], vec![ZERO; len]];
        for ((chain, c), sector) in chains.iter_mut().zip(coeffs).zip(&self.sectors) {
            for (k, v) in sector.vectors.column_iter().enumerate() {
                let amp = c[k] * Complex64::from_polar(1.0, -sector.energies[k] * t);
                for (x, &vi) in chain.iter_mut().zip(v.iter()) {
                    *x += amp * vi;
                }
            }
        }
        self.from_chains(&chains)
    }

    pub fn propagate(&self, state: &FockState, t: f64) -> Result<FockState> {
        let coeffs = self.decompose(state)?;
        Ok(self.compose(&coeffs, t))
    }

    /// States at each of `times`.
    pub fn trajectory(&self, initial: &FockState, times: &[f64]) -> Result<Vec<FockState>> {
        let coeffs = self.decompose(initial)?;
        Ok(times.iter().map(|&t| self.compose(&coeffs, t)).collect())
    }

    pub fn evolve(&self, initial: &FockState, times: &[f64]) -> Result<ObservableSeries> {
        let coeffs = self.decompose(initial)?;
        let mut series = ObservableSeries::default();
        for &t in times {
            let state = self.compose(&coeffs, t);
            if !state.cutoff_healthy() {
                series.cutoff_warning = true;
            }
            let obs = observables(&state, &self.rp);
            series
                .samples
                .push(Sample::new(t, obs, initial.fidelity(&state)?));
        }
        Ok(series)
    }
}

/// `iⁿ`
fn gauge_phase(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

pub fn evolve_fock(initial: &FockState, rp: &RabiParams, times: &[f64]) -> Result<ObservableSeries> {
    RabiPropagator::new(rp, initial.cutoff())?.evolve(initial, times)
}

/// Closed-form deep-strong-coupling solution at `ω_q = 0`.
///
/// Starting from `|0⟩|n_b⟩` the oscillator is displaced to
/// `(−1)^{n_b}·β(t)` with `β(t) = i·(g/ω0)·(e^{−iω0t} − 1)`. The global
/// phase is not tracked; nothing exposed depends on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DscOracle {
    pub g_over_w0: f64,
    pub w0: f64,
}

impl DscOracle {
    pub fn new(rp: &RabiParams) -> Self {
        Self { g_over_w0: rp.g_over_w0(), w0: rp.w0 }
    }

    pub fn beta(&self, t: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, -self.w0 * t);
        Complex64::new(0.0, self.g_over_w0) * (e - 1.0)
    }

    pub fn beta_max(&self) -> f64 {
        2.0 * self.g_over_w0
    }

    /// Initial-state population `e^{−|β(t)|²}`.
    pub fn fidelity(&self, t: f64) -> f64 {
        (-self.beta(t).norm_sqr()).exp()
    }

    /// Mean photon number `|β(t)|²`.
    pub fn photon_number(&self, t: f64) -> f64 {
        self.beta(t).norm_sqr()
    }
}

/// `e^{−|β(t)|²}` for `t` in units where `ω0 = 1`.
pub fn dsc_fidelity(t_w0: f64, g_over_w0: f64) -> f64 {
    DscOracle { g_over_w0, w0: 1.0 }.fidelity(t_w0)
}

/// Coherent amplitudes `e^{−|α|²/2}·αⁿ/√n!`, `n = 0..=cutoff`.
pub fn coherent_amplitudes(alpha: Complex64, cutoff: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    out.push(c);
    for n in 1..=cutoff {
        c = c * alpha / (n as f64).sqrt();
        out.push(c);
    }
    out
}

/// Population of levels `n ≥ start` in a coherent state of mean `mean`.
fn poisson_tail(mean: f64, start: usize) -> f64 {
    if mean == 0.0 {
        return if start == 0 { 1.0 } else { 0.0 };
    }
    // log-space recursion, summed from the mode outwards
    let mut log_p = -mean;
    let mut tail = 0.0;
    for n in 0..start + 4000 {
        if n > 0 {
            log_p += mean.ln() - (n as f64).ln();
        }
        if n >= start {
            let p = log_p.exp();
            tail += p;
            if n as f64 > mean && p < 1e-300 {
                break;
            }
        }
    }
    tail
}

fn check_cutoff(beta_max: f64, cutoff: usize) -> Result<()> {
    let start = cutoff + 1 - ((cutoff + 1) / 20).max(1);
    let tail = poisson_tail(beta_max * beta_max, start);
    if tail >= CUTOFF_HEALTH_LIMIT {
        return Err(Error::Domain(format!(
            "cutoff {cutoff} too small for |β|max = {beta_max:.3}: top-5% population {tail:.3e}"
        )));
    }
    Ok(())
}

/// `D[(−1)^{n_b}β(t)]|0⟩|n_b⟩`
pub fn dsc_state(oracle: &DscOracle, t: f64, n_b: usize, cutoff: usize) -> Result<FockState> {
    if n_b > 1 {
        return Err(Error::Domain(format!("band index must be 0 or 1, got {n_b}")));
    }
    check_cutoff(oracle.beta_max(), cutoff)?;
    let sign = if n_b == 0 { 1.0 } else { -1.0 };
    let mut amplitudes = [vec![ZERO; cutoff + 1], vec![ZERO; cutoff + 1]];
    amplitudes[n_b] = coherent_amplitudes(oracle.beta(t) * sign, cutoff);
    Ok(FockState { amplitudes })
}

/// `(|β(t)⟩|n_b=0⟩ + |−β(t)⟩|n_b=1⟩)/√2`, the evolution of the `σz = +1`
/// qubit state with the oscillator in vacuum.
pub fn cat_state(oracle: &DscOracle, t: f64, cutoff: usize) -> Result<FockState> {
    check_cutoff(oracle.beta_max(), cutoff)?;
    let beta = oracle.beta(t);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amplitudes = [
        coherent_amplitudes(beta, cutoff).into_iter().map(|a| a * h).collect(),
        coherent_amplitudes(-beta, cutoff).into_iter().map(|a| a * h).collect(),
    ];
    Ok(FockState { amplitudes })
}
