//! Two-band model on a periodic quasi-momentum grid.
//!
//! The state is a spinor `ψ_{n_b}(q)`, `n_b ∈ {0, 1}`, on `M` points of
//! `q ∈ [-2, 2)`. Each `q` carries the 2×2 matrix
//!
//! ```text
//! M(q) = diag(q² − 4q, q² + 4q) + (v/4)·σ_flip
//! ```
//!
//! (kinetic energy `(q + (2n_b − 1)·2)²` minus the constant `4E_r`), and
//! the trap adds `(w0²/4)·x²` with `x` conjugate to `q`.
//!
//! Quasi-momentum is periodic with the band-swapping identification of the
//! zone edges: leaving band 0 through `q = +2` enters band 1 at `q = -2`
//! (both are `p = 0`), and leaving band 1 through `q = +2` re-enters band 0
//! at `q = -2` (`p = ±4`). The spinor is therefore one periodic function
//! on `p ∈ [-4, 4)`, and the trap step is a single DFT over the `2M`
//! concatenated samples.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::bands::BZ_MIN;
use crate::error::{Error, Result};
use crate::full::{GridSpec, GridWavefunction, MomentumView};
use crate::series::{ObservableSeries, Observables, Sample, EDGE_Q};
use crate::spectral::{bin_of, phase, signed_index, Fourier};
use crate::units::SystemParams;

/// Largest band leakage accepted by [`from_grid_state`].
pub const MAX_CONVERSION_LEAKAGE: f64 = 1e-6;
/// Smallest admissible number of q points.
pub const MIN_Q_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoBandState {
    /// `spinor[n_b][j]` at `q_j = -2 + j·dq`; `Σ|ψ|² = 1` over both
    /// components (discrete normalisation).
    pub spinor: [Vec<Complex64>; 2],
}

impl TwoBandState {
    pub fn q_points(&self) -> usize {
        self.spinor[0].len()
    }

    pub fn dq(&self) -> f64 {
        4.0 / self.q_points() as f64
    }

    pub fn q(&self, j: usize) -> f64 {
        BZ_MIN + j as f64 * self.dq()
    }

    pub fn norm(&self) -> f64 {
        self.spinor.iter().flatten().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.spinor
            .iter()
            .flatten()
            .all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// Probability at `|q| > q_cut`.
    pub fn q_tail(&self, q_cut: f64) -> f64 {
        (0..self.q_points())
            .filter(|&j| self.q(j).abs() > q_cut)
            .map(|j| self.spinor[0][j].norm_sqr() + self.spinor[1][j].norm_sqr())
            .sum()
    }

    /// Spinor as one function on `p ∈ [-4, 4)`: band 0 then band 1.
    fn concatenated(&self) -> Vec<Complex64> {
        let mut f = self.spinor[0].clone();
        f.extend_from_slice(&self.spinor[1]);
        f
    }

    fn split_into(&mut self, f: &[Complex64]) {
        let m = self.q_points();
        self.spinor[0].copy_from_slice(&f[..m]);
        self.spinor[1].copy_from_slice(&f[m..]);
    }

    /// `|⟨self|other⟩|²`
    pub fn fidelity(&self, other: &TwoBandState) -> Result<f64> {
        if self.q_points() != other.q_points() {
            return Err(Error::Usage("fidelity between different q grids".into()));
        }
        let overlap: Complex64 = self
            .spinor
            .iter()
            .flatten()
            .zip(other.spinor.iter().flatten())
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(overlap.norm_sqr())
    }
}

/// Projects a grid state onto bands 0 and 1.
///
/// Requires `4ħk0` to be a multiple of the grid's momentum spacing; the q
/// grid then coincides with the folded momentum grid.
pub fn from_grid_state(psi: &GridWavefunction) -> Result<TwoBandState> {
    let g = &psi.grid;
    let m = g
        .band_points()
        .ok_or_else(|| Error::Usage("grid momenta are not commensurate with 4ħk0".into()))?;
    if 2 * m > g.n_points {
        return Err(Error::Usage("grid does not reach the band edges ±4ħk0".into()));
    }
    let mut view = MomentumView::new(g.n_points);
    let amps = view.amplitudes(psi);
    let n = g.n_points;
    let mi = m as i64;
    // band 0: p ∈ [-4, 0) ⇔ index k ∈ [-m, 0); band 1: k ∈ [0, m)
    let band0: Vec<Complex64> = (-mi..0).map(|k| amps[bin_of(k, n)]).collect();
    let band1: Vec<Complex64> = (0..mi).map(|k| amps[bin_of(k, n)]).collect();
    let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let state = TwoBandState { spinor: [band0, band1] };
    let leaked = total - state.norm();
    if leaked > MAX_CONVERSION_LEAKAGE {
        return Err(Error::Leakage { leaked });
    }
    Ok(state)
}

/// Embeds a two-band state back into a position grid (zero amplitude in
/// all other bands).
pub fn to_grid_state(state: &TwoBandState, grid: &GridSpec) -> Result<GridWavefunction> {
    let m = grid
        .band_points()
        .ok_or_else(|| Error::Usage("grid momenta are not commensurate with 4ħk0".into()))?;
    if m != state.q_points() || 2 * m > grid.n_points {
        return Err(Error::Usage(format!(
            "grid has {m} momenta per band, state has {}",
            state.q_points()
        )));
    }
    let n = grid.n_points;
    let mut amps = vec![Complex64::new(0.0, 0.0); n];
    for (j, k) in (-(m as i64)..0).enumerate() {
        amps[bin_of(k, n)] = state.spinor[0][j];
    }
    for (j, k) in (0..m as i64).enumerate() {
        amps[bin_of(k, n)] = state.spinor[1][j];
    }
    let mut view = MomentumView::new(n);
    Ok(view.to_position(grid, &amps))
}

/// Exact `e^{-i·M(q)·τ}` as a row-major 2×2 matrix.
pub fn band_propagator(q: f64, v: f64, tau: f64) -> [Complex64; 4] {
    let d = -4.0 * q; // σ_d = diag(+1, -1) coefficient
    let f = 0.25 * v; // σ_flip coefficient
    let omega = (d * d + f * f).sqrt();
    let (c, s_over) = if omega * tau.abs() < 1e-12 {
        (1.0, tau)
    } else {
        ((omega * tau).cos(), (omega * tau).sin() / omega)
    };
    let global = phase(q * q * tau);
    let i = Complex64::new(0.0, 1.0);
    [
        global * (c - i * s_over * d),
        global * (-i * s_over * f),
        global * (-i * s_over * f),
        global * (c + i * s_over * d),
    ]
}

/// Strang-split propagator for the two-band model.
pub struct PeriodicPropagator {
    params: SystemParams,
    dt: f64,
    m: usize,
    half_band: Vec<[Complex64; 4]>,
    trap: Vec<Complex64>,
    fourier: Fourier,
    buffer: Vec<Complex64>,
}

impl PeriodicPropagator {
    pub fn new(params: &SystemParams, q_points: usize, dt: f64) -> Result<Self> {
        if q_points < MIN_Q_POINTS {
            return Err(Error::Config(format!(
                "q grid needs at least {MIN_Q_POINTS} points, got {q_points}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let dq = 4.0 / q_points as f64;
        let half_band = (0..q_points)
            .map(|j| band_propagator(BZ_MIN + j as f64 * dq, params.v(), 0.5 * dt))
            .collect();
        let n = 2 * q_points;
        let w0 = params.w0();
        let inv_n = 1.0 / n as f64;
        let trap = (0..n)
            .map(|k| {
                let x = conjugate_x(k, n);
                phase(0.25 * w0 * w0 * x * x * dt) * inv_n
            })
            .collect();
        Ok(Self {
            params: *params,
            dt,
            m: q_points,
            half_band,
            trap,
            fourier: Fourier::new(n),
            buffer: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    fn band_half_step(&self, state: &mut TwoBandState) {
        let [b0, b1] = &mut state.spinor;
        for ((u, a0), a1) in self.half_band.iter().zip(b0.iter_mut()).zip(b1.iter_mut()) {
            let (x0, x1) = (*a0, *a1);
            *a0 = u[0] * x0 + u[1] * x1;
            *a1 = u[2] * x0 + u[3] * x1;
        }
    }

    fn trap_step(&mut self, state: &mut TwoBandState) {
        let m = self.m;
        self.buffer[..m].copy_from_slice(&state.spinor[0]);
        self.buffer[m..].copy_from_slice(&state.spinor[1]);
        self.fourier.inverse(&mut self.buffer);
        for (a, f) in self.buffer.iter_mut().zip(&self.trap) {
            *a *= f;
        }
        self.fourier.forward(&mut self.buffer);
        let buf = std::mem::take(&mut self.buffer);
        state.split_into(&buf);
        self.buffer = buf;
    }

    pub fn step(&mut self, state: &mut TwoBandState) -> Result<()> {
        if state.q_points() != self.m {
            return Err(Error::Usage("state and propagator use different q grids".into()));
        }
        self.band_half_step(state);
        self.trap_step(state);
        self.band_half_step(state);
        Ok(())
    }

    pub fn observables(&mut self, state: &TwoBandState) -> Observables {
        observables_with(state, &self.params, &mut self.fourier)
    }

    /// Runs `n_steps`, recording every `record_stride` steps.
    pub fn evolve(
        &mut self,
        initial: &TwoBandState,
        n_steps: usize,
        record_stride: usize,
    ) -> Result<(ObservableSeries, TwoBandState)> {
        if record_stride == 0 {
            return Err(Error::Config("record_stride must be >= 1".into()));
        }
        let mut state = initial.clone();
        let mut series = ObservableSeries::default();
        series
            .samples
            .push(Sample::new(0.0, self.observables(&state), 1.0));
        series.edge_tail.push(state.q_tail(EDGE_Q));
        for s in 1..=n_steps {
            self.step(&mut state)?;
            if s % record_stride == 0 {
                if !state.is_finite() {
                    return Err(Error::Numerical {
                        step: s,
                        what: "non-finite spinor amplitude".into(),
                    });
                }
                let t = s as f64 * self.dt;
                let obs = self.observables(&state);
                series
                    .samples
                    .push(Sample::new(t, obs, initial.fidelity(&state)?));
                series.edge_tail.push(state.q_tail(EDGE_Q));
            }
        }
        Ok((series, state))
    }
}

/// Position conjugate to bin `k` of the `n = 2M` point transform over
/// `p ∈ [-4, 4)`: spacing `2π/8`.
fn conjugate_x(k: usize, n: usize) -> f64 {
    signed_index(k, n) as f64 * 2.0 * PI / 8.0
}

pub fn to_observables(state: &TwoBandState, params: &SystemParams) -> Observables {
    let mut fourier = Fourier::new(2 * state.q_points());
    observables_with(state, params, &mut fourier)
}

fn observables_with(
    state: &TwoBandState,
    params: &SystemParams,
    fourier: &mut Fourier,
) -> Observables {
    let m = state.q_points();
    let v = params.v();
    let w0 = params.w0();

    let mut band = [0.0; 2];
    let mut q_mean = 0.0;
    let mut overlap = Complex64::new(0.0, 0.0);
    let mut band_energy = 0.0;
    for j in 0..m {
        let q = state.q(j);
        let a0 = state.spinor[0][j];
        let a1 = state.spinor[1][j];
        let (n0, n1) = (a0.norm_sqr(), a1.norm_sqr());
        band[0] += n0;
        band[1] += n1;
        q_mean += q * (n0 + n1);
        let c = a0.conj() * a1;
        overlap += c;
        band_energy += (q * q - 4.0 * q) * n0 + (q * q + 4.0 * q) * n1 + 0.5 * v * c.re;
    }

    let mut f = state.concatenated();
    fourier.inverse(&mut f);
    let n = 2 * m;
    let mut x_mean = 0.0;
    let mut x2 = 0.0;
    for (k, a) in f.iter().enumerate() {
        let rho = a.norm_sqr() / n as f64;
        let x = conjugate_x(k, n);
        x_mean += x * rho;
        x2 += x * x * rho;
    }

    let sigma_x = band[0] - band[1];
    Observables {
        x: x_mean,
        p: q_mean - 2.0 * sigma_x,
        q: q_mean,
        sigma_x,
        sigma_z: 2.0 * overlap.re,
        leakage: 0.0,
        norm: band[0] + band[1],
        energy: band_energy + 0.25 * w0 * w0 * x2 - 0.5 * w0,
    }
}

/// Propagates over the time grid `k·dt`, `k = 0..=n_steps`, recording every
/// `record_stride` steps.
pub fn evolve_periodic(
    initial: &TwoBandState,
    params: &SystemParams,
    dt: f64,
    n_steps: usize,
    record_stride: usize,
) -> Result<ObservableSeries> {
    let mut prop = PeriodicPropagator::new(params, initial.q_points(), dt)?;
    Ok(prop.evolve(initial, n_steps, record_stride)?.0)
}
