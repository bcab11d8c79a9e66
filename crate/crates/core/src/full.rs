//! Full single-atom dynamics on a uniform periodic position grid.
//!
//! The Hamiltonian `p² + (v/2)·cos(4x) + (w0²/4)·x²` (recoil units) is
//! propagated with second-order Strang splitting: half a potential step in
//! position space, a full kinetic step in momentum space, and another half
//! potential step. Consecutive potential half-steps between record times are
//! fused into one full step.
//!
//! Simulated-Rabi observables are read off the momentum amplitudes by
//! folding every physical momentum into the first Brillouin zone,
//! `p = q + (2·n_b − 1)·2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bands::{BZ_MIN, BZ_WIDTH};
use crate::error::{Error, Result};
use crate::series::{MomentumSnapshot, ObservableSeries, Observables, Sample, EDGE_Q};
use crate::spectral::{bin_of, phase, signed_index, Fourier};
use crate::units::SystemParams;

/// Smallest admissible position grid.
pub const MIN_POINTS: usize = 1024;
/// Points per band used by [`GridSpec::for_params`] unless the box rule
/// needs more.
pub const MIN_BAND_POINTS: usize = 512;
/// Momentum range the grid must resolve, in ħk0.
pub const MIN_NYQUIST: f64 = 8.0;
/// Highest physical momentum of the two simulated bands, in ħk0.
pub const BAND_EDGE_MOMENTUM: f64 = 4.0;
/// Admissible probability in the outer sixteenth of the box on each side.
pub const EDGE_TAIL_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of position samples (power of two).
    pub n_points: usize,
    /// Box is `[-x_half_width, x_half_width)` in `1/k0`.
    pub x_half_width: f64,
    /// Time step in `ħ/E_r`.
    pub dt: f64,
    pub n_steps: usize,
    pub record_stride: usize,
}

/// Largest step allowed by the time-step rule.
///
/// `dt ≤ (1/200)·min(2π/ω0, 2π/V, 2π/(p_edge²/2m))` with `p_edge` the band
/// edge momentum `4ħk0`.
pub fn default_dt(params: &SystemParams) -> f64 {
    let mut shortest = 2.0 * PI / params.w0();
    if params.v() > 0.0 {
        shortest = shortest.min(2.0 * PI / params.v());
    }
    shortest = shortest.min(2.0 * PI / (BAND_EDGE_MOMENTUM * BAND_EDGE_MOMENTUM));
    shortest / 200.0
}

/// Admissible lattice-coupled amplitude beyond the grid's Nyquist momentum.
pub const ALIAS_LIMIT: f64 = 1e-9;

/// Perturbative amplitude that the lattice pushes from the band edge
/// `|p| = 4` into the first plane wave beyond `p_nyquist`. Each order couples
/// `p → p + 4` with strength `v/4` across the energy gap `p'² − 16`.
pub fn alias_amplitude(v: f64, p_nyquist: f64) -> f64 {
    let mut amp = 1.0;
    let mut p = BAND_EDGE_MOMENTUM;
    while p <= p_nyquist {
        p += 4.0;
        amp *= 0.25 * v / (p * p - BAND_EDGE_MOMENTUM * BAND_EDGE_MOMENTUM);
    }
    amp
}

/// Smallest half width allowed by the box rule `max(8·Δx, 4·A_cl)`.
///
/// `Δx = 1/√w0` is the vacuum width and `A_cl = 4/w0` the classical
/// amplitude of an atom whose momentum swings by `±2ħk0`.
pub fn required_half_width(params: &SystemParams) -> f64 {
    let w0 = params.w0();
    let vacuum = 1.0 / w0.sqrt();
    let amplitude = 4.0 / w0;
    (8.0 * vacuum).max(4.0 * amplitude)
}

impl GridSpec {
    /// Default grid for a run of length `t_max` with `n_records` records
    /// after `t = 0`.
    ///
    /// The box is `x_half_width = (π/4)·M` with `M` a power of two, which
    /// puts the momenta `0, ±4ħk0` exactly on the grid (`dp = 4/M`). The
    /// position grid has `8·M` points, so it resolves `±16ħk0`.
    pub fn for_params(params: &SystemParams, t_max: f64, n_records: usize) -> Result<Self> {
        if !(t_max > 0.0) || n_records == 0 {
            return Err(Error::Config(format!(
                "need t_max > 0 and at least one record, got t_max = {t_max}, records = {n_records}"
            )));
        }
        let needed = (required_half_width(params) * 4.0 / PI).ceil() as usize;
        let band_points = needed.max(MIN_BAND_POINTS).next_power_of_two();
        let mut n_points = 8 * band_points;
        // p_nyquist = 2·n_points/band_points for this box
        while alias_amplitude(params.v(), 2.0 * (n_points / band_points) as f64) > ALIAS_LIMIT {
            n_points *= 2;
        }
        let spec = Self::with_band_points(band_points, n_points)
            .with_time(t_max, n_records, default_dt(params));
        Ok(spec)
    }

    /// Grid with `band_points` momentum samples per band and `n_points`
    /// position samples; time fields are left for [`GridSpec::with_time`].
    pub fn with_band_points(band_points: usize, n_points: usize) -> Self {
        Self {
            n_points,
            x_half_width: 0.25 * PI * band_points as f64,
            dt: 0.0,
            n_steps: 0,
            record_stride: 1,
        }
    }

    /// Sets `dt ≤ max_dt` so that `n_records` records land exactly on
    /// `k·t_max/n_records`.
    pub fn with_time(mut self, t_max: f64, n_records: usize, max_dt: f64) -> Self {
        let interval = t_max / n_records as f64;
        let stride = (interval / max_dt).ceil().max(1.0) as usize;
        self.record_stride = stride;
        self.n_steps = stride * n_records;
        self.dt = interval / stride as f64;
        self
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_half_width / self.n_points as f64
    }

    pub fn dp(&self) -> f64 {
        PI / self.x_half_width
    }

    pub fn p_nyquist(&self) -> f64 {
        PI * self.n_points as f64 / (2.0 * self.x_half_width)
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.x_half_width + j as f64 * self.dx()
    }

    /// Momentum of FFT bin `k`.
    pub fn p(&self, k: usize) -> f64 {
        signed_index(k, self.n_points) as f64 * self.dp()
    }

    pub fn t_max(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Number of momentum samples per Brillouin zone, when `4ħk0` is an
    /// exact multiple of the momentum spacing.
    pub fn band_points(&self) -> Option<usize> {
        let m = BZ_WIDTH / self.dp();
        let r = m.round();
        ((m - r).abs() < 1e-9 && r >= 1.0).then_some(r as usize)
    }

    pub fn same_grid(&self, other: &GridSpec) -> bool {
        self.n_points == other.n_points && self.x_half_width == other.x_half_width
    }

    /// Checks every sizing rule for the given physical parameters.
    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if !self.n_points.is_power_of_two() || self.n_points < MIN_POINTS {
            return Err(Error::Config(format!(
                "n_points must be a power of two >= {MIN_POINTS}, got {}",
                self.n_points
            )));
        }
        if !(self.x_half_width > 0.0) {
            return Err(Error::Config("x_half_width must be positive".into()));
        }
        if self.p_nyquist() < MIN_NYQUIST {
            return Err(Error::Config(format!(
                "momentum grid spans ±{:.3} ħk0 but must reach ±{MIN_NYQUIST}; need n_points >= {}",
                self.p_nyquist(),
                (2.0 * MIN_NYQUIST * self.x_half_width / PI).ceil()
            )));
        }
        if self.band_points().is_none() {
            return Err(Error::Config(format!(
                "x_half_width = {} is not a multiple of π/4, so ±4ħk0 are off the momentum grid",
                self.x_half_width
            )));
        }
        let required = required_half_width(params);
        if self.x_half_width < required {
            return Err(Error::Config(format!(
                "x_half_width = {:.3} is below the box rule max(8Δx, 4A_cl) = {required:.3}",
                self.x_half_width
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Qubit amplitudes of the momentum classes `p = -2ħk0` (`n_b = 0`) and
/// `p = +2ħk0` (`n_b = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitAmplitudes {
    pub c0: Complex64,
    pub c1: Complex64,
}

impl QubitAmplitudes {
    /// Normalises `(c0, c1)`.
    pub fn new(c0: Complex64, c1: Complex64) -> Result<Self> {
        let n = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain("qubit amplitudes must not both vanish".into()));
        }
        Ok(Self { c0: c0 / n, c1: c1 / n })
    }

    pub fn band0() -> Self {
        Self { c0: Complex64::new(1.0, 0.0), c1: Complex64::new(0.0, 0.0) }
    }

    pub fn band1() -> Self {
        Self { c0: Complex64::new(0.0, 0.0), c1: Complex64::new(1.0, 0.0) }
    }

    /// `(|n_b=0⟩ + |n_b=1⟩)/√2`, the `σz = +1` eigenstate.
    pub fn equal() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { c0: a, c1: a }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    pub amplitudes: Vec<Complex64>,
    pub grid: GridSpec,
}

impl GridWavefunction {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) {
        let s = self.norm().sqrt();
        for a in &mut self.amplitudes {
            *a /= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// Maps a physical momentum to `(q, n_b)` with `q ∈ [-2, 2)`.
pub fn fold_to_bz(p: f64) -> (f64, i64) {
    let n_b = ((p - BZ_MIN + 2.0) / BZ_WIDTH).floor();
    let q = p + 2.0 - BZ_WIDTH * n_b;
    (q, n_b as i64)
}

/// Trap ground state times the plane waves `e^{∓2ix}` of the two qubit
/// levels.
pub fn prepare_initial_state(
    params: &SystemParams,
    grid: &GridSpec,
    qubit: QubitAmplitudes,
) -> Result<GridWavefunction> {
    let w0 = params.w0();
    let amplitudes: Vec<Complex64> = (0..grid.n_points)
        .map(|j| {
            let x = grid.x(j);
            let envelope = (-0.25 * w0 * x * x).exp();
            let waves = qubit.c0 * Complex64::from_polar(1.0, -2.0 * x)
                + qubit.c1 * Complex64::from_polar(1.0, 2.0 * x);
            waves * envelope
        })
        .collect();
    let mut psi = GridWavefunction { amplitudes, grid: *grid };
    psi.normalize();

    let edge = grid.n_points / 16;
    let tail: f64 = psi.amplitudes[..edge]
        .iter()
        .chain(&psi.amplitudes[grid.n_points - edge..])
        .map(|a| a.norm_sqr())
        .sum::<f64>()
        * grid.dx();
    if tail > EDGE_TAIL_LIMIT {
        return Err(Error::Config(format!(
            "initial state leaks {tail:.3e} into the box edges; x_half_width must be at least {:.3}",
            required_half_width(params)
        )));
    }
    Ok(psi)
}

/// Working buffers for reading momentum-space quantities off a grid state.
pub(crate) struct MomentumView {
    fourier: Fourier,
    buffer: Vec<Complex64>,
}

impl MomentumView {
    pub fn new(n: usize) -> Self {
        Self {
            fourier: Fourier::new(n),
            buffer: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Unitary momentum amplitudes `a_k` in FFT bin order, phased as if the
    /// position origin were at `x = 0`; `Σ|a_k|² = norm`.
    pub fn amplitudes(&mut self, psi: &GridWavefunction) -> &[Complex64] {
        let g = &psi.grid;
        let n = g.n_points;
        self.buffer.copy_from_slice(&psi.amplitudes);
        self.fourier.forward(&mut self.buffer);
        let scale = (g.dx() / n as f64).sqrt();
        for (k, a) in self.buffer.iter_mut().enumerate() {
            *a *= Complex64::from_polar(scale, g.p(k) * g.x_half_width);
        }
        &self.buffer
    }

    /// Inverse of [`MomentumView::amplitudes`].
    pub fn to_position(&mut self, grid: &GridSpec, momentum: &[Complex64]) -> GridWavefunction {
        let n = grid.n_points;
        let scale = 1.0 / (grid.dx() * n as f64).sqrt();
        self.buffer.copy_from_slice(momentum);
        for (k, a) in self.buffer.iter_mut().enumerate() {
            *a *= Complex64::from_polar(scale, -grid.p(k) * grid.x_half_width);
        }
        self.fourier.inverse(&mut self.buffer);
        GridWavefunction { amplitudes: self.buffer.clone(), grid: *grid }
    }
}

/// `P(p) = |⟨p|ψ⟩|²`, sorted by ascending momentum; sums to the norm.
pub fn momentum_distribution(psi: &GridWavefunction) -> (Vec<f64>, Vec<f64>) {
    let mut view = MomentumView::new(psi.grid.n_points);
    sorted_distribution(&psi.grid, view.amplitudes(psi))
}

fn sorted_distribution(grid: &GridSpec, amps: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n_points;
    let half = (n / 2) as i64;
    (-half..half)
        .map(|k| {
            let b = bin_of(k, n);
            (k as f64 * grid.dp(), amps[b].norm_sqr())
        })
        .unzip()
}

/// Trap plus lattice potential in `E_r`.
pub fn potential(params: &SystemParams, x: f64) -> f64 {
    let w0 = params.w0();
    0.5 * params.v() * (4.0 * x).cos() + 0.25 * w0 * w0 * x * x
}

/// Constant separating the full-model energy from the Rabi-frame energy:
/// the kinetic offset `4E_r` and the zero-point energy `w0/2`.
pub fn rabi_energy_offset(params: &SystemParams) -> f64 {
    4.0 + 0.5 * params.w0()
}

pub fn observables(psi: &GridWavefunction, params: &SystemParams) -> Observables {
    let mut view = MomentumView::new(psi.grid.n_points);
    let amps = view.amplitudes(psi).to_vec();
    observables_from(psi, &amps, params)
}

pub(crate) fn observables_from(
    psi: &GridWavefunction,
    amps: &[Complex64],
    params: &SystemParams,
) -> Observables {
    let g = &psi.grid;
    let n = g.n_points;
    let dx = g.dx();

    let mut norm = 0.0;
    let mut x_mean = 0.0;
    let mut pot = 0.0;
    for (j, a) in psi.amplitudes.iter().enumerate() {
        let rho = a.norm_sqr() * dx;
        let x = g.x(j);
        norm += rho;
        x_mean += x * rho;
        pot += potential(params, x) * rho;
    }

    let mut p_mean = 0.0;
    let mut q_mean = 0.0;
    let mut kin = 0.0;
    let mut band = [0.0; 2];
    let mut leakage = 0.0;
    for (k, a) in amps.iter().enumerate() {
        let prob = a.norm_sqr();
        let p = g.p(k);
        let (q, n_b) = fold_to_bz(p);
        p_mean += p * prob;
        q_mean += q * prob;
        kin += p * p * prob;
        match n_b {
            0 => band[0] += prob,
            1 => band[1] += prob,
            _ => leakage += prob,
        }
    }

    // pair p ∈ [-4, 0) (band 0) with p + 4 (band 1) at the same q
    let shift = g.band_points().expect("validated grid") as i64;
    let mut overlap = Complex64::new(0.0, 0.0);
    for k in -shift..0 {
        overlap += amps[bin_of(k, n)].conj() * amps[bin_of(k + shift, n)];
    }

    Observables {
        x: x_mean,
        p: p_mean,
        q: q_mean,
        sigma_x: band[0] - band[1],
        sigma_z: 2.0 * overlap.re,
        leakage,
        norm,
        energy: kin + pot - rabi_energy_offset(params),
    }
}

/// Momentum-space tail of the folded quasi-momentum beyond `|q| > q_cut`,
/// restricted to the two simulated bands.
pub fn q_tail(psi: &GridWavefunction, q_cut: f64) -> f64 {
    let mut view = MomentumView::new(psi.grid.n_points);
    let amps = view.amplitudes(psi);
    q_tail_from(&psi.grid, amps, q_cut)
}

pub(crate) fn q_tail_from(grid: &GridSpec, amps: &[Complex64], q_cut: f64) -> f64 {
    amps.iter()
        .enumerate()
        .filter_map(|(k, a)| {
            let (q, n_b) = fold_to_bz(grid.p(k));
            ((n_b == 0 || n_b == 1) && q.abs() > q_cut).then(|| a.norm_sqr())
        })
        .sum()
}

/// `|⟨a|b⟩|²`
pub fn fidelity(a: &GridWavefunction, b: &GridWavefunction) -> Result<f64> {
    if !a.grid.same_grid(&b.grid) {
        return Err(Error::Usage("fidelity between states on different grids".into()));
    }
    let overlap: Complex64 = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok((overlap * a.grid.dx()).norm_sqr())
}

/// Strang-split propagator for one parameter set and grid.
pub struct FullPropagator {
    params: SystemParams,
    grid: GridSpec,
    half_potential: Vec<Complex64>,
    full_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    fourier: Fourier,
    view: MomentumView,
}

impl FullPropagator {
    pub fn new(params: &SystemParams, grid: &GridSpec) -> Result<Self> {
        grid.validate(params)?;
        let n = grid.n_points;
        let dt = grid.dt;
        let u: Vec<f64> = (0..n).map(|j| potential(params, grid.x(j))).collect();
        let inv_n = 1.0 / n as f64;
        Ok(Self {
            params: *params,
            grid: *grid,
            half_potential: u.iter().map(|&u| phase(0.5 * u * dt)).collect(),
            full_potential: u.iter().map(|&u| phase(u * dt)).collect(),
            // the inverse FFT normalisation is folded into the kinetic phase
            kinetic: (0..n)
                .map(|k| {
                    let p = grid.p(k);
                    phase(p * p * dt) * inv_n
                })
                .collect(),
            fourier: Fourier::new(n),
            view: MomentumView::new(n),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn check(&self, psi: &GridWavefunction) -> Result<()> {
        if !psi.grid.same_grid(&self.grid) {
            return Err(Error::Usage("state and propagator live on different grids".into()));
        }
        Ok(())
    }

    fn kinetic_step(&mut self, amps: &mut [Complex64]) {
        self.fourier.forward(amps);
        multiply(amps, &self.kinetic);
        self.fourier.inverse(amps);
    }

    /// One full Strang step.
    pub fn step(&mut self, psi: &mut GridWavefunction) -> Result<()> {
        self.check(psi)?;
        multiply(&mut psi.amplitudes, &self.half_potential);
        self.kinetic_step(&mut psi.amplitudes);
        multiply(&mut psi.amplitudes, &self.half_potential);
        Ok(())
    }

    /// `n` Strang steps with the inner potential half-steps fused.
    pub fn advance(&mut self, psi: &mut GridWavefunction, n: usize) -> Result<()> {
        self.check(psi)?;
        if n == 0 {
            return Ok(());
        }
        multiply(&mut psi.amplitudes, &self.half_potential);
        for s in 0..n {
            self.kinetic_step(&mut psi.amplitudes);
            if s + 1 < n {
                multiply(&mut psi.amplitudes, &self.full_potential);
            }
        }
        multiply(&mut psi.amplitudes, &self.half_potential);
        Ok(())
    }

    pub fn observables(&mut self, psi: &GridWavefunction) -> Observables {
        let amps = self.view.amplitudes(psi).to_vec();
        observables_from(psi, &amps, &self.params)
    }

    /// Runs the grid's `n_steps`, recording every `record_stride` steps.
    /// With `snapshot_every = Some(k)` the momentum distribution is stored
    /// at every `k`-th record.
    pub fn evolve(
        &mut self,
        initial: &GridWavefunction,
        snapshot_every: Option<usize>,
    ) -> Result<(ObservableSeries, GridWavefunction)> {
        self.check(initial)?;
        let stride = self.grid.record_stride;
        let n_records = self.grid.n_steps / stride;
        let mut psi = initial.clone();
        let mut series = ObservableSeries::default();

        self.record(&mut series, initial, &psi, 0, snapshot_every)?;
        for r in 1..=n_records {
            self.advance(&mut psi, stride)?;
            if !psi.is_finite() {
                return Err(Error::Numerical {
                    step: r * stride,
                    what: "non-finite amplitude in position grid".into(),
                });
            }
            self.record(&mut series, initial, &psi, r, snapshot_every)?;
        }
        let rest = self.grid.n_steps - n_records * stride;
        self.advance(&mut psi, rest)?;
        Ok((series, psi))
    }

    fn record(
        &mut self,
        series: &mut ObservableSeries,
        initial: &GridWavefunction,
        psi: &GridWavefunction,
        r: usize,
        snapshot_every: Option<usize>,
    ) -> Result<()> {
        let t = (r * self.grid.record_stride) as f64 * self.grid.dt;
        let amps = self.view.amplitudes(psi).to_vec();
        let obs = observables_from(psi, &amps, &self.params);
        series.samples.push(Sample::new(t, obs, fidelity(initial, psi)?));
        series.edge_tail.push(q_tail_from(&self.grid, &amps, EDGE_Q));
        if let Some(every) = snapshot_every {
            if every > 0 && r % every == 0 {
                let (p, probability) = sorted_distribution(&self.grid, &amps);
                series.snapshots.push(MomentumSnapshot { t, p, probability });
            }
        }
        Ok(())
    }
}

fn multiply(amps: &mut [Complex64], factors: &[Complex64]) {
    for (a, f) in amps.iter_mut().zip(factors) {
        *a *= f;
    }
}

/// One Strang step on a copy of `psi`.
pub fn step(psi: &GridWavefunction, params: &SystemParams) -> Result<GridWavefunction> {
    let mut prop = FullPropagator::new(params, &psi.grid)?;
    let mut out = psi.clone();
    prop.step(&mut out)?;
    if !out.is_finite() {
        return Err(Error::Numerical { step: 1, what: "non-finite amplitude".into() });
    }
    Ok(out)
}

/// Propagates `initial` over its grid's time window.
pub fn evolve(
    initial: &GridWavefunction,
    params: &SystemParams,
    snapshot_every: Option<usize>,
) -> Result<ObservableSeries> {
    let mut prop = FullPropagator::new(params, &initial.grid)?;
    Ok(prop.evolve(initial, snapshot_every)?.0)
}

/// Length of the short run used by [`converge_dt`], in `ħ/E_r`.
pub const PROBE_WINDOW: f64 = 1.0;
/// Most halvings [`converge_dt`] attempts before giving up.
pub const MAX_HALVINGS: usize = 8;

/// Largest `|E(t) − E(0)|` relative to the full-model `⟨H⟩` at `t = 0`
/// (the Rabi-frame energy is shifted by a constant, which would make a
/// relative figure meaningless near `E = 0`).
pub fn relative_energy_drift(series: &ObservableSeries, params: &SystemParams) -> f64 {
    let Some(first) = series.samples.first() else {
        return 0.0;
    };
    let scale = (first.energy + rabi_energy_offset(params)).abs().max(f64::MIN_POSITIVE);
    series
        .samples
        .iter()
        .map(|s| (s.energy - first.energy).abs())
        .fold(0.0, f64::max)
        / scale
}

/// One trial of [`converge_dt`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtTrial {
    pub dt: f64,
    pub relative_drift: f64,
}

/// Halves the grid's time step until a short probe run conserves energy to
/// `tolerance`. Record times are unchanged: every halving doubles the record
/// stride.
pub fn converge_dt(
    params: &SystemParams,
    grid: &GridSpec,
    initial: &GridWavefunction,
    tolerance: f64,
) -> Result<(GridSpec, Vec<DtTrial>)> {
    let mut current = *grid;
    let mut trials = Vec::new();
    for _ in 0..=MAX_HALVINGS {
        let window = current.t_max().min(PROBE_WINDOW);
        let steps = ((window / current.dt).round() as usize).max(1);
        let every = (steps / 200).max(1);
        let mut probe = current;
        probe.n_steps = steps - steps % every;
        probe.record_stride = every;
        let mut prop = FullPropagator::new(params, &probe)?;
        let (series, _) = prop.evolve(initial, None)?;
        let relative_drift = relative_energy_drift(&series, params);
        trials.push(DtTrial { dt: current.dt, relative_drift });
        if relative_drift < tolerance {
            return Ok((current, trials));
        }
        current.dt *= 0.5;
        current.n_steps *= 2;
        current.record_stride *= 2;
    }
    Err(Error::Numerical {
        step: 0,
        what: format!(
            "energy drift stays above {tolerance:e} after {MAX_HALVINGS} halvings of dt (last {:.3e})",
            trials.last().map_or(f64::NAN, |t| t.relative_drift)
        ),
    })
}

/// `(⟨x²⟩, ⟨q²⟩)` with `q` the folded quasi-momentum.
pub fn second_moments(psi: &GridWavefunction) -> (f64, f64) {
    let g = &psi.grid;
    let dx = g.dx();
    let x2 = psi
        .amplitudes
        .iter()
        .enumerate()
        .map(|(j, a)| g.x(j).powi(2) * a.norm_sqr() * dx)
        .sum();
    let mut view = MomentumView::new(g.n_points);
    let q2 = view
        .amplitudes(psi)
        .iter()
        .enumerate()
        .map(|(k, a)| fold_to_bz(g.p(k)).0.powi(2) * a.norm_sqr())
        .sum();
    (x2, q2)
}

#[cfg(test)]
mod tests {
    use super::*;

    const W0_FIG2: f64 = 0.14907;

    fn grid_for(params: &SystemParams, t_max: f64, records: usize) -> GridSpec {
        GridSpec::for_params(params, t_max, records).unwrap()
    }

    fn gaussian(grid: &GridSpec, w0: f64, x0: f64, p0: f64) -> GridWavefunction {
        let amplitudes = (0..grid.n_points)
            .map(|j| {
                let x = grid.x(j);
                Complex64::from_polar((-0.25 * w0 * (x - x0).powi(2)).exp(), p0 * x)
            })
            .collect();
        let mut psi = GridWavefunction { amplitudes, grid: *grid };
        psi.normalize();
        psi
    }

    #[test]
    fn fold_examples() {
        assert_eq!(fold_to_bz(-2.0), (0.0, 0));
        assert_eq!(fold_to_bz(2.0), (0.0, 1));
        assert_eq!(fold_to_bz(6.0), (0.0, 2));
        assert_eq!(fold_to_bz(0.0), (-2.0, 1));
        assert_eq!(fold_to_bz(-4.0), (-2.0, 0));
    }

    #[test]
    fn prepared_band1_moments() {
        let params = SystemParams::new(8.5566, W0_FIG2).unwrap();
        let grid = grid_for(&params, 1.0, 1);
        let psi = prepare_initial_state(&params, &grid, QubitAmplitudes::band1()).unwrap();
        let obs = observables(&psi, &params);
        assert!((obs.p - 2.0).abs() < 1e-10);
        assert!(obs.x.abs() < 1e-10);
        assert!((obs.norm - 1.0).abs() < 1e-12);
        let (x2, q2) = second_moments(&psi);
        assert!((x2 - 1.0 / W0_FIG2).abs() < 1e-9, "{x2}");
        assert!((x2 * q2 - 0.25).abs() < 1e-6);
    }

    #[test]
    fn prepared_qubit_observables() {
        let params = SystemParams::new(0.0, W0_FIG2).unwrap();
        let grid = grid_for(&params, 1.0, 1);
        let psi = prepare_initial_state(&params, &grid, QubitAmplitudes::band0()).unwrap();
        let obs = observables(&psi, &params);
        assert!((obs.p + 2.0).abs() < 1e-10);
        assert!((obs.sigma_x - 1.0).abs() < 1e-10);
        assert!(obs.sigma_z.abs() < 1e-10);
        assert!(obs.leakage < 1e-10);

        let psi = prepare_initial_state(&params, &grid, QubitAmplitudes::equal()).unwrap();
        let obs = observables(&psi, &params);
        assert!(obs.sigma_x.abs() < 1e-10);
        assert!((obs.sigma_z - 1.0).abs() < 1e-10);
    }

    #[test]
    fn momentum_distribution_peaks() {
        let params = SystemParams::new(0.0, 0.5).unwrap();
        let grid = grid_for(&params, 1.0, 1);
        let psi = prepare_initial_state(&params, &grid, QubitAmplitudes::band1()).unwrap();
        let (p, prob) = momentum_distribution(&psi);
        assert!((prob.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(prob.iter().all(|&x| x >= 0.0));
        let peak = (0..p.len()).max_by(|&a, &b| prob[a].total_cmp(&prob[b])).unwrap();
        assert!((p[peak] - 2.0).abs() < 1e-12);

        let psi = prepare_initial_state(&params, &grid, QubitAmplitudes::equal()).unwrap();
        let (p, prob) = momentum_distribution(&psi);
        let at = |target: f64| prob[p.iter().position(|&x| (x - target).abs() < 1e-9).unwrap()];
        assert!((at(2.0) - at(-2.0)).abs() < 1e-12);
        assert!(at(2.0) > 100.0 * at(0.0));
    }

    #[test]
    fn vacuum_is_stationary() {
        let params = SystemParams::new(0.0, 0.5).unwrap();
        let mut grid = grid_for(&params, 1.0, 1);
        grid.dt = 1e-3;
        grid.n_steps = 10_000;
        grid.record_stride = 1000;
        let psi = gaussian(&grid, 0.5, 0.0, 0.0);
        let series = evolve(&psi, &params, None).unwrap();
        let first = series.samples[0];
        for s in &series.samples {
            for name in ["x", "p", "q", "norm", "energy", "sigma_x", "sigma_z"] {
                let d = (s.get(name).unwrap() - first.get(name).unwrap()).abs();
                assert!(d < 1e-8, "{name} moved by {d}");
            }
            assert!((s.p_in - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn ehrenfest_momentum_at_zero_lattice() {
        let params = SystemParams::new(0.0, 0.5).unwrap();
        let period = params.trap_period();
        let grid = grid_for(&params, period, 40);
        let psi = prepare_initial_state(&params, &grid, QubitAmplitudes::band1()).unwrap();
        let series = evolve(&psi, &params, None).unwrap();
        for s in &series.samples {
            assert!((s.p - 2.0 * (0.5 * s.t).cos()).abs() < 1e-6, "t = {}", s.t);
            let dx = (s.x - 4.0 / 0.5 * (0.5 * s.t).sin()).abs();
            assert!(dx < 1e-5, "t = {}: {dx:e}", s.t);
        }
    }

    #[test]
    fn fidelity_examples() {
        let w0 = 0.5;
        let params = SystemParams::new(0.0, w0).unwrap();
        let grid = grid_for(&params, 1.0, 1);
        let vac = gaussian(&grid, w0, 0.0, 0.0);
        assert!((fidelity(&vac, &vac).unwrap() - 1.0).abs() < 1e-12);

        let a = prepare_initial_state(&params, &grid, QubitAmplitudes::band0()).unwrap();
        let b = prepare_initial_state(&params, &grid, QubitAmplitudes::band1()).unwrap();
        assert!(fidelity(&a, &b).unwrap() < 1e-8);
        assert!((fidelity(&a, &b).unwrap() - fidelity(&b, &a).unwrap()).abs() < 1e-15);

        let (x0, p0) = (1.3, -0.4);
        let displaced = gaussian(&grid, w0, x0, p0);
        let beta2 = 0.25 * w0 * x0 * x0 + p0 * p0 / w0;
        assert!((fidelity(&vac, &displaced).unwrap() - (-beta2).exp()).abs() < 1e-4);

        let other = GridWavefunction {
            amplitudes: vac.amplitudes[..1024].to_vec(),
            grid: GridSpec::with_band_points(128, 1024),
        };
        assert!(matches!(fidelity(&vac, &other), Err(Error::Usage(_))));
    }

    #[test]
    fn grid_rules_are_enforced() {
        let params = SystemParams::from_ratios(5.18, 0.0).unwrap();
        let ok = grid_for(&params, 10.0, 10);
        ok.validate(&params).unwrap();
        assert!(ok.n_points >= MIN_POINTS && ok.p_nyquist() >= MIN_NYQUIST);
        assert_eq!(ok.band_points(), Some(512));

        let mut small = ok;
        small.n_points = 512;
        assert!(small.validate(&params).unwrap_err().to_string().contains("n_points"));
        let mut blurred = ok;
        blurred.n_points = 1024;
        assert!(blurred.validate(&params).unwrap_err().to_string().contains("±"));
        let mut skew = ok;
        skew.x_half_width += 0.1;
        assert!(skew.validate(&params).unwrap_err().to_string().contains("π/4"));
        let narrow = GridSpec::with_band_points(64, 1024).with_time(1.0, 1, 1e-3);
        assert!(narrow.validate(&params).unwrap_err().to_string().contains("box rule"));
        assert!(matches!(
            prepare_initial_state(&SystemParams::new(0.0, 1e-4).unwrap(), &ok, QubitAmplitudes::band1()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn records_land_on_the_requested_times() {
        let g = GridSpec::with_band_points(512, 4096).with_time(10.0, 7, 0.003);
        assert_eq!(g.n_steps, 7 * g.record_stride);
        assert!(g.dt <= 0.003);
        assert!((g.t_max() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_state_is_a_numerical_fault() {
        let params = SystemParams::new(0.0, 0.5).unwrap();
        let grid = grid_for(&params, 1.0, 1);
        let mut psi = gaussian(&grid, 0.5, 0.0, 0.0);
        psi.amplitudes[7] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(step(&psi, &params), Err(Error::Numerical { step: 1, .. })));
        assert!(matches!(evolve(&psi, &params, None), Err(Error::Numerical { .. })));
    }

    #[test]
    fn fused_steps_match_single_steps() {
        let params = SystemParams::from_ratios(5.18, 28.7).unwrap();
        let grid = grid_for(&params, 1.0, 1);
        let psi = prepare_initial_state(&params, &grid, QubitAmplitudes::band1()).unwrap();
        let mut prop = FullPropagator::new(&params, &grid).unwrap();
        let mut a = psi.clone();
        let mut b = psi;
        for _ in 0..20 {
            prop.step(&mut a).unwrap();
        }
        prop.advance(&mut b, 20).unwrap();
        let diff: f64 = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn converge_dt_meets_tolerance() {
        let params = SystemParams::from_ratios(5.18, 28.7).unwrap();
        let grid = grid_for(&params, 2.0, 4);
        let psi = prepare_initial_state(&params, &grid, QubitAmplitudes::band1()).unwrap();
        let (fine, trials) = converge_dt(&params, &grid, &psi, 1e-5).unwrap();
        assert!(trials.last().unwrap().relative_drift < 1e-5);
        assert!(trials.len() >= 2, "default dt should need halving here");
        assert!((fine.t_max() - grid.t_max()).abs() < 1e-12);
        assert_eq!(fine.n_steps / fine.record_stride, 4);
    }

    #[test]
    fn alias_estimate_grows_with_depth() {
        assert_eq!(alias_amplitude(0.0, 16.0), 0.0);
        assert!(alias_amplitude(8.5, 16.0) > ALIAS_LIMIT);
        assert!(alias_amplitude(8.5, 32.0) < ALIAS_LIMIT);
        assert!(alias_amplitude(1.0, 16.0) < ALIAS_LIMIT);
    }
}
