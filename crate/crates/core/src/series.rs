//! Time-stamped observable records shared by all three propagators.

use serde::{Deserialize, Serialize};

/// Quasi-momentum beyond which a state counts as touching the zone edge.
pub const EDGE_Q: f64 = 1.8;

/// Expectation values of one state.
///
/// Positions are in `1/k0`, momenta in `ħk0`, energies in `E_r` measured in
/// the Rabi frame: the kinetic constant `4E_r` and the oscillator zero-point
/// energy `w0/2` are subtracted so that all models report the same number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub x: f64,
    pub p: f64,
    pub q: f64,
    pub sigma_x: f64,
    pub sigma_z: f64,
    pub leakage: f64,
    pub norm: f64,
    pub energy: f64,
}

/// One row of an [`ObservableSeries`]; field order is the CSV column order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub p: f64,
    pub q: f64,
    pub sigma_x: f64,
    pub sigma_z: f64,
    pub p_in: f64,
    pub norm: f64,
    pub energy: f64,
    pub leakage: f64,
}

impl Sample {
    pub const COLUMNS: [&'static str; 10] = [
        "t", "x", "p", "q", "sigma_x", "sigma_z", "p_in", "norm", "energy", "leakage",
    ];

    pub fn new(t: f64, obs: Observables, p_in: f64) -> Self {
        Self {
            t,
            x: obs.x,
            p: obs.p,
            q: obs.q,
            sigma_x: obs.sigma_x,
            sigma_z: obs.sigma_z,
            p_in,
            norm: obs.norm,
            energy: obs.energy,
            leakage: obs.leakage,
        }
    }

    pub fn values(&self) -> [f64; 10] {
        [
            self.t,
            self.x,
            self.p,
            self.q,
            self.sigma_x,
            self.sigma_z,
            self.p_in,
            self.norm,
            self.energy,
            self.leakage,
        ]
    }

    pub fn from_values(v: [f64; 10]) -> Self {
        Self {
            t: v[0],
            x: v[1],
            p: v[2],
            q: v[3],
            sigma_x: v[4],
            sigma_z: v[5],
            p_in: v[6],
            norm: v[7],
            energy: v[8],
            leakage: v[9],
        }
    }

    /// Looks up an observable by its column name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Self::COLUMNS
            .iter()
            .position(|c| *c == name)
            .map(|i| self.values()[i])
    }
}

/// Physical momentum distribution at one record time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumSnapshot {
    pub t: f64,
    pub p: Vec<f64>,
    pub probability: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<MomentumSnapshot>,
    /// Set when a truncated basis ran out of room during the run (Fock
    /// cutoff health).
    pub cutoff_warning: bool,
    /// Probability at `|q| > EDGE_Q` in bands 0 and 1 at every record;
    /// empty for models without a quasi-momentum grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edge_tail: Vec<f64>,
}

impl ObservableSeries {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = Sample::COLUMNS.iter().position(|c| *c == name)?;
        Some(self.samples.iter().map(|s| s.values()[idx]).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Record times `k·stride·dt` for `k = 0..=n_steps/stride`.
pub fn record_times(dt: f64, n_steps: usize, record_stride: usize) -> Vec<f64> {
    (0..=n_steps / record_stride)
        .map(|k| (k * record_stride) as f64 * dt)
        .collect()
}
