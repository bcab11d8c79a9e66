//! Dimensionless unit system and the map between lattice/trap parameters
//! and the effective Rabi parameters.
//!
//! Everything downstream works in recoil units built on the single-photon
//! wave-vector `k0`:
//!
//! * energy `E_r = ħ²k0²/2m`
//! * momentum `ħk0`, length `1/k0`, time `ħ/E_r`
//!
//! With `ħ = k0 = E_r = 1` the atom mass is `m = 1/2`, so `p²/2m = p²` and the
//! trap term `mω0²x²/2 = (w0²/4)·x²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atom mass in recoil units (`E_r = ħ²k0²/2m = 1`).
pub const MASS: f64 = 0.5;

/// Physical parameters of the lattice-plus-trap Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Lattice depth `V / E_r`.
    v: f64,
    /// Trap frequency `ħω0 / E_r`.
    w0: f64,
}

/// Effective quantum Rabi model parameters, all in units of `E_r/ħ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    pub w0: f64,
    pub wq: f64,
    pub g: f64,
}

impl SystemParams {
    pub fn new(v: f64, w0: f64) -> Result<Self> {
        if !(w0 > 0.0 && w0.is_finite()) {
            return Err(Error::Domain(format!("trap frequency w0 must be > 0, got {w0}")));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("lattice depth v must be >= 0, got {v}")));
        }
        Ok(Self { v, w0 })
    }

    /// Builds parameters from the ratios quoted for the Rabi model,
    /// `g/ω0` and `ω_q/ω0`.
    pub fn from_ratios(g_over_w0: f64, wq_over_w0: f64) -> Result<Self> {
        if !(g_over_w0 > 0.0 && g_over_w0.is_finite()) {
            return Err(Error::Domain(format!("g/w0 must be > 0, got {g_over_w0}")));
        }
        if !(wq_over_w0 >= 0.0 && wq_over_w0.is_finite()) {
            return Err(Error::Domain(format!("wq/w0 must be >= 0, got {wq_over_w0}")));
        }
        // g = 2√w0  ⇒  g/w0 = 2/√w0
        let w0 = 4.0 / (g_over_w0 * g_over_w0);
        let v = 2.0 * wq_over_w0 * w0;
        Self::new(v, w0)
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn to_rabi_params(&self) -> RabiParams {
        RabiParams {
            w0: self.w0,
            wq: 0.5 * self.v,
            g: 2.0 * self.w0.sqrt(),
        }
    }

    /// Trap period `2π/ω0`.
    pub fn trap_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.w0
    }
}

impl RabiParams {
    pub fn g_over_w0(&self) -> f64 {
        self.g / self.w0
    }

    pub fn wq_over_w0(&self) -> f64 {
        self.wq / self.w0
    }

    /// Largest coherent displacement reached at `ω_q = 0`, `2g/ω0`.
    pub fn beta_max(&self) -> f64 {
        2.0 * self.g / self.w0
    }

    /// Estimated peak quasi-momentum excursion `√w0·|β|max` in `ħk0`.
    pub fn q_excursion(&self) -> f64 {
        self.w0.sqrt() * self.beta_max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_lattice_unit_trap() {
        let rp = SystemParams::new(0.0, 1.0).unwrap().to_rabi_params();
        assert_eq!(rp.w0, 1.0);
        assert_eq!(rp.wq, 0.0);
        assert_eq!(rp.g, 2.0);
    }

    #[test]
    fn shallow_lattice_qubit_splitting() {
        let rp = SystemParams::new(2.0, 1.0).unwrap().to_rabi_params();
        assert_eq!(rp.wq, 1.0);
    }

    #[test]
    fn crossover_ratios() {
        let rp = SystemParams::new(8.5566, 0.14907).unwrap().to_rabi_params();
        assert!((rp.g_over_w0() - 5.18).abs() < 1e-3);
        assert!((rp.wq_over_w0() - 28.7).abs() < 1e-3 * 28.7);

        let p = SystemParams::from_ratios(5.18, 28.7).unwrap();
        assert!((p.w0() - 0.14907).abs() < 1e-5);
        assert!((p.v() - 8.5566).abs() < 1e-3);
    }

    #[test]
    fn from_ratios_examples() {
        let p = SystemParams::from_ratios(10.0, 1.0).unwrap();
        assert_relative_eq!(p.w0(), 0.04, max_relative = 1e-14);
        assert_relative_eq!(p.v(), 0.08, max_relative = 1e-14);

        let p = SystemParams::from_ratios(2.0, 0.0).unwrap();
        assert_eq!(p.w0(), 1.0);
        assert_eq!(p.v(), 0.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(SystemParams::from_ratios(0.0, 1.0).is_err());
        assert!(SystemParams::from_ratios(-1.0, 1.0).is_err());
        assert!(SystemParams::from_ratios(1.0, -0.5).is_err());
        assert!(SystemParams::new(1.0, 0.0).is_err());
        assert!(SystemParams::new(-1.0, 1.0).is_err());
        assert!(SystemParams::new(f64::NAN, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn ratio_round_trip(g in 1e-2f64..1e3, wq in 0.0f64..1e3) {
            let rp = SystemParams::from_ratios(g, wq).unwrap().to_rabi_params();
            prop_assert!((rp.g_over_w0() - g).abs() <= 1e-12 * g);
            prop_assert!((rp.wq_over_w0() - wq).abs() <= 1e-12 * wq.max(1e-300));
        }

        #[test]
        fn separable_definitions(v in 0.0f64..50.0, w0 in 1e-3f64..10.0, v2 in 0.0f64..50.0, w2 in 1e-3f64..10.0) {
            let a = SystemParams::new(v, w0).unwrap().to_rabi_params();
            let b = SystemParams::new(v, w2).unwrap().to_rabi_params();
            let c = SystemParams::new(v2, w0).unwrap().to_rabi_params();
            prop_assert_eq!(a.wq, b.wq);
            prop_assert_eq!(a.g, c.g);
        }
    }
}
