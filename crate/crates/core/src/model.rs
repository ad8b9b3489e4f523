//! Hamiltonian constants, oscillator thermal weights and truncation orders.
//!
//! The model is
//!
//! ```text
//! H = (ε/2) σz + V σx + ħω a†a + (λ/2) σz (a† + a)
//! ```
//!
//! with the oscillator zero-point energy dropped, so the oscillator levels are
//! `E_n = n ħω`. Any comparison against references that keep the zero-point
//! term must shift energies by `ħω/2`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Constants of the spin-oscillator Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Spin bias ε.
    pub epsilon: f64,
    /// Tunneling matrix element V (may be negative).
    pub v: f64,
    /// Oscillator angular frequency ω.
    pub omega: f64,
    /// Spin-oscillator coupling λ.
    pub lambda: f64,
    pub hbar: f64,
    pub kb: f64,
}

impl Default for ModelParams {
    /// ε = 0, V = −0.05, λ = 0.2 in units where ħ = ω = k_B = 1.
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            v: -0.05,
            omega: 1.0,
            lambda: 0.2,
            hbar: 1.0,
            kb: 1.0,
        }
    }
}

impl ModelParams {
    pub fn new(epsilon: f64, v: f64, omega: f64, lambda: f64, hbar: f64, kb: f64) -> Result<Self> {
        let params = Self {
            epsilon,
            v,
            omega,
            lambda,
            hbar,
            kb,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("omega", self.omega), ("hbar", self.hbar), ("kb", self.kb)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be finite and positive, got {value}")));
            }
        }
        for (name, value) in [("epsilon", self.epsilon), ("v", self.v), ("lambda", self.lambda)] {
            if !value.is_finite() {
                return Err(invalid(name, format!("must be finite, got {value}")));
            }
        }
        Ok(())
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_v(mut self, v: f64) -> Self {
        self.v = v;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Oscillator quantum ħω.
    pub fn quantum(&self) -> f64 {
        self.hbar * self.omega
    }

    /// Relative displacement λ/ħω of the two spin branches at equilibrium.
    pub fn branch_displacement(&self) -> f64 {
        self.lambda / self.quantum()
    }

    /// Inverse temperature β = 1/(k_B T).
    pub fn beta(&self, temperature: f64) -> Result<f64> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(invalid("temperature", format!("must be positive, got {temperature}")));
        }
        Ok(1.0 / (self.kb * temperature))
    }
}

/// Inverse temperature and the truncation orders used by the thermal methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalConfig {
    pub beta: f64,
    /// Fock levels retained in the sign-sampled thermal state.
    pub fock_trunc_m: usize,
    /// Highest level index `N_T` in Boltzmann sums (levels `0..=N_T`).
    pub boltzmann_trunc_nt: usize,
    /// Fock levels per spin branch in the exact reference basis.
    pub expand_trunc_jmax: usize,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            fock_trunc_m: 7,
            boltzmann_trunc_nt: 7,
            expand_trunc_jmax: 14,
        }
    }
}

impl ThermalConfig {
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid(
                "beta",
                format!("must be finite and positive, got {}", self.beta),
            ));
        }
        if self.fock_trunc_m < 1 {
            return Err(invalid("fock_trunc_m", "must be at least 1"));
        }
        if self.expand_trunc_jmax < 2 {
            return Err(invalid("expand_trunc_jmax", "must be at least 2"));
        }
        if self.boltzmann_trunc_nt >= self.expand_trunc_jmax {
            return Err(invalid(
                "boltzmann_trunc_nt",
                format!(
                    "initial levels 0..={} do not fit into {} Fock levels",
                    self.boltzmann_trunc_nt, self.expand_trunc_jmax
                ),
            ));
        }
        Ok(())
    }

    /// Raises `fock_trunc_m` and `boltzmann_trunc_nt` until the dropped
    /// Boltzmann weight is below `tol`. `expand_trunc_jmax` follows so that it
    /// stays at twice the Boltzmann order.
    pub fn escalate_truncations(mut self, params: &ModelParams, tol: f64) -> Self {
        while boltzmann_tail(self.fock_trunc_m.saturating_sub(1), self.beta, params) >= tol {
            self.fock_trunc_m += 1;
        }
        while boltzmann_tail(self.boltzmann_trunc_nt, self.beta, params) >= tol {
            self.boltzmann_trunc_nt += 1;
        }
        self.expand_trunc_jmax = self.expand_trunc_jmax.max(2 * self.boltzmann_trunc_nt);
        self
    }
}

/// Canonical partition function `Q(β) = (1 − e^{−βħω})^{−1}`.
pub fn partition_function(beta: f64, params: &ModelParams) -> f64 {
    1.0 / -(-beta * params.quantum()).exp_m1()
}

/// Boltzmann weight `ρ_n = e^{−βnħω} / Q(β)`.
pub fn boltzmann_weight(n: usize, beta: f64, params: &ModelParams) -> f64 {
    let x = beta * params.quantum();
    (-x * n as f64).exp() * -(-x).exp_m1()
}

/// Thermal occupation `n̄ = 1/(e^{βħω} − 1)`.
pub fn mean_occupation(beta: f64, params: &ModelParams) -> f64 {
    1.0 / (beta * params.quantum()).exp_m1()
}

/// Weight `Σ_{n > n_max} ρ_n = e^{−β(n_max+1)ħω}` dropped by truncating at `n_max`.
pub fn boltzmann_tail(n_max: usize, beta: f64, params: &ModelParams) -> f64 {
    (-beta * params.quantum() * (n_max + 1) as f64).exp()
}

/// Boltzmann weights of levels `0..=n_max`, renormalised to sum to one.
pub fn truncated_weights(n_max: usize, beta: f64, params: &ModelParams) -> Vec<f64> {
    let raw: Vec<f64> = (0..=n_max).map(|n| boltzmann_weight(n, beta, params)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn partition_function_matches_direct_sum() {
        let direct: f64 = (0..200).map(|n| (-(n as f64)).exp()).sum();
        let q = partition_function(1.0, &unit());
        assert!((q - direct).abs() < 1e-14);
        assert!((q - 1.581977).abs() < 1e-6);
        assert!((boltzmann_weight(0, 1.0, &unit()) - 0.632121).abs() < 1e-6);
    }

    #[test]
    fn cold_limit_keeps_only_ground_state() {
        assert!((partition_function(80.0, &unit()) - 1.0).abs() < 1e-15);
        assert!((boltzmann_weight(0, 80.0, &unit()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_follow_geometric_law() {
        let p = unit();
        for beta in [0.3, 1.0, 2.5] {
            let w0 = boltzmann_weight(0, beta, &p);
            assert!((w0 - (1.0 - (-beta).exp())).abs() < 1e-15);
            for n in 0..10 {
                let lhs = boltzmann_weight(n, beta, &p) * partition_function(beta, &p);
                assert!((lhs - (-beta * n as f64).exp()).abs() < 1e-12);
            }
        }
        let w1 = boltzmann_weight(1, 1.0, &p);
        assert!((w1 - (-1f64).exp() * (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!((w1 - 0.232544).abs() < 1e-6);
        let partial: f64 = (0..=7).map(|n| boltzmann_weight(n, 1.0, &p)).sum();
        assert!(partial >= 0.999);
        assert!((1.0 - partial - boltzmann_tail(7, 1.0, &p)).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_constants() {
        assert!(ModelParams::new(0.0, -0.05, 0.0, 0.2, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.0, -0.05, 1.0, 0.2, -1.0, 1.0).is_err());
        assert!(ModelParams::new(0.0, f64::NAN, 1.0, 0.2, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.0, -0.05, 1.0, 0.2, 1.0, 1.0).is_ok());
        assert!(unit().beta(0.0).is_err());
        assert!(ThermalConfig::default().with_beta(0.0).validate().is_err());
        let bad = ThermalConfig {
            boltzmann_trunc_nt: 14,
            ..ThermalConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn escalation_reaches_tolerance() {
        let cfg = ThermalConfig::default().escalate_truncations(&unit(), 1e-4);
        assert!(boltzmann_tail(cfg.boltzmann_trunc_nt, 1.0, &unit()) < 1e-4);
        assert!(boltzmann_tail(cfg.fock_trunc_m - 1, 1.0, &unit()) < 1e-4);
        assert!(cfg.validate().is_ok());
    }
}
