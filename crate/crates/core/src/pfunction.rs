//! Thermal averaging by sampling coherent-state centers from the Glauber
//! P-function of the oscillator, `P(α) ∝ exp(−|α|²/n̄)`, and propagating each
//! sample with the zero-temperature D1 equations.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::d1::{d1_energy_parts, d1_rhs, map_failure, propagate_with, D1State, Trajectory};
use crate::ensemble::{run_all, sampled_series};
use crate::error::{invalid, Result};
use crate::model::{mean_occupation, ModelParams};
use crate::observables::{Fingerprint, Method, ObservableSeries};
use crate::ode::{IntegratorConfig, Mode};

/// One phase-space center; all samples carry equal weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PSample {
    pub alpha: Complex64,
}

/// Sample `index` of the stream keyed by `seed`: `x, p ~ N(0, n̄/2)`.
pub fn pfunction_sample(beta: f64, params: &ModelParams, seed: u64, index: u64) -> Result<PSample> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid("beta", format!("must be finite and positive, got {beta}")));
    }
    let sd = (0.5 * mean_occupation(beta, params)).sqrt();
    let normal = Normal::new(0.0, sd).map_err(|e| invalid("beta", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let x = normal.sample(&mut rng);
    let p = normal.sample(&mut rng);
    Ok(PSample {
        alpha: Complex64::new(x, p),
    })
}

pub fn sample_pfunction(beta: f64, params: &ModelParams, count: usize, seed: u64) -> Result<Vec<PSample>> {
    (0..count as u64)
        .map(|i| pfunction_sample(beta, params, seed, i))
        .collect()
}

/// Start for one sample: `f(0) = α`, and `g(0) = α` (Full) or
/// `α + λ/ħω` (Simplified).
pub fn pfunction_initial(sample: &PSample, params: &ModelParams, mode: Mode, perturbation: f64) -> D1State {
    let g0 = match mode {
        Mode::Full => sample.alpha,
        Mode::Simplified => sample.alpha + params.branch_displacement(),
    };
    D1State::spin_up_displaced(sample.alpha, g0, perturbation)
}

#[derive(Debug, Clone)]
pub struct PFunctionRun {
    pub series: ObservableSeries,
    pub samples: Vec<PSample>,
    pub trajectories: Vec<Trajectory>,
}

impl PFunctionRun {
    pub fn max_norm_drift(&self) -> f64 {
        self.trajectories.iter().map(|t| t.max_norm_drift).fold(0.0, f64::max)
    }
}

pub fn run_pfunction_ensemble(
    count: usize,
    seed: u64,
    beta: f64,
    params: &ModelParams,
    integrator: &IntegratorConfig,
    t_grid: &[f64],
) -> Result<PFunctionRun> {
    run_pfunction_ensemble_from(count, seed, beta, params, integrator, t_grid, 0.0)
}

/// As [`run_pfunction_ensemble`], with an optional `B(0)` perturbation.
pub fn run_pfunction_ensemble_from(
    count: usize,
    seed: u64,
    beta: f64,
    params: &ModelParams,
    integrator: &IntegratorConfig,
    t_grid: &[f64],
    perturbation: f64,
) -> Result<PFunctionRun> {
    if count == 0 {
        return Err(invalid("pfunction_samples", "must be at least 1"));
    }
    params.validate()?;
    integrator.validate()?;
    let samples = sample_pfunction(beta, params, count, seed)?;
    let eom = integrator.eom();
    let trajectories = run_all(count, |i| {
        let start = pfunction_initial(&samples[i], params, integrator.mode, perturbation);
        propagate_with(start, t_grid, integrator, |s| d1_rhs(s, params, eom)).map_err(map_failure(i))
    })?;
    let fingerprint = Fingerprint::new(Method::Pfunction, params)
        .with_beta(beta)
        .with_integrator(integrator)
        .with_sampling(seed, count);
    let series = sampled_series(&trajectories, |_, s| d1_energy_parts(s, params), fingerprint);
    Ok(PFunctionRun {
        series,
        samples,
        trajectories,
    })
}
