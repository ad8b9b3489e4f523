//! Thermal Davydov dynamics from random-sign superpositions of Fock states.
//!
//! Each realization replaces the oscillator vacuum by
//! `|Φ⟩ = Σ_{n<M} s_n √(ρ_n/W) |n⟩` with independent uniform signs `s_n = ±1`
//! and `W = Σ_{n<M} ρ_n`. Averaging `|Φ⟩⟨Φ|` over signs gives the (truncated)
//! canonical density matrix, since `E[s_n s_m] = δ_nm`.
//!
//! With `T = ⟨Φ|a|Φ⟩`, `T₁₁ = ⟨Φ|a†a|Φ⟩`, `O = ⟨Φ|D†_f D_g|Φ⟩` and
//! `Oa = ⟨Φ|D†_f D_g a|Φ⟩` (primed quantities have `f ↔ g`), the explicit
//! equations of motion are
//!
//! ```text
//! ḟ = −iω(f + T) − iλ/2ħ − (iV/ħ|A|²) {A*B [(g − f − T) O + Oa] + AB* [T O' − Oa']}
//! Ȧ = −iA [Im(ḟ f*) + 2T Im ḟ] − (i/ħ) [V B O + ħωA (|f|² + 2T Re f + T₁₁) + λA (Re f + T)]
//! ```
//!
//! and their `B, g` counterparts with `λ → −λ`. Simplified mode keeps only
//! `ḟ = −iωf − iλ/2ħ`, `ġ = −iωg + iλ/2ħ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::d1::{
    common_phase_rate, default_initial, free_displacement_rates, map_failure, propagate_rotating, D1State, Trajectory,
};
use crate::ensemble::{run_all, sampled_series};
use crate::error::{invalid, Result};
use crate::model::{boltzmann_weight, ModelParams, ThermalConfig};
use crate::observables::{Fingerprint, Method, ObservableSeries};
use crate::ode::{Eom, IntegratorConfig, Mode};
use crate::special::{fill_overlap_matrix, sqrt_factorial_ratio};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Uniform `±1` signs for realization `index`, drawn from its own ChaCha
/// stream so that results do not depend on scheduling.
pub fn sample_signs(levels: usize, seed: u64, index: u64) -> Vec<i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..levels).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()
}

/// One sign-sampled thermal state `|Φ⟩` with its cached coefficient vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignRealization {
    pub seed: u64,
    pub index: u64,
    pub signs: Vec<i8>,
    /// `(v₀)_n = ⟨n|Φ⟩`.
    pub v0: Vec<f64>,
    /// `(v₁)_n = ⟨n|a|Φ⟩ = √(n+1) (v₀)_{n+1}`.
    pub v1: Vec<f64>,
    /// Boltzmann weight `W` of the kept levels before renormalisation.
    pub captured_weight: f64,
    pub quantities: ThermalQuantities,
}

impl SignRealization {
    /// Builds `|Φ⟩` from explicit signs.
    pub fn new(signs: Vec<i8>, beta: f64, params: &ModelParams) -> Result<Self> {
        if signs.is_empty() {
            return Err(invalid("fock_trunc_m", "need at least one level"));
        }
        if signs.iter().any(|s| s.abs() != 1) {
            return Err(invalid("signs", "entries must be +1 or -1"));
        }
        let rho: Vec<f64> = (0..signs.len()).map(|n| boltzmann_weight(n, beta, params)).collect();
        let captured_weight: f64 = rho.iter().sum();
        let v0: Vec<f64> = signs
            .iter()
            .zip(&rho)
            .map(|(&s, &r)| f64::from(s) * (r / captured_weight).sqrt())
            .collect();
        let v1 = lowered(&v0);
        let quantities = ThermalQuantities::from_coefficients(&v0);
        Ok(Self {
            seed: 0,
            index: 0,
            signs,
            v0,
            v1,
            captured_weight,
            quantities,
        })
    }

    /// Realization `index` of the ensemble keyed by `seed`.
    pub fn sample(levels: usize, seed: u64, index: u64, beta: f64, params: &ModelParams) -> Result<Self> {
        let mut r = Self::new(sample_signs(levels, seed, index), beta, params)?;
        r.seed = seed;
        r.index = index;
        Ok(r)
    }

    /// The zero-temperature state `|Φ⟩ = |0⟩`.
    pub fn ground() -> Self {
        Self::new(vec![1], 1.0, &ModelParams::default()).expect("one level is valid")
    }

    pub fn levels(&self) -> usize {
        self.v0.len()
    }

    /// Boltzmann weight dropped by keeping only `M` levels.
    pub fn truncation_tail(&self) -> f64 {
        1.0 - self.captured_weight
    }

    /// `⟨Φ|Φ⟩`; one by construction.
    pub fn norm_sqr(&self) -> f64 {
        self.v0.iter().map(|c| c * c).sum()
    }

    /// Normal-ordered moment `T_s^r = ⟨Φ| (a†)^r a^s |Φ⟩`.
    pub fn normal_moment(&self, r: usize, s: usize) -> f64 {
        let m = self.levels();
        (0..m)
            .filter(|n| n + r < m && n + s < m)
            .map(|n| self.v0[n + s] * sqrt_factorial_ratio(n, s) * self.v0[n + r] * sqrt_factorial_ratio(n, r))
            .sum()
    }

    /// Anti-normal-ordered moment `U_r^s = ⟨Φ| a^r (a†)^s |Φ⟩`.
    pub fn antinormal_moment(&self, r: usize, s: usize) -> f64 {
        let m = self.levels();
        // (a†^s Φ)_n = √(n!/(n−s)!) c_{n−s}; the raised state lives on n < m + s.
        (0..m + r.max(s))
            .filter(|&n| n >= r && n >= s && n - r < m && n - s < m)
            .map(|n| self.v0[n - s] * sqrt_factorial_ratio(n - s, s) * self.v0[n - r] * sqrt_factorial_ratio(n - r, r))
            .sum()
    }
}

fn lowered(v0: &[f64]) -> Vec<f64> {
    (0..v0.len())
        .map(|n| {
            if n + 1 < v0.len() {
                ((n + 1) as f64).sqrt() * v0[n + 1]
            } else {
                0.0
            }
        })
        .collect()
}

/// Time-independent moments entering the equations of motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalQuantities {
    /// `T_0^1 = ⟨Φ|a|Φ⟩ = v₀ · v₁`.
    pub t01: f64,
    /// `T_1^1 = ⟨Φ|a†a|Φ⟩`.
    pub t11: f64,
    /// `U_1^1 = ⟨Φ|a a†|Φ⟩ = T_1^1 + 1`.
    pub u11: f64,
}

impl ThermalQuantities {
    fn from_coefficients(v0: &[f64]) -> Self {
        let v1 = lowered(v0);
        let t01 = v0.iter().zip(&v1).map(|(a, b)| a * b).sum();
        let t11 = v1.iter().map(|b| b * b).sum::<f64>();
        Self {
            t01,
            t11,
            u11: t11 + 1.0,
        }
    }
}

pub fn thermal_quantities(real: &SignRealization) -> ThermalQuantities {
    real.quantities
}

/// Untruncated `T_s^s = s! n̄^s`.
pub fn closed_form_normal_diagonal(s: usize, beta: f64, params: &ModelParams) -> f64 {
    let nbar = crate::model::mean_occupation(beta, params);
    factorial(s) * nbar.powi(s as i32)
}

/// Untruncated `U_s^s = s! (n̄ + 1)^s`.
pub fn closed_form_antinormal_diagonal(s: usize, beta: f64, params: &ModelParams) -> f64 {
    let nbar = crate::model::mean_occupation(beta, params);
    factorial(s) * (nbar + 1.0).powi(s as i32)
}

fn factorial(s: usize) -> f64 {
    (1..=s).map(|k| k as f64).product()
}

/// The four displacement overlaps needed by the equations of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlaps {
    /// `⟨Φ|D†_f D_g|Φ⟩`.
    pub fg: Complex64,
    /// `⟨Φ|D†_f D_g a|Φ⟩`.
    pub fg_a: Complex64,
    /// `⟨Φ|D†_g D_f|Φ⟩`.
    pub gf: Complex64,
    /// `⟨Φ|D†_g D_f a|Φ⟩`.
    pub gf_a: Complex64,
}

/// Evaluates all overlaps from one matrix `M(g − f)`; the reversed ones use
/// `M(−z)_mn = (−1)^{m+n} M(z)_mn`.
pub fn overlaps(f: Complex64, g: Complex64, real: &SignRealization) -> Result<Overlaps> {
    let m = real.levels();
    let mut mat = DMatrix::zeros(m, m);
    fill_overlap_matrix(g - f, &mut mat)?;
    let parity = |v: &[f64]| -> DVector<Complex64> {
        DVector::from_iterator(
            v.len(),
            v.iter()
                .enumerate()
                .map(|(i, &x)| Complex64::new(if i % 2 == 0 { x } else { -x }, 0.0)),
        )
    };
    let plain = |v: &[f64]| DVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)));
    let (v0, v1) = (plain(&real.v0), plain(&real.v1));
    let (p0, p1) = (parity(&real.v0), parity(&real.v1));
    let mv0 = &mat * &v0;
    let mv1 = &mat * &v1;
    let mp0 = &mat * &p0;
    let mp1 = &mat * &p1;
    let s = (-0.5 * (f.norm_sqr() + g.norm_sqr())).exp();
    let pre_fg = s * (f.conj() * g).exp();
    let pre_gf = s * (g.conj() * f).exp();
    Ok(Overlaps {
        fg: pre_fg * v0.dot(&mv0),
        fg_a: pre_fg * v0.dot(&mv1),
        gf: pre_gf * p0.dot(&mp0),
        gf_a: pre_gf * p0.dot(&mp1),
    })
}

/// `⟨Φ|D†_f D_g|Φ⟩ = e^{−(|f|²+|g|²)/2} e^{f*g} v₀ᵀ M(g − f) v₀`.
pub fn stochastic_overlap(f: Complex64, g: Complex64, real: &SignRealization) -> Result<Complex64> {
    Ok(overlaps(f, g, real)?.fg)
}

/// `⟨Φ|D†_f D_g a|Φ⟩ = e^{−(|f|²+|g|²)/2} e^{f*g} v₀ᵀ M(g − f) v₁`.
pub fn stochastic_overlap_annihilate(f: Complex64, g: Complex64, real: &SignRealization) -> Result<Complex64> {
    Ok(overlaps(f, g, real)?.fg_a)
}

/// Time derivatives for one realization. A failed overlap evaluation yields a
/// NaN derivative, which the integrator reports.
pub fn stochastic_rhs(state: &D1State, real: &SignRealization, params: &ModelParams, eom: Eom) -> D1State {
    let ov = match overlaps(state.f, state.g, real) {
        Ok(ov) => ov,
        Err(_) => {
            let nan = Complex64::new(f64::NAN, f64::NAN);
            return D1State::new(nan, nan, nan, nan);
        }
    };
    rhs_with_overlaps(state, &real.quantities, &ov, params, eom)
}

fn rhs_with_overlaps(state: &D1State, q: &ThermalQuantities, ov: &Overlaps, params: &ModelParams, eom: Eom) -> D1State {
    let D1State { a, b, f, g } = *state;
    let hbar = params.hbar;
    let t = q.t01;
    let (mut fdot, mut gdot) = free_displacement_rates(state, params);
    if eom.mode == Mode::Full {
        let vh = params.v / hbar;
        fdot += -I * params.omega * t
            - I * vh
                * eom.inv_norm_sqr(a)
                * (a.conj() * b * ((g - f - t) * ov.fg + ov.fg_a) + a * b.conj() * (t * ov.gf - ov.gf_a));
        gdot += -I * params.omega * t
            - I * vh
                * eom.inv_norm_sqr(b)
                * (b.conj() * a * ((f - g - t) * ov.gf + ov.gf_a) + b * a.conj() * (t * ov.fg - ov.fg_a));
    }
    let hw = params.quantum();
    let half_eps = 0.5 * params.epsilon;
    let adot = -I * a * ((fdot * f.conj()).im + 2.0 * t * fdot.im)
        - (I / hbar)
            * (params.v * b * ov.fg
                + a * (hw * (f.norm_sqr() + 2.0 * f.re * t + q.t11) + params.lambda * (f.re + t) + half_eps));
    let bdot = -I * b * ((gdot * g.conj()).im + 2.0 * t * gdot.im)
        - (I / hbar)
            * (params.v * a * ov.gf
                + b * (hw * (g.norm_sqr() + 2.0 * g.re * t + q.t11) - params.lambda * (g.re + t) - half_eps));
    D1State::new(adot, bdot, fdot, gdot)
}

/// Tunneling energy and the remainder of `⟨Ψ|H|Ψ⟩` for one realization.
pub fn stochastic_energy_parts(state: &D1State, real: &SignRealization, params: &ModelParams) -> Result<(f64, f64)> {
    let D1State { a, b, f, g } = *state;
    let q = &real.quantities;
    let o = stochastic_overlap(f, g, real)?;
    let spin = 2.0 * params.v * (a.conj() * b * o).re;
    let (na, nb) = (a.norm_sqr(), b.norm_sqr());
    let t = q.t01;
    let rest = 0.5 * params.epsilon * (na - nb)
        + params.lambda * (na * (f.re + t) - nb * (g.re + t))
        + params.quantum()
            * (na * (f.norm_sqr() + 2.0 * f.re * t + q.t11) + nb * (g.norm_sqr() + 2.0 * g.re * t + q.t11));
    Ok((spin, rest))
}

/// Ensemble of sign-sampled trajectories.
#[derive(Debug, Clone)]
pub struct StochasticRun {
    pub series: ObservableSeries,
    pub realizations: Vec<SignRealization>,
    pub trajectories: Vec<Trajectory>,
}

impl StochasticRun {
    pub fn max_norm_drift(&self) -> f64 {
        self.trajectories.iter().map(|t| t.max_norm_drift).fold(0.0, f64::max)
    }
}

/// Runs `count` realizations from the spin-up start (`g(0) = λ/ħω` in
/// Simplified mode) and averages `P_z` with equal weights.
pub fn run_stochastic_ensemble(
    count: usize,
    seed: u64,
    params: &ModelParams,
    thermal: &ThermalConfig,
    integrator: &IntegratorConfig,
    t_grid: &[f64],
) -> Result<StochasticRun> {
    run_stochastic_ensemble_from(count, seed, params, thermal, integrator, t_grid, 0.0)
}

/// As [`run_stochastic_ensemble`], with an optional `B(0)` perturbation.
pub fn run_stochastic_ensemble_from(
    count: usize,
    seed: u64,
    params: &ModelParams,
    thermal: &ThermalConfig,
    integrator: &IntegratorConfig,
    t_grid: &[f64],
    perturbation: f64,
) -> Result<StochasticRun> {
    if count == 0 {
        return Err(invalid("realizations", "must be at least 1"));
    }
    params.validate()?;
    thermal.validate()?;
    integrator.validate()?;
    let realizations: Vec<SignRealization> = (0..count as u64)
        .map(|i| SignRealization::sample(thermal.fock_trunc_m, seed, i, thermal.beta, params))
        .collect::<Result<_>>()?;
    let eom = integrator.eom();
    let initial = default_initial(params, integrator.mode, perturbation);
    let trajectories = run_all(count, |i| {
        let real = &realizations[i];
        let rhs = |s: &D1State| stochastic_rhs(s, real, params, eom);
        let rate = common_phase_rate(&initial, &rhs(&initial));
        propagate_rotating(initial, rate, t_grid, integrator, rhs).map_err(map_failure(i))
    })?;
    let fingerprint = Fingerprint::new(Method::Stochastic, params)
        .with_thermal(thermal)
        .with_integrator(integrator)
        .with_sampling(seed, count);
    let series = sampled_series(
        &trajectories,
        |i, s| stochastic_energy_parts(s, &realizations[i], params).unwrap_or((f64::NAN, f64::NAN)),
        fingerprint,
    );
    Ok(StochasticRun {
        series,
        realizations,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::d1::{d1_rhs, propagate_with};
    use crate::ode::uniform_grid;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn signs_are_deterministic_and_stream_split() {
        assert_eq!(sample_signs(16, 3, 5), sample_signs(16, 3, 5));
        assert_ne!(sample_signs(64, 3, 5), sample_signs(64, 3, 6));
        assert_ne!(sample_signs(64, 3, 5), sample_signs(64, 4, 5));
    }

    #[test]
    fn sign_means_vanish() {
        let n = 100_000u64;
        let mut sum = [0i64; 4];
        for i in 0..n {
            for (acc, s) in sum.iter_mut().zip(sample_signs(4, 11, i)) {
                *acc += i64::from(s);
            }
        }
        for acc in sum {
            assert!((acc as f64 / n as f64).abs() < 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn state_is_normalised() {
        let p = ModelParams::default();
        let r = SignRealization::sample(7, 1, 0, 1.0, &p).unwrap();
        assert!((r.norm_sqr() - 1.0).abs() < 1e-14);
        assert!((r.truncation_tail() - (-7.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn moment_symmetries() {
        let p = ModelParams::default();
        let r = SignRealization::sample(9, 2, 3, 0.7, &p).unwrap();
        for s in 0..4 {
            for t in 0..4 {
                assert!((r.normal_moment(t, s) - r.normal_moment(s, t)).abs() < 1e-14);
                assert!((r.antinormal_moment(t, s) - r.antinormal_moment(s, t)).abs() < 1e-14);
            }
            assert!((r.antinormal_moment(0, s) - r.normal_moment(0, s)).abs() < 1e-14);
        }
        let q = thermal_quantities(&r);
        assert!((q.t01 - r.normal_moment(0, 1)).abs() < 1e-14);
        assert!((q.t11 - r.normal_moment(1, 1)).abs() < 1e-14);
        assert!((q.u11 - r.antinormal_moment(1, 1)).abs() < 1e-14);
    }

    #[test]
    fn ground_state_overlaps() {
        let r = SignRealization::ground();
        let (f, g) = (c(0.3, -0.2), c(-0.5, 0.4));
        let ov = overlaps(f, g, &r).unwrap();
        let s = D1State::new(c(1.0, 0.0), c(0.0, 0.0), f, g).coherent_overlap();
        assert!((ov.fg - s).norm() < 1e-15);
        assert!((ov.gf - s.conj()).norm() < 1e-15);
        assert!(ov.fg_a.norm() < 1e-15 && ov.gf_a.norm() < 1e-15);
    }

    #[test]
    fn equal_displacements_give_unit_overlap() {
        let p = ModelParams::default();
        let r = SignRealization::sample(7, 9, 1, 1.0, &p).unwrap();
        let f = c(0.7, 1.1);
        assert!((stochastic_overlap(f, f, &r).unwrap() - 1.0).norm() < 1e-13);
        let a = stochastic_overlap_annihilate(c(0.0, 0.0), c(0.0, 0.0), &r).unwrap();
        assert!((a - r.quantities.t01).norm() < 1e-15);
    }

    #[test]
    fn reversed_overlap_is_conjugate() {
        let p = ModelParams::default();
        let r = SignRealization::sample(7, 4, 2, 1.0, &p).unwrap();
        let ov = overlaps(c(0.4, 0.1), c(-0.3, 0.9), &r).unwrap();
        assert!((ov.gf - ov.fg.conj()).norm() < 1e-14);
    }

    #[test]
    fn ground_realization_reproduces_d1() {
        let p = ModelParams::default();
        let r = SignRealization::ground();
        let s = D1State::new(
            c(0.6, 0.1),
            c(-0.2, 0.768_114_574_786_860_8),
            c(0.1, -0.3),
            c(0.25, 0.05),
        );
        for eom in [Eom::full(1e-12), Eom::simplified()] {
            let x = stochastic_rhs(&s, &r, &p, eom).to_array();
            let y = d1_rhs(&s, &p, eom).to_array();
            for (u, v) in x.iter().zip(&y) {
                assert!((u - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_frame_matches_direct_integration() {
        let p = ModelParams::default();
        let thermal = ThermalConfig::default().with_beta(0.5);
        let cfg = IntegratorConfig::default().with_tolerances(1e-12, 1e-12);
        let grid = uniform_grid(30.0, 0.5).unwrap();
        let run = run_stochastic_ensemble(2, 4, &p, &thermal, &cfg, &grid).unwrap();
        let start = default_initial(&p, cfg.mode, 0.0);
        for (real, tr) in run.realizations.iter().zip(&run.trajectories) {
            let direct = propagate_with(start, &grid, &cfg, |s| stochastic_rhs(s, real, &p, cfg.eom())).unwrap();
            for (x, y) in tr.states.iter().zip(&direct.states) {
                let d = x
                    .to_array()
                    .iter()
                    .zip(&y.to_array())
                    .map(|(u, v)| (u - v).norm())
                    .fold(0.0, f64::max);
                assert!(d < 1e-8, "{d}");
            }
        }
    }

    #[test]
    fn norm_rate_vanishes() {
        let p = ModelParams::default();
        let r = SignRealization::sample(7, 5, 8, 1.0, &p).unwrap();
        let (a, b) = (c(0.3, 0.4), c(0.5, -0.7));
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let s = D1State::new(a / n, b / n, c(0.2, 0.6), c(-0.4, 0.1));
        for eom in [Eom::full(1e-12), Eom::simplified()] {
            assert!(s.norm_rate(&stochastic_rhs(&s, &r, &p, eom)).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_rate_vanishes_in_full_mode() {
        let p = ModelParams::default().with_lambda(0.4);
        for index in 0..10 {
            let r = SignRealization::sample(7, 21, index, 1.0, &p).unwrap();
            let (a, b) = (c(0.6, 0.2), c(-0.3, 0.5));
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let s = D1State::new(a / n, b / n, c(0.15, -0.3), c(-0.2, 0.35));
            let rate = stochastic_rhs(&s, &r, &p, Eom::full(0.0));
            let h = 1e-6;
            let shift = |sign: f64| {
                D1State::from_array(&std::array::from_fn(|i| {
                    s.to_array()[i] + rate.to_array()[i] * (sign * h)
                }))
            };
            let energy = |x: &D1State| {
                let (es, er) = stochastic_energy_parts(x, &r, &p).unwrap();
                es + er
            };
            let de = (energy(&shift(1.0)) - energy(&shift(-1.0))) / (2.0 * h);
            assert!(de.abs() < 1e-8, "realization {index}: dE/dt = {de}");
        }
    }
}
