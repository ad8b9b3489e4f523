//! Thermal dynamics by propagating one D1 trajectory per oscillator level.
//!
//! For the start `|+⟩|n⟩` the trial state is `A|+⟩D[f]|n⟩ + B|−⟩D[g]|n⟩` and
//! every coupling picks up a Laguerre factor `L_n(|f − g|²)`:
//!
//! ```text
//! ḟ = −iωf − iλ/2ħ − (iV/ħ|A|²) S (g − f) {A*B e^{f*g} [L_n − L_n'] − AB* e^{fg*} L_n'}
//! Ȧ = −iA Im(ḟ f*) − (i/ħ) [V B S e^{f*g} L_n + ħωA(|f|² + n) + λA Re f]
//! ```
//!
//! plus the mirror equations for `g, B`. Results are weighted by `ρ_n` only at
//! observable time. Averaging the right-hand side itself over `ρ_n` (the
//! thermally averaged, "TA", dynamics) amounts to `L_n(y) → e^{−n̄y}`,
//! `L_n'(y) → −n̄ e^{−n̄y}` and `n → n̄`.

use num_complex::Complex64;

use crate::d1::{default_initial, free_displacement_rates, map_failure, propagate_rotating, D1State, Trajectory};
use crate::ensemble::{run_all, weighted_series};
use crate::error::{invalid, Result};
use crate::model::{boltzmann_tail, mean_occupation, truncated_weights, ModelParams, ThermalConfig};
use crate::observables::{Fingerprint, Method, ObservableSeries};
use crate::ode::{Eom, IntegratorConfig, Mode};
use crate::special::{laguerre, laguerre_derivative};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Level-dependent factors of the equations of motion, evaluated at
/// `y = |f − g|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelFactors {
    pub l: f64,
    pub dl: f64,
    pub occupation: f64,
}

impl LevelFactors {
    /// `L_n(y)`, `L_n'(y)` and `n` for oscillator level `n`.
    pub fn level(n: usize, y: f64) -> Self {
        Self {
            l: laguerre(n, y),
            dl: laguerre_derivative(n, y),
            occupation: n as f64,
        }
    }

    /// Boltzmann averages: `Σ ρ_n L_n(y) = e^{−n̄y}`, its derivative, and `n̄`.
    pub fn thermal(nbar: f64, y: f64) -> Self {
        let e = (-nbar * y).exp();
        Self {
            l: e,
            dl: -nbar * e,
            occupation: nbar,
        }
    }
}

fn laguerre_rhs(state: &D1State, k: LevelFactors, params: &ModelParams, eom: Eom) -> D1State {
    let D1State { a, b, f, g } = *state;
    let hbar = params.hbar;
    let s = (-0.5 * (f.norm_sqr() + g.norm_sqr())).exp();
    let efg = (f.conj() * g).exp();
    let egf = efg.conj();
    let (mut fdot, mut gdot) = free_displacement_rates(state, params);
    if eom.mode == Mode::Full {
        let vh = params.v / hbar;
        fdot += -I
            * vh
            * s
            * (g - f)
            * eom.inv_norm_sqr(a)
            * (a.conj() * b * efg * (k.l - k.dl) - a * b.conj() * egf * k.dl);
        gdot += -I
            * vh
            * s
            * (f - g)
            * eom.inv_norm_sqr(b)
            * (a * b.conj() * egf * (k.l - k.dl) - a.conj() * b * efg * k.dl);
    }
    let hw = params.quantum();
    let half_eps = 0.5 * params.epsilon;
    let coupling = params.v * s * k.l;
    let adot = -I * a * (fdot * f.conj()).im
        - (I / hbar)
            * (coupling * efg * b + a * (hw * (f.norm_sqr() + k.occupation) + params.lambda * f.re + half_eps));
    let bdot = -I * b * (gdot * g.conj()).im
        - (I / hbar)
            * (coupling * egf * a + b * (hw * (g.norm_sqr() + k.occupation) - params.lambda * g.re - half_eps));
    D1State::new(adot, bdot, fdot, gdot)
}

/// Integrates with the level energy `ħω·occupation`, a phase common to `A`
/// and `B`, rotated out; left in place, the fast rotation at large `n` costs
/// the explicit integrator several orders of magnitude in norm accuracy.
fn propagate_level<F>(
    initial: D1State,
    occupation: f64,
    params: &ModelParams,
    integrator: &IntegratorConfig,
    t_grid: &[f64],
    factors: F,
) -> Result<Trajectory>
where
    F: Fn(f64) -> LevelFactors,
{
    let eom = integrator.eom();
    propagate_rotating(initial, params.omega * occupation, t_grid, integrator, |s| {
        laguerre_rhs(s, factors((s.f - s.g).norm_sqr()), params, eom)
    })
}

/// Derivatives for the trajectory started from oscillator level `n`.
pub fn boltzmann_rhs(state: &D1State, n: usize, params: &ModelParams, eom: Eom) -> D1State {
    let y = (state.f - state.g).norm_sqr();
    laguerre_rhs(state, LevelFactors::level(n, y), params, eom)
}

/// Thermally averaged derivatives at inverse temperature `beta`.
pub fn ta_rhs(state: &D1State, beta: f64, params: &ModelParams, eom: Eom) -> D1State {
    let y = (state.f - state.g).norm_sqr();
    laguerre_rhs(
        state,
        LevelFactors::thermal(mean_occupation(beta, params), y),
        params,
        eom,
    )
}

fn energy_with(state: &D1State, k: LevelFactors, params: &ModelParams) -> (f64, f64) {
    let D1State { a, b, f, g } = *state;
    let s = (-0.5 * (f.norm_sqr() + g.norm_sqr())).exp();
    let spin = 2.0 * params.v * s * k.l * (a.conj() * b * (f.conj() * g).exp()).re;
    let (na, nb) = (a.norm_sqr(), b.norm_sqr());
    let rest = params.quantum() * (na * (f.norm_sqr() + k.occupation) + nb * (g.norm_sqr() + k.occupation))
        + params.lambda * (na * f.re - nb * g.re)
        + 0.5 * params.epsilon * (na - nb);
    (spin, rest)
}

/// Spin (tunneling) energy `E_s` and remaining energy `E_r` of level `n`.
pub fn spin_and_rest_energy(state: &D1State, n: usize, params: &ModelParams) -> (f64, f64) {
    energy_with(state, LevelFactors::level(n, (state.f - state.g).norm_sqr()), params)
}

/// `E_s` and `E_r` of the thermally averaged dynamics.
pub fn ta_energy(state: &D1State, beta: f64, params: &ModelParams) -> (f64, f64) {
    let y = (state.f - state.g).norm_sqr();
    energy_with(state, LevelFactors::thermal(mean_occupation(beta, params), y), params)
}

/// Magnitude of the tunneling term of the explicit `ḟ` equation, the part that
/// becomes singular as `A → 0`.
pub fn singular_term(state: &D1State, n: usize, params: &ModelParams, floor: f64) -> f64 {
    let with = boltzmann_rhs(state, n, params, Eom::full(floor));
    let without = boltzmann_rhs(state, n, params, Eom::simplified());
    (with.f - without.f).norm()
}

/// `g_n(0) = λ/ħω`: with it `E_r` stays constant under the simplified
/// displacement equations.
pub fn initial_g(params: &ModelParams) -> Complex64 {
    Complex64::new(params.branch_displacement(), 0.0)
}

/// General solution `r (1 + e^{iφ})`, `r = λ/2ħω`, of the constraint
/// `|g(0) − r| = r`.
pub fn initial_g_with_phase(params: &ModelParams, phase: f64) -> Complex64 {
    let r = 0.5 * params.branch_displacement();
    r * (1.0 + Complex64::from_polar(1.0, phase))
}

/// Trajectory of one oscillator level.
#[derive(Debug, Clone)]
pub struct EigenstateTrajectory {
    pub level: usize,
    pub weight: f64,
    pub trajectory: Trajectory,
}

impl EigenstateTrajectory {
    /// `(L_n, L_n')` at `|f − g|²` for output sample `t_index`.
    pub fn laguerre_at(&self, t_index: usize) -> (f64, f64) {
        let s = &self.trajectory.states[t_index];
        let k = LevelFactors::level(self.level, (s.f - s.g).norm_sqr());
        (k.l, k.dl)
    }
}

#[derive(Debug, Clone)]
pub struct BoltzmannRun {
    pub series: ObservableSeries,
    pub levels: Vec<EigenstateTrajectory>,
    /// Boltzmann weight beyond `N_T` dropped before renormalising.
    pub boltzmann_tail: f64,
}

impl BoltzmannRun {
    pub fn max_norm_drift(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.trajectory.max_norm_drift)
            .fold(0.0, f64::max)
    }
}

/// Propagates levels `0..=N_T` from the mode's standard start.
pub fn run_boltzmann(
    params: &ModelParams,
    thermal: &ThermalConfig,
    integrator: &IntegratorConfig,
    t_grid: &[f64],
) -> Result<BoltzmannRun> {
    run_boltzmann_from(
        default_initial(params, integrator.mode, 0.0),
        params,
        thermal,
        integrator,
        t_grid,
    )
}

/// Propagates levels `0..=N_T`, all from the same variational start.
pub fn run_boltzmann_from(
    initial: D1State,
    params: &ModelParams,
    thermal: &ThermalConfig,
    integrator: &IntegratorConfig,
    t_grid: &[f64],
) -> Result<BoltzmannRun> {
    params.validate()?;
    thermal.validate()?;
    integrator.validate()?;
    let weights = truncated_weights(thermal.boltzmann_trunc_nt, thermal.beta, params);
    let trajectories = run_all(weights.len(), |n| {
        propagate_level(initial, n as f64, params, integrator, t_grid, |y| {
            LevelFactors::level(n, y)
        })
        .map_err(map_failure(n))
    })?;
    let fingerprint = Fingerprint::new(Method::Boltzmann, params)
        .with_thermal(thermal)
        .with_integrator(integrator);
    let series = weighted_series(
        &trajectories,
        &weights,
        |n, s| spin_and_rest_energy(s, n, params),
        fingerprint,
    );
    let levels = trajectories
        .into_iter()
        .zip(&weights)
        .enumerate()
        .map(|(level, (trajectory, &weight))| EigenstateTrajectory {
            level,
            weight,
            trajectory,
        })
        .collect();
    Ok(BoltzmannRun {
        series,
        levels,
        boltzmann_tail: boltzmann_tail(thermal.boltzmann_trunc_nt, thermal.beta, params),
    })
}

#[derive(Debug, Clone)]
pub struct ThermalAverageRun {
    pub series: ObservableSeries,
    pub trajectory: Trajectory,
}

/// Single trajectory of the thermally averaged equations.
pub fn run_thermal_average(
    beta: f64,
    params: &ModelParams,
    integrator: &IntegratorConfig,
    t_grid: &[f64],
) -> Result<ThermalAverageRun> {
    run_thermal_average_from(
        default_initial(params, integrator.mode, 0.0),
        beta,
        params,
        integrator,
        t_grid,
    )
}

pub fn run_thermal_average_from(
    initial: D1State,
    beta: f64,
    params: &ModelParams,
    integrator: &IntegratorConfig,
    t_grid: &[f64],
) -> Result<ThermalAverageRun> {
    params.validate()?;
    integrator.validate()?;
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid("beta", format!("must be finite and positive, got {beta}")));
    }
    let nbar = mean_occupation(beta, params);
    let trajectory = propagate_level(initial, nbar, params, integrator, t_grid, |y| {
        LevelFactors::thermal(nbar, y)
    })?;
    let fingerprint = Fingerprint::new(Method::Ta, params)
        .with_beta(beta)
        .with_integrator(integrator);
    let series = weighted_series(
        std::slice::from_ref(&trajectory),
        &[1.0],
        |_, s| ta_energy(s, beta, params),
        fingerprint,
    );
    Ok(ThermalAverageRun { series, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::d1::{d1_rhs, propagate_with, D1State};
    use crate::model::boltzmann_weight;
    use crate::ode::uniform_grid;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn generic_state() -> D1State {
        let (a, b) = (c(0.5, -0.3), c(0.2, 0.7));
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        D1State::new(a / n, b / n, c(0.3, 0.15), c(-0.25, 0.4))
    }

    fn close(x: &D1State, y: &D1State, tol: f64) -> bool {
        x.to_array()
            .iter()
            .zip(&y.to_array())
            .all(|(u, v)| (u - v).norm() <= tol)
    }

    #[test]
    fn ground_level_is_d1() {
        let p = ModelParams::default().with_epsilon(0.2);
        let s = generic_state();
        for eom in [Eom::full(1e-12), Eom::simplified()] {
            assert!(close(&boltzmann_rhs(&s, 0, &p, eom), &d1_rhs(&s, &p, eom), 1e-12));
        }
    }

    #[test]
    fn cold_thermal_average_is_d1() {
        let p = ModelParams::default();
        let s = generic_state();
        let eom = Eom::full(1e-12);
        assert!(close(&ta_rhs(&s, 60.0, &p, eom), &d1_rhs(&s, &p, eom), 1e-8));
    }

    #[test]
    fn thermal_average_matches_weighted_levels() {
        let p = ModelParams::default();
        let s = generic_state();
        let beta = 1.0;
        for eom in [Eom::full(1e-12), Eom::simplified()] {
            let mut acc = [c(0.0, 0.0); 4];
            for n in 0..=40 {
                let w = boltzmann_weight(n, beta, &p);
                for (x, y) in acc.iter_mut().zip(boltzmann_rhs(&s, n, &p, eom).to_array()) {
                    *x += w * y;
                }
            }
            assert!(close(&ta_rhs(&s, beta, &p, eom), &D1State::from_array(&acc), 1e-6));
        }
    }

    #[test]
    fn norm_rate_vanishes() {
        let p = ModelParams::default();
        let s = generic_state();
        for n in 0..8 {
            for eom in [Eom::full(1e-12), Eom::simplified()] {
                assert!(s.norm_rate(&boltzmann_rhs(&s, n, &p, eom)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn energy_rate_vanishes_in_full_mode() {
        let p = ModelParams::default().with_lambda(0.4);
        let s = generic_state();
        for n in 0..8 {
            let rate = boltzmann_rhs(&s, n, &p, Eom::full(0.0));
            let h = 1e-6;
            let shift = |sign: f64| {
                D1State::from_array(&std::array::from_fn(|i| {
                    s.to_array()[i] + rate.to_array()[i] * (sign * h)
                }))
            };
            let energy = |x: &D1State| {
                let (es, er) = spin_and_rest_energy(x, n, &p);
                es + er
            };
            let de = (energy(&shift(1.0)) - energy(&shift(-1.0))) / (2.0 * h);
            assert!(de.abs() < 1e-8, "level {n}: dE/dt = {de}");
        }
    }

    #[test]
    fn initial_g_lies_on_the_constraint_circle() {
        let p = ModelParams::default();
        assert!((initial_g(&p) - 0.2).norm() < 1e-15);
        assert_eq!(initial_g(&p.with_lambda(0.0)), c(0.0, 0.0));
        let r = 0.5 * p.branch_displacement();
        for phase in [0.0, 0.7, 2.0, 3.1] {
            assert!(((initial_g_with_phase(&p, phase) - r).norm() - r).abs() < 1e-15);
        }
        assert!((initial_g_with_phase(&p, 0.0) - initial_g(&p)).norm() < 1e-15);
    }

    #[test]
    fn frozen_populations_without_tunneling() {
        let p = ModelParams::default().with_v(0.0);
        let grid = uniform_grid(30.0, 0.5).unwrap();
        let cfg = IntegratorConfig::default()
            .with_mode(Mode::Full)
            .with_tolerances(1e-12, 1e-12);
        let start = D1State::spin_up_displaced(c(0.0, 0.0), c(0.0, 0.0), 0.6);
        for n in [0, 3] {
            let tr = propagate_with(start, &grid, &cfg, |s| boltzmann_rhs(s, n, &p, cfg.eom())).unwrap();
            for s in &tr.states {
                assert!((s.a.norm_sqr() - start.a.norm_sqr()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn phase_frame_matches_direct_integration() {
        let p = ModelParams::default();
        let grid = uniform_grid(40.0, 0.5).unwrap();
        let cfg = IntegratorConfig::default().with_tolerances(1e-12, 1e-12);
        let thermal = ThermalConfig::default();
        let run = run_boltzmann(&p, &thermal, &cfg, &grid).unwrap();
        let start = default_initial(&p, cfg.mode, 0.0);
        for n in [1, 4] {
            let direct = propagate_with(start, &grid, &cfg, |s| boltzmann_rhs(s, n, &p, cfg.eom())).unwrap();
            for (x, y) in run.levels[n].trajectory.states.iter().zip(&direct.states) {
                assert!(close(x, y, 1e-8));
            }
        }
    }

    #[test]
    fn cold_run_is_ground_level() {
        let p = ModelParams::default();
        let grid = uniform_grid(50.0, 0.5).unwrap();
        let cfg = IntegratorConfig::default();
        let run = run_boltzmann(&p, &ThermalConfig::default().with_beta(60.0), &cfg, &grid).unwrap();
        let ground = run.levels[0].trajectory.pz();
        for (x, y) in run.series.pz.iter().zip(&ground) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(run.series.pz[0], 1.0);
    }
}
