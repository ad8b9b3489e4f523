//! Zero-temperature Davydov D1 dynamics.
//!
//! The trial state is `A |+⟩ D[f] |0⟩ + B |−⟩ D[g] |0⟩`. Its variational
//! equations of motion, made explicit by dividing the displacement equations
//! by `A` (resp. `B`), are
//!
//! ```text
//! ḟ = −iωf − iλ/2ħ − (iV/ħ) (B/A) (g − f) e^{f*g} S
//! ġ = −iωg + iλ/2ħ − (iV/ħ) (A/B) (f − g) e^{g*f} S
//! Ȧ = −i A Im(ḟ f*) − (i/ħ) [V B e^{f*g} S + ħω A |f|² + (λ/2) A (f + f*) + (ε/2) A]
//! Ḃ = −i B Im(ġ g*) − (i/ħ) [V A e^{g*f} S + ħω B |g|² − (λ/2) B (g + g*) − (ε/2) B]
//! ```
//!
//! with `S = e^{−(|f|²+|g|²)/2}`. In [`Mode::Simplified`] the `V` terms of the
//! displacement equations are dropped.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::weighted_series;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::observables::{Fingerprint, Method, ObservableSeries};
use crate::ode::{integrate, Eom, IntegratorConfig, Mode, StepStats};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Below this modulus an amplitude counts as touching the singular set.
pub const SINGULAR_PROXIMITY: f64 = 1e-6;

/// Largest tolerated drift of `|A|² + |B|²` before a trajectory is flagged.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Variational parameters of one D1 trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D1State {
    pub a: Complex64,
    pub b: Complex64,
    pub f: Complex64,
    pub g: Complex64,
}

impl D1State {
    pub fn new(a: Complex64, b: Complex64, f: Complex64, g: Complex64) -> Self {
        Self { a, b, f, g }
    }

    /// Spin up, oscillator in its ground state: `A = 1, B = 0, f = g = 0`.
    pub fn spin_up() -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self::new(Complex64::new(1.0, 0.0), zero, zero, zero)
    }

    /// Spin-up start with displacements `f(0) = f0`, `g(0) = g0` and an
    /// optional real admixture `δ` of the lower branch, `B(0) = δ`.
    pub fn spin_up_displaced(f0: Complex64, g0: Complex64, perturbation: f64) -> Self {
        let b = perturbation.clamp(-1.0, 1.0);
        Self::new(
            Complex64::new((1.0 - b * b).sqrt(), 0.0),
            Complex64::new(b, 0.0),
            f0,
            g0,
        )
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }

    /// Population difference `|A|² − |B|²`.
    pub fn pz(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    pub fn to_array(&self) -> [Complex64; 4] {
        [self.a, self.b, self.f, self.g]
    }

    pub fn from_array(y: &[Complex64; 4]) -> Self {
        Self::new(y[0], y[1], y[2], y[3])
    }

    /// Overlap prefactor `e^{−(|f|²+|g|²)/2} e^{f*g} = ⟨0|D†_f D_g|0⟩`.
    pub fn coherent_overlap(&self) -> Complex64 {
        (self.f.conj() * self.g - 0.5 * (self.f.norm_sqr() + self.g.norm_sqr())).exp()
    }

    /// Rate of change of `|A|² + |B|²` implied by the derivative `rate`.
    pub fn norm_rate(&self, rate: &D1State) -> f64 {
        2.0 * (self.a.conj() * rate.a + self.b.conj() * rate.b).re
    }
}

/// Which spin branch sits on the singular set of the explicit equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Up,
    Down,
}

/// Reports whether a Full-mode derivative at this state divides by a nearly
/// vanishing amplitude.
pub fn singularity_proximity(state: &D1State) -> Option<Branch> {
    if state.a.norm() < SINGULAR_PROXIMITY {
        Some(Branch::Up)
    } else if state.b.norm() < SINGULAR_PROXIMITY {
        Some(Branch::Down)
    } else {
        None
    }
}

/// Driven-oscillator parts `−iωf − iλ/2ħ` and `−iωg + iλ/2ħ`.
pub(crate) fn free_displacement_rates(state: &D1State, params: &ModelParams) -> (Complex64, Complex64) {
    let drive = I * (params.lambda / (2.0 * params.hbar));
    (-I * params.omega * state.f - drive, -I * params.omega * state.g + drive)
}

/// Time derivatives of the D1 parameters.
pub fn d1_rhs(state: &D1State, params: &ModelParams, eom: Eom) -> D1State {
    let D1State { a, b, f, g } = *state;
    let hbar = params.hbar;
    let overlap = state.coherent_overlap();
    let coupling = params.v * overlap;
    let (mut fdot, mut gdot) = free_displacement_rates(state, params);
    if eom.mode == Mode::Full {
        // B/A = B A* / |A|², with the regularised inverse.
        fdot += -I * coupling * (g - f) * (b * a.conj()) * (eom.inv_norm_sqr(a) / hbar);
        gdot += -I * coupling.conj() * (f - g) * (a * b.conj()) * (eom.inv_norm_sqr(b) / hbar);
    }
    let half_eps = 0.5 * params.epsilon;
    let half_lam = 0.5 * params.lambda;
    let adot = -I * a * (fdot * f.conj()).im
        - (I / hbar) * (coupling * b + a * (params.quantum() * f.norm_sqr() + half_lam * 2.0 * f.re + half_eps));
    let bdot = -I * b * (gdot * g.conj()).im
        - (I / hbar) * (coupling.conj() * a + b * (params.quantum() * g.norm_sqr() - half_lam * 2.0 * g.re - half_eps));
    D1State::new(adot, bdot, fdot, gdot)
}

/// Variational energy `⟨Ψ|H|Ψ⟩` of a D1 state.
pub fn d1_energy(state: &D1State, params: &ModelParams) -> f64 {
    let (spin, rest) = d1_energy_parts(state, params);
    spin + rest
}

/// Energy split into the tunneling part and everything else.
pub fn d1_energy_parts(state: &D1State, params: &ModelParams) -> (f64, f64) {
    let D1State { a, b, f, g } = *state;
    let spin = 2.0 * params.v * (a.conj() * b * state.coherent_overlap()).re;
    let na = a.norm_sqr();
    let nb = b.norm_sqr();
    let rest = 0.5 * params.epsilon * (na - nb)
        + params.quantum() * (na * f.norm_sqr() + nb * g.norm_sqr())
        + params.lambda * (na * f.re - nb * g.re);
    (spin, rest)
}

/// Sampled trajectory plus health diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<D1State>,
    pub stats: StepStats,
    /// `max_t | |A|² + |B|² − 1 |`.
    pub max_norm_drift: f64,
    /// Output times at which the state sat within [`SINGULAR_PROXIMITY`] of
    /// `A = 0` or `B = 0` (Full mode only).
    pub near_singular: Vec<(f64, Branch)>,
}

impl Trajectory {
    pub fn norm_flagged(&self) -> bool {
        self.max_norm_drift > NORM_DRIFT_LIMIT
    }

    pub fn pz(&self) -> Vec<f64> {
        self.states.iter().map(D1State::pz).collect()
    }
}

/// Integrates any D1-shaped equation of motion on `t_grid`.
pub fn propagate_with<F>(initial: D1State, t_grid: &[f64], config: &IntegratorConfig, rhs: F) -> Result<Trajectory>
where
    F: Fn(&D1State) -> D1State,
{
    let norm0 = initial.norm_sqr();
    if (norm0 - 1.0).abs() > 1e-12 {
        return Err(crate::error::invalid(
            "initial",
            format!("|A|² + |B|² must equal 1, got {norm0}"),
        ));
    }
    let solution = integrate(
        |_, y: &[Complex64; 4]| rhs(&D1State::from_array(y)).to_array(),
        initial.to_array(),
        t_grid,
        config,
    )?;
    let states: Vec<D1State> = solution.states.iter().map(D1State::from_array).collect();
    let max_norm_drift = states.iter().map(|s| (s.norm_sqr() - 1.0).abs()).fold(0.0, f64::max);
    let near_singular = if config.mode == Mode::Full {
        t_grid
            .iter()
            .zip(&states)
            .filter_map(|(&t, s)| singularity_proximity(s).map(|b| (t, b)))
            .collect()
    } else {
        Vec::new()
    };
    Ok(Trajectory {
        times: t_grid.to_vec(),
        states,
        stats: solution.stats,
        max_norm_drift,
        near_singular,
    })
}

/// Like [`propagate_with`], but integrates in a frame where `A` and `B` rotate
/// at the common rate `rate` and restores that phase exactly at the output
/// times. The equations must be invariant under a shared phase of `A` and `B`.
/// Removing a fast common rotation keeps the explicit step error from
/// leaking into the norm.
pub fn propagate_rotating<F>(
    initial: D1State,
    rate: f64,
    t_grid: &[f64],
    config: &IntegratorConfig,
    rhs: F,
) -> Result<Trajectory>
where
    F: Fn(&D1State) -> D1State,
{
    let mut tr = propagate_with(initial, t_grid, config, |s| {
        let mut d = rhs(s);
        d.a += Complex64::new(0.0, rate) * s.a;
        d.b += Complex64::new(0.0, rate) * s.b;
        d
    })?;
    for (s, &t) in tr.states.iter_mut().zip(t_grid) {
        let phase = Complex64::from_polar(1.0, -rate * t);
        s.a *= phase;
        s.b *= phase;
    }
    Ok(tr)
}

/// Common phase rate of `A` and `B`, `−Im(Ȧ A* + Ḃ B*) / (|A|² + |B|²)`.
pub fn common_phase_rate(state: &D1State, rate: &D1State) -> f64 {
    -(rate.a * state.a.conj() + rate.b * state.b.conj()).im / state.norm_sqr()
}

/// Propagates a zero-temperature D1 trajectory.
pub fn propagate_d1(
    initial: D1State,
    params: &ModelParams,
    config: &IntegratorConfig,
    t_grid: &[f64],
) -> Result<Trajectory> {
    params.validate()?;
    let eom = config.eom();
    propagate_with(initial, t_grid, config, |s| d1_rhs(s, params, eom))
}

/// Zero-temperature run with its observable series.
#[derive(Debug, Clone)]
pub struct D1Run {
    pub series: ObservableSeries,
    pub trajectory: Trajectory,
}

pub fn run_d1(params: &ModelParams, integrator: &IntegratorConfig, t_grid: &[f64]) -> Result<D1Run> {
    run_d1_from(
        default_initial(params, integrator.mode, 0.0),
        params,
        integrator,
        t_grid,
    )
}

pub fn run_d1_from(
    initial: D1State,
    params: &ModelParams,
    integrator: &IntegratorConfig,
    t_grid: &[f64],
) -> Result<D1Run> {
    let trajectory = propagate_d1(initial, params, integrator, t_grid)?;
    let fingerprint = Fingerprint::new(Method::D1, params).with_integrator(integrator);
    let series = weighted_series(
        std::slice::from_ref(&trajectory),
        &[1.0],
        |_, s| d1_energy_parts(s, params),
        fingerprint,
    );
    Ok(D1Run { series, trajectory })
}

/// Standard start for a given mode: `g(0) = λ/ħω` in Simplified mode (keeps the
/// oscillator-plus-coupling energy constant), `g(0) = 0` otherwise.
pub fn default_initial(params: &ModelParams, mode: Mode, perturbation: f64) -> D1State {
    let zero = Complex64::new(0.0, 0.0);
    let g0 = match mode {
        Mode::Simplified => Complex64::new(params.branch_displacement(), 0.0),
        Mode::Full => zero,
    };
    D1State::spin_up_displaced(zero, g0, perturbation)
}

pub(crate) fn map_failure(index: usize) -> impl FnOnce(Error) -> Error {
    move |source| Error::TrajectoryFailed {
        index,
        source: Box::new(source),
    }
}
