//! Adaptive Dormand–Prince 5(4) integration of small complex ODE systems.
//!
//! Each complex component is treated as two real unknowns for error control.
//! Steps are clipped so that every requested output time is hit exactly,
//! which keeps the output free of interpolation error and makes the step
//! sequence a pure function of the inputs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Which form of the coherent-state equations to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Explicit variational equations. Divisions by `A` (and `B`) are
    /// regularised; near `|A| ≈ 0` the trajectories are not physically reliable.
    Full,
    /// Displacements follow the free driven-oscillator equations; no singular
    /// terms remain.
    Simplified,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Simplified => "simplified",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "simplified" => Ok(Mode::Simplified),
            other => Err(invalid("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Equation-of-motion variant plus the floor used to regularise `1/|A|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eom {
    pub mode: Mode,
    pub floor: f64,
}

impl Eom {
    pub fn simplified() -> Self {
        Self {
            mode: Mode::Simplified,
            floor: 0.0,
        }
    }

    pub fn full(floor: f64) -> Self {
        Self {
            mode: Mode::Full,
            floor,
        }
    }

    /// Regularised `1/|a|²`, i.e. `|a|² / (|a|⁴ + floor²)`. Zero at `a = 0`.
    pub fn inv_norm_sqr(&self, a: Complex64) -> f64 {
        let n = a.norm_sqr();
        if n == 0.0 {
            0.0
        } else {
            n / (n * n + self.floor * self.floor)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub regularization_floor: f64,
    pub mode: Mode,
    /// Hard cap on attempted steps per integration.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            max_step: 1.0,
            regularization_floor: 1e-12,
            mode: Mode::Simplified,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn eom(&self) -> Eom {
        Eom {
            mode: self.mode,
            floor: self.regularization_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(invalid("tolerance", "rel_tol and abs_tol must be positive"));
        }
        if self.max_step.is_nan() || self.max_step <= 0.0 {
            return Err(invalid("max_step", "must be positive"));
        }
        if self.regularization_floor.is_nan() || self.regularization_floor < 0.0 {
            return Err(invalid("regularization_floor", "must be non-negative"));
        }
        Ok(())
    }
}

/// Step bookkeeping of one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub states: Vec<[Complex64; N]>,
    pub stats: StepStats,
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (fifth minus fourth order weights).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

fn combine<const N: usize>(y: &[Complex64; N], h: f64, terms: &[(f64, &[Complex64; N])]) -> [Complex64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o += acc * h;
    }
    out
}

fn all_finite<const N: usize>(y: &[Complex64; N]) -> bool {
    y.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn scaled_error<const N: usize>(
    y: &[Complex64; N],
    y_new: &[Complex64; N],
    err: &[Complex64; N],
    cfg: &IntegratorConfig,
) -> f64 {
    let mut sum = 0.0;
    for i in 0..N {
        let sre = cfg.abs_tol + cfg.rel_tol * y[i].re.abs().max(y_new[i].re.abs());
        let sim = cfg.abs_tol + cfg.rel_tol * y[i].im.abs().max(y_new[i].im.abs());
        sum += (err[i].re / sre).powi(2) + (err[i].im / sim).powi(2);
    }
    (sum / (2 * N) as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    rhs: &mut F,
    t0: f64,
    y0: &[Complex64; N],
    f0: &[Complex64; N],
    cfg: &IntegratorConfig,
    stats: &mut StepStats,
) -> f64
where
    F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
{
    let scale = |z: &Complex64| (cfg.abs_tol + cfg.rel_tol * z.norm()).max(f64::MIN_POSITIVE);
    let d0 = (y0.iter().map(|z| (z.norm() / scale(z)).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d1 = (y0
        .iter()
        .zip(f0)
        .map(|(z, f)| (f.norm() / scale(z)).powi(2))
        .sum::<f64>()
        / N as f64)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.max_step);
    let y1 = combine(y0, h0, &[(1.0, f0)]);
    let f1 = rhs(t0 + h0, &y1);
    stats.evaluations += 1;
    let d2 = (y0
        .iter()
        .zip(f0.iter().zip(&f1))
        .map(|(z, (a, b))| ((b - a).norm() / scale(z)).powi(2))
        .sum::<f64>()
        / N as f64)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(cfg.max_step)
}

/// Integrates `dy/dt = rhs(t, y)` from `t_grid[0]` and returns the state at
/// every grid time (the first entry is `y0`).
pub fn integrate<const N: usize, F>(
    mut rhs: F,
    y0: [Complex64; N],
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
{
    cfg.validate()?;
    if t_grid.is_empty()
        || t_grid
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::InvalidTimeGrid);
    }
    let mut stats = StepStats::default();
    let mut states = Vec::with_capacity(t_grid.len());
    states.push(y0);

    let mut t = t_grid[0];
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    stats.evaluations += 1;
    if !all_finite(&k1) {
        return Err(Error::NonFiniteDerivative { t, state: y.to_vec() });
    }
    if t_grid.len() == 1 {
        return Ok(Solution { states, stats });
    }
    let mut h = initial_step(&mut rhs, t, &y, &k1, cfg, &mut stats);

    for &t_out in &t_grid[1..] {
        while t < t_out {
            if stats.accepted + stats.rejected >= cfg.max_steps {
                return Err(Error::StepSizeUnderflow {
                    t,
                    step: h,
                    state: y.to_vec(),
                });
            }
            let remaining = t_out - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let min_step = 1e-13 * t.abs().max(1.0);
            if step < min_step && !last {
                return Err(Error::StepSizeUnderflow {
                    t,
                    step,
                    state: y.to_vec(),
                });
            }

            let k2 = rhs(t + C2 * step, &combine(&y, step, &[(A21, &k1)]));
            let k3 = rhs(t + C3 * step, &combine(&y, step, &[(A31, &k1), (A32, &k2)]));
            let k4 = rhs(t + C4 * step, &combine(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = rhs(
                t + C5 * step,
                &combine(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = rhs(
                t + step,
                &combine(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = combine(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = rhs(t + step, &y_new);
            stats.evaluations += 6;

            let mut err = [Complex64::new(0.0, 0.0); N];
            for i in 0..N {
                err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * step;
            }
            let err_norm = scaled_error(&y, &y_new, &err, cfg);

            if !err_norm.is_finite() || !all_finite(&y_new) || !all_finite(&k7) {
                stats.rejected += 1;
                h = step * MIN_FACTOR;
                if h < min_step {
                    return Err(Error::NonFiniteDerivative { t, state: y.to_vec() });
                }
                continue;
            }

            let factor = if err_norm == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if err_norm <= 1.0 {
                stats.accepted += 1;
                t = if last { t_out } else { t + step };
                y = y_new;
                k1 = k7;
                // A clipped final step says nothing about the natural step size.
                if !last {
                    h = (step * factor).min(cfg.max_step);
                } else {
                    h = h.max(step * factor).min(cfg.max_step);
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
            }
        }
        states.push(y);
    }
    Ok(Solution { states, stats })
}

/// Uniform grid `0, dt, 2dt, …` up to and including `t_max` (to rounding).
pub fn uniform_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && t_max >= 0.0 && t_max.is_finite()) {
        return Err(invalid("dt_out", "grid needs dt > 0 and a finite t_max >= 0"));
    }
    let count = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| i as f64 * dt).collect())
}
