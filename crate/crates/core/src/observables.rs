//! Common observable container, cross-method comparison metrics and the
//! sign-sampling delta diagnostic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ThermalConfig};
use crate::ode::IntegratorConfig;
use crate::stochastic::sample_signs;

/// Default agreement threshold on `|ΔP_z|`.
pub const AGREEMENT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    D1,
    Ta,
    Stochastic,
    Pfunction,
    Boltzmann,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Exact,
        Method::D1,
        Method::Ta,
        Method::Stochastic,
        Method::Pfunction,
        Method::Boltzmann,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::D1 => "d1",
            Method::Ta => "ta",
            Method::Stochastic => "stochastic",
            Method::Pfunction => "pfunction",
            Method::Boltzmann => "boltzmann",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Every input that determines a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub method: Method,
    pub params: ModelParams,
    pub thermal: Option<ThermalConfig>,
    /// Inverse temperature for methods that need no truncation orders.
    pub beta: Option<f64>,
    pub integrator: Option<IntegratorConfig>,
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
}

impl Fingerprint {
    pub fn new(method: Method, params: &ModelParams) -> Self {
        Self {
            method,
            params: *params,
            thermal: None,
            beta: None,
            integrator: None,
            seed: None,
            realizations: None,
        }
    }

    pub fn with_thermal(mut self, thermal: &ThermalConfig) -> Self {
        self.thermal = Some(*thermal);
        self
    }

    pub fn with_integrator(mut self, integrator: &IntegratorConfig) -> Self {
        self.integrator = Some(*integrator);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn with_sampling(mut self, seed: u64, realizations: usize) -> Self {
        self.seed = Some(seed);
        self.realizations = Some(realizations);
        self
    }

    /// Flat `key = value` listing, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut out = vec![
            ("method".to_string(), self.method.to_string()),
            ("epsilon".into(), p.epsilon.to_string()),
            ("v".into(), p.v.to_string()),
            ("omega".into(), p.omega.to_string()),
            ("lambda".into(), p.lambda.to_string()),
            ("hbar".into(), p.hbar.to_string()),
            ("kb".into(), p.kb.to_string()),
        ];
        if let Some(t) = &self.thermal {
            out.push(("beta".into(), t.beta.to_string()));
            out.push(("fock_trunc_m".into(), t.fock_trunc_m.to_string()));
            out.push(("boltzmann_trunc_nt".into(), t.boltzmann_trunc_nt.to_string()));
            out.push(("expand_trunc_jmax".into(), t.expand_trunc_jmax.to_string()));
        } else if let Some(beta) = self.beta {
            out.push(("beta".into(), beta.to_string()));
        }
        if let Some(i) = &self.integrator {
            out.push(("mode".into(), i.mode.to_string()));
            out.push(("rel_tol".into(), i.rel_tol.to_string()));
            out.push(("abs_tol".into(), i.abs_tol.to_string()));
            out.push(("max_step".into(), i.max_step.to_string()));
            out.push(("regularization_floor".into(), i.regularization_floor.to_string()));
        }
        if let Some(seed) = self.seed {
            out.push(("seed".into(), seed.to_string()));
        }
        if let Some(n) = self.realizations {
            out.push(("realizations".into(), n.to_string()));
        }
        out
    }
}

/// Time series of the observables produced by every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub pz: Vec<f64>,
    /// Standard error of `pz`; zero for deterministic methods.
    pub pz_stderr: Vec<f64>,
    pub norm: Vec<f64>,
    pub e_spin: Vec<f64>,
    pub e_rest: Vec<f64>,
    pub e_total: Vec<f64>,
    pub fingerprint: Fingerprint,
}

impl ObservableSeries {
    pub fn method(&self) -> Method {
        self.fingerprint.method
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Keeps the samples with `t <= t_max`.
    pub fn truncated(&self, t_max: f64) -> Self {
        let k = self.times.iter().take_while(|&&t| t <= t_max + 1e-12).count();
        let cut = |v: &Vec<f64>| v[..k].to_vec();
        Self {
            times: cut(&self.times),
            pz: cut(&self.pz),
            pz_stderr: cut(&self.pz_stderr),
            norm: cut(&self.norm),
            e_spin: cut(&self.e_spin),
            e_rest: cut(&self.e_rest),
            e_total: cut(&self.e_total),
            fingerprint: self.fingerprint.clone(),
        }
    }

    /// Checks the `pz` band and norm window expected of an accepted run.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, (&pz, &se)) in self.pz.iter().zip(&self.pz_stderr).enumerate() {
            if pz.abs() > 1.0 + 3.0 * se + 1e-9 {
                out.push(format!("pz = {pz} outside [-1, 1] at t = {}", self.times[i]));
                break;
            }
        }
        let drift = self.max_norm_drift();
        if drift > 1e-4 {
            out.push(format!("norm drift {drift:e} exceeds 1e-4"));
        }
        out
    }
}

/// Distance metrics between two series on the same grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub sup_norm: f64,
    pub rms: f64,
    pub first_divergence_time: Option<f64>,
}

pub fn compare_series(a: &ObservableSeries, b: &ObservableSeries, threshold: f64) -> Result<Comparison> {
    if a.times.len() != b.times.len()
        || a.times
            .iter()
            .zip(&b.times)
            .any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0))
    {
        return Err(Error::GridMismatch {
            left: a.times.len(),
            right: b.times.len(),
        });
    }
    let diffs: Vec<f64> = a.pz.iter().zip(&b.pz).map(|(x, y)| (x - y).abs()).collect();
    let sup_norm = diffs.iter().copied().fold(0.0, f64::max);
    let rms = if diffs.is_empty() {
        0.0
    } else {
        (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt()
    };
    let first_divergence_time = diffs.iter().position(|&d| d > threshold).map(|i| a.times[i]);
    Ok(Comparison {
        sup_norm,
        rms,
        first_divergence_time,
    })
}

/// Empirical `(1/N) Σ_i s_n^i s_m^i` over `samples` sign realizations.
pub fn kron_delta_demo(samples: usize, levels: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut acc = vec![vec![0.0; levels]; levels];
    for i in 0..samples {
        let s = sample_signs(levels, seed, i as u64);
        for n in 0..levels {
            for m in 0..levels {
                acc[n][m] += f64::from(s[n] * s[m]);
            }
        }
    }
    for row in &mut acc {
        for x in row.iter_mut() {
            *x /= samples as f64;
        }
    }
    acc
}

/// Sample standard deviation of the off-diagonal entries of a square matrix.
pub fn off_diagonal_std(matrix: &[Vec<f64>]) -> f64 {
    let vals: Vec<f64> = matrix
        .iter()
        .enumerate()
        .flat_map(|(n, row)| row.iter().enumerate().filter(move |(m, _)| *m != n).map(|(_, &x)| x))
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Peaks of `|P_z|` as `(time, height)`, refined by a parabola through the
/// three samples around each local maximum.
pub fn abs_peaks(series: &ObservableSeries) -> Vec<(f64, f64)> {
    let y: Vec<f64> = series.pz.iter().map(|p| p.abs()).collect();
    let t = &series.times;
    let mut out = Vec::new();
    if y.len() < 3 {
        return out;
    }
    for i in 1..y.len() - 1 {
        if y[i] > y[i - 1] && y[i] >= y[i + 1] {
            let denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
            let shift = if denom != 0.0 {
                0.5 * (y[i - 1] - y[i + 1]) / denom
            } else {
                0.0
            };
            let dt = t[i + 1] - t[i];
            let height = y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift;
            out.push((t[i] + shift * dt, height));
        }
    }
    out
}

/// Largest `|P_z|` with `t` in `[from, to]`.
pub fn envelope_in(series: &ObservableSeries, from: f64, to: f64) -> f64 {
    series
        .times
        .iter()
        .zip(&series.pz)
        .filter(|(t, _)| **t >= from && **t <= to)
        .map(|(_, p)| p.abs())
        .fold(0.0, f64::max)
}

/// Drop of the oscillation envelope: envelope over the first `window` minus
/// envelope over the last `window` of the series.
pub fn envelope_decay(series: &ObservableSeries, window: f64) -> f64 {
    let t0 = series.times[0];
    let t1 = *series.times.last().unwrap();
    envelope_in(series, t0, t0 + window) - envelope_in(series, t1 - window, t1)
}

/// Time of the first revival of the `|P_z|` envelope: the highest-lying peak
/// after the first local minimum of the peak heights.
pub fn recurrence_time(series: &ObservableSeries) -> Option<f64> {
    let peaks = abs_peaks(series);
    let first_min =
        (1..peaks.len().saturating_sub(1)).find(|&i| peaks[i].1 < peaks[i - 1].1 && peaks[i].1 <= peaks[i + 1].1)?;
    (first_min + 1..peaks.len())
        .find(|&i| i + 1 == peaks.len() || peaks[i].1 >= peaks[i + 1].1)
        .filter(|&i| i + 1 < peaks.len())
        .map(|i| peaks[i].0)
}

/// Mean and standard error over realizations at each time.
pub(crate) fn ensemble_mean(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let len = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; len];
    for row in rows {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut stderr = vec![0.0; len];
    if n > 1 {
        for row in rows {
            for ((s, x), m) in stderr.iter_mut().zip(row).zip(&mean) {
                *s += (x - m).powi(2);
            }
        }
        for s in &mut stderr {
            *s = (*s / (n - 1) as f64 / n as f64).sqrt();
        }
    }
    (mean, stderr)
}
