//! Run configuration: command-line flags, an optional TOML file with the same
//! keys, and the validated result.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use rabi_thermal::{IntegratorConfig, Mode, ModelParams, ThermalConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Exact,
    D1,
    Ta,
    Stochastic,
    Pfunction,
    Boltzmann,
    CompareAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Full,
    Simplified,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => Mode::Full,
            ModeArg::Simplified => Mode::Simplified,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Every setting as given by the user; unset fields fall back to the config
/// file, then to the defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunArgs {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Spin bias ε [default: 0].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Tunneling element V [default: -0.05].
    #[arg(long)]
    pub v: Option<f64>,
    /// Oscillator frequency ω [default: 1].
    #[arg(long)]
    pub omega: Option<f64>,
    /// Coupling λ [default: 0.2].
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub kb: Option<f64>,
    /// Oscillator temperature [default: 1]; d1 also accepts 0.
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Sign realizations of the stochastic method [default: 100].
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Coherent-state samples of the P-function method [default: 100].
    #[arg(long)]
    pub pfunction_samples: Option<usize>,
    /// Fock levels in each sign-sampled thermal state [default: 7].
    #[arg(long)]
    pub fock_trunc_m: Option<usize>,
    /// Highest thermal level in Boltzmann sums [default: 7].
    #[arg(long)]
    pub boltzmann_trunc_nt: Option<usize>,
    /// Fock levels per spin branch of the exact basis [default: 14].
    #[arg(long)]
    pub expand_trunc_jmax: Option<usize>,
    /// End of the time grid [default: 200].
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Output spacing [default: 0.1].
    #[arg(long)]
    pub dt_out: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file, or directory for compare-all; stdout if omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Integrator relative tolerance [default: 1e-8].
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Integrator absolute tolerance [default: 1e-8].
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Initial `B` amplitude, which moves Full-mode starts off `B = 0` [default: 0].
    #[arg(long)]
    pub b_perturbation: Option<f64>,
    /// Exit with status 0 even if invariant warnings were raised.
    #[arg(long)]
    #[serde(default)]
    pub allow_warnings: bool,
}

macro_rules! prefer {
    ($a:ident, $b:ident; $($field:ident),*) => {
        RunArgs {
            config: $a.config,
            allow_warnings: $a.allow_warnings || $b.allow_warnings,
            $($field: $a.$field.or($b.$field),)*
        }
    };
}

impl RunArgs {
    /// Fields set here win over those set in `file`.
    pub fn over(self, file: RunArgs) -> RunArgs {
        prefer!(self, file; method, epsilon, v, omega, lambda, hbar, kb, temperature, mode,
            realizations, pfunction_samples, fock_trunc_m, boltzmann_trunc_nt, expand_trunc_jmax,
            t_max, dt_out, seed, output, format, rel_tol, abs_tol, b_perturbation)
    }

    pub fn from_toml_file(path: &Path) -> anyhow::Result<RunArgs> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Merges the config file named by `--config`, if any, and validates.
    pub fn resolve(self) -> anyhow::Result<RunConfig> {
        let merged = match &self.config {
            Some(path) => {
                let file = RunArgs::from_toml_file(path)?;
                self.over(file)
            }
            None => self,
        };
        RunConfig::try_from(merged)
    }
}

/// Validated settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: MethodArg,
    pub params: ModelParams,
    /// `None` only for d1 at zero temperature.
    pub beta: Option<f64>,
    pub thermal: ThermalConfig,
    pub integrator: IntegratorConfig,
    pub realizations: usize,
    pub pfunction_samples: usize,
    pub t_max: f64,
    pub dt_out: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub b_perturbation: f64,
    pub allow_warnings: bool,
}

impl TryFrom<RunArgs> for RunConfig {
    type Error = anyhow::Error;

    fn try_from(a: RunArgs) -> anyhow::Result<Self> {
        let d = ModelParams::default();
        let params = ModelParams {
            epsilon: a.epsilon.unwrap_or(d.epsilon),
            v: a.v.unwrap_or(d.v),
            omega: a.omega.unwrap_or(d.omega),
            lambda: a.lambda.unwrap_or(d.lambda),
            hbar: a.hbar.unwrap_or(d.hbar),
            kb: a.kb.unwrap_or(d.kb),
        };
        params.validate()?;
        let Some(method) = a.method else {
            bail!("invalid `method`: required");
        };
        let temperature = a.temperature.unwrap_or(1.0);
        let beta = if method == MethodArg::D1 && temperature == 0.0 {
            None
        } else if temperature.is_finite() && temperature > 0.0 {
            Some(params.beta(temperature)?)
        } else {
            bail!("invalid `temperature`: must be positive, got {temperature}");
        };
        let td = ThermalConfig::default();
        let thermal = ThermalConfig {
            beta: beta.unwrap_or(td.beta),
            fock_trunc_m: a.fock_trunc_m.unwrap_or(td.fock_trunc_m),
            boltzmann_trunc_nt: a.boltzmann_trunc_nt.unwrap_or(td.boltzmann_trunc_nt),
            expand_trunc_jmax: a.expand_trunc_jmax.unwrap_or(td.expand_trunc_jmax),
        };
        thermal.validate()?;
        let id = IntegratorConfig::default();
        let integrator = IntegratorConfig {
            mode: a.mode.map(Mode::from).unwrap_or(id.mode),
            rel_tol: a.rel_tol.unwrap_or(id.rel_tol),
            abs_tol: a.abs_tol.unwrap_or(id.abs_tol),
            ..id
        };
        integrator.validate()?;
        let positive = |name: &str, x: f64| -> anyhow::Result<f64> {
            if x.is_finite() && x > 0.0 {
                Ok(x)
            } else {
                bail!("invalid `{name}`: must be positive, got {x}")
            }
        };
        let t_max = positive("t-max", a.t_max.unwrap_or(200.0))?;
        let dt_out = positive("dt-out", a.dt_out.unwrap_or(0.1))?;
        let realizations = a.realizations.unwrap_or(100);
        let pfunction_samples = a.pfunction_samples.unwrap_or(100);
        if realizations == 0 {
            bail!("invalid `realizations`: must be at least 1");
        }
        if pfunction_samples == 0 {
            bail!("invalid `pfunction-samples`: must be at least 1");
        }
        let b_perturbation = a.b_perturbation.unwrap_or(0.0);
        if b_perturbation.is_nan() || b_perturbation.abs() >= 1.0 {
            bail!("invalid `b-perturbation`: must lie in (-1, 1), got {b_perturbation}");
        }
        if method == MethodArg::CompareAll && a.output.is_none() {
            bail!("invalid `output`: compare-all needs a directory");
        }
        Ok(RunConfig {
            method,
            params,
            beta,
            thermal,
            integrator,
            realizations,
            pfunction_samples,
            t_max,
            dt_out,
            seed: a.seed.unwrap_or(0),
            output: a.output,
            format: a.format.unwrap_or(Format::Csv),
            b_perturbation,
            allow_warnings: a.allow_warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_parameters() {
        let c = RunConfig::try_from(RunArgs {
            method: Some(MethodArg::Exact),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(c.params, ModelParams::default());
        assert_eq!(c.thermal, ThermalConfig::default());
        assert_eq!(c.beta, Some(1.0));
        assert_eq!((c.realizations, c.pfunction_samples), (100, 100));
        assert_eq!((c.t_max, c.dt_out), (200.0, 0.1));
    }

    #[test]
    fn flags_override_file() {
        let file: RunArgs = toml::from_str("lambda = 0.5\nt-max = 10.0\nmethod = \"ta\"\n").unwrap();
        let flags = RunArgs {
            lambda: Some(0.3),
            ..Default::default()
        };
        let c = RunConfig::try_from(flags.over(file)).unwrap();
        assert_eq!(c.params.lambda, 0.3);
        assert_eq!(c.t_max, 10.0);
        assert_eq!(c.method, MethodArg::Ta);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(toml::from_str::<RunArgs>("lamda = 0.5").is_err());
    }

    #[test]
    fn zero_temperature_only_for_d1() {
        let at = |method| RunArgs {
            method: Some(method),
            temperature: Some(0.0),
            ..Default::default()
        };
        assert_eq!(RunConfig::try_from(at(MethodArg::D1)).unwrap().beta, None);
        let err = RunConfig::try_from(at(MethodArg::Ta)).unwrap_err();
        assert!(err.to_string().contains("temperature"));
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::try_from(RunArgs {
            method: Some(MethodArg::Exact),
            dt_out: Some(-1.0),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("dt-out"));
        let err = RunConfig::try_from(RunArgs {
            method: Some(MethodArg::Exact),
            boltzmann_trunc_nt: Some(20),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("boltzmann_trunc_nt"));
    }
}
