//! Executes a [`RunConfig`] and writes its outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rabi_thermal::boltzmann::{run_boltzmann_from, run_thermal_average_from};
use rabi_thermal::d1::{default_initial, run_d1_from, Trajectory, NORM_DRIFT_LIMIT};
use rabi_thermal::exact::population_difference_qm;
use rabi_thermal::io::{to_csv, to_json};
use rabi_thermal::observables::AGREEMENT_THRESHOLD;
use rabi_thermal::ode::uniform_grid;
use rabi_thermal::pfunction::run_pfunction_ensemble_from;
use rabi_thermal::stochastic::run_stochastic_ensemble_from;
use rabi_thermal::{compare_series, Method, ObservableSeries};
use serde::Serialize;

use crate::config::{Format, MethodArg, RunConfig};

/// A finished method with the invariant warnings it raised.
#[derive(Debug, Clone)]
pub struct MethodOutput {
    /// `method` for the exact reference, `method-mode` otherwise.
    pub label: String,
    pub series: ObservableSeries,
    pub warnings: Vec<String>,
}

/// One row of the compare-all summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub rank: usize,
    pub method: String,
    pub sup_norm: f64,
    pub rms: f64,
    pub first_divergence_time: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub warnings: Vec<String>,
    pub summary: Vec<SummaryRow>,
    /// Text written to stdout when no output path was given.
    pub stdout: String,
}

fn trajectory_warnings<'a>(label: &str, trajectories: impl IntoIterator<Item = &'a Trajectory>) -> Vec<String> {
    let mut drift: f64 = 0.0;
    let mut flagged = 0;
    let mut singular = 0;
    for t in trajectories {
        drift = drift.max(t.max_norm_drift);
        flagged += usize::from(t.norm_flagged());
        singular += usize::from(!t.near_singular.is_empty());
    }
    let mut out = Vec::new();
    if flagged > 0 {
        out.push(format!(
            "{label}: {flagged} trajectories exceed norm drift {NORM_DRIFT_LIMIT:e} (max {drift:.2e})"
        ));
    }
    if singular > 0 {
        out.push(format!("{label}: {singular} trajectories came close to A = 0 or B = 0"));
    }
    out
}

/// Runs one method on the configured grid.
pub fn run_method(cfg: &RunConfig, method: Method) -> anyhow::Result<MethodOutput> {
    let grid = uniform_grid(cfg.t_max, cfg.dt_out)?;
    let p = &cfg.params;
    let integ = &cfg.integrator;
    let thermal = &cfg.thermal;
    let start = default_initial(p, integ.mode, cfg.b_perturbation);
    let label = match method {
        Method::Exact => method.to_string(),
        _ => format!("{method}-{}", integ.mode),
    };
    let beta = || cfg.beta.context("invalid `temperature`: must be positive");
    let (series, mut warnings) = match method {
        Method::Exact => {
            let run = population_difference_qm(beta()?, p, thermal, &grid)?;
            let mut w = Vec::new();
            if run.truncation_warning() {
                w.push(format!(
                    "exact: top two Fock levels reach population {:.2e}; raise expand-trunc-jmax",
                    run.weighted_top_population
                ));
            }
            (run.series, w)
        }
        Method::D1 => {
            let run = run_d1_from(start, p, integ, &grid)?;
            let w = trajectory_warnings(&label, [&run.trajectory]);
            (run.series, w)
        }
        Method::Ta => {
            let run = run_thermal_average_from(start, beta()?, p, integ, &grid)?;
            let w = trajectory_warnings(&label, [&run.trajectory]);
            (run.series, w)
        }
        Method::Stochastic => {
            let run =
                run_stochastic_ensemble_from(cfg.realizations, cfg.seed, p, thermal, integ, &grid, cfg.b_perturbation)?;
            let w = trajectory_warnings(&label, &run.trajectories);
            (run.series, w)
        }
        Method::Pfunction => {
            let run = run_pfunction_ensemble_from(
                cfg.pfunction_samples,
                cfg.seed,
                beta()?,
                p,
                integ,
                &grid,
                cfg.b_perturbation,
            )?;
            let w = trajectory_warnings(&label, &run.trajectories);
            (run.series, w)
        }
        Method::Boltzmann => {
            let run = run_boltzmann_from(start, p, thermal, integ, &grid)?;
            let w = trajectory_warnings(&label, run.levels.iter().map(|l| &l.trajectory));
            (run.series, w)
        }
    };
    warnings.extend(
        series
            .invariant_violations()
            .into_iter()
            .map(|v| format!("{label}: {v}")),
    );
    Ok(MethodOutput {
        label,
        series,
        warnings,
    })
}

fn render(series: &ObservableSeries, format: Format) -> anyhow::Result<String> {
    Ok(match format {
        Format::Csv => to_csv(series),
        Format::Json => to_json(series)? + "\n",
    })
}

/// Ranks every non-reference output by sup-norm distance to `reference`.
pub fn summarize(reference: &MethodOutput, others: &[MethodOutput]) -> anyhow::Result<Vec<SummaryRow>> {
    let mut rows = others
        .iter()
        .map(|o| {
            let c = compare_series(&reference.series, &o.series, AGREEMENT_THRESHOLD)?;
            Ok(SummaryRow {
                rank: 0,
                method: o.label.clone(),
                sup_norm: c.sup_norm,
                rms: c.rms,
                first_divergence_time: c.first_divergence_time,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.sup_norm.total_cmp(&b.sup_norm));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(rows)
}

pub fn summary_text(rows: &[SummaryRow], format: Format) -> anyhow::Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(rows)? + "\n",
        Format::Csv => {
            let mut out = format!("# reference = exact\n# threshold = {AGREEMENT_THRESHOLD}\n");
            out.push_str("rank,method,sup_norm,rms,first_divergence_time\n");
            for r in rows {
                let first = r.first_divergence_time.map(|t| format!("{t:.16e}")).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{:.16e},{:.16e},{first}\n",
                    r.rank, r.method, r.sup_norm, r.rms
                ));
            }
            out
        }
    })
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))
}

fn single(method: MethodArg) -> Option<Method> {
    Some(match method {
        MethodArg::Exact => Method::Exact,
        MethodArg::D1 => Method::D1,
        MethodArg::Ta => Method::Ta,
        MethodArg::Stochastic => Method::Stochastic,
        MethodArg::Pfunction => Method::Pfunction,
        MethodArg::Boltzmann => Method::Boltzmann,
        MethodArg::CompareAll => return None,
    })
}

/// Runs the configuration and writes every output it asks for.
pub fn execute(cfg: &RunConfig) -> anyhow::Result<Report> {
    if let Some(method) = single(cfg.method) {
        let out = run_method(cfg, method)?;
        let text = render(&out.series, cfg.format)?;
        let mut report = Report {
            warnings: out.warnings,
            ..Default::default()
        };
        match &cfg.output {
            Some(path) => write_file(path, &text)?,
            None => report.stdout = text,
        }
        return Ok(report);
    }

    let dir: PathBuf = cfg
        .output
        .clone()
        .context("invalid `output`: compare-all needs a directory")?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    // The d1 run describes a zero-temperature oscillator; it is included as
    // the baseline that ignores temperature altogether.
    let outputs = Method::ALL
        .iter()
        .map(|&m| run_method(cfg, m))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut report = Report::default();
    for o in &outputs {
        let path = dir.join(format!("{}.{}", o.label, cfg.format.extension()));
        write_file(&path, &render(&o.series, cfg.format)?)?;
        report.warnings.extend(o.warnings.iter().cloned());
    }
    let (reference, others) = outputs.split_first().expect("exact comes first");
    report.summary = summarize(reference, others)?;
    let summary = summary_text(&report.summary, cfg.format)?;
    write_file(&dir.join(format!("summary.{}", cfg.format.extension())), &summary)?;
    report.stdout = summary;
    Ok(report)
}
