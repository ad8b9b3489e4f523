//! Parallel trajectory execution and deterministic reduction into series.

use rayon::prelude::*;

use crate::d1::{D1State, Trajectory};
use crate::error::{Error, Result};
use crate::observables::{ensemble_mean, Fingerprint, ObservableSeries};

/// Runs `count` independent trajectories; fails as a whole if any member fails.
pub(crate) fn run_all<F>(count: usize, run: F) -> Result<Vec<Trajectory>>
where
    F: Fn(usize) -> Result<Trajectory> + Sync,
{
    let results: Vec<Result<Trajectory>> = (0..count).into_par_iter().map(&run).collect();
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.is_err().then_some(i))
        .collect();
    if let Some(&first_index) = failed.first() {
        let first = results.into_iter().nth(first_index).unwrap().unwrap_err();
        return Err(Error::EnsembleFailed {
            failed,
            first: Box::new(first),
        });
    }
    Ok(results.into_iter().map(|r| r.unwrap()).collect())
}

/// Equal-weight ensemble average with per-time standard error of `P_z`.
pub(crate) fn sampled_series<E>(trajectories: &[Trajectory], energy: E, fingerprint: Fingerprint) -> ObservableSeries
where
    E: Fn(usize, &D1State) -> (f64, f64),
{
    let rows = |f: &dyn Fn(usize, &D1State) -> f64| -> Vec<Vec<f64>> {
        trajectories
            .iter()
            .enumerate()
            .map(|(i, tr)| tr.states.iter().map(|s| f(i, s)).collect())
            .collect()
    };
    let (pz, pz_stderr) = ensemble_mean(&rows(&|_, s| s.pz()));
    let (norm, _) = ensemble_mean(&rows(&|_, s| s.norm_sqr()));
    let (e_spin, _) = ensemble_mean(&rows(&|i, s| energy(i, s).0));
    let (e_rest, _) = ensemble_mean(&rows(&|i, s| energy(i, s).1));
    let e_total = e_spin.iter().zip(&e_rest).map(|(a, b)| a + b).collect();
    ObservableSeries {
        times: trajectories[0].times.clone(),
        pz,
        pz_stderr,
        norm,
        e_spin,
        e_rest,
        e_total,
        fingerprint,
    }
}

/// Fixed-weight average (weights sum to one); no sampling error.
pub(crate) fn weighted_series<E>(
    trajectories: &[Trajectory],
    weights: &[f64],
    energy: E,
    fingerprint: Fingerprint,
) -> ObservableSeries
where
    E: Fn(usize, &D1State) -> (f64, f64),
{
    let len = trajectories[0].times.len();
    let mut pz = vec![0.0; len];
    let mut norm = vec![0.0; len];
    let mut e_spin = vec![0.0; len];
    let mut e_rest = vec![0.0; len];
    let mut total = vec![0.0; len];
    for (i, (tr, &w)) in trajectories.iter().zip(weights).enumerate() {
        for (t, s) in tr.states.iter().enumerate() {
            total[t] += w;
            pz[t] += w * s.pz();
            norm[t] += w * s.norm_sqr();
            let (es, er) = energy(i, s);
            e_spin[t] += w * es;
            e_rest[t] += w * er;
        }
    }
    for (p, w) in pz.iter_mut().zip(&total) {
        *p /= w;
    }
    let e_total = e_spin.iter().zip(&e_rest).map(|(a, b)| a + b).collect();
    ObservableSeries {
        times: trajectories[0].times.clone(),
        pz,
        pz_stderr: vec![0.0; len],
        norm,
        e_spin,
        e_rest,
        e_total,
        fingerprint,
    }
}
