//! Numerically exact propagation in the truncated spin ⊗ Fock basis.
//!
//! The basis index is `spin · j_max + j` with spin `0 = |+⟩`, `1 = |−⟩`. The
//! Hamiltonian is real symmetric, so one symmetric eigendecomposition gives
//! `e^{−iHt/ħ}` for every time and every initial level.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::model::{boltzmann_tail, truncated_weights, ModelParams, ThermalConfig};
use crate::observables::{Fingerprint, Method, ObservableSeries};

/// Populations above this in the top two Fock levels signal a basis that is
/// too small.
pub const TRUNCATION_WARNING: f64 = 1e-6;

/// Index of `|spin⟩|j⟩` in the product basis.
pub fn basis_index(spin_down: bool, j: usize, j_max: usize) -> usize {
    usize::from(spin_down) * j_max + j
}

/// Matrix of the Hamiltonian in the first `j_max` Fock levels of each branch.
pub fn build_hamiltonian(params: &ModelParams, j_max: usize) -> Result<DMatrix<f64>> {
    params.validate()?;
    if j_max < 2 {
        return Err(invalid("expand_trunc_jmax", "must be at least 2"));
    }
    let dim = 2 * j_max;
    let mut h = DMatrix::zeros(dim, dim);
    for (spin_down, sign) in [(false, 1.0), (true, -1.0)] {
        for j in 0..j_max {
            let i = basis_index(spin_down, j, j_max);
            h[(i, i)] = sign * 0.5 * params.epsilon + j as f64 * params.quantum();
            if j + 1 < j_max {
                let k = basis_index(spin_down, j + 1, j_max);
                let hop = sign * 0.5 * params.lambda * ((j + 1) as f64).sqrt();
                h[(i, k)] = hop;
                h[(k, i)] = hop;
            }
        }
    }
    for j in 0..j_max {
        let up = basis_index(false, j, j_max);
        let down = basis_index(true, j, j_max);
        h[(up, down)] = params.v;
        h[(down, up)] = params.v;
    }
    Ok(h)
}

/// Spectral propagator for one truncated Hamiltonian.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    params: ModelParams,
    j_max: usize,
    hamiltonian: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

/// Coefficients `c±_{nj}(t)` of one propagated initial level.
#[derive(Debug, Clone)]
pub struct FockExpansion {
    pub initial_level: usize,
    pub times: Vec<f64>,
    /// `up[t][j] = c⁺_{nj}(t)`.
    pub up: Vec<Vec<Complex64>>,
    pub down: Vec<Vec<Complex64>>,
    /// Largest population found in the top two Fock levels.
    pub max_top_population: f64,
}

impl FockExpansion {
    pub fn norm_at(&self, t_index: usize) -> f64 {
        self.up[t_index]
            .iter()
            .chain(&self.down[t_index])
            .map(|c| c.norm_sqr())
            .sum()
    }

    pub fn pz_at(&self, t_index: usize) -> f64 {
        let up: f64 = self.up[t_index].iter().map(|c| c.norm_sqr()).sum();
        let down: f64 = self.down[t_index].iter().map(|c| c.norm_sqr()).sum();
        up - down
    }

    pub fn truncation_warning(&self) -> bool {
        self.max_top_population > TRUNCATION_WARNING
    }
}

impl ExactPropagator {
    pub fn new(params: &ModelParams, j_max: usize) -> Result<Self> {
        let hamiltonian = build_hamiltonian(params, j_max)?;
        let eig = SymmetricEigen::new(hamiltonian.clone());
        Ok(Self {
            params: *params,
            j_max,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
            hamiltonian,
        })
    }

    pub fn hamiltonian(&self) -> &DMatrix<f64> {
        &self.hamiltonian
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `max |HU − UΛ|` of the stored decomposition.
    pub fn eigen_residual(&self) -> f64 {
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues));
        let r = &self.hamiltonian * &self.eigenvectors - &self.eigenvectors * lambda;
        r.amax()
    }

    /// State vector at time `t` for the start `|+⟩|n⟩`.
    pub fn evolve_level(&self, n: usize, t: f64) -> Vec<Complex64> {
        let u = &self.eigenvectors;
        let dim = u.nrows();
        let start = basis_index(false, n, self.j_max);
        if t == 0.0 {
            let mut psi = vec![Complex64::new(0.0, 0.0); dim];
            psi[start] = Complex64::new(1.0, 0.0);
            return psi;
        }
        let phases: Vec<Complex64> = (0..dim)
            .map(|l| Complex64::from_polar(u[(start, l)], -self.eigenvalues[l] * t / self.params.hbar))
            .collect();
        (0..dim)
            .map(|k| (0..dim).map(|l| phases[l] * u[(k, l)]).sum())
            .collect()
    }

    /// `Σ_{j,j'} ⟨ψ|H|ψ⟩` split as (tunneling + bias, oscillator + coupling).
    pub fn energy_parts(&self, psi: &[Complex64]) -> (f64, f64) {
        let j_max = self.j_max;
        let mut spin = 0.0;
        let mut rest = 0.0;
        let p = &self.params;
        for j in 0..j_max {
            let up = psi[basis_index(false, j, j_max)];
            let down = psi[basis_index(true, j, j_max)];
            spin += 0.5 * p.epsilon * (up.norm_sqr() - down.norm_sqr());
            spin += 2.0 * p.v * (up.conj() * down).re;
            rest += j as f64 * p.quantum() * (up.norm_sqr() + down.norm_sqr());
            if j + 1 < j_max {
                let up1 = psi[basis_index(false, j + 1, j_max)];
                let down1 = psi[basis_index(true, j + 1, j_max)];
                let hop = p.lambda * ((j + 1) as f64).sqrt();
                rest += hop * ((up1.conj() * up).re - (down1.conj() * down).re);
            }
        }
        (spin, rest)
    }

    /// Propagates `|n⟩|+⟩` and samples the Fock coefficients on `t_grid`.
    pub fn propagate_fock_initial(&self, n: usize, t_grid: &[f64]) -> Result<FockExpansion> {
        if n >= self.j_max {
            return Err(invalid(
                "n",
                format!("initial level {n} outside {} Fock levels", self.j_max),
            ));
        }
        let j_max = self.j_max;
        let mut up = Vec::with_capacity(t_grid.len());
        let mut down = Vec::with_capacity(t_grid.len());
        let mut max_top_population: f64 = 0.0;
        for &t in t_grid {
            let psi = self.evolve_level(n, t);
            let top: f64 = [j_max - 2, j_max - 1]
                .iter()
                .map(|&j| psi[basis_index(false, j, j_max)].norm_sqr() + psi[basis_index(true, j, j_max)].norm_sqr())
                .sum();
            max_top_population = max_top_population.max(top);
            up.push(psi[..j_max].to_vec());
            down.push(psi[j_max..].to_vec());
        }
        Ok(FockExpansion {
            initial_level: n,
            times: t_grid.to_vec(),
            up,
            down,
            max_top_population,
        })
    }
}

/// Propagates `|n⟩|+⟩` with a fresh decomposition.
pub fn propagate_fock_initial(
    n: usize,
    params: &ModelParams,
    config: &ThermalConfig,
    t_grid: &[f64],
) -> Result<FockExpansion> {
    ExactPropagator::new(params, config.expand_trunc_jmax)?.propagate_fock_initial(n, t_grid)
}

/// Exact population difference of the thermal start, with diagnostics.
#[derive(Debug, Clone)]
pub struct ExactRun {
    pub series: ObservableSeries,
    pub levels: Vec<FockExpansion>,
    /// Boltzmann weight beyond `N_T` that was dropped before renormalising.
    pub boltzmann_tail: f64,
    /// Thermally weighted population of the top two Fock levels (max over t).
    pub weighted_top_population: f64,
    pub eigen_residual: f64,
}

impl ExactRun {
    pub fn truncation_warning(&self) -> bool {
        self.weighted_top_population > TRUNCATION_WARNING
    }
}

/// Thermal population difference `Σ_n ρ_n Σ_j (|c⁺_{nj}|² − |c⁻_{nj}|²)` over
/// levels `0..=N_T`, with the weights renormalised over the kept levels.
pub fn population_difference_qm(
    beta: f64,
    params: &ModelParams,
    config: &ThermalConfig,
    t_grid: &[f64],
) -> Result<ExactRun> {
    let config = config.with_beta(beta);
    config.validate()?;
    let prop = ExactPropagator::new(params, config.expand_trunc_jmax)?;
    let weights = truncated_weights(config.boltzmann_trunc_nt, beta, params);
    let levels: Vec<FockExpansion> = (0..weights.len())
        .into_par_iter()
        .map(|n| prop.propagate_fock_initial(n, t_grid))
        .collect::<Result<_>>()?;

    let nt = t_grid.len();
    let mut pz = vec![0.0; nt];
    let mut norm = vec![0.0; nt];
    let mut e_spin = vec![0.0; nt];
    let mut e_rest = vec![0.0; nt];
    let mut weighted_top_population: f64 = 0.0;
    let j_max = config.expand_trunc_jmax;
    for ti in 0..nt {
        let mut top = 0.0;
        let mut total = 0.0;
        for (level, &w) in levels.iter().zip(&weights) {
            total += w;
            pz[ti] += w * level.pz_at(ti);
            norm[ti] += w * level.norm_at(ti);
            let psi: Vec<Complex64> = level.up[ti].iter().chain(&level.down[ti]).copied().collect();
            let (s, r) = prop.energy_parts(&psi);
            e_spin[ti] += w * s;
            e_rest[ti] += w * r;
            top += w * [j_max - 2, j_max - 1]
                .iter()
                .map(|&j| level.up[ti][j].norm_sqr() + level.down[ti][j].norm_sqr())
                .sum::<f64>();
        }
        // Dividing by the sum taken in the same order makes P_z(0) = 1 exactly.
        pz[ti] /= total;
        weighted_top_population = weighted_top_population.max(top);
    }
    let e_total = e_spin.iter().zip(&e_rest).map(|(a, b)| a + b).collect();
    let fingerprint = Fingerprint::new(Method::Exact, params).with_thermal(&config);
    let series = ObservableSeries {
        times: t_grid.to_vec(),
        pz,
        pz_stderr: vec![0.0; nt],
        norm,
        e_spin,
        e_rest,
        e_total,
        fingerprint,
    };
    Ok(ExactRun {
        series,
        levels,
        boltzmann_tail: boltzmann_tail(config.boltzmann_trunc_nt, beta, params),
        weighted_top_population,
        eigen_residual: prop.eigen_residual(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::uniform_grid;

    #[test]
    fn hamiltonian_entries() {
        let p = ModelParams::default().with_lambda(0.2);
        let h = build_hamiltonian(&p, 6).unwrap();
        let up = |j| basis_index(false, j, 6);
        let down = |j| basis_index(true, j, 6);
        assert!((h[(up(1), up(0))] - 0.1).abs() < 1e-15);
        assert!((h[(down(1), down(0))] + 0.1).abs() < 1e-15);
        for n in 0..6 {
            assert_eq!(h[(down(n), up(n))], p.v);
        }
        let biased = ModelParams::default().with_epsilon(0.3);
        let hb = build_hamiltonian(&biased, 6).unwrap();
        assert!((hb[(up(0), up(0))] - 0.15).abs() < 1e-15);
        assert!((&hb - hb.transpose()).amax() == 0.0);
    }

    #[test]
    fn eigendecomposition_residual_is_small() {
        let prop = ExactPropagator::new(&ModelParams::default().with_lambda(0.5), 14).unwrap();
        assert!(prop.eigen_residual() < 1e-10 * prop.hamiltonian().amax());
    }

    #[test]
    fn uncoupled_levels_stay_put() {
        let p = ModelParams::default().with_lambda(0.0).with_v(0.0).with_epsilon(0.4);
        let grid = uniform_grid(20.0, 1.0).unwrap();
        let exp = propagate_fock_initial(3, &p, &ThermalConfig::default(), &grid).unwrap();
        for ti in 0..grid.len() {
            assert!((exp.up[ti][3].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_level_rabi_flopping() {
        let p = ModelParams::default().with_lambda(0.0);
        let grid = uniform_grid(100.0, 0.5).unwrap();
        let exp = propagate_fock_initial(2, &p, &ThermalConfig::default(), &grid).unwrap();
        for (ti, t) in grid.iter().enumerate() {
            let expect = (p.v * t / p.hbar).cos().powi(2);
            assert!((exp.up[ti][2].norm_sqr() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn unitary_over_long_times() {
        let p = ModelParams::default();
        let grid = uniform_grid(200.0, 1.0).unwrap();
        let exp = propagate_fock_initial(0, &p, &ThermalConfig::default(), &grid).unwrap();
        for ti in 0..grid.len() {
            assert!((exp.norm_at(ti) - 1.0).abs() < 1e-10);
        }
        assert!(!exp.truncation_warning());
    }

    #[test]
    fn thermal_pz_properties() {
        let p = ModelParams::default();
        let grid = uniform_grid(200.0, 0.5).unwrap();
        let run = population_difference_qm(1.0, &p, &ThermalConfig::default(), &grid).unwrap();
        let s = &run.series;
        assert_eq!(s.pz[0], 1.0);
        assert!(s.pz.iter().all(|x| x.abs() <= 1.0 + 1e-12));
        assert!(s.norm.iter().all(|n| (n - 1.0).abs() < 1e-10));
        let e0 = s.e_total[0];
        assert!(s.e_total.iter().all(|e| (e - e0).abs() < 1e-10));
        assert!(!run.truncation_warning());
    }

    #[test]
    fn decoupled_thermal_pz_is_temperature_independent() {
        let p = ModelParams::default().with_lambda(0.0);
        let grid = uniform_grid(100.0, 0.5).unwrap();
        for beta in [0.5, 1.0, 4.0] {
            let run = population_difference_qm(beta, &p, &ThermalConfig::default(), &grid).unwrap();
            for (t, pz) in grid.iter().zip(&run.series.pz) {
                assert!((pz - (2.0 * p.v * t).cos()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn doubling_basis_changes_little() {
        let p = ModelParams::default();
        let grid = uniform_grid(200.0, 0.5).unwrap();
        let small = population_difference_qm(1.0, &p, &ThermalConfig::default(), &grid).unwrap();
        let big_cfg = ThermalConfig {
            expand_trunc_jmax: 28,
            ..ThermalConfig::default()
        };
        let big = population_difference_qm(1.0, &p, &big_cfg, &grid).unwrap();
        let diff = small
            .series
            .pz
            .iter()
            .zip(&big.series.pz)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "sup diff {diff}");
    }
}
