//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rabi_thermal::SignRealization;

/// `exp(α a† − α* a) v` in a Fock space of dimension `dim`, by scaling and
/// repeated Taylor steps on the vector.
pub fn displace(alpha: Complex64, v: &[Complex64], dim: usize) -> Vec<Complex64> {
    let mut x = vec![Complex64::new(0.0, 0.0); dim];
    x[..v.len()].copy_from_slice(v);
    let steps = 64 * (1 + (alpha.norm() * (dim as f64).sqrt()) as usize);
    let h = alpha / steps as f64;
    let apply = |y: &[Complex64]| -> Vec<Complex64> {
        // (h a† − h* a) y
        (0..dim)
            .map(|n| {
                let up = if n > 0 {
                    h * (n as f64).sqrt() * y[n - 1]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                let down = if n + 1 < dim {
                    h.conj() * ((n + 1) as f64).sqrt() * y[n + 1]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                up - down
            })
            .collect()
    };
    for _ in 0..steps {
        let mut term = x.clone();
        let mut acc = x.clone();
        for k in 1..=12 {
            term = apply(&term).into_iter().map(|t| t / k as f64).collect();
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
        }
        x = acc;
    }
    x
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `(⟨Φ|D†_f D_g|Φ⟩, ⟨Φ|D†_f D_g a|Φ⟩)` from explicit Fock vectors.
pub fn brute_force_overlaps(f: Complex64, g: Complex64, real: &SignRealization, dim: usize) -> (Complex64, Complex64) {
    let phi: Vec<Complex64> = real.v0.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let a_phi: Vec<Complex64> = (0..phi.len())
        .map(|n| {
            if n + 1 < phi.len() {
                phi[n + 1] * ((n + 1) as f64).sqrt()
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let df = displace(f, &phi, dim);
    let dg = displace(g, &phi, dim);
    let dga = displace(g, &a_phi, dim);
    (inner(&df, &dg), inner(&df, &dga))
}
