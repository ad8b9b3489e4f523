//! Laguerre polynomials and Fock-basis matrix elements of displacement
//! operators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Associated Laguerre polynomial `L_n^k(x)` by upward three-term recurrence.
pub fn laguerre_assoc(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for i in 1..n {
        let i = i as f64;
        let next = ((2.0 * i + 1.0 + k - x) * cur - (i + k) * prev) / (i + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Ordinary Laguerre polynomial `L_n(x) = L_n^0(x)`.
pub fn laguerre(n: usize, x: f64) -> f64 {
    laguerre_assoc(n, 0, x)
}

/// `d/dx L_n(x) = −L_{n−1}^1(x)`.
pub fn laguerre_derivative(n: usize, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        -laguerre_assoc(n - 1, 1, x)
    }
}

/// `√((n+s)!/n!)` as a running product of square roots.
pub fn sqrt_factorial_ratio(n: usize, s: usize) -> f64 {
    (n + 1..=n + s).map(|j| (j as f64).sqrt()).product()
}

/// Matrix `M_mn(z) = ⟨m| e^{z a†} e^{−z* a} |n⟩` for `m, n < dim`.
///
/// Built from the Laguerre closed form: for `m ≤ n` the entry is
/// `(−z*)^{n−m} √(m!/n!) L_m^{n−m}(|z|²)`, and for `n ≤ m` it is
/// `z^{m−n} √(n!/m!) L_n^{m−n}(|z|²)`.
pub fn displacement_overlap_matrix(z: Complex64, dim: usize) -> Result<DMatrix<Complex64>> {
    let mut out = DMatrix::zeros(dim, dim);
    fill_overlap_matrix(z, &mut out)?;
    Ok(out)
}

/// In-place variant of [`displacement_overlap_matrix`]; `out` must be square.
pub fn fill_overlap_matrix(z: Complex64, out: &mut DMatrix<Complex64>) -> Result<()> {
    let dim = out.nrows();
    debug_assert_eq!(dim, out.ncols());
    let x = z.norm_sqr();
    let upper_step = -z.conj();
    let mut upper_pow = Complex64::new(1.0, 0.0);
    let mut lower_pow = Complex64::new(1.0, 0.0);
    for k in 0..dim {
        if k > 0 {
            upper_pow *= upper_step;
            lower_pow *= z;
        }
        // L_m^k(x) for m = 0, 1, ... by recurrence in m.
        let kf = k as f64;
        let mut lag_prev = 0.0;
        let mut lag = 1.0;
        let mut ratio = 1.0 / sqrt_factorial_ratio(0, k);
        for m in 0..dim - k {
            if m > 0 {
                let mf = m as f64;
                let next = if m == 1 {
                    1.0 + kf - x
                } else {
                    ((2.0 * (mf - 1.0) + 1.0 + kf - x) * lag - (mf - 1.0 + kf) * lag_prev) / mf
                };
                lag_prev = lag;
                lag = next;
                // √(m!/(m+k)!) from √((m−1)!/(m−1+k)!)
                ratio *= (mf / (mf + kf)).sqrt();
            }
            let n = m + k;
            let upper = upper_pow * (ratio * lag);
            let lower = lower_pow * (ratio * lag);
            let lost = !(upper.re.is_finite() && upper.im.is_finite()) || (x > 0.0 && !ratio.is_normal());
            if lost {
                return Err(Error::PrecisionLoss { dim, row: m, col: n });
            }
            out[(m, n)] = upper;
            out[(n, m)] = lower;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive, Zero};

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    // Explicit finite sum Σ_i C(k+n, n−i) (−x)^i / i!.
    // The alternating sum cancels badly in f64, so it is evaluated exactly.
    fn laguerre_series(n: usize, k: usize, x: BigRational) -> f64 {
        let mut sum = BigRational::zero();
        let mut power = BigRational::one();
        let mut fact = BigInt::one();
        for i in 0..=n {
            if i > 0 {
                power *= -x.clone();
                fact *= BigInt::from(i);
            }
            let c = BigInt::from(binom(k + n, n - i).round() as u64);
            sum += &power * BigRational::new(c, fact.clone());
        }
        sum.to_f64().unwrap()
    }

    // Σ_k z^{m−k} (−z*)^{n−k} √(m! n!) / ((m−k)! (n−k)! k!).
    fn overlap_series(z: Complex64, m: usize, n: usize) -> Complex64 {
        (0..=m.min(n))
            .map(|k| {
                z.powi((m - k) as i32)
                    * (-z.conj()).powi((n - k) as i32)
                    * ((factorial(m) * factorial(n)).sqrt() / (factorial(m - k) * factorial(n - k) * factorial(k)))
            })
            .sum()
    }

    #[test]
    fn laguerre_small_cases() {
        for k in 0..5 {
            assert_eq!(laguerre_assoc(0, k, 3.7), 1.0);
            for n in 0..8 {
                assert!((laguerre_assoc(n, k, 0.0) - binom(n + k, n)).abs() < 1e-9);
            }
        }
        assert!((laguerre_assoc(1, 1, 1.0) - 1.0).abs() < 1e-15);
        assert!((laguerre(2, 2.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn recurrence_matches_series() {
        for n in 0..=20 {
            for k in 0..=5 {
                for &(num, den) in &[
                    (-10, 1),
                    (-33, 10),
                    (-1, 2),
                    (0, 1),
                    (1, 4),
                    (1, 1),
                    (5, 2),
                    (6, 1),
                    (10, 1),
                ] {
                    let x = num as f64 / den as f64;
                    let a = laguerre_assoc(n, k, x);
                    let b = laguerre_series(n, k, BigRational::new(BigInt::from(num), BigInt::from(den)));
                    assert!((a - b).abs() <= 1e-10 * b.abs(), "n={n} k={k} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for n in 0..10 {
            for &x in &[0.0, 0.3, 1.7, 4.0] {
                let h = 1e-6;
                let fd = (laguerre(n, x + h) - laguerre(n, x - h)) / (2.0 * h);
                assert!((laguerre_derivative(n, x) - fd).abs() < 1e-5 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn overlap_low_order_entries() {
        let z = Complex64::new(0.7, -0.4);
        let m = displacement_overlap_matrix(z, 3).unwrap();
        assert!((m[(0, 0)] - 1.0).norm() < 1e-15);
        assert!((m[(1, 0)] - z).norm() < 1e-15);
        assert!((m[(0, 1)] + z.conj()).norm() < 1e-15);
        assert!((m[(1, 1)] - (1.0 - z.norm_sqr())).norm() < 1e-15);
    }

    #[test]
    fn overlap_matches_series() {
        let zs = [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.3, 0.1),
            Complex64::new(-1.2, 0.8),
            Complex64::new(2.0, -1.5),
            Complex64::new(0.0, 3.0),
        ];
        for z in zs {
            let mat = displacement_overlap_matrix(z, 12).unwrap();
            for m in 0..12 {
                for n in 0..12 {
                    let expect = overlap_series(z, m, n);
                    let got = mat[(m, n)];
                    let tol = 1e-10 * expect.norm().max(1.0);
                    assert!((got - expect).norm() <= tol, "z={z} ({m},{n}): {got} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn overlap_branches_agree_on_diagonal_band() {
        // Both closed-form branches apply for m = n; the parity relation
        // M_nm(z) = (−1)^{n+m} conj(M_mn(z)) links the triangles.
        let z = Complex64::new(0.9, 1.3);
        let mat = displacement_overlap_matrix(z, 10).unwrap();
        for m in 0..10 {
            let via_lower = laguerre_assoc(m, 0, z.norm_sqr());
            assert!((mat[(m, m)].re - via_lower).abs() < 1e-12);
            assert!(mat[(m, m)].im.abs() < 1e-12);
            for n in 0..10 {
                let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
                assert!((mat[(n, m)] - sign * mat[(m, n)].conj()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn huge_dimension_reports_precision_loss() {
        let err = displacement_overlap_matrix(Complex64::new(0.5, 0.0), 600);
        assert!(matches!(err, Err(Error::PrecisionLoss { .. })));
    }
}
