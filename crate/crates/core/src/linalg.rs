//! Small dense symmetric solves for the Gaussian full conditionals.

use rand::Rng;

use crate::dists::standard_normal;
use crate::error::{Error, Result};

/// In-place lower Cholesky factor of a row-major `n × n` SPD matrix.
/// The strict upper triangle is left untouched and must be ignored.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Numeric(format!(
                "precision matrix not positive definite: pivot {j} of {n} is {d:e} (diag {:e})",
                a[j * n + j]
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Solve `L x = b` in place.
pub fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve `Lᵀ x = b` in place.
pub fn solve_lower_transpose(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Draw from `N(Q⁻¹ b, Q⁻¹)` given precision `q` (consumed) and linear term `b`.
pub fn sample_gaussian_canonical<R: Rng + ?Sized>(mut q: Vec<f64>, b: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let n = b.len();
    cholesky_in_place(&mut q, n)?;
    let mut u = b.to_vec();
    solve_lower(&q, n, &mut u);
    for v in u.iter_mut() {
        *v += standard_normal(rng);
    }
    solve_lower_transpose(&q, n, &mut u);
    Ok(u)
}

/// Posterior mean `Q⁻¹ b` (no noise); used by tests and scalar oracles.
pub fn solve_spd(mut q: Vec<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    cholesky_in_place(&mut q, n)?;
    let mut u = b.to_vec();
    solve_lower(&q, n, &mut u);
    solve_lower_transpose(&q, n, &mut u);
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn spd(n: usize, rng: &mut RngState) -> Vec<f64> {
        let a: Vec<f64> = (0..n * n).map(|_| standard_normal(rng)).collect();
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                q[i * n + j] = (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum::<f64>();
            }
            q[i * n + i] += 1.0;
        }
        q
    }

    #[test]
    fn solve_matches_matrix_product() {
        let mut rng = RngState::new(9, 0);
        let n = 6;
        let q = spd(n, &mut rng);
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let x = solve_spd(q.clone(), &b).unwrap();
        for i in 0..n {
            let qi: f64 = (0..n).map(|k| q[i * n + k] * x[k]).sum();
            assert!((qi - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn not_positive_definite_reports_pivot() {
        let q = vec![1.0, 2.0, 2.0, 1.0];
        let err = solve_spd(q, &[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("pivot 1"));
    }

    #[test]
    fn canonical_draw_moments() {
        let mut rng = RngState::new(10, 0);
        // Q = [[2, 0.5], [0.5, 1]], b = [1, -1]
        let q = vec![2.0, 0.5, 0.5, 1.0];
        let b = [1.0, -1.0];
        let det = 2.0 - 0.25;
        let cov = [1.0 / det, -0.5 / det, -0.5 / det, 2.0 / det];
        let mean = [(1.0 * 1.0 + 0.5) / det, (-2.0 - 0.5) / det];
        let n = 200_000;
        let mut s = [0.0; 2];
        let mut ss = [0.0; 3];
        for _ in 0..n {
            let x = sample_gaussian_canonical(q.clone(), &b, &mut rng).unwrap();
            s[0] += x[0];
            s[1] += x[1];
            ss[0] += x[0] * x[0];
            ss[1] += x[0] * x[1];
            ss[2] += x[1] * x[1];
        }
        let nf = n as f64;
        let m = [s[0] / nf, s[1] / nf];
        assert!((m[0] - mean[0]).abs() < 0.01);
        assert!((m[1] - mean[1]).abs() < 0.01);
        assert!((ss[0] / nf - m[0] * m[0] - cov[0]).abs() < 0.01);
        assert!((ss[1] / nf - m[0] * m[1] - cov[1]).abs() < 0.01);
        assert!((ss[2] / nf - m[1] * m[1] - cov[3]).abs() < 0.02);
    }
}
