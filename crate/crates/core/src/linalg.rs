//! Small dense helpers shared by the Newton-type solvers.

use nalgebra::{DMatrix, DVector};

/// Solves `a x = b` for symmetric positive (semi)definite `a`. Falls back to
/// `a + ridge I` when the plain Cholesky factorisation fails.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let mut reg = a.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += ridge;
    }
    let x = reg.cholesky()?.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Inverse of a symmetric positive definite matrix after adding `ridge` to
/// the diagonal.
pub fn inverse_spd_ridged(a: &DMatrix<f64>, ridge: f64) -> Option<DMatrix<f64>> {
    let mut reg = a.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += ridge;
    }
    let inv = reg.cholesky()?.inverse();
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// `Σᵢ wᵢ xᵢ xᵢᵀ` for the rows `xᵢ` of `x`.
pub fn weighted_gram(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = x.clone();
    for (mut row, &wi) in scaled.row_iter_mut().zip(w) {
        row *= wi;
    }
    x.transpose() * scaled
}

/// `Σᵢ wᵢ xᵢ`.
pub fn weighted_col_sums(x: &DMatrix<f64>, w: &[f64]) -> DVector<f64> {
    x.transpose() * DVector::from_column_slice(w)
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + eˣ)` without overflow.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Prepends a column of ones.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expit_is_stable_at_extremes() {
        assert_eq!(expit(-1000.0), 0.0);
        assert_eq!(expit(1000.0), 1.0);
        assert!((expit(0.0) - 0.5).abs() < 1e-15);
        assert!((logit(expit(1.3)) - 1.3).abs() < 1e-12);
        assert!((log1p_exp(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn spd_solve_recovers_solution() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = solve_spd(&a, &b, 1e-10).unwrap();
        assert!(((&a * &x) - b).norm() < 1e-12);
    }

    #[test]
    fn weighted_gram_matches_loop() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = [0.5, 1.0, 2.0];
        let g = weighted_gram(&x, &w);
        let mut expect = DMatrix::zeros(2, 2);
        for i in 0..3 {
            for j in 0..2 {
                for k in 0..2 {
                    expect[(j, k)] += w[i] * x[(i, j)] * x[(i, k)];
                }
            }
        }
        assert!((g - expect).norm() < 1e-12);
    }
}
