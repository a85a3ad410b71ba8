//! Dense symmetric-matrix helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues sorted ascending with matching eigenvector columns.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    eigenvalues(m).iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Largest minus smallest eigenvalue.
pub fn spread(m: &DMatrix<f64>) -> f64 {
    let v = eigenvalues(m);
    v[v.len() - 1] - v[0]
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Applies `f` to the spectrum of a symmetric matrix.
pub fn sym_function(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mapped = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&v| f(v)));
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&mapped) * q.transpose()
}

/// `exp(scale * m)` for symmetric `m`.
pub fn sym_exp(m: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    sym_function(m, |v| (scale * v).exp())
}

/// Principal logarithm of a symmetric positive-definite matrix.
pub fn sym_log(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    if let Some(bad) = eig.eigenvalues.iter().find(|&&v| v <= 0.0) {
        return Err(Error::Consistency(format!(
            "matrix logarithm of a non positive-definite matrix (eigenvalue {bad:e})"
        )));
    }
    let mapped = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| v.ln()));
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&mapped) * q.transpose())
}

/// `log tr(m^power)` using squaring with per-step rescaling, for entrywise
/// non-negative or otherwise trace-positive products.
pub fn log_trace_power(m: &DMatrix<f64>, power: u64) -> Result<f64> {
    let dim = m.nrows();
    let mut result = DMatrix::<f64>::identity(dim, dim);
    let mut result_log = 0.0;
    let mut base = m.clone();
    let mut base_log = 0.0;
    let mut p = power;
    while p > 0 {
        if p & 1 == 1 {
            result = &result * &base;
            result_log += base_log;
            let s = result.amax();
            if s > 0.0 {
                result /= s;
                result_log += s.ln();
            }
        }
        p >>= 1;
        if p > 0 {
            base = &base * &base;
            base_log *= 2.0;
            let s = base.amax();
            if s > 0.0 {
                base /= s;
                base_log += s.ln();
            }
        }
    }
    let tr = result.trace();
    if tr <= 0.0 {
        return Err(Error::Consistency(format!("non-positive trace {tr:e}")));
    }
    Ok(tr.ln() + result_log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_log_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, -0.2, 0.5]);
        let e = sym_exp(&m, 1.0);
        let back = sym_log(&e).unwrap();
        assert!((back - m).amax() < 1e-13);
    }

    #[test]
    fn trace_power_matches_direct() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.25, 2.0]);
        let mut direct = DMatrix::<f64>::identity(2, 2);
        for _ in 0..7 {
            direct = &direct * &m;
        }
        let lt = log_trace_power(&m, 7).unwrap();
        assert!((lt - direct.trace().ln()).abs() < 1e-12);
        assert!((log_trace_power(&m, 0).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn spread_and_norm() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 1.0, 2.0]));
        assert_eq!(spread(&m), 5.0);
        assert_eq!(spectral_norm_sym(&m), 3.0);
    }
}
