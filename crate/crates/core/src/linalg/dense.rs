use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

fn sorted_order(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    idx
}

/// Full eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("dense eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let order = sorted_order(&vals);
    let u = evd.U();
    let vecs = Mat::from_fn(n, n, |r, c| u[(r, order[c])]);
    Ok((order.iter().map(|&i| vals[i]).collect(), vecs))
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: &Mat<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut v = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("dense eigensolver: {e:?}")))?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Full eigendecomposition of a complex Hermitian matrix, eigenvalues ascending.
pub fn eigh_complex(m: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("dense eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let order = sorted_order(&vals);
    let u = evd.U();
    let vecs = Mat::from_fn(n, n, |r, c| u[(r, order[c])]);
    Ok((order.iter().map(|&i| vals[i]).collect(), vecs))
}
