use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const EIGEN_EPS: f64 = f64::EPSILON;
const EIGEN_MAX_ITER: usize = 0; // 0 = until convergence in nalgebra's solver

/// Eigenpairs of a symmetric matrix, eigenvalues descending, eigenvectors as columns.
pub(crate) fn sym_eigen(a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::try_new(a, EIGEN_EPS, EIGEN_MAX_ITER).ok_or(Error::EigenNonConvergence)?;
    let order = descending_order(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    Ok((values, vectors))
}

/// Eigenvalues of a symmetric matrix, descending.
pub(crate) fn sym_eigenvalues(a: DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(a, EIGEN_EPS, EIGEN_MAX_ITER).ok_or(Error::EigenNonConvergence)?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenNonConvergence);
    }
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Dense product with rows of the output computed in parallel; each entry
/// is accumulated in a fixed order.
pub(crate) fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = a.shape();
    let m = b.ncols();
    assert_eq!(k, b.nrows());
    // row-major copies keep the inner loops contiguous
    let a_rows: Vec<f64> = (0..n).flat_map(|i| (0..k).map(move |j| a[(i, j)])).collect();
    let b_rows: Vec<f64> = (0..k).flat_map(|i| (0..m).map(move |j| b[(i, j)])).collect();
    let mut out = vec![0.0; n * m];
    if m > 0 {
        par_chunks_mut_for_each!(out, m, |(i, row): (usize, &mut [f64])| {
            let ai = &a_rows[i * k..(i + 1) * k];
            for (l, &av) in ai.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let bl = &b_rows[l * m..(l + 1) * m];
                for (o, &bv) in row.iter_mut().zip(bl) {
                    *o += av * bv;
                }
            }
        });
    }
    DMatrix::from_row_slice(n, m, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = sym_eigen(a.clone()).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let v0 = vecs.column(0);
        let av = &a * v0;
        assert!((av - v0 * 3.0).norm() < 1e-12);
    }

    #[test]
    fn matmul_matches_nalgebra() {
        let a = DMatrix::from_fn(5, 3, |i, j| (i as f64 - j as f64) * 0.3);
        let b = DMatrix::from_fn(3, 4, |i, j| (i * j) as f64 + 0.5);
        assert!((matmul(&a, &b) - &a * &b).norm() < 1e-12);
    }
}
