use nalgebra::DMatrix;

use super::{Embedding, EmbeddingMethod};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;

pub(crate) fn check_distance_matrix(d: &DMatrix<f64>) -> Result<()> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: d.ncols(),
        });
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("distance matrix".into()));
    }
    let scale = d.amax().max(1.0);
    for i in 0..n {
        if d[(i, i)].abs() > 1e-12 * scale {
            return Err(Error::InvalidParameter(format!(
                "distance matrix has non-zero diagonal entry {} at {i}",
                d[(i, i)]
            )));
        }
        for j in i + 1..n {
            if (d[(i, j)] - d[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::InvalidParameter(format!(
                    "distance matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Torgerson scaling: top-m eigenvectors of the double-centred squared
/// distances, each scaled by the square root of its (clamped) eigenvalue.
///
/// Eigenvector signs are fixed so that the largest-magnitude entry is positive.
pub fn classical_mds(d: &DMatrix<f64>, m: usize) -> Result<Embedding> {
    check_distance_matrix(d)?;
    let n = d.nrows();
    if m == 0 || m >= n.max(1) {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension must lie in [1, {}], got {m}",
            n.saturating_sub(1)
        )));
    }
    let sq = d.map(|v| v * v);
    let row_means: Vec<f64> = sq.row_iter().map(|r| r.mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let (values, vectors) = sym_eigen(b)?;
    let mut y = DMatrix::zeros(n, m);
    let mut clamped = 0;
    for k in 0..m {
        let lambda = values[k];
        if lambda < 0.0 {
            clamped += 1;
        }
        let scale = lambda.max(0.0).sqrt();
        let v = vectors.column(k);
        let pivot = (0..n).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            y[(i, k)] = sign * v[i] * scale;
        }
    }
    if clamped > 0 {
        log::info!("classical MDS clamped {clamped} negative eigenvalue(s) to zero");
    }
    Ok(Embedding {
        y,
        method: EmbeddingMethod::ClassicalMds,
        stress: None,
        t_used: None,
        clamped_dims: clamped,
        stress_history: Vec::new(),
    })
}

fn pairwise(y: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..y.ncols() {
        let diff = y[(i, k)] - y[(j, k)];
        s += diff * diff;
    }
    s.sqrt()
}

/// Raw stress Σ_{i<j} (D_ij − ‖y_i − y_j‖)².
pub fn raw_stress(d: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let n = d.nrows();
    let per_row: Vec<f64> = par_map_range!(0..n, |i| {
        (i + 1..n)
            .map(|j| {
                let r = d[(i, j)] - pairwise(y, i, j);
                r * r
            })
            .sum::<f64>()
    });
    per_row.iter().sum()
}

/// One Guttman transform with unit weights: X⁺ = n⁻¹ B(X) X.
fn guttman(d: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = y.shape();
    let rows: Vec<Vec<f64>> = par_map_range!(0..n, |i| {
        let mut acc = vec![0.0; m];
        for j in 0..n {
            if j == i {
                continue;
            }
            let dist = pairwise(y, i, j);
            if dist <= 0.0 {
                continue;
            }
            let w = d[(i, j)] / dist;
            for k in 0..m {
                acc[k] += w * (y[(i, k)] - y[(j, k)]);
            }
        }
        acc.iter().map(|v| v / n as f64).collect::<Vec<f64>>()
    });
    DMatrix::from_fn(n, m, |i, k| rows[i][k])
}

/// SMACOF stress majorization from `init`, stopping when the relative stress
/// decrease drops below `tol` or after `max_iter` transforms.
pub fn metric_mds(
    d: &DMatrix<f64>,
    m: usize,
    init: &Embedding,
    tol: f64,
    max_iter: usize,
) -> Result<Embedding> {
    check_distance_matrix(d)?;
    let n = d.nrows();
    if init.y.shape() != (n, m) {
        return Err(Error::DimensionMismatch {
            expected: n * m,
            found: init.y.len(),
        });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let mut y = init.y.clone();
    let mut stress = raw_stress(d, &y);
    if !stress.is_finite() {
        return Err(Error::NonFinite("stress".into()));
    }
    let mut history = vec![stress];
    for _ in 0..max_iter {
        if stress == 0.0 {
            break;
        }
        let next = guttman(d, &y);
        let next_stress = raw_stress(d, &next);
        if !next_stress.is_finite() {
            return Err(Error::NonFinite("stress".into()));
        }
        let rel = (stress - next_stress) / stress;
        y = next;
        stress = next_stress;
        history.push(stress);
        if rel < tol {
            break;
        }
    }
    Ok(Embedding {
        y,
        method: EmbeddingMethod::MetricMds,
        stress: Some(stress),
        t_used: None,
        clamped_dims: init.clamped_dims,
        stress_history: history,
    })
}
