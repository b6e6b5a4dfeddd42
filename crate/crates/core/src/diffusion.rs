//! Diffusion operator, entropy-based choice of the diffusion time, and
//! potential distances.

use std::path::Path;

use nalgebra::DMatrix;

use crate::data::write_file;
use crate::error::{Error, Result};
use crate::forest::ProximityKernel;
use crate::linalg::{matmul, sym_eigenvalues};

pub const DEFAULT_T_MAX: usize = 100;
pub const DEFAULT_LOG_EPS: f64 = 1e-12;

const ROW_SUM_TOL: f64 = 1e-9;
const POWER_ROW_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialTransform {
    /// U = −ln(max(Pᵗ, eps))
    Log { eps: f64 },
    /// U = √Pᵗ
    Sqrt,
}

impl Default for PotentialTransform {
    fn default() -> Self {
        PotentialTransform::Log {
            eps: DEFAULT_LOG_EPS,
        }
    }
}

/// Markov operator built from a kernel, its spectrum, and its t-step power.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    pub p: DMatrix<f64>,
    /// Eigenvalues of D^{-1/2} K D^{-1/2} (equal to those of P), descending.
    pub spectrum: Vec<f64>,
    /// H(t) for t = 1..=t_max.
    pub entropy_curve: Vec<f64>,
    pub t: usize,
    pub pt: DMatrix<f64>,
}

impl DiffusionState {
    /// Row-normalizes `kernel`, picks t by the entropy knee unless
    /// `t_override` is set, and powers the operator.
    pub fn from_kernel(kernel: &ProximityKernel, t_override: Option<usize>, t_max: usize) -> Result<Self> {
        let p = row_normalize(&kernel.k)?;
        let spectrum = spectrum(&kernel.k)?;
        let entropy_curve = vne_curve(&spectrum, t_max)?;
        let t = match t_override {
            Some(0) => return Err(Error::InvalidParameter("t must be at least 1".into())),
            Some(t) => t,
            None => knee(&entropy_curve),
        };
        let pt = matrix_power(&p, t)?;
        Ok(DiffusionState {
            p,
            spectrum,
            entropy_curve,
            t,
            pt,
        })
    }
}

/// Euclidean distances between rows of the transformed powered operator.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialDistances {
    pub d: DMatrix<f64>,
    pub transform: PotentialTransform,
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

fn check_stochastic(p: &DMatrix<f64>, tol: f64) -> Result<()> {
    for (i, row) in p.row_iter().enumerate() {
        let s = row.sum();
        if (s - 1.0).abs() > tol || row.iter().any(|&v| v < 0.0) {
            return Err(Error::NotStochastic { row: i, sum: s });
        }
    }
    Ok(())
}

/// P_ij = K_ij / Σ_k K_ik.
pub fn row_normalize(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite(k, "kernel")?;
    let mut p = k.clone();
    for (i, mut row) in p.row_iter_mut().enumerate() {
        let s = row.sum();
        if s <= 0.0 {
            return Err(Error::NotStochastic { row: i, sum: s });
        }
        row /= s;
    }
    Ok(p)
}

/// Eigenvalues of the row-normalized operator, computed through its
/// symmetric conjugate D^{-1/2} K D^{-1/2}. Sorted descending.
pub fn spectrum(k: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_finite(k, "kernel")?;
    let d: Vec<f64> = k.row_iter().map(|r| r.sum()).collect();
    if let Some(i) = d.iter().position(|&s| s <= 0.0) {
        return Err(Error::NotStochastic { row: i, sum: d[i] });
    }
    let inv_sqrt: Vec<f64> = d.iter().map(|s| 1.0 / s.sqrt()).collect();
    let n = k.nrows();
    let mut a = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * k[(i, j)] * inv_sqrt[j]);
    // symmetrize exactly so rounding cannot bias the solver
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    sym_eigenvalues(a)
}

/// Shannon entropy (natural log) of η_i = |λ_i|ᵗ / Σ_j |λ_j|ᵗ.
pub fn von_neumann_entropy(spectrum: &[f64], t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidParameter("t must be at least 1".into()));
    }
    let powered: Vec<f64> = spectrum.iter().map(|l| l.abs().powi(t as i32)).collect();
    let total: f64 = powered.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::NonFinite("normalized spectrum".into()));
    }
    Ok(powered
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let eta = v / total;
            -eta * eta.ln()
        })
        .sum())
}

/// H(t) for t = 1..=t_max.
pub fn vne_curve(spectrum: &[f64], t_max: usize) -> Result<Vec<f64>> {
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be at least 1".into()));
    }
    (1..=t_max).map(|t| von_neumann_entropy(spectrum, t)).collect()
}

/// Index (1-based t) of the point farthest from the chord joining the first
/// and last points of `curve`. Flat curves give 1.
pub fn knee(curve: &[f64]) -> usize {
    let n = curve.len();
    if n < 3 {
        return 1;
    }
    let (lo, hi) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo <= 1e-12 {
        return 1;
    }
    let (x1, y1) = (1.0, curve[0]);
    let (x2, y2) = (n as f64, curve[n - 1]);
    let len = ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt();
    let mut best = (1, f64::NEG_INFINITY);
    for (i, &y) in curve.iter().enumerate() {
        let x = (i + 1) as f64;
        let dist = ((x2 - x1) * (y1 - y) - (x1 - x) * (y2 - y1)).abs() / len;
        if dist > best.1 {
            best = (i + 1, dist);
        }
    }
    best.0
}

/// Diffusion time at the knee of the entropy curve over t = 1..=t_max.
pub fn select_t(spectrum: &[f64], t_max: usize) -> Result<usize> {
    if t_max < 3 {
        return Err(Error::InvalidParameter("t_max must be at least 3".into()));
    }
    Ok(knee(&vne_curve(spectrum, t_max)?))
}

/// Pᵗ by repeated squaring.
pub fn matrix_power(p: &DMatrix<f64>, t: usize) -> Result<DMatrix<f64>> {
    if t == 0 {
        return Err(Error::InvalidParameter("t must be at least 1".into()));
    }
    if t > 1 << 20 {
        return Err(Error::InvalidParameter(format!("t = {t} is too large")));
    }
    check_stochastic(p, ROW_SUM_TOL)?;
    let mut result: Option<DMatrix<f64>> = None;
    let mut base = p.clone();
    let mut e = t;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => matmul(&r, &base),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = matmul(&base, &base);
    }
    let pt = result.expect("t >= 1");
    check_finite(&pt, "powered operator")?;
    check_stochastic(&pt, POWER_ROW_SUM_TOL)?;
    Ok(pt)
}

/// Row-wise potentials of `pt` and their pairwise Euclidean distances.
pub fn potential_distances(pt: &DMatrix<f64>, transform: PotentialTransform) -> Result<PotentialDistances> {
    if let PotentialTransform::Log { eps } = transform {
        if eps.is_nan() || eps <= 0.0 {
            return Err(Error::InvalidParameter(format!("log floor must be positive, got {eps}")));
        }
    }
    check_finite(pt, "powered operator")?;
    check_stochastic(pt, POWER_ROW_SUM_TOL)?;
    let n = pt.nrows();
    let potentials: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |k| (i, k)))
        .map(|(i, k)| match transform {
            PotentialTransform::Log { eps } => -pt[(i, k)].max(eps).ln(),
            PotentialTransform::Sqrt => pt[(i, k)].sqrt(),
        })
        .collect();
    let upper: Vec<Vec<f64>> = par_map_range!(0..n, |i| {
        let ui = &potentials[i * n..(i + 1) * n];
        (i + 1..n)
            .map(|j| {
                let uj = &potentials[j * n..(j + 1) * n];
                ui.iter().zip(uj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .collect::<Vec<f64>>()
    });
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(PotentialDistances { d, transform })
}

/// Two-column CSV (t, H) of an entropy curve.
pub fn write_vne_csv(curve: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("t,H\n");
    for (i, h) in curve.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, h));
    }
    write_file(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_and_uniform_kernels() {
        let p = row_normalize(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(p, DMatrix::identity(3, 3));
        let p = row_normalize(&DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert_eq!(p, DMatrix::from_element(2, 2, 0.5));
    }

    #[test]
    fn tridiagonal_row_normalization() {
        let k = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0]);
        let p = row_normalize(&k).unwrap();
        assert_relative_eq!(p[(0, 0)], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(p[(0, 1)], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(p[(0, 2)], 0.0);
        for r in p.row_iter() {
            assert_relative_eq!(r.sum(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn non_finite_kernel_rejected() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(row_normalize(&k), Err(Error::NonFinite(_))));
    }

    #[test]
    fn spectrum_of_identity_and_two_state_chain() {
        let s = spectrum(&DMatrix::identity(4, 4)).unwrap();
        assert!(s.iter().all(|&l| (l - 1.0).abs() < 1e-12));
        // K proportional to [[0.9, 0.1], [0.1, 0.9]]: P has eigenvalues 1 and 0.8
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0 / 9.0, 1.0 / 9.0, 1.0]);
        let s = spectrum(&k).unwrap();
        assert_relative_eq!(s[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s[1], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn entropy_closed_forms() {
        assert_relative_eq!(von_neumann_entropy(&[1.0; 4], 3).unwrap(), 4f64.ln(), epsilon = 1e-14);
        assert_eq!(von_neumann_entropy(&[1.0, 0.0, 0.0], 5).unwrap(), 0.0);
        let h = -(5.0f64 / 9.0) * (5.0f64 / 9.0).ln() - (4.0f64 / 9.0) * (4.0f64 / 9.0).ln();
        assert_relative_eq!(von_neumann_entropy(&[1.0, 0.8], 1).unwrap(), h, epsilon = 1e-14);
        assert!(von_neumann_entropy(&[1.0], 0).is_err());
        assert!(von_neumann_entropy(&[0.0, 0.0], 1).is_err());
    }

    #[test]
    fn flat_curve_selects_one() {
        assert_eq!(select_t(&[1.0; 5], 100).unwrap(), 1);
        assert!(select_t(&[1.0, 0.5], 2).is_err());
    }

    #[test]
    fn knee_of_piecewise_linear_curve() {
        // steep drop until t = 7, then a gentle slope
        let curve: Vec<f64> = (1..=100)
            .map(|t| {
                let t = t as f64;
                if t <= 7.0 {
                    10.0 - 1.5 * (t - 1.0)
                } else {
                    1.0 - 0.01 * (t - 7.0)
                }
            })
            .collect();
        assert_eq!(knee(&curve), 7);
    }

    #[test]
    fn power_closed_forms() {
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        assert_eq!(matrix_power(&p, 1).unwrap(), p);
        let p2 = matrix_power(&p, 2).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.82, 0.18, 0.18, 0.82]);
        assert!((p2 - want).abs().max() < 1e-15);
        assert!(matrix_power(&p, 0).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.9]);
        assert!(matches!(matrix_power(&bad, 2), Err(Error::NotStochastic { .. })));
    }

    #[test]
    fn potential_closed_forms() {
        let pt = DMatrix::from_row_slice(2, 2, &[0.82, 0.18, 0.18, 0.82]);
        let d = potential_distances(&pt, PotentialTransform::default()).unwrap();
        let want = 2f64.sqrt() * (0.82f64 / 0.18).ln().abs();
        assert_relative_eq!(d.d[(0, 1)], want, epsilon = 1e-12);
        assert_relative_eq!(d.d[(0, 1)], 2.1444, epsilon = 1e-4);
        let d = potential_distances(&pt, PotentialTransform::Sqrt).unwrap();
        let want = (2.0 * (0.82f64.sqrt() - 0.18f64.sqrt()).powi(2)).sqrt();
        assert_relative_eq!(d.d[(0, 1)], want, epsilon = 1e-12);
        assert_relative_eq!(d.d[(0, 1)], 0.6807, epsilon = 1e-4);
        assert!(potential_distances(&pt, PotentialTransform::Log { eps: 0.0 }).is_err());
    }

    #[test]
    fn identical_rows_have_zero_distance() {
        let pt = DMatrix::from_row_slice(3, 3, &[0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.0, 0.0, 1.0]);
        let d = potential_distances(&pt, PotentialTransform::default()).unwrap();
        assert_eq!(d.d[(0, 1)], 0.0);
        assert_eq!(d.d[(2, 2)], 0.0);
        assert!(d.d[(0, 2)] > 0.0);
    }
}
