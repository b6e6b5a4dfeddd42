mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rfphate::diffusion::{
    knee, matrix_power, potential_distances, row_normalize, spectrum, vne_curve, DiffusionState,
};
use rfphate::{PotentialTransform, ProximityKernel};

/// Symmetric, nonnegative, unit-diagonal matrices.
fn kernel_strategy(max_n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..=1.0, n * (n - 1) / 2).prop_map(move |upper| {
            let mut k = DMatrix::identity(n, n);
            let mut it = upper.into_iter();
            for i in 0..n {
                for j in i + 1..n {
                    let v = it.next().unwrap();
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            k
        })
    })
}

/// exp(-|xi - xj|² / 2σ²): positive semidefinite by construction.
fn gaussian_kernel(points: &[f64], sigma: f64) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| (-(points[i] - points[j]).powi(2) / (2.0 * sigma * sigma)).exp())
}

fn naive_power(p: &DMatrix<f64>, t: usize) -> DMatrix<f64> {
    let mut out = p.clone();
    for _ in 1..t {
        out = &out * p;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn operator_rows_are_distributions(k in kernel_strategy(12)) {
        let p = row_normalize(&k).unwrap();
        for row in p.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn conjugate_spectrum_matches_operator(k in kernel_strategy(8)) {
        let p = row_normalize(&k).unwrap();
        let mut direct: Vec<f64> = p.complex_eigenvalues().iter().map(|z| {
            assert!(z.im.abs() < 1e-8, "complex eigenvalue {z}");
            z.re
        }).collect();
        direct.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let via_conjugate = spectrum(&k).unwrap();
        prop_assert_eq!(direct.len(), via_conjugate.len());
        for (a, b) in direct.iter().zip(&via_conjugate) {
            prop_assert!((a - b).abs() < 1e-8, "{:?} vs {:?}", direct, via_conjugate);
        }
        prop_assert!((via_conjugate[0] - 1.0).abs() < 1e-10);
        prop_assert!(via_conjugate.iter().all(|&l| (-1.0 - 1e-10..=1.0 + 1e-10).contains(&l)));
    }

    #[test]
    fn entropy_falls_on_psd_kernels(points in prop::collection::vec(-3.0f64..3.0, 3..15), sigma in 0.3f64..2.0) {
        let k = gaussian_kernel(&points, sigma);
        let curve = vne_curve(&spectrum(&k).unwrap(), 100).unwrap();
        let n = points.len() as f64;
        for w in curve.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{:?}", curve);
        }
        prop_assert!(curve.iter().all(|&h| (-1e-12..=n.ln() + 1e-12).contains(&h)));
    }

    #[test]
    fn knee_matches_oracle(curve in prop::collection::vec(0.0f64..5.0, 3..60)) {
        let flat = curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - curve.iter().cloned().fold(f64::INFINITY, f64::min) <= 1e-12;
        prop_assume!(!flat);
        prop_assert_eq!(knee(&curve), common::knee_oracle(&curve));
    }

    #[test]
    fn squaring_matches_repeated_products(k in kernel_strategy(10), t in 1usize..40) {
        let p = row_normalize(&k).unwrap();
        let fast = matrix_power(&p, t).unwrap();
        prop_assert!((&fast - naive_power(&p, t)).amax() < 1e-10);
        for row in fast.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn potential_distance_is_a_pseudometric(k in kernel_strategy(10), t in 1usize..6, sqrt in any::<bool>()) {
        let p = row_normalize(&k).unwrap();
        let pt = matrix_power(&p, t).unwrap();
        let transform = if sqrt { PotentialTransform::Sqrt } else { PotentialTransform::default() };
        let d = potential_distances(&pt, transform).unwrap().d;
        let n = d.nrows();
        for i in 0..n {
            prop_assert_eq!(d[(i, i)], 0.0);
            for j in 0..n {
                prop_assert!(d[(i, j)] >= 0.0);
                prop_assert_eq!(d[(i, j)], d[(j, i)]);
                for l in 0..n {
                    prop_assert!(d[(i, j)] <= d[(i, l)] + d[(l, j)] + 1e-9 * (1.0 + d[(i, j)]));
                }
            }
        }
    }
}

#[test]
fn power_64_matches_sequential_products() {
    let points: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin() * 2.0).collect();
    let p = row_normalize(&gaussian_kernel(&points, 0.5)).unwrap();
    let fast = matrix_power(&p, 64).unwrap();
    assert!((&fast - naive_power(&p, 64)).amax() < 1e-10);
}

#[test]
fn one_step_is_the_operator() {
    let k = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.0, 0.25, 0.0, 0.25, 1.0]);
    let state = DiffusionState::from_kernel(&ProximityKernel::from_matrix(k), Some(1), 100).unwrap();
    assert_eq!(state.pt, state.p);
    assert_eq!(state.t, 1);
    assert_eq!(state.entropy_curve.len(), 100);
}

#[test]
fn two_blocks_pick_the_oracle_knee() {
    // two tight clusters joined by weak links
    let n = 20;
    let k = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if (i < n / 2) == (j < n / 2) {
            0.8
        } else {
            0.02
        }
    });
    let state = DiffusionState::from_kernel(&ProximityKernel::from_matrix(k), None, 100).unwrap();
    assert_eq!(state.t, common::knee_oracle(&state.entropy_curve));
    assert!(state.t > 1 && state.t < 100, "t = {}", state.t);
}

#[test]
fn zero_steps_are_rejected() {
    let k = ProximityKernel::from_matrix(DMatrix::identity(3, 3));
    assert!(DiffusionState::from_kernel(&k, Some(0), 100).is_err());
    assert!(matrix_power(&DMatrix::identity(3, 3), 0).is_err());
}

#[test]
fn non_stochastic_operator_is_rejected() {
    let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.5, 0.5]);
    assert!(matrix_power(&p, 2).is_err());
    assert!(potential_distances(&p, PotentialTransform::Sqrt).is_err());
}
