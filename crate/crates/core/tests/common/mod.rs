#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use rfphate::{load_csv, preprocess, Dataset, Forest, LabelVector, MissingPolicy, TaskHint};

pub fn data_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

pub fn load(file: &str, label: &str) -> (Dataset, LabelVector) {
    let (raw, y) = load_csv(&data_path(file), label, TaskHint::Classification).unwrap();
    preprocess(&raw, &y, MissingPolicy::DropRows).unwrap()
}

pub fn titanic() -> (Dataset, LabelVector) {
    load("titanic.csv", "Survived")
}

pub fn iris() -> (Dataset, LabelVector) {
    load("iris.csv", "species")
}

/// Proximities straight from the definition: for every pair, walk every tree
/// and count the trees where both rows are out of bag and share a leaf.
pub fn brute_force_proximity(forest: &Forest, ds: &Dataset) -> DMatrix<f64> {
    let n = ds.n();
    let leaf = |t: usize, i: usize| forest.trees[t].descend(|f| ds.x[(i, f)]).0;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        let mut co_oob = 0;
        let mut same = 0;
        for t in 0..forest.n_trees() {
            if forest.in_bag[t][i] == 0 && forest.in_bag[t][j] == 0 {
                co_oob += 1;
                if leaf(t, i) == leaf(t, j) {
                    same += 1;
                }
            }
        }
        if co_oob == 0 {
            0.0
        } else {
            same as f64 / co_oob as f64
        }
    })
}

/// Knee by scanning the chord distance with no shortcuts.
pub fn knee_oracle(curve: &[f64]) -> usize {
    let n = curve.len();
    let (x0, y0, x1, y1) = (1.0, curve[0], n as f64, curve[n - 1]);
    let norm = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let mut best = (0.0, 1);
    for (i, &h) in curve.iter().enumerate() {
        let x = (i + 1) as f64;
        let dist = ((y1 - y0) * x - (x1 - x0) * h + x1 * y0 - y1 * x0).abs() / norm;
        if dist > best.0 {
            best = (dist, i + 1);
        }
    }
    best.1
}

/// Leave-fold-out k-NN written independently of the library: full distance
/// matrix, stable sort by (distance, index), plain vote or mean.
pub fn knn_cv_oracle(y: &DMatrix<f64>, target: &[f64], categorical: bool, folds: &[Vec<usize>], k: usize) -> f64 {
    let n = y.nrows();
    let dist = DMatrix::from_fn(n, n, |i, j| (y.row(i) - y.row(j)).norm_squared());
    let mut per_fold = Vec::new();
    for fold in folds {
        let mut total = 0.0;
        for &i in fold {
            let mut others: Vec<usize> = (0..n).filter(|j| !fold.contains(j)).collect();
            others.sort_by(|&a, &b| dist[(i, a)].partial_cmp(&dist[(i, b)]).unwrap().then(a.cmp(&b)));
            let nn = &others[..k];
            if categorical {
                let mut counts = std::collections::BTreeMap::new();
                for &j in nn {
                    *counts.entry(target[j] as i64).or_insert(0) += 1;
                }
                let top = counts.values().copied().max().unwrap();
                let pred = *counts.iter().find(|(_, &c)| c == top).unwrap().0 as f64;
                total += if pred == target[i] { 0.0 } else { 1.0 };
            } else {
                let pred: f64 = nn.iter().map(|&j| target[j]).sum::<f64>() / k as f64;
                total += (pred - target[i]).powi(2);
            }
        }
        let mean = total / fold.len() as f64;
        per_fold.push(if categorical { mean } else { mean.sqrt() });
    }
    per_fold.iter().sum::<f64>() / per_fold.len() as f64
}
