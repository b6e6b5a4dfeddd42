use std::path::Path;

use nalgebra::DMatrix;

use super::Forest;
use crate::data::{format_number, write_file, Dataset};
use crate::error::Result;

/// Denominator used when turning shared-leaf counts into proximities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProximityNormalization {
    /// Trees in which both rows were out-of-bag.
    #[default]
    CoOob,
    /// Every tree in the forest, counting only co-OOB shared leaves.
    TotalTrees,
}

/// Out-of-bag random-forest proximities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityKernel {
    /// Symmetric, unit diagonal, entries in [0, 1].
    pub k: DMatrix<f64>,
    /// Number of trees in which both rows were out-of-bag (diagonal: OOB count).
    pub coob_counts: DMatrix<u32>,
    /// Pairs (i < j) that were never out-of-bag together; their proximity is 0.
    pub never_co_oob: Vec<(usize, usize)>,
}

impl ProximityKernel {
    /// Wraps a hand-made kernel (no forest bookkeeping).
    pub fn from_matrix(k: DMatrix<f64>) -> Self {
        let n = k.nrows();
        ProximityKernel {
            k,
            coob_counts: DMatrix::zeros(n, n),
            never_co_oob: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    /// Mean of the off-diagonal entries.
    pub fn mean_off_diagonal(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let total: f64 = self.k.iter().sum::<f64>() - self.k.diagonal().sum();
        total / (n * (n - 1)) as f64
    }

    /// Dense n × n CSV with a header of 0-based row indices.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.n();
        let mut out = (0..n).map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in self.k.row_iter() {
            out.push_str(&row.iter().map(|&v| format_number(v)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        write_file(path, out.as_bytes())
    }
}

pub fn compute_proximities(forest: &Forest, ds: &Dataset) -> Result<ProximityKernel> {
    compute_proximities_with(forest, ds, ProximityNormalization::CoOob)
}

/// For every pair, counts the trees where both rows are out-of-bag and how
/// many of those put them in the same leaf. Rows are processed independently
/// with integer counts, so the result does not depend on scheduling.
pub fn compute_proximities_with(
    forest: &Forest,
    ds: &Dataset,
    normalization: ProximityNormalization,
) -> Result<ProximityKernel> {
    let n = ds.n();
    let n_trees = forest.n_trees();
    let mut leaves = forest.leaf_assignments(ds)?;
    const IN_BAG: u32 = u32::MAX;
    for (t, bag) in forest.in_bag.iter().enumerate() {
        for (i, &c) in bag.iter().enumerate() {
            if c > 0 {
                leaves[t * n + i] = IN_BAG;
            }
        }
    }

    // row i holds counts for j >= i
    let rows: Vec<(Vec<u32>, Vec<u32>)> = par_map_range!(0..n, |i| {
        let width = n - i;
        let mut co = vec![0u32; width];
        let mut same = vec![0u32; width];
        for t in 0..n_trees {
            let row = &leaves[t * n..(t + 1) * n];
            let li = row[i];
            if li == IN_BAG {
                continue;
            }
            for (off, &lj) in row[i..].iter().enumerate() {
                if lj != IN_BAG {
                    co[off] += 1;
                    if lj == li {
                        same[off] += 1;
                    }
                }
            }
        }
        (co, same)
    });

    let mut k = DMatrix::<f64>::zeros(n, n);
    let mut coob = DMatrix::<u32>::zeros(n, n);
    let mut never = Vec::new();
    for (i, (co, same)) in rows.iter().enumerate() {
        coob[(i, i)] = co[0];
        k[(i, i)] = 1.0;
        for off in 1..co.len() {
            let j = i + off;
            coob[(i, j)] = co[off];
            coob[(j, i)] = co[off];
            let value = if co[off] == 0 {
                never.push((i, j));
                0.0
            } else {
                match normalization {
                    ProximityNormalization::CoOob => f64::from(same[off]) / f64::from(co[off]),
                    ProximityNormalization::TotalTrees => {
                        f64::from(same[off]) / n_trees as f64
                    }
                }
            };
            k[(i, j)] = value;
            k[(j, i)] = value;
        }
    }
    if !never.is_empty() {
        log::warn!(
            "{} pairs were never out-of-bag together; their proximity is set to 0",
            never.len()
        );
    }
    Ok(ProximityKernel {
        k,
        coob_counts: coob,
        never_co_oob: never,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{train_forest, ForestParams, Tree};
    use super::*;
    use crate::data::{LabelVector, Task};

    fn points(vals: &[f64]) -> Dataset {
        Dataset::from_matrix(DMatrix::from_column_slice(vals.len(), 1, vals), vec!["x".into()]).unwrap()
    }

    #[test]
    fn single_leaf_tree_gives_unit_proximity() {
        let ds = points(&[0.0, 1.0]);
        let f = Forest::from_parts(vec![Tree::leaf(0.0)], vec![vec![0, 0]], Task::Classification, 1, 1)
            .unwrap();
        let k = compute_proximities(&f, &ds).unwrap();
        assert_eq!(k.k[(0, 1)], 1.0);
        assert_eq!(k.coob_counts[(0, 1)], 1);
    }

    #[test]
    fn two_stumps_half_proximity() {
        // rows 0 and 1 are OOB in both trees; row 2 in-bag in both.
        // stump A keeps 0 and 1 together, stump B separates them.
        let ds = points(&[0.0, 1.0, 2.0]);
        let a = Tree::stump(0, 1.5, 0.0, 1.0);
        let b = Tree::stump(0, 0.5, 0.0, 1.0);
        let f = Forest::from_parts(vec![a, b], vec![vec![0, 0, 3], vec![0, 0, 3]], Task::Classification, 2, 1)
            .unwrap();
        let k = compute_proximities(&f, &ds).unwrap();
        assert_eq!(k.k[(0, 1)], 0.5);
        assert_eq!(k.k[(1, 0)], 0.5);
        // row 2 is never OOB
        assert_eq!(k.k[(0, 2)], 0.0);
        assert!(k.never_co_oob.contains(&(0, 2)));
        assert_eq!(k.k[(2, 2)], 1.0);
        let lit = compute_proximities_with(&f, &ds, ProximityNormalization::TotalTrees).unwrap();
        assert_eq!(lit.k[(0, 1)], 0.5);
    }

    #[test]
    fn row_count_mismatch_errors() {
        let f = Forest::from_parts(vec![Tree::leaf(0.0)], vec![vec![0, 0]], Task::Classification, 1, 1)
            .unwrap();
        assert!(compute_proximities(&f, &points(&[0.0, 1.0, 2.0])).is_err());
    }

    #[test]
    fn trained_kernel_invariants() {
        let n = 25;
        let x = DMatrix::from_fn(n, 2, |i, j| ((i * 31 + j * 17) % 23) as f64);
        let ds = Dataset::from_matrix(x, vec!["a".into(), "b".into()]).unwrap();
        let y = LabelVector::classes((0..n).map(|i| i % 3).collect());
        let f = train_forest(&ds, &y, &ForestParams { n_trees: 50, ..Default::default() }).unwrap();
        let k = compute_proximities(&f, &ds).unwrap();
        for i in 0..n {
            assert_eq!(k.k[(i, i)], 1.0);
            for j in 0..n {
                assert_eq!(k.k[(i, j)], k.k[(j, i)]);
                assert!((0.0..=1.0).contains(&k.k[(i, j)]));
            }
        }
    }
}
