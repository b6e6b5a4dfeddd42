//! CART random forests with out-of-bag bookkeeping.
//!
//! Trees are grown to purity (or to `min_node_size`) on bootstrap samples of
//! size n. Each tree draws its bootstrap and its per-node candidate features
//! from its own RNG stream, derived from the master seed and the tree index,
//! so a forest is bit-identical whatever the thread count.

mod importance;
mod io;
mod proximity;
mod tree;

use rand::Rng;

use crate::data::{Dataset, LabelVector, Task};
use crate::error::{Error, Result};
use crate::seed::RandomSeed;

pub use importance::{grouped_permutation_importance, permutation_importance, Importance};
pub use io::{decode_forest, encode_forest, read_forest, write_forest, FORMAT_VERSION, MAGIC};
pub use proximity::{
    compute_proximities, compute_proximities_with, ProximityKernel, ProximityNormalization,
};
pub use tree::{Node, Tree};

use tree::{majority, Response, TreeBuilder, TreeConfig};

/// How many candidate features each split examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mtry {
    /// floor(√p) for classification, max(1, floor(p/3)) for regression.
    #[default]
    Auto,
    /// floor(√n) for classification, floor(n/3) for regression, n being the
    /// number of observations; clamped to [1, p].
    Observations,
    Fixed(usize),
}

impl Mtry {
    pub fn resolve(self, task: Task, n: usize, p: usize) -> Result<usize> {
        let m = match self {
            Mtry::Auto => match task {
                Task::Classification => (p as f64).sqrt().floor() as usize,
                Task::Regression => p / 3,
            }
            .max(1),
            Mtry::Observations => {
                let m = match task {
                    Task::Classification => (n as f64).sqrt().floor() as usize,
                    Task::Regression => n / 3,
                };
                let clamped = m.clamp(1, p.max(1));
                if clamped != m {
                    log::warn!("mtry {m} from the observation count clamped to {clamped}");
                }
                clamped
            }
            Mtry::Fixed(m) => m,
        };
        if m == 0 || m > p {
            return Err(Error::InvalidParameter(format!(
                "mtry must lie in [1, {p}], got {m}"
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub mtry: Mtry,
    /// Nodes smaller than this are not split. `None` means 1 for
    /// classification and 5 for regression.
    pub min_node_size: Option<usize>,
    pub seed: RandomSeed,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: Mtry::Auto,
            min_node_size: None,
            seed: RandomSeed(42),
        }
    }
}

impl ForestParams {
    pub fn resolved_min_node_size(&self, task: Task) -> usize {
        self.min_node_size.unwrap_or(match task {
            Task::Classification => 1,
            Task::Regression => 5,
        })
    }
}

/// A trained ensemble together with each tree's bootstrap multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// `in_bag[t][i]` = how many times row i was drawn for tree t.
    pub in_bag: Vec<Vec<u32>>,
    pub task: Task,
    pub n_classes: usize,
    pub n_rows: usize,
    pub n_features: usize,
    pub mtry: usize,
    pub min_node_size: usize,
    pub seed: RandomSeed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Class(usize),
    Value(f64),
}

/// Out-of-bag error with the number of rows that were in-bag for every tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OobEstimate {
    /// Misclassification rate or mean squared error.
    pub error: f64,
    pub n_excluded: usize,
}

pub fn train_forest(ds: &Dataset, y: &LabelVector, params: &ForestParams) -> Result<Forest> {
    let n = ds.n();
    let p = ds.p();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "a forest needs at least 2 rows, got {n}"
        )));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be positive".into()));
    }
    y.validate(n)?;
    let task = y.task();
    let mtry = params.mtry.resolve(task, n, p)?;
    let min_node_size = params.resolved_min_node_size(task);
    if min_node_size == 0 {
        return Err(Error::InvalidParameter("min_node_size must be positive".into()));
    }
    let cfg = TreeConfig { mtry, min_node_size };
    let response = Response::from_labels(y);

    let grown: Vec<(Tree, Vec<u32>)> = par_map_range!(0..params.n_trees, |t| {
        let mut rng = params.seed.derive("tree", t as u64).rng();
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut counts = vec![0u32; n];
        for &r in &rows {
            counts[r] += 1;
        }
        let tree = TreeBuilder::new(&ds.x, &response, &cfg, &mut rng).build(rows);
        (tree, counts)
    });
    let (trees, in_bag) = grown.into_iter().unzip();
    Ok(Forest {
        trees,
        in_bag,
        task,
        n_classes: y.n_classes(),
        n_rows: n,
        n_features: p,
        mtry,
        min_node_size,
        seed: params.seed,
    })
}

impl Forest {
    /// Assembles a forest from hand-built trees and bootstrap counts.
    pub fn from_parts(
        trees: Vec<Tree>,
        in_bag: Vec<Vec<u32>>,
        task: Task,
        n_classes: usize,
        n_features: usize,
    ) -> Result<Self> {
        if trees.is_empty() || trees.len() != in_bag.len() {
            return Err(Error::InvalidParameter(
                "need one in-bag record per tree and at least one tree".into(),
            ));
        }
        let n_rows = in_bag[0].len();
        if in_bag.iter().any(|b| b.len() != n_rows) {
            return Err(Error::InvalidParameter("in-bag records differ in length".into()));
        }
        Ok(Forest {
            trees,
            in_bag,
            task,
            n_classes,
            n_rows,
            n_features,
            mtry: n_features.max(1),
            min_node_size: 1,
            seed: RandomSeed(0),
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn is_oob(&self, tree: usize, row: usize) -> bool {
        self.in_bag[tree][row] == 0
    }

    pub(crate) fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        if ds.n() != self.n_rows {
            return Err(Error::RowCountMismatch {
                what: "dataset".into(),
                expected: self.n_rows,
                found: ds.n(),
            });
        }
        if ds.p() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: ds.p(),
            });
        }
        Ok(())
    }

    /// Ensemble prediction: majority vote (ties to the smallest class) or mean.
    pub fn predict(&self, row: &[f64]) -> Result<Prediction> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        let outputs = self.trees.iter().map(|t| t.descend(|f| row[f]).1);
        Ok(self.aggregate(outputs))
    }

    fn aggregate(&self, outputs: impl Iterator<Item = f64>) -> Prediction {
        match self.task {
            Task::Classification => {
                let mut votes = vec![0usize; self.n_classes.max(1)];
                for v in outputs {
                    votes[v as usize] += 1;
                }
                Prediction::Class(majority(&votes))
            }
            Task::Regression => {
                let (mut sum, mut k) = (0.0, 0usize);
                for v in outputs {
                    sum += v;
                    k += 1;
                }
                Prediction::Value(sum / k as f64)
            }
        }
    }

    /// Leaf id of every row in every tree, tree-major (`t * n + i`).
    pub fn leaf_assignments(&self, ds: &Dataset) -> Result<Vec<u32>> {
        self.check_dataset(ds)?;
        let n = ds.n();
        let per_tree: Vec<Vec<u32>> = par_map_slice!(self.trees, |t: &Tree| {
            (0..n)
                .map(|i| t.descend(|f| ds.x[(i, f)]).0 as u32)
                .collect::<Vec<u32>>()
        });
        Ok(per_tree.concat())
    }

    /// Out-of-bag misclassification rate or mean squared error.
    pub fn oob_error(&self, ds: &Dataset, y: &LabelVector) -> Result<OobEstimate> {
        self.check_dataset(ds)?;
        y.validate(ds.n())?;
        let per_row: Vec<Option<f64>> = par_map_range!(0..ds.n(), |i| {
            let outputs: Vec<f64> = (0..self.n_trees())
                .filter(|&t| self.is_oob(t, i))
                .map(|t| self.trees[t].descend(|f| ds.x[(i, f)]).1)
                .collect();
            if outputs.is_empty() {
                return None;
            }
            Some(match self.aggregate(outputs.into_iter()) {
                Prediction::Class(c) => f64::from(u8::from(c as f64 != y.value(i))),
                Prediction::Value(v) => (v - y.value(i)).powi(2),
            })
        });
        let n_excluded = per_row.iter().filter(|r| r.is_none()).count();
        if n_excluded == per_row.len() {
            return Err(Error::InvalidParameter(
                "no row is out-of-bag in any tree".into(),
            ));
        }
        if n_excluded > 0 {
            log::warn!("{n_excluded} rows are in-bag for every tree and were left out of the OOB error");
        }
        let used: Vec<f64> = per_row.into_iter().flatten().collect();
        Ok(OobEstimate {
            error: used.iter().sum::<f64>() / used.len() as f64,
            n_excluded,
        })
    }
}

/// Convenience wrapper matching the free-function style of the other stages.
pub fn oob_error(forest: &Forest, ds: &Dataset, y: &LabelVector) -> Result<OobEstimate> {
    forest.oob_error(ds, y)
}

pub fn predict(forest: &Forest, row: &[f64]) -> Result<Prediction> {
    forest.predict(row)
}
