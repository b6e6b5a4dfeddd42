use rand::seq::SliceRandom;

use super::Forest;
use crate::data::{Dataset, LabelVector, Task};
use crate::error::{Error, Result};
use crate::seed::RandomSeed;

/// Mean decrease in accuracy (or increase in MSE) per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Importance {
    pub names: Vec<String>,
    /// Mean over trees of (permuted OOB error − OOB error).
    pub mean: Vec<f64>,
    /// Standard error of that mean across trees.
    pub std_error: Vec<f64>,
}

impl Importance {
    /// Indices by descending importance; ties keep the original order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.mean.len()).collect();
        idx.sort_by(|&a, &b| self.mean[b].total_cmp(&self.mean[a]).then(a.cmp(&b)));
        idx
    }

    pub fn top(&self, k: usize) -> Vec<(&str, f64)> {
        self.ranking()
            .into_iter()
            .take(k)
            .map(|i| (self.names[i].as_str(), self.mean[i]))
            .collect()
    }
}

/// Importance of every feature column on its own.
pub fn permutation_importance(
    forest: &Forest,
    ds: &Dataset,
    y: &LabelVector,
    seed: RandomSeed,
) -> Result<Importance> {
    let groups: Vec<Vec<usize>> = (0..ds.p()).map(|j| vec![j]).collect();
    importance_for_groups(forest, ds, y, &groups, ds.feature_names.clone(), seed)
}

/// Importance of every original variable; the one-hot columns of a
/// categorical variable are permuted together.
pub fn grouped_permutation_importance(
    forest: &Forest,
    ds: &Dataset,
    y: &LabelVector,
    seed: RandomSeed,
) -> Result<Importance> {
    let names = ds.variables.iter().map(|v| v.name.clone()).collect();
    importance_for_groups(forest, ds, y, &ds.variable_groups(), names, seed)
}

fn importance_for_groups(
    forest: &Forest,
    ds: &Dataset,
    y: &LabelVector,
    groups: &[Vec<usize>],
    names: Vec<String>,
    seed: RandomSeed,
) -> Result<Importance> {
    forest.check_dataset(ds)?;
    y.validate(ds.n())?;
    if y.task() != forest.task {
        return Err(Error::InvalidParameter("label task differs from the forest's".into()));
    }
    let n_groups = groups.len();
    let loss = |pred: f64, truth: f64| match forest.task {
        Task::Classification => f64::from(u8::from(pred != truth)),
        Task::Regression => (pred - truth) * (pred - truth),
    };

    let per_tree: Vec<Option<Vec<f64>>> = par_map_range!(0..forest.n_trees(), |t| {
        let tree = &forest.trees[t];
        let oob: Vec<usize> = (0..ds.n()).filter(|&i| forest.is_oob(t, i)).collect();
        if oob.is_empty() {
            return None;
        }
        let m = oob.len() as f64;
        let base: f64 = oob
            .iter()
            .map(|&i| loss(tree.descend(|f| ds.x[(i, f)]).1, y.value(i)))
            .sum::<f64>()
            / m;
        let mut membership = vec![false; ds.p()];
        let increases = groups
            .iter()
            .enumerate()
            .map(|(g, cols)| {
                let mut rng = seed.derive("importance", ((t as u64) << 32) | g as u64).rng();
                let mut donors = oob.clone();
                donors.shuffle(&mut rng);
                for &c in cols {
                    membership[c] = true;
                }
                let permuted: f64 = oob
                    .iter()
                    .zip(&donors)
                    .map(|(&i, &d)| {
                        let pred = tree
                            .descend(|f| if membership[f] { ds.x[(d, f)] } else { ds.x[(i, f)] })
                            .1;
                        loss(pred, y.value(i))
                    })
                    .sum::<f64>()
                    / m;
                for &c in cols {
                    membership[c] = false;
                }
                permuted - base
            })
            .collect();
        Some(increases)
    });

    let used: Vec<Vec<f64>> = per_tree.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::InvalidParameter("no tree has out-of-bag rows".into()));
    }
    let k = used.len() as f64;
    let mut mean = vec![0.0; n_groups];
    for inc in &used {
        for (g, v) in inc.iter().enumerate() {
            mean[g] += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= k);
    let std_error = (0..n_groups)
        .map(|g| {
            if used.len() < 2 {
                return 0.0;
            }
            let ss: f64 = used.iter().map(|inc| (inc[g] - mean[g]).powi(2)).sum();
            (ss / (k - 1.0)).sqrt() / k.sqrt()
        })
        .collect();
    Ok(Importance {
        names,
        mean,
        std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{train_forest, ForestParams};
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn informative_feature_ranks_first() {
        let n = 120;
        // column 1 decides the class, column 0 is a deterministic scramble
        let x = DMatrix::from_fn(n, 2, |i, j| {
            if j == 1 {
                i as f64
            } else {
                ((i * 7919) % 113) as f64
            }
        });
        let ds = Dataset::from_matrix(x, vec!["noise".into(), "signal".into()]).unwrap();
        let y = LabelVector::classes((0..n).map(|i| usize::from(i >= n / 2)).collect());
        let f = train_forest(&ds, &y, &ForestParams { n_trees: 100, mtry: crate::forest::Mtry::Fixed(2), ..Default::default() })
            .unwrap();
        let imp = permutation_importance(&f, &ds, &y, RandomSeed(5)).unwrap();
        assert_eq!(imp.ranking(), vec![1, 0]);
        assert!(imp.mean[1] > 0.3);
        assert!(imp.mean[0].abs() < 0.05);
        assert_eq!(imp.top(1)[0].0, "signal");
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        let imp = Importance {
            names: vec!["a".into(), "b".into(), "c".into()],
            mean: vec![0.1, 0.3, 0.1],
            std_error: vec![0.0; 3],
        };
        assert_eq!(imp.ranking(), vec![1, 0, 2]);
    }
}
