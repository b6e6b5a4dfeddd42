//! k-NN cross-validated variable regression on embedding coordinates, and
//! the experiment drivers built on it.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::data::{csv_field, format_number, mean_sd, noise_augment, write_file, Dataset, LabelVector, VariableValues};
use crate::embed::{embed_kernel, run_rf_phate, Embedding, RfPhateParams};
use crate::error::{Error, Result};
use crate::forest::{compute_proximities_with, train_forest, Mtry};
use crate::seed::RandomSeed;

pub const DEFAULT_FOLDS: usize = 10;
/// Numeric variables with integer values and at most this many levels are
/// scored as categorical when the kind is inferred.
pub const AUTO_CATEGORICAL_MAX_LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    ErrorRate,
    Rmse,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::ErrorRate => "error_rate",
            Metric::Rmse => "rmse",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Categorical,
    Continuous,
}

/// Scale on which continuous targets are predicted and scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetScale {
    /// Centred and divided by the sample standard deviation.
    #[default]
    Standardized,
    Raw,
}

/// A variable to predict from embedding coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub name: String,
    pub kind: TargetKind,
    /// Class indices for categorical targets, values otherwise.
    pub values: Vec<f64>,
}

fn standardize_target(values: &[f64]) -> Vec<f64> {
    let (mean, sd) = mean_sd(values);
    if sd == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / sd).collect()
}

fn codes_of(values: &[f64]) -> Vec<f64> {
    let mut levels: Vec<f64> = values.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    values
        .iter()
        .map(|v| levels.partition_point(|l| l < v) as f64)
        .collect()
}

fn looks_categorical(values: &[f64]) -> bool {
    if values.iter().any(|v| v.fract() != 0.0) {
        return false;
    }
    let mut levels: Vec<f64> = values.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels.len() <= AUTO_CATEGORICAL_MAX_LEVELS
}

impl Target {
    /// Builds a target from an original variable of `ds`. One-hot groups are
    /// categorical; numeric variables are categorical when `kind` says so or,
    /// if `kind` is `None`, when they hold few integer levels.
    pub fn from_variable(ds: &Dataset, name: &str, kind: Option<TargetKind>, scale: TargetScale) -> Result<Self> {
        let var = ds
            .variable(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        let (kind, values) = match &var.values {
            VariableValues::Categorical { codes, .. } => {
                if kind == Some(TargetKind::Continuous) {
                    return Err(Error::InvalidParameter(format!(
                        "variable `{name}` is categorical and cannot be scored as continuous"
                    )));
                }
                (TargetKind::Categorical, codes.iter().map(|&c| c as f64).collect())
            }
            VariableValues::Continuous(v) => {
                let kind = kind.unwrap_or(if looks_categorical(v) {
                    TargetKind::Categorical
                } else {
                    TargetKind::Continuous
                });
                match kind {
                    TargetKind::Categorical => (kind, codes_of(v)),
                    TargetKind::Continuous => (kind, scaled(v, scale)),
                }
            }
        };
        Ok(Target {
            name: name.to_string(),
            kind,
            values,
        })
    }

    /// Builds a target from the response labels.
    pub fn from_labels(name: &str, y: &LabelVector, scale: TargetScale) -> Self {
        match y {
            LabelVector::Classification { classes, .. } => Target {
                name: name.to_string(),
                kind: TargetKind::Categorical,
                values: classes.iter().map(|&c| c as f64).collect(),
            },
            LabelVector::Regression(v) => Target {
                name: name.to_string(),
                kind: TargetKind::Continuous,
                values: scaled(v, scale),
            },
        }
    }
}

fn scaled(v: &[f64], scale: TargetScale) -> Vec<f64> {
    match scale {
        TargetScale::Standardized => standardize_target(v),
        TargetScale::Raw => v.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub variable: String,
    pub dims: usize,
    pub metric: Metric,
    /// Mean of the per-fold scores, or of per-repeat scores in a summary.
    pub score: f64,
    /// Sample standard deviation matching `score`.
    pub sd: f64,
    pub k_used: usize,
    pub fold_seed: RandomSeed,
    pub fold_scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    pub n_folds: usize,
    /// Deal each class out across folds instead of plain random splits.
    /// Only applies to categorical targets.
    pub stratified: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            n_folds: DEFAULT_FOLDS,
            stratified: false,
        }
    }
}

/// Shuffles `0..n` with `seed` and cuts it into `n_folds` contiguous,
/// near-equal folds; the first `n % n_folds` folds get one extra row.
pub fn fold_assignment(n: usize, n_folds: usize, seed: RandomSeed) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());
    let base = n / n_folds;
    let extra = n % n_folds;
    let mut folds = Vec::with_capacity(n_folds);
    let mut start = 0;
    for f in 0..n_folds {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    folds
}

fn stratified_folds(classes: &[f64], n_folds: usize, seed: RandomSeed) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.shuffle(&mut seed.rng());
    order.sort_by(|&a, &b| classes[a].total_cmp(&classes[b]));
    let mut folds = vec![Vec::new(); n_folds];
    for (pos, &i) in order.iter().enumerate() {
        folds[pos % n_folds].push(i);
    }
    folds
}

fn sq_dist(y: &nalgebra::DMatrix<f64>, a: usize, b: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..y.ncols() {
        let d = y[(a, k)] - y[(b, k)];
        s += d * d;
    }
    s
}

/// Predicts row `i` from its `k` nearest rows in `train`. Distance ties go to
/// the smaller row index, vote ties to the smaller class.
fn knn_predict(y: &nalgebra::DMatrix<f64>, target: &Target, train: &[usize], i: usize, k: usize) -> f64 {
    let mut cand: Vec<(f64, usize)> = train.iter().map(|&j| (sq_dist(y, i, j), j)).collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &cand[..k];
    match target.kind {
        TargetKind::Continuous => nearest.iter().map(|&(_, j)| target.values[j]).sum::<f64>() / k as f64,
        TargetKind::Categorical => {
            let n_classes = target.values.iter().fold(0.0f64, |m, &v| m.max(v)) as usize + 1;
            let mut votes = vec![0usize; n_classes];
            for &(_, j) in nearest {
                votes[target.values[j] as usize] += 1;
            }
            let mut best = 0;
            for c in 1..n_classes {
                if votes[c] > votes[best] {
                    best = c;
                }
            }
            best as f64
        }
    }
}

/// 10-fold k-NN cross-validation with k = ⌊√n⌋.
pub fn knn_cv_score(emb: &Embedding, target: &Target, seed: RandomSeed) -> Result<EvalReport> {
    knn_cv_score_with(emb, target, seed, &CvOptions::default())
}

pub fn knn_cv_score_with(emb: &Embedding, target: &Target, seed: RandomSeed, opts: &CvOptions) -> Result<EvalReport> {
    let n = emb.n();
    if opts.n_folds < 2 {
        return Err(Error::InvalidParameter("at least two folds are required".into()));
    }
    if n < 2 * opts.n_folds {
        return Err(Error::InvalidParameter(format!(
            "{n} rows cannot fill {} folds with at least two rows each",
            opts.n_folds
        )));
    }
    let folds = if opts.stratified && target.kind == TargetKind::Categorical {
        stratified_folds(&target.values, opts.n_folds, seed)
    } else {
        fold_assignment(n, opts.n_folds, seed)
    };
    let (fold_scores, k) = cv_fold_scores(emb, target, &folds)?;
    let (score, sd) = mean_sd(&fold_scores);
    Ok(EvalReport {
        variable: target.name.clone(),
        dims: emb.m(),
        metric: match target.kind {
            TargetKind::Categorical => Metric::ErrorRate,
            TargetKind::Continuous => Metric::Rmse,
        },
        score,
        sd,
        k_used: k,
        fold_seed: seed,
        fold_scores,
    })
}

/// Per-fold k-NN scores for an explicit partition of the rows, and the k used.
pub fn cv_fold_scores(emb: &Embedding, target: &Target, folds: &[Vec<usize>]) -> Result<(Vec<f64>, usize)> {
    let n = emb.n();
    if target.values.len() != n {
        return Err(Error::RowCountMismatch {
            what: format!("target `{}`", target.name),
            expected: n,
            found: target.values.len(),
        });
    }
    if emb.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding coordinates".into()));
    }
    if target.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("target `{}`", target.name)));
    }
    if folds.len() < 2 {
        return Err(Error::InvalidParameter("at least two folds are required".into()));
    }
    let mut in_fold = vec![usize::MAX; n];
    for (f, rows) in folds.iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::InvalidParameter(format!("fold {f} has fewer than two rows")));
        }
        for &i in rows {
            if i >= n || in_fold[i] != usize::MAX {
                return Err(Error::InvalidParameter(format!("folds do not partition 0..{n} (row {i})")));
            }
            in_fold[i] = f;
        }
    }
    if let Some(i) = in_fold.iter().position(|&f| f == usize::MAX) {
        return Err(Error::InvalidParameter(format!("row {i} is in no fold")));
    }
    let k_nominal = (n as f64).sqrt().floor() as usize;
    let min_train = n - folds.iter().map(Vec::len).max().unwrap_or(0);
    let k = if k_nominal >= min_train {
        log::warn!("k = {k_nominal} is not below the training-fold size {min_train}; clamping");
        min_train - 1
    } else {
        k_nominal
    };
    let fold_scores: Vec<f64> = par_map_range!(0..folds.len(), |f| {
        let train: Vec<usize> = (0..n).filter(|&i| in_fold[i] != f).collect();
        let test = &folds[f];
        let mut acc = 0.0;
        for &i in test {
            let pred = knn_predict(&emb.y, target, &train, i, k);
            acc += match target.kind {
                TargetKind::Categorical => f64::from(u8::from(pred != target.values[i])),
                TargetKind::Continuous => (pred - target.values[i]).powi(2),
            };
        }
        let mean = acc / test.len() as f64;
        match target.kind {
            TargetKind::Categorical => mean,
            TargetKind::Continuous => mean.sqrt(),
        }
    });
    Ok((fold_scores, k))
}

/// Scores over an `mtry` × `t` grid. Rows follow `mtry_values`, columns `t_values`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub mtry_values: Vec<usize>,
    pub t_values: Vec<usize>,
    pub scores: Vec<Vec<f64>>,
    pub metric: Metric,
}

impl SweepGrid {
    pub fn spread(&self) -> f64 {
        let all = self.scores.iter().flatten();
        let max = all.clone().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min = all.fold(f64::INFINITY, |a, &b| a.min(b));
        max - min
    }

    /// Long format, one `mtry,t,score` line per cell.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = format!("mtry,t,{}\n", self.metric);
        for (a, &mtry) in self.mtry_values.iter().enumerate() {
            for (b, &t) in self.t_values.iter().enumerate() {
                out.push_str(&format!("{mtry},{t},{}\n", format_number(self.scores[a][b])));
            }
        }
        write_file(path, out.as_bytes())
    }
}

fn sorted_axis(values: &[usize], what: &str) -> Result<Vec<usize>> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    if v.is_empty() {
        return Err(Error::InvalidParameter(format!("{what} grid is empty")));
    }
    if v[0] == 0 {
        return Err(Error::InvalidParameter(format!("{what} values must be positive")));
    }
    Ok(v)
}

/// Embeds with every (mtry, t) pair and scores `target`. Each mtry value
/// trains one forest with `params.forest.seed`; `fold_seed` is shared by all cells.
pub fn robustness_sweep(
    ds: &Dataset,
    y: &LabelVector,
    params: &RfPhateParams,
    mtry_values: &[usize],
    t_values: &[usize],
    target: &Target,
    fold_seed: RandomSeed,
) -> Result<SweepGrid> {
    let mtry_values = sorted_axis(mtry_values, "mtry")?;
    let t_values = sorted_axis(t_values, "t")?;
    let mut scores = Vec::with_capacity(mtry_values.len());
    let mut metric = Metric::ErrorRate;
    for &mtry in &mtry_values {
        let mut cell = params.clone();
        cell.forest.mtry = Mtry::Fixed(mtry);
        let forest = train_forest(ds, y, &cell.forest)?;
        let kernel = compute_proximities_with(&forest, ds, cell.normalization)?;
        let mut row = Vec::with_capacity(t_values.len());
        for &t in &t_values {
            cell.t = Some(t);
            let (emb, _, _) = embed_kernel(&kernel, &cell)?;
            let report = knn_cv_score(&emb, target, fold_seed)?;
            metric = report.metric;
            log::info!("sweep mtry={mtry} t={t}: {} = {:.4}", report.metric, report.score);
            row.push(report.score);
        }
        scores.push(row);
    }
    Ok(SweepGrid {
        mtry_values,
        t_values,
        scores,
        metric,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReport {
    /// `runs[r][v]`: repeat r, original variable v.
    pub runs: Vec<Vec<EvalReport>>,
    /// Mean and standard deviation across repeats, one entry per variable.
    pub summary: Vec<EvalReport>,
}

/// Seeds used by one repeat of the noise experiment.
pub fn noise_repeat_seeds(seed: RandomSeed, repeat: usize) -> (RandomSeed, RandomSeed, RandomSeed) {
    let r = repeat as u64;
    (seed.derive("noise", r), seed.derive("forest", r), seed.derive("folds", r))
}

/// Appends `q` Gaussian noise columns, embeds, and scores every original
/// variable; repeated `repeats` times with independent derived seeds.
pub fn run_noise_experiment(
    ds: &Dataset,
    y: &LabelVector,
    q: usize,
    params: &RfPhateParams,
    repeats: usize,
    seed: RandomSeed,
    scale: TargetScale,
) -> Result<NoiseReport> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let targets = ds
        .variables
        .iter()
        .map(|v| Target::from_variable(ds, &v.name, None, scale))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let (noise_seed, forest_seed, fold_seed) = noise_repeat_seeds(seed, r);
        let augmented = noise_augment(ds, q, noise_seed);
        let mut p = params.clone();
        p.forest.seed = forest_seed;
        let out = run_rf_phate(&augmented, y, &p)?;
        let reports = targets
            .iter()
            .map(|t| knn_cv_score(&out.embedding, t, fold_seed))
            .collect::<Result<Vec<_>>>()?;
        for rep in &reports {
            log::info!("noise repeat {r}: {} {} = {:.4}", rep.variable, rep.metric, rep.score);
        }
        runs.push(reports);
    }
    let summary = (0..targets.len())
        .map(|v| {
            let scores: Vec<f64> = runs.iter().map(|run| run[v].score).collect();
            let (score, sd) = mean_sd(&scores);
            EvalReport {
                score,
                sd,
                fold_scores: scores,
                ..runs[0][v].clone()
            }
        })
        .collect();
    Ok(NoiseReport { runs, summary })
}

/// `variable,dims,metric,score,sd,k_used,fold_seed`, one line per report.
pub fn write_reports_csv(reports: &[EvalReport], path: &Path) -> Result<()> {
    let mut out = String::from("variable,dims,metric,score,sd,k_used,fold_seed\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            csv_field(&r.variable),
            r.dims,
            r.metric,
            format_number(r.score),
            format_number(r.sd),
            r.k_used,
            r.fold_seed.0
        ));
    }
    write_file(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingMethod;
    use nalgebra::DMatrix;

    fn target(kind: TargetKind, values: Vec<f64>) -> Target {
        Target {
            name: "t".into(),
            kind,
            values,
        }
    }

    #[test]
    fn folds_partition_rows() {
        let folds = fold_assignment(23, 10, RandomSeed(3));
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(folds, fold_assignment(23, 10, RandomSeed(3)));
    }

    #[test]
    fn self_predictive_embedding() {
        let n = 400;
        let v: Vec<f64> = (0..n).map(|i| ((i * 7) % n) as f64 * 0.1).collect();
        let y = DMatrix::from_fn(n, 2, |i, j| if j == 0 { v[i] } else { 0.0 });
        let emb = Embedding::from_coordinates(y, EmbeddingMethod::ClassicalMds);
        let t = target(TargetKind::Continuous, v.clone());
        let r = knn_cv_score(&emb, &t, RandomSeed(1)).unwrap();
        let (_, sd) = mean_sd(&v);
        assert_eq!(r.metric, Metric::Rmse);
        assert_eq!(r.k_used, 20);
        assert!(r.score < 0.05 * sd, "{} vs {}", r.score, sd);
    }

    #[test]
    fn separated_classes_score_zero() {
        let n = 40;
        let y = DMatrix::from_fn(n, 1, |i, _| if i < 20 { i as f64 } else { 100.0 + i as f64 });
        let emb = Embedding::from_coordinates(y, EmbeddingMethod::ClassicalMds);
        let t = target(TargetKind::Categorical, (0..n).map(|i| f64::from(u8::from(i >= 20))).collect());
        let r = knn_cv_score(&emb, &t, RandomSeed(9)).unwrap();
        assert_eq!(r.score, 0.0);
        let strat = knn_cv_score_with(&emb, &t, RandomSeed(9), &CvOptions { stratified: true, ..Default::default() }).unwrap();
        assert_eq!(strat.score, 0.0);
    }

    #[test]
    fn rejects_small_or_mismatched_inputs() {
        let emb = Embedding::from_coordinates(DMatrix::zeros(15, 2), EmbeddingMethod::ClassicalMds);
        assert!(knn_cv_score(&emb, &target(TargetKind::Continuous, vec![0.0; 15]), RandomSeed(0)).is_err());
        let emb = Embedding::from_coordinates(DMatrix::zeros(30, 2), EmbeddingMethod::ClassicalMds);
        assert!(knn_cv_score(&emb, &target(TargetKind::Continuous, vec![0.0; 29]), RandomSeed(0)).is_err());
    }

    #[test]
    fn vote_ties_go_to_smaller_class() {
        // all points coincide, so the k nearest are the k smallest training indices
        let n = 20;
        let emb = Embedding::from_coordinates(DMatrix::zeros(n, 1), EmbeddingMethod::ClassicalMds);
        let t = target(TargetKind::Categorical, (0..n).map(|i| (i % 2) as f64).collect());
        let train: Vec<usize> = (1..n).collect();
        // k = 4 nearest: rows 1..=4 -> classes 1,0,1,0 -> tie -> class 0
        assert_eq!(knn_predict(&emb.y, &t, &train, 0, 4), 0.0);
    }

    #[test]
    fn categorical_codes_follow_sorted_levels() {
        assert_eq!(codes_of(&[3.0, 1.0, 2.0, 3.0]), vec![2.0, 0.0, 1.0, 2.0]);
        assert!(looks_categorical(&[1.0, 2.0, 3.0, 1.0]));
        assert!(!looks_categorical(&[1.5, 2.0]));
        assert!(!looks_categorical(&(0..6).map(f64::from).collect::<Vec<_>>()));
    }

    #[test]
    fn report_csv_layout() {
        let r = EvalReport {
            variable: "Sex".into(),
            dims: 2,
            metric: Metric::ErrorRate,
            score: 0.25,
            sd: 0.0,
            k_used: 26,
            fold_seed: RandomSeed(7),
            fold_scores: vec![],
        };
        let file = tempfile::NamedTempFile::new().unwrap();
        write_reports_csv(&[r], file.path()).unwrap();
        let text = std::fs::read_to_string(file.path()).unwrap();
        assert_eq!(text, "variable,dims,metric,score,sd,k_used,fold_seed\nSex,2,error_rate,0.25,0,26,7\n");
    }
}
