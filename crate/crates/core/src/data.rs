//! CSV ingestion, missing-value handling, one-hot encoding and standardization.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed::RandomSeed;

/// Labels with at most this many distinct values are treated as classes when
/// the task is inferred.
pub const AUTO_CLASSIFICATION_MAX_DISTINCT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaskHint {
    #[default]
    Auto,
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Remove every row with a missing value in any feature column.
    #[default]
    DropRows,
    /// Missing categorical entries become the category `none`, missing
    /// numeric entries become 0 before standardization.
    ImputeZeroNone,
}

/// One unprocessed CSV column. `None` marks a missing entry.
#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric {
        name: String,
        values: Vec<Option<f64>>,
    },
    Categorical {
        name: String,
        values: Vec<Option<String>>,
    },
}

impl RawColumn {
    pub fn name(&self) -> &str {
        match self {
            RawColumn::Numeric { name, .. } | RawColumn::Categorical { name, .. } => name,
        }
    }

    fn len(&self) -> usize {
        match self {
            RawColumn::Numeric { values, .. } => values.len(),
            RawColumn::Categorical { values, .. } => values.len(),
        }
    }

    fn is_missing(&self, row: usize) -> bool {
        match self {
            RawColumn::Numeric { values, .. } => values[row].is_none(),
            RawColumn::Categorical { values, .. } => values[row].is_none(),
        }
    }
}

/// Feature columns as read from disk, before encoding and scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub columns: Vec<RawColumn>,
    pub n_rows: usize,
}

impl RawDataset {
    pub fn new(columns: Vec<RawColumn>) -> Result<Self> {
        let n_rows = columns.first().map(RawColumn::len).unwrap_or(0);
        if let Some(bad) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(Error::RowCountMismatch {
                what: format!("column `{}`", bad.name()),
                expected: n_rows,
                found: bad.len(),
            });
        }
        Ok(RawDataset { columns, n_rows })
    }

    /// Numeric raw table from an already-processed dataset's feature matrix.
    pub fn from_dataset(ds: &Dataset) -> Self {
        let columns = (0..ds.p())
            .map(|j| RawColumn::Numeric {
                name: ds.feature_names[j].clone(),
                values: ds.x.column(j).iter().map(|&v| Some(v)).collect(),
            })
            .collect();
        RawDataset {
            columns,
            n_rows: ds.n(),
        }
    }
}

/// Response vector. Class labels are contiguous indices into `class_names`.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelVector {
    Classification {
        classes: Vec<usize>,
        class_names: Vec<String>,
    },
    Regression(Vec<f64>),
}

impl LabelVector {
    /// Classification labels from raw indices; class names default to the index.
    pub fn classes(classes: Vec<usize>) -> Self {
        let c = classes.iter().copied().max().map_or(0, |m| m + 1);
        LabelVector::Classification {
            classes,
            class_names: (0..c).map(|i| i.to_string()).collect(),
        }
    }

    pub fn task(&self) -> Task {
        match self {
            LabelVector::Classification { .. } => Task::Classification,
            LabelVector::Regression(_) => Task::Regression,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LabelVector::Classification { classes, .. } => classes.len(),
            LabelVector::Regression(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of classes; zero for regression.
    pub fn n_classes(&self) -> usize {
        match self {
            LabelVector::Classification { class_names, .. } => class_names.len(),
            LabelVector::Regression(_) => 0,
        }
    }

    /// Label `i` as a real number (class index for classification).
    pub fn value(&self, i: usize) -> f64 {
        match self {
            LabelVector::Classification { classes, .. } => classes[i] as f64,
            LabelVector::Regression(v) => v[i],
        }
    }

    pub fn select(&self, rows: &[usize]) -> LabelVector {
        match self {
            LabelVector::Classification {
                classes,
                class_names,
            } => LabelVector::Classification {
                classes: rows.iter().map(|&r| classes[r]).collect(),
                class_names: class_names.clone(),
            },
            LabelVector::Regression(v) => {
                LabelVector::Regression(rows.iter().map(|&r| v[r]).collect())
            }
        }
    }

    pub fn display(&self, i: usize) -> String {
        match self {
            LabelVector::Classification {
                classes,
                class_names,
            } => class_names[classes[i]].clone(),
            LabelVector::Regression(v) => format_number(v[i]),
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::RowCountMismatch {
                what: "label vector".into(),
                expected: n,
                found: self.len(),
            });
        }
        match self {
            LabelVector::Classification {
                classes,
                class_names,
            } => {
                if let Some(&bad) = classes.iter().find(|&&c| c >= class_names.len()) {
                    return Err(Error::InvalidParameter(format!(
                        "class index {bad} out of range for {} classes",
                        class_names.len()
                    )));
                }
            }
            LabelVector::Regression(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("regression labels".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Continuous,
    OneHot { group: usize },
}

/// Values of an original (pre-encoding) variable, on its source scale.
#[derive(Debug, Clone, PartialEq)]
pub enum VariableValues {
    Continuous(Vec<f64>),
    Categorical { codes: Vec<usize>, levels: Vec<String> },
}

/// An input variable and the feature columns that encode it.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub columns: Vec<usize>,
    pub values: VariableValues,
}

impl Variable {
    pub fn is_categorical(&self) -> bool {
        matches!(self.values, VariableValues::Categorical { .. })
    }
}

/// Encoded, standardized feature matrix (n rows × p columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub feature_names: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    /// Columns that were constant before scaling and were zeroed.
    pub degenerate: Vec<bool>,
    pub variables: Vec<Variable>,
}

impl Dataset {
    /// Wraps an already-prepared matrix: every column is a continuous
    /// variable and is used as-is, without rescaling.
    pub fn from_matrix(x: DMatrix<f64>, feature_names: Vec<String>) -> Result<Self> {
        if feature_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: feature_names.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        let variables = (0..x.ncols())
            .map(|j| Variable {
                name: feature_names[j].clone(),
                columns: vec![j],
                values: VariableValues::Continuous(x.column(j).iter().copied().collect()),
            })
            .collect();
        Ok(Dataset {
            feature_kinds: vec![FeatureKind::Continuous; x.ncols()],
            degenerate: vec![false; x.ncols()],
            feature_names,
            variables,
            x,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Column groups, one per original variable, in variable order.
    pub fn variable_groups(&self) -> Vec<Vec<usize>> {
        self.variables.iter().map(|v| v.columns.clone()).collect()
    }

    /// Rows reordered (or subset) by `rows`.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let x = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.x[(rows[i], j)]);
        let variables = self
            .variables
            .iter()
            .map(|v| Variable {
                name: v.name.clone(),
                columns: v.columns.clone(),
                values: match &v.values {
                    VariableValues::Continuous(vals) => {
                        VariableValues::Continuous(rows.iter().map(|&r| vals[r]).collect())
                    }
                    VariableValues::Categorical { codes, levels } => VariableValues::Categorical {
                        codes: rows.iter().map(|&r| codes[r]).collect(),
                        levels: levels.clone(),
                    },
                },
            })
            .collect();
        Dataset {
            x,
            feature_names: self.feature_names.clone(),
            feature_kinds: self.feature_kinds.clone(),
            degenerate: self.degenerate.clone(),
            variables,
        }
    }

    /// Writes the encoded matrix with a header row, optionally appending the label.
    pub fn write_csv(&self, path: &Path, label: Option<(&str, &LabelVector)>) -> Result<()> {
        let mut out = String::new();
        let mut header: Vec<String> = self.feature_names.iter().map(|s| csv_field(s)).collect();
        if let Some((name, _)) = label {
            header.push(csv_field(name));
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n() {
            let mut fields: Vec<String> = self.x.row(i).iter().map(|&v| format_number(v)).collect();
            if let Some((_, y)) = label {
                fields.push(csv_field(&y.display(i)));
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        write_file(path, out.as_bytes())
    }
}

fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na")
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headed, comma-separated file and splits off the label column.
///
/// Empty fields and `NA` (any case) are missing. A column is numeric when
/// every non-missing entry parses as a finite number, otherwise it is kept
/// as categorical text.
pub fn load_csv(path: &Path, label_column: &str, task: TaskHint) -> Result<(RawDataset, LabelVector)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            cells[j].push(field.to_string());
        }
    }
    let n_rows = cells[0].len();
    if n_rows == 0 {
        return Err(Error::EmptyDataset(format!(": {} has no data rows", path.display())));
    }

    let label_cells = std::mem::take(&mut cells[label_idx]);
    let labels = parse_labels(label_column, &label_cells, task)?;

    let columns = header
        .iter()
        .zip(cells)
        .enumerate()
        .filter(|(j, _)| *j != label_idx)
        .map(|(_, (name, col))| classify_column(name, col))
        .collect();
    Ok((RawDataset { columns, n_rows }, labels))
}

fn classify_column(name: &str, col: Vec<String>) -> RawColumn {
    let numeric = col
        .iter()
        .all(|s| is_missing_token(s) || parse_number(s).is_some());
    if numeric {
        RawColumn::Numeric {
            name: name.to_string(),
            values: col.iter().map(|s| parse_number(s)).collect(),
        }
    } else {
        RawColumn::Categorical {
            name: name.to_string(),
            values: col
                .into_iter()
                .map(|s| {
                    if is_missing_token(&s) {
                        None
                    } else {
                        Some(s.trim().to_string())
                    }
                })
                .collect(),
        }
    }
}

fn parse_labels(name: &str, cells: &[String], hint: TaskHint) -> Result<LabelVector> {
    if let Some(i) = cells.iter().position(|s| is_missing_token(s)) {
        return Err(Error::Parse(format!("label `{name}` is missing in data row {}", i + 1)));
    }
    let numeric: Option<Vec<f64>> = cells.iter().map(|s| parse_number(s)).collect();
    let task = match hint {
        TaskHint::Classification => Task::Classification,
        TaskHint::Regression => Task::Regression,
        TaskHint::Auto => match &numeric {
            None => Task::Classification,
            Some(v) => {
                let distinct: BTreeSet<u64> = v.iter().map(|x| x.to_bits()).collect();
                if distinct.len() <= AUTO_CLASSIFICATION_MAX_DISTINCT {
                    Task::Classification
                } else {
                    Task::Regression
                }
            }
        },
    };
    match (task, numeric) {
        (Task::Regression, Some(v)) => Ok(LabelVector::Regression(v)),
        (Task::Regression, None) => Err(Error::Parse(format!(
            "label `{name}` is not numeric and cannot be used for regression"
        ))),
        (Task::Classification, Some(v)) => {
            let mut levels: Vec<f64> = v.clone();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            let classes = v
                .iter()
                .map(|x| levels.iter().position(|l| l == x).unwrap())
                .collect();
            Ok(LabelVector::Classification {
                classes,
                class_names: levels.iter().map(|&l| format_number(l)).collect(),
            })
        }
        (Task::Classification, None) => {
            let trimmed: Vec<&str> = cells.iter().map(|s| s.trim()).collect();
            let levels: Vec<&str> = trimmed.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            let classes = trimmed
                .iter()
                .map(|s| levels.binary_search(s).unwrap())
                .collect();
            Ok(LabelVector::Classification {
                classes,
                class_names: levels.into_iter().map(String::from).collect(),
            })
        }
    }
}

/// Mean and sample standard deviation (n − 1 denominator).
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Centers and scales to unit sample variance. Constant columns become zeros
/// and report `true`.
fn standardize(values: &[f64]) -> (Vec<f64>, bool) {
    let (mean, sd) = mean_sd(values);
    let constant = values.iter().all(|&v| v == values[0]);
    if constant || sd <= 1e-12 * (1.0 + mean.abs()) {
        return (vec![0.0; values.len()], true);
    }
    (values.iter().map(|v| (v - mean) / sd).collect(), false)
}

/// Handles missing values, one-hot encodes categorical columns and
/// standardizes continuous ones.
pub fn preprocess(
    raw: &RawDataset,
    labels: &LabelVector,
    policy: MissingPolicy,
) -> Result<(Dataset, LabelVector)> {
    if raw.n_rows == 0 || raw.columns.is_empty() {
        return Err(Error::EmptyDataset(String::new()));
    }
    labels.validate(raw.n_rows)?;

    let keep: Vec<usize> = match policy {
        MissingPolicy::DropRows => (0..raw.n_rows)
            .filter(|&r| raw.columns.iter().all(|c| !c.is_missing(r)))
            .collect(),
        MissingPolicy::ImputeZeroNone => (0..raw.n_rows).collect(),
    };
    if keep.is_empty() {
        return Err(Error::EmptyDataset(": every row has a missing value".into()));
    }
    let n = keep.len();

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut feature_names = Vec::new();
    let mut feature_kinds = Vec::new();
    let mut degenerate = Vec::new();
    let mut variables = Vec::new();
    let mut group = 0usize;

    for col in &raw.columns {
        match col {
            RawColumn::Numeric { name, values } => {
                let vals: Vec<f64> = keep.iter().map(|&r| values[r].unwrap_or(0.0)).collect();
                let (scaled, flat) = standardize(&vals);
                variables.push(Variable {
                    name: name.clone(),
                    columns: vec![columns.len()],
                    values: VariableValues::Continuous(vals),
                });
                columns.push(scaled);
                feature_names.push(name.clone());
                feature_kinds.push(FeatureKind::Continuous);
                degenerate.push(flat);
            }
            RawColumn::Categorical { name, values } => {
                let vals: Vec<&str> = keep
                    .iter()
                    .map(|&r| values[r].as_deref().unwrap_or("none"))
                    .collect();
                let levels: Vec<&str> = vals.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
                let codes: Vec<usize> = vals.iter().map(|v| levels.binary_search(v).unwrap()).collect();
                let first = columns.len();
                for (l, level) in levels.iter().enumerate() {
                    columns.push(codes.iter().map(|&c| if c == l { 1.0 } else { 0.0 }).collect());
                    feature_names.push(format!("{name}={level}"));
                    feature_kinds.push(FeatureKind::OneHot { group });
                    degenerate.push(levels.len() == 1);
                }
                variables.push(Variable {
                    name: name.clone(),
                    columns: (first..columns.len()).collect(),
                    values: VariableValues::Categorical {
                        codes,
                        levels: levels.iter().map(|s| s.to_string()).collect(),
                    },
                });
                group += 1;
            }
        }
    }

    let p = columns.len();
    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    let ds = Dataset {
        x,
        feature_names,
        feature_kinds,
        degenerate,
        variables,
    };
    Ok((ds, labels.select(&keep)))
}

/// Draws the `index`-th noise column: its mean (uniform on [-1, 1]) and `n`
/// unit-variance Gaussian values around it.
pub fn noise_column(seed: RandomSeed, index: usize, n: usize) -> (f64, Vec<f64>) {
    let mut rng = seed.derive("noise-column", index as u64).rng();
    let mu: f64 = rng.random_range(-1.0..=1.0);
    let normal = Normal::new(mu, 1.0).expect("unit variance is valid");
    let values = (0..n).map(|_| normal.sample(&mut rng)).collect();
    (mu, values)
}

/// Appends `q` Gaussian noise columns and re-standardizes every continuous column.
pub fn noise_augment(ds: &Dataset, q: usize, seed: RandomSeed) -> Dataset {
    if q == 0 {
        return ds.clone();
    }
    let n = ds.n();
    let p = ds.p();
    let noise: Vec<Vec<f64>> = par_map_range!(0..q, |j| noise_column(seed, j, n).1);

    let mut columns: Vec<Vec<f64>> = (0..p).map(|j| ds.x.column(j).iter().copied().collect()).collect();
    let mut feature_names = ds.feature_names.clone();
    let mut feature_kinds = ds.feature_kinds.clone();
    let mut degenerate = ds.degenerate.clone();
    let mut variables = ds.variables.clone();
    for (j, col) in noise.into_iter().enumerate() {
        let mut name = format!("noise_{}", j + 1);
        while feature_names.contains(&name) {
            name.push('_');
        }
        variables.push(Variable {
            name: name.clone(),
            columns: vec![columns.len()],
            values: VariableValues::Continuous(col.clone()),
        });
        feature_names.push(name);
        feature_kinds.push(FeatureKind::Continuous);
        degenerate.push(false);
        columns.push(col);
    }
    for (j, col) in columns.iter_mut().enumerate() {
        if feature_kinds[j] == FeatureKind::Continuous {
            let (scaled, flat) = standardize(col);
            *col = scaled;
            degenerate[j] = flat;
        }
    }
    let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    Dataset {
        x,
        feature_names,
        feature_kinds,
        degenerate,
        variables,
    }
}

/// Shortest round-trip representation of a float.
pub fn format_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Quotes a field when it contains a comma, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Creates or truncates `path` and writes `bytes`.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
