//! Low-dimensional embeddings: the full forest-diffusion pipeline, the MDS
//! stages it ends with, and two diffusion-free baselines on the kernel.

mod baselines;
mod mds;

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;

pub use baselines::{geodesic_distances, isomap_prox, mds_prox, proximity_dissimilarity};
pub use mds::{classical_mds, metric_mds, raw_stress, DEFAULT_MAX_ITER, DEFAULT_TOL};

use crate::data::{csv_field, format_number, write_file, Dataset, LabelVector};
use crate::diffusion::{potential_distances, DiffusionState, PotentialTransform, DEFAULT_T_MAX};
use crate::error::{Error, Result};
use crate::forest::{
    compute_proximities_with, train_forest, Forest, ForestParams, ProximityKernel, ProximityNormalization,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbeddingMethod {
    RfPhate,
    ClassicalMds,
    MetricMds,
    IsomapProx,
    MdsProx,
}

impl fmt::Display for EmbeddingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingMethod::RfPhate => "rfphate",
            EmbeddingMethod::ClassicalMds => "classical_mds",
            EmbeddingMethod::MetricMds => "metric_mds",
            EmbeddingMethod::IsomapProx => "isomap_prox",
            EmbeddingMethod::MdsProx => "mds_prox",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// n × m coordinates.
    pub y: DMatrix<f64>,
    pub method: EmbeddingMethod,
    /// Final raw stress, set when metric MDS ran.
    pub stress: Option<f64>,
    /// Diffusion time, set for the full pipeline.
    pub t_used: Option<usize>,
    /// Leading dimensions whose eigenvalue was negative and clamped to zero.
    pub clamped_dims: usize,
    /// Stress after each SMACOF step, starting with the initial configuration.
    pub stress_history: Vec<f64>,
}

impl Embedding {
    pub fn from_coordinates(y: DMatrix<f64>, method: EmbeddingMethod) -> Self {
        Embedding {
            y,
            method,
            stress: None,
            t_used: None,
            clamped_dims: 0,
            stress_history: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn m(&self) -> usize {
        self.y.ncols()
    }

    /// Writes `dim_1..dim_m`, then the label and any extra named columns.
    pub fn write_csv(
        &self,
        path: &Path,
        label: Option<(&str, &LabelVector)>,
        extra: &[(&str, Vec<String>)],
    ) -> Result<()> {
        if let Some((_, y)) = label {
            if y.len() != self.n() {
                return Err(Error::RowCountMismatch {
                    what: "label".into(),
                    expected: self.n(),
                    found: y.len(),
                });
            }
        }
        for (name, col) in extra {
            if col.len() != self.n() {
                return Err(Error::RowCountMismatch {
                    what: (*name).into(),
                    expected: self.n(),
                    found: col.len(),
                });
            }
        }
        let mut header: Vec<String> = (1..=self.m()).map(|k| format!("dim_{k}")).collect();
        if let Some((name, _)) = label {
            header.push(csv_field(name));
        }
        header.extend(extra.iter().map(|(name, _)| csv_field(name)));
        let mut out = header.join(",");
        out.push('\n');
        for i in 0..self.n() {
            let mut fields: Vec<String> = self.y.row(i).iter().map(|&v| format_number(v)).collect();
            if let Some((_, y)) = label {
                fields.push(csv_field(&y.display(i)));
            }
            fields.extend(extra.iter().map(|(_, col)| csv_field(&col[i])));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        write_file(path, out.as_bytes())
    }

    /// Reads the `dim_*` columns of a file written by [`Embedding::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut reader = csv::Reader::from_path(path)?;
        let dims: Vec<usize> = reader
            .headers()?
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with("dim_"))
            .map(|(i, _)| i)
            .collect();
        if dims.is_empty() {
            return Err(Error::MissingColumn("dim_1".into()));
        }
        let mut values = Vec::new();
        let mut n = 0;
        for record in reader.records() {
            let record = record?;
            for &c in &dims {
                let field = record.get(c).unwrap_or("");
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad coordinate {field:?} on data row {}", n + 1)))?;
                values.push(v);
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyDataset(format!(": {}", path.display())));
        }
        let y = DMatrix::from_row_slice(n, dims.len(), &values);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding coordinates".into()));
        }
        Ok(Embedding::from_coordinates(y, EmbeddingMethod::RfPhate))
    }
}

/// Everything the full pipeline needs beyond the data.
#[derive(Debug, Clone, PartialEq)]
pub struct RfPhateParams {
    pub m: usize,
    pub forest: ForestParams,
    /// Fixed diffusion time; `None` picks it from the entropy knee.
    pub t: Option<usize>,
    pub t_max: usize,
    pub transform: PotentialTransform,
    pub normalization: ProximityNormalization,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RfPhateParams {
    fn default() -> Self {
        RfPhateParams {
            m: 2,
            forest: ForestParams::default(),
            t: None,
            t_max: DEFAULT_T_MAX,
            transform: PotentialTransform::default(),
            normalization: ProximityNormalization::default(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// The embedding together with the intermediate products that produced it.
#[derive(Debug, Clone)]
pub struct RfPhateOutput {
    pub embedding: Embedding,
    pub forest: Forest,
    pub kernel: ProximityKernel,
    pub diffusion: DiffusionState,
    pub warnings: Vec<String>,
}

/// Trains a forest and embeds its proximities.
pub fn run_rf_phate(ds: &Dataset, y: &LabelVector, params: &RfPhateParams) -> Result<RfPhateOutput> {
    if params.m == 0 || params.m >= ds.p() {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension must satisfy 1 <= m < p = {}, got {}",
            ds.p(),
            params.m
        )));
    }
    let forest = train_forest(ds, y, &params.forest)?;
    let kernel = compute_proximities_with(&forest, ds, params.normalization)?;
    let (embedding, diffusion, warnings) = embed_kernel(&kernel, params)?;
    Ok(RfPhateOutput {
        embedding,
        forest,
        kernel,
        diffusion,
        warnings,
    })
}

/// Diffusion, potential distances and MDS on an existing kernel.
pub fn embed_kernel(
    kernel: &ProximityKernel,
    params: &RfPhateParams,
) -> Result<(Embedding, DiffusionState, Vec<String>)> {
    let mut warnings = Vec::new();
    let diffusion = DiffusionState::from_kernel(kernel, params.t, params.t_max)?;
    let stuck = kernel
        .never_co_oob
        .iter()
        .filter(|&&(i, j)| diffusion.pt[(i, j)] == 0.0)
        .count();
    if stuck > 0 {
        let msg = format!("{stuck} never co-out-of-bag pair(s) are still unreachable after {} diffusion step(s)", diffusion.t);
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let pd = potential_distances(&diffusion.pt, params.transform)?;
    let init = classical_mds(&pd.d, params.m)?;
    let mut embedding = metric_mds(&pd.d, params.m, &init, params.tol, params.max_iter)?;
    embedding.method = EmbeddingMethod::RfPhate;
    embedding.t_used = Some(diffusion.t);
    Ok((embedding, diffusion, warnings))
}

/// The pipeline with default diffusion and MDS settings.
pub fn rf_phate(
    ds: &Dataset,
    y: &LabelVector,
    m: usize,
    forest: &ForestParams,
    t_override: Option<usize>,
) -> Result<Embedding> {
    let params = RfPhateParams {
        m,
        forest: *forest,
        t: t_override,
        ..Default::default()
    };
    run_rf_phate(ds, y, &params).map(|out| out.embedding)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Dataset, LabelVector) {
        let n = 40;
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => (i / 20) as f64 * 3.0 + (i % 5) as f64 * 0.1,
            1 => ((i * 37) % 11) as f64,
            _ => ((i * 13) % 7) as f64,
        });
        let ds = Dataset::from_matrix(x, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let y = LabelVector::classes((0..n).map(|i| i / 20).collect());
        (ds, y)
    }

    #[test]
    fn pipeline_records_provenance() {
        let (ds, y) = toy();
        let fp = ForestParams { n_trees: 50, ..Default::default() };
        let e = rf_phate(&ds, &y, 2, &fp, Some(3)).unwrap();
        assert_eq!(e.method, EmbeddingMethod::RfPhate);
        assert_eq!(e.t_used, Some(3));
        assert_eq!(e.y.shape(), (40, 2));
        assert!(e.y.iter().all(|v| v.is_finite()));
        assert!(e.stress.unwrap() >= 0.0);
    }

    #[test]
    fn pipeline_is_repeatable() {
        let (ds, y) = toy();
        let fp = ForestParams { n_trees: 30, ..Default::default() };
        let a = rf_phate(&ds, &y, 2, &fp, None).unwrap();
        let b = rf_phate(&ds, &y, 2, &fp, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_must_be_below_feature_count() {
        let (ds, y) = toy();
        let fp = ForestParams { n_trees: 5, ..Default::default() };
        assert!(rf_phate(&ds, &y, 3, &fp, None).is_err());
        assert!(rf_phate(&ds, &y, 0, &fp, None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let (ds, y) = toy();
        let fp = ForestParams { n_trees: 10, ..Default::default() };
        let e = rf_phate(&ds, &y, 2, &fp, Some(2)).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        let extra = vec![("note", (0..40).map(|i| format!("r{i}")).collect())];
        e.write_csv(file.path(), Some(("class", &y)), &extra).unwrap();
        let text = std::fs::read_to_string(file.path()).unwrap();
        assert!(text.starts_with("dim_1,dim_2,class,note\n"));
        let back = Embedding::read_csv(file.path()).unwrap();
        assert_eq!(back.y, e.y);
    }
}
