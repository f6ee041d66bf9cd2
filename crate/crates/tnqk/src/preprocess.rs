//! Three-stage feature pipeline: standardize, PCA truncation, min-max.
//!
//! Standardization uses the population (divide-by-m) standard deviation so
//! that its output feeds covariance-based PCA consistently. PCA components
//! follow a fixed sign convention (largest-magnitude entry of each component
//! non-negative) so fits are reproducible across runs. Min-max rescaling
//! clamps out-of-range values to [0, 1], which keeps encoding angles valid
//! when test data falls outside the training range.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Pipeline position of a dataset's feature values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Raw,
    Standardized,
    Pca,
    Minmax,
}

/// Feature rows with integer class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub stage: Stage,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, stage: Stage) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(Dataset {
            features,
            labels,
            stage,
        })
    }

    pub fn raw(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        Dataset::new(features, labels, Stage::Raw)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    /// Rows whose label equals `class`, in dataset order.
    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            stage: self.stage,
        }
    }

    fn expect_stage(&self, want: Stage, op: &str) -> Result<()> {
        if self.stage != want {
            return Err(Error::invalid(format!(
                "{op} expects {want:?} data, got {:?}",
                self.stage
            )));
        }
        Ok(())
    }
}

/// Per-column zero-mean unit-variance transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub means: Vec<f64>,
    /// Population standard deviations; degenerate columns store 1.
    pub stds: Vec<f64>,
    /// Columns with zero variance in the fit data; they transform to 0.
    pub degenerate: Vec<bool>,
}

impl StandardScaler {
    pub fn dims(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        data.expect_stage(Stage::Raw, "standardize")?;
        if data.dims() != self.dims() {
            return Err(Error::invalid(format!(
                "scaler fit on {} columns, data has {}",
                self.dims(),
                data.dims()
            )));
        }
        let mut features = data.features.clone();
        for i in 0..features.rows() {
            let row = features.row_mut(i);
            for j in 0..row.len() {
                row[j] = if self.degenerate[j] {
                    0.0
                } else {
                    (row[j] - self.means[j]) / self.stds[j]
                };
            }
        }
        Dataset::new(features, data.labels.clone(), Stage::Standardized)
    }

    fn validate(&self) -> Result<()> {
        if self.stds.len() != self.means.len() || self.degenerate.len() != self.means.len() {
            return Err(Error::invalid("standard scaler field lengths differ"));
        }
        if self.means.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("standard scaler means must be finite"));
        }
        if self.stds.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("standard scaler stds must be finite and positive"));
        }
        Ok(())
    }
}

/// Fit per-column means and population standard deviations.
pub fn fit_standardize(train: &Dataset) -> Result<StandardScaler> {
    train.expect_stage(Stage::Raw, "fit_standardize")?;
    let m = train.len();
    if m < 2 {
        return Err(Error::invalid(format!(
            "standardization needs at least 2 samples, got {m}"
        )));
    }
    let d = train.dims();
    let mut means = vec![0.0; d];
    for row in train.features.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            means[j] += v;
        }
    }
    for mu in &mut means {
        *mu /= m as f64;
    }
    let mut vars = vec![0.0; d];
    for row in train.features.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            let dlt = v - means[j];
            vars[j] += dlt * dlt;
        }
    }
    let mut stds = vec![0.0; d];
    let mut degenerate = vec![false; d];
    for j in 0..d {
        let var = vars[j] / m as f64;
        if var <= 0.0 {
            stds[j] = 1.0;
            degenerate[j] = true;
        } else {
            stds[j] = var.sqrt();
        }
    }
    Ok(StandardScaler {
        means,
        stds,
        degenerate,
    })
}

/// Truncated principal-component basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// One orthonormal component per row, `n_components` x original dims.
    pub components: Matrix,
    /// Eigenvalues of the covariance matrix, non-increasing, clamped at 0.
    pub explained_variance: Vec<f64>,
    pub n_components: usize,
    /// Column means of the fit data, subtracted before projection.
    pub means: Vec<f64>,
}

impl PcaModel {
    pub fn input_dims(&self) -> usize {
        self.components.cols()
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        data.expect_stage(Stage::Standardized, "pca transform")?;
        if data.dims() != self.input_dims() {
            return Err(Error::invalid(format!(
                "pca fit on {} columns, data has {}",
                self.input_dims(),
                data.dims()
            )));
        }
        let mut centered = data.features.clone();
        for i in 0..centered.rows() {
            let row = centered.row_mut(i);
            for j in 0..row.len() {
                row[j] -= self.means[j];
            }
        }
        let projected = centered.mul_transpose(&self.components)?;
        Dataset::new(projected, data.labels.clone(), Stage::Pca)
    }

    /// Map PC scores back to the standardized space.
    pub fn inverse_transform(&self, scores: &Matrix) -> Result<Matrix> {
        if scores.cols() != self.n_components {
            return Err(Error::invalid(format!(
                "expected {} score columns, got {}",
                self.n_components,
                scores.cols()
            )));
        }
        let d = self.input_dims();
        let mut out = Matrix::zeros(scores.rows(), d);
        for i in 0..scores.rows() {
            let y = scores.row(i);
            let dst = out.row_mut(i);
            dst.copy_from_slice(&self.means);
            for (k, &w) in y.iter().enumerate() {
                let comp = self.components.row(k);
                for j in 0..d {
                    dst[j] += w * comp[j];
                }
            }
        }
        Ok(out)
    }

    /// Model keeping only the leading `n` components.
    pub fn truncate(&self, n: usize) -> Result<PcaModel> {
        if n == 0 || n > self.n_components {
            return Err(Error::invalid(format!(
                "cannot keep {n} of {} components",
                self.n_components
            )));
        }
        let rows: Vec<usize> = (0..n).collect();
        Ok(PcaModel {
            components: self.components.select_rows(&rows),
            explained_variance: self.explained_variance[..n].to_vec(),
            n_components: n,
            means: self.means.clone(),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.components.rows() != self.n_components
            || self.explained_variance.len() != self.n_components
            || self.means.len() != self.components.cols()
            || self.n_components == 0
        {
            return Err(Error::invalid("pca model field shapes disagree"));
        }
        if self.components.data().iter().any(|v| !v.is_finite())
            || self.means.iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid("pca model values must be finite"));
        }
        for w in self.explained_variance.windows(2) {
            if !(w[0].is_finite() && w[1].is_finite()) || w[0] < w[1] {
                return Err(Error::invalid(
                    "explained variance must be finite and non-increasing",
                ));
            }
        }
        if self.explained_variance.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("explained variance must be non-negative"));
        }
        Ok(())
    }
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// Returns (eigenvalues, eigenvectors as columns).
fn sym_eig_desc(mat: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(mat);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(eig.eigenvectors.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Flip each component row so its largest-magnitude entry is non-negative
/// (first occurrence wins on magnitude ties).
fn apply_sign_convention(components: &mut Matrix) {
    for i in 0..components.rows() {
        let row = components.row_mut(i);
        let mut best = 0usize;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[best].abs() {
                best = j;
            }
        }
        if row[best] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }
}

/// Fit PCA on standardized data, keeping the `n_components` leading
/// components of the covariance eigenbasis.
///
/// When there are fewer samples than dimensions the eigenproblem is solved
/// on the m x m Gram matrix instead of the d x d covariance, which is what
/// makes 784-dimensional fits cheap at desk-scale sample counts; the direct
/// covariance path covers requests that exceed the Gram spectrum's rank.
pub fn fit_pca(train: &Dataset, n_components: usize) -> Result<PcaModel> {
    train.expect_stage(Stage::Standardized, "fit_pca")?;
    let (m, d) = (train.len(), train.dims());
    if m < 2 {
        return Err(Error::invalid(format!("pca needs at least 2 samples, got {m}")));
    }
    if n_components == 0 || n_components > d {
        return Err(Error::invalid(format!(
            "n_components {n_components} outside [1, {d}]"
        )));
    }

    let mut means = vec![0.0; d];
    for row in train.features.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            means[j] += v;
        }
    }
    for mu in &mut means {
        *mu /= m as f64;
    }
    let mut centered = train.features.clone();
    for i in 0..m {
        let row = centered.row_mut(i);
        for j in 0..d {
            row[j] -= means[j];
        }
    }

    let (mut values, mut comp) = (Vec::new(), Matrix::zeros(0, 0));
    let mut use_direct = m >= d;
    if !use_direct {
        // Gram trick: eigenvectors u of (Z Z^T)/m lift to covariance
        // eigenvectors Z^T u / sqrt(m * lambda) for lambda > 0.
        let mut gram = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let a = centered.row(i);
                let b = centered.row(j);
                let mut acc = 0.0;
                for k in 0..d {
                    acc += a[k] * b[k];
                }
                acc /= m as f64;
                gram[(i, j)] = acc;
                gram[(j, i)] = acc;
            }
        }
        let (lambda, u) = sym_eig_desc(gram);
        let floor = lambda.first().copied().unwrap_or(0.0).max(0.0) * 1e-12;
        let positive = lambda.iter().take_while(|&&v| v > floor).count();
        if n_components <= positive {
            values = lambda[..n_components].to_vec();
            comp = Matrix::zeros(n_components, d);
            for k in 0..n_components {
                let norm = (m as f64 * values[k]).sqrt();
                let row = comp.row_mut(k);
                for i in 0..m {
                    let w = u[(i, k)] / norm;
                    let src = centered.row(i);
                    for j in 0..d {
                        row[j] += w * src[j];
                    }
                }
            }
        } else {
            use_direct = true;
        }
    }
    if use_direct {
        let z = DMatrix::from_row_slice(m, d, centered.data());
        let cov = z.transpose() * &z / m as f64;
        let (lambda, v) = sym_eig_desc(cov);
        values = lambda[..n_components].to_vec();
        comp = Matrix::zeros(n_components, d);
        for k in 0..n_components {
            let row = comp.row_mut(k);
            for j in 0..d {
                row[j] = v[(j, k)];
            }
        }
    }

    for v in &mut values {
        *v = v.max(0.0);
    }
    apply_sign_convention(&mut comp);
    Ok(PcaModel {
        components: comp,
        explained_variance: values,
        n_components,
        means,
    })
}

/// Per-column affine map onto [0, 1] with clamping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    /// max - min per column; zero-range columns transform to 0.
    pub ranges: Vec<f64>,
}

impl MinMaxScaler {
    pub fn dims(&self) -> usize {
        self.mins.len()
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        data.expect_stage(Stage::Pca, "minmax transform")?;
        if data.dims() != self.dims() {
            return Err(Error::invalid(format!(
                "minmax fit on {} columns, data has {}",
                self.dims(),
                data.dims()
            )));
        }
        let mut features = data.features.clone();
        for i in 0..features.rows() {
            let row = features.row_mut(i);
            for j in 0..row.len() {
                row[j] = if self.ranges[j] == 0.0 {
                    0.0
                } else {
                    ((row[j] - self.mins[j]) / self.ranges[j]).clamp(0.0, 1.0)
                };
            }
        }
        Dataset::new(features, data.labels.clone(), Stage::Minmax)
    }

    /// Scaler keeping only the first `n` columns.
    pub fn truncate(&self, n: usize) -> Result<MinMaxScaler> {
        if n == 0 || n > self.dims() {
            return Err(Error::invalid(format!(
                "cannot keep {n} of {} minmax columns",
                self.dims()
            )));
        }
        Ok(MinMaxScaler {
            mins: self.mins[..n].to_vec(),
            ranges: self.ranges[..n].to_vec(),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.ranges.len() != self.mins.len() {
            return Err(Error::invalid("minmax scaler field lengths differ"));
        }
        if self.mins.iter().any(|v| !v.is_finite())
            || self.ranges.iter().any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::invalid(
                "minmax scaler needs finite mins and non-negative ranges",
            ));
        }
        Ok(())
    }
}

/// Fit per-column min and range on PCA-stage data.
pub fn fit_minmax(train: &Dataset) -> Result<MinMaxScaler> {
    train.expect_stage(Stage::Pca, "fit_minmax")?;
    if train.is_empty() {
        return Err(Error::invalid("minmax fit needs at least 1 sample"));
    }
    let d = train.dims();
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for row in train.features.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            mins[j] = mins[j].min(v);
            maxs[j] = maxs[j].max(v);
        }
    }
    let ranges = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo).collect();
    Ok(MinMaxScaler { mins, ranges })
}

/// Run raw data through all three fitted stages.
pub fn apply_pipeline(
    data: &Dataset,
    scaler: &StandardScaler,
    pca: &PcaModel,
    mm: &MinMaxScaler,
) -> Result<Dataset> {
    mm.transform(&pca.transform(&scaler.transform(data)?)?)
}

/// All three fitted stages bundled for persistence and reuse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessBundle {
    pub scaler: StandardScaler,
    pub pca: PcaModel,
    pub minmax: MinMaxScaler,
}

impl PreprocessBundle {
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        apply_pipeline(data, &self.scaler, &self.pca, &self.minmax)
    }

    pub fn validate(&self) -> Result<()> {
        self.scaler.validate()?;
        self.pca.validate()?;
        self.minmax.validate()?;
        if self.pca.input_dims() != self.scaler.dims() {
            return Err(Error::invalid("pca input dims do not match scaler"));
        }
        if self.minmax.dims() != self.pca.n_components {
            return Err(Error::invalid("minmax dims do not match pca components"));
        }
        Ok(())
    }

    pub fn output_dims(&self) -> usize {
        self.pca.n_components
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = BundleFile {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            bundle: self.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::invalid(format!("serializing preprocess bundle: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BundleFile = serde_json::from_str(text)
            .map_err(|e| Error::parse(e.line(), e.to_string()))?;
        if file.format != FORMAT_TAG {
            return Err(Error::invalid(format!(
                "expected format {FORMAT_TAG:?}, got {:?}",
                file.format
            )));
        }
        if file.version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported preprocess bundle version {}",
                file.version
            )));
        }
        file.bundle.validate()?;
        Ok(file.bundle)
    }
}

const FORMAT_TAG: &str = "tnqk-preprocess";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BundleFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    bundle: PreprocessBundle,
}

/// A pipeline fit once at `n_max` components whose leading slices serve any
/// smaller dimension. The leading eigenpairs of one covariance fit equal the
/// full fit at the smaller dimension, so feature-dimension sweeps reuse one
/// eigendecomposition.
#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pub scaler: StandardScaler,
    pub pca: PcaModel,
    pub minmax: MinMaxScaler,
}

impl FittedPipeline {
    pub fn fit(train: &Dataset, n_max: usize) -> Result<Self> {
        let scaler = fit_standardize(train)?;
        let standardized = scaler.transform(train)?;
        let pca = fit_pca(&standardized, n_max)?;
        let projected = pca.transform(&standardized)?;
        let minmax = fit_minmax(&projected)?;
        Ok(FittedPipeline { scaler, pca, minmax })
    }

    pub fn n_max(&self) -> usize {
        self.pca.n_components
    }

    /// The fitted stages truncated to `n` output dimensions.
    pub fn bundle_at(&self, n: usize) -> Result<PreprocessBundle> {
        Ok(PreprocessBundle {
            scaler: self.scaler.clone(),
            pca: self.pca.truncate(n)?,
            minmax: self.minmax.truncate(n)?,
        })
    }

    pub fn apply_at(&self, data: &Dataset, n: usize) -> Result<Dataset> {
        self.bundle_at(n)?.apply(data)
    }
}
