//! Gram matrix construction: quantum fidelity, classical RBF, and their
//! convex mix, plus persistence and concentration diagnostics.
//!
//! Quantum Grams are tiled and the tiles run on a bounded worker pool; each
//! entry is a pure function of two sample rows, so results do not depend on
//! tile size or worker count. For symmetric (train) Grams only the upper
//! triangle of tiles is computed and mirrored.

mod gram_io;

pub use gram_io::{load_gram, load_gram_values, read_gram_bytes, save_gram, write_gram_bytes};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::FeatureMapConfig;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensornet::{kernel_entry, Backend};

/// Which kernel produced a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Quantum,
    Classical,
    Mixed,
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Quantum => "quantum",
            KernelKind::Classical => "classical",
            KernelKind::Mixed => "mixed",
        }
    }
}

/// Hyperparameters the matrix was built with.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelMeta {
    /// RBF width, present for classical and mixed kinds.
    pub gamma: Option<f64>,
    /// Mix weight, present for the mixed kind.
    pub alpha: Option<f64>,
    /// Feature-map descriptor, present for quantum and mixed kinds.
    pub feature_map: Option<String>,
}

/// A kernel evaluation between two sample lists.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: Matrix,
    pub kind: KernelKind,
    pub meta: KernelMeta,
    /// Sample indices labelling the rows and columns.
    pub row_ids: Vec<usize>,
    pub col_ids: Vec<usize>,
}

impl KernelMatrix {
    pub fn new(
        values: Matrix,
        kind: KernelKind,
        meta: KernelMeta,
        row_ids: Vec<usize>,
        col_ids: Vec<usize>,
    ) -> Result<Self> {
        if row_ids.len() != values.rows() || col_ids.len() != values.cols() {
            return Err(Error::invalid(format!(
                "id lists ({}, {}) do not match matrix shape {}x{}",
                row_ids.len(),
                col_ids.len(),
                values.rows(),
                values.cols()
            )));
        }
        Ok(KernelMatrix {
            values,
            kind,
            meta,
            row_ids,
            col_ids,
        })
    }

    fn with_default_ids(values: Matrix, kind: KernelKind, meta: KernelMeta) -> Self {
        let row_ids = (0..values.rows()).collect();
        let col_ids = (0..values.cols()).collect();
        KernelMatrix {
            values,
            kind,
            meta,
            row_ids,
            col_ids,
        }
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn is_square(&self) -> bool {
        self.values.rows() == self.values.cols()
    }

    /// Sub-kernel at the given row and column positions, keeping their ids.
    pub fn sub(&self, rows: &[usize], cols: &[usize]) -> KernelMatrix {
        KernelMatrix {
            values: self.values.select(rows, cols),
            kind: self.kind,
            meta: self.meta.clone(),
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
            col_ids: cols.iter().map(|&j| self.col_ids[j]).collect(),
        }
    }

    /// Train-Gram invariants: symmetry, unit diagonal for the pure kinds,
    /// and entries in [0, 1].
    pub fn validate_train(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::invalid("train Gram must be square"));
        }
        let asym = self.values.max_abs_asymmetry();
        if asym > 1e-10 {
            return Err(Error::invalid(format!("Gram asymmetry {asym:.3e} above 1e-10")));
        }
        if self.kind != KernelKind::Mixed {
            for i in 0..self.rows() {
                let d = self.values.get(i, i);
                if (d - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "diagonal entry ({i},{i}) = {d} deviates from 1"
                    )));
                }
            }
        }
        if let Some(bad) = self
            .values
            .data()
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::invalid(format!("Gram entry {bad} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Convex mix weight in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixWeight(f64);

impl MixWeight {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("mix weight {alpha} outside [0, 1]")));
        }
        Ok(MixWeight(alpha))
    }

    pub fn alpha(&self) -> f64 {
        self.0
    }
}

/// Tile partition for parallel Gram construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    /// Tile side length in samples.
    pub tile: usize,
}

impl Default for BlockPlan {
    fn default() -> Self {
        BlockPlan { tile: 32 }
    }
}

/// RBF kernel: entry (i, j) = exp(-gamma * ||x_i - y_j||^2). Pass `None`
/// for `y` to build the symmetric train Gram of `x`.
pub fn rbf_matrix(x: &Matrix, y: Option<&Matrix>, gamma: f64) -> Result<KernelMatrix> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::invalid(format!("rbf gamma must be positive, got {gamma}")));
    }
    let meta = KernelMeta {
        gamma: Some(gamma),
        ..KernelMeta::default()
    };
    let values = match y {
        Some(y) => {
            if y.cols() != x.cols() {
                return Err(Error::invalid(format!(
                    "rbf inputs have {} and {} columns",
                    x.cols(),
                    y.cols()
                )));
            }
            let mut k = Matrix::zeros(x.rows(), y.rows());
            for i in 0..x.rows() {
                for j in 0..y.rows() {
                    k.set(i, j, rbf_entry(x.row(i), y.row(j), gamma));
                }
            }
            k
        }
        None => {
            let mut k = Matrix::zeros(x.rows(), x.rows());
            for i in 0..x.rows() {
                k.set(i, i, 1.0);
                for j in (i + 1)..x.rows() {
                    let v = rbf_entry(x.row(i), x.row(j), gamma);
                    k.set(i, j, v);
                    k.set(j, i, v);
                }
            }
            k
        }
    };
    Ok(KernelMatrix::with_default_ids(values, KernelKind::Classical, meta))
}

fn rbf_entry(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let mut d2 = 0.0;
    for (u, v) in a.iter().zip(b) {
        let d = u - v;
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

/// Quantum fidelity Gram, partitioned into `plan.tile`-sized tiles that run
/// on a `workers`-thread pool. Pass `None` for `y` to build the symmetric
/// train Gram, in which case only the upper triangle of tiles is computed
/// and mirrored.
pub fn quantum_matrix(
    x: &Matrix,
    y: Option<&Matrix>,
    cfg: &FeatureMapConfig,
    plan: &BlockPlan,
    workers: usize,
) -> Result<KernelMatrix> {
    if x.cols() != cfg.n_qubits {
        return Err(Error::invalid(format!(
            "{} feature columns but the map encodes {} qubits",
            x.cols(),
            cfg.n_qubits
        )));
    }
    if let Some(y) = y {
        if y.cols() != x.cols() {
            return Err(Error::invalid(format!(
                "quantum kernel inputs have {} and {} columns",
                x.cols(),
                y.cols()
            )));
        }
    }
    if plan.tile == 0 {
        return Err(Error::invalid("tile size must be positive"));
    }
    if workers == 0 {
        return Err(Error::invalid("worker count must be positive"));
    }

    let symmetric = y.is_none();
    let rows = x.rows();
    let cols = y.map_or(rows, Matrix::rows);
    let b = plan.tile;
    let row_tiles = rows.div_ceil(b);
    let col_tiles = cols.div_ceil(b);

    let mut tiles = Vec::new();
    for ti in 0..row_tiles {
        for tj in 0..col_tiles {
            if symmetric && tj < ti {
                continue;
            }
            tiles.push((ti, tj));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;

    let computed: Result<Vec<(usize, usize, Vec<(usize, usize, f64)>)>> = pool.install(|| {
        tiles
            .par_iter()
            .map(|&(ti, tj)| {
                let i_range = ti * b..((ti + 1) * b).min(rows);
                let j_range = tj * b..((tj + 1) * b).min(cols);
                let mut entries = Vec::new();
                for i in i_range {
                    for j in j_range.clone() {
                        if symmetric && ti == tj && j < i {
                            continue;
                        }
                        let xj = y.unwrap_or(x).row(j);
                        let v = kernel_entry(x.row(i), xj, cfg, Backend::Auto)
                            .map_err(|e| tile_error(ti, tj, e))?;
                        entries.push((i, j, v));
                    }
                }
                Ok((ti, tj, entries))
            })
            .collect()
    });

    let mut k = Matrix::zeros(rows, cols);
    for (_, _, entries) in computed? {
        for (i, j, v) in entries {
            k.set(i, j, v);
            if symmetric {
                k.set(j, i, v);
            }
        }
    }

    let meta = KernelMeta {
        feature_map: Some(cfg.descriptor()),
        ..KernelMeta::default()
    };
    let out = KernelMatrix::with_default_ids(k, KernelKind::Quantum, meta);
    if symmetric {
        out.validate_train()?;
    }
    Ok(out)
}

fn tile_error(ti: usize, tj: usize, e: Error) -> Error {
    let msg = format!("quantum Gram tile ({ti}, {tj}): {e}");
    match e {
        Error::Capacity(_) => Error::Capacity(msg),
        Error::StructureViolation(_) => Error::StructureViolation(msg),
        _ => Error::InvalidInput(msg),
    }
}

/// Convex combination alpha * Kq + (1 - alpha) * Kc.
pub fn mix(kq: &KernelMatrix, kc: &KernelMatrix, w: MixWeight) -> Result<KernelMatrix> {
    if kq.rows() != kc.rows() || kq.cols() != kc.cols() {
        return Err(Error::invalid(format!(
            "cannot mix {}x{} with {}x{}",
            kq.rows(),
            kq.cols(),
            kc.rows(),
            kc.cols()
        )));
    }
    if kq.row_ids != kc.row_ids || kq.col_ids != kc.col_ids {
        return Err(Error::invalid("mixed kernels index different samples"));
    }
    let alpha = w.alpha();
    let mut values = kq.values.clone();
    for (v, &c) in values.data_mut().iter_mut().zip(kc.values.data()) {
        *v = alpha * *v + (1.0 - alpha) * c;
    }
    Ok(KernelMatrix {
        values,
        kind: KernelKind::Mixed,
        meta: KernelMeta {
            gamma: kc.meta.gamma,
            alpha: Some(alpha),
            feature_map: kq.meta.feature_map.clone(),
        },
        row_ids: kq.row_ids.clone(),
        col_ids: kq.col_ids.clone(),
    })
}

/// Result of a positive-semidefiniteness diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Minimum-eigenvalue check. The default tolerance scales with the mean
/// diagonal entry (1e-8 * trace / m) so the verdict is size-independent.
pub fn psd_check(k: &KernelMatrix, tol: Option<f64>) -> Result<PsdReport> {
    if !k.is_square() {
        return Err(Error::invalid("psd check needs a square matrix"));
    }
    let asym = k.values.max_abs_asymmetry();
    if asym > 1e-10 {
        return Err(Error::invalid(format!("psd check input asymmetry {asym:.3e}")));
    }
    let m = k.rows();
    if m == 0 {
        return Err(Error::invalid("psd check needs a non-empty matrix"));
    }
    let trace: f64 = (0..m).map(|i| k.values.get(i, i)).sum();
    let tol = tol.unwrap_or(1e-8 * trace / m as f64);
    let dm = DMatrix::from_row_slice(m, m, k.values.data());
    let eig = nalgebra::SymmetricEigen::new(dm);
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PsdReport {
        min_eigenvalue,
        tol,
        pass: min_eigenvalue >= -tol,
    })
}

/// Summary of the strict off-diagonal entries, used to chart kernel
/// concentration against qubit count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelStats {
    pub offdiag_mean: f64,
    pub offdiag_var: f64,
    pub offdiag_min: f64,
    pub offdiag_max: f64,
}

pub fn kernel_stats(k: &KernelMatrix) -> Result<KernelStats> {
    if !k.is_square() {
        return Err(Error::invalid("kernel stats need a square matrix"));
    }
    let m = k.rows();
    if m < 2 {
        return Err(Error::invalid(format!(
            "kernel stats need at least a 2x2 matrix, got {m}x{m}"
        )));
    }
    let mut mean = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let count = (m * (m - 1)) as f64;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let v = k.values.get(i, j);
            mean += v;
            min = min.min(v);
            max = max.max(v);
        }
    }
    mean /= count;
    let mut var = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                var += (k.values.get(i, j) - mean).powi(2);
            }
        }
    }
    var /= count;
    Ok(KernelStats {
        offdiag_mean: mean,
        offdiag_var: var,
        offdiag_min: min,
        offdiag_max: max,
    })
}
