//! One-vs-one multiclass reduction over a shared training Gram.
//!
//! Each unordered class pair (p, q) with p < q gets one binary model
//! trained on the sub-Gram of that pair's samples, with p mapped to +1.
//! Prediction votes every model and takes the plurality class; ties fall
//! back to the largest accumulated |decision value| among models the tied
//! class participated in and won, then to the lowest class index.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;
use crate::matrix::Matrix;

use super::{decision, solve_dual, SvmModel};

/// One binary member of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoModel {
    /// Class pair (p, q), p < q; p plays +1.
    pub pair: (usize, usize),
    /// Positions of this model's samples in the full training order,
    /// ascending.
    pub train_indices: Vec<usize>,
    pub model: SvmModel,
}

/// All pairwise models for a labeled training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoEnsemble {
    pub classes: usize,
    /// Lexicographic by pair: (0,1), (0,2), ..., (classes-2, classes-1).
    pub models: Vec<OvoModel>,
}

const ENSEMBLE_TAG: &str = "tnqk-ovo-ensemble";
const ENSEMBLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    ensemble: OvoEnsemble,
}

impl OvoEnsemble {
    pub fn n_pairs(&self) -> usize {
        self.classes * (self.classes - 1) / 2
    }

    /// Size of the full training set the ensemble indexes into.
    pub fn train_size(&self) -> usize {
        self.models
            .iter()
            .flat_map(|m| m.train_indices.iter().copied())
            .max()
            .map_or(0, |i| i + 1)
    }

    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("ensemble needs at least two classes"));
        }
        if self.models.len() != self.n_pairs() {
            return Err(Error::invalid(format!(
                "{} models for {} classes, expected {}",
                self.models.len(),
                self.classes,
                self.n_pairs()
            )));
        }
        let mut expect = Vec::new();
        for p in 0..self.classes {
            for q in p + 1..self.classes {
                expect.push((p, q));
            }
        }
        for (m, pair) in self.models.iter().zip(expect) {
            if m.pair != pair {
                return Err(Error::invalid(format!(
                    "model pair {:?} out of order, expected {pair:?}",
                    m.pair
                )));
            }
            if m.train_indices.len() != m.model.train_size() {
                return Err(Error::invalid("model train_indices length mismatch"));
            }
            if m.train_indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("model train_indices must be ascending"));
            }
            m.model.validate()?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = EnsembleFile {
            format: ENSEMBLE_TAG.to_string(),
            version: ENSEMBLE_VERSION,
            ensemble: self.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::invalid(format!("serializing ensemble: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EnsembleFile =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        if file.format != ENSEMBLE_TAG {
            return Err(Error::invalid(format!(
                "expected format {ENSEMBLE_TAG:?}, got {:?}",
                file.format
            )));
        }
        if file.version != ENSEMBLE_VERSION {
            return Err(Error::invalid(format!(
                "unsupported ensemble version {}",
                file.version
            )));
        }
        file.ensemble.validate()?;
        Ok(file.ensemble)
    }
}

/// Train the full one-vs-one ensemble on a square training Gram.
///
/// Classes are 0..=max(labels) and every class in that range must occur.
pub fn train_ovo(
    k_full: &KernelMatrix,
    labels: &[usize],
    c: f64,
    tol: f64,
    max_passes: usize,
) -> Result<OvoEnsemble> {
    if !k_full.is_square() {
        return Err(Error::invalid("one-vs-one training needs a square Gram"));
    }
    if labels.len() != k_full.rows() {
        return Err(Error::invalid(format!(
            "{} labels for a {}x{} Gram",
            labels.len(),
            k_full.rows(),
            k_full.cols()
        )));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    if classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &lbl) in labels.iter().enumerate() {
        by_class[lbl].push(i);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!("class {empty} has no training samples")));
    }

    let mut pairs = Vec::new();
    for p in 0..classes {
        for q in p + 1..classes {
            pairs.push((p, q));
        }
    }
    let models: Result<Vec<OvoModel>> = pairs
        .par_iter()
        .map(|&(p, q)| {
            // Ascending merge of two ascending class index lists.
            let mut train_indices: Vec<usize> = by_class[p]
                .iter()
                .chain(by_class[q].iter())
                .copied()
                .collect();
            train_indices.sort_unstable();
            let y: Vec<f64> = train_indices
                .iter()
                .map(|&i| if labels[i] == p { 1.0 } else { -1.0 })
                .collect();
            let sub = k_full.sub(&train_indices, &train_indices);
            let model = solve_dual(&sub, &y, c, tol, max_passes)?;
            Ok(OvoModel {
                pair: (p, q),
                train_indices,
                model,
            })
        })
        .collect();

    Ok(OvoEnsemble {
        classes,
        models: models?,
    })
}

/// Predict classes for test samples given their kernel rows against the
/// full training set (one row per test sample, columns in training order).
pub fn predict_ovo(ensemble: &OvoEnsemble, k_test_full: &Matrix) -> Result<Vec<usize>> {
    ensemble.validate()?;
    let train_size = ensemble.train_size();
    if k_test_full.cols() < train_size {
        return Err(Error::invalid(format!(
            "kernel rows have {} columns, ensemble indexes up to {}",
            k_test_full.cols(),
            train_size
        )));
    }
    let mut out = Vec::with_capacity(k_test_full.rows());
    for r in 0..k_test_full.rows() {
        let row = k_test_full.row(r);
        let mut votes = vec![0usize; ensemble.classes];
        let mut strength = vec![0.0f64; ensemble.classes];
        for m in &ensemble.models {
            let sub_row: Vec<f64> = m.train_indices.iter().map(|&i| row[i]).collect();
            let f = decision(&m.model, &sub_row)?;
            let winner = if f >= 0.0 { m.pair.0 } else { m.pair.1 };
            votes[winner] += 1;
            strength[winner] += f.abs();
        }
        let top = *votes.iter().max().expect("at least two classes");
        // Lowest class index among those tied on votes and then on
        // accumulated winning strength.
        let mut best = usize::MAX;
        let mut best_strength = f64::NEG_INFINITY;
        for cls in 0..ensemble.classes {
            if votes[cls] == top && strength[cls] > best_strength {
                best = cls;
                best_strength = strength[cls];
            }
        }
        out.push(best);
    }
    Ok(out)
}
