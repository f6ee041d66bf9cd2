//! Cross-validated hyperparameter selection over precomputed Grams.
//!
//! Every kernel candidate's Gram is built exactly once; folds only slice
//! it. Candidates are scanned in canonical order (C ascending outermost,
//! then the candidate list order, which builders keep ascending in gamma
//! or alpha), and a candidate replaces the incumbent only on strictly
//! higher mean accuracy, so ties resolve toward smaller C, then smaller
//! gamma, then smaller alpha.

use crate::error::{Error, Result};
use crate::kernels::{mix, rbf_matrix, KernelMatrix, MixWeight};
use crate::matrix::Matrix;

use super::config::GammaSpec;

/// One kernel hyperparameter point with its precomputed training Gram.
#[derive(Debug, Clone)]
pub struct KernelCandidate {
    pub kernel: KernelMatrix,
    pub gamma: Option<GammaSpec>,
    pub alpha: Option<f64>,
}

/// Winning hyperparameters with their mean CV accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct CvChoice {
    pub candidate_index: usize,
    pub c: f64,
    pub gamma: Option<GammaSpec>,
    pub alpha: Option<f64>,
    pub accuracy: f64,
}

/// Mean validation accuracy over the folds for one (kernel, C) point.
/// Each fold trains on the complement sub-Gram and scores the fold rows.
pub fn cv_accuracy(
    k: &KernelMatrix,
    y: &[f64],
    folds: &[Vec<usize>],
    c: f64,
    tol: f64,
    max_passes: usize,
) -> Result<f64> {
    if !k.is_square() || k.rows() != y.len() {
        return Err(Error::invalid("gram and labels disagree for cross-validation"));
    }
    if folds.is_empty() {
        return Err(Error::invalid("no folds supplied"));
    }
    let m = y.len();
    let mut total = 0.0;
    for fold in folds {
        let mut in_fold = vec![false; m];
        for &i in fold {
            if i >= m {
                return Err(Error::invalid(format!("fold index {i} out of range")));
            }
            in_fold[i] = true;
        }
        let train: Vec<usize> = (0..m).filter(|&i| !in_fold[i]).collect();
        if train.is_empty() || fold.is_empty() {
            return Err(Error::invalid("a fold or its complement is empty"));
        }
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let sub = k.sub(&train, &train);
        let model = crate::svm::solve_dual(&sub, &y_train, c, tol, max_passes)?;
        if !model.converged {
            log::warn!(
                "fold solve did not converge at C = {c} within {max_passes} iterations"
            );
        }
        let rows = k.sub(fold, &train);
        let mut correct = 0usize;
        for (r, &i) in fold.iter().enumerate() {
            let f = crate::svm::decision(&model, rows.values.row(r))?;
            if crate::svm::predict_sign(f) == y[i] {
                correct += 1;
            }
        }
        total += correct as f64 / fold.len() as f64;
    }
    Ok(total / folds.len() as f64)
}

/// Pick the best (candidate, C) pair by mean CV accuracy.
pub fn cv_select(
    candidates: &[KernelCandidate],
    y: &[f64],
    c_grid: &[f64],
    folds: &[Vec<usize>],
    tol: f64,
    max_passes: usize,
) -> Result<CvChoice> {
    if candidates.is_empty() || c_grid.is_empty() {
        return Err(Error::invalid("cross-validation needs candidates and a C grid"));
    }
    let mut cs: Vec<f64> = c_grid.to_vec();
    cs.sort_by(f64::total_cmp);
    let mut best: Option<CvChoice> = None;
    for &c in &cs {
        for (idx, cand) in candidates.iter().enumerate() {
            let accuracy = cv_accuracy(&cand.kernel, y, folds, c, tol, max_passes)?;
            if best.as_ref().is_none_or(|b| accuracy > b.accuracy) {
                best = Some(CvChoice {
                    candidate_index: idx,
                    c,
                    gamma: cand.gamma,
                    alpha: cand.alpha,
                    accuracy,
                });
            }
        }
    }
    Ok(best.expect("grids are non-empty"))
}

/// RBF candidates for every gamma in the grid, ascending by resolved
/// value at dimension `n`.
pub fn classical_candidates(
    x_train: &Matrix,
    gammas: &[GammaSpec],
    n: usize,
) -> Result<Vec<KernelCandidate>> {
    if gammas.is_empty() {
        return Err(Error::invalid("gamma grid is empty"));
    }
    let mut specs: Vec<GammaSpec> = gammas.to_vec();
    specs.sort_by(|a, b| a.resolve(n).total_cmp(&b.resolve(n)));
    specs
        .into_iter()
        .map(|g| {
            Ok(KernelCandidate {
                kernel: rbf_matrix(x_train, None, g.resolve(n))?,
                gamma: Some(g),
                alpha: None,
            })
        })
        .collect()
}

/// Mixed-kernel candidates for every alpha, ascending.
pub fn mixed_candidates(
    kq: &KernelMatrix,
    kc: &KernelMatrix,
    alphas: &[f64],
) -> Result<Vec<KernelCandidate>> {
    if alphas.is_empty() {
        return Err(Error::invalid("alpha grid is empty"));
    }
    let mut sorted: Vec<f64> = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .map(|a| {
            Ok(KernelCandidate {
                kernel: mix(kq, kc, MixWeight::new(a)?)?,
                gamma: None,
                alpha: Some(a),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::split::cv_folds;
    use crate::svm::test_support::gram_from_points;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_blob_instance(m_per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        let mut y = Vec::new();
        let mut classes = Vec::new();
        for cls in 0..2 {
            for _ in 0..m_per {
                let center = cls as f64 * 1.2;
                points.push(vec![
                    center + 0.4 * rng.gen::<f64>(),
                    center + 0.4 * rng.gen::<f64>(),
                ]);
                y.push(if cls == 0 { 1.0 } else { -1.0 });
                classes.push(cls);
            }
        }
        (points, y, classes)
    }

    #[test]
    fn single_candidate_returns_itself() {
        let (points, y, classes) = two_blob_instance(10, 1);
        let k = gram_from_points(&points, 1.0);
        let folds = cv_folds(&classes, 4, 2).unwrap();
        let cand = [KernelCandidate {
            kernel: k.clone(),
            gamma: Some(GammaSpec::Fixed(1.0)),
            alpha: None,
        }];
        let choice = cv_select(&cand, &y, &[10.0], &folds, 1e-4, 50_000).unwrap();
        assert_eq!(choice.candidate_index, 0);
        assert_eq!(choice.c, 10.0);
        assert_eq!(choice.gamma, Some(GammaSpec::Fixed(1.0)));
        let direct = cv_accuracy(&k, &y, &folds, 10.0, 1e-4, 50_000).unwrap();
        assert_eq!(choice.accuracy, direct);
    }

    #[test]
    fn duplicate_candidates_tie_toward_the_first() {
        let (points, y, classes) = two_blob_instance(8, 3);
        let k = gram_from_points(&points, 1.0);
        let folds = cv_folds(&classes, 4, 4).unwrap();
        let cands = [
            KernelCandidate {
                kernel: k.clone(),
                gamma: Some(GammaSpec::Fixed(1.0)),
                alpha: Some(0.2),
            },
            KernelCandidate {
                kernel: k.clone(),
                gamma: Some(GammaSpec::Fixed(1.0)),
                alpha: Some(0.8),
            },
        ];
        let choice = cv_select(&cands, &y, &[10.0, 0.1], &folds, 1e-4, 50_000).unwrap();
        // Identical kernels: every (C, candidate) scores the same, so the
        // smallest C and the first candidate win.
        assert_eq!(choice.c, 0.1);
        assert_eq!(choice.candidate_index, 0);
        assert_eq!(choice.alpha, Some(0.2));
    }

    #[test]
    fn cv_accuracy_equals_manual_fold_replay() {
        let (points, y, classes) = two_blob_instance(10, 5);
        let k = gram_from_points(&points, 2.0);
        let folds = cv_folds(&classes, 5, 6).unwrap();
        let c = 5.0;
        let got = cv_accuracy(&k, &y, &folds, c, 1e-4, 50_000).unwrap();

        let m = y.len();
        let mut manual = 0.0;
        for fold in &folds {
            let train: Vec<usize> = (0..m).filter(|i| !fold.contains(i)).collect();
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model =
                crate::svm::solve_dual(&k.sub(&train, &train), &y_train, c, 1e-4, 50_000)
                    .unwrap();
            let mut correct = 0;
            for &i in fold {
                let row: Vec<f64> = train.iter().map(|&j| k.values.get(i, j)).collect();
                let f = crate::svm::decision(&model, &row).unwrap();
                if crate::svm::predict_sign(f) == y[i] {
                    correct += 1;
                }
            }
            manual += correct as f64 / fold.len() as f64;
        }
        manual /= folds.len() as f64;
        assert_abs_diff_eq!(got, manual, epsilon = 1e-15);
    }

    #[test]
    fn candidate_builders_sort_ascending() {
        let x = Matrix::from_rows(&[vec![0.1, 0.2], vec![0.7, 0.9], vec![0.4, 0.3]]).unwrap();
        let gammas = [
            GammaSpec::Fixed(10.0),
            GammaSpec::OneOverN,
            GammaSpec::Fixed(0.01),
        ];
        let cands = classical_candidates(&x, &gammas, 2).unwrap();
        let resolved: Vec<f64> = cands
            .iter()
            .map(|c| c.gamma.unwrap().resolve(2))
            .collect();
        assert_eq!(resolved, vec![0.01, 0.5, 10.0]);

        let kq = gram_from_points(&[vec![0.0], vec![1.0]], 1.0);
        let kc = gram_from_points(&[vec![0.0], vec![1.0]], 2.0);
        let mixed = mixed_candidates(&kq, &kc, &[1.0, 0.0, 0.5]).unwrap();
        let alphas: Vec<f64> = mixed.iter().map(|c| c.alpha.unwrap()).collect();
        assert_eq!(alphas, vec![0.0, 0.5, 1.0]);
        assert_eq!(mixed[0].kernel.values.data(), kc.values.data());
        assert_eq!(mixed[2].kernel.values.data(), kq.values.data());
    }

    #[test]
    fn separable_instance_reaches_full_cv_accuracy() {
        let (points, y, classes) = two_blob_instance(12, 7);
        let k = gram_from_points(&points, 2.0);
        let folds = cv_folds(&classes, 4, 8).unwrap();
        let acc = cv_accuracy(&k, &y, &folds, 10.0, 1e-4, 50_000).unwrap();
        assert_eq!(acc, 1.0);
    }
}
