//! Binary dual-kernel tasks, the feature and alpha sweeps, and the
//! ten-class one-vs-one run.
//!
//! A task fixes a class pair. Its flow: fit preprocessing on the training
//! split only, cross-validate the classical kernel, build the quantum Gram
//! once, cross-validate C for it, then cross-validate (C, alpha) for the
//! convex mix, and finally train each winner on the full training split
//! and score the held-out test split. Tasks run sequentially; parallelism
//! stays inside Gram tiling so one bounded pool serves the whole run.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    mix, quantum_matrix, rbf_matrix, BlockPlan, KernelKind, KernelMatrix, MixWeight,
};
use crate::preprocess::{Dataset, FittedPipeline, Stage};
use crate::svm::{
    decision, metrics, predict_ovo, predict_sign, solve_dual, train_ovo, MetricsReport,
    OvoEnsemble, DEFAULT_MAX_PASSES, DEFAULT_TOL,
};

use super::config::{derive_seed, ExperimentConfig, FeatureMapTemplate, GammaSpec, Grids};
use super::cv::{classical_candidates, cv_select, mixed_candidates, KernelCandidate};
use super::split::{cv_folds, split};

/// Knobs a single task run needs, lifted from the experiment config.
#[derive(Debug, Clone)]
pub struct TaskParams {
    pub feature_map: FeatureMapTemplate,
    pub grids: Grids,
    pub cv_folds: usize,
    /// Seed for this task's fold assignment.
    pub seed: u64,
    pub tile: usize,
    pub workers: usize,
    pub tol: f64,
    pub max_passes: usize,
}

impl TaskParams {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        TaskParams {
            feature_map: cfg.feature_map.clone(),
            grids: cfg.grids.clone(),
            cv_folds: cfg.cv_folds,
            seed: cfg.seed,
            tile: cfg.tile_size,
            workers: cfg.workers,
            tol: DEFAULT_TOL,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

/// One trained-and-scored kernel model inside a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub kernel: KernelKind,
    pub c: f64,
    /// Resolved RBF width, where one was chosen.
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub cv_accuracy: f64,
    pub train_accuracy: f64,
    pub test_metrics: MetricsReport,
}

impl ModelOutcome {
    pub fn test_accuracy(&self) -> f64 {
        self.test_metrics.accuracy
    }
}

/// All three kernel models for one class pair at one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task: (usize, usize),
    pub n: usize,
    pub classical: ModelOutcome,
    pub quantum: ModelOutcome,
    pub dual: ModelOutcome,
}

/// The ten default binary tasks: every pair with class 0, plus (1, 2).
pub fn default_tasks() -> Vec<(usize, usize)> {
    let mut tasks: Vec<(usize, usize)> = (1..10).map(|q| (0, q)).collect();
    tasks.push((1, 2));
    tasks
}

/// First `per_class` samples of each listed class, in dataset order.
pub fn class_subset(data: &Dataset, classes: &[usize], per_class: usize) -> Result<Dataset> {
    let mut keep = Vec::new();
    for &class in classes {
        let members = data.indices_of_class(class);
        if members.len() < per_class {
            return Err(Error::invalid(format!(
                "class {class} has {} samples, need {per_class}",
                members.len()
            )));
        }
        keep.extend_from_slice(&members[..per_class]);
    }
    keep.sort_unstable();
    Ok(data.subset(&keep))
}

fn require_stage(d: &Dataset, want: Stage, what: &str) -> Result<()> {
    if d.stage != want {
        return Err(Error::invalid(format!(
            "{what} expects {want:?}-stage data, got {:?}",
            d.stage
        )));
    }
    Ok(())
}

fn binary_targets(labels: &[usize], pair: (usize, usize)) -> Result<Vec<f64>> {
    labels
        .iter()
        .map(|&l| {
            if l == pair.0 {
                Ok(1.0)
            } else if l == pair.1 {
                Ok(-1.0)
            } else {
                Err(Error::invalid(format!(
                    "label {l} does not belong to task {pair:?}"
                )))
            }
        })
        .collect()
}

fn pair_index(labels: &[usize], pair: (usize, usize)) -> Vec<usize> {
    labels
        .iter()
        .map(|&l| usize::from(l != pair.0))
        .collect()
}

/// Train the winner on the full training Gram and score both splits.
fn finish_model(
    k_train: &KernelMatrix,
    k_test: &KernelMatrix,
    y_train: &[f64],
    y_test_idx: &[usize],
    c: f64,
    cv_accuracy: f64,
    gamma: Option<f64>,
    alpha: Option<f64>,
    params: &TaskParams,
) -> Result<ModelOutcome> {
    let model = solve_dual(k_train, y_train, c, params.tol, params.max_passes)?;
    if !model.converged {
        log::warn!("final model at C = {c} did not reach tolerance");
    }
    let mut train_correct = 0usize;
    for (i, &y) in y_train.iter().enumerate() {
        let f = decision(&model, k_train.values.row(i))?;
        if predict_sign(f) == y {
            train_correct += 1;
        }
    }
    let preds: Vec<usize> = (0..k_test.rows())
        .map(|r| {
            decision(&model, k_test.values.row(r))
                .map(|f| usize::from(predict_sign(f) < 0.0))
        })
        .collect::<Result<_>>()?;
    let test_metrics = metrics(y_test_idx, &preds, 2)?;
    Ok(ModelOutcome {
        kernel: k_train.kind,
        c,
        gamma,
        alpha,
        cv_accuracy,
        train_accuracy: train_correct as f64 / y_train.len() as f64,
        test_metrics,
    })
}

/// Run one class pair end to end on preprocessed data at one dimension.
pub fn run_dual_kernel_task(
    train: &Dataset,
    test: &Dataset,
    pair: (usize, usize),
    params: &TaskParams,
) -> Result<TaskOutcome> {
    require_stage(train, Stage::Minmax, "dual-kernel task")?;
    require_stage(test, Stage::Minmax, "dual-kernel task")?;
    let n = train.dims();
    if test.dims() != n {
        return Err(Error::invalid("train and test dimensions disagree"));
    }
    let y_train = binary_targets(&train.labels, pair)?;
    let y_test_idx = pair_index(&test.labels, pair);
    binary_targets(&test.labels, pair)?;
    let folds = cv_folds(&train.labels, params.cv_folds, params.seed)?;

    // Classical: joint (C, gamma) selection.
    let mut cands = classical_candidates(&train.features, &params.grids.gamma, n)?;
    let choice_c = cv_select(&cands, &y_train, &params.grids.c, &folds, params.tol, params.max_passes)?;
    let kc = cands.swap_remove(choice_c.candidate_index).kernel;
    let gamma_star = choice_c
        .gamma
        .expect("classical candidates carry gamma")
        .resolve(n);
    let kc_test = rbf_matrix(&test.features, Some(&train.features), gamma_star)?;
    let classical = finish_model(
        &kc,
        &kc_test,
        &y_train,
        &y_test_idx,
        choice_c.c,
        choice_c.accuracy,
        Some(gamma_star),
        None,
        params,
    )?;

    // Quantum: the Gram is built once and reused for the mix.
    let fm = params.feature_map.at(n);
    let plan = BlockPlan { tile: params.tile };
    let kq = quantum_matrix(&train.features, None, &fm, &plan, params.workers)?;
    let q_cand = [KernelCandidate {
        kernel: kq.clone(),
        gamma: None,
        alpha: None,
    }];
    let choice_q = cv_select(&q_cand, &y_train, &params.grids.c, &folds, params.tol, params.max_passes)?;
    let kq_test = quantum_matrix(
        &test.features,
        Some(&train.features),
        &fm,
        &plan,
        params.workers,
    )?;
    let quantum = finish_model(
        &kq,
        &kq_test,
        &y_train,
        &y_test_idx,
        choice_q.c,
        choice_q.accuracy,
        None,
        None,
        params,
    )?;

    // Dual: joint (C, alpha) selection on the convex mix.
    let mut m_cands = mixed_candidates(&kq, &kc, &params.grids.alpha)?;
    let choice_m = cv_select(&m_cands, &y_train, &params.grids.c, &folds, params.tol, params.max_passes)?;
    let alpha_star = choice_m.alpha.expect("mixed candidates carry alpha");
    let k_mix = m_cands.swap_remove(choice_m.candidate_index).kernel;
    let k_mix_test = mix(&kq_test, &kc_test, MixWeight::new(alpha_star)?)?;
    let dual = finish_model(
        &k_mix,
        &k_mix_test,
        &y_train,
        &y_test_idx,
        choice_m.c,
        choice_m.accuracy,
        Some(gamma_star),
        Some(alpha_star),
        params,
    )?;

    Ok(TaskOutcome {
        task: pair,
        n,
        classical,
        quantum,
        dual,
    })
}

/// A recorded per-task failure inside a sweep that kept going.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub task: (usize, usize),
    pub n: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub model: String,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFeaturesOutput {
    /// Task-averaged rows, ordered by n then classical/quantum/dual.
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
    pub outcomes: Vec<TaskOutcome>,
    pub seconds: f64,
}

/// Resolve the task list for a config: the filtered pair, or the default
/// ten binary tasks.
pub fn config_tasks(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    match cfg.class_filter {
        Some(pair) => vec![pair],
        None => default_tasks(),
    }
}

/// Split one task's raw data and fit its preprocessing, training side only.
fn prepare_task(
    data: &Dataset,
    pair: (usize, usize),
    cfg: &ExperimentConfig,
    n_fit: usize,
) -> Result<(FittedPipeline, Dataset, Dataset)> {
    let subset = class_subset(data, &[pair.0, pair.1], cfg.samples_per_class)?;
    let (train_raw, test_raw) = split(
        &subset,
        cfg.split_ratio,
        derive_seed(cfg.seed, &format!("split-{}-{}", pair.0, pair.1)),
    )?;
    let fitted = FittedPipeline::fit(&train_raw, n_fit)?;
    Ok((fitted, train_raw, test_raw))
}

/// Run every configured task at every configured dimension, averaging
/// accuracies per (n, model). Per-run failures are recorded and skipped.
pub fn sweep_features(cfg: &ExperimentConfig, data: &Dataset) -> Result<SweepFeaturesOutput> {
    cfg.validate()?;
    require_stage(data, Stage::Raw, "sweep_features")?;
    let started = Instant::now();
    let mut dims: Vec<usize> = cfg.feature_dims.clone();
    dims.sort_unstable();
    dims.dedup();
    let n_max = *dims.last().expect("validated non-empty");

    let tasks = config_tasks(cfg);
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for &pair in &tasks {
        let prepared = match prepare_task(data, pair, cfg, n_max) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("task {pair:?} preparation failed: {e}");
                for &n in &dims {
                    failures.push(SweepFailure {
                        task: pair,
                        n,
                        message: e.to_string(),
                    });
                }
                continue;
            }
        };
        let (fitted, train_raw, test_raw) = prepared;
        let mut params = TaskParams::from_config(cfg);
        params.seed = derive_seed(cfg.seed, &format!("cv-{}-{}", pair.0, pair.1));
        for &n in &dims {
            let result = fitted.apply_at(&train_raw, n).and_then(|train_n| {
                let test_n = fitted.apply_at(&test_raw, n)?;
                run_dual_kernel_task(&train_n, &test_n, pair, &params)
            });
            match result {
                Ok(outcome) => outcomes.push(outcome),
                Err(e) => {
                    log::warn!("task {pair:?} at n = {n} failed: {e}");
                    failures.push(SweepFailure {
                        task: pair,
                        n,
                        message: e.to_string(),
                    });
                }
            }
        }
    }

    let mut rows = Vec::new();
    for &n in &dims {
        let at_n: Vec<&TaskOutcome> = outcomes.iter().filter(|o| o.n == n).collect();
        if at_n.is_empty() {
            continue;
        }
        let count = at_n.len() as f64;
        for (name, pick) in [
            ("classical", (|o: &TaskOutcome| &o.classical) as fn(&TaskOutcome) -> &ModelOutcome),
            ("quantum", |o| &o.quantum),
            ("dual", |o| &o.dual),
        ] {
            rows.push(SweepRow {
                n,
                model: name.to_string(),
                train_accuracy: at_n.iter().map(|o| pick(o).train_accuracy).sum::<f64>() / count,
                test_accuracy: at_n.iter().map(|o| pick(o).test_accuracy()).sum::<f64>() / count,
            });
        }
    }
    Ok(SweepFeaturesOutput {
        rows,
        failures,
        outcomes,
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub mean_test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaTaskDetail {
    pub task: (usize, usize),
    /// (alpha, C, test accuracy) per grid point, alpha ascending.
    pub points: Vec<(f64, f64, f64)>,
    pub best_alpha: f64,
    pub best_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAlphaOutput {
    pub n: usize,
    pub rows: Vec<AlphaRow>,
    pub tasks: Vec<AlphaTaskDetail>,
    pub failures: Vec<SweepFailure>,
    pub seconds: f64,
}

/// Sweep the mixing weight at one fixed dimension: per task and alpha,
/// C is re-selected by cross-validation; rows average over tasks.
pub fn sweep_alpha(cfg: &ExperimentConfig, data: &Dataset, n: usize) -> Result<SweepAlphaOutput> {
    cfg.validate()?;
    require_stage(data, Stage::Raw, "sweep_alpha")?;
    let started = Instant::now();
    let mut alphas: Vec<f64> = cfg.grids.alpha.clone();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();

    let tasks = config_tasks(cfg);
    let mut details: Vec<AlphaTaskDetail> = Vec::new();
    let mut failures = Vec::new();
    for &pair in &tasks {
        let run = || -> Result<AlphaTaskDetail> {
            let (fitted, train_raw, test_raw) = prepare_task(data, pair, cfg, n)?;
            let train = fitted.apply_at(&train_raw, n)?;
            let test = fitted.apply_at(&test_raw, n)?;
            let y_train = binary_targets(&train.labels, pair)?;
            let y_test = binary_targets(&test.labels, pair)?;
            let mut params = TaskParams::from_config(cfg);
            params.seed = derive_seed(cfg.seed, &format!("cv-{}-{}", pair.0, pair.1));
            let folds = cv_folds(&train.labels, params.cv_folds, params.seed)?;

            // Classical width first; the mix reuses its kernel.
            let cands = classical_candidates(&train.features, &params.grids.gamma, n)?;
            let choice_c =
                cv_select(&cands, &y_train, &params.grids.c, &folds, params.tol, params.max_passes)?;
            let gamma_star = choice_c.gamma.expect("classical gamma").resolve(n);
            let kc = cands
                .into_iter()
                .nth(choice_c.candidate_index)
                .expect("index from enumeration")
                .kernel;
            let kc_test = rbf_matrix(&test.features, Some(&train.features), gamma_star)?;

            let fm = params.feature_map.at(n);
            let plan = BlockPlan { tile: params.tile };
            let kq = quantum_matrix(&train.features, None, &fm, &plan, params.workers)?;
            let kq_test = quantum_matrix(
                &test.features,
                Some(&train.features),
                &fm,
                &plan,
                params.workers,
            )?;

            let mut points = Vec::with_capacity(alphas.len());
            let mut best_alpha = alphas[0];
            let mut best_accuracy = f64::NEG_INFINITY;
            for &alpha in &alphas {
                let weight = MixWeight::new(alpha)?;
                let k_mix = mix(&kq, &kc, weight)?;
                let cand = [KernelCandidate {
                    kernel: k_mix,
                    gamma: None,
                    alpha: Some(alpha),
                }];
                let choice =
                    cv_select(&cand, &y_train, &params.grids.c, &folds, params.tol, params.max_passes)?;
                let model = solve_dual(
                    &cand[0].kernel,
                    &y_train,
                    choice.c,
                    params.tol,
                    params.max_passes,
                )?;
                let k_mix_test = mix(&kq_test, &kc_test, weight)?;
                let mut correct = 0usize;
                for (r, &y) in y_test.iter().enumerate() {
                    let f = decision(&model, k_mix_test.values.row(r))?;
                    if predict_sign(f) == y {
                        correct += 1;
                    }
                }
                let accuracy = correct as f64 / y_test.len() as f64;
                points.push((alpha, choice.c, accuracy));
                if accuracy > best_accuracy {
                    best_accuracy = accuracy;
                    best_alpha = alpha;
                }
            }
            Ok(AlphaTaskDetail {
                task: pair,
                points,
                best_alpha,
                best_accuracy,
            })
        };
        match run() {
            Ok(detail) => details.push(detail),
            Err(e) => {
                log::warn!("alpha sweep task {pair:?} failed: {e}");
                failures.push(SweepFailure {
                    task: pair,
                    n,
                    message: e.to_string(),
                });
            }
        }
    }

    let mut rows = Vec::new();
    if !details.is_empty() {
        for (i, &alpha) in alphas.iter().enumerate() {
            let mean = details.iter().map(|d| d.points[i].2).sum::<f64>() / details.len() as f64;
            rows.push(AlphaRow {
                alpha,
                mean_test_accuracy: mean,
            });
        }
    }
    Ok(SweepAlphaOutput {
        n,
        rows,
        tasks: details,
        failures,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Kernel choice for a one-vs-one run with fixed hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OvoRunSpec {
    pub kernel: KernelKind,
    pub c: f64,
    pub gamma: GammaSpec,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct OvoOutcome {
    pub ensemble: OvoEnsemble,
    pub train_metrics: MetricsReport,
    pub test_metrics: MetricsReport,
}

fn ovo_kernels(
    train: &Dataset,
    test: &Dataset,
    spec: &OvoRunSpec,
    params: &TaskParams,
) -> Result<(KernelMatrix, KernelMatrix)> {
    let n = train.dims();
    let gamma = spec.gamma.resolve(n);
    let fm = params.feature_map.at(n);
    let plan = BlockPlan { tile: params.tile };
    match spec.kernel {
        KernelKind::Classical => Ok((
            rbf_matrix(&train.features, None, gamma)?,
            rbf_matrix(&test.features, Some(&train.features), gamma)?,
        )),
        KernelKind::Quantum => Ok((
            quantum_matrix(&train.features, None, &fm, &plan, params.workers)?,
            quantum_matrix(&test.features, Some(&train.features), &fm, &plan, params.workers)?,
        )),
        KernelKind::Mixed => {
            let w = MixWeight::new(spec.alpha)?;
            let kq = quantum_matrix(&train.features, None, &fm, &plan, params.workers)?;
            let kc = rbf_matrix(&train.features, None, gamma)?;
            let kq_t = quantum_matrix(
                &test.features,
                Some(&train.features),
                &fm,
                &plan,
                params.workers,
            )?;
            let kc_t = rbf_matrix(&test.features, Some(&train.features), gamma)?;
            Ok((mix(&kq, &kc, w)?, mix(&kq_t, &kc_t, w)?))
        }
    }
}

/// Train the full pairwise ensemble with fixed hyperparameters and score
/// both splits.
pub fn run_ovo_task(
    train: &Dataset,
    test: &Dataset,
    spec: &OvoRunSpec,
    params: &TaskParams,
) -> Result<OvoOutcome> {
    require_stage(train, Stage::Minmax, "one-vs-one task")?;
    require_stage(test, Stage::Minmax, "one-vs-one task")?;
    if test.dims() != train.dims() {
        return Err(Error::invalid("train and test dimensions disagree"));
    }
    let (k_train, k_test) = ovo_kernels(train, test, spec, params)?;
    let ensemble = train_ovo(&k_train, &train.labels, spec.c, params.tol, params.max_passes)?;
    let train_preds = predict_ovo(&ensemble, &k_train.values)?;
    let test_preds = predict_ovo(&ensemble, &k_test.values)?;
    Ok(OvoOutcome {
        train_metrics: metrics(&train.labels, &train_preds, ensemble.classes)?,
        test_metrics: metrics(&test.labels, &test_preds, ensemble.classes)?,
        ensemble,
    })
}
