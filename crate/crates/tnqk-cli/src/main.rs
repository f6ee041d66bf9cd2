//! Command-line driver for the dual-kernel experiment pipeline.
//!
//! Every verb is deterministic given the config file: data splits,
//! preprocessing, and hyperparameter selection all derive from the config
//! seed, so `evaluate` can reconstruct exactly what `train` saw.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tnqk::kernels::{
    kernel_stats, load_gram, mix, psd_check, quantum_matrix, rbf_matrix, save_gram, BlockPlan,
    KernelKind, KernelMatrix, MixWeight,
};
use tnqk::pipeline::{
    class_subset, classical_candidates, cv_folds, cv_select, derive_seed, emit_report,
    load_fashion_mnist, mixed_candidates, run_ovo_task, split, sweep_alpha, sweep_features,
    write_synth_dir, ExperimentConfig, GammaSpec, KernelCandidate, OvoRunSpec, ReportBundle,
    RunManifest, SynthSpec, TaskParams,
};
use tnqk::preprocess::{Dataset, FittedPipeline};
use tnqk::svm::{
    decision, metrics, predict_ovo, predict_sign, solve_dual, MetricsReport, OvoEnsemble,
    SvmModel,
};
use tnqk::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tnqk",
    about = "Tensor-network quantum kernels with a classical RBF partner and an SVM on top",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Override the config's output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic IDX dataset pair.
    GenData {
        /// Directory to write the IDX pair into.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the standardize/PCA/min-max chain on the training split and
    /// save it.
    Preprocess {
        #[command(flatten)]
        common: Common,
        /// Output dimension; defaults to the largest configured one.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Build a training Gram matrix and save it with its sidecar.
    Kernel {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_kind)]
        kind: KernelKind,
        #[arg(long)]
        n: usize,
        /// RBF width; defaults to 1/n.
        #[arg(long)]
        gamma: Option<f64>,
        /// Mix weight on the quantum kernel (mixed only).
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Print shape, spectrum floor, and concentration stats of a saved
    /// Gram.
    KernelInfo {
        /// Gram file written by the kernel verb.
        #[arg(long)]
        file: PathBuf,
    },
    /// Train and save a model: binary with cross-validated
    /// hyperparameters when the config filters a class pair, otherwise a
    /// one-vs-one ensemble with fixed hyperparameters.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_kind)]
        kind: KernelKind,
        #[arg(long)]
        n: usize,
        /// Fixed box constraint for the one-vs-one path.
        #[arg(long, default_value_t = 10.0)]
        c: f64,
    },
    /// Reconstruct the config's splits and score a saved model on the
    /// test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model or ensemble JSON written by the train verb.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Run every configured task across the configured dimensions.
    SweepFeatures {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep the mix weight at one fixed dimension.
    SweepAlpha {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Verify a run directory against its manifest and summarize it.
    Report {
        /// Run directory holding manifest.json.
        #[arg(long)]
        output: PathBuf,
    },
}

fn parse_kind(s: &str) -> std::result::Result<KernelKind, String> {
    match s {
        "classical" => Ok(KernelKind::Classical),
        "quantum" => Ok(KernelKind::Quantum),
        "mixed" => Ok(KernelKind::Mixed),
        other => Err(format!("unknown kernel kind {other:?}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = common.workers {
        cfg.workers = workers;
    }
    if let Some(output) = &common.output {
        cfg.output_dir = output.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The config's working subset: the filtered pair or all ten classes.
fn config_classes(cfg: &ExperimentConfig) -> Vec<usize> {
    match cfg.class_filter {
        Some((p, q)) => vec![p, q],
        None => (0..10).collect(),
    }
}

fn split_tag(cfg: &ExperimentConfig) -> String {
    match cfg.class_filter {
        Some((p, q)) => format!("split-{p}-{q}"),
        None => "split-ovo".to_string(),
    }
}

/// Load, subset, and split the raw data exactly as the sweeps do.
fn prepare_splits(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let data = load_fashion_mnist(&cfg.data_path)?;
    let subset = class_subset(&data, &config_classes(cfg), cfg.samples_per_class)?;
    split(&subset, cfg.split_ratio, derive_seed(cfg.seed, &split_tag(cfg)))
}

/// Fit preprocessing on the training split and apply it at dimension n.
fn preprocessed_at(cfg: &ExperimentConfig, n: usize) -> Result<(Dataset, Dataset, FittedPipeline)> {
    let (train_raw, test_raw) = prepare_splits(cfg)?;
    let fitted = FittedPipeline::fit(&train_raw, n)?;
    Ok((
        fitted.apply_at(&train_raw, n)?,
        fitted.apply_at(&test_raw, n)?,
        fitted,
    ))
}

fn ensure_output(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(())
}

fn train_kernels(
    cfg: &ExperimentConfig,
    train: &Dataset,
    kind: KernelKind,
    gamma: f64,
    alpha: f64,
) -> Result<KernelMatrix> {
    let n = train.dims();
    match kind {
        KernelKind::Classical => rbf_matrix(&train.features, None, gamma),
        KernelKind::Quantum => quantum_matrix(
            &train.features,
            None,
            &cfg.feature_map.at(n),
            &BlockPlan { tile: cfg.tile_size },
            cfg.workers,
        ),
        KernelKind::Mixed => {
            let kq = train_kernels(cfg, train, KernelKind::Quantum, gamma, alpha)?;
            let kc = train_kernels(cfg, train, KernelKind::Classical, gamma, alpha)?;
            mix(&kq, &kc, MixWeight::new(alpha)?)
        }
    }
}

fn test_kernels(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    kind: KernelKind,
    gamma: f64,
    alpha: f64,
) -> Result<KernelMatrix> {
    let n = train.dims();
    match kind {
        KernelKind::Classical => rbf_matrix(&test.features, Some(&train.features), gamma),
        KernelKind::Quantum => quantum_matrix(
            &test.features,
            Some(&train.features),
            &cfg.feature_map.at(n),
            &BlockPlan { tile: cfg.tile_size },
            cfg.workers,
        ),
        KernelKind::Mixed => {
            let kq = test_kernels(cfg, train, test, KernelKind::Quantum, gamma, alpha)?;
            let kc = test_kernels(cfg, train, test, KernelKind::Classical, gamma, alpha)?;
            mix(&kq, &kc, MixWeight::new(alpha)?)
        }
    }
}

/// Cross-validate and train one binary model of the given kind, mirroring
/// the task flow so saved models match sweep behavior.
fn train_binary(
    cfg: &ExperimentConfig,
    train: &Dataset,
    pair: (usize, usize),
    kind: KernelKind,
) -> Result<SvmModel> {
    let n = train.dims();
    let params = TaskParams::from_config(cfg);
    let y: Vec<f64> = train
        .labels
        .iter()
        .map(|&l| if l == pair.0 { 1.0 } else { -1.0 })
        .collect();
    let folds = cv_folds(
        &train.labels,
        cfg.cv_folds,
        derive_seed(cfg.seed, &format!("cv-{}-{}", pair.0, pair.1)),
    )?;
    let pick = |cands: &[KernelCandidate]| -> Result<(usize, f64, f64)> {
        let choice = cv_select(cands, &y, &cfg.grids.c, &folds, params.tol, params.max_passes)?;
        Ok((choice.candidate_index, choice.c, choice.accuracy))
    };
    let (kernel, c, cv_acc) = match kind {
        KernelKind::Classical => {
            let mut cands = classical_candidates(&train.features, &cfg.grids.gamma, n)?;
            let (idx, c, acc) = pick(&cands)?;
            (cands.swap_remove(idx).kernel, c, acc)
        }
        KernelKind::Quantum => {
            let kq = train_kernels(cfg, train, KernelKind::Quantum, 0.0, 0.0)?;
            let cands = [KernelCandidate {
                kernel: kq,
                gamma: None,
                alpha: None,
            }];
            let (_, c, acc) = pick(&cands)?;
            let [cand] = cands;
            (cand.kernel, c, acc)
        }
        KernelKind::Mixed => {
            // Classical width first, then joint (C, alpha) on the mix.
            let mut c_cands = classical_candidates(&train.features, &cfg.grids.gamma, n)?;
            let (c_idx, _, _) = pick(&c_cands)?;
            let gamma = c_cands[c_idx]
                .gamma
                .expect("classical candidates carry gamma")
                .resolve(n);
            let kc = c_cands.swap_remove(c_idx).kernel;
            let kq = train_kernels(cfg, train, KernelKind::Quantum, gamma, 0.0)?;
            let mut cands = mixed_candidates(&kq, &kc, &cfg.grids.alpha)?;
            let (idx, c, acc) = pick(&cands)?;
            (cands.swap_remove(idx).kernel, c, acc)
        }
    };
    log::info!("cross-validated accuracy {cv_acc:.4} at C = {c}");
    solve_dual(&kernel, &y, c, params.tol, params.max_passes)
}

fn binary_metrics_line(report: &MetricsReport) -> String {
    format!(
        "accuracy {:.4}  f1 {:.4}  recall {:.4}  specificity {:.4}",
        report.accuracy, report.f1_macro, report.recall_macro, report.specificity_macro
    )
}

fn evaluate_binary(
    cfg: &ExperimentConfig,
    model: &SvmModel,
    train: &Dataset,
    test: &Dataset,
    pair: (usize, usize),
) -> Result<()> {
    if model.train_size() != train.len() {
        return Err(Error::invalid(format!(
            "model was trained on {} samples, config reconstructs {}",
            model.train_size(),
            train.len()
        )));
    }
    let gamma = model.kernel_meta.gamma.unwrap_or(1.0 / train.dims() as f64);
    let alpha = model.kernel_meta.alpha.unwrap_or(0.5);
    let k_test = test_kernels(cfg, train, test, model.kernel_kind, gamma, alpha)?;
    let truths: Vec<usize> = test
        .labels
        .iter()
        .map(|&l| usize::from(l != pair.0))
        .collect();
    let preds: Vec<usize> = (0..k_test.rows())
        .map(|r| {
            decision(model, k_test.values.row(r)).map(|f| usize::from(predict_sign(f) < 0.0))
        })
        .collect::<Result<_>>()?;
    let report = metrics(&truths, &preds, 2)?;
    println!("test {}", binary_metrics_line(&report));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            output,
            classes,
            per_class,
            seed,
        } => {
            write_synth_dir(&output, &SynthSpec::new(classes, per_class, seed))?;
            println!("wrote IDX pair for {classes} classes x {per_class} to {}", output.display());
        }
        Command::Preprocess { common, n } => {
            let cfg = load_config(&common)?;
            let n = n.unwrap_or_else(|| *cfg.feature_dims.iter().max().expect("validated"));
            let (_, _, fitted) = preprocessed_at(&cfg, n)?;
            ensure_output(&cfg)?;
            let path = cfg.output_dir.join(format!("preprocess_n{n}.json"));
            fitted.bundle_at(n)?.save(&path)?;
            println!("fitted preprocessing at n = {n}: {}", path.display());
        }
        Command::Kernel {
            common,
            kind,
            n,
            gamma,
            alpha,
        } => {
            let cfg = load_config(&common)?;
            let gamma = gamma.unwrap_or(1.0 / n as f64);
            let (train, _, _) = preprocessed_at(&cfg, n)?;
            let k = train_kernels(&cfg, &train, kind, gamma, alpha)?;
            ensure_output(&cfg)?;
            let path = cfg
                .output_dir
                .join(format!("gram_{}_n{n}.bin", kind.name()));
            save_gram(&k, &path)?;
            println!("wrote {} x {} {} Gram: {}", k.rows(), k.cols(), kind.name(), path.display());
        }
        Command::KernelInfo { file } => {
            let k = load_gram(&file)?;
            println!("kind {}  shape {} x {}", k.kind.name(), k.rows(), k.cols());
            if let Some(g) = k.meta.gamma {
                println!("gamma {g}");
            }
            if let Some(a) = k.meta.alpha {
                println!("alpha {a}");
            }
            if let Some(fm) = &k.meta.feature_map {
                println!("feature map {fm}");
            }
            if k.is_square() {
                let stats = kernel_stats(&k)?;
                println!(
                    "offdiag mean {:.6e}  variance {:.6e}  min {:.6e}  max {:.6e}",
                    stats.offdiag_mean, stats.offdiag_var, stats.offdiag_min, stats.offdiag_max
                );
                let psd = psd_check(&k, None)?;
                println!(
                    "min eigenvalue {:.6e} (tolerance {:.6e}): {}",
                    psd.min_eigenvalue,
                    psd.tol,
                    if psd.pass { "PSD" } else { "NOT PSD" }
                );
            }
        }
        Command::Train { common, kind, n, c } => {
            let cfg = load_config(&common)?;
            let (train, test, _) = preprocessed_at(&cfg, n)?;
            ensure_output(&cfg)?;
            match cfg.class_filter {
                Some(pair) => {
                    let model = train_binary(&cfg, &train, pair, kind)?;
                    let path = cfg
                        .output_dir
                        .join(format!("model_{}_n{n}.json", kind.name()));
                    model.save(&path)?;
                    println!("trained {} model on task {:?}: {}", kind.name(), pair, path.display());
                    evaluate_binary(&cfg, &model, &train, &test, pair)?;
                }
                None => {
                    let spec = OvoRunSpec {
                        kernel: kind,
                        c,
                        gamma: GammaSpec::OneOverN,
                        alpha: 0.5,
                    };
                    let params = TaskParams::from_config(&cfg);
                    let out = run_ovo_task(&train, &test, &spec, &params)?;
                    let path = cfg
                        .output_dir
                        .join(format!("ensemble_{}_n{n}.json", kind.name()));
                    out.ensemble.save(&path)?;
                    println!(
                        "trained {} one-vs-one ensemble ({} models): {}",
                        kind.name(),
                        out.ensemble.models.len(),
                        path.display()
                    );
                    println!("train {}", binary_metrics_line(&out.train_metrics));
                    println!("test {}", binary_metrics_line(&out.test_metrics));
                }
            }
        }
        Command::Evaluate { common, model, n } => {
            let cfg = load_config(&common)?;
            let (train, test, _) = preprocessed_at(&cfg, n)?;
            let text = std::fs::read_to_string(&model)?;
            if let Ok(binary) = SvmModel::from_json(&text) {
                let pair = cfg.class_filter.ok_or_else(|| {
                    Error::invalid("evaluating a binary model needs class_filter in the config")
                })?;
                evaluate_binary(&cfg, &binary, &train, &test, pair)?;
            } else {
                let ensemble = OvoEnsemble::from_json(&text)?;
                let gamma = GammaSpec::OneOverN.resolve(n);
                let kind = ensemble.models[0].model.kernel_kind;
                let k_test = test_kernels(&cfg, &train, &test, kind, gamma, 0.5)?;
                let preds = predict_ovo(&ensemble, &k_test.values)?;
                let report = metrics(&test.labels, &preds, ensemble.classes)?;
                println!("test {}", binary_metrics_line(&report));
            }
        }
        Command::SweepFeatures { common } => {
            let cfg = load_config(&common)?;
            let data = load_fashion_mnist(&cfg.data_path)?;
            let out = sweep_features(&cfg, &data)?;
            println!("{} rows, {} failures", out.rows.len(), out.failures.len());
            let bundle = ReportBundle {
                features: Some(out),
                ..Default::default()
            };
            let manifest = emit_report(&cfg.output_dir, &cfg.digest(), &bundle)?;
            for f in &manifest.files {
                println!("wrote {}", f.path);
            }
        }
        Command::SweepAlpha { common, n } => {
            let cfg = load_config(&common)?;
            let data = load_fashion_mnist(&cfg.data_path)?;
            let out = sweep_alpha(&cfg, &data, n)?;
            let bundle = ReportBundle {
                alpha: Some(out),
                ..Default::default()
            };
            let manifest = emit_report(&cfg.output_dir, &cfg.digest(), &bundle)?;
            for f in &manifest.files {
                println!("wrote {}", f.path);
            }
        }
        Command::Report { output } => {
            let manifest = RunManifest::load(&output)?;
            manifest.verify(&output)?;
            println!("config digest {}", manifest.config_digest);
            println!("{} files verified", manifest.files.len());
            for t in &manifest.timings {
                println!("{}: {:.2}s", t.stage, t.seconds);
            }
            for t in &manifest.tasks {
                println!(
                    "task {:?} n = {}: classical {:.4} quantum {:.4} dual {:.4}",
                    t.task,
                    t.n,
                    t.classical_test_accuracy,
                    t.quantum_test_accuracy,
                    t.dual_test_accuracy
                );
            }
        }
    }
    Ok(())
}
