//! Persisted run artifacts: delimited tables, confusion matrices, kernel
//! statistics, and a manifest that digests every file it references.
//!
//! Tables are plain text with tab delimiters and fixed float formats, so a
//! rerun with the same config and seed reproduces them byte for byte. The
//! manifest carries timings and chosen hyperparameters; timings vary run
//! to run, which is why they live in the manifest and never in a table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::KernelStats;
use crate::svm::MetricsReport;

use super::config::hex_string;
use super::task::{SweepAlphaOutput, SweepFeaturesOutput, TaskOutcome};

const MANIFEST_TAG: &str = "tnqk-run-manifest";
const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: (usize, usize),
    pub n: usize,
    pub classical_c: f64,
    pub classical_gamma: f64,
    pub quantum_c: f64,
    pub dual_c: f64,
    pub dual_alpha: f64,
    pub classical_test_accuracy: f64,
    pub quantum_test_accuracy: f64,
    pub dual_test_accuracy: f64,
}

impl TaskSummary {
    pub fn from_outcome(o: &TaskOutcome) -> Self {
        TaskSummary {
            task: o.task,
            n: o.n,
            classical_c: o.classical.c,
            classical_gamma: o.classical.gamma.unwrap_or(f64::NAN),
            quantum_c: o.quantum.c,
            dual_c: o.dual.c,
            dual_alpha: o.dual.alpha.unwrap_or(f64::NAN),
            classical_test_accuracy: o.classical.test_accuracy(),
            quantum_test_accuracy: o.quantum.test_accuracy(),
            dual_test_accuracy: o.dual.test_accuracy(),
        }
    }
}

/// Record of one run: config digest, timings, choices, and every file the
/// run wrote, each with its content digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub config_digest: String,
    pub timings: Vec<StageTiming>,
    pub tasks: Vec<TaskSummary>,
    pub files: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(config_digest: impl Into<String>) -> Self {
        RunManifest {
            format: MANIFEST_TAG.to_string(),
            version: MANIFEST_VERSION,
            config_digest: config_digest.into(),
            timings: Vec::new(),
            tasks: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn add_timing(&mut self, stage: impl Into<String>, seconds: f64) {
        self.timings.push(StageTiming {
            stage: stage.into(),
            seconds,
        });
    }

    /// Register an already-written file by digesting its current content.
    pub fn add_file(&mut self, root: &Path, rel: &str) -> Result<()> {
        let bytes = std::fs::read(root.join(rel))?;
        self.files.push(FileDigest {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Check that every referenced file still exists with matching digest.
    pub fn verify(&self, root: &Path) -> Result<()> {
        for f in &self.files {
            let path = root.join(&f.path);
            let bytes = std::fs::read(&path).map_err(|e| {
                Error::invalid(format!("manifest references missing {}: {e}", f.path))
            })?;
            let got = sha256_hex(&bytes);
            if got != f.sha256 {
                return Err(Error::invalid(format!(
                    "digest mismatch for {}: manifest {} vs content {got}",
                    f.path, f.sha256
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, root: &Path) -> Result<PathBuf> {
        let path = root.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::invalid(format!("serializing manifest: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn load(root: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(root.join(MANIFEST_FILE))?;
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        if manifest.format != MANIFEST_TAG || manifest.version != MANIFEST_VERSION {
            return Err(Error::invalid(format!(
                "unsupported manifest {} v{}",
                manifest.format, manifest.version
            )));
        }
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

/// A kernel-statistics table row: where the stats came from plus the
/// off-diagonal summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelStatsRow {
    pub label: String,
    pub n: usize,
    pub stats: KernelStats,
}

/// Everything a run wants persisted. Absent pieces produce no files.
#[derive(Debug, Clone, Default)]
pub struct ReportBundle {
    pub features: Option<SweepFeaturesOutput>,
    pub alpha: Option<SweepAlphaOutput>,
    pub kernel_stats: Vec<KernelStatsRow>,
    /// Tagged confusion matrices, e.g. one per final model.
    pub confusions: Vec<(String, MetricsReport)>,
}

pub const FEATURES_TABLE: &str = "sweep_features.tsv";
pub const ALPHA_TABLE: &str = "sweep_alpha.tsv";
pub const TASK_TABLE: &str = "task_metrics.tsv";
pub const STATS_TABLE: &str = "kernel_stats.tsv";

fn write_file(root: &Path, rel: &str, content: &str, manifest: &mut RunManifest) -> Result<()> {
    std::fs::write(root.join(rel), content)?;
    manifest.add_file(root, rel)
}

pub fn features_table(out: &SweepFeaturesOutput) -> String {
    let mut s = String::from("n\tmodel\ttrain_accuracy\ttest_accuracy\n");
    for r in &out.rows {
        s.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\n",
            r.n, r.model, r.train_accuracy, r.test_accuracy
        ));
    }
    s
}

pub fn alpha_table(out: &SweepAlphaOutput) -> String {
    let mut s = String::from("alpha\tmean_test_accuracy\n");
    for r in &out.rows {
        s.push_str(&format!("{:.6}\t{:.6}\n", r.alpha, r.mean_test_accuracy));
    }
    s
}

fn task_table(outcomes: &[TaskOutcome]) -> String {
    let mut s = String::from(
        "task\tn\tmodel\taccuracy\tf1_macro\trecall_macro\tspecificity_macro\n",
    );
    for o in outcomes {
        for (name, m) in [
            ("classical", &o.classical),
            ("quantum", &o.quantum),
            ("dual", &o.dual),
        ] {
            s.push_str(&format!(
                "{}-{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                o.task.0,
                o.task.1,
                o.n,
                name,
                m.test_metrics.accuracy,
                m.test_metrics.f1_macro,
                m.test_metrics.recall_macro,
                m.test_metrics.specificity_macro
            ));
        }
    }
    s
}

fn stats_table(rows: &[KernelStatsRow]) -> String {
    let mut s = String::from(
        "label\tn\toffdiag_mean\toffdiag_variance\toffdiag_min\toffdiag_max\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{}\t{}\t{:.12e}\t{:.12e}\t{:.12e}\t{:.12e}\n",
            r.label,
            r.n,
            r.stats.offdiag_mean,
            r.stats.offdiag_var,
            r.stats.offdiag_min,
            r.stats.offdiag_max
        ));
    }
    s
}

pub fn confusion_table(report: &MetricsReport) -> String {
    let mut s = String::new();
    for row in &report.confusion {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        s.push_str(&cells.join("\t"));
        s.push('\n');
    }
    s
}

/// Write every present piece of the bundle under `out_dir`, then the
/// manifest last so it can digest all of them. Writes happen on this one
/// thread, in a fixed order.
pub fn emit_report(
    out_dir: &Path,
    config_digest: &str,
    bundle: &ReportBundle,
) -> Result<RunManifest> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(config_digest);

    if let Some(features) = &bundle.features {
        write_file(out_dir, FEATURES_TABLE, &features_table(features), &mut manifest)?;
        write_file(out_dir, TASK_TABLE, &task_table(&features.outcomes), &mut manifest)?;
        for o in &features.outcomes {
            manifest.tasks.push(TaskSummary::from_outcome(o));
        }
        manifest.add_timing("sweep_features", features.seconds);
    }
    if let Some(alpha) = &bundle.alpha {
        write_file(out_dir, ALPHA_TABLE, &alpha_table(alpha), &mut manifest)?;
        manifest.add_timing("sweep_alpha", alpha.seconds);
    }
    if !bundle.kernel_stats.is_empty() {
        write_file(out_dir, STATS_TABLE, &stats_table(&bundle.kernel_stats), &mut manifest)?;
    }
    for (tag, report) in &bundle.confusions {
        let rel = format!("confusion_{tag}.tsv");
        write_file(out_dir, &rel, &confusion_table(report), &mut manifest)?;
    }
    manifest.save(out_dir)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::task::{AlphaRow, SweepRow};

    fn tiny_features_output() -> SweepFeaturesOutput {
        SweepFeaturesOutput {
            rows: vec![
                SweepRow {
                    n: 2,
                    model: "classical".into(),
                    train_accuracy: 0.9375,
                    test_accuracy: 0.875,
                },
                SweepRow {
                    n: 2,
                    model: "quantum".into(),
                    train_accuracy: 1.0 / 3.0,
                    test_accuracy: 2.0 / 3.0,
                },
            ],
            failures: vec![],
            outcomes: vec![],
            seconds: 1.25,
        }
    }

    #[test]
    fn tables_use_fixed_formats() {
        let s = features_table(&tiny_features_output());
        assert_eq!(
            s,
            "n\tmodel\ttrain_accuracy\ttest_accuracy\n\
             2\tclassical\t0.937500\t0.875000\n\
             2\tquantum\t0.333333\t0.666667\n"
        );
        let a = alpha_table(&SweepAlphaOutput {
            n: 64,
            rows: vec![AlphaRow {
                alpha: 7.0 / 9.0,
                mean_test_accuracy: 0.9,
            }],
            tasks: vec![],
            failures: vec![],
            seconds: 0.0,
        });
        assert!(a.contains("0.777778\t0.900000\n"));
    }

    #[test]
    fn empty_bundle_writes_only_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = emit_report(dir.path(), "digest", &ReportBundle::default()).unwrap();
        assert!(manifest.tasks.is_empty());
        assert!(manifest.files.is_empty());
        let entries: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(entries, vec![MANIFEST_FILE.to_string()]);
        RunManifest::load(dir.path()).unwrap().verify(dir.path()).unwrap();
    }

    #[test]
    fn manifest_digests_catch_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = ReportBundle {
            features: Some(tiny_features_output()),
            ..Default::default()
        };
        let manifest = emit_report(dir.path(), "digest", &bundle).unwrap();
        assert_eq!(manifest.files.len(), 2);
        manifest.verify(dir.path()).unwrap();

        std::fs::write(dir.path().join(FEATURES_TABLE), "tampered").unwrap();
        assert!(manifest.verify(dir.path()).is_err());
        std::fs::remove_file(dir.path().join(FEATURES_TABLE)).unwrap();
        assert!(manifest.verify(dir.path()).is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = RunManifest::new("abc");
        manifest.add_timing("stage", 2.5);
        manifest.save(dir.path()).unwrap();
        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn confusion_table_rows_sum_to_class_counts() {
        let report = crate::svm::metrics(&[0, 0, 0, 1, 1, 2], &[0, 0, 1, 1, 0, 2], 3).unwrap();
        let table = confusion_table(&report);
        assert_eq!(table, "2\t1\t0\n1\t1\t0\n0\t0\t1\n");
        for (class, line) in table.lines().enumerate() {
            let sum: usize = line.split('\t').map(|v| v.parse::<usize>().unwrap()).sum();
            let truths = [3, 2, 1][class];
            assert_eq!(sum, truths);
        }
    }
}
