//! Regenerates the checked-in fuzz corpus seeds. Ignored by default; run
//! with `cargo test -p tnqk --test corpus_seeds -- --ignored` after
//! changing any serialized format so the seeds track it.

use std::path::PathBuf;

use tnqk::circuit::FeatureMapConfig;
use tnqk::kernels::{rbf_matrix, write_gram_bytes};
use tnqk::pipeline::synth::synth_images;
use tnqk::pipeline::{
    synth_dataset, uniform_features, write_idx_images, write_idx_labels, ExperimentConfig,
    SynthSpec,
};
use tnqk::preprocess::FittedPipeline;
use tnqk::svm::{solve_dual, train_ovo};

fn corpus_dir(target: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
#[ignore = "writes into fuzz/corpus; run explicitly to regenerate seeds"]
fn regenerate_fuzz_corpus_seeds() {
    let (images, labels) = synth_images(&SynthSpec::new(2, 1, 3));
    std::fs::write(
        corpus_dir("idx_images").join("two_images"),
        write_idx_images(&images).unwrap(),
    )
    .unwrap();
    std::fs::write(
        corpus_dir("idx_labels").join("two_labels"),
        write_idx_labels(&labels).unwrap(),
    )
    .unwrap();

    let x = uniform_features(4, 3, 1);
    let k = rbf_matrix(&x, None, 0.5).unwrap();
    std::fs::write(
        corpus_dir("gram").join("rbf_4x4"),
        write_gram_bytes(&k.values).unwrap(),
    )
    .unwrap();

    let circuit =
        tnqk::circuit::build_feature_map(&[0.2, 0.8, 0.4, 0.6], &FeatureMapConfig::new(4))
            .unwrap();
    std::fs::write(corpus_dir("circuit_text").join("feature_map_4q"), circuit.to_text()).unwrap();

    let cfg = ExperimentConfig::desk_default("data", "out");
    std::fs::write(corpus_dir("config_toml").join("desk_default"), cfg.to_toml().unwrap())
        .unwrap();

    let data = synth_dataset(&SynthSpec::new(2, 8, 9)).unwrap();
    let fitted = FittedPipeline::fit(&data, 4).unwrap();
    fitted
        .bundle_at(4)
        .unwrap()
        .save(&corpus_dir("preprocess_json").join("pipeline_n4.json"))
        .unwrap();

    let cooked = fitted.apply_at(&data, 4).unwrap();
    let gram = rbf_matrix(&cooked.features, None, 0.25).unwrap();
    let y: Vec<f64> = cooked
        .labels
        .iter()
        .map(|&l| if l == 0 { 1.0 } else { -1.0 })
        .collect();
    let model = solve_dual(&gram, &y, 1.0, 1e-3, 10_000).unwrap();
    model
        .save(&corpus_dir("model_json").join("binary_model.json"))
        .unwrap();
    let ensemble = train_ovo(&gram, &cooked.labels, 1.0, 1e-3, 10_000).unwrap();
    ensemble
        .save(&corpus_dir("model_json").join("ovo_ensemble.json"))
        .unwrap();

    // Every fuzz target has at least one seed after regeneration.
    for target in [
        "idx_images",
        "idx_labels",
        "gram",
        "circuit_text",
        "config_toml",
        "preprocess_json",
        "model_json",
    ] {
        assert!(
            std::fs::read_dir(corpus_dir(target)).unwrap().next().is_some(),
            "no seed for {target}"
        );
    }
}
