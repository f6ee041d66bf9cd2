//! Deterministic synthetic 28x28 grayscale dataset.
//!
//! Ten class templates (class-dependent sinusoid plus a bright rectangle)
//! are perturbed per sample by a small shift, an intensity scale, and
//! pixel noise. The generator exists so the full ingestion path can run
//! offline: it writes the same IDX pair the loader reads. All randomness
//! flows from one seeded stream in a fixed order, so (spec, seed) pins
//! every byte.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::preprocess::Dataset;

use super::idx::{write_idx_images, write_idx_labels, IdxImages, IMAGE_SIDE, TRAIN_IMAGES_FILE, TRAIN_LABELS_FILE};

/// Per-pixel Gaussian noise level, in gray levels. Together with the
/// template contrast below, this sets task difficulty: desk-scale models
/// should land visibly below perfect accuracy without collapsing to chance.
const NOISE_SIGMA: f64 = 60.0;
/// Maximum shift applied to a template, in pixels, each axis.
const SHIFT_MAX: i64 = 4;
/// Intensity scale range per sample.
const INTENSITY_LO: f64 = 0.55;
const INTENSITY_HI: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(classes: usize, per_class: usize, seed: u64) -> Self {
        assert!(classes >= 1 && classes <= 10);
        assert!(per_class >= 1);
        SynthSpec {
            classes,
            per_class,
            seed,
        }
    }
}

/// Noise-free class template value at pixel (x, y), in gray levels.
fn template(class: usize, x: i64, y: i64) -> f64 {
    if !(0..IMAGE_SIDE as i64).contains(&x) || !(0..IMAGE_SIDE as i64).contains(&y) {
        return 0.0;
    }
    let u = x as f64 / (IMAGE_SIDE - 1) as f64;
    let v = y as f64 / (IMAGE_SIDE - 1) as f64;
    let c = class as f64;
    let fx = 1.0 + 0.06 * c;
    let fy = 1.0 + 0.2 * (class % 3) as f64;
    let wave = (TAU * (fx * u + 0.05 * c)).sin() * (TAU * fy * v).cos();
    let mut value = 110.0 + 42.0 * wave;
    let r0 = (5 + class) as i64;
    let c0 = (5 + (class * 2) % 12) as i64;
    if (r0..r0 + 6).contains(&y) && (c0..c0 + 8).contains(&x) {
        value += 18.0;
    }
    value
}

/// Generate images and labels, samples grouped by class in class order.
pub fn synth_images(spec: &SynthSpec) -> (IdxImages, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("constant sigma is valid");
    let count = spec.classes * spec.per_class;
    let mut pixels = Vec::with_capacity(count * IMAGE_SIDE * IMAGE_SIDE);
    let mut labels = Vec::with_capacity(count);
    for class in 0..spec.classes {
        for _ in 0..spec.per_class {
            let dx = rng.gen_range(-SHIFT_MAX..=SHIFT_MAX);
            let dy = rng.gen_range(-SHIFT_MAX..=SHIFT_MAX);
            let intensity = rng.gen_range(INTENSITY_LO..INTENSITY_HI);
            for y in 0..IMAGE_SIDE as i64 {
                for x in 0..IMAGE_SIDE as i64 {
                    let base = template(class, x - dx, y - dy) * intensity;
                    let value = base + noise.sample(&mut rng);
                    pixels.push(value.clamp(0.0, 255.0) as u8);
                }
            }
            labels.push(class as u8);
        }
    }
    (
        IdxImages {
            count,
            rows: IMAGE_SIDE,
            cols: IMAGE_SIDE,
            pixels,
        },
        labels,
    )
}

/// Write the generated dataset as the IDX pair the loader expects.
pub fn write_synth_dir(dir: &Path, spec: &SynthSpec) -> Result<()> {
    let (images, labels) = synth_images(spec);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(TRAIN_IMAGES_FILE), write_idx_images(&images)?)?;
    std::fs::write(dir.join(TRAIN_LABELS_FILE), write_idx_labels(&labels)?)?;
    Ok(())
}

/// Generate directly as a raw-stage dataset, bypassing the file round trip.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Dataset> {
    let (images, labels) = synth_images(spec);
    Dataset::raw(
        images.to_matrix()?,
        labels.into_iter().map(usize::from).collect(),
    )
}

/// Uniform features in [0, 1), one seeded stream, row-major fill order.
pub fn uniform_features(m: usize, n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..m * n).map(|_| rng.gen::<f64>()).collect();
    Matrix::from_vec(m, n, data).expect("dimensions match fill")
}
