//! Kernel SVM dual solver, decision function, multiclass, and metrics.
//!
//! The solver is sequential minimal optimization over a precomputed Gram
//! matrix: each iteration picks the maximal-KKT-violating pair, solves the
//! two-variable subproblem analytically, and updates the cached decision
//! values. Convergence is declared when the largest violation falls below
//! the tolerance; a model that hits the iteration cap is returned flagged
//! rather than discarded.

mod metrics;
mod ovo;

pub use metrics::{metrics, MetricsReport};
pub use ovo::{predict_ovo, train_ovo, OvoEnsemble, OvoModel};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelMatrix, KernelMeta};

/// Default KKT tolerance.
pub const DEFAULT_TOL: f64 = 1e-3;
/// Default iteration cap for the pair-update loop.
pub const DEFAULT_MAX_PASSES: usize = 200_000;

/// Curvature floor for the two-variable subproblem; directions with
/// (numerically) zero curvature step straight to a box bound.
const ETA_FLOOR: f64 = 1e-12;
/// Multipliers this close to 0 or C snap onto the bound.
const SNAP: f64 = 1e-10;

/// A trained binary SVM over a fixed training sample order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Dual variables, one per training sample, each in [0, C].
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// Indices with positive alpha, ascending.
    pub support_indices: Vec<usize>,
    /// Training labels, each exactly +1 or -1.
    pub labels: Vec<f64>,
    pub c: f64,
    pub kernel_kind: KernelKind,
    pub kernel_meta: KernelMeta,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
    pub iterations: usize,
    /// Final dual objective, in maximize form.
    pub dual_objective: f64,
}

impl SvmModel {
    pub fn train_size(&self) -> usize {
        self.alphas.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.alphas.len();
        if self.labels.len() != m || m == 0 {
            return Err(Error::invalid("model alpha/label lengths disagree"));
        }
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(Error::invalid("model C must be positive"));
        }
        if self.alphas.iter().any(|a| !(0.0..=self.c).contains(a)) {
            return Err(Error::invalid("model alphas must lie in [0, C]"));
        }
        if self.labels.iter().any(|y| y.abs() != 1.0) {
            return Err(Error::invalid("model labels must be +1 or -1"));
        }
        if !self.bias.is_finite() {
            return Err(Error::invalid("model bias must be finite"));
        }
        if self.support_indices.windows(2).any(|w| w[0] >= w[1])
            || self.support_indices.iter().any(|&i| i >= m)
        {
            return Err(Error::invalid("model support indices must be ascending and in range"));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format: MODEL_TAG.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::invalid(format!("serializing model: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        if file.format != MODEL_TAG {
            return Err(Error::invalid(format!(
                "expected format {MODEL_TAG:?}, got {:?}",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::invalid(format!("unsupported model version {}", file.version)));
        }
        file.model.validate()?;
        Ok(file.model)
    }
}

const MODEL_TAG: &str = "tnqk-svm-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: SvmModel,
}

/// Solve the box-constrained SVM dual on a precomputed Gram matrix.
///
/// `y` entries must be exactly +1 or -1. The returned model satisfies the
/// box constraints and the equality constraint; when `converged` is false
/// the KKT tolerance was not reached within `max_passes` pair updates.
pub fn solve_dual(
    k: &KernelMatrix,
    y: &[f64],
    c: f64,
    tol: f64,
    max_passes: usize,
) -> Result<SvmModel> {
    if !k.is_square() {
        return Err(Error::invalid("dual solve needs a square Gram"));
    }
    let m = k.rows();
    if m == 0 || y.len() != m {
        return Err(Error::invalid(format!(
            "{} labels for a {m}x{m} Gram",
            y.len()
        )));
    }
    if y.iter().any(|v| v.abs() != 1.0) {
        return Err(Error::invalid("labels must be exactly +1 or -1"));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::invalid(format!("C must be positive, got {c}")));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let asym = k.values.max_abs_asymmetry();
    if asym > 1e-10 {
        return Err(Error::invalid(format!("Gram asymmetry {asym:.3e} above 1e-10")));
    }

    let gram = &k.values;
    let mut alphas = vec![0.0f64; m];
    // Cached decision values without bias: f_i = sum_j alpha_j y_j K_ij.
    let mut f = vec![0.0f64; m];
    let mut iterations = 0usize;
    let mut converged = false;
    // Optimality gap endpoints; b* lies in [low, high] at convergence.
    let (mut high, mut low) = (0.0f64, 0.0f64);

    loop {
        // Maximal violating pair over g_i = y_i - f_i: the largest g over
        // the set allowed to grow against the smallest over the set allowed
        // to shrink.
        let mut up: Option<(f64, usize)> = None;
        let mut down: Option<(f64, usize)> = None;
        for i in 0..m {
            let g = y[i] - f[i];
            let in_up = (alphas[i] < c && y[i] > 0.0) || (alphas[i] > 0.0 && y[i] < 0.0);
            let in_low = (alphas[i] < c && y[i] < 0.0) || (alphas[i] > 0.0 && y[i] > 0.0);
            if in_up && up.is_none_or(|(best, _)| g > best) {
                up = Some((g, i));
            }
            if in_low && down.is_none_or(|(best, _)| g < best) {
                down = Some((g, i));
            }
        }
        let (Some((m_up, i)), Some((m_low, j))) = (up, down) else {
            // One side empty: every sample is pinned; optimal for this box.
            converged = true;
            break;
        };
        high = m_up;
        low = m_low;
        if m_up - m_low <= tol {
            converged = true;
            break;
        }
        if iterations >= max_passes {
            break;
        }
        iterations += 1;

        // Two-variable subproblem on (i, j).
        let s = y[i] * y[j];
        let (l_bound, h_bound) = if s < 0.0 {
            (
                (alphas[j] - alphas[i]).max(0.0),
                (c + alphas[j] - alphas[i]).min(c),
            )
        } else {
            (
                (alphas[i] + alphas[j] - c).max(0.0),
                (alphas[i] + alphas[j]).min(c),
            )
        };
        let eta = (gram.get(i, i) + gram.get(j, j) - 2.0 * gram.get(i, j)).max(ETA_FLOOR);
        let e_i = f[i] - y[i];
        let e_j = f[j] - y[j];
        let mut aj = alphas[j] + y[j] * (e_i - e_j) / eta;
        aj = aj.clamp(l_bound, h_bound);
        if aj < SNAP {
            aj = 0.0;
        } else if aj > c - SNAP {
            aj = c;
        }
        if aj == alphas[j] {
            // The joint box leaves the maximal pair no room; dead end.
            break;
        }
        let delta_j = aj - alphas[j];
        // Preserve sum alpha_i y_i through the paired update; the snap keeps
        // rounding residue from masquerading as movable box room later.
        let mut ai = (alphas[i] - s * delta_j).clamp(0.0, c);
        if ai < SNAP {
            ai = 0.0;
        } else if ai > c - SNAP {
            ai = c;
        }
        let delta_i = ai - alphas[i];
        alphas[i] = ai;
        alphas[j] = aj;
        for t in 0..m {
            f[t] += delta_i * y[i] * gram.get(i, t) + delta_j * y[j] * gram.get(j, t);
        }
    }

    // Bias: mean of y_i - f_i over interior support vectors, else the
    // midpoint of the optimality gap.
    let mut bias_sum = 0.0;
    let mut interior = 0usize;
    for i in 0..m {
        if alphas[i] > 0.0 && alphas[i] < c {
            bias_sum += y[i] - f[i];
            interior += 1;
        }
    }
    let bias = if interior > 0 {
        bias_sum / interior as f64
    } else {
        (high + low) / 2.0
    };

    let support_indices: Vec<usize> = (0..m).filter(|&i| alphas[i] > 0.0).collect();
    let balance: f64 = alphas.iter().zip(y).map(|(a, yi)| a * yi).sum();
    assert!(
        balance.abs() < 1e-6 * c,
        "equality constraint drifted: {balance:e} for C = {c}"
    );
    let dual_objective = dual_objective(gram, y, &alphas);

    Ok(SvmModel {
        alphas,
        bias,
        support_indices,
        labels: y.to_vec(),
        c,
        kernel_kind: k.kind,
        kernel_meta: k.meta.clone(),
        converged,
        iterations,
        dual_objective,
    })
}

/// Dual objective in maximize form:
/// sum_i alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
pub fn dual_objective(gram: &crate::matrix::Matrix, y: &[f64], alphas: &[f64]) -> f64 {
    let mut linear = 0.0;
    let mut quad = 0.0;
    for (i, &ai) in alphas.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        linear += ai;
        for (j, &aj) in alphas.iter().enumerate() {
            if aj != 0.0 {
                quad += ai * aj * y[i] * y[j] * gram.get(i, j);
            }
        }
    }
    linear - 0.5 * quad
}

/// Decision value f(x) = sum_i alpha_i y_i K(x_i, x) + b for one test
/// sample, given its kernel row against the training set.
pub fn decision(model: &SvmModel, k_test_row: &[f64]) -> Result<f64> {
    if k_test_row.len() != model.train_size() {
        return Err(Error::invalid(format!(
            "kernel row has {} entries for {} training samples",
            k_test_row.len(),
            model.train_size()
        )));
    }
    let mut f = model.bias;
    for &i in &model.support_indices {
        f += model.alphas[i] * model.labels[i] * k_test_row[i];
    }
    Ok(f)
}

/// Class prediction from a decision value; sign(0) maps to +1.
pub fn predict_sign(f: f64) -> f64 {
    if f >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Largest KKT violation of `model` on its training Gram: how far any
/// sample's margin strays from what its multiplier allows.
pub fn kkt_violation(model: &SvmModel, gram: &crate::matrix::Matrix) -> Result<f64> {
    let m = model.train_size();
    if gram.rows() != m || gram.cols() != m {
        return Err(Error::invalid("gram shape does not match model"));
    }
    let mut worst = 0.0f64;
    for i in 0..m {
        let f = decision(model, gram.row(i))?;
        let margin = model.labels[i] * f;
        let a = model.alphas[i];
        let violation = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= model.c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use test_support::{gram_from_points, grid_search_dual};

    fn identity_kernel(m: usize) -> KernelMatrix {
        let mut v = Matrix::zeros(m, m);
        for i in 0..m {
            v.set(i, i, 1.0);
        }
        KernelMatrix::new(
            v,
            KernelKind::Classical,
            KernelMeta::default(),
            (0..m).collect(),
            (0..m).collect(),
        )
        .unwrap()
    }

    #[test]
    fn two_point_identity_instance() {
        // With K = I and y = (+1, -1), symmetry forces equal multipliers
        // and the dual reduces to maximizing 2a - a^2, so a = 1 and b = 0.
        let k = identity_kernel(2);
        let model = solve_dual(&k, &[1.0, -1.0], 10.0, 1e-6, 1000).unwrap();
        assert!(model.converged);
        assert_abs_diff_eq!(model.alphas[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(model.alphas[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(model.bias, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(model.dual_objective, 1.0, epsilon = 1e-9);
        assert_eq!(model.support_indices, vec![0, 1]);
    }

    #[test]
    fn duplicate_points_with_opposite_labels_saturate() {
        let values = Matrix::from_vec(2, 2, vec![1.0; 4]).unwrap();
        let k = KernelMatrix::new(
            values,
            KernelKind::Quantum,
            KernelMeta::default(),
            vec![0, 1],
            vec![0, 1],
        )
        .unwrap();
        let c = 2.0;
        let model = solve_dual(&k, &[1.0, -1.0], c, 1e-3, 1000).unwrap();
        assert!(model.converged);
        assert_eq!(model.alphas, vec![c, c]);
        assert_abs_diff_eq!(model.bias, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn decision_of_empty_model_is_bias() {
        let model = SvmModel {
            alphas: vec![0.0, 0.0],
            bias: 0.7,
            support_indices: vec![],
            labels: vec![1.0, -1.0],
            c: 1.0,
            kernel_kind: KernelKind::Classical,
            kernel_meta: KernelMeta::default(),
            converged: true,
            iterations: 0,
            dual_objective: 0.0,
        };
        assert_eq!(decision(&model, &[0.3, 0.9]).unwrap(), 0.7);
        assert!(decision(&model, &[0.3]).is_err());
    }

    #[test]
    fn decision_matches_scalar_recomputation() {
        let model = SvmModel {
            alphas: vec![0.5, 0.0, 1.25],
            bias: -0.3,
            support_indices: vec![0, 2],
            labels: vec![1.0, 1.0, -1.0],
            c: 2.0,
            kernel_kind: KernelKind::Quantum,
            kernel_meta: KernelMeta::default(),
            converged: true,
            iterations: 0,
            dual_objective: 0.0,
        };
        let row = [0.9, 0.4, 0.2];
        let expect = 0.5 * 1.0 * 0.9 + 1.25 * (-1.0) * 0.2 - 0.3;
        assert_abs_diff_eq!(decision(&model, &row).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn interior_support_vectors_sit_on_the_margin() {
        // Two clusters with one straggler each; moderate C leaves interior
        // support vectors whose margin must equal 1 within tolerance.
        let points = vec![
            vec![0.0, 0.0],
            vec![0.2, 0.1],
            vec![1.0, 1.0],
            vec![0.8, 0.9],
        ];
        let k = gram_from_points(&points, 1.0);
        let y = [1.0, 1.0, -1.0, -1.0];
        let model = solve_dual(&k, &y, 5.0, 1e-4, 10_000).unwrap();
        assert!(model.converged);
        let mut found_interior = false;
        for i in 0..4 {
            if model.alphas[i] > 0.0 && model.alphas[i] < model.c {
                found_interior = true;
                let f = decision(&model, k.values.row(i)).unwrap();
                assert_abs_diff_eq!(y[i] * f, 1.0, epsilon = 1e-3);
            }
        }
        assert!(found_interior);
        assert!(kkt_violation(&model, &k.values).unwrap() <= 1e-3);
    }

    #[test]
    fn objective_dominates_grid_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for trial in 0..12 {
            let m = 2 + trial % 7;
            let points: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let mut y: Vec<f64> = (0..m)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            // Ensure both labels occur so the instance is non-trivial.
            y[0] = 1.0;
            y[m - 1] = -1.0;
            let c = [0.5, 1.0, 10.0][trial % 3];
            let k = gram_from_points(&points, 1.5);
            let model = solve_dual(&k, &y, c, 1e-5, 50_000).unwrap();
            let grid_best = grid_search_dual(&k.values, &y, c);
            assert!(
                model.dual_objective >= grid_best - 1e-3,
                "trial {trial}: smo {} vs grid {grid_best}",
                model.dual_objective
            );
            assert!(kkt_violation(&model, &k.values).unwrap() <= 1e-3);
        }
    }

    #[test]
    fn margin_violations_shrink_as_c_grows() {
        let points = vec![
            vec![0.0, 0.0],
            vec![0.3, 0.2],
            vec![0.45, 0.55],
            vec![0.55, 0.45],
            vec![0.7, 0.8],
            vec![1.0, 1.0],
        ];
        let y = [1.0, 1.0, -1.0, 1.0, -1.0, -1.0];
        let k = gram_from_points(&points, 2.0);
        let mut previous = usize::MAX;
        for c in [0.1, 1.0, 10.0, 100.0] {
            let model = solve_dual(&k, &y, c, 1e-5, 100_000).unwrap();
            let violations = (0..6)
                .filter(|&i| {
                    let f = decision(&model, k.values.row(i)).unwrap();
                    y[i] * f < 1.0 - 1e-6
                })
                .count();
            assert!(violations <= previous, "violations grew at C = {c}");
            previous = violations;
        }
    }

    #[test]
    fn equality_constraint_holds_after_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..10 {
            let m = 6;
            let points: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..2).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let mut y: Vec<f64> = (0..m)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let k = gram_from_points(&points, 1.0);
            let model = solve_dual(&k, &y, 10.0, 1e-4, 50_000).unwrap();
            let balance: f64 = model
                .alphas
                .iter()
                .zip(&y)
                .map(|(a, yi)| a * yi)
                .sum();
            assert!(balance.abs() < 1e-6 * model.c);
            assert!(model.alphas.iter().all(|&a| (0.0..=model.c).contains(&a)));
        }
    }

    #[test]
    fn model_json_round_trip_and_validation() {
        let k = identity_kernel(3);
        let model = solve_dual(&k, &[1.0, -1.0, 1.0], 2.0, 1e-5, 1000).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = SvmModel::load(&path).unwrap();
        assert_eq!(loaded, model);

        assert!(SvmModel::from_json("junk").is_err());
        assert!(SvmModel::from_json("{}").is_err());
        let text = std::fs::read_to_string(&path).unwrap();
        let bad_alpha = text.replace("\"c\": 2.0", "\"c\": 0.0");
        assert!(SvmModel::from_json(&bad_alpha).is_err());
    }
}
