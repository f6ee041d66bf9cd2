//! Exact evaluation of all-zeros return amplitudes and fidelity kernels.
//!
//! Three interchangeable backends compute the same amplitude: a dense
//! statevector oracle for small circuits, a block-factorized product for
//! block-local circuits at any width, and a greedy pairwise tensor-graph
//! contraction for general circuits. The fidelity kernel entry is the
//! squared modulus of the overlap amplitude.

mod blockwise;
mod gates;
mod graph;
mod statevector;

pub use blockwise::amplitude_blockwise;
pub use gates::{gate_tensor, GateTensor};
pub use graph::TensorGraph;
pub use statevector::{amplitude_statevector, run_statevector, MAX_STATEVECTOR_QUBITS};

use num_complex::Complex64;

use crate::circuit::{compose_overlap, Circuit, FeatureMapConfig};
use crate::error::{Error, Result};

/// Amplitude evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Dense statevector, exact oracle up to [`MAX_STATEVECTOR_QUBITS`].
    Statevector,
    /// Per-block factorization; requires block-local entanglement.
    Blockwise,
    /// Greedy pairwise tensor-graph contraction.
    Greedy,
    /// Blockwise when the structure allows it, greedy otherwise.
    #[default]
    Auto,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Statevector => "statevector",
            Backend::Blockwise => "blockwise",
            Backend::Greedy => "greedy",
            Backend::Auto => "auto",
        }
    }
}

/// All-zeros amplitude of `c` under the chosen backend. `cfg` supplies the
/// block partition and is required for [`Backend::Blockwise`].
pub fn amplitude(c: &Circuit, cfg: Option<&FeatureMapConfig>, backend: Backend) -> Result<Complex64> {
    match backend {
        Backend::Statevector => amplitude_statevector(c),
        Backend::Blockwise => {
            let cfg = cfg.ok_or_else(|| {
                Error::invalid("blockwise backend needs a feature-map config for the block partition")
            })?;
            amplitude_blockwise(c, cfg)
        }
        Backend::Greedy => TensorGraph::amplitude_graph(c).amplitude(),
        Backend::Auto => {
            if let Some(cfg) = cfg {
                match amplitude_blockwise(c, cfg) {
                    Err(Error::StructureViolation(_)) => {
                        TensorGraph::amplitude_graph(c).amplitude()
                    }
                    other => other,
                }
            } else if c.n_qubits() <= MAX_STATEVECTOR_QUBITS {
                amplitude_statevector(c)
            } else {
                TensorGraph::amplitude_graph(c).amplitude()
            }
        }
    }
}

/// Overlap amplitude ⟨0…0| U†(x_j) U(x_i) |0…0⟩ of two feature encodings.
pub fn overlap_amplitude(
    x_i: &[f64],
    x_j: &[f64],
    cfg: &FeatureMapConfig,
    backend: Backend,
) -> Result<Complex64> {
    let w = compose_overlap(x_i, x_j, cfg)?;
    amplitude(&w, Some(cfg), backend)
}

/// Fidelity kernel entry: the squared modulus of the overlap amplitude,
/// clamped to [0, 1] to absorb rounding overshoot.
pub fn kernel_entry(
    x_i: &[f64],
    x_j: &[f64],
    cfg: &FeatureMapConfig,
    backend: Backend,
) -> Result<f64> {
    let a = overlap_amplitude(x_i, x_j, cfg, backend)?;
    Ok(a.norm_sqr().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_feature_map, Entangler, RotationAxis};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen::<f64>()).collect()
    }

    #[test]
    fn equal_inputs_give_unit_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 5, 16, 100] {
            let cfg = FeatureMapConfig::new(n);
            let x = random_vec(&mut rng, n);
            let k = kernel_entry(&x, &x, &cfg, Backend::Auto).unwrap();
            assert!((k - 1.0).abs() < 1e-10, "n={n}: {k}");
            assert!(k <= 1.0);
        }
    }

    #[test]
    fn single_qubit_map_has_cosine_kernel() {
        // H then RZ(πx): K(x_i, x_j) = cos²(π(x_i − x_j)/2).
        let cfg = FeatureMapConfig::new(1).with_rotation_axis(RotationAxis::Rz);
        for (xi, xj) in [(1.0, 0.0), (0.3, 0.7), (0.5, 0.5), (0.9, 0.1), (0.25, 0.75)] {
            let k = kernel_entry(&[xi], &[xj], &cfg, Backend::Statevector).unwrap();
            let expect = (std::f64::consts::PI * (xi - xj) / 2.0).cos().powi(2);
            assert_abs_diff_eq!(k, expect, epsilon = 1e-12);
        }
        let k = kernel_entry(&[1.0], &[0.0], &cfg, Backend::Statevector).unwrap();
        assert_abs_diff_eq!(k, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kernel_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = FeatureMapConfig::new(8).with_depth(2);
        for _ in 0..100 {
            let xi = random_vec(&mut rng, 8);
            let xj = random_vec(&mut rng, 8);
            let kij = kernel_entry(&xi, &xj, &cfg, Backend::Blockwise).unwrap();
            let kji = kernel_entry(&xj, &xi, &cfg, Backend::Blockwise).unwrap();
            assert!((kij - kji).abs() < 1e-12);
        }
    }

    #[test]
    fn amplitudes_conjugate_under_argument_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cfg = FeatureMapConfig::new(6).with_entangler(Entangler::Cx);
        for _ in 0..50 {
            let xi = random_vec(&mut rng, 6);
            let xj = random_vec(&mut rng, 6);
            let aij = overlap_amplitude(&xi, &xj, &cfg, Backend::Statevector).unwrap();
            let aji = overlap_amplitude(&xj, &xi, &cfg, Backend::Statevector).unwrap();
            assert!((aij - aji.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn backends_agree_on_small_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for n in [2usize, 4, 9, 16] {
            for _ in 0..5 {
                let cfg = FeatureMapConfig::new(n)
                    .with_block_size(1 + rng.gen_range(1..4))
                    .with_depth(1 + rng.gen_range(0..2));
                let w = compose_overlap(&random_vec(&mut rng, n), &random_vec(&mut rng, n), &cfg)
                    .unwrap();
                let dense = amplitude(&w, Some(&cfg), Backend::Statevector).unwrap();
                let block = amplitude(&w, Some(&cfg), Backend::Blockwise).unwrap();
                let greedy = amplitude(&w, Some(&cfg), Backend::Greedy).unwrap();
                assert!((dense - block).norm() < 1e-9, "n={n}");
                assert!((dense - greedy).norm() < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn auto_falls_back_to_greedy_for_cross_block_gates() {
        use crate::circuit::GateOp;
        let cfg = FeatureMapConfig::new(4);
        let mut c = Circuit::new(4);
        for q in 0..4 {
            c.push(GateOp::H(q)).unwrap();
        }
        c.push(GateOp::Cz(1, 2)).unwrap();
        let auto = amplitude(&c, Some(&cfg), Backend::Auto).unwrap();
        let dense = amplitude(&c, None, Backend::Statevector).unwrap();
        assert!((auto - dense).norm() < 1e-12);
    }

    #[test]
    fn built_maps_are_unitary_at_small_widths() {
        // Columns of the circuit matrix are orthonormal; checked by running
        // the circuit from every basis state via X-free preparation.
        let cfg = FeatureMapConfig::new(3).with_block_size(3).with_depth(2);
        let x = [0.21, 0.55, 0.83];
        let c = build_feature_map(&x, &cfg).unwrap();
        let round = c.compose(&c.adjoint()).unwrap();
        let state = run_statevector(&round).unwrap();
        assert_abs_diff_eq!(state[0].re, 1.0, epsilon = 1e-10);
        for amp in &state[1..] {
            assert!(amp.norm() < 1e-10);
        }
    }

    #[test]
    fn blockwise_cost_scales_linearly_in_block_count() {
        use std::time::Instant;
        let time_at = |n: usize| {
            let cfg = FeatureMapConfig::new(n);
            let xi: Vec<f64> = (0..n).map(|k| (0.37 * k as f64).fract()).collect();
            let xj: Vec<f64> = (0..n).map(|k| (0.61 * k as f64 + 0.2).fract()).collect();
            let w = compose_overlap(&xi, &xj, &cfg).unwrap();
            // Warm up, then take the best of several runs to damp jitter.
            let mut best = f64::INFINITY;
            for _ in 0..5 {
                let start = Instant::now();
                for _ in 0..8 {
                    std::hint::black_box(amplitude_blockwise(&w, &cfg).unwrap());
                }
                best = best.min(start.elapsed().as_secs_f64());
            }
            best
        };
        let t_small = time_at(128);
        let t_large = time_at(512);
        // 4x the blocks: linear predicts 4x, allow 2x slack either way.
        let ratio = t_large / t_small;
        assert!(ratio < 8.0, "blockwise scaling ratio {ratio}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn kernel_entries_stay_in_unit_interval(
            seed in 0u64..1000,
            n in 1usize..10,
            b in 1usize..4,
            d in 1usize..3,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = FeatureMapConfig::new(n).with_block_size(b).with_depth(d);
            let xi = random_vec(&mut rng, n);
            let xj = random_vec(&mut rng, n);
            let k = kernel_entry(&xi, &xj, &cfg, Backend::Auto).unwrap();
            prop_assert!((0.0..=1.0).contains(&k));
        }

        #[test]
        fn statevector_and_blockwise_agree(
            seed in 0u64..1000,
            n in 1usize..8,
            b in 1usize..4,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = FeatureMapConfig::new(n).with_block_size(b);
            let w = compose_overlap(&random_vec(&mut rng, n), &random_vec(&mut rng, n), &cfg).unwrap();
            let dense = amplitude(&w, Some(&cfg), Backend::Statevector).unwrap();
            let block = amplitude(&w, Some(&cfg), Backend::Blockwise).unwrap();
            prop_assert!((dense - block).norm() < 1e-9);
        }
    }
}
