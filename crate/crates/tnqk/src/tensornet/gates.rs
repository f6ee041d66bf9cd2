//! Gate matrices shared by every amplitude backend.
//!
//! Two-qubit matrices index basis states as `first_qubit * 2 + second_qubit`,
//! so the first qubit of a `Cz`/`Cx` op is the high bit (and the control for
//! `Cx`).

use num_complex::Complex64;

use crate::circuit::GateOp;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A gate as a dense unitary matrix, `data[out * dim + in]`.
#[derive(Debug, Clone)]
pub struct GateTensor {
    pub source: GateOp,
    /// 2 for single-qubit gates, 4 for two-qubit gates.
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl GateTensor {
    pub fn arity(&self) -> usize {
        if self.dim == 2 {
            1
        } else {
            2
        }
    }

    #[inline]
    pub fn entry(&self, out: usize, input: usize) -> Complex64 {
        self.data[out * self.dim + input]
    }

    /// Largest deviation of `U† U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    acc += self.entry(k, r).conj() * self.entry(k, c);
                }
                let expect = if r == c { ONE } else { ZERO };
                worst = worst.max((acc - expect).norm());
            }
        }
        worst
    }
}

/// The matrix realization of a gate.
pub fn gate_tensor(op: &GateOp) -> GateTensor {
    let data = match *op {
        GateOp::H(_) => {
            let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            vec![s, s, s, -s]
        }
        GateOp::Ry(_, t) => {
            let (sin, cos) = (t / 2.0).sin_cos();
            vec![
                Complex64::new(cos, 0.0),
                Complex64::new(-sin, 0.0),
                Complex64::new(sin, 0.0),
                Complex64::new(cos, 0.0),
            ]
        }
        GateOp::Rz(_, t) => {
            let phase = Complex64::new(0.0, t / 2.0);
            vec![(-phase).exp(), ZERO, ZERO, phase.exp()]
        }
        GateOp::Cz(_, _) => {
            let mut m = vec![ZERO; 16];
            for k in 0..4 {
                m[k * 4 + k] = ONE;
            }
            m[15] = -ONE;
            m
        }
        GateOp::Cx(_, _) => {
            let mut m = vec![ZERO; 16];
            m[0] = ONE;
            m[4 + 1] = ONE;
            // Control set: target flips.
            m[2 * 4 + 3] = ONE;
            m[3 * 4 + 2] = ONE;
            m
        }
    };
    let dim = if data.len() == 4 { 2 } else { 4 };
    GateTensor {
        source: *op,
        dim,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rz_zero_is_identity() {
        let g = gate_tensor(&GateOp::Rz(0, 0.0));
        for r in 0..2 {
            for c in 0..2 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g.entry(r, c).re, expect, epsilon = 1e-15);
                assert_abs_diff_eq!(g.entry(r, c).im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn hadamard_squares_to_identity() {
        let g = gate_tensor(&GateOp::H(0));
        for r in 0..2 {
            for c in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    acc += g.entry(r, k) * g.entry(k, c);
                }
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(acc.re, expect, epsilon = 1e-15);
                assert_abs_diff_eq!(acc.im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ry_half_turn_flips_zero_to_one() {
        let g = gate_tensor(&GateOp::Ry(0, std::f64::consts::PI));
        assert_abs_diff_eq!(g.entry(0, 0).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.entry(1, 0).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cx_first_qubit_controls() {
        let g = gate_tensor(&GateOp::Cx(0, 1));
        // |10⟩ (control set, target clear) maps to |11⟩.
        assert_abs_diff_eq!(g.entry(0b11, 0b10).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.entry(0b10, 0b10).norm(), 0.0, epsilon = 1e-15);
        // |01⟩ (control clear) is untouched.
        assert_abs_diff_eq!(g.entry(0b01, 0b01).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn all_gate_tensors_are_unitary() {
        let ops = [
            GateOp::H(0),
            GateOp::Ry(0, 0.7),
            GateOp::Rz(0, -1.3),
            GateOp::Cz(0, 1),
            GateOp::Cx(1, 0),
        ];
        for op in ops {
            assert!(gate_tensor(&op).unitarity_defect() < 1e-12, "{op:?}");
        }
    }
}
