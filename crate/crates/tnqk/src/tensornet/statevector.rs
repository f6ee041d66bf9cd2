//! Dense statevector simulation, the small-scale amplitude oracle.
//!
//! Qubit `q` is bit `q` of the state index. The all-zeros amplitude of a
//! circuit run on |0…0⟩ is component 0 of the final state.

use num_complex::Complex64;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::tensornet::gates::gate_tensor;

/// Memory guard: 2^24 complex doubles is 256 MiB.
pub const MAX_STATEVECTOR_QUBITS: usize = 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Run `c` on |0…0⟩ and return the full final state.
pub fn run_statevector(c: &Circuit) -> Result<Vec<Complex64>> {
    let n = c.n_qubits();
    if n > MAX_STATEVECTOR_QUBITS {
        return Err(Error::Capacity(format!(
            "statevector backend supports at most {MAX_STATEVECTOR_QUBITS} qubits, got {n}"
        )));
    }
    let mut state = vec![ZERO; 1usize << n];
    state[0] = Complex64::new(1.0, 0.0);
    for op in c.ops() {
        let g = gate_tensor(op);
        match op.qubits() {
            (q, None) => apply_one(&mut state, q, &g.data),
            (a, Some(b)) => apply_two(&mut state, a, b, &g.data),
        }
    }
    Ok(state)
}

/// The all-zeros return amplitude ⟨0…0| c |0…0⟩.
pub fn amplitude_statevector(c: &Circuit) -> Result<Complex64> {
    Ok(run_statevector(c)?[0])
}

fn apply_one(state: &mut [Complex64], q: usize, m: &[Complex64]) {
    let mask = 1usize << q;
    for i in 0..state.len() {
        if i & mask != 0 {
            continue;
        }
        let j = i | mask;
        let (a, b) = (state[i], state[j]);
        state[i] = m[0] * a + m[1] * b;
        state[j] = m[2] * a + m[3] * b;
    }
}

/// `m` indexes basis states as `first_qubit * 2 + second_qubit`.
fn apply_two(state: &mut [Complex64], qa: usize, qb: usize, m: &[Complex64]) {
    let ma = 1usize << qa;
    let mb = 1usize << qb;
    for i in 0..state.len() {
        if i & (ma | mb) != 0 {
            continue;
        }
        let idx = [i, i | mb, i | ma, i | ma | mb];
        let old = [state[idx[0]], state[idx[1]], state[idx[2]], state[idx[3]]];
        for out in 0..4 {
            let mut acc = ZERO;
            for input in 0..4 {
                acc += m[out * 4 + input] * old[input];
            }
            state[idx[out]] = acc;
        }
    }
}
