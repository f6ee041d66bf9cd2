//! Greedy pairwise tensor-graph contraction for general circuits.
//!
//! An amplitude graph holds one rank-1 |0⟩ tensor per qubit, one tensor per
//! gate, and one rank-1 ⟨0| tensor per qubit, joined along qubit wires. Every
//! leg is bound to exactly one other leg, so the full contraction is a
//! scalar. Axes are edge ids; every axis has dimension 2 and axis position
//! `k` of a tensor has stride `2^k`.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::tensornet::gates::gate_tensor;

/// Intermediate tensors above this rank abort the contraction.
const MAX_RANK: usize = 26;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone)]
struct Tensor {
    /// Edge ids, one per axis.
    axes: Vec<usize>,
    data: Vec<Complex64>,
}

impl Tensor {
    fn rank(&self) -> usize {
        self.axes.len()
    }

    fn stride_of(&self, edge: usize) -> usize {
        1 << self.axes.iter().position(|&e| e == edge).unwrap()
    }
}

/// A closed tensor network whose full contraction is one complex amplitude.
#[derive(Debug, Clone)]
pub struct TensorGraph {
    nodes: Vec<Option<Tensor>>,
}

impl TensorGraph {
    /// The ⟨0…0| c |0…0⟩ network: |0⟩ kets, then gate tensors in circuit
    /// order, then ⟨0| bras. Node order is fixed so greedy tie-breaks are
    /// deterministic.
    pub fn amplitude_graph(c: &Circuit) -> TensorGraph {
        let n = c.n_qubits();
        let mut next_edge = 0usize;
        let mut new_edge = || {
            next_edge += 1;
            next_edge - 1
        };

        let mut nodes = Vec::with_capacity(2 * n + c.ops().len());
        let mut wire: Vec<usize> = (0..n).map(|_| new_edge()).collect();
        for &e in &wire {
            nodes.push(Some(Tensor {
                axes: vec![e],
                data: vec![ONE, ZERO],
            }));
        }

        for op in c.ops() {
            let g = gate_tensor(op);
            match op.qubits() {
                (q, None) => {
                    let out = new_edge();
                    // data[in + 2*out] = U[out][in]
                    let data = vec![g.entry(0, 0), g.entry(0, 1), g.entry(1, 0), g.entry(1, 1)];
                    nodes.push(Some(Tensor {
                        axes: vec![wire[q], out],
                        data,
                    }));
                    wire[q] = out;
                }
                (a, Some(b)) => {
                    let out_a = new_edge();
                    let out_b = new_edge();
                    // data[ia + 2ib + 4oa + 8ob] = M[oa*2+ob][ia*2+ib]
                    let mut data = vec![ZERO; 16];
                    for oa in 0..2 {
                        for ob in 0..2 {
                            for ia in 0..2 {
                                for ib in 0..2 {
                                    data[ia + 2 * ib + 4 * oa + 8 * ob] =
                                        g.entry(oa * 2 + ob, ia * 2 + ib);
                                }
                            }
                        }
                    }
                    nodes.push(Some(Tensor {
                        axes: vec![wire[a], wire[b], out_a, out_b],
                        data,
                    }));
                    wire[a] = out_a;
                    wire[b] = out_b;
                }
            }
        }

        for q in 0..n {
            nodes.push(Some(Tensor {
                axes: vec![wire[q]],
                data: vec![ONE, ZERO],
            }));
        }

        TensorGraph { nodes }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    /// Contract the whole graph to a scalar.
    pub fn amplitude(self) -> Result<Complex64> {
        Ok(self.run(false)?.0)
    }

    /// Contract and also return a text trace, one line per pairwise
    /// contraction, for debugging and goldening.
    pub fn amplitude_traced(self) -> Result<(Complex64, String)> {
        self.run(true)
    }

    fn run(mut self, traced: bool) -> Result<(Complex64, String)> {
        let mut trace = String::new();
        loop {
            let live: Vec<usize> = (0..self.nodes.len())
                .filter(|&i| self.nodes[i].is_some())
                .collect();
            if live.len() <= 1 {
                break;
            }

            // Connected pair minimizing rank of the contraction result,
            // ties to the lowest (i, j).
            let mut best: Option<(usize, usize, usize)> = None;
            for (pos, &i) in live.iter().enumerate() {
                let ti = self.nodes[i].as_ref().unwrap();
                for &j in &live[pos + 1..] {
                    let tj = self.nodes[j].as_ref().unwrap();
                    let shared = ti.axes.iter().filter(|e| tj.axes.contains(e)).count();
                    if shared == 0 {
                        continue;
                    }
                    let rank = ti.rank() + tj.rank() - 2 * shared;
                    if best.is_none_or(|(r, _, _)| rank < r) {
                        best = Some((rank, i, j));
                    }
                }
            }

            match best {
                Some((rank, i, j)) => {
                    let ti = self.nodes[i].take().unwrap();
                    let tj = self.nodes[j].take().unwrap();
                    let merged = contract(&ti, &tj)?;
                    debug_assert_eq!(merged.rank(), rank);
                    if traced {
                        let _ = writeln!(
                            trace,
                            "contract ({i}, {j}) -> {} rank {rank}",
                            self.nodes.len()
                        );
                    }
                    self.nodes.push(Some(merged));
                }
                None => {
                    // No connected pairs left: disconnected components have
                    // each collapsed to a scalar; multiply them.
                    let mut product = ONE;
                    for idx in live {
                        let t = self.nodes[idx].take().unwrap();
                        if t.rank() != 0 {
                            return Err(Error::StructureViolation(format!(
                                "node {idx} has {} unbound legs",
                                t.rank()
                            )));
                        }
                        product *= t.data[0];
                    }
                    if traced {
                        let _ = writeln!(trace, "multiply scalars -> {}", self.nodes.len());
                    }
                    self.nodes.push(Some(Tensor {
                        axes: Vec::new(),
                        data: vec![product],
                    }));
                }
            }
        }

        let last = self
            .nodes
            .into_iter()
            .flatten()
            .next_back()
            .ok_or_else(|| Error::invalid("empty tensor graph"))?;
        if last.rank() != 0 {
            return Err(Error::StructureViolation(format!(
                "contraction finished with {} open legs",
                last.rank()
            )));
        }
        Ok((last.data[0], trace))
    }
}

fn contract(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let shared: Vec<usize> = a
        .axes
        .iter()
        .filter(|e| b.axes.contains(e))
        .copied()
        .collect();
    let free_a: Vec<usize> = a
        .axes
        .iter()
        .filter(|e| !shared.contains(e))
        .copied()
        .collect();
    let free_b: Vec<usize> = b
        .axes
        .iter()
        .filter(|e| !shared.contains(e))
        .copied()
        .collect();

    let (na, nb, ns) = (free_a.len(), free_b.len(), shared.len());
    if na + nb > MAX_RANK {
        return Err(Error::Capacity(format!(
            "contraction result has rank {} (limit {MAX_RANK})",
            na + nb
        )));
    }

    let strides_free_a: Vec<usize> = free_a.iter().map(|&e| a.stride_of(e)).collect();
    let strides_free_b: Vec<usize> = free_b.iter().map(|&e| b.stride_of(e)).collect();
    let strides_shared_a: Vec<usize> = shared.iter().map(|&e| a.stride_of(e)).collect();
    let strides_shared_b: Vec<usize> = shared.iter().map(|&e| b.stride_of(e)).collect();

    #[inline]
    fn offset(bits: usize, strides: &[usize]) -> usize {
        strides
            .iter()
            .enumerate()
            .filter(|&(k, _)| bits >> k & 1 == 1)
            .map(|(_, s)| s)
            .sum()
    }

    let mut data = vec![ZERO; 1 << (na + nb)];
    for fb in 0..1usize << nb {
        let base_b = offset(fb, &strides_free_b);
        for fa in 0..1usize << na {
            let base_a = offset(fa, &strides_free_a);
            let mut acc = ZERO;
            for s in 0..1usize << ns {
                acc += a.data[base_a + offset(s, &strides_shared_a)]
                    * b.data[base_b + offset(s, &strides_shared_b)];
            }
            data[fa + (fb << na)] = acc;
        }
    }

    let mut axes = free_a;
    axes.extend(free_b);
    Ok(Tensor { axes, data })
}
