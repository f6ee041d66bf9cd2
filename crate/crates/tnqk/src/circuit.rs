//! Block-product-state feature-map circuits.
//!
//! A feature map encodes a vector `x ∈ [0,1]^n` into an `n`-qubit circuit:
//! `depth` repetitions of a Hadamard layer, a data-dependent rotation layer
//! (qubit `k` rotates by `angle_scale * x[k]`), and an entangling layer that
//! couples adjacent qubits strictly inside fixed blocks of `block_size`
//! qubits. Entanglers never cross a block boundary, so the state factorizes
//! over blocks. The overlap composite applies one feature map forward and a
//! second one inverted; its all-zeros amplitude is the state fidelity.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// One gate in a circuit. Rotation angles are radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp {
    H(usize),
    Ry(usize, f64),
    Rz(usize, f64),
    Cz(usize, usize),
    Cx(usize, usize),
}

impl GateOp {
    /// Qubits touched, second slot filled for two-qubit gates.
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            GateOp::H(q) | GateOp::Ry(q, _) | GateOp::Rz(q, _) => (q, None),
            GateOp::Cz(a, b) | GateOp::Cx(a, b) => (a, Some(b)),
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            GateOp::Ry(_, t) | GateOp::Rz(_, t) => Some(t),
            _ => None,
        }
    }

    pub fn is_entangling(&self) -> bool {
        matches!(self, GateOp::Cz(..) | GateOp::Cx(..))
    }

    /// The inverse gate: H, CZ and CX are involutions, rotations negate.
    pub fn inverse(&self) -> GateOp {
        match *self {
            GateOp::Ry(q, t) => GateOp::Ry(q, -t),
            GateOp::Rz(q, t) => GateOp::Rz(q, -t),
            other => other,
        }
    }

    fn check(&self, n_qubits: usize) -> Result<()> {
        let (a, b) = self.qubits();
        if a >= n_qubits || b.is_some_and(|b| b >= n_qubits) {
            return Err(Error::invalid(format!(
                "gate {self:?} touches a qubit outside [0, {n_qubits})"
            )));
        }
        if b == Some(a) {
            return Err(Error::invalid(format!("gate {self:?} repeats a qubit")));
        }
        if let Some(t) = self.angle() {
            if !t.is_finite() {
                return Err(Error::invalid(format!("gate {self:?} has non-finite angle")));
            }
        }
        Ok(())
    }
}

/// An ordered gate list over a fixed number of qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        assert!(n_qubits > 0, "circuit needs at least one qubit");
        Circuit {
            n_qubits,
            ops: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        op.check(self.n_qubits)?;
        self.ops.push(op);
        Ok(())
    }

    /// Ops reversed with each gate replaced by its inverse.
    pub fn adjoint(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            ops: self.ops.iter().rev().map(GateOp::inverse).collect(),
        }
    }

    /// `self` followed by `other`.
    pub fn compose(&self, other: &Circuit) -> Result<Circuit> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::invalid(format!(
                "cannot compose circuits on {} and {} qubits",
                self.n_qubits, other.n_qubits
            )));
        }
        let mut ops = self.ops.clone();
        ops.extend_from_slice(&other.ops);
        Ok(Circuit {
            n_qubits: self.n_qubits,
            ops,
        })
    }

    /// Line-oriented text form, one gate per line. Round-trips exactly via
    /// [`Circuit::parse`] (angles use shortest-round-trip decimal form).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("tnqk-circuit v1\n");
        let _ = writeln!(out, "qubits {}", self.n_qubits);
        for op in &self.ops {
            match *op {
                GateOp::H(q) => {
                    let _ = writeln!(out, "h {q}");
                }
                GateOp::Ry(q, t) => {
                    let _ = writeln!(out, "ry {q} {t}");
                }
                GateOp::Rz(q, t) => {
                    let _ = writeln!(out, "rz {q} {t}");
                }
                GateOp::Cz(a, b) => {
                    let _ = writeln!(out, "cz {a} {b}");
                }
                GateOp::Cx(a, b) => {
                    let _ = writeln!(out, "cx {a} {b}");
                }
            }
        }
        out
    }

    /// Parse the text form produced by [`Circuit::to_text`]. Blank lines and
    /// `#` comments are allowed. Errors carry the 1-based line number.
    pub fn parse(text: &str) -> Result<Circuit> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty circuit file"))?;
        if header != "tnqk-circuit v1" {
            return Err(Error::parse(line_no, "expected header `tnqk-circuit v1`"));
        }

        let (line_no, decl) = lines
            .next()
            .ok_or_else(|| Error::parse(line_no, "missing `qubits <n>` line"))?;
        let n_qubits = match decl.split_whitespace().collect::<Vec<_>>()[..] {
            ["qubits", n] => n
                .parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("bad qubit count `{n}`")))?,
            _ => return Err(Error::parse(line_no, "expected `qubits <n>`")),
        };
        if n_qubits == 0 {
            return Err(Error::parse(line_no, "qubit count must be positive"));
        }

        let mut circuit = Circuit::new(n_qubits);
        for (line_no, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_q = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(line_no, format!("bad qubit index `{s}`")))
            };
            let parse_angle = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(line_no, format!("bad angle `{s}`")))
            };
            let op = match fields[..] {
                ["h", q] => GateOp::H(parse_q(q)?),
                ["ry", q, t] => GateOp::Ry(parse_q(q)?, parse_angle(t)?),
                ["rz", q, t] => GateOp::Rz(parse_q(q)?, parse_angle(t)?),
                ["cz", a, b] => GateOp::Cz(parse_q(a)?, parse_q(b)?),
                ["cx", a, b] => GateOp::Cx(parse_q(a)?, parse_q(b)?),
                _ => return Err(Error::parse(line_no, format!("unrecognized gate line `{line}`"))),
            };
            circuit
                .push(op)
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
        }
        Ok(circuit)
    }
}

/// Rotation axis for the data-encoding layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationAxis {
    Ry,
    Rz,
}

/// Two-qubit entangler used inside blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entangler {
    Cz,
    Cx,
}

/// Shape of the block-product-state feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapConfig {
    pub n_qubits: usize,
    /// Qubits per block; a trailing block may be smaller.
    pub block_size: usize,
    /// Number of encode+entangle repetitions.
    pub depth: usize,
    /// Rotation angle per unit feature value.
    pub angle_scale: f64,
    pub rotation_axis: RotationAxis,
    pub entangler: Entangler,
}

impl FeatureMapConfig {
    /// Defaults: blocks of 2, depth 1, angle scale π, RY rotations, CZ
    /// entanglers.
    pub fn new(n_qubits: usize) -> Self {
        assert!(n_qubits > 0);
        FeatureMapConfig {
            n_qubits,
            block_size: 2,
            depth: 1,
            angle_scale: std::f64::consts::PI,
            rotation_axis: RotationAxis::Ry,
            entangler: Entangler::Cz,
        }
    }

    pub fn with_block_size(mut self, b: usize) -> Self {
        assert!(b > 0);
        self.block_size = b;
        self
    }

    pub fn with_depth(mut self, d: usize) -> Self {
        assert!(d > 0);
        self.depth = d;
        self
    }

    pub fn with_angle_scale(mut self, s: f64) -> Self {
        self.angle_scale = s;
        self
    }

    pub fn with_rotation_axis(mut self, axis: RotationAxis) -> Self {
        self.rotation_axis = axis;
        self
    }

    pub fn with_entangler(mut self, e: Entangler) -> Self {
        self.entangler = e;
        self
    }

    /// Index of the block containing qubit `q`.
    pub fn block_of(&self, q: usize) -> usize {
        q / self.block_size
    }

    pub fn n_blocks(&self) -> usize {
        self.n_qubits.div_ceil(self.block_size)
    }

    /// Half-open qubit range of block `b`.
    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        let start = b * self.block_size;
        start..((start + self.block_size).min(self.n_qubits))
    }

    /// Compact human-readable description, used as kernel metadata.
    pub fn descriptor(&self) -> String {
        format!(
            "n={},b={},d={},axis={},ent={},scale={}",
            self.n_qubits,
            self.block_size,
            self.depth,
            match self.rotation_axis {
                RotationAxis::Ry => "ry",
                RotationAxis::Rz => "rz",
            },
            match self.entangler {
                Entangler::Cz => "cz",
                Entangler::Cx => "cx",
            },
            self.angle_scale
        )
    }
}

/// Build the feature-map circuit for `x`. One feature per qubit.
pub fn build_feature_map(x: &[f64], cfg: &FeatureMapConfig) -> Result<Circuit> {
    if x.len() != cfg.n_qubits {
        return Err(Error::invalid(format!(
            "feature vector length {} does not match {} qubits",
            x.len(),
            cfg.n_qubits
        )));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite feature value {bad}")));
    }

    let mut c = Circuit::new(cfg.n_qubits);
    for _ in 0..cfg.depth {
        for q in 0..cfg.n_qubits {
            c.push(GateOp::H(q))?;
        }
        for (q, &v) in x.iter().enumerate() {
            let angle = cfg.angle_scale * v;
            let op = match cfg.rotation_axis {
                RotationAxis::Ry => GateOp::Ry(q, angle),
                RotationAxis::Rz => GateOp::Rz(q, angle),
            };
            c.push(op)?;
        }
        for b in 0..cfg.n_blocks() {
            let range = cfg.block_range(b);
            for q in range.start..range.end.saturating_sub(1) {
                let op = match cfg.entangler {
                    Entangler::Cz => GateOp::Cz(q, q + 1),
                    Entangler::Cx => GateOp::Cx(q, q + 1),
                };
                c.push(op)?;
            }
        }
    }
    Ok(c)
}

/// The compute–uncompute composite: the feature map for `x_i` followed by
/// the inverted feature map for `x_j`. Its all-zeros amplitude is the state
/// overlap between the two encodings.
pub fn compose_overlap(x_i: &[f64], x_j: &[f64], cfg: &FeatureMapConfig) -> Result<Circuit> {
    let forward = build_feature_map(x_i, cfg)?;
    let backward = build_feature_map(x_j, cfg)?.adjoint();
    forward.compose(&backward)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_map_zero_angles() {
        let cfg = FeatureMapConfig::new(2);
        let c = build_feature_map(&[0.0, 0.0], &cfg).unwrap();
        assert_eq!(
            c.ops(),
            &[
                GateOp::H(0),
                GateOp::H(1),
                GateOp::Ry(0, 0.0),
                GateOp::Ry(1, 0.0),
                GateOp::Cz(0, 1),
            ]
        );
    }

    #[test]
    fn entanglers_stay_inside_blocks() {
        let cfg = FeatureMapConfig::new(4);
        let c = build_feature_map(&[0.1, 0.2, 0.3, 0.4], &cfg).unwrap();
        let pairs: Vec<(usize, usize)> = c
            .ops()
            .iter()
            .filter(|op| op.is_entangling())
            .map(|op| {
                let (a, b) = op.qubits();
                (a, b.unwrap())
            })
            .collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn trailing_block_gets_no_entangler() {
        let cfg = FeatureMapConfig::new(3).with_depth(2);
        let c = build_feature_map(&[0.5, 0.5, 0.5], &cfg).unwrap();
        // 2 repetitions of (3 H + 3 rotations) plus one CZ per repetition.
        assert_eq!(c.ops().len(), 2 * (3 + 3) + 2);
        for op in c.ops().iter().filter(|op| op.is_entangling()) {
            let (a, b) = op.qubits();
            assert_eq!(cfg.block_of(a), cfg.block_of(b.unwrap()));
        }
    }

    #[test]
    fn adjoint_is_involution() {
        let cfg = FeatureMapConfig::new(5).with_depth(2).with_block_size(3);
        let c = build_feature_map(&[0.1, 0.9, 0.3, 0.7, 0.2], &cfg).unwrap();
        assert_eq!(c.adjoint().adjoint(), c);
    }

    #[test]
    fn adjoint_reverses_and_negates() {
        let mut c = Circuit::new(1);
        c.push(GateOp::H(0)).unwrap();
        c.push(GateOp::Rz(0, 0.5)).unwrap();
        let adj = c.adjoint();
        assert_eq!(adj.ops(), &[GateOp::Rz(0, -0.5), GateOp::H(0)]);
    }

    #[test]
    fn overlap_first_half_is_forward_map() {
        let cfg = FeatureMapConfig::new(4);
        let xi = [0.1, 0.4, 0.8, 0.2];
        let xj = [0.3, 0.3, 0.9, 0.5];
        let forward = build_feature_map(&xi, &cfg).unwrap();
        let w = compose_overlap(&xi, &xj, &cfg).unwrap();
        assert_eq!(w.ops().len(), 2 * forward.ops().len());
        assert_eq!(&w.ops()[..forward.ops().len()], forward.ops());
    }

    #[test]
    fn length_mismatch_is_invalid_input() {
        let cfg = FeatureMapConfig::new(3);
        assert!(matches!(
            build_feature_map(&[0.0, 0.0], &cfg),
            Err(crate::Error::InvalidInput(_))
        ));
    }

    #[test]
    fn scaling_one_feature_touches_one_qubit() {
        let cfg = FeatureMapConfig::new(4).with_depth(2);
        let x1 = [0.2, 0.4, 0.6, 0.8];
        let mut x2 = x1;
        x2[2] = 0.9;
        let c1 = build_feature_map(&x1, &cfg).unwrap();
        let c2 = build_feature_map(&x2, &cfg).unwrap();
        for (a, b) in c1.ops().iter().zip(c2.ops()) {
            if a != b {
                assert_eq!(a.qubits().0, 2);
                assert!(a.angle().is_some());
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let cfg = FeatureMapConfig::new(3)
            .with_entangler(Entangler::Cx)
            .with_rotation_axis(RotationAxis::Rz);
        let c = build_feature_map(&[0.123456789, 0.5, 0.98765], &cfg).unwrap();
        let text = c.to_text();
        let back = Circuit::parse(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn parse_rejects_bad_lines() {
        assert!(Circuit::parse("").is_err());
        assert!(Circuit::parse("tnqk-circuit v1\nqubits 0\n").is_err());
        assert!(Circuit::parse("tnqk-circuit v1\nqubits 2\nh 5\n").is_err());
        assert!(Circuit::parse("tnqk-circuit v1\nqubits 2\ncz 1 1\n").is_err());
        assert!(Circuit::parse("tnqk-circuit v1\nqubits 2\nfoo 0\n").is_err());
        assert!(Circuit::parse("tnqk-circuit v1\nqubits 2\nry 0 nan\n").is_err());
    }
}
