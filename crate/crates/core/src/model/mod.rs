//! Node classifiers with manual reverse-mode differentiation.
//!
//! Every layer of the mixed models computes
//! `H' = σ(H W₀ + (α P_u + β M) H W₁)` where `P_u` is an undirected random
//! walk and `M` a directed propagation matrix; `α` and `β` are trainable and
//! shared by all layers. The GCN baseline computes `H' = σ(Â H W)` and the
//! MLP `H' = σ(H W)`. The last layer ends in a row softmax.

mod network;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph;
use crate::sparse::{CsrMatrix, DenseMatrix};

pub use network::{backward, forward, loss, Cache, Gradients, LayerParams, Params};
pub use train::{accuracy, evaluate, predict, train, Adam, EpochRecord, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Mixed layer with `M = 𝒯̂`.
    Diglacian,
    /// Mixed layer with `M = 𝔠̃`.
    DiglacianCt,
    /// Mixed layer on the raw graph with `M = D⁻¹A`.
    #[serde(rename = "adasage")]
    AdaSage,
    Gcn,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [Self::Diglacian, Self::DiglacianCt, Self::AdaSage, Self::Gcn, Self::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Diglacian => "diglacian",
            Self::DiglacianCt => "diglacian-ct",
            Self::AdaSage => "adasage",
            Self::Gcn => "gcn",
            Self::Mlp => "mlp",
        }
    }

    /// Whether the layer has the `W₁` branch and the `α`, `β` scalars.
    pub fn is_mixed(self) -> bool {
        matches!(self, Self::Diglacian | Self::DiglacianCt | Self::AdaSage)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model kind {s:?}")))
    }
}

/// A sparse operator stored together with its transpose for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub matrix: CsrMatrix,
    pub transpose: CsrMatrix,
}

impl Operator {
    pub fn new(matrix: CsrMatrix) -> Self {
        let transpose = matrix.transpose();
        Self { matrix, transpose }
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }
}

/// Propagation matrices consumed by the layers.
///
/// Mixed models use both; GCN uses `undirected` only (holding `Â`); MLP
/// uses neither.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropagationSet {
    pub undirected: Option<Operator>,
    pub directed: Option<Operator>,
}

impl PropagationSet {
    pub fn mixed(undirected: CsrMatrix, directed: CsrMatrix) -> Result<Self> {
        if undirected.shape() != directed.shape() || !undirected.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "propagation matrices {:?} and {:?}",
                undirected.shape(),
                directed.shape()
            )));
        }
        Ok(Self { undirected: Some(Operator::new(undirected)), directed: Some(Operator::new(directed)) })
    }

    pub fn gcn(normalized: CsrMatrix) -> Result<Self> {
        if !normalized.is_square() {
            return Err(Error::ShapeMismatch("GCN propagation must be square".into()));
        }
        Ok(Self { undirected: Some(Operator::new(normalized)), directed: None })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub(crate) fn check(&self, kind: ModelKind, n: usize) -> Result<()> {
        let ok = |o: &Option<Operator>| o.as_ref().is_some_and(|op| op.n() == n);
        let valid = match kind {
            ModelKind::Mlp => true,
            ModelKind::Gcn => ok(&self.undirected),
            _ => ok(&self.undirected) && ok(&self.directed),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("propagation set does not fit a {kind} model on {n} nodes")))
        }
    }

    /// Reorders nodes: row and column `i` of the result is `perm[i]` of the input.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let p = |o: &Option<Operator>| o.as_ref().map(|op| Operator::new(permute_csr(&op.matrix, perm)));
        Self { undirected: p(&self.undirected), directed: p(&self.directed) }
    }
}

fn permute_csr(m: &CsrMatrix, perm: &[usize]) -> CsrMatrix {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let t: Vec<_> = m.triplets().map(|(r, c, v)| (inv[r], inv[c], v)).collect();
    CsrMatrix::from_triplets(m.n_rows(), m.n_cols(), &t, crate::sparse::Duplicates::Sum)
        .expect("permutation preserves shape")
}

/// `D̃_u⁻¹ Ã_u` with `Ã_u = (A + Aᵀ)/2 + I`.
pub fn undirected_walk(a: &CsrMatrix) -> Result<CsrMatrix> {
    let sym = graph::symmetrize(&without_diagonal(a))?;
    graph::row_normalize(&graph::add_self_loops(&sym)?)
}

/// `D⁻¹A`; rows without out-edges stay zero.
pub fn directed_walk(a: &CsrMatrix) -> CsrMatrix {
    graph::row_normalize_lenient(&without_diagonal(a))
}

/// `D̃^{-½} Ã D̃^{-½}` with `Ã = max(A, Aᵀ) + I`.
pub fn gcn_normalize(a: &CsrMatrix) -> Result<CsrMatrix> {
    let a = without_diagonal(a);
    let sym = graph::add_self_loops(&a.elementwise_max(&a.transpose())?)?;
    let inv_sqrt: Vec<f64> = sym.row_sums().iter().map(|d| 1.0 / d.sqrt()).collect();
    Ok(sym.scale(&inv_sqrt, &inv_sqrt))
}

fn without_diagonal(a: &CsrMatrix) -> CsrMatrix {
    let t: Vec<_> = a.triplets().filter(|&(r, c, _)| r != c).collect();
    CsrMatrix::from_triplets(a.n_rows(), a.n_cols(), &t, crate::sparse::Duplicates::Sum)
        .expect("subset of a valid matrix")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub layers: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 64,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            dropout: 0.5,
            patience: 500,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.layers == 0 || self.hidden == 0 {
            return bad("layers and hidden width must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        Ok(())
    }
}

/// Row-wise softmax.
pub fn softmax_rows(z: &DenseMatrix) -> DenseMatrix {
    let mut out = z.clone();
    for mut row in out.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Duplicates;

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("gat".parse::<ModelKind>().is_err());
    }

    #[test]
    fn gcn_normalization_is_symmetric() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 2, 1.0)], Duplicates::Sum).unwrap();
        let n = gcn_normalize(&a).unwrap();
        assert!(n.symmetry_residual() < 1e-12);
        assert!((n.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn undirected_walk_is_stochastic() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 2, 1.0)], Duplicates::Sum).unwrap();
        let p = undirected_walk(&a).unwrap();
        for s in p.row_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
        let m = directed_walk(&a);
        assert_eq!(m.row_sums(), vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = DenseMatrix::from_row_slice(2, 3, &[1000.0, 0.0, -5.0, 1.0, 2.0, 3.0]);
        let s = softmax_rows(&z);
        for r in 0..2 {
            assert!((s.row(r).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn defaults_match_search_space_midpoints() {
        let c = TrainConfig::default();
        assert_eq!((c.learning_rate, c.hidden, c.dropout, c.layers, c.patience), (0.01, 64, 0.5, 2, 500));
        assert!(c.validate().is_ok());
    }
}
