//! End-to-end preprocessing: combinatorial graph, chain, operators and
//! (optionally) the commute-time model, plus the propagation sets each model
//! kind consumes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{build_combinatorial, knn_combine, CombinatorialGraph, FeatureMatrix};
use crate::graph::{self, DegreeVector, DiGraph};
use crate::markov::{
    pagerank_transition, CommuteModel, DiglacianOps, FundamentalMethod, PfprChain, PowerIterationOptions,
};
use crate::model::{directed_walk, gcn_normalize, undirected_walk, ModelKind, PropagationSet};
use crate::sparse::CsrMatrix;

/// Damping used by the teleporting variants.
pub const PAGERANK_ALPHA: f64 = 0.85;

/// How the irreducible chain is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Similarity-sorting graph merged into `A`, plus self-loops.
    #[default]
    Fpr,
    /// Exact kNN graph merged into `A`, plus self-loops, then a teleporting
    /// walk on top.
    Knn,
    /// Teleporting walk on `A + I`; features unused.
    NoFeat,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fpr => "fpr",
            Self::Knn => "knn",
            Self::NoFeat => "no-feat",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Fpr, Self::Knn, Self::NoFeat]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreprocessConfig {
    pub k: usize,
    pub seed: u64,
    pub variant: Variant,
    #[serde(skip)]
    pub power: PowerIterationOptions,
    /// Sparsification ratio; `None` skips the commute-time model.
    pub commute_mu: Option<f64>,
    pub fundamental: FundamentalMethod,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            k: 2,
            seed: 0,
            variant: Variant::Fpr,
            power: PowerIterationOptions::default(),
            commute_mu: None,
            fundamental: FundamentalMethod::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub variant: Variant,
    /// The merged graph (absent for the featureless variant).
    pub combinatorial: Option<CombinatorialGraph>,
    /// Adjacency the undirected walk `P_u` is built from.
    pub structure: CsrMatrix,
    pub chain: PfprChain,
    pub ops: DiglacianOps,
    pub commute: Option<CommuteModel>,
}

fn teleporting_chain(a: &CsrMatrix, power: PowerIterationOptions) -> Result<PfprChain> {
    let looped = graph::add_self_loops(a)?;
    let p = graph::row_normalize(&looped)?;
    let dense = pagerank_transition(&p, PAGERANK_ALPHA)?;
    PfprChain::new(CsrMatrix::from_dense(&dense), graph::out_degrees(&looped), power)
}

pub fn preprocess(g: &DiGraph, x: &FeatureMatrix, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    if x.n() != g.n() {
        return Err(Error::ShapeMismatch(format!("{} feature rows for {} nodes", x.n(), g.n())));
    }
    let (combinatorial, structure, chain) = match cfg.variant {
        Variant::Fpr => {
            let c = build_combinatorial(g, x, cfg.k, cfg.seed)?;
            let chain = PfprChain::from_combinatorial(&c, cfg.power)?;
            let s = c.merged.clone();
            (Some(c), s, chain)
        }
        Variant::Knn => {
            if cfg.k == 0 {
                return Err(Error::InvalidK(cfg.k));
            }
            let c = knn_combine(g, x, cfg.k)?;
            let chain = teleporting_chain(&c.merged, cfg.power)?;
            let s = c.merged.clone();
            (Some(c), s, chain)
        }
        Variant::NoFeat => {
            let chain = teleporting_chain(g.adjacency(), cfg.power)?;
            (None, g.adjacency().clone(), chain)
        }
    };
    let ops = DiglacianOps::new(&chain)?;
    let commute = match cfg.commute_mu {
        Some(mu) => Some(CommuteModel::compute(&chain, mu, cfg.fundamental)?),
        None => None,
    };
    Ok(Preprocessed { variant: cfg.variant, combinatorial, structure, chain, ops, commute })
}

impl Preprocessed {
    pub fn degrees(&self) -> &DegreeVector {
        &self.chain.degrees
    }

    /// Propagation matrices for `kind`. AdaGraphSAGE and GCN use the raw
    /// graph `raw`; the two Diglacian models use the preprocessed structure.
    pub fn propagation(&self, kind: ModelKind, raw: &DiGraph) -> Result<PropagationSet> {
        match kind {
            ModelKind::Diglacian => {
                PropagationSet::mixed(undirected_walk(&self.structure)?, self.ops.propagation.clone())
            }
            ModelKind::DiglacianCt => {
                let c = self.commute.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("commute-time model was not computed (set a sparsification ratio)".into())
                })?;
                PropagationSet::mixed(undirected_walk(&self.structure)?, c.propagation.clone())
            }
            ModelKind::AdaSage => {
                PropagationSet::mixed(undirected_walk(raw.adjacency())?, directed_walk(raw.adjacency()))
            }
            ModelKind::Gcn => PropagationSet::gcn(gcn_normalize(raw.adjacency())?),
            ModelKind::Mlp => Ok(PropagationSet::none()),
        }
    }
}
