//! Exact representations of discrete joint distributions: dense tables over
//! `Σ^n`, tree-factored models, projections onto trees and divergences.

pub(crate) mod dense;
mod divergence;
mod projection;
mod tree;
mod tree_model;

pub use dense::{DenseJoint, DEFAULT_DENSE_CAP};
pub use divergence::{kl_divergence, statistical_distances, Distances};
pub use projection::{
    kl_decomposition, kl_to_tree_projection, project_onto_tree, total_correlation,
    KlDecomposition, Projection, TreeFit,
};
pub use tree::{Edge, RootedTree, UndirectedTree};
pub use tree_model::{validate_tree_model, TreeModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite alphabet `{0, …, k−1}` with `2 ≤ k ≤ 256` (symbols fit in a byte).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(usize);

impl Alphabet {
    pub const MAX: usize = 256;

    pub fn new(k: usize) -> Result<Self> {
        if (2..=Self::MAX).contains(&k) {
            Ok(Self(k))
        } else {
            Err(Error::InvalidAlphabet(k))
        }
    }

    pub fn binary() -> Self {
        Self(2)
    }

    pub fn size(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = Error;

    fn try_from(k: usize) -> Result<Self> {
        Self::new(k)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.0
    }
}
