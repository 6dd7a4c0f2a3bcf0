//! Three-bit hard instances for structure learning and exact checks of their
//! numeric properties.
//!
//! Non-realizable `R_i`: a hidden fair bit `B`; each of `X, Y, Z`
//! independently copies `B` with its own probability and is otherwise a fresh
//! fair bit. Realizable `R_i`: two of the bits are an equal fair bit and the
//! third copies them with probability `1 − ε`, otherwise a fresh fair bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::mutual_information;
use crate::model::dense::table_len;
use crate::model::{
    kl_divergence, kl_to_tree_projection, statistical_distances, Alphabet, DenseJoint, UndirectedTree,
    DEFAULT_DENSE_CAP,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    NonRealizable,
    Realizable,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "nonrealizable" => Ok(Self::NonRealizable),
            "realizable" => Ok(Self::Realizable),
            _ => Err(Error::Config(format!("unknown regime {s:?}"))),
        }
    }
}

/// One of the three distributions of a regime at a given `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleFamily {
    pub regime: Regime,
    pub index: u8,
    pub epsilon: f64,
}

impl TripleFamily {
    pub fn new(regime: Regime, index: u8, epsilon: f64) -> Result<Self> {
        check_epsilon(regime, epsilon)?;
        if !(1..=3).contains(&index) {
            return Err(Error::Config(format!("instance index must be 1, 2 or 3, got {index}")));
        }
        Ok(Self { regime, index, epsilon })
    }

    pub fn joint(&self) -> Result<DenseJoint<f64>> {
        match self.regime {
            Regime::NonRealizable => nonrealizable_triple(self.index, self.epsilon),
            Regime::Realizable => realizable_triple(self.index, self.epsilon),
        }
    }
}

/// Largest allowed `ε` (exclusive) for each regime.
pub fn epsilon_limit(regime: Regime) -> f64 {
    match regime {
        Regime::NonRealizable => 0.25,
        Regime::Realizable => 1.0,
    }
}

fn check_epsilon(regime: Regime, epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < epsilon_limit(regime) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "ε = {epsilon} outside (0, {}) for this regime",
            epsilon_limit(regime)
        )))
    }
}

/// Joint of bits that each copy a hidden fair bit with probability
/// `copy[j]` and are otherwise fresh fair bits. Enumerates the hidden bit
/// and every copy/fresh outcome.
fn latent_copies(copy: [f64; 3]) -> DenseJoint<f64> {
    let mut probs = vec![0.0; 8];
    for b in 0..2usize {
        // outcome mask bit j set: bit j copied B
        for mask in 0..8usize {
            let mut weight = 0.5;
            for (j, &c) in copy.iter().enumerate() {
                weight *= if mask >> j & 1 == 1 { c } else { 1.0 - c };
            }
            let fresh = (0..3).filter(|j| mask >> j & 1 == 0).count();
            let share = weight / f64::from(1u32 << fresh);
            for x in 0..8usize {
                let bits = [x >> 2 & 1, x >> 1 & 1, x & 1];
                if (0..3).all(|j| mask >> j & 1 == 0 || bits[j] == b) {
                    probs[x] += share;
                }
            }
        }
    }
    DenseJoint::new(3, Alphabet::binary(), probs).expect("mixture is a distribution")
}

/// Non-realizable `R_i` over `(X, Y, Z)`. Copy probabilities are
/// `(3/4+ε, 3/4+ε, 3/4−ε)` for `i = 1`, `(+, −, +)` for `i = 2` and
/// `(−, +, +)` for `i = 3`.
pub fn nonrealizable_triple(i: u8, epsilon: f64) -> Result<DenseJoint<f64>> {
    if epsilon != 0.0 {
        check_epsilon(Regime::NonRealizable, epsilon)?;
    }
    let (hi, lo) = (0.75 + epsilon, 0.75 - epsilon);
    let copy = match i {
        1 => [hi, hi, lo],
        2 => [hi, lo, hi],
        3 => [lo, hi, hi],
        _ => return Err(Error::Config(format!("instance index must be 1, 2 or 3, got {i}"))),
    };
    Ok(latent_copies(copy))
}

/// Realizable `R_i` over `(X, Y, Z)`: `Y = Z` for `i = 1`, `X = Z` for
/// `i = 2`, `X = Y` for `i = 3`; the remaining bit copies the pair with
/// probability `1 − ε`.
pub fn realizable_triple(i: u8, epsilon: f64) -> Result<DenseJoint<f64>> {
    check_epsilon(Regime::Realizable, epsilon)?;
    let noisy = match i {
        1 => 0,
        2 => 1,
        3 => 2,
        _ => return Err(Error::Config(format!("instance index must be 1, 2 or 3, got {i}"))),
    };
    DenseJoint::from_fn(3, Alphabet::binary(), |x| {
        let pair: Vec<usize> = (0..3).filter(|&j| j != noisy).map(|j| x[j]).collect();
        if pair[0] != pair[1] {
            return 0.0;
        }
        let agree = if x[noisy] == pair[0] { 1.0 - epsilon / 2.0 } else { epsilon / 2.0 };
        0.5 * agree
    })
}

/// Product of independent blocks over a common alphabet; the first block
/// holds the most significant variables.
pub fn block_product<T: Scalar>(blocks: &[DenseJoint<T>]) -> Result<DenseJoint<T>> {
    block_product_with_cap(blocks, DEFAULT_DENSE_CAP)
}

pub fn block_product_with_cap<T: Scalar>(blocks: &[DenseJoint<T>], cap: usize) -> Result<DenseJoint<T>> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::ShapeMismatch("block product of no blocks".into()))?;
    let alphabet = first.alphabet();
    if blocks.iter().any(|b| b.alphabet() != alphabet) {
        return Err(Error::ShapeMismatch("blocks over different alphabets".into()));
    }
    let n: usize = blocks.iter().map(|b| b.n()).sum();
    table_len(n, alphabet.size(), cap)?;
    let mut probs = vec![T::one()];
    for b in blocks {
        let mut next = Vec::with_capacity(probs.len() * b.probs().len());
        for &p in &probs {
            next.extend(b.probs().iter().map(|&q| p * q));
        }
        probs = next;
    }
    DenseJoint::with_cap(n, alphabet, probs, cap)
}

/// The three trees on `(X, Y, Z) = (0, 1, 2)`, named by their middle node.
pub fn three_node_trees() -> [UndirectedTree; 3] {
    [0, 1, 2].map(|c| UndirectedTree::star(3, c).expect("valid center"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonRealizableFacts {
    pub epsilon: f64,
    pub kl_r1_r2: f64,
    pub kl_over_epsilon_sq: f64,
    /// `I(X;Y) − I(X;Z)` under `R_1`.
    pub mi_gap: f64,
    pub mi_gap_threshold: f64,
    /// `excess[i][c]`: how far the tree centered at node `c` is from the best
    /// tree for `R_{i+1}`, in KL.
    pub excess: [[f64; 3]; 3],
    /// For every tree, the largest excess over the three instances.
    pub worst_excess_per_tree: [f64; 3],
    pub passed: bool,
    pub failures: Vec<String>,
}

pub fn verify_nonrealizable_facts(epsilon: f64) -> Result<NonRealizableFacts> {
    check_epsilon(Regime::NonRealizable, epsilon)?;
    let r: Vec<DenseJoint<f64>> = (1..=3).map(|i| nonrealizable_triple(i, epsilon)).collect::<Result<_>>()?;
    let kl_r1_r2 = kl_divergence(&r[0], &r[1])?;
    let mi_gap = mutual_information(&r[0].pair_table(0, 1)?) - mutual_information(&r[0].pair_table(0, 2)?);
    let threshold = 0.4 * epsilon;
    let trees = three_node_trees();
    let mut excess = [[0.0; 3]; 3];
    for (i, p) in r.iter().enumerate() {
        let d: Vec<f64> = trees
            .iter()
            .map(|t| kl_to_tree_projection(p, t).map(|f| f.divergence))
            .collect::<Result<_>>()?;
        let best = d.iter().copied().fold(f64::INFINITY, f64::min);
        for c in 0..3 {
            excess[i][c] = d[c] - best;
        }
    }
    let worst_excess_per_tree = [0, 1, 2].map(|c| (0..3).map(|i| excess[i][c]).fold(0.0, f64::max));
    let mut failures = Vec::new();
    if mi_gap < threshold {
        failures.push(format!("mi_gap {mi_gap} < {threshold}"));
    }
    for (c, &w) in worst_excess_per_tree.iter().enumerate() {
        if w < threshold {
            failures.push(format!("tree centered at {c} is within {w} < {threshold} of optimal for every instance"));
        }
    }
    Ok(NonRealizableFacts {
        epsilon,
        kl_r1_r2,
        kl_over_epsilon_sq: kl_r1_r2 / (epsilon * epsilon),
        mi_gap,
        mi_gap_threshold: threshold,
        excess,
        worst_excess_per_tree,
        passed: failures.is_empty(),
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizableFacts {
    pub epsilon: f64,
    pub hellinger_sq: f64,
    pub hellinger_sq_expected: f64,
    pub tv: f64,
    /// `I(Y;Z) − I(X;Z)` under `R_1`.
    pub mi_gap: f64,
    /// `(ε/2) ln(2/ε)`.
    pub leading_term: f64,
    /// `D(R_1 ‖ R_1 projected onto Y-X-Z) − D(R_1 ‖ R_1 projected onto X-Y-Z)`.
    pub tree_gap: f64,
    /// `D(R_1 ‖ R_1 projected onto X-Y-Z)`.
    pub true_tree_kl: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

pub fn verify_realizable_facts(epsilon: f64) -> Result<RealizableFacts> {
    check_epsilon(Regime::Realizable, epsilon)?;
    let r1 = realizable_triple(1, epsilon)?;
    let r2 = realizable_triple(2, epsilon)?;
    let dist = statistical_distances(&r1, &r2)?;
    let expected = epsilon / 2.0;
    let mi_gap = mutual_information(&r1.pair_table(1, 2)?) - mutual_information(&r1.pair_table(0, 2)?);
    let leading_term = epsilon / 2.0 * (2.0 / epsilon).ln();
    let trees = three_node_trees();
    let fit_g = kl_to_tree_projection(&r1, &trees[1])?;
    let fit_h = kl_to_tree_projection(&r1, &trees[0])?;
    let tree_gap = fit_h.divergence - fit_g.divergence;
    let mut failures = Vec::new();
    if (dist.hellinger_sq - expected).abs() > 1e-12 {
        failures.push(format!("hellinger_sq {} differs from ε/2 = {expected}", dist.hellinger_sq));
    }
    let excess = mi_gap - leading_term;
    if !(0.0..=epsilon).contains(&excess) {
        failures.push(format!("mi_gap {mi_gap} not within [0, ε] above (ε/2)·ln(2/ε) = {leading_term}"));
    }
    if (tree_gap - mi_gap).abs() > 1e-12 {
        failures.push(format!("tree weight gap {tree_gap} differs from mi_gap {mi_gap}"));
    }
    if fit_g.divergence > 1e-10 {
        failures.push(format!("R1 is {} away from its own tree", fit_g.divergence));
    }
    Ok(RealizableFacts {
        epsilon,
        hellinger_sq: dist.hellinger_sq,
        hellinger_sq_expected: expected,
        tv: dist.tv,
        mi_gap,
        leading_term,
        tree_gap,
        true_tree_kl: fit_g.divergence,
        passed: failures.is_empty(),
        failures,
    })
}
