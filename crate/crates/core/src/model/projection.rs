use crate::error::{Error, Result};
use crate::info::{entropy, mutual_information};
use crate::scalar::Scalar;

use super::divergence::kl_slices;
use super::{DenseJoint, TreeModel, UndirectedTree};

/// Closest `t`-structured model to a dense joint, together with the
/// `(node, parent symbol)` rows that were set to uniform because the parent
/// symbol has zero probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub model: TreeModel<T>,
    pub degenerate_rows: Vec<(usize, usize)>,
}

/// Projects `p` onto tree `t` rooted at `root`: the root keeps `p`'s
/// marginal and every node gets `p`'s conditional given its parent.
pub fn project_onto_tree<T: Scalar>(p: &DenseJoint<T>, t: &UndirectedTree, root: usize) -> Result<Projection<T>> {
    if t.n() != p.n() {
        return Err(Error::ShapeMismatch(format!(
            "tree on {} nodes for a joint over {} variables",
            t.n(),
            p.n()
        )));
    }
    let k = p.k();
    let rooted = t.rooted_at(root)?;
    let uniform = T::one() / T::from_usize(k).unwrap();
    let mut degenerate_rows = Vec::new();
    let mut cpt = vec![Vec::new(); p.n()];
    for v in 0..p.n() {
        let Some(pa) = rooted.parent(v) else { continue };
        let pair = p.marginal(&[pa, v])?;
        let mut table = Vec::with_capacity(k * k);
        for (x, row) in pair.chunks(k).enumerate() {
            let mass: T = row.iter().copied().sum();
            if mass > T::zero() {
                table.extend(row.iter().map(|&c| c / mass));
            } else {
                degenerate_rows.push((v, x));
                table.extend(std::iter::repeat_n(uniform, k));
            }
        }
        cpt[v] = table;
    }
    let model = TreeModel::new(rooted, p.alphabet(), p.node_marginal(root)?, cpt)?;
    Ok(Projection { model, degenerate_rows })
}

/// `J_P = Σ_v H(P_v) − H(P)`.
pub fn total_correlation<T: Scalar>(p: &DenseJoint<T>) -> Result<T> {
    let mut sum = T::zero();
    for v in 0..p.n() {
        sum = sum + entropy(&p.node_marginal(v)?);
    }
    Ok((sum - p.entropy()).max(T::zero()))
}

/// Terms of `D(P ‖ P_T) = J_P − wt_P(T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeFit<T> {
    pub j_p: T,
    pub weight: T,
    pub divergence: T,
}

pub fn kl_to_tree_projection<T: Scalar>(p: &DenseJoint<T>, t: &UndirectedTree) -> Result<TreeFit<T>> {
    if t.n() != p.n() {
        return Err(Error::ShapeMismatch("tree and joint sizes differ".into()));
    }
    let j_p = total_correlation(p)?;
    let mut weight = T::zero();
    for &(u, v) in t.edges() {
        weight = weight + mutual_information(&p.pair_table(u, v)?);
    }
    Ok(TreeFit {
        j_p,
        weight,
        divergence: (j_p - weight).max(T::zero()),
    })
}

/// `D(P ‖ Q)` for a tree model `Q`, split as
/// `base_term − weight_term + conditional_term` where `base_term = J_P`,
/// `weight_term` sums `I(X_v; X_pa(v))` under `P` over the edges of `Q`, and
/// `conditional_term` sums `P(pa = x) · D(P(X_v | x) ‖ Q(X_v | x))` (the root
/// contributes `D(P_root ‖ Q_root)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDecomposition<T> {
    pub base_term: T,
    pub weight_term: T,
    pub conditional_term: T,
    pub total: T,
}

pub fn kl_decomposition<T: Scalar>(p: &DenseJoint<T>, m: &TreeModel<T>) -> Result<KlDecomposition<T>> {
    if m.n() != p.n() || m.alphabet() != p.alphabet() {
        return Err(Error::ShapeMismatch("model and joint shapes differ".into()));
    }
    let k = p.k();
    let base_term = total_correlation(p)?;
    let root = m.root();
    let mut weight_term = T::zero();
    let mut conditional_term = kl_slices(&p.node_marginal(root)?, m.root_marginal());
    for v in 0..p.n() {
        let Some(pa) = m.tree().parent(v) else { continue };
        let pair = p.pair_table(pa, v)?;
        weight_term = weight_term + mutual_information(&pair);
        for (x, row) in pair.joint().chunks(k).enumerate() {
            let mass: T = row.iter().copied().sum();
            if mass <= T::zero() {
                continue;
            }
            let cond: Vec<T> = row.iter().map(|&c| c / mass).collect();
            conditional_term = conditional_term + mass * kl_slices(&cond, m.cpt_row(v, x));
        }
    }
    let total = if conditional_term.is_infinite() {
        T::infinity()
    } else {
        (base_term - weight_term + conditional_term).max(T::zero())
    };
    Ok(KlDecomposition {
        base_term,
        weight_term,
        conditional_term,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{kl_divergence, Alphabet};
    use std::f64::consts::LN_2;

    fn copies3() -> DenseJoint<f64> {
        DenseJoint::from_fn(3, Alphabet::binary(), |x| {
            if x[0] == x[1] && x[1] == x[2] {
                0.5
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn even_parity() -> DenseJoint<f64> {
        DenseJoint::from_fn(3, Alphabet::binary(), |x| {
            if (x[0] + x[1] + x[2]) % 2 == 0 {
                0.25
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn tree_fit_examples() {
        let product = DenseJoint::<f64>::uniform(3, Alphabet::binary()).unwrap();
        let path = UndirectedTree::path(3).unwrap();
        let fit = kl_to_tree_projection(&product, &path).unwrap();
        assert!(fit.j_p.abs() < 1e-15 && fit.weight.abs() < 1e-15 && fit.divergence.abs() < 1e-15);

        let fit = kl_to_tree_projection(&copies3(), &path).unwrap();
        assert!((fit.j_p - 2.0 * LN_2).abs() < 1e-12);
        assert!((fit.weight - 2.0 * LN_2).abs() < 1e-12);
        assert!(fit.divergence.abs() < 1e-12);

        let parity = even_parity();
        for t in [path.clone(), UndirectedTree::star(3, 1).unwrap()] {
            let fit = kl_to_tree_projection(&parity, &t).unwrap();
            assert!(fit.weight.abs() < 1e-12);
            assert!((fit.divergence - LN_2).abs() < 1e-12);
            let proj = project_onto_tree(&parity, &t, 0).unwrap().model.to_dense().unwrap();
            assert!((kl_divergence(&parity, &proj).unwrap() - LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_flags_zero_mass_parent_symbols() {
        let p = DenseJoint::<f64>::point_mass(2, Alphabet::binary(), &[0, 1]).unwrap();
        let t = UndirectedTree::path(2).unwrap();
        let proj = project_onto_tree(&p, &t, 0).unwrap();
        assert_eq!(proj.degenerate_rows, vec![(1, 1)]);
        assert_eq!(proj.model.cpt_row(1, 1), &[0.5, 0.5]);
        assert_eq!(proj.model.cpt_row(1, 0), &[0.0, 1.0]);
        let back = proj.model.to_dense().unwrap();
        assert_eq!(kl_divergence(&p, &back).unwrap(), 0.0);
    }

    #[test]
    fn product_projection_is_product_of_marginals() {
        let a = Alphabet::binary();
        let p = DenseJoint::<f64>::from_fn(3, a, |x| {
            let m = [0.3, 0.6, 0.8];
            (0..3).map(|i| if x[i] == 1 { m[i] } else { 1.0 - m[i] }).product()
        })
        .unwrap();
        let t = UndirectedTree::star(3, 2).unwrap();
        let q = project_onto_tree(&p, &t, 2).unwrap().model.to_dense().unwrap();
        for (a, b) in p.probs().iter().zip(q.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn decomposition_of_projection_has_no_conditional_term() {
        let p = even_parity();
        let t = UndirectedTree::path(3).unwrap();
        let m = project_onto_tree(&p, &t, 1).unwrap().model;
        let d = kl_decomposition(&p, &m).unwrap();
        assert!(d.conditional_term.abs() < 1e-12);
        assert!((d.total - LN_2).abs() < 1e-12);

        let own = m.to_dense().unwrap();
        let d = kl_decomposition(&own, &m).unwrap();
        assert!(d.total.abs() < 1e-12);
    }

    #[test]
    fn decomposition_reports_infinite_divergence() {
        let a = Alphabet::binary();
        let p = DenseJoint::<f64>::uniform(2, a).unwrap();
        let m = TreeModel::from_parents(0, vec![None, Some(0)], a, vec![1.0, 0.0], vec![vec![], vec![0.5; 4]])
            .unwrap();
        let d = kl_decomposition(&p, &m).unwrap();
        assert!(d.total.is_infinite() && d.conditional_term.is_infinite());
    }
}
