//! Chow-Liu structure learning: pairwise empirical mutual information,
//! a maximum-weight spanning tree over it, add-1 parameters on top, and the
//! spanning-tree exchange pairing.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{learn_parameters, SampleSet};
use crate::info::{mutual_information, PairTable};
use crate::model::{Edge, TreeModel, UndirectedTree};
use crate::scalar::Scalar;
use crate::union_find::UnionFind;

/// Symmetric matrix of nonnegative pairwise weights; the diagonal is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct MIMatrix<T> {
    n: usize,
    weights: Vec<T>,
}

impl<T: Scalar> MIMatrix<T> {
    /// Validating constructor over a row-major `n × n` table.
    pub fn new(n: usize, weights: Vec<T>) -> Result<Self> {
        if n == 0 || weights.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                got: weights.len(),
            });
        }
        for u in 0..n {
            for v in 0..n {
                let w = weights[u * n + v];
                if u != v && (!(w >= T::zero()) || !w.is_finite()) {
                    return Err(Error::NegativeEntry {
                        index: u * n + v,
                        value: w.to_f64_lossy(),
                    });
                }
                if w != weights[v * n + u] {
                    return Err(Error::ShapeMismatch(format!("weights not symmetric at ({u}, {v})")));
                }
            }
        }
        Ok(Self { n, weights })
    }

    pub(crate) fn from_raw(n: usize, weights: Vec<T>) -> Self {
        Self { n, weights }
    }

    /// Builds a matrix from `w(u, v)` evaluated for `u < v`.
    pub fn from_fn(n: usize, mut w: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut weights = vec![T::zero(); n * n];
        for u in 0..n {
            for v in (u + 1)..n {
                let x = w(u, v);
                weights[u * n + v] = x;
                weights[v * n + u] = x;
            }
        }
        Self::new(n, weights)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: usize, v: usize) -> T {
        self.weights[u * self.n + v]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `Σ_{(u,v) ∈ t} w(u, v)`.
    pub fn tree_weight(&self, t: &UndirectedTree) -> T {
        t.weight(|u, v| self.get(u, v))
    }

    /// Largest absolute entry-wise difference to another matrix.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

const CHUNK_ROWS: usize = 1 << 14;

/// Plug-in mutual information of every column pair, from one pass over the
/// rows accumulating all pair count tables.
pub fn mi_matrix<T: Scalar>(s: &SampleSet) -> Result<MIMatrix<T>> {
    if s.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = s.n();
    let k = s.k();
    let kk = k * k;
    let pairs = n * (n - 1) / 2;
    let tally = |rows: &[u8]| {
        let mut counts = vec![0u64; pairs * kk];
        for r in rows.chunks_exact(n) {
            let mut base = 0;
            for i in 0..n {
                let ri = r[i] as usize * k;
                for &rj in &r[i + 1..] {
                    counts[base + ri + rj as usize] += 1;
                    base += kk;
                }
            }
        }
        counts
    };
    let counts = if s.len() <= CHUNK_ROWS {
        tally(s.rows_flat())
    } else {
        s.rows_flat()
            .par_chunks(CHUNK_ROWS * n)
            .map(tally)
            .reduce(
                || vec![0u64; pairs * kk],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    };
    let total = T::from_usize(s.len()).unwrap();
    let mut weights = vec![T::zero(); n * n];
    let mut tables = counts.chunks_exact(kk);
    for u in 0..n {
        for v in (u + 1)..n {
            let c = tables.next().expect("one table per pair");
            let joint = c.iter().map(|&x| T::from_u64(x).unwrap() / total).collect();
            let mi = mutual_information(&PairTable::from_raw(k, joint));
            weights[u * n + v] = mi;
            weights[v * n + u] = mi;
        }
    }
    Ok(MIMatrix::from_raw(n, weights))
}

/// Kruskal's algorithm. Edges are taken in order of weight descending, then
/// smaller endpoint ascending, then larger endpoint ascending, so ties are
/// resolved deterministically.
pub fn max_weight_spanning_tree<T: Scalar>(w: &MIMatrix<T>) -> UndirectedTree {
    let n = w.n();
    let mut candidates: Vec<(T, Edge)> = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            candidates.push((w.get(u, v), (u, v)));
        }
    }
    candidates.sort_by(|(wa, ea), (wb, eb)| {
        wb.partial_cmp(wa).unwrap_or(Ordering::Equal).then(ea.cmp(eb))
    });
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for (_, (u, v)) in candidates {
        if uf.union(u, v) {
            edges.push((u, v));
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    UndirectedTree::new(n, edges).expect("Kruskal on a complete graph spans")
}

pub fn chow_liu_structure(s: &SampleSet) -> Result<UndirectedTree> {
    Ok(max_weight_spanning_tree(&mi_matrix::<f64>(s)?))
}

/// Chow-Liu tree rooted at node 0 with add-1 parameters.
pub fn learn_tree_distribution<T: Scalar>(s: &SampleSet) -> Result<TreeModel<T>> {
    let tree = chow_liu_structure(s)?.rooted_at(0)?;
    learn_parameters(s, &tree)
}

/// Pairs `(e, f)` with `e ∈ t1 \ t2` and `f ∈ t2 \ t1`, each edge used once,
/// such that `t1 ∪ {f} \ {e}` is a spanning tree for every pair.
///
/// Each step takes the smallest remaining `e = (u, v)` of `t1 \ t2'`, picks
/// the first edge `f` on the `t2'` path from `u` to `v` that leaves `u`'s side
/// of `t1 \ {e}`, and continues with `t2' ∪ {e} \ {f}`.
pub fn exchange_pairing(t1: &UndirectedTree, t2: &UndirectedTree) -> Result<Vec<(Edge, Edge)>> {
    if t1.n() != t2.n() {
        return Err(Error::ShapeMismatch(format!(
            "trees on {} and {} nodes",
            t1.n(),
            t2.n()
        )));
    }
    let n = t1.n();
    let mut current = t2.clone();
    let mut pairs = Vec::new();
    for &e in t1.edges() {
        if current.contains(e.0, e.1) {
            continue;
        }
        let (u, v) = e;
        let mut uf = UnionFind::new(n);
        for &(a, b) in t1.edges() {
            if (a, b) != e {
                uf.union(a, b);
            }
        }
        let path = current.path_between(u, v)?;
        let side = uf.find(u);
        let f = path
            .windows(2)
            .find(|w| (uf.find(w[0]) == side) != (uf.find(w[1]) == side))
            .map(|w| if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) })
            .expect("the path joins both sides of the cut");
        pairs.push((e, f));
        current = current.swapped(f, e)?;
    }
    Ok(pairs)
}
