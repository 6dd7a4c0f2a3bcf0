use rand::Rng;

use crate::chowliu::MIMatrix;
use crate::error::{Error, Result};
use crate::estimation::SampleSet;
use crate::info::{mutual_information, PairTable};
use crate::scalar::Scalar;
use crate::seed;

use super::dense::{increment, table_len};
use super::{Alphabet, DenseJoint, RootedTree, UndirectedTree, DEFAULT_DENSE_CAP};

/// Tree-factored distribution: root marginal times one `k × k` row-stochastic
/// table per non-root node, rows indexed by the parent's symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel<T> {
    tree: RootedTree,
    alphabet: Alphabet,
    root_marginal: Vec<T>,
    /// `cpt[v][parent_symbol * k + symbol]`; empty for the root.
    cpt: Vec<Vec<T>>,
}

impl<T: Scalar> TreeModel<T> {
    /// Assembles and validates a model. `cpt[root]` must be empty.
    pub fn new(
        tree: RootedTree,
        alphabet: Alphabet,
        root_marginal: Vec<T>,
        cpt: Vec<Vec<T>>,
    ) -> Result<Self> {
        let m = Self {
            tree,
            alphabet,
            root_marginal,
            cpt,
        };
        validate_tree_model(&m)?;
        Ok(m)
    }

    /// Same as [`TreeModel::new`] from a raw parent map.
    pub fn from_parents(
        root: usize,
        parents: Vec<Option<usize>>,
        alphabet: Alphabet,
        root_marginal: Vec<T>,
        cpt: Vec<Vec<T>>,
    ) -> Result<Self> {
        Self::new(RootedTree::new(root, parents)?, alphabet, root_marginal, cpt)
    }

    /// Random model on a uniformly random labeled tree rooted at 0. Each
    /// distribution is a symmetric Dirichlet(1) draw mixed with the uniform
    /// so that every entry is at least `floor`.
    pub fn random<R: Rng + ?Sized>(n: usize, alphabet: Alphabet, floor: f64, rng: &mut R) -> Result<Self> {
        let k = alphabet.size();
        if !(0.0..=1.0 / k as f64).contains(&floor) {
            return Err(Error::Config(format!("floor {floor} must lie in [0, 1/{k}]")));
        }
        let tree = UndirectedTree::random(n, rng)?.rooted_at(0)?;
        let row = |rng: &mut R| -> Vec<T> {
            seed::floored_dirichlet(k, floor, rng).into_iter().map(T::lit).collect()
        };
        let root_marginal = row(rng);
        let mut cpt = vec![Vec::new(); n];
        for v in tree.topological_order().iter().skip(1) {
            cpt[*v] = (0..k).flat_map(|_| row(rng)).collect();
        }
        Self::new(tree, alphabet, root_marginal, cpt)
    }

    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    pub fn n(&self) -> usize {
        self.tree.n()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn k(&self) -> usize {
        self.alphabet.size()
    }

    pub fn root(&self) -> usize {
        self.tree.root()
    }

    pub fn root_marginal(&self) -> &[T] {
        &self.root_marginal
    }

    /// Full `k × k` table of node `v` (empty for the root).
    pub fn cpt(&self, v: usize) -> &[T] {
        &self.cpt[v]
    }

    /// `P(X_v = · | X_pa(v) = parent_symbol)`.
    pub fn cpt_row(&self, v: usize, parent_symbol: usize) -> &[T] {
        let k = self.k();
        &self.cpt[v][parent_symbol * k..(parent_symbol + 1) * k]
    }

    pub fn skeleton(&self) -> UndirectedTree {
        self.tree.skeleton()
    }

    pub fn to_dense(&self) -> Result<DenseJoint<T>> {
        self.to_dense_with_cap(DEFAULT_DENSE_CAP)
    }

    /// Evaluates the factorization on every assignment of `Σ^n`.
    pub fn to_dense_with_cap(&self, cap: usize) -> Result<DenseJoint<T>> {
        let n = self.n();
        let k = self.k();
        let len = table_len(n, k, cap)?;
        let root = self.root();
        let mut probs = Vec::with_capacity(len);
        let mut x = vec![0usize; n];
        for _ in 0..len {
            let mut p = self.root_marginal[x[root]];
            for v in 0..n {
                if let Some(pa) = self.tree.parent(v) {
                    p = p * self.cpt[v][x[pa] * k + x[v]];
                }
            }
            probs.push(p);
            increment(&mut x, k);
        }
        DenseJoint::with_cap(n, self.alphabet, probs, cap)
    }

    /// Single-node marginals, propagated from the root.
    pub fn node_marginals(&self) -> Vec<Vec<T>> {
        let k = self.k();
        let mut out = vec![Vec::new(); self.n()];
        for &v in self.tree.topological_order() {
            out[v] = match self.tree.parent(v) {
                None => self.root_marginal.clone(),
                Some(p) => (0..k)
                    .map(|y| (0..k).map(|x| out[p][x] * self.cpt[v][x * k + y]).sum())
                    .collect(),
            };
        }
        out
    }

    /// Transition `P(X_to | X_from)` across one tree edge, in either direction.
    /// Rows for a zero-probability source symbol are uniform.
    fn transition(&self, from: usize, to: usize, marginals: &[Vec<T>]) -> Vec<T> {
        let k = self.k();
        if self.tree.parent(to) == Some(from) {
            return self.cpt[to].clone();
        }
        debug_assert_eq!(self.tree.parent(from), Some(to));
        let uniform = T::one() / T::from_usize(k).unwrap();
        let mut out = vec![T::zero(); k * k];
        for a in 0..k {
            let pa = marginals[from][a];
            for b in 0..k {
                out[a * k + b] = if pa > T::zero() {
                    marginals[to][b] * self.cpt[from][b * k + a] / pa
                } else {
                    uniform
                };
            }
        }
        out
    }

    /// Model of the same joint distribution rooted at `new_root`.
    pub fn reroot(&self, new_root: usize) -> Result<Self> {
        let n = self.n();
        if new_root >= n {
            return Err(Error::InvalidNode { node: new_root, n });
        }
        if new_root == self.root() {
            return Ok(self.clone());
        }
        let marginals = self.node_marginals();
        let mut parents = self.tree.parents().to_vec();
        let mut cpt = self.cpt.clone();
        // Walk up from the new root, flipping each edge on the way.
        let mut child = new_root;
        parents[new_root] = None;
        cpt[new_root] = Vec::new();
        while let Some(p) = self.tree.parent(child) {
            parents[p] = Some(child);
            cpt[p] = self.transition(child, p, &marginals);
            child = p;
        }
        let tree = RootedTree::new(new_root, parents)?;
        Self::new(tree, self.alphabet, marginals[new_root].clone(), cpt)
    }

    /// Ancestral sampling: root first, then every node given its parent.
    /// Deterministic in `seed`; a longer draw extends a shorter one.
    pub fn sample(&self, count: usize, seed: u64) -> SampleSet {
        let mut rng = seed::rng(seed);
        self.sample_with(count, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> SampleSet {
        let n = self.n();
        let k = self.k();
        let root_cum = seed::cumulative(&self.root_marginal);
        let cpt_cum: Vec<Vec<Vec<f64>>> = self
            .cpt
            .iter()
            .map(|t| t.chunks(k).map(seed::cumulative).collect())
            .collect();
        let order = self.tree.topological_order();
        let mut rows = vec![0u8; count * n];
        for row in rows.chunks_mut(n.max(1)).take(count) {
            for &v in order {
                let u: f64 = rng.random();
                let s = match self.tree.parent(v) {
                    None => seed::draw(&root_cum, u),
                    Some(p) => seed::draw(&cpt_cum[v][row[p] as usize], u),
                };
                row[v] = s as u8;
            }
        }
        SampleSet::from_raw(n, self.alphabet, rows)
    }

    /// Exact joint of `(X_u, X_v)`, composing transitions along the tree path.
    pub fn pair_marginal(&self, u: usize, v: usize) -> Result<PairTable<T>> {
        let n = self.n();
        for node in [u, v] {
            if node >= n {
                return Err(Error::InvalidNode { node, n });
            }
        }
        if u == v {
            return Err(Error::InvalidVariables("pair marginal needs two distinct nodes".into()));
        }
        let marginals = self.node_marginals();
        let path = self.skeleton().path_between(u, v)?;
        Ok(self.pair_along(&path, &marginals))
    }

    fn pair_along(&self, path: &[usize], marginals: &[Vec<T>]) -> PairTable<T> {
        let k = self.k();
        let u = path[0];
        let mut joint = vec![T::zero(); k * k];
        for a in 0..k {
            joint[a * k + a] = marginals[u][a];
        }
        for w in path.windows(2) {
            let step = self.transition(w[0], w[1], marginals);
            joint = matmul(&joint, &step, k);
        }
        PairTable::from_raw(k, joint)
    }

    /// Exact pairwise mutual information of every node pair.
    pub fn exact_mi_matrix(&self) -> MIMatrix<T> {
        let n = self.n();
        let k = self.k();
        let marginals = self.node_marginals();
        let adj = self.skeleton().adjacency();
        let mut weights = vec![T::zero(); n * n];
        for u in 0..n {
            // Breadth-first from u, carrying P(X_u, X_w) along.
            let mut joint_with = vec![Vec::new(); n];
            let mut diag = vec![T::zero(); k * k];
            for a in 0..k {
                diag[a * k + a] = marginals[u][a];
            }
            joint_with[u] = diag;
            let mut stack = vec![(u, usize::MAX)];
            while let Some((w, from)) = stack.pop() {
                for &next in &adj[w] {
                    if next == from {
                        continue;
                    }
                    let step = self.transition(w, next, &marginals);
                    joint_with[next] = matmul(&joint_with[w], &step, k);
                    stack.push((next, w));
                }
            }
            for v in (u + 1)..n {
                let mi = mutual_information(&PairTable::from_raw(k, joint_with[v].clone()));
                weights[u * n + v] = mi;
                weights[v * n + u] = mi;
            }
        }
        MIMatrix::from_raw(n, weights)
    }
}

fn matmul<T: Scalar>(a: &[T], b: &[T], k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..k {
            out[i * k + j] = (0..k).map(|m| a[i * k + m] * b[m * k + j]).sum();
        }
    }
    out
}

/// Checks every `TreeModel` invariant and reports the first violation.
pub fn validate_tree_model<T: Scalar>(m: &TreeModel<T>) -> Result<()> {
    let n = m.tree.n();
    let k = m.alphabet.size();
    // Re-running the constructor re-checks acyclicity and reachability.
    RootedTree::new(m.tree.root(), m.tree.parents().to_vec())?;
    let tol = row_tolerance::<T>();
    if m.root_marginal.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            got: m.root_marginal.len(),
        });
    }
    check_row(m.root(), 0, &m.root_marginal, tol)?;
    if m.cpt.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: m.cpt.len(),
        });
    }
    for v in 0..n {
        let expected = if v == m.root() { 0 } else { k * k };
        if m.cpt[v].len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "node {v}: cpt has {} entries, expected {expected}",
                m.cpt[v].len()
            )));
        }
        for (row, chunk) in m.cpt[v].chunks(k).enumerate() {
            check_row(v, row, chunk, tol)?;
        }
    }
    Ok(())
}

fn row_tolerance<T: Scalar>() -> T {
    T::clamp_tolerance()
}

fn check_row<T: Scalar>(node: usize, row: usize, values: &[T], tol: T) -> Result<()> {
    for &value in values {
        if !(value >= T::zero()) || !value.is_finite() {
            return Err(Error::NegativeCpt {
                node,
                row,
                value: value.to_f64_lossy(),
            });
        }
    }
    let sum: T = values.iter().copied().sum();
    if (sum - T::one()).abs() > tol {
        return Err(Error::RowSum {
            node,
            row,
            sum: sum.to_f64_lossy(),
        });
    }
    Ok(())
}

impl UndirectedTree {
    /// Uniformly random labeled tree (random Prüfer sequence).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n <= 2 {
            return Self::path(n.max(1));
        }
        let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
        Ok(Self::from_pruefer(n, &code))
    }

    /// Decodes a Prüfer sequence of length `n − 2`.
    pub fn from_pruefer(n: usize, code: &[usize]) -> Self {
        debug_assert_eq!(code.len() + 2, n);
        let mut degree = vec![1usize; n];
        for &c in code {
            degree[c] += 1;
        }
        let mut edges = Vec::with_capacity(n - 1);
        for &c in code {
            let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
            edges.push((leaf, c));
            degree[leaf] -= 1;
            degree[c] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        edges.push((rest[0], rest[1]));
        Self::new(n, edges).expect("Prüfer decoding yields a tree")
    }
}
