//! Counting from samples, the add-1 estimator and fixed-structure parameter
//! learning.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::info::{PairTable, TripleTable};
use crate::model::{kl_divergence, Alphabet, DenseJoint, RootedTree, TreeModel};
use crate::scalar::Scalar;
use crate::seed;

/// `N` rows of `n` symbols each, stored row-major, one byte per symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    n: usize,
    alphabet: Alphabet,
    rows: Vec<u8>,
}

impl SampleSet {
    pub fn new(n: usize, alphabet: Alphabet, rows: &[Vec<usize>]) -> Result<Self> {
        let mut flat = Vec::with_capacity(rows.len() * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "row {r} has {} symbols, expected {n}",
                    row.len()
                )));
            }
            for (c, &s) in row.iter().enumerate() {
                if s >= alphabet.size() {
                    return Err(Error::SymbolOutOfRange {
                        row: r,
                        col: c,
                        symbol: s,
                        k: alphabet.size(),
                    });
                }
                flat.push(s as u8);
            }
        }
        Self::from_flat(n, alphabet, flat)
    }

    /// Validating constructor over a row-major byte buffer.
    pub fn from_flat(n: usize, alphabet: Alphabet, rows: Vec<u8>) -> Result<Self> {
        if n == 0 {
            return Err(Error::ShapeMismatch("samples need at least one column".into()));
        }
        if rows.len() % n != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} symbols do not split into rows of {n}",
                rows.len()
            )));
        }
        let k = alphabet.size();
        if let Some(i) = rows.iter().position(|&s| s as usize >= k) {
            return Err(Error::SymbolOutOfRange {
                row: i / n,
                col: i % n,
                symbol: rows[i] as usize,
                k,
            });
        }
        Ok(Self::from_raw(n, alphabet, rows))
    }

    pub(crate) fn from_raw(n: usize, alphabet: Alphabet, rows: Vec<u8>) -> Self {
        Self { n, alphabet, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn k(&self) -> usize {
        self.alphabet.size()
    }

    /// Number of rows `N`.
    pub fn len(&self) -> usize {
        self.rows.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, u8> {
        self.rows.chunks_exact(self.n)
    }

    pub fn rows_flat(&self) -> &[u8] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = u8> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// First `count` rows (all of them if there are fewer).
    pub fn prefix(&self, count: usize) -> Self {
        let end = (count * self.n).min(self.rows.len());
        Self::from_raw(self.n, self.alphabet, self.rows[..end].to_vec())
    }

    /// New sample set whose column `i` is column `cols[i]` of `self`.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        check_vars(self.n, cols, cols.len().max(1))?;
        let mut rows = Vec::with_capacity(self.len() * cols.len());
        for r in self.rows() {
            rows.extend(cols.iter().map(|&c| r[c]));
        }
        Ok(Self::from_raw(cols.len(), self.alphabet, rows))
    }
}

fn check_vars(n: usize, vars: &[usize], max: usize) -> Result<()> {
    if vars.is_empty() || vars.len() > max {
        return Err(Error::InvalidVariables(format!(
            "expected 1 to {max} variables, got {}",
            vars.len()
        )));
    }
    for (i, &v) in vars.iter().enumerate() {
        if v >= n {
            return Err(Error::InvalidNode { node: v, n });
        }
        if vars[..i].contains(&v) {
            return Err(Error::InvalidVariables(format!("variable {v} repeated")));
        }
    }
    Ok(())
}

/// Counts over 1 to 3 variables, in mixed radix with the first variable most
/// significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    vars: Vec<usize>,
    k: usize,
    counts: Vec<u64>,
    total: u64,
}

impl CountTable {
    pub fn zeros(vars: &[usize], k: usize) -> Self {
        Self {
            vars: vars.to_vec(),
            k,
            counts: vec![0; k.pow(vars.len() as u32)],
            total: 0,
        }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Adds another table over the same variables. Counts are additive, so
    /// merging is associative and commutative.
    pub fn merge(&mut self, other: &CountTable) -> Result<()> {
        if self.vars != other.vars || self.k != other.k {
            return Err(Error::ShapeMismatch("count tables over different variables".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    /// Empirical distribution `counts / N`; `None` when `N = 0`.
    pub fn frequencies<T: Scalar>(&self) -> Option<Vec<T>> {
        if self.total == 0 {
            return None;
        }
        let n = T::from_u64(self.total).unwrap();
        Some(self.counts.iter().map(|&c| T::from_u64(c).unwrap() / n).collect())
    }

    fn tally(&mut self, rows: &[u8], width: usize) {
        let k = self.k;
        for r in rows.chunks_exact(width) {
            let idx = self.vars.iter().fold(0, |acc, &v| acc * k + r[v] as usize);
            self.counts[idx] += 1;
        }
        self.total += (rows.len() / width) as u64;
    }
}

/// Rows per parallel counting chunk.
const CHUNK_ROWS: usize = 1 << 16;

pub fn empirical_counts(s: &SampleSet, vars: &[usize]) -> Result<CountTable> {
    check_vars(s.n, vars, 3)?;
    let proto = CountTable::zeros(vars, s.k());
    if s.len() <= CHUNK_ROWS {
        let mut c = proto;
        c.tally(&s.rows, s.n);
        return Ok(c);
    }
    let parts: Vec<CountTable> = s
        .rows
        .par_chunks(CHUNK_ROWS * s.n)
        .map(|chunk| {
            let mut c = proto.clone();
            c.tally(chunk, s.n);
            c
        })
        .collect();
    let mut total = proto.clone();
    for p in &parts {
        total.merge(p)?;
    }
    Ok(total)
}

/// `(counts[i] + 1) / (N + k)` with `k = counts.len()`.
pub fn add_one_estimate<T: Scalar>(counts: &[u64]) -> Vec<T> {
    let n: u64 = counts.iter().sum();
    let denom = T::from_u64(n + counts.len() as u64).unwrap();
    counts
        .iter()
        .map(|&c| T::from_u64(c + 1).unwrap() / denom)
        .collect()
}

/// Empirical joint of columns `(u, v)`.
pub fn empirical_pair<T: Scalar>(s: &SampleSet, u: usize, v: usize) -> Result<PairTable<T>> {
    let c = empirical_counts(s, &[u, v])?;
    let freq = c.frequencies().ok_or(Error::EmptySamples)?;
    Ok(PairTable::from_raw(s.k(), freq))
}

/// Empirical joint of columns `(x, y, z)`.
pub fn empirical_triple<T: Scalar>(s: &SampleSet, x: usize, y: usize, z: usize) -> Result<TripleTable<T>> {
    let c = empirical_counts(s, &[x, y, z])?;
    let freq = c.frequencies().ok_or(Error::EmptySamples)?;
    Ok(TripleTable::from_raw(s.k(), freq))
}

/// Add-1 estimates of the root marginal and of every node's conditional
/// given its parent, stratifying rows on the parent symbol.
pub fn learn_parameters<T: Scalar>(s: &SampleSet, t: &RootedTree) -> Result<TreeModel<T>> {
    if t.n() != s.n() {
        return Err(Error::ShapeMismatch(format!(
            "tree on {} nodes for samples with {} columns",
            t.n(),
            s.n()
        )));
    }
    let k = s.k();
    let root = empirical_counts(s, &[t.root()])?;
    let mut cpt = vec![Vec::new(); t.n()];
    for v in 0..t.n() {
        let Some(pa) = t.parent(v) else { continue };
        let pair = empirical_counts(s, &[pa, v])?;
        cpt[v] = pair.counts().chunks(k).flat_map(add_one_estimate::<T>).collect();
    }
    TreeModel::new(t.clone(), s.alphabet(), add_one_estimate(root.counts()), cpt)
}

/// `C · k · ln(k/δ) · ln N / N`, the high-probability KL bound for the add-1
/// estimator over `k` symbols from `N` samples.
pub fn add_one_kl_bound(c: f64, k: usize, delta: f64, n_samples: usize) -> f64 {
    let n = n_samples as f64;
    c * k as f64 * (k as f64 / delta).ln() * n.ln() / n
}

/// `D(P ‖ add-1 estimate)` for a fresh sample of size `n_samples` from `p`.
pub fn add_one_kl_trial(p: &[f64], n_samples: usize, seed: u64) -> f64 {
    use rand::Rng;
    let k = p.len();
    let cum = seed::cumulative(p);
    let mut rng = seed::rng(seed);
    let mut counts = vec![0u64; k];
    for _ in 0..n_samples {
        counts[seed::draw(&cum, rng.random())] += 1;
    }
    let q: Vec<f64> = add_one_estimate(&counts);
    let alphabet = Alphabet::new(k).expect("valid alphabet");
    let pd = DenseJoint::new(1, alphabet, p.to_vec()).expect("valid distribution");
    let qd = DenseJoint::new(1, alphabet, q).expect("add-1 output is a distribution");
    kl_divergence(&pd, &qd).expect("same shape")
}

/// Smallest constant `C` for which the add-1 KL bound holds in at least a
/// `1 − δ` fraction of `trials` simulations at every sample size in
/// `sizes`, with each trial drawing `P` as a uniform random distribution
/// over `k` symbols.
pub fn calibrate_add_one_constant(k: usize, delta: f64, sizes: &[usize], trials: usize, master: u64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) || trials == 0 || sizes.iter().any(|&n| n < 2) {
        return Err(Error::Config(
            "calibration needs 0 < δ < 1, trials ≥ 1 and sample sizes ≥ 2".into(),
        ));
    }
    Alphabet::new(k)?;
    let mut c = 0.0f64;
    for (cell, &n) in sizes.iter().enumerate() {
        let unit = add_one_kl_bound(1.0, k, delta, n);
        let mut ratios: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = seed::mix(master, cell as u64, t as u64);
                let mut rng = seed::rng(s);
                let p = seed::floored_dirichlet(k, 0.0, &mut rng);
                add_one_kl_trial(&p, n, s.wrapping_add(1)) / unit
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        c = c.max(quantile_upper(&ratios, 1.0 - delta));
    }
    Ok(c)
}

/// Smallest element `x` of sorted `v` with at least a `q` fraction of `v`
/// at or below `x`.
pub(crate) fn quantile_upper(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Sample size for fixed-structure learning to excess KL `ε`:
/// `ceil(c · (n k² / ε) · ln(n k / δ) · ln((n k / ε) · ln(1/δ)))`, at least 1.
pub fn required_samples_fixed_structure(c: f64, n: usize, k: usize, epsilon: f64, delta: f64) -> usize {
    let nk = (n * k) as f64;
    let raw = c * (nk * k as f64 / epsilon) * (nk / delta).ln() * ((nk / epsilon) * (1.0 / delta).ln()).ln();
    if raw.is_finite() && raw > 1.0 {
        raw.ceil() as usize
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UndirectedTree;

    fn bin() -> Alphabet {
        Alphabet::binary()
    }

    #[test]
    fn counting_examples() {
        let s = SampleSet::new(2, bin(), &vec![vec![0, 0]; 4]).unwrap();
        let c = empirical_counts(&s, &[0, 1]).unwrap();
        assert_eq!((c.counts(), c.total()), (&[4u64, 0, 0, 0][..], 4));

        let empty = SampleSet::new(2, bin(), &[]).unwrap();
        let c = empirical_counts(&empty, &[0, 1]).unwrap();
        assert_eq!((c.counts(), c.total()), (&[0u64; 4][..], 0));

        let s = SampleSet::new(2, bin(), &[vec![0, 1], vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(empirical_counts(&s, &[1]).unwrap().counts(), &[1, 2]);
        assert!(empirical_counts(&s, &[0, 0]).is_err());
        assert!(empirical_counts(&s, &[2]).is_err());
    }

    #[test]
    fn rejects_out_of_range_symbols() {
        let err = SampleSet::new(2, bin(), &[vec![0, 2]]).unwrap_err();
        assert!(matches!(err, Error::SymbolOutOfRange { row: 0, col: 1, .. }));
        assert!(SampleSet::from_flat(2, bin(), vec![0, 1, 1]).is_err());
    }

    #[test]
    fn add_one_examples() {
        assert_eq!(add_one_estimate::<f64>(&[3, 1]), vec![2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(add_one_estimate::<f64>(&[0, 0]), vec![0.5, 0.5]);
        assert_eq!(add_one_estimate::<f64>(&[10, 0, 0]), vec![11.0 / 13.0, 1.0 / 13.0, 1.0 / 13.0]);
    }

    #[test]
    fn learn_parameters_examples() {
        let t = UndirectedTree::path(3).unwrap().rooted_at(0).unwrap();
        let zeros = SampleSet::new(3, bin(), &vec![vec![0, 0, 0]; 8]).unwrap();
        let m = learn_parameters::<f64>(&zeros, &t).unwrap();
        assert_eq!(m.root_marginal(), &[0.9, 0.1]);
        for v in 1..3 {
            assert_eq!(m.cpt_row(v, 0), &[0.9, 0.1]);
            assert_eq!(m.cpt_row(v, 1), &[0.5, 0.5]);
        }
        let empty = SampleSet::new(3, bin(), &[]).unwrap();
        let m = learn_parameters::<f64>(&empty, &t).unwrap();
        assert_eq!(m.root_marginal(), &[0.5, 0.5]);
        assert_eq!(m.cpt(2), &[0.5; 4]);
    }

    #[test]
    fn learn_parameters_is_consistent() {
        let mut rng = seed::rng(11);
        let truth = TreeModel::<f64>::random(5, bin(), 0.05, &mut rng).unwrap();
        let s = truth.sample(200_000, 3);
        let m = learn_parameters::<f64>(&s, truth.tree()).unwrap();
        for (a, b) in truth.root_marginal().iter().zip(m.root_marginal()) {
            assert!((a - b).abs() < 0.01);
        }
        for v in 1..5 {
            for (a, b) in truth.cpt(v).iter().zip(m.cpt(v)) {
                assert!((a - b).abs() < 0.01, "node {v}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn parallel_counts_match_serial() {
        let mut rng = seed::rng(2);
        let m = TreeModel::<f64>::random(4, Alphabet::new(3).unwrap(), 0.0, &mut rng).unwrap();
        let s = m.sample(3 * CHUNK_ROWS + 17, 9);
        let par = empirical_counts(&s, &[2, 0, 3]).unwrap();
        let mut serial = CountTable::zeros(&[2, 0, 3], 3);
        serial.tally(s.rows_flat(), 4);
        assert_eq!(par, serial);
    }

    #[test]
    fn sample_size_formula() {
        let a = required_samples_fixed_structure(1.0, 8, 2, 0.1, 0.1);
        let b = required_samples_fixed_structure(1.0, 8, 2, 0.05, 0.1);
        assert!(b > 2 * a);
        assert_eq!(required_samples_fixed_structure(1.0, 2, 2, 1e12, 0.5), 1);
    }

    #[test]
    fn quantile_picks_covering_element() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile_upper(&v, 0.95), 95.0);
        assert_eq!(quantile_upper(&v, 1.0), 100.0);
        assert_eq!(quantile_upper(&v, 0.0), 1.0);
    }
}
