use crate::error::{Error, Result};
use crate::estimation::SampleSet;
use crate::info::{entropy, PairTable, TripleTable};
use crate::scalar::Scalar;
use crate::seed;

use super::Alphabet;

/// Largest dense table built unless a caller raises the cap explicitly.
pub const DEFAULT_DENSE_CAP: usize = 1 << 24;

/// Probability table over `Σ^n`, indexed in mixed radix with `x_1` as the
/// most significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseJoint<T> {
    n: usize,
    alphabet: Alphabet,
    probs: Vec<T>,
}

pub(crate) fn table_len(n: usize, k: usize, cap: usize) -> Result<usize> {
    let entries = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if entries > cap as u128 {
        return Err(Error::CapExceeded { entries, cap });
    }
    Ok(entries as usize)
}

impl<T: Scalar> DenseJoint<T> {
    pub fn new(n: usize, alphabet: Alphabet, probs: Vec<T>) -> Result<Self> {
        Self::with_cap(n, alphabet, probs, DEFAULT_DENSE_CAP)
    }

    pub fn with_cap(n: usize, alphabet: Alphabet, probs: Vec<T>, cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ShapeMismatch("a joint needs at least one variable".into()));
        }
        let expected = table_len(n, alphabet.size(), cap)?;
        if probs.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: probs.len(),
            });
        }
        let mut sum = T::zero();
        for (index, &p) in probs.iter().enumerate() {
            if !(p >= T::zero()) || !p.is_finite() {
                return Err(Error::NegativeEntry {
                    index,
                    value: p.to_f64_lossy(),
                });
            }
            sum = sum + p;
        }
        if (sum - T::one()).abs() > T::norm_tolerance() {
            return Err(Error::NotNormalized {
                sum: sum.to_f64_lossy(),
            });
        }
        Ok(Self { n, alphabet, probs })
    }

    /// Builds the table by evaluating `f` on every assignment.
    pub fn from_fn(n: usize, alphabet: Alphabet, mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let len = table_len(n, alphabet.size(), DEFAULT_DENSE_CAP)?;
        let mut probs = Vec::with_capacity(len);
        let mut digits = vec![0usize; n];
        for _ in 0..len {
            probs.push(f(&digits));
            increment(&mut digits, alphabet.size());
        }
        Self::new(n, alphabet, probs)
    }

    pub fn uniform(n: usize, alphabet: Alphabet) -> Result<Self> {
        let len = table_len(n, alphabet.size(), DEFAULT_DENSE_CAP)?;
        let p = T::one() / T::from_usize(len).expect("table length fits the scalar");
        Self::new(n, alphabet, vec![p; len])
    }

    pub fn point_mass(n: usize, alphabet: Alphabet, assignment: &[usize]) -> Result<Self> {
        let len = table_len(n, alphabet.size(), DEFAULT_DENSE_CAP)?;
        let mut probs = vec![T::zero(); len];
        let idx = encode(assignment, alphabet.size())?;
        probs[idx] = T::one();
        Self::new(n, alphabet, probs)
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

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, assignment: &[usize]) -> Result<T> {
        if assignment.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "assignment of length {} for {} variables",
                assignment.len(),
                self.n
            )));
        }
        Ok(self.probs[encode(assignment, self.k())?])
    }

    pub fn index_of(&self, assignment: &[usize]) -> Result<usize> {
        encode(assignment, self.k())
    }

    pub fn assignment(&self, index: usize) -> Vec<usize> {
        let k = self.k();
        let mut digits = vec![0; self.n];
        let mut rest = index;
        for d in digits.iter_mut().rev() {
            *d = rest % k;
            rest /= k;
        }
        digits
    }

    /// Visits every assignment in index order.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], T)) {
        let mut digits = vec![0usize; self.n];
        for &p in &self.probs {
            f(&digits, p);
            increment(&mut digits, self.k());
        }
    }

    /// Marginal table over `vars` (in the given order, mixed radix).
    pub fn marginal(&self, vars: &[usize]) -> Result<Vec<T>> {
        self.check_vars(vars)?;
        let k = self.k();
        let mut out = vec![T::zero(); k.pow(vars.len() as u32)];
        self.for_each(|digits, p| {
            let idx = vars.iter().fold(0, |acc, &v| acc * k + digits[v]);
            out[idx] = out[idx] + p;
        });
        Ok(out)
    }

    pub fn node_marginal(&self, v: usize) -> Result<Vec<T>> {
        self.marginal(&[v])
    }

    pub fn pair_table(&self, u: usize, v: usize) -> Result<PairTable<T>> {
        Ok(PairTable::from_raw(self.k(), self.marginal(&[u, v])?))
    }

    pub fn triple_table(&self, x: usize, y: usize, z: usize) -> Result<TripleTable<T>> {
        Ok(TripleTable::from_raw(self.k(), self.marginal(&[x, y, z])?))
    }

    pub fn entropy(&self) -> T {
        entropy(&self.probs)
    }

    /// Joint obtained by reordering variables: output variable `i` is input
    /// variable `order[i]`.
    pub fn permute_variables(&self, order: &[usize]) -> Result<Self> {
        self.check_vars(order)?;
        if order.len() != self.n {
            return Err(Error::InvalidVariables("permutation must name every variable".into()));
        }
        let k = self.k();
        let mut probs = vec![T::zero(); self.probs.len()];
        self.for_each(|digits, p| {
            let idx = order.iter().fold(0, |acc, &v| acc * k + digits[v]);
            probs[idx] = p;
        });
        Ok(Self {
            n: self.n,
            alphabet: self.alphabet,
            probs,
        })
    }

    /// `count` independent draws, deterministic in `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> SampleSet {
        use rand::Rng;
        let cum = seed::cumulative(&self.probs);
        let mut rng = seed::rng(seed);
        let mut rows = Vec::with_capacity(count * self.n);
        let mut digits = vec![0usize; self.n];
        for _ in 0..count {
            let mut idx = seed::draw(&cum, rng.random());
            for d in digits.iter_mut().rev() {
                *d = idx % self.k();
                idx /= self.k();
            }
            rows.extend(digits.iter().map(|&d| d as u8));
        }
        SampleSet::from_raw(self.n, self.alphabet, rows)
    }

    fn check_vars(&self, vars: &[usize]) -> Result<()> {
        for (i, &v) in vars.iter().enumerate() {
            if v >= self.n {
                return Err(Error::InvalidNode { node: v, n: self.n });
            }
            if vars[..i].contains(&v) {
                return Err(Error::InvalidVariables(format!("variable {v} repeated")));
            }
        }
        Ok(())
    }
}

pub(crate) fn increment(digits: &mut [usize], k: usize) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < k {
            return;
        }
        *d = 0;
    }
}

fn encode(assignment: &[usize], k: usize) -> Result<usize> {
    let mut idx = 0usize;
    for &s in assignment {
        if s >= k {
            return Err(Error::Domain(format!("symbol {s} outside alphabet of size {k}")));
        }
        idx = idx * k + s;
    }
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_radix_has_first_variable_most_significant() {
        let a = Alphabet::new(3).unwrap();
        let p = DenseJoint::<f64>::point_mass(3, a, &[1, 0, 2]).unwrap();
        assert_eq!(p.index_of(&[1, 0, 2]).unwrap(), 9 + 2);
        assert_eq!(p.probs()[11], 1.0);
        assert_eq!(p.assignment(11), vec![1, 0, 2]);
    }

    #[test]
    fn cap_is_enforced() {
        let a = Alphabet::binary();
        let err = DenseJoint::<f64>::with_cap(5, a, vec![1.0 / 32.0; 32], 16).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { entries: 32, cap: 16 }));
        assert!(DenseJoint::<f64>::uniform(25, a).is_err());
    }

    #[test]
    fn rejects_bad_tables() {
        let a = Alphabet::binary();
        assert!(DenseJoint::new(1, a, vec![0.5, 0.6]).is_err());
        assert!(DenseJoint::new(1, a, vec![1.5, -0.5]).is_err());
        assert!(DenseJoint::new(2, a, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn marginals_sum_correctly() {
        let a = Alphabet::binary();
        let p = DenseJoint::from_fn(3, a, |x| if x[0] == x[2] { 0.2 } else { 0.05 }).unwrap();
        let m = p.marginal(&[2, 0]).unwrap();
        assert_eq!(m, vec![0.4, 0.1, 0.1, 0.4]);
        assert!(p.marginal(&[0, 0]).is_err());
        assert!(p.marginal(&[3]).is_err());
    }

    #[test]
    fn sampling_hits_only_the_support() {
        let a = Alphabet::new(3).unwrap();
        let p = DenseJoint::from_fn(2, a, |x| if x[0] == 2 && x[1] != 1 { 0.5 } else { 0.0 }).unwrap();
        let s = p.sample(1000, 4);
        assert_eq!(s.len(), 1000);
        assert!(s.rows().all(|r| r[0] == 2 && r[1] != 1));
        assert_eq!(s, p.sample(1000, 4));
    }

    #[test]
    fn permutation_moves_mass() {
        let a = Alphabet::binary();
        let p = DenseJoint::<f64>::point_mass(3, a, &[1, 0, 0]).unwrap();
        let q = p.permute_variables(&[2, 1, 0]).unwrap();
        assert_eq!(q.prob(&[0, 0, 1]).unwrap(), 1.0);
    }
}
