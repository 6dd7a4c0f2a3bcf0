//! Entropy, mutual information and conditional mutual information on small
//! probability tables, plus the `f(a, b)` decomposition of mutual information.
//!
//! All quantities are in nats. Mutual information has two independent routes:
//! the entropy form `H(X) + H(Y) − H(X,Y)` used in production, and the sum
//! `Σ f(Δ_xy, P_x P_y)` over the dependence residuals `Δ_xy = P_xy − P_x P_y`.

use crate::error::{Error, Result};
use crate::scalar::{clamp_nonneg, xlogx, Scalar};

/// Joint table of two variables over a common alphabet of size `k`,
/// stored row-major (`joint[x * k + y]`).
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable<T> {
    k: usize,
    joint: Vec<T>,
}

impl<T: Scalar> PairTable<T> {
    pub fn new(k: usize, joint: Vec<T>) -> Result<Self> {
        check_table(k * k, &joint)?;
        Ok(Self { k, joint })
    }

    /// Builds a table without validation; callers guarantee the invariants.
    pub(crate) fn from_raw(k: usize, joint: Vec<T>) -> Self {
        debug_assert_eq!(joint.len(), k * k);
        Self { k, joint }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn joint(&self) -> &[T] {
        &self.joint
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.joint[x * self.k + y]
    }

    /// Marginal of the first variable, `P_x`.
    pub fn row_marginal(&self) -> Vec<T> {
        self.joint
            .chunks(self.k)
            .map(|row| row.iter().copied().sum())
            .collect()
    }

    /// Marginal of the second variable, `P_y`.
    pub fn col_marginal(&self) -> Vec<T> {
        (0..self.k)
            .map(|y| (0..self.k).map(|x| self.get(x, y)).sum())
            .collect()
    }

    /// `Δ_xy = P_xy − P_x P_y`, row-major.
    pub fn deltas(&self) -> Vec<T> {
        let px = self.row_marginal();
        let py = self.col_marginal();
        let mut out = Vec::with_capacity(self.joint.len());
        for x in 0..self.k {
            for y in 0..self.k {
                out.push(self.get(x, y) - px[x] * py[y]);
            }
        }
        out
    }

    /// The same table with the roles of the two variables exchanged.
    pub fn transposed(&self) -> Self {
        let k = self.k;
        let joint = (0..k * k).map(|i| self.get(i % k, i / k)).collect();
        Self { k, joint }
    }
}

/// Joint table of three variables `(X, Y, Z)`, indexed `x·k² + y·k + z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleTable<T> {
    k: usize,
    joint: Vec<T>,
}

impl<T: Scalar> TripleTable<T> {
    pub fn new(k: usize, joint: Vec<T>) -> Result<Self> {
        check_table(k * k * k, &joint)?;
        Ok(Self { k, joint })
    }

    pub(crate) fn from_raw(k: usize, joint: Vec<T>) -> Self {
        debug_assert_eq!(joint.len(), k * k * k);
        Self { k, joint }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn joint(&self) -> &[T] {
        &self.joint
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.joint[(x * self.k + y) * self.k + z]
    }

    pub fn z_marginal(&self) -> Vec<T> {
        (0..self.k)
            .map(|z| {
                let mut s = T::zero();
                for x in 0..self.k {
                    for y in 0..self.k {
                        s = s + self.get(x, y, z);
                    }
                }
                s
            })
            .collect()
    }

    /// Unnormalized slice `P(X=x, Y=y, Z=z)` for a fixed `z`.
    pub fn slice(&self, z: usize) -> Vec<T> {
        let k = self.k;
        (0..k * k).map(|i| self.get(i / k, i % k, z)).collect()
    }

    /// Reorders the variables: `order[i]` names which of the current
    /// variables (0 = X, 1 = Y, 2 = Z) becomes variable `i`.
    pub fn permuted(&self, order: [usize; 3]) -> Self {
        let k = self.k;
        let mut joint = vec![T::zero(); k * k * k];
        for x in 0..k {
            for y in 0..k {
                for z in 0..k {
                    let cur = [x, y, z];
                    let idx = (cur[order[0]] * k + cur[order[1]]) * k + cur[order[2]];
                    joint[idx] = self.get(x, y, z);
                }
            }
        }
        Self { k, joint }
    }

    pub fn pair_xy(&self) -> PairTable<T> {
        self.marginal_pair(0, 1)
    }

    pub fn pair_xz(&self) -> PairTable<T> {
        self.marginal_pair(0, 2)
    }

    pub fn pair_yz(&self) -> PairTable<T> {
        self.marginal_pair(1, 2)
    }

    fn marginal_pair(&self, a: usize, b: usize) -> PairTable<T> {
        let k = self.k;
        let mut joint = vec![T::zero(); k * k];
        for x in 0..k {
            for y in 0..k {
                for z in 0..k {
                    let v = [x, y, z];
                    let i = v[a] * k + v[b];
                    joint[i] = joint[i] + self.get(x, y, z);
                }
            }
        }
        PairTable { k, joint }
    }
}

fn check_table<T: Scalar>(expected: usize, joint: &[T]) -> Result<()> {
    if joint.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: joint.len(),
        });
    }
    for (index, &v) in joint.iter().enumerate() {
        if !(v >= T::zero()) || !v.is_finite() {
            return Err(Error::NegativeEntry {
                index,
                value: v.to_f64_lossy(),
            });
        }
    }
    let sum: T = joint.iter().copied().sum();
    if (sum - T::one()).abs() > T::norm_tolerance() {
        return Err(Error::NotNormalized {
            sum: sum.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `f(a, b) = (a + b) ln(1 + a/b) − a`, the per-cell contribution to mutual
/// information when `a = Δ_xy` and `b = P_x P_y`.
///
/// Defined for `b ∈ [0, 1]`, `a ∈ [−b, 1 − b]`. At `a = −b` the limiting value
/// `b` is returned; `f(0, 0) = 0`; `f(a > 0, 0)` is `+∞`.
pub fn f_kl<T: Scalar>(a: T, b: T) -> Result<T> {
    check_f_domain(a, b)?;
    let zero = T::zero();
    if b <= zero {
        return Ok(if a <= zero { zero } else { T::infinity() });
    }
    if a + b <= zero {
        return Ok(b);
    }
    let z = a / b;
    if z.abs() < T::lit(1e-4) {
        // b · Σ_{m≥2} (−1)^m z^m / (m(m−1))
        let z2 = z * z;
        let series = z2 / T::lit(2.0) - z2 * z / T::lit(6.0) + z2 * z2 / T::lit(12.0)
            - z2 * z2 * z / T::lit(20.0);
        return Ok(b * series);
    }
    let value = (a + b) * z.ln_1p() - a;
    Ok(if value < zero { zero } else { value })
}

fn check_f_domain<T: Scalar>(a: T, b: T) -> Result<()> {
    let tol = T::norm_tolerance();
    let ok = a.is_finite()
        && b.is_finite()
        && b >= -tol
        && b <= T::one() + tol
        && a >= -b - tol
        && a <= T::one() - b + tol;
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "f(a, b) needs b in [0,1] and a in [-b, 1-b]; got a={a}, b={b}"
        )))
    }
}

/// Sandwich around `f(a, b)`: with `g = min(a²/b, |a| ln(2 + |a|/b))`,
/// `g/3 ≤ f(a, b) ≤ g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FBounds<T> {
    pub g: T,
    pub lower: T,
    pub upper: T,
}

pub fn f_bounds<T: Scalar>(a: T, b: T) -> Result<FBounds<T>> {
    check_f_domain(a, b)?;
    let zero = T::zero();
    let g = if a == zero {
        zero
    } else if b <= zero {
        T::infinity()
    } else {
        let abs = a.abs();
        let quad = a * a / b;
        let log = abs * (T::lit(2.0) + abs / b).ln();
        quad.min(log)
    };
    Ok(FBounds {
        g,
        lower: g / T::lit(3.0),
        upper: g,
    })
}

/// Shannon entropy in nats with `0 · ln 0 = 0`.
pub fn entropy<T: Scalar>(dist: &[T]) -> T {
    let h = -dist.iter().map(|&p| xlogx(p)).sum::<T>();
    clamp_nonneg(h)
}

pub fn mutual_information<T: Scalar>(t: &PairTable<T>) -> T {
    let hx = entropy(&t.row_marginal());
    let hy = entropy(&t.col_marginal());
    let hxy = entropy(t.joint());
    (hx + hy - hxy).max(T::zero())
}

/// Mutual information as `Σ_{x,y} f(Δ_xy, P_x P_y)`.
pub fn mi_via_f<T: Scalar>(t: &PairTable<T>) -> T {
    let px = t.row_marginal();
    let py = t.col_marginal();
    let k = t.k();
    let mut total = T::zero();
    for x in 0..k {
        for y in 0..k {
            let b = px[x] * py[y];
            let a = t.get(x, y) - b;
            // Rounding can push a marginally outside [-b, 1-b]; clip into range.
            let a = a.max(-b).min(T::one() - b);
            total = total + f_kl(a, b.min(T::one())).unwrap_or(T::zero());
        }
    }
    total.max(T::zero())
}

/// `I(X; Y | Z) = Σ_z P(z) · I(X; Y | Z = z)`; slices with `P(z) = 0` add 0.
pub fn conditional_mi<T: Scalar>(t: &TripleTable<T>) -> T {
    let k = t.k();
    let pz = t.z_marginal();
    let mut total = T::zero();
    for (z, &w) in pz.iter().enumerate() {
        if w <= T::zero() {
            continue;
        }
        let slice: Vec<T> = t.slice(z).into_iter().map(|p| p / w).collect();
        total = total + w * mutual_information(&PairTable::from_raw(k, slice));
    }
    total.max(T::zero())
}

/// Both sides of `I(X;Y) − I(X;Z) = I(X;Y|Z) − I(X;Z|Y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRuleGap<T> {
    pub lhs: T,
    pub rhs: T,
}

pub fn chain_rule_gap<T: Scalar>(t: &TripleTable<T>) -> ChainRuleGap<T> {
    let lhs = mutual_information(&t.pair_xy()) - mutual_information(&t.pair_xz());
    let cmi_xy_given_z = conditional_mi(t);
    // (X, Z, Y) ordering puts Y in the conditioning slot.
    let cmi_xz_given_y = conditional_mi(&t.permuted([0, 2, 1]));
    ChainRuleGap {
        lhs,
        rhs: cmi_xy_given_z - cmi_xz_given_y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn pair(k: usize, v: &[f64]) -> PairTable<f64> {
        PairTable::new(k, v.to_vec()).unwrap()
    }

    fn triple_from_fn(k: usize, f: impl Fn(usize, usize, usize) -> f64) -> TripleTable<f64> {
        let mut v = vec![0.0; k * k * k];
        for x in 0..k {
            for y in 0..k {
                for z in 0..k {
                    v[(x * k + y) * k + z] = f(x, y, z);
                }
            }
        }
        TripleTable::new(k, v).unwrap()
    }

    #[test]
    fn f_kl_examples() {
        assert_eq!(f_kl(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(f_kl(-0.3, 0.3).unwrap(), 0.3);
        let v = f_kl(0.25f64, 0.25).unwrap();
        assert!((v - 0.096_573_590_279_972_65).abs() < 1e-15);
        assert_eq!(f_kl(0.0, 0.0).unwrap(), 0.0);
        assert!(f_kl(0.5f64, 0.0).unwrap().is_infinite());
    }

    #[test]
    fn f_kl_is_continuous_near_the_boundaries() {
        let b = 0.3f64;
        let near = f_kl(-b + 1e-12, b).unwrap();
        assert!((near - b).abs() < 1e-9);
        // series branch agrees with the closed form just outside it
        let a = 2e-4 * b;
        let closed = (a + b) * (a / b).ln_1p() - a;
        let series = f_kl(0.99e-4 * b, b).unwrap();
        assert!(series > 0.0 && series < closed);
    }

    #[test]
    fn f_kl_rejects_out_of_domain() {
        assert!(matches!(f_kl(-0.5, 0.3), Err(Error::Domain(_))));
        assert!(f_kl(0.8, 0.3).is_err());
        assert!(f_kl(0.0, 1.5).is_err());
    }

    #[test]
    fn f_bounds_examples() {
        let zero = f_bounds(0.0, 0.4).unwrap();
        assert_eq!((zero.g, zero.lower, zero.upper), (0.0, 0.0, 0.0));

        let q = f_bounds(0.25f64, 0.25).unwrap();
        assert!((q.g - 0.25).abs() < 1e-15);
        let f = f_kl(0.25, 0.25).unwrap();
        assert!(q.lower <= f && f <= q.upper);
        assert!((q.lower - 0.083_333_333_333_333_33).abs() < 1e-15);

        let edge = f_bounds(-0.3f64, 0.3).unwrap();
        assert!((edge.g - 0.3).abs() < 1e-15);
        assert_eq!(f_kl(-0.3, 0.3).unwrap(), edge.upper);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        assert!((entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-15);
        assert!((entropy(&[0.7f64, 0.3]) - 0.610_864_302_054_893_5).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_examples() {
        assert!(mutual_information(&pair(2, &[0.12, 0.28, 0.18, 0.42])) < 1e-15);
        assert!((mutual_information(&pair(2, &[0.5, 0.0, 0.0, 0.5])) - LN_2).abs() < 1e-15);
        assert!((mi_via_f(&pair(2, &[0.5, 0.0, 0.0, 0.5])) - LN_2).abs() < 1e-15);
        assert_eq!(mi_via_f(&pair(2, &[0.25; 4])), 0.0);
    }

    #[test]
    fn conditional_mi_examples() {
        let copies = triple_from_fn(2, |x, y, z| if x == y && y == z { 0.5 } else { 0.0 });
        assert!(conditional_mi(&copies) < 1e-15);

        let xor = triple_from_fn(2, |x, y, z| if z == x ^ y { 0.25 } else { 0.0 });
        assert!((conditional_mi(&xor) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn chain_rule_examples() {
        let indep = triple_from_fn(2, |_, _, _| 0.125);
        let g = chain_rule_gap(&indep);
        assert!(g.lhs.abs() < 1e-15 && g.rhs.abs() < 1e-15);

        let copies = triple_from_fn(2, |x, y, z| if x == y && y == z { 0.5 } else { 0.0 });
        let g = chain_rule_gap(&copies);
        assert!(g.lhs.abs() < 1e-15 && g.rhs.abs() < 1e-15);
    }

    #[test]
    fn zero_mass_slice_contributes_nothing() {
        // Z never takes value 1.
        let t = triple_from_fn(2, |x, y, z| if z == 0 && x == y { 0.5 } else { 0.0 });
        assert!((conditional_mi(&t) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn table_validation() {
        assert!(matches!(
            PairTable::new(2, vec![0.5, 0.5, 0.1, 0.0]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            PairTable::new(2, vec![1.2, -0.2, 0.0, 0.0]),
            Err(Error::NegativeEntry { .. })
        ));
        assert!(PairTable::<f64>::new(2, vec![1.0]).is_err());
    }

    #[test]
    fn f32_route_agrees() {
        let t = PairTable::<f32>::new(2, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let exact = mutual_information(&pair(2, &[0.4, 0.1, 0.1, 0.4]));
        assert!((mutual_information(&t) as f64 - exact).abs() < 1e-5);
        assert!((mi_via_f(&t) as f64 - exact).abs() < 1e-5);
    }
}
