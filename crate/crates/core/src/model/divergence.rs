use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::DenseJoint;

fn check_same_shape<T: Scalar>(p: &DenseJoint<T>, q: &DenseJoint<T>) -> Result<()> {
    if p.n() != q.n() || p.alphabet() != q.alphabet() {
        return Err(Error::ShapeMismatch(format!(
            "joint over {}^{} vs {}^{}",
            p.k(),
            p.n(),
            q.k(),
            q.n()
        )));
    }
    Ok(())
}

/// `D(p ‖ q)` over slices of equal length; `+∞` when `p` puts mass where `q`
/// has none, `0 · ln 0 = 0`.
pub(crate) fn kl_slices<T: Scalar>(p: &[T], q: &[T]) -> T {
    let mut total = T::zero();
    for (&a, &b) in p.iter().zip(q) {
        if a <= T::zero() {
            continue;
        }
        if b <= T::zero() {
            return T::infinity();
        }
        total = total + a * (a / b).ln();
    }
    total.max(T::zero())
}

/// KL divergence `D(p ‖ q)` in nats; returns `+∞` on a support mismatch.
pub fn kl_divergence<T: Scalar>(p: &DenseJoint<T>, q: &DenseJoint<T>) -> Result<T> {
    check_same_shape(p, q)?;
    Ok(kl_slices(p.probs(), q.probs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distances<T> {
    /// `½ Σ |p − q|`.
    pub tv: T,
    /// `½ Σ (√p − √q)²`.
    pub hellinger_sq: T,
}

pub fn statistical_distances<T: Scalar>(p: &DenseJoint<T>, q: &DenseJoint<T>) -> Result<Distances<T>> {
    check_same_shape(p, q)?;
    let half = T::lit(0.5);
    let mut tv = T::zero();
    let mut h = T::zero();
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        tv = tv + (a - b).abs();
        let d = a.sqrt() - b.sqrt();
        h = h + d * d;
    }
    Ok(Distances {
        tv: (tv * half).min(T::one()),
        hellinger_sq: (h * half).min(T::one()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Alphabet;

    #[test]
    fn kl_examples() {
        let a = Alphabet::binary();
        let u = DenseJoint::<f64>::uniform(1, a).unwrap();
        let pm = DenseJoint::<f64>::point_mass(1, a, &[0]).unwrap();
        assert_eq!(kl_divergence(&u, &u).unwrap(), 0.0);
        assert!((kl_divergence(&pm, &u).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(kl_divergence(&u, &pm).unwrap().is_infinite());
        let u2 = DenseJoint::<f64>::uniform(2, a).unwrap();
        assert!(kl_divergence(&u, &u2).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = Alphabet::binary();
        let p = DenseJoint::<f64>::point_mass(2, a, &[0, 1]).unwrap();
        let q = DenseJoint::<f64>::point_mass(2, a, &[1, 1]).unwrap();
        let same = statistical_distances(&p, &p).unwrap();
        assert_eq!((same.tv, same.hellinger_sq), (0.0, 0.0));
        let far = statistical_distances(&p, &q).unwrap();
        assert_eq!((far.tv, far.hellinger_sq), (1.0, 1.0));
    }
}
