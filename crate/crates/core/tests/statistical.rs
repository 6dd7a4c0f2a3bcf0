//! Seeded Monte Carlo checks of the learners' sample-size behaviour.

use rayon::prelude::*;

use chowliu_core::chowliu::{chow_liu_structure, learn_tree_distribution};
use chowliu_core::estimation::{learn_parameters, required_samples_fixed_structure, SampleSet};
use chowliu_core::hardinstances::realizable_triple;
use chowliu_core::model::{kl_divergence, Alphabet, DenseJoint, TreeModel};
use chowliu_core::seed;

fn kl_to_model(p: &TreeModel<f64>, q: &TreeModel<f64>) -> f64 {
    kl_divergence(&p.to_dense().unwrap(), &q.to_dense().unwrap()).unwrap()
}

fn pass_rate(trials: u64, f: impl Fn(u64) -> bool + Sync) -> f64 {
    (0..trials).into_par_iter().filter(|&t| f(t)).count() as f64 / trials as f64
}

#[test]
fn full_learner_reaches_epsilon_at_the_realizable_rate() {
    let (n, k, epsilon, delta) = (8usize, 2usize, 0.1, 0.1);
    // k³ n / ε · ln(n k / δ)
    let samples = ((k.pow(3) * n) as f64 / epsilon * ((n * k) as f64 / delta).ln()).ceil() as usize;
    let rate = pass_rate(100, |t| {
        let s = seed::mix(41, 0, t);
        let p = TreeModel::<f64>::random(n, Alphabet::binary(), 0.05, &mut seed::rng(s)).unwrap();
        let q = learn_tree_distribution::<f64>(&p.sample(samples, seed::mix(s, 1, 0))).unwrap();
        kl_to_model(&p, &q) <= epsilon
    });
    assert!(rate >= 0.9, "N = {samples}: rate {rate}");
}

#[test]
fn fixed_structure_bound_holds() {
    let (n, k, epsilon, delta) = (8usize, 2usize, 0.1, 0.1);
    let samples = required_samples_fixed_structure(1.0, n, k, epsilon, delta);
    let rate = pass_rate(100, |t| {
        let s = seed::mix(42, 0, t);
        let p = TreeModel::<f64>::random(n, Alphabet::binary(), 0.05, &mut seed::rng(s)).unwrap();
        let q = learn_parameters::<f64>(&p.sample(samples, seed::mix(s, 1, 0)), p.tree()).unwrap();
        kl_to_model(&p, &q) <= epsilon
    });
    assert!(rate >= 0.9, "N = {samples}: rate {rate}");
}

#[test]
fn noisy_copy_is_attached_to_the_equal_pair() {
    let r1 = realizable_triple(1, 0.2).unwrap();
    let rate = pass_rate(100, |t| {
        chow_liu_structure(&r1.sample(100_000, seed::mix(43, 0, t)))
            .unwrap()
            .contains(1, 2)
    });
    assert!(rate >= 0.95, "rate {rate}");
}

#[test]
fn product_samples_give_a_near_product_model() {
    let a = Alphabet::new(3).unwrap();
    let marginals = [[0.2, 0.3, 0.5], [0.6, 0.3, 0.1], [0.1, 0.1, 0.8], [1.0 / 3.0; 3]];
    let p = DenseJoint::from_fn(4, a, |x| (0..4).map(|v| marginals[v][x[v]]).product()).unwrap();
    let s = p.sample(200_000, 44);
    let q = learn_tree_distribution::<f64>(&s).unwrap().to_dense().unwrap();
    let product = DenseJoint::from_fn(4, a, |x| {
        (0..4)
            .map(|v| {
                let count = s.column(v).filter(|&c| c as usize == x[v]).count();
                (count as f64 + 1.0) / (s.len() as f64 + 3.0)
            })
            .product()
    })
    .unwrap();
    assert!(kl_divergence(&product, &q).unwrap() < 1e-3);
    assert!(kl_divergence(&p, &q).unwrap() < 1e-3);
}

#[test]
fn single_row_gives_a_positive_model() {
    let s = SampleSet::new(4, Alphabet::new(3).unwrap(), &[vec![2, 0, 1, 1]]).unwrap();
    let q = learn_tree_distribution::<f64>(&s).unwrap();
    assert_eq!(q.root(), 0);
    assert!(q.to_dense().unwrap().probs().iter().all(|&x| x > 0.0));
}
