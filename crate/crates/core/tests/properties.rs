use proptest::prelude::*;

use chowliu_core::chowliu::{chow_liu_structure, mi_matrix};
use chowliu_core::citest::{required_samples_cmi, TesterConfig};
use chowliu_core::estimation::{add_one_estimate, SampleSet};
use chowliu_core::hardinstances::block_product;
use chowliu_core::info::{f_bounds, f_kl, mutual_information, PairTable};
use chowliu_core::model::{
    kl_divergence, project_onto_tree, statistical_distances, Alphabet, DenseJoint, TreeModel, UndirectedTree,
};
use chowliu_core::seed;

fn joint(n: usize, k: usize, s: u64) -> DenseJoint<f64> {
    let mut rng = seed::rng(s);
    DenseJoint::new(n, Alphabet::new(k).unwrap(), seed::floored_dirichlet(k.pow(n as u32), 0.0, &mut rng)).unwrap()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reroot_keeps_the_joint(n in 2usize..7, k in 2usize..4, s: u64, r in 0usize..7) {
        let mut rng = seed::rng(s);
        let m = TreeModel::<f64>::random(n, Alphabet::new(k).unwrap(), 0.01, &mut rng).unwrap();
        let moved = m.reroot(r % n).unwrap();
        prop_assert_eq!(moved.root(), r % n);
        prop_assert_eq!(moved.skeleton(), m.skeleton());
        let d = max_abs(m.to_dense().unwrap().probs(), moved.to_dense().unwrap().probs());
        prop_assert!(d <= 1e-12, "{d}");
    }

    #[test]
    fn projection_matches_edge_marginals(n in 2usize..6, k in 2usize..4, s: u64, root in 0usize..6) {
        let p = joint(n, k, s);
        let t = UndirectedTree::random(n, &mut seed::rng(s ^ 1)).unwrap();
        let q = project_onto_tree(&p, &t, root % n).unwrap().model.to_dense().unwrap();
        for &(u, v) in t.edges() {
            let d = max_abs(p.marginal(&[u, v]).unwrap().as_slice(), q.marginal(&[u, v]).unwrap().as_slice());
            prop_assert!(d <= 1e-12, "edge ({u}, {v}): {d}");
        }
    }

    #[test]
    fn pinsker(n in 1usize..4, k in 2usize..4, s1: u64, s2: u64) {
        let p = joint(n, k, s1);
        let q = joint(n, k, s2);
        let kl = kl_divergence(&p, &q).unwrap();
        let d = statistical_distances(&p, &q).unwrap();
        prop_assert!(d.tv <= (kl / 2.0).sqrt() + 1e-9);
        prop_assert!(d.hellinger_sq >= 0.0 && d.hellinger_sq <= d.tv + 1e-12);
    }

    #[test]
    fn hellinger_tensorizes(k in 2usize..4, s1: u64, s2: u64, copies in 1usize..6) {
        let p = joint(1, k, s1);
        let q = joint(1, k, s2);
        let h = statistical_distances(&p, &q).unwrap().hellinger_sq;
        let pk = block_product(&vec![p; copies]).unwrap();
        let qk = block_product(&vec![q; copies]).unwrap();
        let hk = statistical_distances(&pk, &qk).unwrap().hellinger_sq;
        prop_assert!((hk - (1.0 - (1.0 - h).powi(copies as i32))).abs() <= 1e-9);
    }

    #[test]
    fn f_sandwich(b in 1e-6f64..1.0, t in 0.0f64..=1.0) {
        let a = -b + t;
        prop_assume!(a <= 1.0 - b);
        let f = f_kl(a, b).unwrap();
        let g = f_bounds(a, b).unwrap();
        let slack = 1e-12 * (1.0 + g.g);
        prop_assert!(g.lower - slack <= f && f <= g.upper + slack, "a={a} b={b} f={f} g={}", g.g);
    }

    #[test]
    fn mi_is_symmetric_and_nonnegative(k in 2usize..7, s: u64) {
        let mut rng = seed::rng(s);
        let t = PairTable::new(k, seed::floored_dirichlet(k * k, 0.0, &mut rng)).unwrap();
        let i = mutual_information(&t);
        prop_assert!(i >= -1e-12);
        prop_assert!((i - mutual_information(&t.transposed())).abs() <= 1e-12);
    }

    #[test]
    fn add_one_is_positive_and_normalized(counts in proptest::collection::vec(0u64..1000, 2..20)) {
        let q: Vec<f64> = add_one_estimate(&counts);
        prop_assert!(q.iter().all(|&x| x > 0.0));
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sample_size_is_monotone(e in 0.01f64..0.5, d in 0.01f64..0.5, k in 2usize..6) {
        let base = required_samples_cmi(&TesterConfig::new(e, d, k).unwrap());
        prop_assert!(required_samples_cmi(&TesterConfig::new(e, d, k + 1).unwrap()) >= base);
        prop_assert!(required_samples_cmi(&TesterConfig::new(e / 2.0, d, k).unwrap()) >= base);
        prop_assert!(required_samples_cmi(&TesterConfig::new(e, d / 2.0, k).unwrap()) >= base);
    }

    #[test]
    fn learned_structure_ignores_thread_count(n in 2usize..8, s: u64) {
        let m = TreeModel::<f64>::random(n, Alphabet::binary(), 0.05, &mut seed::rng(s)).unwrap();
        let data: SampleSet = m.sample(40_000, s);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let (t1, w1) = single.install(|| (chow_liu_structure(&data).unwrap(), mi_matrix::<f64>(&data).unwrap()));
        prop_assert_eq!(t1, chow_liu_structure(&data).unwrap());
        prop_assert_eq!(w1, mi_matrix::<f64>(&data).unwrap());
    }
}
