//! Association loop against exhaustive enumeration of consistent associations.

mod common;

use common::*;
use coopmtt::association::inner_bp;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn tree_instances_match_enumeration(seed in any::<u64>(), k in 1usize..=3, m in 1usize..=3, sparsity in 0.0f64..0.8) {
        let beta = random_beta(&mut rng(seed), k, m, sparsity);
        prop_assume!(is_forest(&beta));
        let out = inner_bp(&beta, 200, 1e-14);
        let exact = enumerate_association(&beta);
        for (a, b) in out.eta.iter().flatten().zip(exact.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-10, "{:?} vs {:?}", out.eta, exact);
        }
    }

    #[test]
    fn loopy_instances_reach_a_fixed_point(seed in any::<u64>(), k in 2usize..=3, m in 2usize..=3) {
        let beta = random_beta(&mut rng(seed), k, m, 0.0);
        prop_assume!(!is_forest(&beta));
        let out = inner_bp(&beta, 200, 1e-10);
        prop_assert!(out.converged && out.iterations <= 200);
        for row in &out.eta {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn every_shape_up_to_three_by_three() {
    let mut r = rng(11);
    for k in 1..=3 {
        for m in 0..=3 {
            for _ in 0..50 {
                let beta = random_beta(&mut r, k, m, 0.5);
                let out = inner_bp(&beta, 200, 1e-14);
                if is_forest(&beta) {
                    let exact = enumerate_association(&beta);
                    for (a, b) in out.eta.iter().flatten().zip(exact.iter().flatten()) {
                        assert!(
                            (a - b).abs() <= 1e-10,
                            "K={k} M={m}: {:?} vs {exact:?}",
                            out.eta
                        );
                    }
                } else {
                    assert!(
                        inner_bp(&beta, 200, 1e-10).converged,
                        "K={k} M={m}: {beta:?}"
                    );
                }
            }
        }
    }
}
