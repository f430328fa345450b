//! Centralized Gibbs product against brute-force label enumeration.

mod common;

use common::*;

#[test]
fn components_match_sequential_updates_and_capture_most_weight() {
    let f = gibbs_fidelity(100, 1);
    assert!(f.max_param_error <= 1e-9, "{f:?}");
    assert!(f.median_captured >= 0.90, "{f:?}");
    assert!(f.elapsed.as_secs_f64() < 30.0, "{f:?}");
}
