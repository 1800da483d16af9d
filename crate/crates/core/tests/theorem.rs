mod common;

use common::*;

#[test]
fn certified_networks_contract_from_anywhere_in_the_ball() {
    let o = theorem_suite(100, 20);
    assert_eq!(o.runs, 2000);
    assert!(o.all_converged);
    assert!(o.stayed_in_ball);
    assert!(o.max_pairwise_gap <= 1e-7, "gap {}", o.max_pairwise_gap);
    assert!(
        o.max_rate_excess <= 1e-6,
        "rate excess {}",
        o.max_rate_excess
    );
    assert_eq!(o.bound_violations, 0);
}
