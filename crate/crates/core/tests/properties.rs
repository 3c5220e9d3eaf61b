mod common;

#[test]
fn cell_sums_and_messages_are_normalized() {
    common::prop_normalization(32).unwrap();
}

#[test]
fn group_marginals_are_additive() {
    common::prop_additivity(64).unwrap();
}

#[test]
fn basis_round_trips() {
    common::prop_basis_round_trip(64).unwrap();
}

#[test]
fn parallel_matches_sequential() {
    common::prop_parallel_determinism(8).unwrap();
}

#[test]
fn decisions_ignore_prior_scale() {
    common::prop_argmax_scale_invariance(16).unwrap();
}

#[test]
fn stabilizers_do_not_change_decisions() {
    common::prop_stabilizer_covariance(16).unwrap();
}

#[test]
fn engine_matches_enumeration_for_builtin_cells() {
    for name in ["cell22", "cell22x", "cell211", "cell221"] {
        let worst = common::cell_exactness(name, 5, 7);
        assert!(worst <= 1e-12, "{name}: {worst}");
    }
}
