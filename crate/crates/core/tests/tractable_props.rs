use kakeya_core::fixtures;
use kakeya_core::tractable::{ball_condition_check, cone_entry, IfsSystemD, MatD, VecD, ENTRY_MARGIN};
use proptest::prelude::*;

fn positive_square(d: usize) -> impl Strategy<Value = MatD> {
    prop::collection::vec(0.01..1.0f64, d * d).prop_map(move |v| MatD::from_row_slice(d, d, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn positive_matrices_pull_vectors_into_the_cone(
        (a, w) in (3usize..=4).prop_flat_map(|d| (positive_square(d), prop::collection::vec(-1.0..1.0f64, d)))
    ) {
        let w = VecD::from_column_slice(&w);
        match cone_entry(&a, &w) {
            Ok(r) => {
                prop_assert!(r.perron_value > r.subdominant_modulus);
                prop_assert!(r.trajectory_margins[r.n0..].iter().all(|&m| m >= ENTRY_MARGIN));
                prop_assert!(r.n0 == 0 || r.trajectory_margins[r.n0 - 1] < ENTRY_MARGIN);
                prop_assert_eq!(r.hyperplane_basis.len(), a.nrows() - 1);
            }
            Err(kakeya_core::Error::NearHyperplane) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

#[test]
fn ball_condition_is_monotone_in_delta() {
    let sys = IfsSystemD::from(&fixtures::four_corners(0.3));
    let scales = [0.5, 0.1, 0.03];
    let reports: Vec<_> = [0.05, 0.1, 0.2, 0.3, 0.5]
        .iter()
        .map(|&d| ball_condition_check(&sys, 1.0, d, &scales, 6, 11, 1 << 22).unwrap())
        .collect();
    for w in reports.windows(2) {
        assert!(w[0].pass || !w[1].pass);
        assert_eq!(w[0].min_delta_prime, w[1].min_delta_prime);
    }
}
