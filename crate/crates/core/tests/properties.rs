use ddn_core::fusion::{h_map, intersect_l1, pf_fusion, pm_fusion, FusionMapQuery};
use ddn_core::sim::{direct_majority, gossip, Protocol, Topology};
use ddn_core::{
    binom_cdf, binom_tail_ge, consensus_pf, majority_cdf, multi_loss, sup_single_loss, ButterflyRegion, LinePosition,
    OperatingPoint,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn majority_complementarity(k in 1u64..=200, p in 0.0f64..=1.0) {
        let s = majority_cdf(k, p).unwrap() + majority_cdf(k, 1.0 - p).unwrap();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn consensus_odd_even(k in 1u64..=50, p in 0.0f64..=1.0) {
        let a = consensus_pf(2 * k - 1, p).unwrap();
        let b = consensus_pf(2 * k, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn tail_and_cdf_are_complements(n in 1u64..=300, j in 0i64..=301, p in 0.0f64..=1.0) {
        let s = binom_tail_ge(n, j, p).unwrap() + binom_cdf(j - 1, n, p).unwrap();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn fusion_mirror(n in 1u64..=60, k_raw in 0u64..60, p in 0.0f64..=1.0) {
        let k = k_raw % n;
        // a counting rule's false alarm is the mirrored rule's miss
        let a = pf_fusion(p, n, k).unwrap();
        let b = pm_fusion(p, n, n - 1 - k).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fusion_map_solves_robustness(n in 1u64..=25, k_raw in 0u64..25, p in 0.001f64..0.999) {
        let k = k_raw % n;
        let h = h_map(FusionMapQuery::new(n, k, p).unwrap()).unwrap();
        let a = pf_fusion(p, n, k).unwrap();
        let b = pm_fusion(h, n, k).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300).max(1e-12) + 1e-15, "{} vs {}", a, b);
    }

    #[test]
    fn l1_intersection_inside_butterfly(half in 1u64..=12, k_raw in 0u64..12, theta in 0.01f64..0.49) {
        let n = 2 * half + 1;
        let k = k_raw % (half + 1);
        let hit = intersect_l1(n, k, theta).unwrap();
        let region = ButterflyRegion::new(theta).unwrap();
        prop_assert!(region.contains(hit.point));
        prop_assert!(hit.point.p_f <= theta + 1e-15);
    }

    #[test]
    fn single_loss_bounds_line_positions(theta in 0.01f64..0.49, x in 1.0f64..1e4) {
        let l = multi_loss(1, theta, LinePosition::Finite(x)).unwrap();
        prop_assert!(l >= -1e-15);
        prop_assert!(l <= sup_single_loss(theta).unwrap() + 1e-15);
    }

    #[test]
    fn butterfly_apex_and_corners(theta in 0.01f64..0.49) {
        let region = ButterflyRegion::new(theta).unwrap();
        let apex = OperatingPoint { p_f: theta, p_m: theta };
        let corner = OperatingPoint { p_f: 1.0, p_m: 0.0 };
        let origin = OperatingPoint { p_f: 0.0, p_m: 0.0 };
        prop_assert!(region.contains(apex));
        prop_assert!(region.contains(corner));
        prop_assert!(!region.contains(origin));
    }

    #[test]
    fn ring_consensus_matches_majority(n in 1usize..=16, mask in any::<u32>(), kappa in any::<bool>()) {
        let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let t = Topology::ring(n).unwrap();
        for p in [Protocol::LocalMajority, Protocol::VoteFlooding] {
            let out = gossip(&t, &bits, kappa, n as u32, p);
            prop_assert_eq!(out.decision, direct_majority(&bits, kappa));
        }
    }
}
