use std::f64::consts::TAU;

use carleson_core::dyadic::dyadic_apply;
use carleson_core::geometry::{box_children, mei_cover, Arc, DyadicIndex, Grid};
use carleson_core::measures::{box_mass, build_quadrature, Weight};
use carleson_core::operators::KernelSpec;
use carleson_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> impl Strategy<Value = Grid> {
    prop_oneof![Just(Grid::Standard), Just(Grid::Shifted)]
}

fn disk_point(max_r: f64) -> impl Strategy<Value = Complex64> {
    (0.0..max_r, 0.0..TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn radial_weight() -> impl Strategy<Value = Weight> {
    prop_oneof![Just(Weight::Lebesgue), (0.0f64..3.0).prop_map(Weight::RadialPower)]
}

proptest! {
    #[test]
    fn children_partition_the_parent(g in grid(), level in 0u32..20, pos in any::<u64>()) {
        let parent = DyadicIndex::new(g, level, pos % (1u64 << level)).unwrap();
        let (a, b) = box_children(&parent, 24).unwrap();
        prop_assert_eq!(a.parent(), Some(parent));
        prop_assert_eq!(b.parent(), Some(parent));
        prop_assert!((a.len() + b.len() - parent.len()).abs() < 1e-15);
        prop_assert!(parent.arc().contains_arc(&a.arc()));
        prop_assert!(parent.arc().contains_arc(&b.arc()));
        prop_assert!(!a.arc().contains_angle(b.arc().center()));
    }

    #[test]
    fn containing_boxes_are_nested(g in grid(), level in 0u32..30, theta in 0.0..TAU) {
        let fine = DyadicIndex::containing(g, level + 1, theta);
        let coarse = DyadicIndex::containing(g, level, theta);
        prop_assert_eq!(fine.parent(), Some(coarse));
        prop_assert!(coarse.is_ancestor_of(&fine));
        prop_assert!(fine.arc().contains_angle(theta));
    }

    #[test]
    fn every_arc_has_a_short_cover(start in 0.0..TAU, log_len in -21.0f64..0.0) {
        let arc = Arc::new(start, log_len.exp2()).unwrap();
        let cover = mei_cover(&arc);
        prop_assert!(cover.arc().contains_arc(&arc));
        prop_assert!(cover.len() <= 6.0 * arc.len() * (1.0 + 1e-12));
    }

    #[test]
    fn kernels_are_hermitian(z in disk_point(0.99), w in disk_point(0.99), alpha in 0.1f64..4.0) {
        for spec in [KernelSpec::Dirichlet, KernelSpec::KAlpha { alpha }] {
            let a = spec.eval(z, w);
            let b = spec.eval(w, z).conj();
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn closed_forms_match_their_series(z in disk_point(0.8), w in disk_point(0.8)) {
        let terms = 200;
        let dirichlet = KernelSpec::custom((0..terms).map(|n| 1.0 / (n + 1) as f64).collect()).unwrap();
        let cauchy = KernelSpec::custom(vec![1.0; terms]).unwrap();
        let d = KernelSpec::Dirichlet.eval(z, w);
        let k = KernelSpec::KAlpha { alpha: 1.0 }.eval(z, w);
        prop_assert!((dirichlet.eval(z, w) - d).norm() <= 1e-10);
        prop_assert!((cauchy.eval(z, w) - k).norm() <= 1e-10);
    }

    #[test]
    fn box_mass_is_additive(w in radial_weight(), g in grid(), level in 0u32..12, pos in any::<u64>()) {
        let idx = DyadicIndex::new(g, level, pos % (1u64 << level)).unwrap();
        let (a, b) = box_children(&idx, 24).unwrap();
        let whole = box_mass(&w, &idx.full_box(), None).unwrap();
        let top = box_mass(&w, &idx.top_half(), None).unwrap();
        let parts = box_mass(&w, &a.full_box(), None).unwrap() + box_mass(&w, &b.full_box(), None).unwrap();
        prop_assert!((top - parts).abs() <= 1e-12 * top.max(1e-300));
        prop_assert!(top <= whole);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dyadic_operator_is_monotone(seed in any::<u64>(), alpha in 0.5f64..2.5, g in grid()) {
        let quad = build_quadrature(6, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..quad.len()).map(|_| rng.random::<f64>()).collect();
        let bump: Vec<f64> = f.iter().map(|v| v + rng.random::<f64>()).collect();
        let kf = dyadic_apply(g, alpha, &f, &quad, 6).unwrap();
        let kg = dyadic_apply(g, alpha, &bump, &quad, 6).unwrap();
        prop_assert!(kf.iter().zip(&kg).all(|(a, b)| *a >= 0.0 && a <= b));
    }
}
