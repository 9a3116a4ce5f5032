//! Randomized invariants of the coordinate change and the potentials.

use proptest::prelude::*;
use sads_dirac::potentials::Potentials;
use sads_dirac::{Geometry, SpacetimeParams};

fn params() -> impl Strategy<Value = SpacetimeParams> {
    // m l ranges over (1.05, 6).
    (0.01f64..5.0, 0.2f64..5.0, 1.05f64..6.0)
        .prop_map(|(m, l, ml)| SpacetimeParams::new(m, l, ml / l, 0.1).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tortoise_roundtrip(p in params(), s in -6.0f64..3.0) {
        let g = Geometry::new(p);
        let r = g.r_sads() * (1.0 + 10f64.powf(s));
        let x = g.tortoise_from_radius(r).unwrap();
        prop_assert!(x < 0.0);
        let back = g.radius_from_tortoise(x).unwrap();
        prop_assert!((back - r).abs() <= 1e-9 * r, "r={r} back={back}");
    }

    #[test]
    fn tortoise_is_increasing(p in params(), s in -5.0f64..2.0, ds in 1e-3f64..1.0) {
        let g = Geometry::new(p);
        let r1 = g.r_sads() * (1.0 + 10f64.powf(s));
        let r2 = r1 * (1.0 + ds);
        prop_assert!(g.tortoise_from_radius(r1).unwrap() < g.tortoise_from_radius(r2).unwrap());
    }

    #[test]
    fn potentials_are_positive_and_bounded(p in params(), t in 0.0f64..1.0) {
        let pots = Potentials::new(p);
        let x = pots.x_plus() * (1.0 - t).max(1e-6);
        let v = pots.at(x).unwrap();
        let l = p.ads_radius;
        prop_assert!(v.a > 0.0 && v.b > 0.0);
        // A² = F/r² ≥ 1/l² on [x₊, 0) and A ≤ B/r.
        prop_assert!(v.a2_excess > -1e-14 * v.a * v.a);
        prop_assert!(v.a * v.a >= 1.0 / (l * l) * (1.0 - 1e-12));
        prop_assert!((v.a * v.r - v.b).abs() <= 1e-10 * v.b);
        prop_assert!(v.da < 0.0, "A' = {} at x = {x}", v.da);
    }

    #[test]
    fn turning_point_solves_a_squared(p in params(), u in 0.05f64..0.95) {
        let pots = Potentials::new(p);
        let l = p.ads_radius;
        let e = 1.0 / (l * l) + u * (pots.a2_at_cutoff() - 1.0 / (l * l));
        let x = pots.turning_point(e).unwrap();
        prop_assert!(x > pots.x_plus() && x < 0.0);
        let a = pots.a(x).unwrap();
        prop_assert!((a * a - e).abs() <= 1e-9 * e);
    }
}
