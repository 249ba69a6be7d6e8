use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sliprelax::energy::{convexity_check, curl_bounds_check, upper_factor};
use sliprelax::fields::{curl_norm, Boundary, CurlMode, Grid3, PatchFrame, ScalarField3};
use sliprelax::linalg::{dot, norm, sub};
use sliprelax::slipsys::SlipPatch;
use sliprelax::smoothing::{mollify, truncate, Extension, KernelProfile, MollifierKernel};
use sliprelax::verify::{random_field, random_system, random_unit};

fn tv(f: &ScalarField3) -> f64 {
    curl_norm(&[f], CurlMode::SingleSum, Boundary::Replicate).unwrap()
}

fn grid(n: [usize; 3]) -> Grid3 {
    Grid3::new([1.0, 1.3, 0.8], n, [0.0; 3]).unwrap()
}

fn field(n: [usize; 3]) -> impl Strategy<Value = ScalarField3> {
    prop::collection::vec(-2.0f64..2.0, n[0] * n[1] * n[2])
        .prop_map(move |v| ScalarField3::new(grid(n), PatchFrame::identity(), v).unwrap())
}

fn slack(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn truncation_never_raises_tv(f in field([4, 9, 7]), level in 0.05f64..2.5) {
        let t = truncate(&f, level).unwrap();
        prop_assert!(tv(&t) <= tv(&f) + slack(tv(&f)));
        prop_assert!(t.max_abs() <= level);
    }

    #[test]
    fn reflected_mollification_never_raises_tv(f in field([5, 12, 10]), cells in 2.0f64..3.5) {
        let g = f.grid().clone();
        let k = MollifierKernel::new(cells * g.min_spacing(), &g, KernelProfile::default()).unwrap();
        let m = mollify(&f, &k, Extension::Reflect([[true; 2]; 3])).unwrap();
        prop_assert!(tv(&m) <= tv(&f) + slack(tv(&f)), "{} > {}", tv(&m), tv(&f));
    }

    #[test]
    fn zero_extended_mollification_keeps_the_integral(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Grid3::unit(20).unwrap();
        let raw = random_field(&mut rng, &g, PatchFrame::identity(), true).unwrap();
        // Keep the support clear of the faces by more than the kernel reach.
        let f = ScalarField3::from_fn(g.clone(), PatchFrame::identity(), |p| {
            if p.iter().all(|x| (0.3..0.7).contains(x)) { 1.0 } else { 0.0 }
        })
        .unwrap();
        let f = f.with_values(f.values().iter().zip(raw.values()).map(|(a, b)| a * b).collect()).unwrap();
        let k = MollifierKernel::new(2.0 * g.min_spacing(), &g, KernelProfile::default()).unwrap();
        let m = mollify(&f, &k, Extension::Zero).unwrap();
        prop_assert!((m.integral() - f.integral()).abs() <= 1e-12 * f.l1_norm().max(1.0));
        prop_assert!(tv(&m) <= tv(&f) + slack(tv(&f)));
    }

    #[test]
    fn curl_bounds_hold_for_random_systems(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let system = random_system(&mut rng, 10f64.to_radians()).unwrap();
        let g = Grid3::new([0.5, 1.0, 1.0], [4, 24, 24], [0.0; 3]).unwrap();
        let frame = system.slip_frame();
        let c1 = random_field(&mut rng, &g, frame.clone(), true).unwrap();
        let c2 = random_field(&mut rng, &g, frame.clone(), false).unwrap();
        let patch = SlipPatch::new(0, ScalarField3::constant(g, frame, 1.0), c1, c2).unwrap();
        let r = curl_bounds_check(&patch, &system, Boundary::Replicate).unwrap();
        prop_assert!(r.passed(), "{r:?}");
        let f = upper_factor(&system);
        prop_assert!((1.0 - 1e-12..=std::f64::consts::SQRT_2 + 1e-12).contains(&f));
    }

    #[test]
    fn laminated_terms_are_convex(seed in any::<u64>(), alpha in prop_oneof![Just(1.0), Just(1.5), Just(2.0)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Grid3::unit(6).unwrap();
        let r = convexity_check(4, alpha, &mut rng, |rng| {
            let f = |rng: &mut ChaCha8Rng, rough| random_field(rng, &g, PatchFrame::identity(), rough);
            Ok(([f(rng, true)?, f(rng, false)?], [f(rng, false)?, f(rng, true)?]))
        })
        .unwrap();
        prop_assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn in_plane_slip_round_trips(seed in any::<u64>(), c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let system = random_system(&mut rng, 10f64.to_radians()).unwrap();
        let s = system.recompose(c1, c2);
        prop_assert!(dot(s, system.m()).abs() <= 1e-12 * norm(s).max(1.0));
        let (d1, d2) = system.decompose(s);
        prop_assert!((d1 - c1).abs() <= 1e-9 && (d2 - c2).abs() <= 1e-9);
        let back = system.recompose(d1, d2);
        prop_assert!(norm(sub(back, s)) <= 1e-12 * norm(s).max(1.0));
    }

    #[test]
    fn random_units_are_units(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!((norm(random_unit(&mut rng)) - 1.0).abs() < 1e-12);
    }
}
