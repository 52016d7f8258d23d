//! Property tests across modules.

use parawolff::capacity::{capacity_frank_wolfe, clarkson_check, FwOptions};
use parawolff::geometry::{dilate, parabolic_distance, parabolic_norm, ParabolicParams, SpaceTimePoint};
use parawolff::io::{read_measure, write_measure};
use parawolff::kernels::{Kernel, RieszKernel};
use parawolff::lattice::ParabolicLattice;
use parawolff::measure::DiscreteMeasure;
use parawolff::thinness::{verdict, Verdict};
use parawolff::wolff::{dyadic_energy_sum, dyadic_wolff_integral, regularized_energy, WolffContext};
use proptest::prelude::*;

fn point(d: usize) -> impl Strategy<Value = SpaceTimePoint> {
    (prop::collection::vec(-1.0..1.0f64, d), -1.0..0.0f64).prop_map(|(x, t)| SpaceTimePoint::new(x, t))
}

fn measure(d: usize, max: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((point(d), 0.01..2.0f64), 1..max)
        .prop_map(move |atoms| DiscreteMeasure::from_atoms(d, atoms).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_homogeneous(a in point(2), b in point(2), lambda in 0.1..10.0f64) {
        let d0 = parabolic_distance(&a, &b).unwrap();
        let d1 = parabolic_distance(&dilate(&a, lambda).unwrap(), &dilate(&b, lambda).unwrap()).unwrap();
        prop_assert!((d1 - lambda * d0).abs() <= 1e-12 * (1.0 + d1));
        prop_assert_eq!(d0, parabolic_distance(&b, &a).unwrap());
        let n0 = parabolic_norm(&a);
        prop_assert!((parabolic_norm(&dilate(&a, lambda).unwrap()) - lambda * n0).abs() <= 1e-12 * (1.0 + lambda * n0));
    }

    #[test]
    fn riesz_kernel_scales(x in prop::collection::vec(-2.0..2.0f64, 2), t in 0.01..2.0f64,
                           alpha in 0.2..3.5f64, lambda in 0.2..5.0f64) {
        let k = RieszKernel::new(ParabolicParams::new(2, alpha, 1.5).unwrap());
        let base = k.log_eval(&x, t);
        let xs: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        let scaled = k.log_eval(&xs, lambda * lambda * t) + (4.0 - alpha) * lambda.ln();
        prop_assert!((scaled - base).abs() < 1e-10);
    }

    #[test]
    fn lattice_parents_contain_children(z in point(2), k in 1i32..6) {
        let lat = ParabolicLattice::unit(2, 6).unwrap();
        let fine = lat.locate(&z, k + 1).unwrap();
        let coarse = lat.locate(&z, k).unwrap();
        prop_assert!(fine.contains(&z) && coarse.contains(&z));
        prop_assert_eq!(fine.parent().key(), coarse.key());
        prop_assert!(coarse.children_unchecked().iter().any(|c| c.key() == fine.key()));
    }

    #[test]
    fn wolff_integral_is_energy_sum(mu in measure(1, 12), q in 1.3..4.0f64) {
        let ctx = WolffContext::unit(ParabolicParams::new(1, 0.5, q).unwrap(), 5).unwrap();
        let a = dyadic_wolff_integral(&ctx, &mu);
        let b = dyadic_energy_sum(&ctx, &mu);
        prop_assert!((a - b).abs() <= 1e-12 * b, "{} {}", a, b);
    }

    #[test]
    fn energy_is_homogeneous_in_mass(mu in measure(2, 8), c in 0.1..10.0f64) {
        let ctx = WolffContext::unit(ParabolicParams::new(2, 1.0, 2.5).unwrap(), 4).unwrap();
        let e = regularized_energy(&ctx, &mu);
        let ec = regularized_energy(&ctx, &mu.scaled(c).unwrap());
        let qc = ctx.params.q_conj;
        prop_assert!((ec - c.powf(qc) * e).abs() <= 1e-10 * ec);
    }

    #[test]
    fn measure_text_round_trips(mu in measure(3, 10)) {
        let back = read_measure(&write_measure(&mu), "p", None).unwrap();
        prop_assert_eq!(back, mu);
    }

    #[test]
    fn verdict_ignores_positive_scaling(terms in prop::collection::vec(1e-3..1.0f64, 3..12), c in 1e-2..1e2f64) {
        let scaled: Vec<f64> = terms.iter().map(|t| t * c).collect();
        prop_assert_eq!(verdict(&terms), verdict(&scaled));
    }

    #[test]
    fn clarkson_holds(a in -1e3..1e3f64, b in -1e3..1e3f64, p in 1.01..8.0f64) {
        prop_assert!(clarkson_check(a, b, p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn capacity_is_monotone_and_subadditive(pts in prop::collection::vec(point(1), 2..10), split in 1usize..9) {
        let ctx = WolffContext::unit(ParabolicParams::new(1, 1.0, 2.0).unwrap(), 5).unwrap();
        let opts = FwOptions::default();
        let split = split.min(pts.len() - 1);
        let all = capacity_frank_wolfe(&pts, &ctx, &opts).unwrap().value;
        let left = capacity_frank_wolfe(&pts[..split], &ctx, &opts).unwrap().value;
        let right = capacity_frank_wolfe(&pts[split..], &ctx, &opts).unwrap().value;
        let slack = 1.0 + 1e-3;
        prop_assert!(left <= all * slack && right <= all * slack);
        prop_assert!(all <= (left + right) * slack, "{} {} {}", all, left, right);
    }
}

#[test]
fn constant_series_diverges_and_geometric_converges() {
    assert_eq!(verdict(&[0.2; 9]), Verdict::Divergent);
    let g: Vec<f64> = (0..9).map(|j| 0.25f64.powi(j)).collect();
    assert_eq!(verdict(&g), Verdict::Convergent);
}
