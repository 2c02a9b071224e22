use proptest::prelude::*;

use wfl_core::config::{ConfigPatch, ExperimentConfig};
use wfl_core::fourier::{dirichlet_eval, kernel_diff_abs, KernelOrder};
use wfl_core::homeo::{bracket_at, conditional_chain_sample, DyadicHomeomorphism};
use wfl_core::testfn::{build_counterexample, TestFunction};
use wfl_core::verify::{ks_statistic, EmpiricalDistribution, ExceedanceCurve};
use wfl_core::zeroone::{iterate, make_multiplicative, monotonicity_check, random_monotone, GridBivariate};
use wfl_core::RandomSource;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_homeomorphism_is_monotone_with_fixed_ends(seed in any::<u64>(), depth in 1u32..14) {
        let phi = DyadicHomeomorphism::sample(depth, &RandomSource::new(seed)).unwrap();
        let v = phi.values();
        prop_assert_eq!(v.len(), (1usize << depth) + 1);
        prop_assert_eq!(v[0], 0.0);
        prop_assert_eq!(v[v.len() - 1], 1.0);
        prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn refinement_keeps_coarse_values(seed in any::<u64>(), depth in 1u32..10, extra in 1u32..5) {
        let src = RandomSource::new(seed);
        let coarse = DyadicHomeomorphism::sample(depth, &src).unwrap();
        let fine = coarse.refine(extra, &src).unwrap();
        let direct = DyadicHomeomorphism::sample(depth + extra, &src).unwrap();
        prop_assert_eq!(fine.values(), direct.values());
        let stride = 1usize << extra;
        for (k, &v) in coarse.values().iter().enumerate() {
            prop_assert_eq!(fine.values()[k * stride], v);
        }
    }

    #[test]
    fn lazy_bracket_matches_full_sample(seed in any::<u64>(), depth in 1u32..12, x in 0.0f64..1.0) {
        let src = RandomSource::new(seed);
        let phi = DyadicHomeomorphism::sample(depth, &src).unwrap();
        let b = bracket_at(x, depth, &src);
        prop_assert_eq!(b.lo, phi.values()[b.cell as usize]);
        prop_assert_eq!(b.hi, phi.values()[b.cell as usize + 1]);
        prop_assert_eq!(b.interpolate(x), phi.evaluate(x));
    }

    #[test]
    fn invert_undoes_evaluate(seed in any::<u64>(), x in 0.0f64..=1.0) {
        let phi = DyadicHomeomorphism::sample(12, &RandomSource::new(seed)).unwrap();
        prop_assume!(phi.is_strictly_increasing());
        let back = phi.invert(phi.evaluate(x));
        prop_assert!((back - x).abs() < 1e-9, "x = {}, back = {}", x, back);
    }

    #[test]
    fn conditional_chain_starts_at_the_condition(seed in any::<u64>(), i in 2usize..6, y in 0.01f64..0.99) {
        let chain = conditional_chain_sample(i, y, &RandomSource::new(seed)).unwrap();
        prop_assert_eq!(chain.at_level(i), y);
        let v = chain.values();
        prop_assert!(v.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(v.iter().all(|&c| c >= y && c <= 1.0));
    }

    #[test]
    fn dirichlet_kernel_is_even_periodic_and_bounded(n in 0u32..2000, x in -2.0f64..2.0) {
        let d = dirichlet_eval(KernelOrder(n), x);
        let bound = 2.0 * f64::from(n) + 1.0;
        prop_assert!(d.abs() <= bound * (1.0 + 1e-12));
        let scale = 1e-9 * bound;
        prop_assert!((d - dirichlet_eval(KernelOrder(n), 1.0 - x)).abs() <= scale);
        prop_assert!((d - dirichlet_eval(KernelOrder(n), x + 1.0)).abs() <= scale);
    }

    #[test]
    fn kernel_difference_is_within_the_linear_bound(a in 0u32..3000, b in 0u32..3000, x in 0.0f64..1.0) {
        let (m1, m2) = if a >= b { (a, b) } else { (b, a) };
        let diff = kernel_diff_abs(m1, m2, x);
        let direct = (dirichlet_eval(KernelOrder(m1), x) - dirichlet_eval(KernelOrder(m2), x)).abs();
        prop_assert!(diff <= std::f64::consts::PI * f64::from(m1 - m2) + 1e-9);
        prop_assert!((diff - direct).abs() <= 1e-7 * (2.0 * f64::from(m1) + 1.0));
    }

    #[test]
    fn iterate_keeps_bounds_and_diagonal(seed in any::<u64>(), m in 2usize..24) {
        let p = random_monotone(m, &RandomSource::new(seed)).unwrap();
        let next = iterate(&p);
        for a in 0..=m {
            prop_assert_eq!(next.get(a, a), 1.0);
            for b in a..=m {
                let v = next.get(a, b);
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn constant_grids_square_far_from_the_diagonal(c in 0.0f64..=1.0) {
        let m = 32;
        let next = iterate(&GridBivariate::constant(m, c).unwrap());
        // k cells average to c^2 + c(1 - c) / k
        let expected = c * c + c * (1.0 - c) / m as f64;
        prop_assert!((next.get(0, m) - expected).abs() < 1e-12);
    }

    #[test]
    fn multiplicative_grids_are_monotone(steps in prop::collection::vec(0.0f64..0.3, 1..30)) {
        let mut q = vec![1.0];
        for s in &steps {
            let last = *q.last().unwrap();
            q.push(last * (-s).exp());
        }
        let p = make_multiplicative(&q).unwrap();
        prop_assert_eq!(monotonicity_check(&p).violations(), 0);
    }

    #[test]
    fn exceedance_curves_never_increase(samples in prop::collection::vec(0.0f64..50.0, 1..300)) {
        let emp = EmpiricalDistribution::new(samples).unwrap();
        prop_assert!(ExceedanceCurve::from_samples(&emp, None).is_non_increasing());
        let ks = [0.5, 3.0, 1.0, 40.0, 10.0];
        prop_assert!(ExceedanceCurve::from_samples(&emp, Some(&ks)).is_non_increasing());
    }

    #[test]
    fn ks_distance_is_a_probability(samples in prop::collection::vec(0.0f64..1.0, 100..400)) {
        let emp = EmpiricalDistribution::new(samples).unwrap();
        let d = ks_statistic(&emp, |x| x).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn counterexample_is_continuous_and_bounded(k in 1u32..5, x in 0.0f64..=1.0) {
        let f = build_counterexample(&[3, 4, 5], k, 0.25).unwrap();
        let v = f.eval(x);
        prop_assert!(v.abs() <= f.sup_norm() + 1e-12);
        let h = 1e-13;
        prop_assert!((f.eval((x + h).min(1.0)) - v).abs() < 1e-6);
    }

    #[test]
    fn test_functions_round_trip_through_json(k in 0i64..50, amp in -5.0f64..5.0, c in -3.0f64..3.0) {
        for f in [TestFunction::sine(k, amp), TestFunction::cosine(k, amp), TestFunction::constant(c)] {
            let text = serde_json::to_string(&f).unwrap();
            prop_assert_eq!(serde_json::from_str::<TestFunction>(&text).unwrap(), f);
        }
    }

    #[test]
    fn config_entries_parse_back(seed in any::<u64>(), depth in 1u32..=26, samples in 1usize..1_000_000) {
        let cfg = ExperimentConfig { seed, depth, samples, ..ExperimentConfig::default() };
        let text: String = cfg.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let mut back = ExperimentConfig::default();
        ConfigPatch::parse(&text).unwrap().apply(&mut back);
        prop_assert_eq!(back, cfg);
    }
}
