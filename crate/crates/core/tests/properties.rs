use std::collections::BTreeSet;

use confrank::curvefit::{convergence_point, ConvergenceRule, CurveFamily, FamilyFit};
use confrank::dataset::{split, true_ranks};
use confrank::metrics::{correlation, mean_rank_difference, mmre, CorrelationKind};
use confrank::stats::a12;
use confrank::{ConfigurationTable, FeatureVector, RegressionTree, SplitFractions, TreeParams};
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=4, 1usize..=16).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..4, d), n),
            prop::collection::vec(-100i32..100, n),
        )
            .prop_map(|(xs, ys)| {
                (
                    xs.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect(),
                    ys.into_iter().map(f64::from).collect(),
                )
            })
    })
}

fn fvs(xs: &[Vec<f64>]) -> Vec<FeatureVector> {
    xs.iter().map(|r| FeatureVector(r.clone())).collect()
}

fn table(n: usize, seed: u64) -> ConfigurationTable {
    let rows = (0..n).map(|i| FeatureVector(vec![i as f64])).collect();
    let perf = (0..n).map(|i| ((i as u64 * 31 + seed) % 7) as f64 + 1.0).collect();
    ConfigurationTable::new("t", vec!["x".into()], rows, perf).unwrap()
}

proptest! {
    #[test]
    fn predictions_stay_within_target_range((xs, ys) in dataset(), probe in prop::collection::vec(0u8..4, 4)) {
        let tree = RegressionTree::train(&fvs(&xs), &ys, TreeParams::default()).unwrap();
        let x = FeatureVector(probe[..xs[0].len()].iter().map(|&v| f64::from(v)).collect());
        let p = tree.predict(&x).unwrap();
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
    }

    #[test]
    fn training_order_does_not_matter((xs, ys) in dataset(), seed in any::<u64>()) {
        let a = RegressionTree::train(&fvs(&xs), &ys, TreeParams::default()).unwrap();
        let mut order: Vec<usize> = (0..xs.len()).collect();
        // deterministic shuffle driven by the seed
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let xs2: Vec<Vec<f64>> = order.iter().map(|&i| xs[i].clone()).collect();
        let ys2: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
        let b = RegressionTree::train(&fvs(&xs2), &ys2, TreeParams::default()).unwrap();
        prop_assert_eq!(a.dump(), b.dump());
    }

    #[test]
    fn affine_targets_give_affine_predictions((xs, ys) in dataset(), k in 0i32..4, shift in -50i32..50) {
        let scale = f64::from(1 << k);
        let ys2: Vec<f64> = ys.iter().map(|y| y * scale + f64::from(shift)).collect();
        let a = RegressionTree::train(&fvs(&xs), &ys, TreeParams::default()).unwrap();
        let b = RegressionTree::train(&fvs(&xs), &ys2, TreeParams::default()).unwrap();
        for x in fvs(&xs) {
            let expected = a.predict(&x).unwrap() * scale + f64::from(shift);
            prop_assert!((b.predict(&x).unwrap() - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn split_partitions_rows(n in 5usize..200, seed in any::<u64>()) {
        let t = table(n, seed);
        let s = split(&t, SplitFractions::default(), seed).unwrap();
        let mut all: Vec<usize> = s.training_pool.iter().chain(&s.testing_pool).chain(&s.validation_pool).copied().collect();
        prop_assert_eq!(all.len(), n);
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(s.training_pool.len(), (n as f64 * 0.4 + 1e-9).floor() as usize);
        prop_assert_eq!(s.testing_pool.len(), (n as f64 * 0.2 + 1e-9).floor() as usize);
    }

    #[test]
    fn true_ranks_are_a_bijection(n in 5usize..100, seed in any::<u64>()) {
        let t = table(n, seed);
        let s = split(&t, SplitFractions::default(), seed).unwrap();
        let ranks = true_ranks(&t, &s.validation_pool).unwrap();
        let values: BTreeSet<usize> = ranks.values().copied().collect();
        prop_assert_eq!(values, (1..=s.validation_pool.len()).collect::<BTreeSet<_>>());
        for (&i, &ri) in &ranks {
            for (&j, &rj) in &ranks {
                if t.measure(i) < t.measure(j) {
                    prop_assert!(ri < rj);
                }
            }
        }
    }

    #[test]
    fn mmre_is_scale_invariant(pairs in prop::collection::vec((1.0f64..1e3, 1.0f64..1e3), 1..30), c in 0.01f64..100.0) {
        let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
        let as_: Vec<f64> = a.iter().map(|v| v * c).collect();
        let m1 = mmre(&p, &a).unwrap();
        let m2 = mmre(&ps, &as_).unwrap();
        prop_assert!(m1 >= 0.0);
        prop_assert!((m1 - m2).abs() <= 1e-9 * (1.0 + m1));
    }

    #[test]
    fn rank_measures_ignore_monotone_transforms(pairs in prop::collection::vec((-50i32..50, -50i32..50), 2..30)) {
        let p: Vec<f64> = pairs.iter().map(|x| f64::from(x.0)).collect();
        let a: Vec<f64> = pairs.iter().map(|x| f64::from(x.1)).collect();
        let warped: Vec<f64> = p.iter().map(|v| (v / 10.0).exp() * 3.0 + 1.0).collect();
        prop_assert_eq!(mean_rank_difference(&p, &a).unwrap(), mean_rank_difference(&warped, &a).unwrap());
        prop_assert_eq!(mean_rank_difference(&a, &a).unwrap(), 0.0);
        let r1 = correlation(&p, &a, CorrelationKind::Spearman);
        let r2 = correlation(&warped, &a, CorrelationKind::Spearman);
        match (r1, r2) {
            (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12 && (-1.0..=1.0).contains(&x)),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "definedness changed"),
        }
    }

    #[test]
    fn a12_is_complementary(xs in prop::collection::vec(-20i32..20, 1..20), ys in prop::collection::vec(-20i32..20, 1..20)) {
        let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
        let ys: Vec<f64> = ys.into_iter().map(f64::from).collect();
        let a = a12(&xs, &ys).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a + a12(&ys, &xs).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smaller_epsilon_never_converges_earlier(
        fi in 0usize..4, a in 1.0f64..100.0, b in 0.01f64..20.0, start in 1usize..50,
        e1 in 0.001f64..5.0, e2 in 0.001f64..5.0,
    ) {
        let family = CurveFamily::ALL[fi];
        // keep every family bounded away from overflow
        let b = match family {
            CurveFamily::PowerLaw => b / 40.0,
            CurveFamily::Exponential => -b / 40.0,
            _ => b,
        };
        let fit = FamilyFit { family, a, b, rss: 0.0 };
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let rule = |epsilon| ConvergenceRule { epsilon, cap: 5000 };
        let n_lo = convergence_point(&fit, start, rule(lo));
        let n_hi = convergence_point(&fit, start, rule(hi));
        prop_assert!(n_lo >= n_hi);
        prop_assert!(n_hi >= start);
    }
}
