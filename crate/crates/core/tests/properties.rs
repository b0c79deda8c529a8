mod common;

use common::*;
use dm_core::centroid::{
    avg_ensemble_distance, decomposition_check, mean_spread_two_pass, sample_medoid,
};
use dm_core::districting::enumerate_valid_plans;
use dm_core::kcut::{affine_constant, build_instance, cut_objective};
use dm_core::metric::{distance, distance_fast, distance_sq, ExplicitTheta};
use dm_core::{CentroidMatrix, CentroidScorer, Plan, Theta, ThetaKind, ValidityConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kinds(rate: f64) -> Vec<ThetaKind> {
    vec![
        ThetaKind::Unweighted,
        ThetaKind::PopulationProduct,
        ThetaKind::PathDecay { rate },
    ]
}

/// A random grid with up to 30 units and a handful of labelings on it.
fn instance() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 2usize..=5, 1usize..=6, 1usize..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_metric((seed, rows, cols, k) in instance(), rate in 0.05f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_grid(&mut rng, rows, cols);
        let n = g.n();
        let plans: Vec<Plan> = (0..3).map(|_| random_plan(&mut rng, n, k)).collect();
        for kind in kinds(rate) {
            let theta = Theta::new(kind.clone(), &g).unwrap();
            let d = |a: &Plan, b: &Plan| distance(a, b, &theta).unwrap();
            let (a, b, c) = (&plans[0], &plans[1], &plans[2]);
            prop_assert_eq!(d(a, a), 0.0);
            prop_assert_eq!(d(a, b), d(b, a));
            prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-9 * (1.0 + d(a, c)));
            prop_assert_eq!(d(a, b) > 0.0, !a.same_partition(b));
            let t = theta_table(&g, &kind);
            prop_assert!(rel_close(d(a, b), oracle_distance(a, b, &t), 1e-12));
        }
    }

    #[test]
    fn relabeling_changes_nothing((seed, rows, cols, k) in instance(), shift in 1u32..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_grid(&mut rng, rows, cols);
        let a = random_plan(&mut rng, g.n(), k);
        let b = random_plan(&mut rng, g.n(), k);
        // Reverse and shift the labels of `a`.
        let kk = a.k() as u32;
        let relabeled: Vec<u32> = a.assignment().iter().map(|&l| (kk - 1 - l) * 7 + shift).collect();
        let a2 = Plan::from_labels(&relabeled).unwrap();
        prop_assert!(a2.same_partition(&a));
        for kind in kinds(0.5) {
            let theta = Theta::new(kind, &g).unwrap();
            prop_assert_eq!(distance(&a, &b, &theta).unwrap(), distance(&a2, &b, &theta).unwrap());
        }
    }

    #[test]
    fn contingency_route_matches_pairwise((seed, rows, cols, k) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_grid(&mut rng, rows, cols);
        let a = random_plan(&mut rng, g.n(), k);
        let b = random_plan(&mut rng, g.n(), k);
        for kind in [ThetaKind::Unweighted, ThetaKind::PopulationProduct] {
            let theta = Theta::new(kind, &g).unwrap();
            let slow = distance(&a, &b, &theta).unwrap();
            let fast = distance_fast(&a, &b, &theta).unwrap();
            prop_assert!(rel_close(slow, fast, 1e-12), "{} vs {}", slow, fast);
        }
        let decay = Theta::new(ThetaKind::PathDecay { rate: 1.0 }, &g).unwrap();
        prop_assert!(distance_fast(&a, &b, &decay).is_err());
    }

    #[test]
    fn squared_distance_agrees_on_plans((seed, rows, cols, k) in instance(), rate in 0.05f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_grid(&mut rng, rows, cols);
        let a = random_plan(&mut rng, g.n(), k);
        let b = random_plan(&mut rng, g.n(), k);
        for kind in kinds(rate) {
            let theta = Theta::new(kind, &g).unwrap();
            let d = distance(&a, &b, &theta).unwrap();
            let d2 = distance_sq(&a, &b, &theta).unwrap();
            prop_assert!(rel_close(d, d2, 1e-12));
        }
    }

    #[test]
    fn shards_merge_to_the_sequential_centroid(seed in any::<u64>(), t in 1usize..60, n in 2usize..25, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plans: Vec<Plan> = (0..t).map(|_| random_plan(&mut rng, n, k)).collect();
        let mut whole = CentroidMatrix::new(n);
        for p in &plans {
            whole.accumulate(p).unwrap();
        }
        let chunk = t.div_ceil(4);
        let shards: Vec<CentroidMatrix> = (0..4)
            .map(|s| {
                let mut acc = CentroidMatrix::new(n);
                for p in plans.iter().skip(s * chunk).take(chunk) {
                    acc.accumulate(p).unwrap();
                }
                acc
            })
            .collect();
        let left = CentroidMatrix::merge(
            &CentroidMatrix::merge(&shards[0], &shards[1]).unwrap(),
            &CentroidMatrix::merge(&shards[2], &shards[3]).unwrap(),
        ).unwrap();
        let mut right = shards[3].clone();
        for s in shards[..3].iter().rev() {
            right = CentroidMatrix::merge(s, &right).unwrap();
        }
        prop_assert_eq!(&left, &whole);
        prop_assert_eq!(&right, &whole);

        let freq = oracle_centroid(&plans);
        for j in 1..n {
            for i in 0..j {
                let got = whole.count(i, j) as f64 / whole.samples() as f64;
                prop_assert!((got - freq[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decomposition_and_average_distance((seed, rows, cols, k) in instance(), t in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_grid(&mut rng, rows, cols);
        let n = g.n();
        let plans: Vec<Plan> = (0..t).map(|_| random_plan(&mut rng, n, k)).collect();
        let probe = random_plan(&mut rng, n, k);
        let mut acc = CentroidMatrix::new(n);
        for p in &plans {
            acc.accumulate(p).unwrap();
        }
        for kind in kinds(0.8) {
            let theta = Theta::new(kind.clone(), &g).unwrap();
            let check = decomposition_check(&plans, &acc, &probe, &theta).unwrap();
            prop_assert!(check.residual <= 1e-9, "{:?}", check);

            let scorer = CentroidScorer::new(&acc, &theta).unwrap();
            let tab = theta_table(&g, &kind);
            let c = oracle_centroid(&plans);
            let (fast, slow) = (scorer.d2(&probe).unwrap(), oracle_d2(&probe, &c, &tab));
            prop_assert!((fast - slow).abs() <= 1e-10 * (1.0 + scorer.self_mass()), "{} vs {}", fast, slow);
            let spread = scorer.mean_spread();
            let two_pass = mean_spread_two_pass(&plans, &scorer).unwrap();
            prop_assert!((spread - two_pass).abs() <= 1e-9 * (1.0 + spread));
            let avg = avg_ensemble_distance(&probe, &scorer, spread).unwrap();
            let direct: f64 = plans.iter().map(|p| oracle_distance(&probe, p, &tab)).sum::<f64>() / t as f64;
            prop_assert!((avg - direct).abs() <= 1e-9 * (1.0 + direct));
        }
    }

    #[test]
    fn linear_medoid_matches_quadratic_medoid(seed in any::<u64>(), t in 1usize..30, k in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_grid(&mut rng, 3, 4);
        let plans: Vec<Plan> = (0..t).map(|_| random_plan(&mut rng, g.n(), k)).collect();
        let mut acc = CentroidMatrix::new(g.n());
        for p in &plans {
            acc.accumulate(p).unwrap();
        }
        for kind in [ThetaKind::Unweighted, ThetaKind::PopulationProduct] {
            let theta = Theta::new(kind.clone(), &g).unwrap();
            let m = sample_medoid(&plans, &acc, &theta).unwrap();
            let brute = brute_medoid_set(&plans, &theta_table(&g, &kind), 1e-9);
            prop_assert!(brute.contains(&m.index), "{} not in {:?}", m.index, brute);
        }
    }

    #[test]
    fn cut_objective_is_affine_in_centroid_distance(seed in any::<u64>(), t in 1usize..20, rate in 0.1f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_grid(&mut rng, 2, 4);
        let cfg = ValidityConfig::with_tolerance(0.5);
        let valid = enumerate_valid_plans(&g, 2, &cfg).unwrap();
        prop_assume!(!valid.is_empty());
        let mut acc = CentroidMatrix::new(g.n());
        for _ in 0..t {
            acc.accumulate(&valid[rng.random_range(0..valid.len())]).unwrap();
        }
        let explicit = ExplicitTheta::from_fn(g.n(), |i, j| 0.5 + ((i * 7 + j * 3) % 5) as f64).unwrap();
        let mut all = kinds(rate);
        all.push(ThetaKind::Explicit(explicit));
        for kind in all {
            let theta = Theta::new(kind, &g).unwrap();
            let inst = build_instance(&acc, &theta, 2).unwrap();
            let scorer = CentroidScorer::new(&acc, &theta).unwrap();
            let constant = affine_constant(&acc, &theta).unwrap();
            for p in &valid {
                let s = scorer.d2(p).unwrap() + 2.0 * cut_objective(&inst, p).unwrap();
                prop_assert!((s - constant).abs() <= 1e-9 * constant.abs().max(1.0), "{} vs {}", s, constant);
            }
        }
    }
}
