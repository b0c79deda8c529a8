use dm_core::chain::{
    plant_outlier, refine_medoid, run_chain, AcceptRule, ChainParams, ChainState, FnSink,
};
use dm_core::districting::{is_valid, seed_plan, Validity};
use dm_core::graph::{make_grid, GridSpec, PopModel};
use dm_core::{CentroidMatrix, CentroidScorer, Plan, Theta, ThetaKind, ValidityConfig};

fn check_all_valid(rows: usize, cols: usize, k: usize, eps: f64, seed: u64) {
    let g = make_grid(&GridSpec::uniform(rows, cols)).unwrap();
    let cfg = ValidityConfig::with_tolerance(eps);
    let start = seed_plan(&g, k, &cfg, seed).unwrap();
    let mut state = ChainState::new(&g, start, cfg, seed, AcceptRule::Any).unwrap();
    let mut accepted = 0;
    for _ in 0..300 {
        if state.recom_step(&g) {
            accepted += 1;
        }
        assert_eq!(
            is_valid(state.current(), &g, &cfg).unwrap(),
            Validity::Valid,
            "{rows}x{cols} k={k} eps={eps} seed={seed}"
        );
    }
    assert!(
        accepted > 0,
        "{rows}x{cols} k={k} eps={eps}: no move accepted"
    );
}

#[test]
fn every_state_is_valid() {
    for k in 2..=6 {
        for eps in [0.01, 0.05, 0.1] {
            check_all_valid(6, 10, k, eps, k as u64 * 31 + (eps * 100.0) as u64);
        }
    }
    check_all_valid(7, 9, 3, 0.05, 2);
}

#[test]
fn uneven_populations_stay_valid() {
    let pops: Vec<f64> = (0..64).map(|i| 1.0 + (i * 37 % 11) as f64).collect();
    let g = make_grid(&GridSpec {
        rows: 8,
        cols: 8,
        pop_model: PopModel::PerCell(pops),
    })
    .unwrap();
    let cfg = ValidityConfig::with_tolerance(0.1);
    let start = seed_plan(&g, 4, &cfg, 7).unwrap();
    let mut kept = 0;
    let mut sink = FnSink(|_, p: &Plan| {
        assert_eq!(is_valid(p, &g, &cfg).unwrap(), Validity::Valid);
        kept += 1;
        Ok(())
    });
    let params = ChainParams {
        total_steps: 500,
        burn_in: 0,
        thin: 1,
        rng_seed: 1,
    };
    run_chain(&g, &cfg, start.clone(), &params, &mut sink).unwrap();
    assert_eq!(kept, 500);

    let theta = Theta::new(ThetaKind::PopulationProduct, &g).unwrap();
    let mut acc = CentroidMatrix::new(g.n());
    run_chain(&g, &cfg, start.clone(), &params, &mut acc).unwrap();
    let scorer = CentroidScorer::new(&acc, &theta).unwrap();
    for r in [
        refine_medoid(&g, start.clone(), &scorer, &cfg, 3, 300).unwrap(),
        plant_outlier(&g, start, &scorer, &cfg, 3, 300).unwrap(),
    ] {
        assert_eq!(is_valid(&r.plan, &g, &cfg).unwrap(), Validity::Valid);
    }
}

#[test]
fn refinement_beats_the_closest_sample() {
    let g = make_grid(&GridSpec::uniform(10, 10)).unwrap();
    let cfg = ValidityConfig::default();
    let theta = Theta::new(ThetaKind::Unweighted, &g).unwrap();
    let start = seed_plan(&g, 4, &cfg, 11).unwrap();
    let params = ChainParams::new(202_000, 11);
    let mut acc = CentroidMatrix::new(g.n());
    run_chain(&g, &cfg, start, &params, &mut acc).unwrap();
    assert_eq!(acc.samples(), 200_000);

    // A second, independent draw supplies the candidate samples.
    let mut sample: Vec<Plan> = Vec::new();
    let small = ChainParams::new(4_000, 12);
    let seed2 = seed_plan(&g, 4, &cfg, 12).unwrap();
    run_chain(&g, &cfg, seed2, &small, &mut sample).unwrap();
    let scorer = CentroidScorer::new(&acc, &theta).unwrap();
    let (best_idx, best_d2) = sample
        .iter()
        .enumerate()
        .map(|(i, p)| (i, scorer.d2(p).unwrap()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();

    let wins = (0..10)
        .filter(|&seed| {
            let r =
                refine_medoid(&g, sample[best_idx].clone(), &scorer, &cfg, seed, 5_000).unwrap();
            assert!(r.last() <= best_d2);
            r.last() < best_d2
        })
        .count();
    assert!(wins >= 9, "refinement improved in only {wins} of 10 runs");
}
