//! Spanning-tree recombination (ReCom) Markov chain.
//!
//! One step picks a uniformly random cut edge, merges the two districts it
//! joins, draws a uniform spanning tree of the merged region with Wilson's
//! algorithm and, if some tree edge splits the region into two sides that
//! both meet the population tolerance, cuts one such edge chosen uniformly.
//! Only accepted transitions advance the ensemble; rejected proposals are
//! never re-emitted as duplicate states.
//!
//! The same step drives the medoid hill-climb (accept only moves closer to a
//! centroid) and the outlier planter (accept only moves away from it).
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::centroid::{CentroidMatrix, CentroidScorer, CoMembership};
use crate::districting::{is_valid, Plan, Validity, ValidityConfig};
use crate::error::{Error, Result};
use crate::graph::DualGraph;
use crate::tree::{self, Subgraph};

/// Consecutive rejections after which a sampling run gives up.
pub const STALL_LIMIT: u64 = 10_000;

/// Spanning trees drawn for one proposal before it is rejected.
pub const TREE_ATTEMPTS: usize = 8;

/// Default number of initial accepted states discarded by [`run_chain`].
pub const DEFAULT_BURN_IN: u64 = 2_000;

/// Anything that scores a plan; the hill-climbing rules compare scores.
pub trait PlanScore: Sync {
    fn score(&self, plan: &Plan) -> f64;
}

impl<C: CoMembership + Sync + ?Sized> PlanScore for CentroidScorer<'_, C> {
    fn score(&self, plan: &Plan) -> f64 {
        self.d2_unchecked(plan)
    }
}

#[derive(Clone, Copy)]
pub enum AcceptRule<'a> {
    Any,
    /// Accept only strictly smaller scores.
    CloserToCentroid(&'a dyn PlanScore),
    /// Accept only strictly larger scores.
    FartherFromCentroid(&'a dyn PlanScore),
}

impl<'a> AcceptRule<'a> {
    fn scorer(&self) -> Option<&'a dyn PlanScore> {
        match *self {
            AcceptRule::Any => None,
            AcceptRule::CloserToCentroid(s) | AcceptRule::FartherFromCentroid(s) => Some(s),
        }
    }
}

/// Cursor of one chain.
pub struct ChainState<'a> {
    current: Plan,
    step: u64,
    accepted: u64,
    rng: ChaCha8Rng,
    cfg: ValidityConfig,
    accept: AcceptRule<'a>,
    score: Option<f64>,
    pop_lo: f64,
    pop_hi: f64,
    scratch: Vec<usize>,
}

impl<'a> ChainState<'a> {
    /// Starts a chain at `start`, which must be valid under `cfg`.
    pub fn new(
        g: &DualGraph,
        start: Plan,
        cfg: ValidityConfig,
        rng_seed: u64,
        accept: AcceptRule<'a>,
    ) -> Result<Self> {
        cfg.check()?;
        if let Validity::Invalid(rule) = is_valid(&start, g, &cfg)? {
            return Err(Error::InvalidParameter(format!(
                "chain start plan violates the {rule} rule"
            )));
        }
        let (pop_lo, pop_hi) = cfg.pop_bounds(g, start.k());
        let score = accept.scorer().map(|s| s.score(&start));
        Ok(ChainState {
            current: start,
            step: 0,
            accepted: 0,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            cfg,
            accept,
            score,
            pop_lo,
            pop_hi,
            scratch: vec![usize::MAX; g.n()],
        })
    }

    pub fn current(&self) -> &Plan {
        &self.current
    }

    /// Proposals made so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Proposals accepted so far.
    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    /// Score of the current plan under the accept rule, if it has one.
    pub fn score(&self) -> Option<f64> {
        self.score
    }

    pub fn into_plan(self) -> Plan {
        self.current
    }

    /// One recombination proposal. Returns whether it was accepted; the
    /// current plan is valid either way.
    pub fn recom_step(&mut self, g: &DualGraph) -> bool {
        self.step += 1;
        let Some(proposal) = self.propose(g) else {
            return false;
        };
        if let Some(cap) = self.cfg.max_cut_edges {
            let cuts = g
                .edges()
                .iter()
                .filter(|&&(a, b)| !proposal.same_district(a, b))
                .count();
            if cuts > cap {
                return false;
            }
        }
        let new_score = match self.accept {
            AcceptRule::Any => None,
            AcceptRule::CloserToCentroid(s) => {
                let v = s.score(&proposal);
                if !(v < self.score.expect("scored rule")) {
                    return false;
                }
                Some(v)
            }
            AcceptRule::FartherFromCentroid(s) => {
                let v = s.score(&proposal);
                if !(v > self.score.expect("scored rule")) {
                    return false;
                }
                Some(v)
            }
        };
        debug_assert_eq!(
            is_valid(&proposal, g, &self.cfg).ok(),
            Some(Validity::Valid)
        );
        self.current = proposal;
        self.score = new_score;
        self.accepted += 1;
        true
    }

    fn propose(&mut self, g: &DualGraph) -> Option<Plan> {
        let plan = &self.current;
        let cut: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .copied()
            .filter(|&(a, b)| !plan.same_district(a, b))
            .collect();
        if cut.is_empty() {
            return None;
        }
        let (u, v) = cut[self.rng.random_range(0..cut.len())];
        let (da, db) = (plan.district_of(u), plan.district_of(v));
        let nodes: Vec<usize> = (0..plan.n())
            .filter(|&x| {
                let d = plan.district_of(x);
                d == da || d == db
            })
            .collect();
        let sub = Subgraph::induced(g, nodes, &mut self.scratch);
        let (lo, hi) = (self.pop_lo, self.pop_hi);
        let fits = |p: f64| p >= lo && p <= hi;
        for _ in 0..TREE_ATTEMPTS {
            let t = tree::wilson(&sub, &mut self.rng);
            let cuts = t.cuts_where(&sub.pops, |s, r| fits(s) && fits(r));
            if cuts.is_empty() {
                continue;
            }
            let pick = cuts[self.rng.random_range(0..cuts.len())];
            let mask = t.subtree_mask(pick);
            let mut next = plan.clone();
            let assignment = next.assignment_mut();
            for (local, &unit) in sub.nodes.iter().enumerate() {
                assignment[unit] = if mask[local] { da } else { db };
            }
            return Some(next);
        }
        None
    }
}

/// Destination for plans kept by a chain run.
pub trait PlanSink {
    /// `state` is the 1-based index of the accepted state being kept.
    fn keep(&mut self, state: u64, plan: &Plan) -> Result<()>;
}

impl PlanSink for CentroidMatrix {
    fn keep(&mut self, _state: u64, plan: &Plan) -> Result<()> {
        self.accumulate(plan)
    }
}

impl PlanSink for Vec<Plan> {
    fn keep(&mut self, _state: u64, plan: &Plan) -> Result<()> {
        self.push(plan.canonical());
        Ok(())
    }
}

impl<S: PlanSink + ?Sized> PlanSink for &mut S {
    fn keep(&mut self, state: u64, plan: &Plan) -> Result<()> {
        (**self).keep(state, plan)
    }
}

impl<A: PlanSink, B: PlanSink> PlanSink for (A, B) {
    fn keep(&mut self, state: u64, plan: &Plan) -> Result<()> {
        self.0.keep(state, plan)?;
        self.1.keep(state, plan)
    }
}

/// Adapts a closure into a [`PlanSink`].
pub struct FnSink<F>(pub F);

impl<F: FnMut(u64, &Plan) -> Result<()>> PlanSink for FnSink<F> {
    fn keep(&mut self, state: u64, plan: &Plan) -> Result<()> {
        (self.0)(state, plan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainParams {
    /// Accepted transitions to run.
    pub total_steps: u64,
    /// Leading accepted states to discard.
    pub burn_in: u64,
    /// Keep every `thin`-th accepted state after burn-in.
    pub thin: u64,
    pub rng_seed: u64,
}

impl ChainParams {
    pub fn new(total_steps: u64, rng_seed: u64) -> Self {
        ChainParams {
            total_steps,
            burn_in: DEFAULT_BURN_IN,
            thin: 1,
            rng_seed,
        }
    }

    /// `⌈(total − burn_in) / thin⌉`.
    pub fn kept_count(&self) -> u64 {
        (self.total_steps - self.burn_in).div_ceil(self.thin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainRun {
    pub kept: u64,
    pub proposals: u64,
    pub accepted: u64,
}

/// Runs an unbiased chain from `seed` and streams the kept plans into `sink`.
///
/// Accepted state `s` (1-based) is kept when `s > burn_in` and
/// `(s − burn_in − 1)` is a multiple of `thin`.
pub fn run_chain(
    g: &DualGraph,
    cfg: &ValidityConfig,
    seed: Plan,
    params: &ChainParams,
    sink: &mut dyn PlanSink,
) -> Result<ChainRun> {
    if params.burn_in >= params.total_steps {
        return Err(Error::InvalidParameter(format!(
            "burn-in {} must be below total steps {}",
            params.burn_in, params.total_steps
        )));
    }
    if params.thin == 0 {
        return Err(Error::InvalidParameter("thin must be >= 1".into()));
    }
    let mut state = ChainState::new(g, seed, *cfg, params.rng_seed, AcceptRule::Any)?;
    let mut kept = 0;
    let mut rejections = 0;
    while state.accepted() < params.total_steps {
        if state.recom_step(g) {
            rejections = 0;
            let s = state.accepted();
            if s > params.burn_in && (s - params.burn_in - 1).is_multiple_of(params.thin) {
                sink.keep(s, state.current())?;
                kept += 1;
            }
        } else {
            rejections += 1;
            if rejections >= STALL_LIMIT {
                return Err(Error::Stall {
                    rejections,
                    step: state.step(),
                });
            }
        }
    }
    Ok(ChainRun {
        kept,
        proposals: state.step(),
        accepted: state.accepted(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub plan: Plan,
    /// Score of the start, then after every accepted move.
    pub trajectory: Vec<f64>,
    pub proposals: u64,
    /// Stopped early after [`STALL_LIMIT`] consecutive rejections.
    pub converged_by_stall: bool,
}

impl Refinement {
    pub fn initial(&self) -> f64 {
        self.trajectory[0]
    }

    pub fn last(&self) -> f64 {
        *self.trajectory.last().expect("trajectory holds the start")
    }
}

fn climb(
    g: &DualGraph,
    start: Plan,
    cfg: &ValidityConfig,
    rng_seed: u64,
    steps: u64,
    rule: AcceptRule<'_>,
) -> Result<Refinement> {
    let mut state = ChainState::new(g, start, *cfg, rng_seed, rule)?;
    let mut trajectory = vec![state.score().expect("scored rule")];
    let mut rejections = 0;
    let mut converged_by_stall = false;
    while state.step() < steps {
        if state.recom_step(g) {
            rejections = 0;
            trajectory.push(state.score().expect("scored rule"));
        } else {
            rejections += 1;
            if rejections >= STALL_LIMIT {
                converged_by_stall = true;
                break;
            }
        }
    }
    let proposals = state.step();
    Ok(Refinement {
        plan: state.into_plan().canonical(),
        trajectory,
        proposals,
        converged_by_stall,
    })
}

/// Hill-climbs toward the centroid: `steps` proposals, each accepted only
/// if it strictly lowers `d²` to the centroid.
pub fn refine_medoid(
    g: &DualGraph,
    start: Plan,
    scorer: &dyn PlanScore,
    cfg: &ValidityConfig,
    rng_seed: u64,
    steps: u64,
) -> Result<Refinement> {
    climb(
        g,
        start,
        cfg,
        rng_seed,
        steps,
        AcceptRule::CloserToCentroid(scorer),
    )
}

/// Mirror of [`refine_medoid`] that only accepts moves away from the
/// centroid; used to plant synthetic outlier plans.
pub fn plant_outlier(
    g: &DualGraph,
    start: Plan,
    scorer: &dyn PlanScore,
    cfg: &ValidityConfig,
    rng_seed: u64,
    steps: u64,
) -> Result<Refinement> {
    climb(
        g,
        start,
        cfg,
        rng_seed,
        steps,
        AcceptRule::FartherFromCentroid(scorer),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::districting::seed_plan;
    use crate::graph::{make_grid, GridSpec};
    use crate::metric::{Theta, ThetaKind};

    #[test]
    fn same_seed_same_outcome() {
        let g = make_grid(&GridSpec::uniform(6, 6)).unwrap();
        let cfg = ValidityConfig::default();
        let start = seed_plan(&g, 3, &cfg, 1).unwrap();
        let run = |seed| {
            let mut s = ChainState::new(&g, start.clone(), cfg, seed, AcceptRule::Any).unwrap();
            let flags: Vec<bool> = (0..200).map(|_| s.recom_step(&g)).collect();
            (flags, s.into_plan())
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9).1, run(10).1);
    }

    #[test]
    fn single_district_never_moves() {
        let g = make_grid(&GridSpec::uniform(3, 3)).unwrap();
        let start = Plan::new(vec![0; 9], 1).unwrap();
        let mut s = ChainState::new(
            &g,
            start.clone(),
            ValidityConfig::default(),
            0,
            AcceptRule::Any,
        )
        .unwrap();
        for _ in 0..10 {
            assert!(!s.recom_step(&g));
        }
        assert_eq!(s.current(), &start);
        assert_eq!(s.step(), 10);
    }

    #[test]
    fn single_district_chain_stalls() {
        let g = make_grid(&GridSpec::uniform(2, 2)).unwrap();
        let start = Plan::new(vec![0; 4], 1).unwrap();
        let mut sink = Vec::new();
        let err = run_chain(
            &g,
            &ValidityConfig::default(),
            start,
            &ChainParams {
                total_steps: 10,
                burn_in: 0,
                thin: 1,
                rng_seed: 0,
            },
            &mut sink,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Stall {
                rejections: STALL_LIMIT,
                ..
            }
        ));
    }

    #[test]
    fn kept_counts() {
        let g = make_grid(&GridSpec::uniform(4, 4)).unwrap();
        let cfg = ValidityConfig::with_tolerance(0.25);
        let start = seed_plan(&g, 2, &cfg, 0).unwrap();
        for (total, burn, thin) in [(2001, 2000, 1), (2010, 2000, 3), (50, 0, 7), (30, 29, 5)] {
            let params = ChainParams {
                total_steps: total,
                burn_in: burn,
                thin,
                rng_seed: 4,
            };
            let mut states = Vec::new();
            let mut sink = FnSink(|s, _: &Plan| {
                states.push(s);
                Ok(())
            });
            let run = run_chain(&g, &cfg, start.clone(), &params, &mut sink).unwrap();
            assert_eq!(run.kept, params.kept_count());
            assert_eq!(run.accepted, total);
            assert_eq!(states.len() as u64, params.kept_count());
            assert_eq!(states[0], burn + 1);
        }
        let bad = ChainParams {
            total_steps: 10,
            burn_in: 10,
            thin: 1,
            rng_seed: 0,
        };
        assert!(run_chain(&g, &cfg, start, &bad, &mut Vec::new()).is_err());
    }

    #[test]
    fn compactness_cap_is_respected() {
        let g = make_grid(&GridSpec::uniform(6, 6)).unwrap();
        let cfg = ValidityConfig {
            pop_tolerance: 0.1,
            max_cut_edges: Some(14),
        };
        let start = seed_plan(&g, 3, &cfg, 5).unwrap();
        let mut s = ChainState::new(&g, start, cfg, 2, AcceptRule::Any).unwrap();
        for _ in 0..500 {
            s.recom_step(&g);
            assert!(crate::districting::cut_edges(s.current(), &g).unwrap() <= 14);
        }
    }

    #[test]
    fn hill_climbs_move_monotonically() {
        let g = make_grid(&GridSpec::uniform(8, 8)).unwrap();
        let cfg = ValidityConfig::default();
        let theta = Theta::new(ThetaKind::Unweighted, &g).unwrap();
        let mut acc = CentroidMatrix::new(g.n());
        let start = seed_plan(&g, 4, &cfg, 2).unwrap();
        let params = ChainParams {
            total_steps: 600,
            burn_in: 100,
            thin: 1,
            rng_seed: 8,
        };
        run_chain(&g, &cfg, start.clone(), &params, &mut acc).unwrap();
        let scorer = CentroidScorer::new(&acc, &theta).unwrap();

        let closer = refine_medoid(&g, start.clone(), &scorer, &cfg, 1, 400).unwrap();
        assert!(closer.trajectory.windows(2).all(|w| w[1] < w[0]));
        assert!(closer.last() <= closer.initial());
        assert!((scorer.d2(&closer.plan).unwrap() - closer.last()).abs() < 1e-9);

        let farther = plant_outlier(&g, start.clone(), &scorer, &cfg, 1, 400).unwrap();
        assert!(farther.trajectory.windows(2).all(|w| w[1] > w[0]));
        assert!(farther.last() >= farther.initial());

        let idle = plant_outlier(&g, start.clone(), &scorer, &cfg, 1, 0).unwrap();
        assert!(idle.plan.same_partition(&start));
        assert_eq!(idle.trajectory.len(), 1);
    }

    #[test]
    fn refinement_at_a_local_minimum_stays_put() {
        // On the 2x2 grid with zero tolerance the only moves swap between
        // the two balanced plans; a point-mass centroid pins one of them.
        let g = make_grid(&GridSpec::uniform(2, 2)).unwrap();
        let cfg = ValidityConfig::with_tolerance(0.0);
        let theta = Theta::new(ThetaKind::Unweighted, &g).unwrap();
        let target = Plan::from_labels(&[0, 0, 1, 1]).unwrap();
        let mut acc = CentroidMatrix::new(4);
        acc.accumulate(&target).unwrap();
        let scorer = CentroidScorer::new(&acc, &theta).unwrap();
        let r = refine_medoid(&g, target.clone(), &scorer, &cfg, 3, 200).unwrap();
        assert_eq!(r.trajectory, vec![0.0]);
        assert!(r.plan.same_partition(&target));
    }

    #[test]
    fn invalid_start_is_rejected() {
        let g = make_grid(&GridSpec::uniform(2, 2)).unwrap();
        let bad = Plan::from_labels(&[0, 1, 1, 0]).unwrap();
        assert!(ChainState::new(&g, bad, ValidityConfig::default(), 0, AcceptRule::Any).is_err());
    }
}
