//! The population-medoid problem as a constrained max-cut over valid plans.
//!
//! With `s(i,j) = ½θ(i,j)(1 − 2c(i,j))` summed over unordered split pairs,
//! every plan satisfies
//! `d²(plan, c) + 2·cut_objective(plan) = Σ_{i<j} θc² + Σ_{i<j} θ(1 − 2c)`,
//! a constant. Maximizing the cut is therefore the
//! same as minimizing `d²` to the centroid. Only tiny instances are solved,
//! by enumeration.
//!
//! The module also carries a small fixture on which a handful of iid sample
//! plans usually misses the population medoid entirely.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::centroid::{CentroidScorer, CoMembership, PopulationCentroid};
use crate::districting::{enumerate_valid_plans, Plan, ValidityConfig};
use crate::error::{Error, Result};
use crate::graph::{make_grid, DualGraph, GridSpec};
use crate::metric::{distance, Theta, ThetaKind};
use crate::pairs::{pair_count, tri_index, PairwiseSum};

/// Relative tolerance for treating two objective values as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KCutInstance {
    n: usize,
    k: usize,
    /// Packed by [`tri_index`].
    s: Vec<f64>,
}

impl KCutInstance {
    pub fn new(n: usize, k: usize, s: Vec<f64>) -> Result<Self> {
        if s.len() != pair_count(n) {
            return Err(Error::SizeMismatch {
                expected: pair_count(n),
                found: s.len(),
            });
        }
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "k = {k} must lie in 1..={n}"
            )));
        }
        if let Some(bad) = s.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cut weight {bad} is not finite"
            )));
        }
        Ok(KCutInstance { n, k, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `s(i, j)` for `i != j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.s[tri_index(i.min(j), i.max(j))]
    }

    /// `(i, j, s)` for every pair `i < j`, ordered by `(j, i)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (1..self.n).flat_map(move |j| (0..j).map(move |i| (i, j, self.s[tri_index(i, j)])))
    }
}

/// Derives the cut weights from a centroid; pairs outside its support get `½θ`.
pub fn build_instance<C: CoMembership + ?Sized>(
    centroid: &C,
    theta: &Theta,
    k: usize,
) -> Result<KCutInstance> {
    let n = centroid.unit_count();
    theta.check_n(n)?;
    let mut s = Vec::with_capacity(pair_count(n));
    for j in 1..n {
        for i in 0..j {
            s.push(0.5 * theta.weight(i, j) * (1.0 - 2.0 * centroid.value(i, j)));
        }
    }
    KCutInstance::new(n, k, s)
}

/// Sum of `s(i, j)` over unordered pairs placed in different districts.
pub fn cut_objective(inst: &KCutInstance, plan: &Plan) -> Result<f64> {
    plan.check_size(inst.n)?;
    let mut sum = PairwiseSum::default();
    for j in 1..inst.n {
        for i in 0..j {
            if !plan.same_district(i, j) {
                sum.add(inst.s[tri_index(i, j)]);
            }
        }
    }
    Ok(sum.total())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMedoid {
    /// Every valid plan attaining the optimum, in enumeration order.
    pub plans: Vec<Plan>,
    pub objective: f64,
}

/// Indices of the values within [`TIE_TOLERANCE`] of the largest (or smallest) one.
pub(crate) fn best_set(values: &[f64], maximize: bool) -> Vec<usize> {
    let best = values.iter().copied().fold(
        if maximize {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        },
        |a, b| if maximize { a.max(b) } else { a.min(b) },
    );
    let tol = TIE_TOLERANCE * best.abs().max(1.0);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| (v - best).abs() <= tol)
        .map(|(i, _)| i)
        .collect()
}

/// Exact solution by enumerating the valid plans of `g` (at most 16 units).
pub fn exact_population_medoid(
    inst: &KCutInstance,
    g: &DualGraph,
    cfg: &ValidityConfig,
) -> Result<PopulationMedoid> {
    if g.n() != inst.n {
        return Err(Error::SizeMismatch {
            expected: inst.n,
            found: g.n(),
        });
    }
    let plans = enumerate_valid_plans(g, inst.k, cfg)?;
    if plans.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no valid {}-district plan exists under tolerance {}",
            inst.k, cfg.pop_tolerance
        )));
    }
    let objectives = plans
        .par_iter()
        .map(|p| cut_objective(inst, p))
        .collect::<Result<Vec<_>>>()?;
    let winners = best_set(&objectives, true);
    let objective = objectives[winners[0]];
    Ok(PopulationMedoid {
        plans: winners.into_iter().map(|i| plans[i].clone()).collect(),
        objective,
    })
}

/// Central-plan mass small enough that `T` draws miss it with probability at
/// least 2/3: `min(1/1000, 1 − (2/3)^(1/T))`.
pub fn demo_delta(samples: u64) -> f64 {
    let t = samples.max(1) as f64;
    (1.0 - (2.0_f64 / 3.0).powf(1.0 / t)).min(1e-3)
}

/// 3×3 grid, two districts, tolerance 0.34, unweighted θ. Three plans
/// (`spread[0..3]`) sit 14 apart from one another and 8 from a fourth,
/// `central`, which is the population medoid however little mass it has.
#[derive(Debug, Clone)]
pub struct NegativeFixture {
    pub graph: DualGraph,
    pub cfg: ValidityConfig,
    pub theta: Theta,
    pub spread: [Plan; 3],
    pub central: Plan,
}

impl NegativeFixture {
    pub fn new() -> Result<Self> {
        let graph = make_grid(&GridSpec::uniform(3, 3))?;
        let theta = Theta::new(ThetaKind::Unweighted, &graph)?;
        let plan = |a: [u32; 9]| Plan::new(a.to_vec(), 2);
        Ok(NegativeFixture {
            cfg: ValidityConfig::with_tolerance(0.34),
            spread: [
                plan([0, 0, 0, 0, 0, 0, 1, 1, 1])?,
                plan([0, 0, 0, 0, 0, 1, 0, 1, 1])?,
                plan([0, 0, 0, 0, 1, 1, 1, 1, 1])?,
            ],
            central: plan([0, 0, 0, 0, 0, 1, 1, 1, 1])?,
            graph,
            theta,
        })
    }

    /// `[spread.., central]`.
    pub fn support(&self) -> [&Plan; 4] {
        [
            &self.spread[0],
            &self.spread[1],
            &self.spread[2],
            &self.central,
        ]
    }

    /// `(1 − δ)/3` on each spread plan and `δ` on the central one.
    pub fn probabilities(&self, delta: f64) -> [f64; 4] {
        let w = (1.0 - delta) / 3.0;
        [w, w, w, delta]
    }

    /// Exact distribution over every valid plan, aligned with enumeration order.
    pub fn distribution(&self, delta: f64) -> Result<(Vec<Plan>, Vec<f64>)> {
        let plans = enumerate_valid_plans(&self.graph, 2, &self.cfg)?;
        let mut probs = vec![0.0; plans.len()];
        for (p, w) in self.support().into_iter().zip(self.probabilities(delta)) {
            let at = plans
                .iter()
                .position(|q| q.same_partition(p))
                .expect("fixture plans are valid");
            probs[at] = w;
        }
        Ok((plans, probs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeDemoReport {
    pub samples: u64,
    pub delta: f64,
    pub trials: u64,
    pub population_medoid: Plan,
    /// Expected distance `f` of the three spread plans and the central one.
    pub costs: [f64; 4],
    /// Fraction of trials whose draws never include the population medoid.
    pub miss_frequency: f64,
    /// `(1 − δ)^T`.
    pub theoretical_miss: f64,
    /// Fraction of trials whose sample medoid is not the population medoid.
    pub failure_frequency: f64,
    /// Smallest `f(sample medoid) / f(population medoid)` over failed trials.
    pub min_failure_ratio: Option<f64>,
}

/// Draws `samples` iid plans from the fixture distribution in each of
/// `trials` independent trials and records how often the sample medoid
/// (the drawn plan with the least summed distance to the draws) misses the
/// exact population medoid.
pub fn negative_demo(
    rng_seed: u64,
    samples: u64,
    delta: f64,
    trials: u64,
) -> Result<NegativeDemoReport> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} must lie in [0, 1)"
        )));
    }
    if samples == 0 || trials == 0 {
        return Err(Error::InvalidParameter(
            "samples and trials must be >= 1".into(),
        ));
    }
    let fx = NegativeFixture::new()?;
    let (plans, probs) = fx.distribution(delta)?;
    let centroid = PopulationCentroid::from_mixture(&plans, &probs)?;
    let inst = build_instance(&centroid, &fx.theta, 2)?;
    let exact = exact_population_medoid(&inst, &fx.graph, &fx.cfg)?;
    if exact.plans.len() != 1 {
        return Err(Error::InvalidParameter(
            "fixture population medoid is not unique".into(),
        ));
    }
    let population_medoid = exact.plans[0].clone();

    let support = fx.support();
    let weights = fx.probabilities(delta);
    let mut d = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            d[a][b] = distance(support[a], support[b], &fx.theta)?;
        }
    }
    let costs: [f64; 4] = std::array::from_fn(|a| (0..4).map(|b| weights[b] * d[a][b]).sum());
    let medoid_slot = support
        .iter()
        .position(|p| p.same_partition(&population_medoid));

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (mut misses, mut failures) = (0u64, 0u64);
    let mut min_failure_ratio: Option<f64> = None;
    for _ in 0..trials {
        let mut counts = [0u64; 4];
        for _ in 0..samples {
            let slot = if rng.random::<f64>() < delta {
                3
            } else {
                rng.random_range(0..3)
            };
            counts[slot] += 1;
        }
        if medoid_slot.is_none_or(|m| counts[m] == 0) {
            misses += 1;
        }
        let chosen = (0..4)
            .filter(|&a| counts[a] > 0)
            .min_by(|&a, &b| {
                let cost = |x: usize| (0..4).map(|y| counts[y] as f64 * d[x][y]).sum::<f64>();
                cost(a).total_cmp(&cost(b))
            })
            .expect("at least one draw");
        if Some(chosen) != medoid_slot {
            failures += 1;
            let ratio = costs[chosen] / exact_cost(&costs, medoid_slot);
            min_failure_ratio = Some(min_failure_ratio.map_or(ratio, |r| r.min(ratio)));
        }
    }
    Ok(NegativeDemoReport {
        samples,
        delta,
        trials,
        population_medoid,
        costs,
        miss_frequency: misses as f64 / trials as f64,
        theoretical_miss: (1.0 - delta).powf(samples as f64),
        failure_frequency: failures as f64 / trials as f64,
        min_failure_ratio,
    })
}

fn exact_cost(costs: &[f64; 4], slot: Option<usize>) -> f64 {
    slot.map_or(f64::NAN, |s| costs[s])
}

/// The plan-independent value of `d²(plan, c) + 2·cut_objective(plan)`.
pub fn affine_constant<C: CoMembership + ?Sized>(centroid: &C, theta: &Theta) -> Result<f64> {
    let n = centroid.unit_count();
    theta.check_n(n)?;
    let mut sum = PairwiseSum::default();
    for j in 1..n {
        for i in 0..j {
            let c = centroid.value(i, j);
            sum.add(theta.weight(i, j) * (c * c + 1.0 - 2.0 * c));
        }
    }
    Ok(sum.total())
}

/// `d²(plan, c)` for every plan, used to check the cut form against the
/// distance form.
pub fn centroid_distances<C: CoMembership + ?Sized>(
    plans: &[Plan],
    centroid: &C,
    theta: &Theta,
) -> Result<Vec<f64>> {
    let scorer = CentroidScorer::new(centroid, theta)?;
    plans.iter().map(|p| scorer.d2(p)).collect()
}

/// Plans minimizing `d²` to the centroid, with the same tie rule as
/// [`exact_population_medoid`].
pub fn argmin_centroid_distance<C: CoMembership + ?Sized>(
    plans: &[Plan],
    centroid: &C,
    theta: &Theta,
) -> Result<Vec<Plan>> {
    let d2 = centroid_distances(plans, centroid, theta)?;
    Ok(best_set(&d2, false)
        .into_iter()
        .map(|i| plans[i].clone())
        .collect())
}
