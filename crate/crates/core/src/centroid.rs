//! Ensemble centroid: the entrywise mean of co-membership matrices.
//!
//! Entry `c(i,j)` is the fraction of accumulated plans that put `i` and `j`
//! in the same district. Counts are kept as integers and divided only when
//! read, so merging shards is exact. For any fixed plan `A'`,
//!
//! `Σ_t d(A_t, A') = Σ_t d²(A_t, c) + T·d²(c, A')`,
//!
//! which makes the ensemble plan nearest the centroid (in `d²`) the sample
//! medoid and lets it be found with `T` distance evaluations.
use std::collections::HashMap;

use rayon::prelude::*;

use crate::districting::{enumerate_valid_plans, Plan, ValidityConfig};
use crate::error::{Error, Result};
use crate::graph::DualGraph;
use crate::metric::{distance, Theta};
use crate::pairs::{pair_count, tri_index, tri_pair, PairwiseSum};

/// Share of all pairs above which the sparse store switches to a dense table.
const DENSE_FRACTION: f64 = 0.4;

/// Read access to a (possibly fractional) co-membership matrix.
pub trait CoMembership {
    fn unit_count(&self) -> usize;

    /// Entry for the pair `(i, j)`; symmetric, and `1` on the diagonal.
    fn value(&self, i: usize, j: usize) -> f64;

    /// Calls `f(i, j, value)` for every pair `i < j` with a nonzero entry.
    fn for_each_nonzero(&self, f: &mut dyn FnMut(usize, usize, f64));
}

impl CoMembership for Plan {
    fn unit_count(&self) -> usize {
        self.n()
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        if self.same_district(i, j) {
            1.0
        } else {
            0.0
        }
    }

    fn for_each_nonzero(&self, f: &mut dyn FnMut(usize, usize, f64)) {
        for members in self.districts() {
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    f(i, j, 1.0);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Store {
    Sparse(HashMap<usize, u64>),
    Dense(Vec<u64>),
}

/// Co-membership counts over `samples` accumulated plans.
#[derive(Debug, Clone)]
pub struct CentroidMatrix {
    n: usize,
    samples: u64,
    store: Store,
}

impl CentroidMatrix {
    pub fn new(n: usize) -> Self {
        CentroidMatrix {
            n,
            samples: 0,
            store: Store::Sparse(HashMap::new()),
        }
    }

    /// Rebuilds a centroid from `(i, j, count)` triples with `i < j`.
    pub fn from_counts(
        n: usize,
        samples: u64,
        counts: impl IntoIterator<Item = (usize, usize, u64)>,
    ) -> Result<Self> {
        let mut out = CentroidMatrix::new(n);
        out.samples = samples;
        for (i, j, count) in counts {
            if i >= j || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "pair ({i}, {j}) is not i < j < {n}"
                )));
            }
            if count > samples {
                return Err(Error::InvalidParameter(format!(
                    "count {count} for ({i}, {j}) exceeds T = {samples}"
                )));
            }
            if count > 0 {
                out.add_count(tri_index(i, j), count);
            }
        }
        out.maybe_densify();
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of accumulated plans `T`.
    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.store, Store::Dense(_))
    }

    /// Number of pairs with a nonzero count.
    pub fn support_len(&self) -> usize {
        match &self.store {
            Store::Sparse(m) => m.len(),
            Store::Dense(v) => v.iter().filter(|&&c| c > 0).count(),
        }
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        if i == j {
            return self.samples;
        }
        let idx = tri_index(i.min(j), i.max(j));
        match &self.store {
            Store::Sparse(m) => m.get(&idx).copied().unwrap_or(0),
            Store::Dense(v) => v[idx],
        }
    }

    /// Nonzero `(i, j, count)` triples in lexicographic `(i, j)` order.
    pub fn entries(&self) -> Vec<(usize, usize, u64)> {
        let mut out: Vec<_> = match &self.store {
            Store::Sparse(m) => m
                .iter()
                .map(|(&idx, &c)| {
                    let (i, j) = tri_pair(idx);
                    (i, j, c)
                })
                .collect(),
            Store::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(idx, &c)| {
                    let (i, j) = tri_pair(idx);
                    (i, j, c)
                })
                .collect(),
        };
        out.sort_unstable();
        out
    }

    #[inline]
    fn add_count(&mut self, idx: usize, by: u64) {
        match &mut self.store {
            Store::Sparse(m) => *m.entry(idx).or_insert(0) += by,
            Store::Dense(v) => v[idx] += by,
        }
    }

    fn maybe_densify(&mut self) {
        if let Store::Sparse(m) = &self.store {
            if m.len() as f64 > DENSE_FRACTION * pair_count(self.n) as f64 {
                let mut dense = vec![0u64; pair_count(self.n)];
                for (&idx, &c) in m {
                    dense[idx] = c;
                }
                self.store = Store::Dense(dense);
            }
        }
    }

    /// Adds one plan: `T += 1` and every same-district pair gains a count.
    pub fn accumulate(&mut self, plan: &Plan) -> Result<()> {
        self.accumulate_weighted(plan, 1)
    }

    /// Adds `weight` copies of a plan.
    pub fn accumulate_weighted(&mut self, plan: &Plan, weight: u64) -> Result<()> {
        plan.check_size(self.n)?;
        if weight == 0 {
            return Ok(());
        }
        self.samples += weight;
        for members in plan.districts() {
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    self.add_count(tri_index(i, j), weight);
                }
            }
        }
        self.maybe_densify();
        Ok(())
    }

    /// Adds the counts of `other` into `self`.
    pub fn merge_from(&mut self, other: &CentroidMatrix) -> Result<()> {
        if other.n != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        self.samples += other.samples;
        match &other.store {
            Store::Sparse(m) => {
                for (&idx, &c) in m {
                    self.add_count(idx, c);
                }
            }
            Store::Dense(v) => {
                if let Store::Dense(mine) = &mut self.store {
                    for (a, &b) in mine.iter_mut().zip(v) {
                        *a += b;
                    }
                } else {
                    for (idx, &c) in v.iter().enumerate().filter(|(_, &c)| c > 0) {
                        self.add_count(idx, c);
                    }
                }
            }
        }
        self.maybe_densify();
        Ok(())
    }

    pub fn merge(a: &CentroidMatrix, b: &CentroidMatrix) -> Result<CentroidMatrix> {
        let mut out = a.clone();
        out.merge_from(b)?;
        Ok(out)
    }
}

impl PartialEq for CentroidMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.samples == other.samples && self.entries() == other.entries()
    }
}

impl Eq for CentroidMatrix {}

impl CoMembership for CentroidMatrix {
    fn unit_count(&self) -> usize {
        self.n
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        if self.samples == 0 {
            return if i == j { 1.0 } else { 0.0 };
        }
        self.count(i, j) as f64 / self.samples as f64
    }

    fn for_each_nonzero(&self, f: &mut dyn FnMut(usize, usize, f64)) {
        if self.samples == 0 {
            return;
        }
        let t = self.samples as f64;
        match &self.store {
            Store::Sparse(m) => {
                for (&idx, &c) in m {
                    let (i, j) = tri_pair(idx);
                    f(i, j, c as f64 / t);
                }
            }
            Store::Dense(v) => {
                let mut idx = 0;
                for j in 1..self.n {
                    for i in 0..j {
                        let c = v[idx];
                        if c > 0 {
                            f(i, j, c as f64 / t);
                        }
                        idx += 1;
                    }
                }
            }
        }
    }
}

/// A centroid with real-valued entries, e.g. the exact co-districting
/// probabilities of a distribution over plans.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationCentroid {
    n: usize,
    values: Vec<f64>,
}

impl PopulationCentroid {
    /// `Σ_m probs[m]·A_m`. Probabilities must sum to 1 within 1e-12.
    pub fn from_mixture(plans: &[Plan], probs: &[f64]) -> Result<Self> {
        if plans.len() != probs.len() {
            return Err(Error::SizeMismatch {
                expected: plans.len(),
                found: probs.len(),
            });
        }
        let Some(first) = plans.first() else {
            return Err(Error::EmptyEnsemble);
        };
        check_probability_mass(probs)?;
        let n = first.n();
        let mut values = vec![0.0; pair_count(n)];
        for (plan, &p) in plans.iter().zip(probs) {
            plan.check_size(n)?;
            if p == 0.0 {
                continue;
            }
            plan.for_each_nonzero(&mut |i, j, _| values[tri_index(i, j)] += p);
        }
        Ok(PopulationCentroid { n, values })
    }
}

pub(crate) fn check_probability_mass(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidParameter("negative probability".into()));
    }
    let total: f64 = probs.iter().copied().collect::<PairwiseSum>().total();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::ProbabilityMass { total });
    }
    Ok(())
}

impl CoMembership for PopulationCentroid {
    fn unit_count(&self) -> usize {
        self.n
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            self.values[tri_index(i.min(j), i.max(j))]
        }
    }

    fn for_each_nonzero(&self, f: &mut dyn FnMut(usize, usize, f64)) {
        let mut idx = 0;
        for j in 1..self.n {
            for i in 0..j {
                let v = self.values[idx];
                if v != 0.0 {
                    f(i, j, v);
                }
                idx += 1;
            }
        }
    }
}

/// Exact co-districting probabilities for a distribution over the valid
/// plans of `g`, given in [`enumerate_valid_plans`] order.
pub fn exact_population_centroid(
    g: &DualGraph,
    k: usize,
    cfg: &ValidityConfig,
    probs: &[f64],
) -> Result<PopulationCentroid> {
    let plans = enumerate_valid_plans(g, k, cfg)?;
    PopulationCentroid::from_mixture(&plans, probs)
}

/// Rational variant of [`exact_population_centroid`]: plan `m` carries
/// probability `weights[m] / Σ weights`, stored exactly as integer counts.
pub fn exact_population_centroid_weighted(
    g: &DualGraph,
    k: usize,
    cfg: &ValidityConfig,
    weights: &[u64],
) -> Result<CentroidMatrix> {
    let plans = enumerate_valid_plans(g, k, cfg)?;
    if plans.len() != weights.len() {
        return Err(Error::SizeMismatch {
            expected: plans.len(),
            found: weights.len(),
        });
    }
    if weights.iter().all(|&w| w == 0) {
        return Err(Error::ProbabilityMass { total: 0.0 });
    }
    let mut acc = CentroidMatrix::new(g.n());
    for (plan, &w) in plans.iter().zip(weights) {
        acc.accumulate_weighted(plan, w)?;
    }
    Ok(acc)
}

/// Fast `d²` from any plan to one fixed centroid.
///
/// With `base = Σ θ c²` over the centroid's support,
/// `d²(A, c) = base + Σ_{i<j, A(i,j)=1} θ(i,j)·(1 − 2c(i,j))`,
/// which costs one pass over the plan's same-district pairs.
pub struct CentroidScorer<'a, C: CoMembership + ?Sized> {
    centroid: &'a C,
    theta: &'a Theta,
    base: f64,
    spread: f64,
}

impl<'a, C: CoMembership + ?Sized> CentroidScorer<'a, C> {
    pub fn new(centroid: &'a C, theta: &'a Theta) -> Result<Self> {
        theta.check_n(centroid.unit_count())?;
        let mut base = PairwiseSum::default();
        let mut spread = PairwiseSum::default();
        centroid.for_each_nonzero(&mut |i, j, c| {
            let w = theta.weight(i, j);
            base.add(w * c * c);
            spread.add(w * c * (1.0 - c));
        });
        Ok(CentroidScorer {
            centroid,
            theta,
            base: base.total(),
            spread: spread.total(),
        })
    }

    pub fn centroid(&self) -> &C {
        self.centroid
    }

    pub fn theta(&self) -> &Theta {
        self.theta
    }

    /// `Σ θ c²`: `d²` from the all-singletons matrix to the centroid.
    pub fn self_mass(&self) -> f64 {
        self.base
    }

    /// `d²(plan, centroid)`.
    pub fn d2(&self, plan: &Plan) -> Result<f64> {
        plan.check_size(self.centroid.unit_count())?;
        Ok(self.d2_unchecked(plan))
    }

    pub(crate) fn d2_unchecked(&self, plan: &Plan) -> f64 {
        let mut sum = PairwiseSum::default();
        for members in plan.districts() {
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    sum.add(self.theta.weight(i, j) * (1.0 - 2.0 * self.centroid.value(i, j)));
                }
            }
        }
        // Exact zero is reachable (a plan equal to a point-mass centroid);
        // keep rounding from reporting a negative distance.
        (self.base + sum.total()).max(0.0)
    }

    /// `(1/T) Σ_t d²(A_t, c)` computed from the centroid alone as
    /// `Σ θ c(1 − c)`, which holds whenever the centroid is the mean of
    /// the ensemble.
    pub fn mean_spread(&self) -> f64 {
        self.spread
    }
}

/// Second-pass route to the mean spread: average `d²` of the ensemble to
/// the centroid.
pub fn mean_spread_two_pass<C: CoMembership + ?Sized>(
    ensemble: &[Plan],
    scorer: &CentroidScorer<'_, C>,
) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut sum = PairwiseSum::default();
    for plan in ensemble {
        sum.add(scorer.d2(plan)?);
    }
    Ok(sum.total() / ensemble.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMedoid {
    /// Position of the medoid in the ensemble (earliest on ties).
    pub index: usize,
    pub plan: Plan,
    /// Its `d²` to the centroid.
    pub d2: f64,
}

/// Linear-time sample medoid: the ensemble plan nearest the centroid.
///
/// The scan runs on the rayon pool; the `(d², index)` minimum is
/// associative, so the result does not depend on the thread count.
pub fn sample_medoid(
    ensemble: &[Plan],
    acc: &CentroidMatrix,
    theta: &Theta,
) -> Result<SampleMedoid> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if acc.samples() != ensemble.len() as u64 {
        return Err(Error::InvalidParameter(format!(
            "centroid holds T = {} plans but the ensemble has {}",
            acc.samples(),
            ensemble.len()
        )));
    }
    let scorer = CentroidScorer::new(acc, theta)?;
    for plan in ensemble {
        plan.check_size(acc.n())?;
    }
    let (d2, index) = ensemble
        .par_iter()
        .enumerate()
        .map(|(i, p)| (scorer.d2_unchecked(p), i))
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(SampleMedoid {
        index,
        plan: ensemble[index].clone(),
        d2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionCheck {
    /// `Σ_t d(A_t, probe)`, evaluated pair by pair.
    pub lhs: f64,
    /// `Σ_t d²(A_t, c) + T·d²(c, probe)`.
    pub rhs: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|, Σ θc²)`.
    pub residual: f64,
}

/// Evaluates both sides of the decomposition identity for one probe.
pub fn decomposition_check(
    ensemble: &[Plan],
    acc: &CentroidMatrix,
    probe: &Plan,
    theta: &Theta,
) -> Result<DecompositionCheck> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut lhs = PairwiseSum::default();
    for plan in ensemble {
        lhs.add(distance(plan, probe, theta)?);
    }
    let scorer = CentroidScorer::new(acc, theta)?;
    let mut spread = PairwiseSum::default();
    for plan in ensemble {
        spread.add(scorer.d2(plan)?);
    }
    let lhs = lhs.total();
    let rhs = spread.total() + ensemble.len() as f64 * scorer.d2(probe)?;
    // Each d² is a difference of terms of size `self_mass`, so that is the
    // floor of the scale the residual is measured against.
    let scale = lhs.abs().max(rhs.abs()).max(scorer.self_mass());
    let residual = if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    };
    Ok(DecompositionCheck { lhs, rhs, residual })
}

/// `(1/T) Σ_t d(probe, A_t)` without touching the ensemble:
/// `d²(probe, c) + mean_spread`.
pub fn avg_ensemble_distance<C: CoMembership + ?Sized>(
    probe: &Plan,
    scorer: &CentroidScorer<'_, C>,
    mean_spread: f64,
) -> Result<f64> {
    Ok(scorer.d2(probe)? + mean_spread)
}

fn check_sample_params(epsilon: f64, delta: f64, n: usize) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} must be > 0"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} must lie in (0, 1)"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} must be >= 2")));
    }
    Ok(())
}

fn ceil_at_least_one(x: f64) -> u64 {
    if x.is_finite() {
        (x.ceil() as u64).max(1)
    } else {
        u64::MAX
    }
}

/// Samples sufficient for every centroid entry to be within `epsilon` of
/// its population value with probability `1 − delta`:
/// `⌈ln(n/δ) / ε²⌉`, never below 1.
pub fn required_samples(epsilon: f64, delta: f64, n: usize) -> Result<u64> {
    check_sample_params(epsilon, delta, n)?;
    Ok(ceil_at_least_one(
        (n as f64 / delta).ln() / (epsilon * epsilon),
    ))
}

/// Samples sufficient for `d²(sample centroid, population centroid) ≤ ε`
/// with probability `1 − delta`: `⌈κ n² ln(n/δ) / ε⌉`, never below 1.
pub fn required_samples_dsq(epsilon: f64, delta: f64, n: usize, kappa: f64) -> Result<u64> {
    check_sample_params(epsilon, delta, n)?;
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa {kappa} must be > 0"
        )));
    }
    let n_f = n as f64;
    Ok(ceil_at_least_one(
        kappa * n_f * n_f / epsilon * (n_f / delta).ln(),
    ))
}
