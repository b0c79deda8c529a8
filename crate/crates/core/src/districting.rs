//! Districting plans and the rules that make one valid: every district is
//! nonempty and connected, district populations sit within a tolerance of
//! the ideal, and (optionally) the number of cut edges is capped.
use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::DualGraph;
use crate::tree::{self, Subgraph};

/// Largest graph `enumerate_valid_plans` will accept.
pub const ENUMERATION_LIMIT: usize = 16;

/// Population tolerance used when none is given.
pub const DEFAULT_POP_TOLERANCE: f64 = 0.05;

const SEED_ATTEMPTS: usize = 200;
const SEED_TREES_PER_SPLIT: usize = 50;

/// Relative slack applied to population bounds so that exactly balanced
/// districts built from float sums are not rejected by rounding.
const POP_SLACK: f64 = 1e-9;

/// Assignment of each unit to one of `k` nonempty districts.
///
/// Distances and the centroid only look at co-membership (whether two
/// units share a district), so labels are a nuisance; [`Plan::canonical`]
/// relabels districts in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Plan {
    assignment: Vec<u32>,
    k: usize,
}

impl Plan {
    pub fn new(assignment: Vec<u32>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("a plan needs k > 0".into()));
        }
        let mut used = vec![false; k];
        for (unit, &d) in assignment.iter().enumerate() {
            match used.get_mut(d as usize) {
                Some(slot) => *slot = true,
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "unit {unit} assigned to district {d}, outside [0, {k})"
                    )))
                }
            }
        }
        if let Some(empty) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidParameter(format!(
                "district {empty} is empty"
            )));
        }
        Ok(Plan { assignment, k })
    }

    /// Builds a plan from arbitrary hashable labels; districts are numbered
    /// by first occurrence.
    pub fn from_labels<L: Hash + Eq>(labels: &[L]) -> Result<Self> {
        let mut ids: HashMap<&L, u32> = HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = ids.len() as u32;
                *ids.entry(l).or_insert(next)
            })
            .collect();
        Plan::new(assignment, ids.len())
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn district_of(&self, unit: usize) -> u32 {
        self.assignment[unit]
    }

    pub fn same_district(&self, i: usize, j: usize) -> bool {
        self.assignment[i] == self.assignment[j]
    }

    /// Member lists, ascending within each district.
    pub fn districts(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (unit, &d) in self.assignment.iter().enumerate() {
            out[d as usize].push(unit);
        }
        out
    }

    pub fn canonical(&self) -> Plan {
        let mut map = vec![u32::MAX; self.k];
        let mut next = 0;
        let assignment = self
            .assignment
            .iter()
            .map(|&d| {
                let slot = &mut map[d as usize];
                if *slot == u32::MAX {
                    *slot = next;
                    next += 1;
                }
                *slot
            })
            .collect();
        Plan {
            assignment,
            k: self.k,
        }
    }

    /// True when both plans induce the same partition of units.
    pub fn same_partition(&self, other: &Plan) -> bool {
        self.n() == other.n() && self.k == other.k && self.canonical() == other.canonical()
    }

    pub fn check_size(&self, n: usize) -> Result<()> {
        if self.n() == n {
            Ok(())
        } else {
            Err(Error::SizeMismatch {
                expected: n,
                found: self.n(),
            })
        }
    }

    pub(crate) fn assignment_mut(&mut self) -> &mut [u32] {
        &mut self.assignment
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityConfig {
    /// Allowed relative deviation of each district's population from the ideal.
    pub pop_tolerance: f64,
    /// Compactness cap on the number of cut edges.
    pub max_cut_edges: Option<usize>,
}

impl Default for ValidityConfig {
    fn default() -> Self {
        ValidityConfig {
            pop_tolerance: DEFAULT_POP_TOLERANCE,
            max_cut_edges: None,
        }
    }
}

impl ValidityConfig {
    pub fn with_tolerance(pop_tolerance: f64) -> Self {
        ValidityConfig {
            pop_tolerance,
            max_cut_edges: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.pop_tolerance >= 0.0 && self.pop_tolerance.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "population tolerance {} must be >= 0",
                self.pop_tolerance
            )))
        }
    }

    /// Inclusive population window for one district of a `k`-district plan.
    pub fn pop_bounds(&self, g: &DualGraph, k: usize) -> (f64, f64) {
        let ideal = g.total_pop() / k as f64;
        let slack = POP_SLACK * ideal;
        (
            (1.0 - self.pop_tolerance) * ideal - slack,
            (1.0 + self.pop_tolerance) * ideal + slack,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationBalance {
    pub totals: Vec<f64>,
    pub ideal: f64,
    /// `max_d |pop_d - ideal| / ideal`.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Contiguity,
    Population,
    Compactness,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::Contiguity => "contiguity",
            Violation::Population => "population",
            Violation::Compactness => "compactness",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid(Violation),
}

impl Validity {
    pub fn is_valid(self) -> bool {
        self == Validity::Valid
    }
}

pub fn is_contiguous(plan: &Plan, g: &DualGraph) -> Result<bool> {
    plan.check_size(g.n())?;
    Ok(contiguous_unchecked(plan, g))
}

fn contiguous_unchecked(plan: &Plan, g: &DualGraph) -> bool {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut started = vec![false; plan.k()];
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let d = plan.district_of(start);
        if std::mem::replace(&mut started[d as usize], true) {
            // A second component of a district already visited.
            return false;
        }
        seen[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if !seen[v] && plan.district_of(v) == d {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    true
}

pub fn population_balance(plan: &Plan, g: &DualGraph) -> Result<PopulationBalance> {
    plan.check_size(g.n())?;
    let mut totals = vec![0.0; plan.k()];
    for (unit, &d) in plan.assignment().iter().enumerate() {
        totals[d as usize] += g.pop(unit);
    }
    let ideal = g.total_pop() / plan.k() as f64;
    let max_deviation = totals
        .iter()
        .map(|t| (t - ideal).abs() / ideal)
        .fold(0.0, f64::max);
    Ok(PopulationBalance {
        totals,
        ideal,
        max_deviation,
    })
}

pub fn cut_edges(plan: &Plan, g: &DualGraph) -> Result<usize> {
    plan.check_size(g.n())?;
    Ok(g.edges()
        .iter()
        .filter(|&&(a, b)| !plan.same_district(a, b))
        .count())
}

/// Checks the rules in order (contiguity, population, compactness) and
/// reports the first one broken.
pub fn is_valid(plan: &Plan, g: &DualGraph, cfg: &ValidityConfig) -> Result<Validity> {
    plan.check_size(g.n())?;
    if !contiguous_unchecked(plan, g) {
        return Ok(Validity::Invalid(Violation::Contiguity));
    }
    let balance = population_balance(plan, g)?;
    if balance.max_deviation > cfg.pop_tolerance * (1.0 + POP_SLACK) + POP_SLACK {
        return Ok(Validity::Invalid(Violation::Population));
    }
    if let Some(cap) = cfg.max_cut_edges {
        if cut_edges(plan, g)? > cap {
            return Ok(Validity::Invalid(Violation::Compactness));
        }
    }
    Ok(Validity::Valid)
}

/// Builds a valid plan by recursively splitting off one district at a time
/// along a population-balanced edge of a uniform spanning tree.
pub fn seed_plan(g: &DualGraph, k: usize, cfg: &ValidityConfig, rng_seed: u64) -> Result<Plan> {
    cfg.check()?;
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} units into {k} nonempty districts"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (lo, hi) = cfg.pop_bounds(g, k);
    let mut scratch = vec![usize::MAX; n];

    'attempt: for _ in 0..SEED_ATTEMPTS {
        let mut assignment = vec![0u32; n];
        let mut remaining: Vec<usize> = (0..n).collect();
        for d in 0..k - 1 {
            let left_after = (k - d - 1) as f64;
            let fits_one = |p: f64| p >= lo && p <= hi;
            let fits_rest = |p: f64| p >= left_after * lo && p <= left_after * hi;
            let sub = Subgraph::induced(g, std::mem::take(&mut remaining), &mut scratch);

            let mut chosen = None;
            for _ in 0..SEED_TREES_PER_SPLIT {
                let t = tree::wilson(&sub, &mut rng);
                // Each candidate: (node, district is its subtree?)
                let mut cands = Vec::new();
                for v in t.cuts_where(&sub.pops, |s, r| {
                    (fits_one(s) && fits_rest(r)) || (fits_one(r) && fits_rest(s))
                }) {
                    let sp = t.subtree_pops(&sub.pops)[v];
                    let total = sub.total_pop();
                    if fits_one(sp) && fits_rest(total - sp) {
                        cands.push((v, true));
                    }
                    if fits_one(total - sp) && fits_rest(sp) {
                        cands.push((v, false));
                    }
                }
                if !cands.is_empty() {
                    let (v, subtree_side) = cands[rng.random_range(0..cands.len())];
                    chosen = Some((t.subtree_mask(v), subtree_side));
                    break;
                }
            }
            let Some((mask, subtree_side)) = chosen else {
                continue 'attempt;
            };
            for (local, &unit) in sub.nodes.iter().enumerate() {
                if mask[local] == subtree_side {
                    assignment[unit] = d as u32;
                } else {
                    remaining.push(unit);
                }
            }
        }
        for &unit in &remaining {
            assignment[unit] = (k - 1) as u32;
        }
        let plan = Plan::new(assignment, k)?.canonical();
        if is_valid(&plan, g, cfg)?.is_valid() {
            return Ok(plan);
        }
    }
    Err(Error::SeedFailed {
        attempts: SEED_ATTEMPTS,
    })
}

/// Every valid plan with exactly `k` districts, canonically labelled, in
/// lexicographic order of assignment vectors.
pub fn enumerate_valid_plans(g: &DualGraph, k: usize, cfg: &ValidityConfig) -> Result<Vec<Plan>> {
    cfg.check()?;
    let n = g.n();
    if n > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    if k == 0 || k > n {
        return Ok(Vec::new());
    }
    let (_, hi) = cfg.pop_bounds(g, k);
    let pops: Vec<f64> = g.pops().collect();
    let mut out = Vec::new();
    let mut assignment = vec![0u32; n];
    let mut district_pop = vec![0.0; k];

    // Restricted growth strings: unit i takes a label in 0..=max_used+1.
    fn grow(
        i: usize,
        used: usize,
        k: usize,
        hi: f64,
        pops: &[f64],
        assignment: &mut Vec<u32>,
        district_pop: &mut [f64],
        visit: &mut dyn FnMut(&[u32]),
    ) {
        let n = pops.len();
        if i == n {
            if used == k {
                visit(assignment);
            }
            return;
        }
        if k - used > n - i {
            return;
        }
        let top = (used + 1).min(k);
        for d in 0..top {
            if district_pop[d] + pops[i] > hi {
                continue;
            }
            assignment[i] = d as u32;
            district_pop[d] += pops[i];
            grow(
                i + 1,
                used.max(d + 1),
                k,
                hi,
                pops,
                assignment,
                district_pop,
                visit,
            );
            district_pop[d] -= pops[i];
        }
    }

    let mut visit = |a: &[u32]| {
        let plan = Plan {
            assignment: a.to_vec(),
            k,
        };
        if matches!(is_valid(&plan, g, cfg), Ok(Validity::Valid)) {
            out.push(plan);
        }
    };
    grow(
        0,
        0,
        k,
        hi,
        &pops,
        &mut assignment,
        &mut district_pop,
        &mut visit,
    );
    Ok(out)
}
