//! Ensemble analytics: distance histograms and percentile ranks, medoid
//! costs, the vote-weighted committee medoid, the relative-error score used
//! to compare medoids, and two-party seat counts.
use std::fmt::Write as _;

use crate::centroid::{check_probability_mass, CentroidScorer, CoMembership};
use crate::districting::Plan;
use crate::error::{Error, Result};
use crate::metric::{distance, distance_fast, Theta};
use crate::pairs::PairwiseSum;

/// Number of bins used when a histogram is rendered without an explicit count.
pub const DEFAULT_BINS: usize = 100;

/// Sorted `d²` values of an ensemble to a fixed centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceHistogram {
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bins {
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl DistanceHistogram {
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "histogram value {bad} is not finite"
            )));
        }
        values.sort_by(f64::total_cmp);
        Ok(DistanceHistogram { values })
    }

    /// Scores every plan against the centroid.
    pub fn from_ensemble<C: CoMembership + ?Sized>(
        ensemble: &[Plan],
        scorer: &CentroidScorer<'_, C>,
    ) -> Result<Self> {
        let values = ensemble
            .iter()
            .map(|p| scorer.d2(p))
            .collect::<Result<Vec<_>>>()?;
        DistanceHistogram::from_values(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample count `T`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `100 · #{values strictly below probe} / T`.
    pub fn percentile_of(&self, probe_d2: f64) -> f64 {
        let below = self.values.partition_point(|&v| v < probe_d2);
        100.0 * below as f64 / self.values.len() as f64
    }

    /// Equal-width bins spanning `[min, max]`; the last bin is closed.
    pub fn bins(&self, count: usize) -> Bins {
        let count = count.max(1);
        let lo = self.values[0];
        let hi = *self.values.last().expect("nonempty");
        let width = if hi > lo {
            (hi - lo) / count as f64
        } else {
            1.0
        };
        let edges = (0..=count).map(|b| lo + width * b as f64).collect();
        let mut counts = vec![0u64; count];
        for &v in &self.values {
            let b = (((v - lo) / width) as usize).min(count - 1);
            counts[b] += 1;
        }
        Bins { edges, counts }
    }

    /// Minimal standalone SVG bar chart with a vertical marker per probe.
    pub fn render_svg(&self, bins: usize, markers: &[(&str, f64)]) -> String {
        const W: f64 = 640.0;
        const H: f64 = 360.0;
        const PAD: f64 = 40.0;
        let b = self.bins(bins);
        let lo = b.edges[0];
        let mut hi = *b.edges.last().expect("edges");
        for &(_, v) in markers {
            hi = hi.max(v);
        }
        let span = if hi > lo { hi - lo } else { 1.0 };
        let x = |v: f64| PAD + (v - lo) / span * (W - 2.0 * PAD);
        let peak = b.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        for (i, &c) in b.counts.iter().enumerate() {
            let (x0, x1) = (x(b.edges[i]), x(b.edges[i + 1]));
            let h = c as f64 / peak * (H - 2.0 * PAD);
            let _ = writeln!(
                svg,
                r##"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="#4a78b5"/>"##,
                H - PAD - h,
                (x1 - x0).max(0.5)
            );
        }
        for &(label, v) in markers {
            let xv = x(v);
            let _ = writeln!(
                svg,
                r##"<line x1="{xv:.2}" y1="{PAD}" x2="{xv:.2}" y2="{:.2}" stroke="#c0392b" stroke-width="2"/>"##,
                H - PAD
            );
            let _ = writeln!(
                svg,
                r#"<text x="{xv:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
                PAD - 8.0,
                escape_xml(label)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">d² to centroid (T = {})</text>"#,
            W / 2.0,
            H - 10.0,
            self.len()
        );
        svg.push_str("</svg>\n");
        svg
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Expected distance `Σ p(M')·d(probe, M')` from a probe to a distribution.
pub fn medoid_cost(probe: &Plan, plans: &[Plan], probs: &[f64], theta: &Theta) -> Result<f64> {
    if plans.len() != probs.len() {
        return Err(Error::SizeMismatch {
            expected: plans.len(),
            found: probs.len(),
        });
    }
    check_probability_mass(probs)?;
    let mut sum = PairwiseSum::default();
    for (plan, &p) in plans.iter().zip(probs) {
        if p > 0.0 {
            sum.add(p * distance(probe, plan, theta)?);
        }
    }
    Ok(sum.total())
}

fn plan_distance(a: &Plan, b: &Plan, theta: &Theta) -> Result<f64> {
    match distance_fast(a, b, theta) {
        Err(Error::UnsupportedTheta(_)) => distance(a, b, theta),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommitteeMedoid {
    pub index: usize,
    /// `Σ_j votes_j · d(winner, M_j)`.
    pub cost: f64,
}

/// The candidate minimizing the vote-weighted sum of distances to all
/// candidates; ties go to the earliest index.
pub fn committee_medoid(
    candidates: &[Plan],
    votes: &[u64],
    theta: &Theta,
) -> Result<CommitteeMedoid> {
    if candidates.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if candidates.len() != votes.len() {
        return Err(Error::SizeMismatch {
            expected: candidates.len(),
            found: votes.len(),
        });
    }
    if votes.iter().all(|&v| v == 0) {
        return Err(Error::ZeroVotes);
    }
    let mut best: Option<CommitteeMedoid> = None;
    for (index, cand) in candidates.iter().enumerate() {
        let mut sum = PairwiseSum::default();
        for (other, &v) in candidates.iter().zip(votes) {
            if v > 0 {
                sum.add(v as f64 * plan_distance(cand, other, theta)?);
            }
        }
        let cost = sum.total();
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(CommitteeMedoid { index, cost });
        }
    }
    Ok(best.expect("nonempty"))
}

/// `|a − b| / min(a, b)` for two `d²` values to the same centroid.
///
/// Equal values give 0; otherwise a zero minimum is reported as
/// [`Error::ZeroDistance`].
pub fn relative_error_of(d2_a: f64, d2_b: f64) -> Result<f64> {
    let diff = (d2_a - d2_b).abs();
    if diff == 0.0 {
        return Ok(0.0);
    }
    let min = d2_a.min(d2_b);
    if min <= 0.0 {
        return Err(Error::ZeroDistance);
    }
    Ok(diff / min)
}

/// Relative error between two medoid candidates, measured against one centroid.
pub fn relative_error<C: CoMembership + ?Sized>(
    m1: &Plan,
    m2: &Plan,
    scorer: &CentroidScorer<'_, C>,
) -> Result<f64> {
    relative_error_of(scorer.d2(m1)?, scorer.d2(m2)?)
}

/// Per-unit two-party vote counts.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTable {
    votes_a: Vec<f64>,
    votes_b: Vec<f64>,
}

impl VoteTable {
    pub fn new(votes_a: Vec<f64>, votes_b: Vec<f64>) -> Result<Self> {
        if votes_a.len() != votes_b.len() {
            return Err(Error::SizeMismatch {
                expected: votes_a.len(),
                found: votes_b.len(),
            });
        }
        if let Some(bad) = votes_a
            .iter()
            .chain(&votes_b)
            .find(|v| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "vote count {bad} must be >= 0"
            )));
        }
        if votes_a.iter().chain(&votes_b).all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter("vote table has no votes".into()));
        }
        Ok(VoteTable { votes_a, votes_b })
    }

    pub fn n(&self) -> usize {
        self.votes_a.len()
    }

    pub fn votes_a(&self) -> &[f64] {
        &self.votes_a
    }

    pub fn votes_b(&self) -> &[f64] {
        &self.votes_b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeatResult {
    pub seats_a: usize,
    pub seats_b: usize,
    /// Districts with exactly equal totals; counted for neither party.
    pub ties: Vec<usize>,
    /// `(votes_a, votes_b)` per district.
    pub totals: Vec<(f64, f64)>,
}

impl SeatResult {
    /// Party A's share of the two-party vote in each district.
    pub fn shares_a(&self) -> Vec<f64> {
        self.totals
            .iter()
            .map(|&(a, b)| if a + b > 0.0 { a / (a + b) } else { 0.5 })
            .collect()
    }
}

pub fn seats(plan: &Plan, votes: &VoteTable) -> Result<SeatResult> {
    plan.check_size(votes.n())?;
    let mut totals = vec![(0.0, 0.0); plan.k()];
    for (unit, &d) in plan.assignment().iter().enumerate() {
        totals[d as usize].0 += votes.votes_a[unit];
        totals[d as usize].1 += votes.votes_b[unit];
    }
    let mut out = SeatResult {
        seats_a: 0,
        seats_b: 0,
        ties: Vec::new(),
        totals,
    };
    for (d, &(a, b)) in out.totals.iter().enumerate() {
        if a > b {
            out.seats_a += 1;
        } else if b > a {
            out.seats_b += 1;
        } else {
            out.ties.push(d);
        }
    }
    Ok(out)
}

/// `hist[s]` = number of plans in which party A wins exactly `s` seats.
pub fn seats_histogram(ensemble: &[Plan], votes: &VoteTable) -> Result<Vec<u64>> {
    let k = ensemble
        .iter()
        .map(Plan::k)
        .max()
        .ok_or(Error::EmptyEnsemble)?;
    let mut hist = vec![0u64; k + 1];
    for plan in ensemble {
        hist[seats(plan, votes)?.seats_a] += 1;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DualGraph, Unit};
    use crate::metric::ThetaKind;

    fn path(n: usize) -> DualGraph {
        let units = (0..n)
            .map(|i| Unit {
                id: format!("u{i}"),
                pop: 1.0,
            })
            .collect();
        DualGraph::new(units, (1..n).map(|i| (i - 1, i)).collect()).unwrap()
    }

    fn plan(a: &[u32]) -> Plan {
        Plan::from_labels(a).unwrap()
    }

    #[test]
    fn percentiles() {
        let h = DistanceHistogram::from_values((1..=100).map(f64::from).collect()).unwrap();
        assert_eq!(h.percentile_of(1000.0), 100.0);
        assert_eq!(h.percentile_of(1.0), 0.0);
        let h = DistanceHistogram::from_values(vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(h.percentile_of(3.5), 75.0);
        assert_eq!(h.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(DistanceHistogram::from_values(vec![]).is_err());
        assert!(DistanceHistogram::from_values(vec![f64::NAN]).is_err());
    }

    #[test]
    fn binning_counts_everything() {
        let h =
            DistanceHistogram::from_values((0..1000).map(|i| (i as f64).sqrt()).collect()).unwrap();
        let b = h.bins(DEFAULT_BINS);
        assert_eq!(b.counts.iter().sum::<u64>(), 1000);
        assert_eq!(b.edges.len(), DEFAULT_BINS + 1);
        let flat = DistanceHistogram::from_values(vec![2.0; 5])
            .unwrap()
            .bins(10);
        assert_eq!(flat.counts.iter().sum::<u64>(), 5);
        let svg = h.render_svg(20, &[("enacted <A&B>", 40.0)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("enacted &lt;A&amp;B&gt;"));
    }

    #[test]
    fn medoid_costs() {
        let g = path(3);
        let theta = Theta::new(ThetaKind::Unweighted, &g).unwrap();
        let plans = vec![plan(&[0, 0, 1]), plan(&[0, 1, 1])];
        assert_eq!(
            medoid_cost(&plans[0], &plans, &[1.0, 0.0], &theta).unwrap(),
            0.0
        );
        assert_eq!(
            medoid_cost(&plans[0], &plans, &[0.5, 0.5], &theta).unwrap(),
            1.0
        );
        assert_eq!(
            medoid_cost(&plans[1], &plans, &[0.5, 0.5], &theta).unwrap(),
            1.0
        );
        assert!(matches!(
            medoid_cost(&plans[0], &plans, &[0.5, 0.6], &theta),
            Err(Error::ProbabilityMass { .. })
        ));
    }

    #[test]
    fn committee() {
        let g = path(4);
        let theta = Theta::new(ThetaKind::Unweighted, &g).unwrap();
        let one = vec![plan(&[0, 0, 1, 1])];
        assert_eq!(committee_medoid(&one, &[3], &theta).unwrap().index, 0);

        let cands = vec![
            plan(&[0, 0, 1, 1]),
            plan(&[0, 1, 1, 1]),
            plan(&[0, 0, 0, 1]),
        ];
        let votes = [2, 1, 1];
        let got = committee_medoid(&cands, &votes, &theta).unwrap();
        // Brute force.
        let costs: Vec<f64> = cands
            .iter()
            .map(|c| {
                cands
                    .iter()
                    .zip(votes)
                    .map(|(o, v)| v as f64 * distance(c, o, &theta).unwrap())
                    .sum()
            })
            .collect();
        let best = costs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(got.index, costs.iter().position(|&c| c == best).unwrap());
        assert_eq!(got.cost, best);
        let scaled = committee_medoid(&cands, &[20, 10, 10], &theta).unwrap();
        assert_eq!(scaled.index, got.index);
        assert!(matches!(
            committee_medoid(&cands, &[0, 0, 0], &theta),
            Err(Error::ZeroVotes)
        ));
    }

    #[test]
    fn relative_errors() {
        assert_eq!(relative_error_of(2.0, 2.0).unwrap(), 0.0);
        assert!((relative_error_of(2.0, 2.1).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(
            relative_error_of(2.0, 2.1).unwrap(),
            relative_error_of(2.1, 2.0).unwrap()
        );
        assert!(matches!(
            relative_error_of(0.0, 1.0),
            Err(Error::ZeroDistance)
        ));
    }

    #[test]
    fn seat_counts() {
        let p = plan(&[0, 0, 1, 1]);
        let all_a = VoteTable::new(vec![1.0; 4], vec![0.0; 4]).unwrap();
        let r = seats(&p, &all_a).unwrap();
        assert_eq!((r.seats_a, r.seats_b), (2, 0));

        let votes = VoteTable::new(vec![3.0, 0.0, 0.0, 3.0], vec![0.0, 2.0, 2.0, 0.0]).unwrap();
        let r = seats(&p, &votes).unwrap();
        assert_eq!((r.seats_a, r.seats_b), (2, 0));
        assert_eq!(r.totals, vec![(3.0, 2.0), (3.0, 2.0)]);
        assert_eq!(r.shares_a(), vec![0.6, 0.6]);

        let tied = VoteTable::new(vec![1.0, 1.0, 2.0, 0.0], vec![1.0, 1.0, 0.0, 1.0]).unwrap();
        let r = seats(&p, &tied).unwrap();
        assert_eq!((r.seats_a, r.seats_b, r.ties.clone()), (1, 0, vec![0]));
        assert!(VoteTable::new(vec![0.0], vec![0.0]).is_err());
        assert!(seats(&plan(&[0, 1]), &tied).is_err());
    }

    #[test]
    fn seat_histograms() {
        let votes = VoteTable::new(vec![3.0, 0.0, 0.0, 3.0], vec![0.0, 2.0, 2.0, 0.0]).unwrap();
        let h = seats_histogram(&[plan(&[0, 0, 1, 1])], &votes).unwrap();
        assert_eq!(h, vec![0, 0, 1]);
        // 2x2 grid (units 0 1 / 2 3): the horizontal split gives A one seat,
        // the vertical split gives A none.
        let votes = VoteTable::new(vec![3.0, 3.0, 0.0, 0.0], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let ens = vec![plan(&[0, 0, 1, 1]), plan(&[0, 1, 0, 1])];
        let h = seats_histogram(&ens, &votes).unwrap();
        assert_eq!(h, vec![0, 1, 1]);
        assert_eq!(h.iter().sum::<u64>(), 2);
        assert!(seats_histogram(&[], &votes).is_err());
    }
}
