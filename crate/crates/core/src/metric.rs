//! The θ-weighted family of plan distances.
//!
//! For co-membership matrices `A1`, `A2` the distance is
//! `d(A1, A2) = Σ_{i<j} θ(i,j) |A1(i,j) − A2(i,j)|` and its squared companion
//! `d²(A1, A2) = Σ_{i<j} θ(i,j) (A1(i,j) − A2(i,j))²`. On two plans both
//! operands are binary and the two coincide; `d²` additionally accepts
//! fractional (centroid) operands.
use std::fmt;

use crate::centroid::CoMembership;
use crate::districting::Plan;
use crate::error::{Error, Result};
use crate::graph::DualGraph;
use crate::pairs::{pair_count, tri_index, PairwiseSum};

/// Explicit symmetric weights, stored for `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitTheta {
    n: usize,
    values: Vec<f64>,
}

impl ExplicitTheta {
    /// `values` is indexed by [`tri_index`]; every entry must be positive.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != pair_count(n) {
            return Err(Error::SizeMismatch {
                expected: pair_count(n),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "explicit theta entry #{bad} = {} must be positive",
                values[bad]
            )));
        }
        Ok(ExplicitTheta { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = vec![0.0; pair_count(n)];
        for j in 1..n {
            for i in 0..j {
                values[tri_index(i, j)] = f(i, j);
            }
        }
        ExplicitTheta::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[tri_index(i.min(j), i.max(j))]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThetaKind {
    Unweighted,
    /// `θ(i,j) = w(i)·w(j)`.
    PopulationProduct,
    /// `θ(i,j) = exp(−rate · hops(i,j))`.
    PathDecay {
        rate: f64,
    },
    Explicit(ExplicitTheta),
}

impl ThetaKind {
    /// Parses `unweighted`, `pop` or `pathdecay:<rate>`. Explicit weights
    /// come from a file and are built by the caller.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec {
            "unweighted" => Ok(ThetaKind::Unweighted),
            "pop" => Ok(ThetaKind::PopulationProduct),
            _ => match spec.strip_prefix("pathdecay:") {
                Some(rate) => {
                    let rate: f64 = rate
                        .parse()
                        .map_err(|e| Error::parse("theta spec", format!("{spec:?}: {e}")))?;
                    if !(rate > 0.0) || !rate.is_finite() {
                        return Err(Error::InvalidParameter(format!(
                            "path-decay rate {rate} must be positive"
                        )));
                    }
                    Ok(ThetaKind::PathDecay { rate })
                }
                None => Err(Error::parse(
                    "theta spec",
                    format!("{spec:?} is not unweighted|pop|pathdecay:<rate>|explicit:<file>"),
                )),
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ThetaKind::Unweighted => "unweighted",
            ThetaKind::PopulationProduct => "pop",
            ThetaKind::PathDecay { .. } => "pathdecay",
            ThetaKind::Explicit(_) => "explicit",
        }
    }
}

impl fmt::Display for ThetaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaKind::PathDecay { rate } => write!(f, "pathdecay:{rate}"),
            other => f.write_str(other.label()),
        }
    }
}

/// A θ family bound to a particular graph, with whatever tables it needs
/// precomputed.
#[derive(Debug, Clone)]
pub struct Theta {
    kind: ThetaKind,
    n: usize,
    pops: Vec<f64>,
    /// Triangular table for path-decay weights.
    decay: Vec<f64>,
    kappa: f64,
}

impl Theta {
    pub fn new(kind: ThetaKind, g: &DualGraph) -> Result<Self> {
        let n = g.n();
        let pops: Vec<f64> = g.pops().collect();
        let mut decay = Vec::new();
        match &kind {
            ThetaKind::PathDecay { rate } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "path-decay rate {rate} must be positive"
                    )));
                }
                let hops = g.shortest_path_lengths();
                decay = vec![0.0; pair_count(n)];
                for j in 1..n {
                    for i in 0..j {
                        decay[tri_index(i, j)] = (-rate * hops.get(i, j) as f64).exp();
                    }
                }
            }
            ThetaKind::Explicit(e) if e.n() != n => {
                return Err(Error::SizeMismatch {
                    expected: n,
                    found: e.n(),
                })
            }
            _ => {}
        }
        let mut theta = Theta {
            kind,
            n,
            pops,
            decay,
            kappa: 0.0,
        };
        theta.kappa = theta.compute_kappa();
        Ok(theta)
    }

    fn compute_kappa(&self) -> f64 {
        let max = match &self.kind {
            ThetaKind::Unweighted => 1.0,
            ThetaKind::PopulationProduct => {
                let mut top = [0.0f64; 2];
                for &p in &self.pops {
                    if p > top[0] {
                        top = [p, top[0]];
                    } else if p > top[1] {
                        top[1] = p;
                    }
                }
                top[0] * top[1]
            }
            ThetaKind::PathDecay { .. } => self.decay.iter().copied().fold(0.0, f64::max),
            ThetaKind::Explicit(e) => e.values.iter().copied().fold(0.0, f64::max),
        };
        max.sqrt()
    }

    pub fn kind(&self) -> &ThetaKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `max_{i≠j} sqrt(θ(i,j))`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Weight of the pair `{i, j}`; the diagonal is fixed to 1.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        match &self.kind {
            ThetaKind::Unweighted => 1.0,
            ThetaKind::PopulationProduct => self.pops[i] * self.pops[j],
            ThetaKind::PathDecay { .. } => self.decay[tri_index(i.min(j), i.max(j))],
            ThetaKind::Explicit(e) => e.get(i, j),
        }
    }

    /// Like [`Theta::weight`] but refuses the diagonal, where θ carries no meaning.
    pub fn pair_weight(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::InvalidParameter(format!(
                "theta({i}, {i}) is undefined"
            )));
        }
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidParameter(format!(
                "pair ({i}, {j}) out of range for n = {}",
                self.n
            )));
        }
        Ok(self.weight(i, j))
    }

    /// Per-unit factors `w` with `θ(i,j) = w(i)·w(j)`, when θ factors that way.
    pub fn vertex_factors(&self) -> Option<Vec<f64>> {
        match self.kind {
            ThetaKind::Unweighted => Some(vec![1.0; self.n]),
            ThetaKind::PopulationProduct => Some(self.pops.clone()),
            _ => None,
        }
    }

    pub(crate) fn check_n(&self, n: usize) -> Result<()> {
        if n == self.n {
            Ok(())
        } else {
            Err(Error::SizeMismatch {
                expected: self.n,
                found: n,
            })
        }
    }
}

/// Naive `O(n²)` evaluation of `d_Θ` between two plans.
pub fn distance(p1: &Plan, p2: &Plan, theta: &Theta) -> Result<f64> {
    theta.check_n(p1.n())?;
    theta.check_n(p2.n())?;
    let n = p1.n();
    let mut sum = PairwiseSum::default();
    for j in 1..n {
        for i in 0..j {
            if p1.same_district(i, j) != p2.same_district(i, j) {
                sum.add(theta.weight(i, j));
            }
        }
    }
    Ok(sum.total())
}

/// Naive `O(n²)` evaluation of `d²_Θ` between any two co-membership operands
/// (plan or centroid).
pub fn distance_sq<A, B>(a: &A, b: &B, theta: &Theta) -> Result<f64>
where
    A: CoMembership + ?Sized,
    B: CoMembership + ?Sized,
{
    theta.check_n(a.unit_count())?;
    theta.check_n(b.unit_count())?;
    let n = a.unit_count();
    let mut sum = PairwiseSum::default();
    for j in 1..n {
        for i in 0..j {
            let diff = a.value(i, j) - b.value(i, j);
            if diff != 0.0 {
                sum.add(theta.weight(i, j) * diff * diff);
            }
        }
    }
    Ok(sum.total())
}

/// `d_Θ` through district-intersection aggregates in `O(n + k1·k2)`.
///
/// A vertex set with factor sum `S` and squared-factor sum `Q` holds
/// same-district mass `(S² − Q)/2`; the distance is
/// `mass(p1) + mass(p2) − 2·mass(p1 ∧ p2)`.
pub fn distance_fast(p1: &Plan, p2: &Plan, theta: &Theta) -> Result<f64> {
    theta.check_n(p1.n())?;
    theta.check_n(p2.n())?;
    let w = theta
        .vertex_factors()
        .ok_or(Error::UnsupportedTheta(theta.kind().label()))?;
    let (k1, k2) = (p1.k(), p2.k());
    let mut a = vec![[0.0f64; 2]; k1];
    let mut b = vec![[0.0f64; 2]; k2];
    let mut joint = vec![[0.0f64; 2]; k1 * k2];
    for (unit, &wu) in w.iter().enumerate() {
        let (d1, d2) = (p1.district_of(unit) as usize, p2.district_of(unit) as usize);
        for cell in [&mut a[d1], &mut b[d2], &mut joint[d1 * k2 + d2]] {
            cell[0] += wu;
            cell[1] += wu * wu;
        }
    }
    let mass = |cells: &[[f64; 2]]| {
        let mut sum = PairwiseSum::default();
        for &[s, q] in cells {
            if s != 0.0 {
                sum.add(0.5 * (s * s - q));
            }
        }
        sum.total()
    };
    let d = mass(&a) + mass(&b) - 2.0 * mass(&joint);
    // Cancellation can leave a tiny negative residue for identical plans.
    Ok(d.max(0.0))
}

/// `Σ_{i<j} θ(i,j)·A(i,j)`: the weighted count of same-district pairs.
pub fn same_district_mass(plan: &Plan, theta: &Theta) -> Result<f64> {
    theta.check_n(plan.n())?;
    let mut sum = PairwiseSum::default();
    if let Some(w) = theta.vertex_factors() {
        let mut cells = vec![[0.0f64; 2]; plan.k()];
        for (unit, &wu) in w.iter().enumerate() {
            let c = &mut cells[plan.district_of(unit) as usize];
            c[0] += wu;
            c[1] += wu * wu;
        }
        for [s, q] in cells {
            sum.add(0.5 * (s * s - q));
        }
    } else {
        for members in plan.districts() {
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    sum.add(theta.weight(i, j));
                }
            }
        }
    }
    Ok(sum.total())
}
