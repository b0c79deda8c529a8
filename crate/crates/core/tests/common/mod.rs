//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's distance or centroid code.
#![allow(dead_code)]

use std::collections::VecDeque;

use dm_core::districting::Plan;
use dm_core::graph::{make_grid, DualGraph, GridSpec, PopModel};
use dm_core::ThetaKind;
use rand::Rng;

/// Grid with integer-valued populations in `1..=9`.
pub fn random_grid<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DualGraph {
    let pops = (0..rows * cols)
        .map(|_| rng.random_range(1..=9) as f64)
        .collect();
    make_grid(&GridSpec {
        rows,
        cols,
        pop_model: PopModel::PerCell(pops),
    })
    .unwrap()
}

/// Arbitrary (not necessarily valid) labeling with at most `k` districts.
pub fn random_plan<R: Rng>(rng: &mut R, n: usize, k: usize) -> Plan {
    let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..k as u32)).collect();
    Plan::from_labels(&labels).unwrap()
}

pub fn hops(g: &DualGraph, src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.n()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Dense θ table built from first principles.
pub fn theta_table(g: &DualGraph, kind: &ThetaKind) -> Vec<Vec<f64>> {
    let n = g.n();
    let mut t = vec![vec![1.0; n]; n];
    for i in 0..n {
        let h = hops(g, i);
        for j in 0..n {
            if i == j {
                continue;
            }
            t[i][j] = match kind {
                ThetaKind::Unweighted => 1.0,
                ThetaKind::PopulationProduct => g.pop(i) * g.pop(j),
                ThetaKind::PathDecay { rate } => (-rate * h[j] as f64).exp(),
                ThetaKind::Explicit(e) => e.get(i, j),
            };
        }
    }
    t
}

pub fn co(plan: &Plan, i: usize, j: usize) -> f64 {
    if plan.assignment()[i] == plan.assignment()[j] {
        1.0
    } else {
        0.0
    }
}

/// `Σ_{i<j} θ |A1 − A2|`.
pub fn oracle_distance(a: &Plan, b: &Plan, t: &[Vec<f64>]) -> f64 {
    let n = a.n();
    let mut s = 0.0;
    for j in 1..n {
        for i in 0..j {
            s += t[i][j] * (co(a, i, j) - co(b, i, j)).abs();
        }
    }
    s
}

/// Co-districting frequencies of an ensemble, as a dense matrix.
pub fn oracle_centroid(plans: &[Plan]) -> Vec<Vec<f64>> {
    let n = plans[0].n();
    let mut c = vec![vec![0.0; n]; n];
    for p in plans {
        for i in 0..n {
            for j in 0..n {
                c[i][j] += co(p, i, j);
            }
        }
    }
    for row in &mut c {
        for v in row.iter_mut() {
            *v /= plans.len() as f64;
        }
    }
    c
}

/// `Σ_{i<j} θ (A − c)²`.
pub fn oracle_d2(plan: &Plan, c: &[Vec<f64>], t: &[Vec<f64>]) -> f64 {
    let n = plan.n();
    let mut s = 0.0;
    for j in 1..n {
        for i in 0..j {
            let d = co(plan, i, j) - c[i][j];
            s += t[i][j] * d * d;
        }
    }
    s
}

/// Indices minimizing the summed pairwise distance to the whole ensemble,
/// by the quadratic definition.
pub fn brute_medoid_set(plans: &[Plan], t: &[Vec<f64>], tol: f64) -> Vec<usize> {
    let costs: Vec<f64> = plans
        .iter()
        .map(|p| plans.iter().map(|q| oracle_distance(p, q, t)).sum())
        .collect();
    let best = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    (0..plans.len())
        .filter(|&i| costs[i] - best <= tol * best.max(1.0))
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    scale == 0.0 || (a - b).abs() <= tol * scale
}
