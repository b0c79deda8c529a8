use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use dm_core::analysis::{seats as seat_count, seats_histogram, DistanceHistogram};
use dm_core::centroid::sample_medoid;
use dm_core::chain::{plant_outlier, refine_medoid, run_chain, ChainParams, PlanScore};
use dm_core::districting::{cut_edges, is_valid, population_balance, seed_plan, Validity};
use dm_core::formats::{self, ChainManifest, PlanDirWriter};
use dm_core::graph::{make_grid, GridSpec, PopModel};
use dm_core::kcut::{build_instance, exact_population_medoid};
use dm_core::metric::{distance, distance_sq};
use dm_core::{CentroidMatrix, CentroidScorer, DualGraph, Plan, Theta, ThetaKind, ValidityConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{
    CentroidArgs, ChainRunArgs, ClimbArgs, DistArgs, GraphGenArgs, HistArgs, MedoidArgs,
    PercentileArgs, Rejected, SeatsArgs,
};

/// Parses `unweighted | pop | pathdecay:RATE | explicit:FILE` against a graph.
pub fn load_theta(spec: &str, g: &DualGraph) -> Result<Theta> {
    let kind = match spec.strip_prefix("explicit:") {
        Some(path) => ThetaKind::Explicit(formats::read_explicit_theta(path, g)?),
        None => ThetaKind::parse(spec)?,
    };
    Ok(Theta::new(kind, g)?)
}

/// Every plan of a directory, in state order.
pub fn read_plans(dir: &Path, g: &DualGraph) -> Result<Vec<Plan>> {
    let files = formats::list_plan_files(dir)?;
    if files.is_empty() {
        anyhow::bail!(Rejected(format!(
            "no plan_<state>.csv files in {}",
            dir.display()
        )));
    }
    let plans = files
        .par_iter()
        .map(|(_, p)| formats::read_assignment(p, g))
        .collect::<dm_core::Result<Vec<_>>>()?;
    Ok(plans)
}

pub fn write_lines(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut text = String::new();
    for v in values {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn graph_gen(a: GraphGenArgs) -> Result<()> {
    let pop_model = match a.pop_max {
        None => PopModel::Uniform(1.0),
        Some(max) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.pop_seed);
            PopModel::PerCell(
                (0..a.rows * a.cols)
                    .map(|_| rng.random_range(1..=max.max(1)) as f64)
                    .collect(),
            )
        }
    };
    let g = make_grid(&GridSpec {
        rows: a.rows,
        cols: a.cols,
        pop_model,
    })?;
    g.save(&a.output)?;
    println!(
        "wrote {} ({} units, hash {})",
        a.output.display(),
        g.n(),
        g.content_hash()
    );
    Ok(())
}

pub fn graph_validate(path: &Path) -> Result<()> {
    let g = DualGraph::load(path)?;
    println!("units: {}", g.n());
    println!("edges: {}", g.edges().len());
    println!("total population: {}", g.total_pop());
    println!("hash: {}", g.content_hash());
    Ok(())
}

pub fn plan_seed(graph: &Path, k: usize, cfg: ValidityConfig, seed: u64, out: &Path) -> Result<()> {
    let g = DualGraph::load(graph)?;
    let plan = seed_plan(&g, k, &cfg, seed)?;
    formats::write_assignment(out, &g, &plan)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn plan_validate(graph: &Path, plan: &Path, cfg: ValidityConfig) -> Result<()> {
    let g = DualGraph::load(graph)?;
    let p = formats::read_assignment(plan, &g)?;
    let balance = population_balance(&p, &g)?;
    println!("districts: {}", p.k());
    println!("ideal population: {}", balance.ideal);
    println!("max deviation: {:.6}", balance.max_deviation);
    println!("cut edges: {}", cut_edges(&p, &g)?);
    match is_valid(&p, &g, &cfg)? {
        Validity::Valid => {
            println!("valid");
            Ok(())
        }
        Validity::Invalid(rule) => {
            println!("invalid: {rule}");
            Err(Rejected(format!("{} violates the {rule} rule", plan.display())).into())
        }
    }
}

pub fn dist(a: DistArgs) -> Result<()> {
    let g = DualGraph::load(&a.graph)?;
    let theta = load_theta(&a.theta, &g)?;
    let p1 = formats::read_assignment(&a.plan_a, &g)?;
    let p2 = formats::read_assignment(&a.plan_b, &g)?;
    println!("d = {}", distance(&p1, &p2, &theta)?);
    println!("d2 = {}", distance_sq(&p1, &p2, &theta)?);
    Ok(())
}

pub fn chain_run(a: ChainRunArgs) -> Result<()> {
    let g = DualGraph::load(&a.graph)?;
    let cfg = a.validity.config();
    let start = match &a.start {
        Some(p) => formats::read_assignment(p, &g)?,
        None => seed_plan(&g, a.k, &cfg, a.seed)?,
    };
    if start.k() != a.k {
        anyhow::bail!(Rejected(format!(
            "start plan has {} districts, expected {}",
            start.k(),
            a.k
        )));
    }
    let params = ChainParams {
        total_steps: a.steps,
        burn_in: a.burn_in,
        thin: a.thin,
        rng_seed: a.seed,
    };
    let mut sink = PlanDirWriter::create(&a.output, &g)?;
    let run = run_chain(&g, &cfg, start, &params, &mut sink)?;
    ChainManifest {
        graph_hash: g.content_hash(),
        k: a.k,
        pop_tolerance: cfg.pop_tolerance,
        max_cut_edges: cfg.max_cut_edges,
        total_steps: a.steps,
        burn_in: a.burn_in,
        thin: a.thin,
        rng_seed: a.seed,
        seed_plan_seed: a.seed,
        kept: run.kept,
        proposals: run.proposals,
        accepted: run.accepted,
    }
    .save(&a.output)?;
    println!(
        "kept {} plans in {} ({} proposals, {} accepted)",
        run.kept,
        a.output.display(),
        run.proposals,
        run.accepted
    );
    Ok(())
}

pub fn climb(a: ClimbArgs, outward: bool) -> Result<()> {
    let g = DualGraph::load(&a.graph)?;
    let theta = load_theta(&a.theta, &g)?;
    let acc = formats::read_centroid(&a.centroid)?;
    let start = formats::read_assignment(&a.start, &g)?;
    let scorer = CentroidScorer::new(&acc, &theta)?;
    let cfg = a.validity.config();
    let climb = if outward {
        plant_outlier
    } else {
        refine_medoid
    };
    let r = climb(&g, start, &scorer as &dyn PlanScore, &cfg, a.seed, a.steps)?;
    formats::write_assignment(&a.output, &g, &r.plan)?;
    if let Some(path) = &a.trajectory {
        write_lines(path, r.trajectory.iter().copied())?;
    }
    println!("d2 start: {}", r.initial());
    println!("d2 final: {}", r.last());
    println!(
        "accepted moves: {} of {} proposals",
        r.trajectory.len() - 1,
        r.proposals
    );
    if r.converged_by_stall {
        println!(
            "stopped early: no accepted move in {} proposals",
            dm_core::chain::STALL_LIMIT
        );
    }
    Ok(())
}

pub fn centroid(a: CentroidArgs) -> Result<()> {
    let g = DualGraph::load(&a.graph)?;
    let plans = read_plans(&a.plans, &g)?;
    let mut acc = CentroidMatrix::new(g.n());
    for p in &plans {
        acc.accumulate(p)?;
    }
    formats::write_centroid(&a.output, &acc)?;
    println!(
        "T = {}, support {} pairs, wrote {}",
        acc.samples(),
        acc.support_len(),
        a.output.display()
    );
    Ok(())
}

pub fn medoid(a: MedoidArgs) -> Result<()> {
    let g = DualGraph::load(&a.graph)?;
    let theta = load_theta(&a.theta, &g)?;
    let files = formats::list_plan_files(&a.plans)?;
    let plans = read_plans(&a.plans, &g)?;
    let acc = formats::read_centroid(&a.centroid)?;
    let m = sample_medoid(&plans, &acc, &theta)?;
    println!("medoid: {}", files[m.index].1.display());
    println!("d2: {}", m.d2);
    if let Some(out) = &a.output {
        formats::write_assignment(out, &g, &m.plan)?;
    }
    Ok(())
}

pub fn hist(a: HistArgs) -> Result<()> {
    let g = DualGraph::load(&a.graph)?;
    let theta = load_theta(&a.theta, &g)?;
    let plans = read_plans(&a.plans, &g)?;
    let acc = formats::read_centroid(&a.centroid)?;
    let scorer = CentroidScorer::new(&acc, &theta)?;
    let h = DistanceHistogram::from_ensemble(&plans, &scorer)?;
    formats::write_histogram(&a.output, &a.theta, &a.centroid.display().to_string(), &h)?;
    if let Some(svg) = &a.svg {
        let mut marks = Vec::new();
        for p in &a.probe {
            let plan = formats::read_assignment(p, &g)?;
            let name = p.file_stem().map_or_else(
                || p.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            );
            marks.push((name, scorer.d2(&plan)?));
        }
        let marks: Vec<(&str, f64)> = marks.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        fs::write(svg, h.render_svg(a.bins, &marks))
            .with_context(|| format!("writing {}", svg.display()))?;
    }
    println!(
        "T = {}, min {}, max {}",
        h.len(),
        h.values()[0],
        h.values()[h.len() - 1]
    );
    Ok(())
}

pub fn percentile(a: PercentileArgs) -> Result<()> {
    let g = DualGraph::load(&a.graph)?;
    let file = formats::read_histogram(&a.hist)?;
    let spec = a.theta.as_deref().unwrap_or(&file.theta);
    let theta = load_theta(spec, &g)?;
    let acc = formats::read_centroid(&a.centroid)?;
    let scorer = CentroidScorer::new(&acc, &theta)?;
    for p in &a.probe {
        let plan = formats::read_assignment(p, &g)?;
        let d2 = scorer.d2(&plan)?;
        println!(
            "{}: d2 = {d2}, percentile = {:.3}",
            p.display(),
            file.histogram.percentile_of(d2)
        );
    }
    Ok(())
}

pub fn seats(a: SeatsArgs) -> Result<()> {
    let g = DualGraph::load(&a.graph)?;
    let votes = formats::read_votes(&a.votes, &g)?;
    let plan = formats::read_assignment(&a.plan, &g)?;
    let r = seat_count(&plan, &votes)?;
    println!("seats A: {}", r.seats_a);
    println!("seats B: {}", r.seats_b);
    if !r.ties.is_empty() {
        println!("tied districts: {:?}", r.ties);
    }
    for (d, share) in r.shares_a().iter().enumerate() {
        println!("district {d}: A share {share:.4}");
    }
    if let Some(dir) = &a.plans {
        let plans = read_plans(dir, &g)?;
        let hist = seats_histogram(&plans, &votes)?;
        println!("ensemble seats for A over {} plans:", plans.len());
        for (s, count) in hist.iter().enumerate() {
            println!("  {s}: {count}");
        }
    }
    Ok(())
}

pub fn kcut_export(graph: &Path, centroid: &Path, theta: &str, k: usize, out: &Path) -> Result<()> {
    let g = DualGraph::load(graph)?;
    let theta = load_theta(theta, &g)?;
    let acc = formats::read_centroid(centroid)?;
    let inst = build_instance(&acc, &theta, k)?;
    formats::write_kcut(out, &inst)?;
    println!("wrote {} ({} pairs)", out.display(), inst.entries().count());
    Ok(())
}

pub fn kcut_solve(
    instance: &Path,
    graph: &Path,
    cfg: ValidityConfig,
    out: Option<&Path>,
) -> Result<()> {
    let g = DualGraph::load(graph)?;
    let inst = formats::read_kcut(instance)?;
    let best = exact_population_medoid(&inst, &g, &cfg)?;
    println!("objective: {}", best.objective);
    println!("optimal plans: {}", best.plans.len());
    for p in &best.plans {
        println!("  {:?}", p.assignment());
    }
    if let Some(out) = out {
        formats::write_assignment(out, &g, &best.plans[0])?;
    }
    Ok(())
}
