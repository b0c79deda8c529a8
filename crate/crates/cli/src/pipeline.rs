//! Multi-seed pipeline and its report.
//!
//! Layout of a pipeline directory:
//!
//! ```text
//! graph.json            copy of the input graph
//! manifest.json         parameters, per-seed statistics, file digests
//! pooled_centroid.csv   centroid over every seed's ensemble
//! seed_<S>/centroid.csv
//! seed_<S>/hist.csv     d² of every kept plan to this seed's centroid
//! seed_<S>/medoid.csv   sample medoid
//! seed_<S>/refined.csv  medoid after hill-climbing toward the centroid
//! ```
//!
//! Each seed's chain is run twice with the same RNG seed: once to build the
//! centroid and once to score the same plans against it. Nothing but the
//! centroid and the current best plan is held in memory.
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use dm_core::analysis::{relative_error_of, DistanceHistogram};
use dm_core::chain::{refine_medoid, run_chain, ChainParams, FnSink, DEFAULT_BURN_IN};
use dm_core::districting::seed_plan;
use dm_core::formats;
use dm_core::{CentroidMatrix, CentroidScorer, DualGraph, Plan};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::load_theta;
use crate::{Rejected, ValidityArgs};

const FORMAT_VERSION: u32 = 1;
const POOLED: &str = "pooled_centroid.csv";

#[derive(Args)]
pub struct PipelineArgs {
    graph: PathBuf,
    #[arg(short)]
    k: usize,
    #[command(flatten)]
    validity: ValidityArgs,
    #[arg(long, default_value = "unweighted")]
    theta: String,
    /// Accepted transitions per chain.
    #[arg(long)]
    steps: u64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: u64,
    #[arg(long, default_value_t = 1)]
    thin: u64,
    /// One chain per seed; repeat for more.
    #[arg(long = "seed", required = true)]
    seeds: Vec<u64>,
    /// Proposals for medoid refinement.
    #[arg(long, default_value_t = 10_000)]
    refine_steps: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
pub struct ReportArgs {
    dir: PathBuf,
    /// Extra plans to rank against every seed's histogram.
    #[arg(long)]
    probe: Vec<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Params {
    k: usize,
    pop_tolerance: f64,
    max_cut_edges: Option<usize>,
    theta: String,
    total_steps: u64,
    burn_in: u64,
    thin: u64,
    refine_steps: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SeedStats {
    seed: u64,
    kept: u64,
    proposals: u64,
    accepted: u64,
    /// Chain state of the sample medoid.
    medoid_state: u64,
    medoid_d2: f64,
    refined_d2: f64,
    refine_proposals: u64,
    files: Vec<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    graph_hash: String,
    params: Params,
    seeds: Vec<SeedStats>,
    pooled_centroid: String,
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

fn run_seed(g: &DualGraph, a: &PipelineArgs, seed: u64) -> Result<(SeedStats, CentroidMatrix)> {
    let cfg = a.validity.config();
    let dir = seed_dir(&a.output, seed);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let theta = load_theta(&a.theta, g)?;
    let params = ChainParams {
        total_steps: a.steps,
        burn_in: a.burn_in,
        thin: a.thin,
        rng_seed: seed,
    };
    let start = seed_plan(g, a.k, &cfg, seed).context("seeding the start plan")?;

    let mut acc = CentroidMatrix::new(g.n());
    let run = run_chain(g, &cfg, start.clone(), &params, &mut acc).context("chain pass 1")?;
    formats::write_centroid(dir.join("centroid.csv"), &acc)?;

    let scorer = CentroidScorer::new(&acc, &theta)?;
    let mut values = Vec::with_capacity(run.kept as usize);
    let mut best: Option<(u64, f64, Plan)> = None;
    let mut sink = FnSink(|state: u64, plan: &Plan| {
        let d2 = scorer.d2(plan)?;
        values.push(d2);
        if best.as_ref().is_none_or(|b| d2 < b.1) {
            best = Some((state, d2, plan.clone()));
        }
        Ok(())
    });
    let rerun = run_chain(g, &cfg, start, &params, &mut sink).context("chain pass 2")?;
    if rerun != run {
        anyhow::bail!("chain pass 2 diverged from pass 1");
    }
    let (medoid_state, medoid_d2, medoid) = best.ok_or(dm_core::Error::EmptyEnsemble)?;
    let hist = DistanceHistogram::from_values(values)?;
    formats::write_histogram(dir.join("hist.csv"), &a.theta, "centroid.csv", &hist)?;
    formats::write_assignment(dir.join("medoid.csv"), g, &medoid)?;

    let refined = refine_medoid(g, medoid, &scorer, &cfg, seed, a.refine_steps)
        .context("medoid refinement")?;
    formats::write_assignment(dir.join("refined.csv"), g, &refined.plan)?;

    let mut files = Vec::new();
    for name in ["centroid.csv", "hist.csv", "medoid.csv", "refined.csv"] {
        files.push((name.to_string(), formats::file_digest(dir.join(name))?));
    }
    let stats = SeedStats {
        seed,
        kept: run.kept,
        proposals: run.proposals,
        accepted: run.accepted,
        medoid_state,
        medoid_d2,
        refined_d2: refined.last(),
        refine_proposals: refined.proposals,
        files,
    };
    Ok((stats, acc))
}

pub fn pipeline(a: PipelineArgs) -> Result<()> {
    let g = DualGraph::load(&a.graph)?;
    a.validity.config().check()?;
    load_theta(&a.theta, &g)?;
    let mut seeds = a.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    g.save(a.output.join("graph.json"))?;

    let results = seeds
        .par_iter()
        .map(|&s| run_seed(&g, &a, s).with_context(|| format!("seed {s}")))
        .collect::<Result<Vec<_>>>()?;

    let mut pooled = CentroidMatrix::new(g.n());
    for (_, acc) in &results {
        pooled.merge_from(acc)?;
    }
    formats::write_centroid(a.output.join(POOLED), &pooled)?;

    let cfg = a.validity.config();
    let manifest = Manifest {
        version: FORMAT_VERSION,
        graph_hash: g.content_hash(),
        params: Params {
            k: a.k,
            pop_tolerance: cfg.pop_tolerance,
            max_cut_edges: cfg.max_cut_edges,
            theta: a.theta.clone(),
            total_steps: a.steps,
            burn_in: a.burn_in,
            thin: a.thin,
            refine_steps: a.refine_steps,
        },
        seeds: results.into_iter().map(|(s, _)| s).collect(),
        pooled_centroid: formats::file_digest(a.output.join(POOLED))?,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    let path = a.output.join(formats::MANIFEST_FILE);
    fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;

    for s in &manifest.seeds {
        println!(
            "seed {}: {} plans, medoid d2 {} (state {}), refined d2 {}",
            s.seed, s.kept, s.medoid_d2, s.medoid_state, s.refined_d2
        );
    }
    println!("wrote {}", a.output.display());
    Ok(())
}

fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(formats::MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| dm_core::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| dm_core::Error::Parse {
        context: format!("{}:{}", path.display(), e.line()),
        message: e.to_string(),
    })?;
    if m.version != FORMAT_VERSION {
        anyhow::bail!(Rejected(format!(
            "{}: unsupported version {}",
            path.display(),
            m.version
        )));
    }
    Ok(m)
}

pub fn report(a: ReportArgs) -> Result<()> {
    let m = load_manifest(&a.dir)?;
    let g = DualGraph::load(a.dir.join("graph.json"))?;
    if g.content_hash() != m.graph_hash {
        anyhow::bail!(Rejected(format!(
            "{}: graph hash does not match the manifest",
            a.dir.join("graph.json").display()
        )));
    }
    let theta = load_theta(&m.params.theta, &g)?;
    let probes = a
        .probe
        .iter()
        .map(|p| Ok((p, formats::read_assignment(p, &g)?)))
        .collect::<Result<Vec<_>>>()?;

    println!(
        "k = {}, theta = {}, steps = {}, burn-in = {}, thin = {}",
        m.params.k, m.params.theta, m.params.total_steps, m.params.burn_in, m.params.thin
    );
    let mut refined = Vec::new();
    for s in &m.seeds {
        let dir = seed_dir(&a.dir, s.seed);
        let acc = formats::read_centroid(dir.join("centroid.csv"))?;
        let hist = formats::read_histogram(dir.join("hist.csv"))?.histogram;
        let scorer = CentroidScorer::new(&acc, &theta)?;
        let medoid = formats::read_assignment(dir.join("medoid.csv"), &g)?;
        let plan = formats::read_assignment(dir.join("refined.csv"), &g)?;
        let (md2, rd2) = (scorer.d2(&medoid)?, scorer.d2(&plan)?);
        println!("seed {}", s.seed);
        println!(
            "  T = {}, support {} pairs",
            acc.samples(),
            acc.support_len()
        );
        println!(
            "  medoid d2 {md2}, percentile {:.3}",
            hist.percentile_of(md2)
        );
        println!(
            "  refined d2 {rd2}, percentile {:.3}",
            hist.percentile_of(rd2)
        );
        for (path, p) in &probes {
            let d2 = scorer.d2(p)?;
            println!(
                "  probe {}: d2 {d2}, percentile {:.3}",
                path.display(),
                hist.percentile_of(d2)
            );
        }
        refined.push((s.seed, plan));
    }

    let pooled = formats::read_centroid(a.dir.join(POOLED))?;
    let scorer = CentroidScorer::new(&pooled, &theta)?;
    let d2: Vec<f64> = refined
        .iter()
        .map(|(_, p)| scorer.d2(p))
        .collect::<dm_core::Result<_>>()?;
    println!(
        "refined medoids against the pooled centroid (T = {}):",
        pooled.samples()
    );
    for ((seed, _), v) in refined.iter().zip(&d2) {
        println!("  seed {seed}: d2 {v}");
    }
    if refined.len() > 1 {
        println!("pairwise relative error (%):");
        for i in 0..refined.len() {
            for j in i + 1..refined.len() {
                let re = match relative_error_of(d2[i], d2[j]) {
                    Ok(re) => format!("{:.4}", 100.0 * re),
                    Err(e) => format!("undefined ({e})"),
                };
                println!("  seed {} vs seed {}: {re}", refined[i].0, refined[j].0);
            }
        }
    }
    Ok(())
}
