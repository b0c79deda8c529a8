//! `dm`: distance-based ensemble analysis from the command line.
//!
//! Exit status is 0 on success, 1 when the inputs are well formed but the
//! request fails on its merits (an invalid plan, a stalled chain), and 2 for
//! usage, I/O and parse errors.
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod pipeline;

#[derive(Parser)]
#[command(
    name = "dm",
    version,
    about = "Centroids, medoids and outliers of districting-plan ensembles"
)]
struct Cli {
    /// Worker threads for parallel stages (0 = one per core). Results do
    /// not depend on this value.
    #[arg(long, env = "DM_THREADS", default_value_t = 1, global = true)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or check dual graphs.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Seed or check district plans.
    #[command(subcommand)]
    Plan(PlanCmd),
    /// Distance between two plans.
    Dist(DistArgs),
    /// Recombination chain, medoid refinement and outlier planting.
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Centroid of a plan directory.
    Centroid(CentroidArgs),
    /// Sample medoid of a plan directory.
    Medoid(MedoidArgs),
    /// Histogram of d² to the centroid over a plan directory.
    Hist(HistArgs),
    /// Percentile rank of probe plans against a histogram.
    Percentile(PercentileArgs),
    /// Two-party seat count of a plan.
    Seats(SeatsArgs),
    /// Cut-form export and exact solve for tiny graphs.
    #[command(subcommand)]
    Kcut(KcutCmd),
    /// Chain, centroid, histogram, medoid and refinement for one or more seeds.
    Pipeline(pipeline::PipelineArgs),
    /// Summarize a pipeline directory.
    Report(pipeline::ReportArgs),
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Write a rows × cols lattice graph.
    Gen(GraphGenArgs),
    /// Load a graph file and print its summary.
    Validate { graph: PathBuf },
}

#[derive(Args)]
struct GraphGenArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    /// Draw integer populations uniformly from 1..=MAX instead of all ones.
    #[arg(long, value_name = "MAX")]
    pop_max: Option<u32>,
    /// Seed for --pop-max.
    #[arg(long, default_value_t = 0)]
    pop_seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

/// Validity rules shared by every plan-producing command.
#[derive(Args, Clone, Copy)]
struct ValidityArgs {
    /// Population tolerance ε.
    #[arg(long, default_value_t = dm_core::districting::DEFAULT_POP_TOLERANCE)]
    eps: f64,
    /// Cap on the number of cut edges.
    #[arg(long)]
    max_cut_edges: Option<usize>,
}

impl ValidityArgs {
    fn config(&self) -> dm_core::ValidityConfig {
        dm_core::ValidityConfig {
            pop_tolerance: self.eps,
            max_cut_edges: self.max_cut_edges,
        }
    }
}

#[derive(Subcommand)]
enum PlanCmd {
    /// Draw a valid starting plan by recursive spanning-tree splits.
    Seed {
        graph: PathBuf,
        #[arg(short)]
        k: usize,
        #[command(flatten)]
        validity: ValidityArgs,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check a plan against the validity rules.
    Validate {
        graph: PathBuf,
        plan: PathBuf,
        #[command(flatten)]
        validity: ValidityArgs,
    },
}

#[derive(Args)]
struct DistArgs {
    graph: PathBuf,
    plan_a: PathBuf,
    plan_b: PathBuf,
    /// unweighted | pop | pathdecay:RATE | explicit:FILE
    #[arg(long, default_value = "unweighted")]
    theta: String,
}

#[derive(Subcommand)]
enum ChainCmd {
    /// Sample an ensemble into a plan directory.
    Run(ChainRunArgs),
    /// Hill-climb a plan toward a centroid.
    Refine(ClimbArgs),
    /// Hill-climb a plan away from a centroid.
    Outlier(ClimbArgs),
}

#[derive(Args)]
struct ChainRunArgs {
    graph: PathBuf,
    #[arg(short)]
    k: usize,
    /// Accepted transitions to run.
    #[arg(long)]
    steps: u64,
    #[arg(long, default_value_t = dm_core::chain::DEFAULT_BURN_IN)]
    burn_in: u64,
    #[arg(long, default_value_t = 1)]
    thin: u64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    validity: ValidityArgs,
    /// Start here instead of a seeded plan.
    #[arg(long)]
    start: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ClimbArgs {
    graph: PathBuf,
    #[arg(long)]
    start: PathBuf,
    #[arg(long)]
    centroid: PathBuf,
    #[arg(long, default_value = "unweighted")]
    theta: String,
    /// Proposals to make.
    #[arg(long)]
    steps: u64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    validity: ValidityArgs,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the score after every accepted move, one per line.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct CentroidArgs {
    graph: PathBuf,
    #[arg(long)]
    plans: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MedoidArgs {
    graph: PathBuf,
    #[arg(long)]
    plans: PathBuf,
    #[arg(long)]
    centroid: PathBuf,
    #[arg(long, default_value = "unweighted")]
    theta: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct HistArgs {
    graph: PathBuf,
    #[arg(long)]
    plans: PathBuf,
    #[arg(long)]
    centroid: PathBuf,
    #[arg(long, default_value = "unweighted")]
    theta: String,
    #[arg(short, long)]
    output: PathBuf,
    /// Also render an SVG histogram.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Plans to mark on the SVG.
    #[arg(long)]
    probe: Vec<PathBuf>,
    #[arg(long, default_value_t = dm_core::analysis::DEFAULT_BINS)]
    bins: usize,
}

#[derive(Args)]
struct PercentileArgs {
    graph: PathBuf,
    #[arg(long)]
    hist: PathBuf,
    #[arg(long)]
    centroid: PathBuf,
    /// Defaults to the θ recorded in the histogram header.
    #[arg(long)]
    theta: Option<String>,
    #[arg(long, required = true)]
    probe: Vec<PathBuf>,
}

#[derive(Args)]
struct SeatsArgs {
    graph: PathBuf,
    plan: PathBuf,
    votes: PathBuf,
    /// Also tabulate seats over every plan in this directory.
    #[arg(long)]
    plans: Option<PathBuf>,
}

#[derive(Subcommand)]
enum KcutCmd {
    /// Write the cut weights derived from a centroid.
    Export {
        graph: PathBuf,
        #[arg(long)]
        centroid: PathBuf,
        #[arg(long, default_value = "unweighted")]
        theta: String,
        #[arg(short)]
        k: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Maximize the cut over every valid plan (at most 16 units).
    Solve {
        instance: PathBuf,
        graph: PathBuf,
        #[command(flatten)]
        validity: ValidityArgs,
        /// Write the first optimal plan here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// The request was understood but cannot be satisfied.
#[derive(Debug)]
struct Rejected(String);

impl std::fmt::Display for Rejected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Rejected {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<dm_core::Error>() {
            return match e {
                dm_core::Error::Io { .. } | dm_core::Error::Parse { .. } => 2,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
        if cause.is::<Rejected>() {
            return 1;
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()?;
    match cli.command {
        Command::Graph(GraphCmd::Gen(a)) => commands::graph_gen(a),
        Command::Graph(GraphCmd::Validate { graph }) => commands::graph_validate(&graph),
        Command::Plan(PlanCmd::Seed {
            graph,
            k,
            validity,
            seed,
            output,
        }) => commands::plan_seed(&graph, k, validity.config(), seed, &output),
        Command::Plan(PlanCmd::Validate {
            graph,
            plan,
            validity,
        }) => commands::plan_validate(&graph, &plan, validity.config()),
        Command::Dist(a) => commands::dist(a),
        Command::Chain(ChainCmd::Run(a)) => commands::chain_run(a),
        Command::Chain(ChainCmd::Refine(a)) => commands::climb(a, false),
        Command::Chain(ChainCmd::Outlier(a)) => commands::climb(a, true),
        Command::Centroid(a) => commands::centroid(a),
        Command::Medoid(a) => commands::medoid(a),
        Command::Hist(a) => commands::hist(a),
        Command::Percentile(a) => commands::percentile(a),
        Command::Seats(a) => commands::seats(a),
        Command::Kcut(KcutCmd::Export {
            graph,
            centroid,
            theta,
            k,
            output,
        }) => commands::kcut_export(&graph, &centroid, &theta, k, &output),
        Command::Kcut(KcutCmd::Solve {
            instance,
            graph,
            validity,
            output,
        }) => commands::kcut_solve(&instance, &graph, validity.config(), output.as_deref()),
        Command::Pipeline(a) => pipeline::pipeline(a),
        Command::Report(a) => pipeline::report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
