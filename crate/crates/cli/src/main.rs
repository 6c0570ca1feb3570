//! `mvgehd` command-line driver.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "mvgehd", version, about = "Multi-view graph embedding with hub detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted multi-view graph or a two-cohort subject dataset.
    Generate(GenerateArgs),
    /// Embed a multi-view graph.
    Embed(EmbedArgs),
    /// Score and select hub nodes.
    Hubs(HubsArgs),
    /// k-means on the rows of an embedding.
    ClusterNodes(ClusterNodesArgs),
    /// Cluster subjects by the distances between their embeddings.
    ClusterSubjects(ClusterSubjectsArgs),
    /// Compare predicted labels against truth (ACC and NMI).
    Evaluate(EvaluateArgs),
    /// Subject clustering quality across a range of embedding dimensions.
    SweepK(SweepArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyArg {
    Error,
    #[value(name = "self_loop")]
    SelfLoop,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    #[value(name = "row_norm")]
    RowNorm,
    Betweenness,
}

#[derive(Args, Debug, Serialize)]
pub struct SolverArgs {
    /// Smoothing constant of the l2,1 reweighting.
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Relative change that counts as converged.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Comma-separated fixed view weights; disables automatic weighting.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "error")]
    pub isolated_policy: PolicyArg,
    /// Reweight-and-solve passes per weight update.
    #[arg(long, default_value_t = 1)]
    pub inner_iters: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct KMeansArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct GenerateArgs {
    /// JSON planted-graph spec; flags below override its fields.
    #[arg(long, conflicts_with = "cohort_config")]
    pub spec: Option<PathBuf>,
    /// JSON {spec_a, spec_b, count_a, count_b} for a two-cohort dataset.
    #[arg(long)]
    pub cohort_config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub hubs: Option<usize>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub p_intra: Option<f64>,
    #[arg(long)]
    pub p_inter: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub view_quality: Option<Vec<f64>>,
    #[arg(long)]
    pub size_skew: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Embedding dimension.
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for embedding.csv, weights.json and trace.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(group = clap::ArgGroup::new("selection").required(true).args(["hub_top", "hub_threshold"]))]
pub struct HubsArgs {
    #[arg(long, value_enum, default_value = "row_norm")]
    pub method: MethodArg,
    /// Embedding CSV (row_norm).
    #[arg(long, required_if_eq("method", "row_norm"))]
    pub embedding: Option<PathBuf>,
    /// Graph manifest (betweenness, or hub-edge removal).
    #[arg(long, required_if_eq("method", "betweenness"))]
    pub manifest: Option<PathBuf>,
    /// View used for betweenness.
    #[arg(long, default_value_t = 0)]
    pub view: usize,
    /// Select the T most hub-like nodes.
    #[arg(long)]
    pub hub_top: Option<usize>,
    /// Select nodes at least as hub-like as this score.
    #[arg(long)]
    pub hub_threshold: Option<f64>,
    /// Also write the graph with hub edges removed to this directory.
    #[arg(long, requires = "manifest")]
    pub strip_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ClusterNodesArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long)]
    pub clusters: usize,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["cohort", "embeddings"]))]
pub struct ClusterSubjectsArgs {
    /// Cohort manifest; every subject is embedded first.
    #[arg(long, requires = "k")]
    pub cohort: Option<PathBuf>,
    /// Precomputed embedding CSVs, one per subject.
    #[arg(long, num_args = 1..)]
    pub embeddings: Option<Vec<PathBuf>>,
    /// Embedding dimension when embedding a cohort.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    /// JSON with a `labels` array.
    #[arg(long)]
    pub pred: PathBuf,
    /// JSON with a `labels` array (and optionally `hub_set`).
    #[arg(long)]
    pub truth: PathBuf,
    /// Score only nodes outside the truth file's `hub_set`.
    #[arg(long)]
    pub exclude_hubs: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    /// Cohort labels; defaults to the labels stored in the cohort manifest.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k_min: usize,
    #[arg(long, default_value_t = 15)]
    pub k_max: usize,
    /// k-means reseeds per k.
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn report_error(kind: &str, message: &str) {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("MVGEHD_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("MVGEHD_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = configure_threads() {
        report_error("usage", &e.to_string());
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Embed(a) => commands::embed(a),
        Command::Hubs(a) => commands::hubs(a),
        Command::ClusterNodes(a) => commands::cluster_nodes(a),
        Command::ClusterSubjects(a) => commands::cluster_subjects(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::SweepK(a) => commands::sweep_k(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<mvgehd::Error>().map_or("runtime", mvgehd::Error::kind);
            report_error(kind, &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
