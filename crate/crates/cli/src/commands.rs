use std::path::Path;

use anyhow::{bail, Context, Result};
use mvgehd::cluster::{kmeans_fit, KMeansFit};
use mvgehd::graph::{read_matrix_csv, write_matrix_csv};
use mvgehd::synth::{load_cohort, read_json, save_cohort, write_json};
use mvgehd::{
    betweenness, cluster_subjects as cluster_subject_embeddings, evaluate as score, generate_cohort,
    generate_multiview, hub_scores, load_multiview, remove_hub_edges, save_multiview, solve, solve_all,
    ClusterAssignment, EmbedConfig64, Embedding64, HubMethod, HubReport, HubSelection, IsolatedPolicy, KMeansConfig,
    MultiViewGraph64, PlantedSpec, Solution64, WeightMode,
};
use serde::{Deserialize, Serialize};

use crate::{
    ClusterNodesArgs, ClusterSubjectsArgs, EmbedArgs, EvaluateArgs, GenerateArgs, HubsArgs, KMeansArgs, MethodArg,
    PolicyArg, SolverArgs, SweepArgs,
};

/// Objective increases above this fail the run.
const MONOTONE_SLACK: f64 = 1e-8;

/// Run record embedded in every result file.
#[derive(Serialize)]
struct RunConfig<'a, A> {
    command: &'static str,
    version: &'static str,
    params: &'a A,
}

fn run<'a, A>(command: &'static str, params: &'a A) -> RunConfig<'a, A> {
    RunConfig { command, version: mvgehd::VERSION, params }
}

#[derive(Serialize)]
struct Output<'a, A, B> {
    run: RunConfig<'a, A>,
    #[serde(flatten)]
    body: B,
}

fn write_result<A: Serialize, B: Serialize>(path: &Path, command: &'static str, params: &A, body: B) -> Result<()> {
    ensure_parent(path)?;
    write_json(path, &Output { run: run(command, params), body })?;
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn embed_config(k: usize, s: &SolverArgs) -> EmbedConfig64 {
    EmbedConfig64 {
        epsilon: s.epsilon,
        max_iters: s.max_iters,
        rel_tol: s.tol,
        weight_mode: s.weights.clone().map_or(WeightMode::Auto, WeightMode::Fixed),
        isolated_policy: match s.isolated_policy {
            PolicyArg::Error => IsolatedPolicy::Error,
            PolicyArg::SelfLoop => IsolatedPolicy::SelfLoop,
        },
        inner_iters: s.inner_iters,
        ..EmbedConfig64::new(k)
    }
}

fn kmeans_config(k: &KMeansArgs) -> KMeansConfig {
    KMeansConfig { seed: k.seed, restarts: k.restarts, ..KMeansConfig::default() }
}

fn check_trace(solution: &Solution64, subject: Option<usize>) -> Result<()> {
    let inc = solution.trace.max_increase();
    if inc > MONOTONE_SLACK {
        let at = subject.map_or(String::new(), |i| format!(" for subject {i}"));
        return Err(mvgehd::Error::Invariant(format!("objective rose by {inc:e}{at}")).into());
    }
    Ok(())
}

fn load_embedding(path: &Path) -> Result<Embedding64> {
    Ok(Embedding64::new(read_matrix_csv(path)?).with_context(|| format!("embedding {}", path.display()))?)
}

#[derive(Deserialize)]
struct CohortConfig {
    spec_a: PlantedSpec,
    spec_b: PlantedSpec,
    count_a: usize,
    count_b: usize,
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    if let Some(path) = &args.cohort_config {
        let config: CohortConfig = read_json(path)?;
        let (graphs, labels) = generate_cohort::<f64>(&config.spec_a, &config.spec_b, config.count_a, config.count_b)?;
        save_cohort(&graphs, Some(&labels), &args.out)?;
        #[derive(Serialize)]
        struct Body<'a> {
            labels: &'a [usize],
            spec_a: &'a PlantedSpec,
            spec_b: &'a PlantedSpec,
        }
        let body = Body { labels: &labels, spec_a: &config.spec_a, spec_b: &config.spec_b };
        return write_result(&args.out.join("cohort_truth.json"), "generate", args, body);
    }

    let mut spec: PlantedSpec = match &args.spec {
        Some(p) => read_json(p)?,
        None => PlantedSpec::default(),
    };
    macro_rules! set {
        ($($field:ident <- $arg:expr),* $(,)?) => { $( if let Some(v) = $arg.clone() { spec.$field = v; } )* };
    }
    set!(n <- args.n, clusters <- args.clusters, hubs <- args.hubs, views <- args.views,
         p_intra <- args.p_intra, p_inter <- args.p_inter, noise_sigma <- args.noise,
         view_quality <- args.view_quality, size_skew <- args.size_skew, seed <- args.seed);
    let (graph, truth) = generate_multiview::<f64>(&spec)?;
    save_multiview(&graph, &args.out)?;
    #[derive(Serialize)]
    struct Body<'a> {
        labels: &'a [usize],
        hub_set: &'a [usize],
        spec: &'a PlantedSpec,
    }
    let body = Body { labels: &truth.labels, hub_set: &truth.hub_set, spec: &spec };
    write_result(&args.out.join("truth.json"), "generate", args, body)
}

pub fn embed(args: &EmbedArgs) -> Result<()> {
    let graph: MultiViewGraph64 = load_multiview(&args.manifest)?;
    let solution = solve(&graph, &embed_config(args.k, &args.solver))?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_matrix_csv(&args.out.join("embedding.csv"), solution.embedding.matrix())?;

    #[derive(Serialize)]
    struct Weights<'a> {
        alphas: &'a [f64],
    }
    write_result(&args.out.join("weights.json"), "embed", args, Weights { alphas: &solution.weights.alphas })?;
    write_result(&args.out.join("trace.json"), "embed", args, &solution.trace)?;
    check_trace(&solution, None)
}

pub fn hubs(args: &HubsArgs) -> Result<()> {
    let selection = match (args.hub_top, args.hub_threshold) {
        (Some(t), _) => HubSelection::TopT(t),
        (None, Some(tau)) => HubSelection::Threshold(tau),
        (None, None) => bail!("one of --hub-top or --hub-threshold is required"),
    };
    let graph: Option<MultiViewGraph64> = args.manifest.as_deref().map(load_multiview).transpose()?;
    let report = match args.method {
        MethodArg::RowNorm => {
            let path = args.embedding.as_deref().context("--embedding is required for row_norm")?;
            HubReport::from_scores(hub_scores(&load_embedding(path)?), HubMethod::RowNorm, selection)?
        }
        MethodArg::Betweenness => {
            let graph = graph.as_ref().context("--manifest is required for betweenness")?;
            let view = graph
                .views()
                .get(args.view)
                .ok_or(mvgehd::Error::OutOfRange { index: args.view, len: graph.m() })?;
            HubReport::from_scores(betweenness(view), HubMethod::Betweenness, selection)?
        }
    };
    if let (Some(dir), Some(graph)) = (&args.strip_out, &graph) {
        if report.scores.len() != graph.n() {
            return Err(mvgehd::Error::DimensionMismatch(format!(
                "{} scores for a {}-node graph",
                report.scores.len(),
                graph.n()
            ))
            .into());
        }
        save_multiview(&remove_hub_edges(graph, &report.selected)?, dir)?;
    }
    write_result(&args.out, "hubs", args, &report)
}

#[derive(Serialize)]
struct Labels<'a> {
    k: usize,
    labels: &'a [usize],
}

pub fn cluster_nodes(args: &ClusterNodesArgs) -> Result<()> {
    let embedding = load_embedding(&args.embedding)?;
    let fit: KMeansFit<f64> = kmeans_fit(embedding.matrix(), args.clusters, &kmeans_config(&args.kmeans))?;
    #[derive(Serialize)]
    struct Body<'a> {
        #[serde(flatten)]
        labels: Labels<'a>,
        wcss: f64,
    }
    let body = Body { labels: Labels { k: fit.assignment.k, labels: &fit.assignment.labels }, wcss: fit.wcss };
    write_result(&args.out, "cluster-nodes", args, body)
}

fn embed_cohort(graphs: &[MultiViewGraph64], config: &EmbedConfig64) -> Result<Vec<Solution64>> {
    let solutions = solve_all(graphs, config)
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.with_context(|| format!("embedding subject {i}")))
        .collect::<Result<Vec<_>>>()?;
    for (i, s) in solutions.iter().enumerate() {
        check_trace(s, Some(i))?;
    }
    Ok(solutions)
}

pub fn cluster_subjects(args: &ClusterSubjectsArgs) -> Result<()> {
    let (embeddings, weights): (Vec<Embedding64>, Option<Vec<Vec<f64>>>) = match (&args.cohort, &args.embeddings) {
        (Some(cohort), _) => {
            let k = args.k.context("--k is required with --cohort")?;
            let (graphs, _) = load_cohort::<f64>(cohort)?;
            let solutions = embed_cohort(&graphs, &embed_config(k, &args.solver))?;
            let weights = solutions.iter().map(|s| s.weights.alphas.clone()).collect();
            (solutions.into_iter().map(|s| s.embedding).collect(), Some(weights))
        }
        (None, Some(paths)) => (paths.iter().map(|p| load_embedding(p)).collect::<Result<_>>()?, None),
        (None, None) => bail!("one of --cohort or --embeddings is required"),
    };
    let assignment = cluster_subject_embeddings(&embeddings, args.clusters, &kmeans_config(&args.kmeans))?;
    #[derive(Serialize)]
    struct Body<'a> {
        #[serde(flatten)]
        labels: Labels<'a>,
        #[serde(skip_serializing_if = "Option::is_none")]
        view_weights: Option<Vec<Vec<f64>>>,
    }
    let body = Body { labels: Labels { k: assignment.k, labels: &assignment.labels }, view_weights: weights };
    write_result(&args.out, "cluster-subjects", args, body)
}

#[derive(Deserialize)]
struct LabelFile {
    labels: Vec<usize>,
    #[serde(default)]
    hub_set: Vec<usize>,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let pred: LabelFile = read_json(&args.pred)?;
    let truth: LabelFile = read_json(&args.truth)?;
    let mut pred_a = ClusterAssignment::from_labels(pred.labels);
    let mut truth_a = ClusterAssignment::from_labels(truth.labels);
    if args.exclude_hubs {
        if pred_a.len() != truth_a.len() {
            return Err(mvgehd::Error::DimensionMismatch(format!(
                "{} predicted labels vs {} truth labels",
                pred_a.len(),
                truth_a.len()
            ))
            .into());
        }
        let keep: Vec<usize> = (0..truth_a.len()).filter(|i| !truth.hub_set.contains(i)).collect();
        pred_a = pred_a.subset(&keep);
        truth_a = truth_a.subset(&keep);
    }
    let result = score(&pred_a, &truth_a)?;
    #[derive(Serialize)]
    struct Body {
        #[serde(flatten)]
        result: mvgehd::EvalResult,
        scored: usize,
    }
    write_result(&args.out, "evaluate", args, Body { result, scored: truth_a.len() })
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    k: usize,
    acc_mean: f64,
    acc_std: f64,
    nmi_mean: f64,
    nmi_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn sweep_k(args: &SweepArgs) -> Result<()> {
    if args.k_min > args.k_max {
        return Err(mvgehd::Error::InvalidArgument(format!("empty k range {}..{}", args.k_min, args.k_max)).into());
    }
    if args.repeats == 0 {
        return Err(mvgehd::Error::InvalidArgument("--repeats must be at least 1".into()).into());
    }
    let (graphs, stored) = load_cohort::<f64>(&args.cohort)?;
    let labels = match &args.truth {
        Some(p) => read_json::<LabelFile>(p)?.labels,
        None => stored.context("cohort manifest has no labels; pass --truth")?,
    };
    let truth = ClusterAssignment::from_labels(labels);

    let mut rows = Vec::new();
    for k in args.k_min..=args.k_max {
        let solutions = embed_cohort(&graphs, &embed_config(k, &args.solver))?;
        let embeddings: Vec<Embedding64> = solutions.into_iter().map(|s| s.embedding).collect();
        let (mut accs, mut nmis) = (Vec::new(), Vec::new());
        for r in 0..args.repeats {
            let config = KMeansConfig { seed: args.kmeans.seed.wrapping_add(r as u64), ..kmeans_config(&args.kmeans) };
            let pred = cluster_subject_embeddings(&embeddings, args.clusters, &config)?;
            let e = score(&pred, &truth)?;
            accs.push(e.acc);
            nmis.push(e.nmi);
        }
        let (acc_mean, acc_std) = mean_std(&accs);
        let (nmi_mean, nmi_std) = mean_std(&nmis);
        log::info!("k = {k}: acc {acc_mean:.3} +- {acc_std:.3}");
        rows.push(SweepRow { k, acc_mean, acc_std, nmi_mean, nmi_std });
    }
    // earliest k wins ties
    let best = rows
        .iter()
        .fold(None::<&SweepRow>, |b, r| match b {
            Some(b) if b.acc_mean >= r.acc_mean => Some(b),
            _ => Some(r),
        })
        .cloned();
    #[derive(Serialize)]
    struct Body {
        rows: Vec<SweepRow>,
        best: Option<SweepRow>,
    }
    write_result(&args.out, "sweep-k", args, Body { rows, best })
}
