use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use smlc::detection::{s_mlc, CommunityResult, DetectionParams};
use smlc::diffusion::{HkParams, PprParams};
use smlc::estimation::{estimate_k, modularity_estimate_k, modularity_value, EstimationParams};
use smlc::generator::generate_planted;
use smlc::graph::Graph;
use smlc::metrics::{evaluate, GroundTruth};
use smlc::sampling::{local_sample, DiffusionMethod};

#[derive(Parser)]
#[command(name = "smlc", version, about = "Seed-based multiple local community detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Method {
    Ppr,
    Hk,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Modularity,
}

#[derive(Args)]
struct DiffusionOpts {
    /// Diffusion used for local sampling.
    #[arg(long, value_enum, default_value_t = Method::Ppr)]
    method: Method,
    /// PPR restart strength.
    #[arg(long, default_value_t = 0.99)]
    alpha: f64,
    /// Diffusion accuracy threshold.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Heat-kernel temperature (hk only).
    #[arg(long, default_value_t = 80.0)]
    t: f64,
}

impl DiffusionOpts {
    fn to_method(&self) -> DiffusionMethod {
        match self.method {
            Method::Ppr => DiffusionMethod::Ppr(PprParams { alpha: self.alpha, epsilon: self.epsilon }),
            Method::Hk => DiffusionMethod::Hk(HkParams { t: self.t, epsilon: self.epsilon }),
        }
    }

    fn describe(&self) -> String {
        match self.method {
            Method::Ppr => format!("method=ppr\nalpha={}\nepsilon={}", self.alpha, self.epsilon),
            Method::Hk => format!("method=hk\nt={}\nepsilon={}", self.t, self.epsilon),
        }
    }
}

#[derive(Args)]
struct EstimationOpts {
    /// Sparsity weight of the factorization.
    #[arg(long, default_value_t = 1e-4)]
    beta: f64,
    /// SNMF restarts per candidate k.
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    /// Base seed for all pseudo-random choices.
    #[arg(long, default_value_t = 42)]
    rng_seed: u64,
}

impl EstimationOpts {
    fn to_params(&self, rng_seed: u64) -> EstimationParams {
        EstimationParams {
            beta: self.beta,
            restarts: self.restarts,
            rng_seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct OutputOpts {
    /// Emit one JSON document instead of key=value + TSV text.
    #[arg(long)]
    json: bool,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the seed's local subgraph and report its nodes.
    Sample {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        seed: String,
        #[command(flatten)]
        diffusion: DiffusionOpts,
        /// Ground-truth communities; adds sampling precision/recall.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Estimate the number of communities (whole graph, or a seed's sample).
    EstimateK {
        #[arg(long)]
        graph: PathBuf,
        /// Estimate on this seed's sampled subgraph instead of the whole graph.
        #[arg(long)]
        seed: Option<String>,
        #[command(flatten)]
        diffusion: DiffusionOpts,
        #[command(flatten)]
        estimation: EstimationOpts,
        /// Use a baseline estimator instead of the sparseness sweep.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Detect all communities containing the seed(s).
    Detect {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        seed: Option<String>,
        /// One seed label per line; one result block per seed.
        #[arg(long)]
        seeds_file: Option<PathBuf>,
        /// Membership threshold override (default 1/k').
        #[arg(long)]
        theta: Option<f64>,
        #[command(flatten)]
        diffusion: DiffusionOpts,
        #[command(flatten)]
        estimation: EstimationOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Detect and score against ground truth.
    Eval {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        seeds_file: Option<PathBuf>,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        theta: Option<f64>,
        #[command(flatten)]
        diffusion: DiffusionOpts,
        #[command(flatten)]
        estimation: EstimationOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Generate a planted-partition benchmark graph.
    Gen {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long, default_value_t = 0)]
        overlap: usize,
        #[arg(long, default_value_t = 42)]
        rng_seed: u64,
        /// Ground-truth output path (one community per line).
        #[arg(long)]
        gt: Option<PathBuf>,
        #[command(flatten)]
        output: OutputOpts,
    },
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sample { graph, seed, diffusion, gt, output } => {
            cmd_sample(&graph, &seed, &diffusion, gt.as_deref(), &output)
        }
        Command::EstimateK { graph, seed, diffusion, estimation, baseline, output } => {
            cmd_estimate_k(&graph, seed.as_deref(), &diffusion, &estimation, baseline, &output)
        }
        Command::Detect { graph, seed, seeds_file, theta, diffusion, estimation, output } => {
            let seeds = collect_seeds(seed, seeds_file.as_deref())?;
            cmd_detect(&graph, &seeds, theta, &diffusion, &estimation, &output)
        }
        Command::Eval { graph, seed, seeds_file, gt, theta, diffusion, estimation, output } => {
            let seeds = collect_seeds(seed, seeds_file.as_deref())?;
            cmd_eval(&graph, &seeds, &gt, theta, &diffusion, &estimation, &output)
        }
        Command::Gen { k, size, p_in, p_out, overlap, rng_seed, gt, output } => {
            cmd_gen(k, size, p_in, p_out, overlap, rng_seed, gt.as_deref(), &output)
        }
    }
}

fn load_graph(path: &Path) -> anyhow::Result<Graph> {
    let file = File::open(path).with_context(|| format!("cannot open graph file {}", path.display()))?;
    Ok(Graph::load_edge_list(BufReader::new(file))?)
}

fn load_gt(path: &Path, g: &Graph) -> anyhow::Result<GroundTruth> {
    let file = File::open(path).with_context(|| format!("cannot open ground-truth file {}", path.display()))?;
    Ok(GroundTruth::load(BufReader::new(file), g)?)
}

fn collect_seeds(seed: Option<String>, seeds_file: Option<&Path>) -> anyhow::Result<Vec<String>> {
    match (seed, seeds_file) {
        (Some(s), None) => Ok(vec![s]),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read seeds file {}", path.display()))?;
            let seeds: Vec<String> = text.split_whitespace().map(str::to_string).collect();
            if seeds.is_empty() {
                bail!("seeds file {} contains no seeds", path.display());
            }
            Ok(seeds)
        }
        (Some(_), Some(_)) => bail!("--seed and --seeds-file are mutually exclusive"),
        (None, None) => bail!("one of --seed or --seeds-file is required"),
    }
}

fn emit(output: &OutputOpts, text: &str) -> anyhow::Result<()> {
    match &output.out {
        Some(path) => {
            let mut file = File::create(path)
                .with_context(|| format!("cannot create output file {}", path.display()))?;
            file.write_all(text.as_bytes())?;
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_sample(
    graph_path: &Path,
    seed: &str,
    diffusion: &DiffusionOpts,
    gt_path: Option<&Path>,
    output: &OutputOpts,
) -> anyhow::Result<()> {
    let g = load_graph(graph_path)?;
    let seed_idx = g.node_index(seed).ok_or(smlc::Error::UnknownLabel(seed.to_string()))?;
    let sample = local_sample(&g, seed_idx, &diffusion.to_method())?;
    let labels: Vec<&str> = sample.to_parent.iter().map(|&v| g.label(v)).collect();
    let mut scores = None;
    if let Some(path) = gt_path {
        let gt = load_gt(path, &g)?;
        let seed_gts = gt.containing(seed_idx);
        if !seed_gts.is_empty() {
            let prec = smlc::metrics::precision(&sample.to_parent, &seed_gts);
            let rec_mean = seed_gts
                .iter()
                .map(|c| smlc::metrics::recall(c, std::slice::from_ref(&sample.to_parent)))
                .sum::<f64>()
                / seed_gts.len() as f64;
            scores = Some((prec, rec_mean));
        }
    }
    if output.json {
        let doc = json!({
            "command": "sample",
            "graph": graph_path.display().to_string(),
            "seed": seed,
            "size": labels.len(),
            "biconnected": !sample.widened,
            "nodes": labels,
            "precision": scores.map(|s| s.0),
            "recall": scores.map(|s| s.1),
        });
        emit(output, &format!("{}\n", serde_json::to_string_pretty(&doc)?))
    } else {
        let mut text = format!(
            "command=sample\ngraph={}\nseed={}\n{}\nsize={}\nbiconnected={}\n",
            graph_path.display(),
            seed,
            diffusion.describe(),
            labels.len(),
            !sample.widened,
        );
        if let Some((prec, rec)) = scores {
            text.push_str(&format!("precision={prec:.6}\nrecall={rec:.6}\n"));
        }
        for label in labels {
            text.push_str(&format!("node\t{label}\n"));
        }
        emit(output, &text)
    }
}

/// Median of the three per-seed estimates; equals the majority value
/// whenever one exists.
fn vote(votes: &[usize]) -> usize {
    let mut sorted = votes.to_vec();
    sorted.sort_unstable();
    sorted[sorted.len() / 2]
}

fn cmd_estimate_k(
    graph_path: &Path,
    seed: Option<&str>,
    diffusion: &DiffusionOpts,
    estimation: &EstimationOpts,
    baseline: Option<Baseline>,
    output: &OutputOpts,
) -> anyhow::Result<()> {
    let g = load_graph(graph_path)?;
    if let Some(Baseline::Modularity) = baseline {
        let (k_mod, partition) = modularity_estimate_k(&g, estimation.rng_seed)?;
        let q = modularity_value(&g, &partition)?;
        if output.json {
            let communities: Vec<Vec<&str>> = partition
                .iter()
                .map(|c| c.iter().map(|&v| g.label(v)).collect())
                .collect();
            let doc = json!({
                "command": "estimate-k",
                "baseline": "modularity",
                "graph": graph_path.display().to_string(),
                "k": k_mod,
                "q": q,
                "communities": communities,
            });
            return emit(output, &format!("{}\n", serde_json::to_string_pretty(&doc)?));
        }
        let mut text = format!(
            "command=estimate-k\nbaseline=modularity\ngraph={}\nk={k_mod}\nq={q:.6}\n",
            graph_path.display()
        );
        for (i, community) in partition.iter().enumerate() {
            let labels: Vec<&str> = community.iter().map(|&v| g.label(v)).collect();
            text.push_str(&format!("community\t{i}\t{}\t{}\n", community.len(), labels.join(" ")));
        }
        return emit(output, &text);
    }

    let target: Graph = match seed {
        Some(label) => {
            let idx = g.node_index(label).ok_or(smlc::Error::UnknownLabel(label.to_string()))?;
            local_sample(&g, idx, &diffusion.to_method())?.subgraph
        }
        None => g,
    };
    let vote_seeds = [estimation.rng_seed, estimation.rng_seed + 1, estimation.rng_seed + 2];
    let mut votes = Vec::new();
    let mut traces = Vec::new();
    for &s in &vote_seeds {
        let result = estimate_k(&target, &estimation.to_params(s))?;
        votes.push(result.k_prime);
        traces.push(result.sweep_trace);
    }
    let k_prime = vote(&votes);
    if output.json {
        let doc = json!({
            "command": "estimate-k",
            "graph": graph_path.display().to_string(),
            "seed": seed,
            "n": target.node_count(),
            "m": target.edge_count(),
            "rng_seed": estimation.rng_seed,
            "restarts": estimation.restarts,
            "beta": estimation.beta,
            "votes": votes,
            "k_prime": k_prime,
            "sweeps": vote_seeds.iter().zip(&traces).map(|(&s, trace)| json!({
                "rng_seed": s,
                "trace": trace.iter().map(|&(k, v)| json!({"k": k, "sparseness": v})).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        });
        return emit(output, &format!("{}\n", serde_json::to_string_pretty(&doc)?));
    }
    let mut text = format!(
        "command=estimate-k\ngraph={}\nn={}\nm={}\nrestarts={}\nbeta={}\nrng_seed={}\nvotes={}\nk_prime={k_prime}\n",
        graph_path.display(),
        target.node_count(),
        target.edge_count(),
        estimation.restarts,
        estimation.beta,
        estimation.rng_seed,
        votes.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
    );
    if let Some(label) = seed {
        text.push_str(&format!("seed={label}\n"));
    }
    for (&s, trace) in vote_seeds.iter().zip(&traces) {
        for &(k, score) in trace {
            text.push_str(&format!("sweep\t{s}\t{k}\t{score:.6}\n"));
        }
    }
    emit(output, &text)
}

fn detect_one(
    g: &Graph,
    seed: &str,
    theta: Option<f64>,
    diffusion: &DiffusionOpts,
    estimation: &EstimationOpts,
) -> anyhow::Result<CommunityResult> {
    let params = DetectionParams {
        method: diffusion.to_method(),
        estimation: estimation.to_params(estimation.rng_seed),
        theta_override: theta,
    };
    Ok(s_mlc(g, seed, &params)?)
}

fn community_block(g: &Graph, seed: &str, result: &CommunityResult) -> String {
    let mut text = format!(
        "seed={seed}\nk_prime={}\ntheta={:.6}\nsample_size={}\ncommunities={}\n",
        result.k_prime,
        result.theta,
        result.sample.to_parent.len(),
        result.communities.len(),
    );
    for (i, community) in result.communities.iter().enumerate() {
        let labels: Vec<&str> = community.iter().map(|&v| g.label(v)).collect();
        text.push_str(&format!("community\t{i}\t{}\t{}\n", community.len(), labels.join(" ")));
    }
    text
}

fn community_json(g: &Graph, seed: &str, result: &CommunityResult) -> serde_json::Value {
    json!({
        "seed": seed,
        "k_prime": result.k_prime,
        "theta": result.theta,
        "sample_size": result.sample.to_parent.len(),
        "communities": result.communities.iter().map(|c| {
            c.iter().map(|&v| g.label(v)).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
    })
}

fn cmd_detect(
    graph_path: &Path,
    seeds: &[String],
    theta: Option<f64>,
    diffusion: &DiffusionOpts,
    estimation: &EstimationOpts,
    output: &OutputOpts,
) -> anyhow::Result<()> {
    let g = load_graph(graph_path)?;
    let mut blocks = Vec::new();
    let mut docs = Vec::new();
    for seed in seeds {
        let result = detect_one(&g, seed, theta, diffusion, estimation)?;
        if output.json {
            docs.push(community_json(&g, seed, &result));
        } else {
            blocks.push(community_block(&g, seed, &result));
        }
    }
    if output.json {
        let doc = json!({"command": "detect", "graph": graph_path.display().to_string(), "results": docs});
        emit(output, &format!("{}\n", serde_json::to_string_pretty(&doc)?))
    } else {
        let header = format!("command=detect\ngraph={}\n{}\n", graph_path.display(), diffusion.describe());
        emit(output, &format!("{header}{}", blocks.join("")))
    }
}

fn cmd_eval(
    graph_path: &Path,
    seeds: &[String],
    gt_path: &Path,
    theta: Option<f64>,
    diffusion: &DiffusionOpts,
    estimation: &EstimationOpts,
    output: &OutputOpts,
) -> anyhow::Result<()> {
    let g = load_graph(graph_path)?;
    let gt = load_gt(gt_path, &g)?;
    let mut blocks = Vec::new();
    let mut docs = Vec::new();
    for seed in seeds {
        let result = detect_one(&g, seed, theta, diffusion, estimation)?;
        let report = evaluate(&g, &gt, &result)?;
        if output.json {
            let mut doc = community_json(&g, seed, &result);
            doc["scores"] = json!({
                "mean_precision": report.mean_precision,
                "mean_recall": report.mean_recall,
                "mean_f1": report.mean_f1,
                "mean_f2": report.mean_f2,
                "mean_conductance": report.mean_conductance,
                "per_detected": report.per_detected.iter().map(|s| json!({
                    "precision": s.precision, "f1": s.f1, "f2": s.f2, "conductance": s.conductance,
                })).collect::<Vec<_>>(),
                "per_gt_recall": report.per_gt_recall,
            });
            docs.push(doc);
        } else {
            let mut block = community_block(&g, seed, &result);
            block.push_str(&format!(
                "mean_precision={:.6}\nmean_recall={:.6}\nmean_f1={:.6}\nmean_f2={:.6}\nmean_conductance={:.6}\n",
                report.mean_precision,
                report.mean_recall,
                report.mean_f1,
                report.mean_f2,
                report.mean_conductance,
            ));
            for (i, s) in report.per_detected.iter().enumerate() {
                block.push_str(&format!(
                    "detected\t{i}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                    s.precision, s.f1, s.f2, s.conductance
                ));
            }
            for (i, r) in report.per_gt_recall.iter().enumerate() {
                block.push_str(&format!("gt_recall\t{i}\t{r:.6}\n"));
            }
            blocks.push(block);
        }
    }
    if output.json {
        let doc = json!({"command": "eval", "graph": graph_path.display().to_string(), "results": docs});
        emit(output, &format!("{}\n", serde_json::to_string_pretty(&doc)?))
    } else {
        let header = format!("command=eval\ngraph={}\ngt={}\n", graph_path.display(), gt_path.display());
        emit(output, &format!("{header}{}", blocks.join("")))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    k: usize,
    size: usize,
    p_in: f64,
    p_out: f64,
    overlap: usize,
    rng_seed: u64,
    gt_path: Option<&Path>,
    output: &OutputOpts,
) -> anyhow::Result<()> {
    let planted = generate_planted(k, size, p_in, p_out, overlap, rng_seed)?;
    if !planted.connected {
        eprintln!("warning: generated graph is disconnected");
    }
    if let Some(path) = gt_path {
        let mut text = String::new();
        for community in &planted.communities {
            let labels: Vec<&str> = community.iter().map(|&v| planted.graph.label(v)).collect();
            text.push_str(&labels.join(" "));
            text.push('\n');
        }
        std::fs::write(path, text)
            .with_context(|| format!("cannot write ground truth to {}", path.display()))?;
    }
    if output.json {
        let mut edges = Vec::new();
        for u in 0..planted.graph.node_count() as u32 {
            for &v in planted.graph.neighbors(u) {
                if u < v {
                    edges.push(json!([planted.graph.label(u), planted.graph.label(v)]));
                }
            }
        }
        let doc = json!({
            "command": "gen",
            "n": planted.graph.node_count(),
            "m": planted.graph.edge_count(),
            "connected": planted.connected,
            "edges": edges,
            "communities": planted.communities.iter().map(|c| {
                c.iter().map(|&v| planted.graph.label(v)).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
        });
        emit(output, &format!("{}\n", serde_json::to_string_pretty(&doc)?))
    } else {
        let mut text = format!(
            "# planted partition: k={k} size={size} p_in={p_in} p_out={p_out} overlap={overlap} rng_seed={rng_seed}\n"
        );
        let mut buf = Vec::new();
        planted.graph.write_edge_list(&mut buf)?;
        text.push_str(&String::from_utf8(buf).expect("labels are utf-8"));
        emit(output, &text)
    }
}
