//! Experiment dispatch: executes the configured grid, writes one CSV with a
//! header row, and prints a summary table.
//!
//! Grid points may run on a worker pool (`SEMNET_WORKERS`, default 1); rows
//! are always collected and written in config order, so the CSV bytes do not
//! depend on scheduling.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use rand::Rng;
use rayon::prelude::*;

use semnet::cnn::CnnModel;
use semnet::datasets::mnist::Split;
use semnet::datasets::{load_linqs_citation, load_mnist_idx, KnowledgeGraph, LabeledImageSet};
use semnet::federation::{ledger_report, train_to_target, FedConfig, FedRunOutcome};
use semnet::gcn::{GcnHyperparams, LabelMask};
use semnet::numerics::gradcheck::GradCheckOptions;
use semnet::numerics::tensor::Tensor;
use semnet::semantics::{
    baseline_no_knowledge, compress_and_recover, digit_economics, encode_label_subset,
    semantic_scheme_at_budget,
};
use semnet::util::{derive_seed, seeded_rng};
use semnet::Precision;

use crate::config::{ExperimentConfig, ExperimentKind};

pub struct ExperimentOutput {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: String,
}

impl ExperimentOutput {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn workers_from_env() -> usize {
    std::env::var("SEMNET_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w >= 1)
        .unwrap_or(1)
}

/// Runs the configured experiment and writes its CSV to `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let out = match cfg.experiment {
        ExperimentKind::FedMnist => run_fed_mnist(cfg)?,
        ExperimentKind::KgCompress => run_kg_compress(cfg)?,
        ExperimentKind::Distortion => run_distortion(cfg)?,
        ExperimentKind::GradCheck => run_gradcheck(cfg)?,
        ExperimentKind::SemanticDigit => run_semantic_digit(cfg)?,
    };
    if let Some(parent) = cfg.output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(&cfg.output, out.to_csv())
        .with_context(|| format!("writing {}", cfg.output.display()))?;
    println!("{}", out.summary.trim_end());
    println!(
        "wrote {} rows to {} in {:.1}s",
        out.rows.len(),
        cfg.output.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(out)
}

fn pooled<P, R, F>(points: Vec<P>, f: F) -> Result<Vec<R>>
where
    P: Send + Sync,
    R: Send,
    F: Fn(&P) -> Result<R> + Sync + Send,
{
    let workers = workers_from_env();
    if workers <= 1 {
        points.iter().map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .context("building worker pool")?;
        pool.install(|| points.par_iter().map(&f).collect())
    }
}

pub fn load_mnist_pair(dir: &Path) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let train = load_mnist_idx(
        dir.join("train-images-idx3-ubyte"),
        dir.join("train-labels-idx1-ubyte"),
        Split::Train,
    )?;
    let test = load_mnist_idx(
        dir.join("t10k-images-idx3-ubyte"),
        dir.join("t10k-labels-idx1-ubyte"),
        Split::Test,
    )?;
    Ok((train, test))
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

// fed-mnist

struct FedSummary {
    servers: usize,
    target: f64,
    seed: u64,
    rounds: usize,
    converged: bool,
    final_accuracy: f64,
    labeled_samples: f64,
    samples_processed: f64,
    storage_bytes: f64,
    sim_seconds: f64,
    parallel_sim_seconds: f64,
    uplink_bits: u64,
    downlink_bits: u64,
    wall_seconds: f64,
}

fn summarize_run<T: semnet::numerics::Scalar>(
    outcome: &FedRunOutcome<T>,
    servers: usize,
    target: f64,
    seed: u64,
    wall_seconds: f64,
) -> FedSummary {
    let avg = ledger_report(outcome);
    FedSummary {
        servers,
        target,
        seed,
        rounds: outcome.rounds_run,
        converged: outcome.converged,
        final_accuracy: outcome.final_accuracy,
        labeled_samples: avg.avg_labeled_samples,
        samples_processed: avg.avg_samples_processed,
        storage_bytes: avg.avg_storage_bytes,
        sim_seconds: avg.avg_sim_compute_seconds,
        parallel_sim_seconds: avg.parallel_sim_seconds,
        uplink_bits: outcome.ledger.total_uplink_bits(),
        downlink_bits: outcome.ledger.total_downlink_bits(),
        wall_seconds,
    }
}

fn run_fed_mnist(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let dir = cfg.mnist_dir.as_ref().expect("validated");
    let (train, test) = load_mnist_pair(dir)?;

    let mut points: Vec<(usize, f64, u64)> = Vec::new();
    for &k in &cfg.servers {
        for &target in &cfg.targets {
            for &seed in &cfg.seeds {
                points.push((k, target, seed));
            }
        }
    }

    let precision = cfg.precision;
    let round_cap = cfg.round_cap;
    let summaries = pooled(points, |&(k, target, seed)| {
        let fed = FedConfig {
            train: semnet::cnn::TrainConfig {
                seed,
                ..Default::default()
            },
            participation: 1.0,
            round_cap,
        };
        let wall = Instant::now();
        let summary = match precision {
            Precision::F32 => {
                let outcome = train_to_target::<f32>(&train, &test, k, target, &fed)?;
                summarize_run(&outcome, k, target, seed, wall.elapsed().as_secs_f64())
            }
            Precision::F64 => {
                let outcome = train_to_target::<f64>(&train, &test, k, target, &fed)?;
                summarize_run(&outcome, k, target, seed, wall.elapsed().as_secs_f64())
            }
        };
        Ok(summary)
    })?;

    let header = vec![
        "experiment",
        "dataset",
        "servers",
        "target_accuracy",
        "seed",
        "precision",
        "rounds",
        "converged",
        "final_accuracy",
        "labeled_samples_per_server",
        "samples_processed_per_server",
        "storage_bytes_per_server",
        "sim_compute_seconds_per_server",
        "parallel_sim_seconds",
        "uplink_bits",
        "downlink_bits",
    ];
    let mut rows = Vec::new();
    let mut summary = String::from(
        "servers  target  seed  rounds  accuracy  samples/server  storage/server  parallel-sim-s  wall-s\n",
    );
    for s in &summaries {
        rows.push(vec![
            "fed-mnist".into(),
            "mnist".into(),
            s.servers.to_string(),
            fmt_f64(s.target),
            s.seed.to_string(),
            cfg.precision.name().into(),
            s.rounds.to_string(),
            s.converged.to_string(),
            fmt_f64(s.final_accuracy),
            fmt_f64(s.labeled_samples),
            fmt_f64(s.samples_processed),
            fmt_f64(s.storage_bytes),
            fmt_f64(s.sim_seconds),
            fmt_f64(s.parallel_sim_seconds),
            s.uplink_bits.to_string(),
            s.downlink_bits.to_string(),
        ]);
        writeln!(
            summary,
            "{:>7}  {:>6.4}  {:>4}  {:>6}  {:>8.4}  {:>14.1}  {:>14.0}  {:>14.4}  {:>6.1}",
            s.servers,
            s.target,
            s.seed,
            s.rounds,
            s.final_accuracy,
            s.labeled_samples,
            s.storage_bytes,
            s.parallel_sim_seconds,
            s.wall_seconds,
        )
        .unwrap();
    }
    Ok(ExperimentOutput { header, rows, summary })
}

// kg-compress

fn load_graph(cfg: &ExperimentConfig) -> Result<(KnowledgeGraph, usize)> {
    let content = cfg.graph_content.as_ref().expect("validated");
    let cites = cfg.graph_cites.as_ref().expect("validated");
    Ok(load_linqs_citation(content, cites)?)
}

fn run_kg_compress(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (graph, dropped) = load_graph(cfg)?;
    let label = cfg.graph_label();

    let mut points = Vec::new();
    for &fraction in &cfg.fractions {
        for &seed in &cfg.seeds {
            points.push((fraction, seed));
        }
    }
    let reports = pooled(points, |&(fraction, seed)| {
        Ok(compress_and_recover(&graph, fraction, seed)?)
    })?;

    let header = vec![
        "experiment",
        "graph",
        "nodes",
        "classes",
        "dangling_dropped",
        "fraction",
        "seed",
        "mask_size",
        "bytes_sent",
        "bits_sent",
        "compression_rate",
        "recovery_accuracy",
        "vacuous",
    ];
    let mut rows = Vec::new();
    let mut summary =
        String::from("graph     fraction  seed  sent   bytes  compression  recovery\n");
    for r in &reports {
        rows.push(vec![
            "kg-compress".into(),
            label.clone(),
            graph.num_nodes().to_string(),
            graph.num_classes().to_string(),
            dropped.to_string(),
            fmt_f64(r.fraction_labels_sent),
            r.seed.to_string(),
            r.mask_size.to_string(),
            r.bytes_sent.to_string(),
            r.bits_sent.to_string(),
            fmt_f64(r.compression_rate),
            fmt_f64(r.recovery_accuracy),
            r.vacuous.to_string(),
        ]);
        writeln!(
            summary,
            "{:<9} {:>8.4}  {:>4}  {:>5}  {:>6}  {:>11.4}  {:>8.4}",
            label, r.fraction_labels_sent, r.seed, r.mask_size, r.bytes_sent,
            r.compression_rate, r.recovery_accuracy,
        )
        .unwrap();
    }
    Ok(ExperimentOutput { header, rows, summary })
}

// distortion

fn default_budget_grid(graph: &KnowledgeGraph) -> Vec<u64> {
    let pairs: Vec<(u64, u8)> = (0..graph.num_nodes())
        .map(|i| (i as u64, graph.labels[i] as u8))
        .collect();
    let full_bits = encode_label_subset(&pairs).bits;
    [1u64, 2, 5, 10, 25, 50, 75, 100]
        .iter()
        .map(|pct| (full_bits * pct).div_ceil(100))
        .collect()
}

fn run_distortion(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (graph, _) = load_graph(cfg)?;
    let label = cfg.graph_label();
    let budgets = if cfg.budgets.is_empty() {
        default_budget_grid(&graph)
    } else {
        cfg.budgets.clone()
    };

    let mut points = Vec::new();
    for &budget in &budgets {
        for &seed in &cfg.seeds {
            points.push((budget, seed));
        }
    }

    struct Row {
        budget: u64,
        seed: u64,
        scheme: &'static str,
        sent: usize,
        bits: u64,
        distortion: f64,
        degraded: bool,
    }
    let results = pooled(points, |&(budget, seed)| {
        let semantic = semantic_scheme_at_budget(&graph, budget, seed)?;
        let (_, baseline_distortion) = baseline_no_knowledge(&graph, budget, seed)?;
        let baseline_sent = semnet::semantics::baseline_sent_count(&graph, budget, seed);
        Ok([
            Row {
                budget,
                seed,
                scheme: "semantic",
                sent: semantic.sent_nodes,
                bits: semantic.bits_sent,
                distortion: semantic.distortion,
                degraded: semantic.degraded,
            },
            Row {
                budget,
                seed,
                scheme: "baseline",
                sent: baseline_sent.0,
                bits: baseline_sent.1,
                distortion: baseline_distortion,
                degraded: false,
            },
        ])
    })?;

    let header = vec![
        "experiment",
        "graph",
        "budget_bits",
        "seed",
        "scheme",
        "sent_nodes",
        "bits_sent",
        "distortion",
        "degraded",
    ];
    let mut rows = Vec::new();
    let mut summary =
        String::from("graph     budget_bits  seed  scheme    sent   distortion\n");
    for pair in &results {
        for r in pair {
            rows.push(vec![
                "distortion".into(),
                label.clone(),
                r.budget.to_string(),
                r.seed.to_string(),
                r.scheme.into(),
                r.sent.to_string(),
                r.bits.to_string(),
                fmt_f64(r.distortion),
                r.degraded.to_string(),
            ]);
            writeln!(
                summary,
                "{:<9} {:>11}  {:>4}  {:<8}  {:>5}  {:>10.4}",
                label, r.budget, r.seed, r.scheme, r.sent, r.distortion,
            )
            .unwrap();
        }
    }
    Ok(ExperimentOutput { header, rows, summary })
}

// gradcheck

fn random_gradcheck_graph(seed: u64) -> KnowledgeGraph {

    let mut rng = seeded_rng(derive_seed(seed, 0x6763_6b67, 0));
    let n = 12;
    let classes = 3;
    let features = Tensor::<f64>::random_uniform(vec![n, 6], 0.0, 1.0, &mut rng);
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < 0.3 {
                edges.push((i, j));
            }
        }
    }
    KnowledgeGraph {
        node_ids: (0..n).map(|i| format!("n{i}")).collect(),
        features,
        labels,
        edges,
        class_names: (0..classes).map(|c| format!("c{c}")).collect(),
    }
}

fn run_gradcheck(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let header = vec![
        "experiment",
        "model",
        "instance",
        "epsilon",
        "params_total",
        "params_checked",
        "kinks_skipped",
        "max_rel_error",
    ];
    let mut rows = Vec::new();
    let mut summary = String::from("model  instance  params  checked  kinks  max_rel_error\n");
    let epsilon = 1e-5;
    let instances: Vec<u64> = cfg.seeds.iter().flat_map(|&s| (0..3).map(move |i| derive_seed(s, 0x6763, i))).take(3.max(cfg.seeds.len())).collect();

    for (i, &inst) in instances.iter().enumerate() {
        let mut rng = seeded_rng(inst);
        let image = Tensor::<f64>::random_uniform(vec![1, 1, 28, 28], 0.0, 1.0, &mut rng);
        let label = rng.random_range(0..10);
        let report = semnet::cnn::cnn_grad_check(
            &image,
            label,
            inst,
            &GradCheckOptions {
                epsilon,
                max_params: Some(150),
                seed: inst,
                ..Default::default()
            },
        )?;
        rows.push(vec![
            "gradcheck".into(),
            "cnn".into(),
            i.to_string(),
            fmt_f64(epsilon),
            report.params_total.to_string(),
            report.parameter_count.to_string(),
            report.kinks_skipped.to_string(),
            fmt_f64(report.max_relative_error),
        ]);
        writeln!(
            summary,
            "cnn    {:>8}  {:>6}  {:>7}  {:>5}  {:.3e}",
            i, report.params_total, report.parameter_count, report.kinks_skipped,
            report.max_relative_error
        )
        .unwrap();
    }

    for (i, &inst) in instances.iter().enumerate() {
        let graph = random_gradcheck_graph(inst);
        let adj = semnet::gcn::normalize_adjacency(&graph);
        let mask = LabelMask::new((0..graph.num_nodes()).map(|i| i % 2 == 0).collect());
        let hp = GcnHyperparams {
            hidden: 5,
            ..Default::default()
        };
        let report = semnet::gcn::gcn_grad_check(
            &graph,
            &adj,
            &mask,
            &hp,
            inst,
            &GradCheckOptions {
                epsilon,
                seed: inst,
                ..Default::default()
            },
        )?;
        rows.push(vec![
            "gradcheck".into(),
            "gcn".into(),
            i.to_string(),
            fmt_f64(epsilon),
            report.params_total.to_string(),
            report.parameter_count.to_string(),
            report.kinks_skipped.to_string(),
            fmt_f64(report.max_relative_error),
        ]);
        writeln!(
            summary,
            "gcn    {:>8}  {:>6}  {:>7}  {:>5}  {:.3e}",
            i, report.params_total, report.parameter_count, report.kinks_skipped,
            report.max_relative_error
        )
        .unwrap();
    }
    Ok(ExperimentOutput { header, rows, summary })
}

// semantic-digit

fn run_semantic_digit(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let dir = cfg.mnist_dir.as_ref().expect("validated");
    let (_, test) = load_mnist_pair(dir)?;
    let recognizer = match &cfg.checkpoint {
        Some(path) => CnnModel::<f32>::load(path)?,
        None => CnnModel::<f32>::init(cfg.seeds[0]),
    };
    let economics = digit_economics(&recognizer, &test, 1000)?;

    let header = vec![
        "experiment",
        "images",
        "raw_bits",
        "semantic_bits",
        "raw_bits_per_image",
        "semantic_bits_per_image",
        "ratio",
        "recognizer_accuracy",
        "expected_delivery_error",
        "checkpoint",
    ];
    let rows = vec![vec![
        "semantic-digit".into(),
        economics.images.to_string(),
        economics.raw_bits.to_string(),
        economics.semantic_bits.to_string(),
        (economics.raw_bits / economics.images).to_string(),
        (economics.semantic_bits / economics.images).to_string(),
        fmt_f64(economics.ratio),
        fmt_f64(economics.recognizer_accuracy),
        fmt_f64(economics.expected_delivery_error),
        cfg.checkpoint
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "none".into()),
    ]];
    let summary = format!(
        "raw {} bits/image, semantic {} bits/image, ratio {}:1, recognizer accuracy {:.4}\n",
        economics.raw_bits / economics.images,
        economics.semantic_bits / economics.images,
        economics.ratio,
        economics.recognizer_accuracy,
    );
    Ok(ExperimentOutput { header, rows, summary })
}
