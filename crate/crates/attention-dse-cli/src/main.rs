//! Single-binary operator surface: train, explore, eval, report.
//!
//! Every run directory gets a manifest (written atomically before any result
//! file) naming the experiment, hashing the input configs, and recording the
//! seed. Every CSV row carries the manifest id so results stay traceable.
//! Outputs are deterministic for a fixed (config, seed); wall-clock timing
//! lives in a side file, never in a CSV.
//!
//! Exit codes: 0 ok, 2 input error, 3 compatibility error, 4 numerical
//! failure.

use attention_dse_core::design_space::{parse_design_space, random_sample, DesignSpace};
use attention_dse_core::explorer::{
    explore, random_search, ExplorationConfig, ExplorationTrace, Objective, PerfectPredictor,
    SurrogatePredictor,
};
use attention_dse_core::microarch_graph::{parse_graph_fixture, serialize_space};
use attention_dse_core::oracle::{parse_oracle_config, CountingOracle, Oracle};
use attention_dse_core::surrogate::{mape, SurrogateConfig, SurrogateModel};
use attention_dse_core::Stage;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "attention-dse", version, about = "Attention-guided CPU design space exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the three per-objective predictors and write checkpoints.
    Train(TrainArgs),
    /// Run the exploration loop (or the random baseline) against the oracle.
    Explore(ExploreArgs),
    /// Score trained checkpoints against fresh oracle samples.
    Eval(EvalArgs),
    /// Merge exploration run directories into one comparison CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    oracle: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    train_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    embed_dim: usize,
    #[arg(long, default_value_t = 2)]
    heads: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 64)]
    mlp_hidden: usize,
    #[arg(long, default_value_t = 2e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    oracle: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// aba (heatmap-guided) or random baseline.
    #[arg(long, default_value = "aba")]
    acquisition: String,
    /// Directory holding model.{ipc,power,area}.json; omit to use the
    /// oracle-backed perfect predictor.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Oracle calls available after the initial sample.
    #[arg(long, default_value_t = 280)]
    budget: u64,
    #[arg(long, default_value_t = 20)]
    initial: usize,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    oracle: PathBuf,
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Exploration run directories to merge.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
}

enum CliError {
    Input(String),
    Compat(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Compat(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Compat(m) | CliError::Numeric(m) => m,
        }
    }
}

fn input_err<E: std::fmt::Display>(ctx: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{ctx}: {e}"))
}

/// Worker cap from ATTN_DSE_THREADS; all kernels are single-threaded today,
/// so this is recorded and clamped but never exceeded.
fn thread_cap() -> Result<usize, CliError> {
    match std::env::var("ATTN_DSE_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => v
            .parse::<usize>()
            .map(|n| n.max(1))
            .map_err(|_| CliError::Input(format!("ATTN_DSE_THREADS not a number: {v}"))),
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigRef {
    path: String,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
struct RunManifest {
    manifest_id: String,
    experiment: String,
    tool_version: String,
    seed: u64,
    configs: Vec<ConfigRef>,
    /// Output-affecting arguments, normalized.
    args: serde_json::Value,
    /// Unix timestamp; informational only, excluded from the manifest id.
    created_unix: u64,
    threads: usize,
}

fn sha256_hex(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(data);
    format!("{:x}", h.finalize())
}

fn read_config(path: &Path) -> Result<(String, ConfigRef), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let r = ConfigRef {
        path: path.display().to_string(),
        sha256: sha256_hex(text.as_bytes()),
    };
    Ok((text, r))
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| CliError::Input(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Manifest id: hash of everything that determines the outputs (experiment,
/// config hashes, seed, args), independent of paths' location and of time.
fn make_manifest(
    out: &Path,
    experiment: &str,
    seed: u64,
    configs: Vec<ConfigRef>,
    args: serde_json::Value,
) -> Result<RunManifest, CliError> {
    let threads = thread_cap()?;
    let mut key = format!("{experiment}\u{1}{seed}\u{1}{args}");
    for c in &configs {
        key.push('\u{1}');
        key.push_str(&c.sha256);
    }
    let manifest_id = sha256_hex(key.as_bytes())[..12].to_string();
    let m = RunManifest {
        manifest_id,
        experiment: experiment.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        configs,
        args,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        threads,
    };
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
    let body = serde_json::to_vec_pretty(&m).expect("manifest serializes");
    atomic_write(&out.join("manifest.json"), &body)?;
    Ok(m)
}

fn write_timing(out: &Path, manifest_id: &str, started: Instant) -> Result<(), CliError> {
    let body = serde_json::json!({
        "manifest_id": manifest_id,
        "wall_seconds": started.elapsed().as_secs_f64(),
    });
    atomic_write(
        &out.join("timing.json"),
        serde_json::to_string_pretty(&body).unwrap().as_bytes(),
    )
}

fn load_space(path: &Path) -> Result<(DesignSpace, ConfigRef), CliError> {
    let (text, r) = read_config(path)?;
    let space = parse_design_space(&text).map_err(input_err("space config"))?;
    Ok((space, r))
}

fn load_oracle(path: &Path, space: &DesignSpace) -> Result<(Oracle, ConfigRef), CliError> {
    let (text, r) = read_config(path)?;
    let cfg = parse_oracle_config(&text).map_err(input_err("oracle config"))?;
    let oracle = Oracle::new(space, &cfg).map_err(input_err("oracle config"))?;
    Ok((oracle, r))
}

fn load_models(
    dir: &Path,
    space: &DesignSpace,
) -> Result<[SurrogateModel; 3], CliError> {
    let mut out = Vec::with_capacity(3);
    for obj in Objective::ALL {
        let path = dir.join(format!("model.{}.json", obj.name()));
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let model = SurrogateModel::from_json(&text)
            .map_err(|e| CliError::Compat(format!("{}: {e}", path.display())))?;
        if model.order.len() != space.param_count() {
            return Err(CliError::Compat(format!(
                "{}: checkpoint covers {} parameters, space has {}",
                path.display(),
                model.order.len(),
                space.param_count()
            )));
        }
        out.push(model);
    }
    Ok(out.try_into().map_err(|_| ()).expect("three models"))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<Vec<u8>>, CliError> {
    let _ = path;
    Ok(csv::Writer::from_writer(Vec::new()))
}

fn finish_csv(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<(), CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    atomic_write(path, &bytes)
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (space, space_ref) = load_space(&a.space)?;
    let (graph_text, graph_ref) = read_config(&a.graph)?;
    let fixture = parse_graph_fixture(&graph_text).map_err(input_err("graph config"))?;
    let order = serialize_space(&space, &fixture.stage_graphs(), &Stage::PIPELINE_ORDER)
        .map_err(|e| CliError::Compat(format!("graph/space mismatch: {e}")))?;
    let (oracle, oracle_ref) = load_oracle(&a.oracle, &space)?;

    let args = serde_json::json!({
        "train_points": a.train_points,
        "epochs": a.epochs,
        "embed_dim": a.embed_dim,
        "heads": a.heads,
        "depth": a.depth,
        "mlp_hidden": a.mlp_hidden,
        "learning_rate": a.learning_rate,
        "batch_size": a.batch_size,
    });
    let manifest = make_manifest(
        &a.out,
        "train",
        a.seed,
        vec![space_ref, graph_ref, oracle_ref],
        args,
    )?;

    let xs = random_sample(&space, a.train_points, a.seed);
    if xs.is_empty() {
        return Err(CliError::Input("train_points must be at least 1".into()));
    }
    let truths: Vec<_> = xs.iter().map(|p| oracle.evaluate(p)).collect();

    let mut log = csv_writer(&a.out.join("train_log.csv"))?;
    log.write_record(["manifest_id", "objective", "epoch", "loss"])
        .map_err(input_err("train_log.csv"))?;
    for obj in Objective::ALL {
        let cfg = SurrogateConfig {
            embed_dim: a.embed_dim,
            heads: a.heads,
            depth: a.depth,
            mlp_hidden: a.mlp_hidden,
            learning_rate: a.learning_rate,
            momentum: 0.9,
            epochs: a.epochs,
            batch_size: a.batch_size,
            seed: a.seed ^ (obj as u64 + 1),
            full_attention: false,
        };
        let mut model = SurrogateModel::new(cfg, &space, &order)
            .map_err(|e| CliError::Compat(e.to_string()))?;
        let ys: Vec<f64> = truths.iter().map(|t| obj.value(t)).collect();
        let report = model
            .train(&space, &xs, &ys)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        for (epoch, loss) in report.epoch_losses.iter().enumerate() {
            log.write_record([
                manifest.manifest_id.as_str(),
                obj.name(),
                &epoch.to_string(),
                &format!("{loss:.12e}"),
            ])
            .map_err(input_err("train_log.csv"))?;
        }
        atomic_write(
            &a.out.join(format!("model.{}.json", obj.name())),
            model.to_json().as_bytes(),
        )?;
    }
    finish_csv(&a.out.join("train_log.csv"), log)?;
    write_timing(&a.out, &manifest.manifest_id, started)
}

fn write_trace_files(
    out: &Path,
    manifest_id: &str,
    space: &DesignSpace,
    trace: &ExplorationTrace,
) -> Result<(), CliError> {
    let mut w = csv_writer(&out.join("trace.csv"))?;
    w.write_record([
        "manifest_id",
        "iteration",
        "proposed",
        "accepted",
        "injected",
        "oracle_calls",
        "hypervolume",
    ])
    .map_err(input_err("trace.csv"))?;
    for r in &trace.iterations {
        w.write_record([
            manifest_id,
            &r.iteration.to_string(),
            &r.proposed.to_string(),
            &r.accepted.to_string(),
            &r.injected.to_string(),
            &r.oracle_calls.to_string(),
            &format!("{:.12e}", r.hypervolume),
        ])
        .map_err(input_err("trace.csv"))?;
    }
    finish_csv(&out.join("trace.csv"), w)?;

    let mut w = csv_writer(&out.join("phv_curve.csv"))?;
    w.write_record(["manifest_id", "oracle_calls", "hypervolume"])
        .map_err(input_err("phv_curve.csv"))?;
    w.write_record([
        manifest_id,
        &trace.initial_calls.to_string(),
        &format!("{:.12e}", trace.initial_hypervolume),
    ])
    .map_err(input_err("phv_curve.csv"))?;
    for r in &trace.iterations {
        w.write_record([
            manifest_id,
            &r.oracle_calls.to_string(),
            &format!("{:.12e}", r.hypervolume),
        ])
        .map_err(input_err("phv_curve.csv"))?;
    }
    finish_csv(&out.join("phv_curve.csv"), w)?;

    let mut w = csv_writer(&out.join("front.csv"))?;
    let mut header = vec!["manifest_id".to_string()];
    header.extend(space.params().iter().map(|p| p.name.clone()));
    header.extend(trace.objectives.iter().map(|o| o.name().to_string()));
    w.write_record(&header).map_err(input_err("front.csv"))?;
    let mut members = trace.archive.members().to_vec();
    members.sort_by(|a, b| a.0.values.cmp(&b.0.values));
    for (point, objs) in members {
        let mut row = vec![manifest_id.to_string()];
        for (i, &vi) in point.values.iter().enumerate() {
            row.push(format!("{}", space.param(i).value_f64(vi)));
        }
        for v in objs {
            row.push(format!("{v:.12e}"));
        }
        w.write_record(&row).map_err(input_err("front.csv"))?;
    }
    finish_csv(&out.join("front.csv"), w)?;

    let reference = serde_json::json!({
        "manifest_id": manifest_id,
        "objectives": trace.objectives.iter().map(|o| o.name()).collect::<Vec<_>>(),
        "values": trace.reference.values,
    });
    atomic_write(
        &out.join("reference.json"),
        serde_json::to_string_pretty(&reference).unwrap().as_bytes(),
    )
}

fn cmd_explore(a: &ExploreArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if a.acquisition != "aba" && a.acquisition != "random" {
        return Err(CliError::Input(format!(
            "unknown acquisition `{}` (expected aba or random)",
            a.acquisition
        )));
    }
    let (space, space_ref) = load_space(&a.space)?;
    let (oracle, oracle_ref) = load_oracle(&a.oracle, &space)?;
    let mut configs = vec![space_ref, oracle_ref];

    let models = match &a.models {
        Some(dir) => {
            let models = load_models(dir, &space)?;
            for obj in Objective::ALL {
                let path = dir.join(format!("model.{}.json", obj.name()));
                let (_, r) = read_config(&path)?;
                configs.push(r);
            }
            Some(models)
        }
        None => None,
    };

    let args = serde_json::json!({
        "acquisition": a.acquisition,
        "budget": a.budget,
        "initial": a.initial,
        "iterations": a.iterations,
        "predictor": if models.is_some() { "surrogate" } else { "perfect" },
    });
    let manifest = make_manifest(&a.out, "explore", a.seed, configs, args)?;

    let counting = CountingOracle::new(&oracle, a.initial as u64 + a.budget);
    let cfg = ExplorationConfig {
        initial_samples: a.initial,
        seed_points: Vec::new(),
        max_iterations: a.iterations,
        seed: a.seed,
        objectives: Objective::ALL.to_vec(),
        inject_on_stall: true,
    };

    let trace = if a.acquisition == "random" {
        random_search(&space, &counting, &cfg)
    } else {
        match &models {
            Some(ms) => {
                let predictor = SurrogatePredictor::new(&space, [&ms[0], &ms[1], &ms[2]]);
                explore(&space, &counting, &predictor, &cfg)
            }
            None => {
                let predictor = PerfectPredictor::new(&oracle);
                explore(&space, &counting, &predictor, &cfg)
            }
        }
    }
    .map_err(|e| CliError::Numeric(e.to_string()))?;

    write_trace_files(&a.out, &manifest.manifest_id, &space, &trace)?;
    write_timing(&a.out, &manifest.manifest_id, started)
}

fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (space, space_ref) = load_space(&a.space)?;
    let (oracle, oracle_ref) = load_oracle(&a.oracle, &space)?;
    let models = load_models(&a.models, &space)?;
    let mut configs = vec![space_ref, oracle_ref];
    for obj in Objective::ALL {
        let (_, r) = read_config(&a.models.join(format!("model.{}.json", obj.name())))?;
        configs.push(r);
    }
    if a.n == 0 {
        return Err(CliError::Input("n must be at least 1".into()));
    }
    let args = serde_json::json!({ "n": a.n });
    let manifest = make_manifest(&a.out, "eval", a.seed, configs, args)?;

    let xs = random_sample(&space, a.n, a.seed);
    let mut w = csv_writer(&a.out.join("eval.csv"))?;
    w.write_record(["manifest_id", "objective", "n", "mape_pct", "mse", "r2"])
        .map_err(input_err("eval.csv"))?;
    for (mi, obj) in Objective::ALL.iter().enumerate() {
        let truths: Vec<f64> = xs.iter().map(|p| obj.value(&oracle.evaluate(p))).collect();
        let preds: Vec<f64> = xs
            .iter()
            .map(|p| models[mi].predict(&space, p))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        let n = truths.len() as f64;
        let mse = preds
            .iter()
            .zip(&truths)
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            / n;
        let mean = truths.iter().sum::<f64>() / n;
        let ss_tot: f64 = truths.iter().map(|t| (t - mean).powi(2)).sum();
        let r2 = if ss_tot > 0.0 { 1.0 - mse * n / ss_tot } else { f64::NAN };
        w.write_record([
            manifest.manifest_id.as_str(),
            obj.name(),
            &a.n.to_string(),
            &format!("{:.6}", mape(&preds, &truths)),
            &format!("{mse:.12e}"),
            &format!("{r2:.6}"),
        ])
        .map_err(input_err("eval.csv"))?;
    }
    finish_csv(&a.out.join("eval.csv"), w)?;
    write_timing(&a.out, &manifest.manifest_id, started)
}

#[derive(Deserialize)]
struct ReferenceFile {
    manifest_id: String,
    values: Vec<f64>,
}

fn cmd_report(a: &ReportArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut reference: Option<Vec<f64>> = None;
    for dir in &a.runs {
        let manifest: RunManifest = serde_json::from_str(
            &std::fs::read_to_string(dir.join("manifest.json"))
                .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?,
        )
        .map_err(input_err("manifest.json"))?;
        let refr: ReferenceFile = serde_json::from_str(
            &std::fs::read_to_string(dir.join("reference.json"))
                .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?,
        )
        .map_err(input_err("reference.json"))?;
        if refr.manifest_id != manifest.manifest_id {
            return Err(CliError::Compat(format!(
                "{}: reference belongs to a different run",
                dir.display()
            )));
        }
        match &reference {
            None => reference = Some(refr.values.clone()),
            Some(r) if *r == refr.values => {}
            Some(_) => {
                return Err(CliError::Compat(format!(
                    "{}: reference point differs from the other runs, refusing to merge",
                    dir.display()
                )))
            }
        }

        let mut curve = Vec::new();
        let mut rdr = csv::Reader::from_path(dir.join("phv_curve.csv"))
            .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        for rec in rdr.records() {
            let rec = rec.map_err(input_err("phv_curve.csv"))?;
            let calls: u64 = rec[1].parse().map_err(input_err("phv_curve.csv"))?;
            let phv: f64 = rec[2].parse().map_err(input_err("phv_curve.csv"))?;
            curve.push((calls, phv));
        }
        if curve.is_empty() {
            return Err(CliError::Input(format!(
                "{}: empty phv_curve.csv",
                dir.display()
            )));
        }
        let final_phv = curve.last().unwrap().1;
        let calls_to_99 = curve
            .iter()
            .find(|(_, p)| *p >= 0.99 * final_phv)
            .map(|(c, _)| *c)
            .unwrap_or(curve.last().unwrap().0);

        let timing: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.join("timing.json"))
                .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?,
        )
        .map_err(input_err("timing.json"))?;
        let wall = timing["wall_seconds"].as_f64().unwrap_or(f64::NAN);
        let acquisition = manifest.args["acquisition"]
            .as_str()
            .unwrap_or("unknown")
            .to_string();
        rows.push((
            manifest.manifest_id,
            acquisition,
            manifest.seed,
            final_phv,
            calls_to_99,
            wall,
        ));
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "manifest_id",
        "acquisition",
        "seed",
        "final_phv",
        "calls_to_99pct_phv",
        "wall_seconds",
    ])
    .map_err(input_err("report"))?;
    for (id, acq, seed, phv, calls, wall) in rows {
        w.write_record([
            id.as_str(),
            &acq,
            &seed.to_string(),
            &format!("{phv:.12e}"),
            &calls.to_string(),
            &format!("{wall:.3}"),
        ])
        .map_err(input_err("report"))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(parent) = a.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Input(format!("{}: {e}", parent.display())))?;
        }
    }
    atomic_write(&a.out, &bytes)
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Explore(a) => cmd_explore(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Report(a) => cmd_report(a),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
