//! Command-line interface: data generation, training, evaluation, sweeps,
//! embedding export, and scoring of external detection dumps.
//!
//! Exit codes: 0 success, 1 usage/configuration/I-O error, 2 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use openset::eval::{self, MetricRow};
use openset::losses::TrainMode;
use openset::model::{checkpoint_from_json, checkpoint_to_json};
use openset::pipeline::{
    evaluate, export_embeddings, generate_dataset, run_sweep, sweep_rows_to_csv,
    EvalMetrics, RunReport, SweepGrid, SyntheticDataset, TrainConfig,
};

#[derive(Parser)]
#[command(name = "openset", version, about = "Open-set classification benchmark: training, evaluation and metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset for a config and write it as JSON.
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output dataset path.
        #[arg(long, default_value = "dataset.json")]
        out: PathBuf,
    },
    /// Train a model; writes report.json, metrics.csv and checkpoint.json.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Optional pre-generated dataset (JSON from gen-data).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint; writes report.json and metrics.csv.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Checkpoint produced by train.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train and evaluate every cell of a coefficient grid.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// JSON grid spec, e.g. {"blur": [0.5, 0.3, 0.2, 0.15, 0.1]}.
        #[arg(long)]
        grid: PathBuf,
        /// Output CSV path.
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Export test-split embeddings of a checkpoint as CSV + SVG scatter.
    ExportEmbeddings {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output CSV path (the SVG lands next to it).
        #[arg(long, default_value = "embeddings.csv")]
        out: PathBuf,
    },
    /// Compute open-set metrics over an external JSON-lines detection dump.
    ScoreDump {
        /// JSONL file: {"id","pred","score","gt","matched"} per line.
        #[arg(long)]
        dump: PathBuf,
        /// Output metrics CSV path.
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
    },
}

/// Config file plus per-field overrides (every TrainConfig field).
#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; fields not present fall back to defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_known: Option<usize>,
    #[arg(long)]
    unknown_clusters: Option<usize>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    background_samples: Option<usize>,
    #[arg(long)]
    test_samples_per_class: Option<usize>,
    #[arg(long)]
    test_background_samples: Option<usize>,
    #[arg(long)]
    unknown_samples_per_cluster: Option<usize>,
    #[arg(long)]
    circle_radius: Option<f64>,
    #[arg(long)]
    unknown_radius_factor: Option<f64>,
    #[arg(long)]
    blob_std: Option<f64>,
    /// Comma-separated hidden widths, e.g. 64,64.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    alpha_scale: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    alpha_w: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    blur: Option<f64>,
    #[arg(long)]
    cost_power: Option<f64>,
    #[arg(long)]
    k_fg: Option<usize>,
    #[arg(long)]
    k_bg: Option<usize>,
    #[arg(long)]
    bank_capacity: Option<usize>,
    #[arg(long)]
    sn_iters: Option<usize>,
    #[arg(long)]
    spectral_norm: Option<bool>,
    /// ce-baseline | od-sn | od-cwa
    #[arg(long)]
    mode: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                TrainConfig::from_json(&text)
                    .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?
            }
            None => TrainConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        set!(
            seed, num_known, unknown_clusters, samples_per_class, background_samples,
            test_samples_per_class, test_background_samples, unknown_samples_per_cluster,
            circle_radius, unknown_radius_factor, blob_std, hidden, feature_dim, embed_dim,
            iterations, batch_size, lr, momentum, weight_decay, alpha_scale, tau, alpha_w,
            beta, lambda, delta0, blur, cost_power, k_fg, k_bg, bank_capacity, sn_iters,
            spectral_norm
        );
        if let Some(mode) = &self.mode {
            cfg.mode = match mode.as_str() {
                "ce-baseline" => TrainMode::CeBaseline,
                "od-sn" => TrainMode::OdSn,
                "od-cwa" => TrainMode::OdCwa,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown mode {other:?} (expected ce-baseline, od-sn or od-cwa)"
                    )))
                }
            };
        }
        cfg.validate()
            .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        Ok(cfg)
    }
}

enum CliError {
    Usage(String),
    Numerical(String),
}

impl From<openset::Error> for CliError {
    fn from(e: openset::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep clap's help/version on stdout with success, errors on code 1
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { config, out } => {
            let cfg = config.resolve()?;
            let dataset = generate_dataset(&cfg)?;
            write(&out, &dataset.to_json()?)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Train { config, data, out } => {
            let cfg = config.resolve()?;
            let dataset = load_or_generate(&cfg, data.as_deref())?;
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
            let run = openset::pipeline::run_experiment_on(&cfg, dataset)?;
            write(&out.join("checkpoint.json"), &checkpoint_to_json(&run.params)?)?;
            write(&out.join("report.json"), &run.report.to_json()?)?;
            let metrics = run.report.metrics.as_ref().expect("train always evaluates");
            write(&out.join("metrics.csv"), &metrics_csv(metrics))?;
            print_summary(&run.report);
            Ok(())
        }
        Command::Eval { config, checkpoint, data, out } => {
            let cfg = config.resolve()?;
            let params = checkpoint_from_json(&read(&checkpoint)?)?;
            let dataset = load_or_generate(&cfg, data.as_deref())?;
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
            let metrics = evaluate(&params, &dataset, &cfg)?;
            let report = RunReport {
                config_hash: cfg.config_hash(),
                mode: cfg.mode,
                seed: cfg.seed,
                loss_series: Vec::new(),
                metrics: Some(metrics.clone()),
                wall_clock_seconds: 0.0,
            };
            write(&out.join("report.json"), &report.to_json()?)?;
            write(&out.join("metrics.csv"), &metrics_csv(&metrics))?;
            print_summary(&report);
            Ok(())
        }
        Command::Sweep { config, grid, out } => {
            let cfg = config.resolve()?;
            let grid = SweepGrid::from_json(&read(&grid)?)
                .map_err(|e| CliError::Usage(format!("bad grid: {e}")))?;
            let rows = run_sweep(&cfg, &grid);
            write(&out, &sweep_rows_to_csv(&rows))?;
            let failures = rows.iter().filter(|r| r.error.is_some()).count();
            println!("wrote {} ({} cells, {} failed)", out.display(), rows.len(), failures);
            Ok(())
        }
        Command::ExportEmbeddings { config, checkpoint, data, out } => {
            let cfg = config.resolve()?;
            let params = checkpoint_from_json(&read(&checkpoint)?)?;
            let dataset = load_or_generate(&cfg, data.as_deref())?;
            let (csv, svg) = export_embeddings(&params, &dataset, &cfg, &out)?;
            println!("wrote {} and {}", csv.display(), svg.display());
            Ok(())
        }
        Command::ScoreDump { dump, out } => {
            let records = eval::parse_dump_jsonl(&read(&dump)?)?;
            if records.is_empty() {
                return Err(CliError::Usage("dump contains no records".into()));
            }
            let rows = eval::dump_metric_rows(&records)?;
            write(&out, &eval::metrics_to_csv(&rows))?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn metrics_csv(m: &EvalMetrics) -> String {
    let mut rows = vec![
        MetricRow::new("accuracy", None, m.accuracy),
        MetricRow::new("map_known", None, m.map_known),
        MetricRow::new("wi_headline", Some(m.wi_threshold), m.wi),
        MetricRow::new("aose", Some(m.wi_threshold), m.aose as f64),
    ];
    if let Some(ap) = m.ap_unknown {
        rows.push(MetricRow::new("ap_unknown", None, ap));
    }
    if let Some(sm) = m.sigma_mu {
        rows.push(MetricRow::new("sigma_mu", None, sm));
    }
    if let Some(c) = m.cluster {
        rows.push(MetricRow::new("dunn", None, c.dunn));
        rows.push(MetricRow::new("calinski_harabasz", None, c.calinski_harabasz));
        rows.push(MetricRow::new("hubert", None, c.hubert));
        rows.push(MetricRow::new("davies_bouldin", None, c.davies_bouldin));
        rows.push(MetricRow::new("xie_beni", None, c.xie_beni));
    }
    for (t, wi) in &m.wi_grid {
        rows.push(MetricRow::new("wi", Some(*t), *wi));
    }
    eval::metrics_to_csv(&rows)
}

fn print_summary(report: &RunReport) {
    if let Some(m) = &report.metrics {
        println!(
            "mode={} seed={} accuracy={:.4} mAP_K={:.4} AP_U={} WI={:.2} AOSE={} sigma_mu={}",
            report.mode,
            report.seed,
            m.accuracy,
            m.map_known,
            m.ap_unknown.map_or("n/a".into(), |v| format!("{v:.4}")),
            m.wi,
            m.aose,
            m.sigma_mu.map_or("n/a".into(), |v| format!("{v:.5}")),
        );
    }
}

fn load_or_generate(
    cfg: &TrainConfig,
    data: Option<&Path>,
) -> Result<SyntheticDataset, CliError> {
    match data {
        Some(path) => Ok(SyntheticDataset::from_json(&read(path)?)
            .map_err(|e| CliError::Usage(format!("bad dataset {}: {e}", path.display())))?),
        None => Ok(generate_dataset(cfg)?),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}
