use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ppgnn::train::ModelMode;
use ppgnn_cli::benchmark::run_benchmark;
use ppgnn_cli::config::{ExperimentConfig, Overrides, ScalingConfig};
use ppgnn_cli::error::{CliError, Result};
use ppgnn_cli::homophily::run_homophily;
use ppgnn_cli::plot::export_plots;
use ppgnn_cli::robustness::run_robustness;
use ppgnn_cli::scaling::run_scaling;
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "ppgnn", version, about = "Latent graph inference experiments")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed; run i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// ppgnn, ppgnn_anchor, gcn or mlp.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single training run: metrics.json and epochs.jsonl.
    Train,
    /// num_runs seeded runs: metrics.json and epochs.jsonl.
    Benchmark,
    /// Accuracy under edge noise: robustness.csv.
    Robustness,
    /// Same-label ratio per probability bin: homophily.csv.
    Homophily {
        /// Score with the initial parameters instead of a trained model.
        #[arg(long)]
        untrained: bool,
    },
    /// Graph-learning time against N: scaling.csv.
    Scaling {
        /// Comma-separated graph sizes, overriding the config.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// SVG charts from the CSV tables in --input (default: --out).
    Plot {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Parse and check a config, then print it with defaults filled in.
    ValidateConfig,
}

/// Scaling needs no dataset, so its config may omit `data`.
#[derive(Deserialize, Default)]
struct ScalingFile {
    #[serde(default)]
    scaling: ScalingConfig,
    #[serde(default)]
    train: Option<ppgnn::train::TrainConfig>,
}

fn overrides(cli: &Cli) -> Result<Overrides> {
    let mode = match &cli.mode {
        Some(m) => Some(
            m.parse::<ModelMode>()
                .map_err(|e| CliError::Config(e.to_string()))?,
        ),
        None => None,
    };
    Ok(Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        mode,
    })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let mut cfg = ExperimentConfig::from_file(path)?;
    cfg.apply(&overrides(cli)?)?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| cfg.out_dir())
}

fn fmt_acc(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |a| format!("{:.2}", a * 100.0))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train | Command::Benchmark => {
            let mut cfg = load_config(cli)?;
            if matches!(cli.command, Command::Train) {
                cfg.num_runs = 1;
            }
            let m = run_benchmark(&cfg)?;
            println!(
                "{}: {} ± {} over {}/{} runs -> {}",
                m.mode,
                fmt_acc(m.mean),
                fmt_acc(m.std),
                m.completed,
                m.num_runs,
                out_dir(cli, &cfg).display()
            );
            if let Some(w) = &m.warning {
                eprintln!("warning: {w}");
            }
        }
        Command::Robustness => {
            let cfg = load_config(cli)?;
            for c in run_robustness(&cfg)? {
                println!(
                    "{} {:>5.2} {:<13} {} ± {}",
                    c.row.noise,
                    c.row.ratio,
                    c.row.model.as_str(),
                    fmt_acc(c.row.mean),
                    fmt_acc(c.row.std)
                );
            }
        }
        Command::Homophily { untrained } => {
            let cfg = load_config(cli)?;
            let r = run_homophily(&cfg, *untrained)?;
            for row in &r.rows {
                let ratio = row.ratio.map_or_else(|| "-".into(), |v| format!("{v:.3}"));
                println!(
                    "({:.2}, {:.2}] {:>9} pairs  ratio {ratio}",
                    row.lo, row.hi, row.pairs
                );
            }
            let rho = r
                .summary
                .spearman
                .map_or_else(|| "n/a".into(), |v| format!("{v:.3}"));
            println!(
                "spearman {rho}, {} non-empty bins",
                r.summary.non_empty_bins
            );
        }
        Command::Scaling { sizes } => {
            let file = match &cli.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p)
                        .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                    serde_json::from_str::<ScalingFile>(&text)
                        .map_err(|e| CliError::Config(format!("config: {e}")))?
                }
                None => ScalingFile::default(),
            };
            let mut sc = file.scaling;
            if let Some(s) = sizes {
                sc.sizes = s.clone();
            }
            let mut probe = ExperimentConfig::new(ppgnn_cli::DataSource::Path(PathBuf::new()));
            probe.scaling = sc.clone();
            probe.validate()?;
            let seed = cli.seed.or(file.train.map(|t| t.seed)).unwrap_or(0);
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let r = run_scaling(&sc, seed, &out)?;
            for row in &r.rows {
                let nn = row
                    .node_node_ms
                    .map_or_else(|| "OOM".into(), |v| format!("{v:.1}"));
                println!(
                    "N={:<6} node_node {nn:>10} ms  anchor {:>8.1} ms",
                    row.n,
                    row.anchor_ms.unwrap_or(f64::NAN)
                );
            }
            let fmt = |s: Option<f64>| s.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"));
            println!(
                "log-log slope: node_node {}, anchor {}",
                fmt(r.summary.node_node_slope),
                fmt(r.summary.anchor_slope)
            );
        }
        Command::Plot { input } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let input = input.clone().unwrap_or_else(|| out.clone());
            for p in export_plots(Path::new(&input), &out)? {
                println!("{}", p.display());
            }
        }
        Command::ValidateConfig => {
            let cfg = load_config(cli)?;
            // a closed pipe (`| head`) is not an error
            let _ = writeln!(std::io::stdout(), "{}", cfg.to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
