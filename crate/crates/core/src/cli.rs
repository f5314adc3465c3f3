//! Command-line entry point: `gen-data`, `inject-bias`, `train`, `sweep`,
//! `report` and `verify`.
//!
//! Exit codes: 0 on success, 1 when a check or run fails, 2 on usage,
//! configuration or input errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::run_suite;
use crate::config::{ProxyChoice, RunConfig};
use crate::data::{generate_synthetic, inject_label_bias, load_table, save_table, split_table, DatasetTable, Split};
use crate::error::Error;
use crate::proxy::{build_holdout_proxy, load_file_proxy, ProxyPredictor};
use crate::report::render_report;
use crate::trainer::{run_training, sweep, write_audit_csv, MetricsLog, SWEEP_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FAIRSEL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fairsel", version, about = "Fairness-aware online batch selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic dataset and write its splits to the configured paths.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Flip labels of a dataset CSV according to the [bias] section.
    InjectBias {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one model and write the metrics log and checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Train over the alpha x gamma x seed grid and write summary rows.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Render SVG charts and a combined CSV from metrics logs.
    Report {
        /// Metrics CSV; repeat to overlay several runs. `name=path` sets the legend label.
        #[arg(long = "metrics", required = true)]
        metrics: Vec<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the numerical identity checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Input(_) | Error::Parse { .. } | Error::Io { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Run(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Outcome {
    match cmd {
        Command::GenData { config, seed } => gen_data(&config, seed, out),
        Command::InjectBias {
            config,
            input,
            output,
            seed,
        } => {
            let cfg = RunConfig::load(&config)?;
            let table = load_table(&input, Split::Train)?;
            let biased = inject_label_bias(&table, &cfg.bias_spec()?, seed.unwrap_or(cfg.seed))?;
            save_table(&biased, &output)?;
            let flipped = biased.iter().filter(|e| e.is_flipped() == Some(true)).count();
            let _ = writeln!(out, "wrote {} ({} of {} labels flipped)", output.display(), flipped, biased.len());
            Ok(EXIT_OK)
        }
        Command::Train {
            config,
            out_dir,
            seed,
            workers,
        } => train(&config, out_dir, seed, workers, out),
        Command::Sweep {
            config,
            out_dir,
            workers,
        } => run_sweep(&config, out_dir, workers, out),
        Command::Report { metrics, out_dir } => {
            let mut logs = Vec::new();
            for spec in &metrics {
                let (name, path) = match spec.split_once('=') {
                    Some((n, p)) => (n.to_string(), PathBuf::from(p)),
                    None => (run_name(Path::new(spec)), PathBuf::from(spec)),
                };
                logs.push((name, MetricsLog::load_csv(&path)?));
            }
            for p in render_report(&logs, &out_dir)? {
                let _ = writeln!(out, "wrote {}", p.display());
            }
            Ok(EXIT_OK)
        }
        Command::Verify { seed } => {
            let mut ok = true;
            for c in run_suite(seed)? {
                let _ = writeln!(
                    out,
                    "{} {}: {} instances, worst {:.3e}, tolerance {:.0e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.instances,
                    c.worst,
                    c.tolerance
                );
                ok &= c.passed;
            }
            Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

/// Legend label for a metrics file: its stem, or the parent directory
/// name for files called `metrics.csv`.
fn run_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    if stem == "metrics" {
        if let Some(parent) = path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
            return parent.to_string();
        }
    }
    stem.to_string()
}

fn gen_data(config: &Path, seed: Option<u64>, out: &mut dyn Write) -> Outcome {
    let cfg = RunConfig::load(config)?;
    let g = cfg
        .generate
        .clone()
        .ok_or_else(|| Failure::Usage("missing required section [generate]".into()))?;
    let seed = seed.unwrap_or(cfg.seed);
    let parts: Vec<(Split, usize, &str)> = [
        (Split::Train, g.train_size, "paths.train"),
        (Split::Test, g.test_size, "paths.test"),
        (Split::Holdout, g.holdout_size, "paths.holdout"),
    ]
    .into_iter()
    .filter(|p| p.1 > 0)
    .collect();
    let targets: Vec<PathBuf> = parts
        .iter()
        .map(|p| cfg.require_path(p.2).map(Path::to_path_buf))
        .collect::<Result<_, _>>()?;
    let total = parts.iter().map(|p| p.1).sum();
    let table = generate_synthetic(&cfg.gen_spec(total)?, seed)?;
    let sizes: Vec<(Split, usize)> = parts.iter().map(|p| (p.0, p.1)).collect();
    for (t, path) in split_table(&table, &sizes, seed)?.iter().zip(&targets) {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        save_table(t, path)?;
        let _ = writeln!(out, "wrote {} ({} examples)", path.display(), t.len());
    }
    Ok(EXIT_OK)
}

/// Worker count after applying the thread cap from the environment.
pub fn capped_workers(requested: usize) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&c| c > 0);
    match cap {
        Some(c) => requested.min(c),
        None => requested,
    }
    .max(1)
}

struct Inputs {
    cfg: RunConfig,
    train: DatasetTable,
    test: DatasetTable,
    proxy: Option<ProxyPredictor>,
}

fn load_inputs(config: &Path) -> Result<Inputs, Failure> {
    let cfg = RunConfig::load(config)?;
    let train = load_table(cfg.require_path("paths.train")?, Split::Train)?;
    let test = load_table(cfg.require_path("paths.test")?, Split::Test)?;
    let needs = cfg.selector.to_config()?.needs_proxy();
    let proxy = match cfg.proxy.kind {
        _ if !needs => None,
        ProxyChoice::None => {
            return Err(Failure::Usage(format!(
                "selector.kind = {:?} needs a proxy but proxy.kind = none",
                cfg.selector.kind
            )))
        }
        ProxyChoice::Holdout => {
            let holdout = load_table(cfg.require_path("paths.holdout")?, Split::Holdout)?;
            let spec = cfg.model.to_spec(holdout.feature_dim())?;
            Some(build_holdout_proxy(&holdout, spec, &cfg.proxy.budget(cfg.seed))?)
        }
        ProxyChoice::File => Some(load_file_proxy(cfg.require_path("paths.proxy_predictions")?)?),
    };
    Ok(Inputs { cfg, train, test, proxy })
}

fn out_dir_of(cfg: &RunConfig, flag: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = match flag {
        Some(d) => d,
        None => cfg.require_path("paths.out_dir")?.to_path_buf(),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn train(
    config: &Path,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: &mut dyn Write,
) -> Outcome {
    let Inputs {
        mut cfg,
        train,
        test,
        proxy,
    } = load_inputs(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out_dir_of(&cfg, out_dir)?;
    let mut tc = cfg.trainer_config(train.feature_dim())?;
    tc.workers = capped_workers(workers.unwrap_or(tc.workers));
    let ckpt = dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt).map_err(|e| Error::io(&ckpt, e))?;
    tc.checkpoint_dir = Some(ckpt);
    let outcome = run_training(&tc, &train, &test, proxy.as_ref())?;
    let metrics = dir.join("metrics.csv");
    outcome.log.save_csv(&metrics)?;
    if tc.audit {
        let path = dir.join("audit.csv");
        let mut buf = Vec::new();
        write_audit_csv(&outcome.audit, &mut buf).map_err(|e| Error::io(&path, e))?;
        std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    }
    if let Some(last) = outcome.log.final_row() {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(
            out,
            "step {}: accuracy {:.4}, delta_dp {}, delta_deo {}, p% {}",
            last.step,
            last.accuracy,
            opt(last.delta_dp),
            opt(last.delta_deo),
            opt(last.p_percent)
        );
    }
    let _ = writeln!(out, "wrote {}", metrics.display());
    Ok(EXIT_OK)
}

fn run_sweep(config: &Path, out_dir: Option<PathBuf>, workers: Option<usize>, out: &mut dyn Write) -> Outcome {
    let Inputs {
        cfg,
        train,
        test,
        proxy,
    } = load_inputs(config)?;
    let dir = out_dir_of(&cfg, out_dir)?;
    let mut tc = cfg.trainer_config(train.feature_dim())?;
    tc.workers = capped_workers(workers.unwrap_or(tc.workers));
    tc.record_time = false;
    let rows = sweep(&cfg.sweep_grid(), &tc, &train, &test, proxy.as_ref())?;
    let mut text = format!("{SWEEP_HEADER}\n");
    let mut failures = 0;
    for r in &rows {
        text.push_str(&r.csv_line());
        text.push('\n');
        for f in &r.failures {
            let _ = writeln!(out, "run failed: {f}");
            failures += 1;
        }
    }
    let path = dir.join("sweep.csv");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let _ = writeln!(out, "wrote {} ({} rows)", path.display(), rows.len());
    Ok(if failures == 0 { EXIT_OK } else { EXIT_FAILURE })
}
