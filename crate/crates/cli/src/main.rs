//! `qfat` — train quantized CNNs with optional fault-aware training,
//! sweep them exhaustively under stuck-at faults, and trace the
//! replication cost vs. worst-case-error frontier.
//!
//! Every run is reproducible from one seed: the config's `seed` (or the
//! `--seed` override) fans out to independent named streams for weight
//! init, batch shuffling, injected values, layer choice, and the
//! evaluation subset. Results land in `--out-dir` as
//! `<name>.ckpt`, `<name>_training_log.csv`, `<name>_report.csv`,
//! `<name>_summary.csv`, `<name>_sweep.json`, and `<name>_frontier.csv`.
//!
//! On failure the process exits nonzero and prints
//! `error[<category>]: <message>` to stderr, where `<category>` is one
//! of `config`, `format`, `io`, or `diverged`.

use clap::{Args, Parser, Subcommand};
use qfat_core::config::DATA_DIR_ENV;
use qfat_core::data::{generate_glyphs, load_auto, subset_indices};
use qfat_core::error::{Error, Result};
use qfat_core::net::build_cnv;
use qfat_core::replicate::{frontier_to_csv, pareto_frontier};
use qfat_core::rng::{streams, SeedFanout};
use qfat_core::sweep::{
    report_from_json, report_to_csv, report_to_json, summarize, summary_to_csv, sweep, SweepReport,
};
use qfat_core::train::{train, training_log_to_csv};
use qfat_core::{checkpoint, ExperimentConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qfat",
    version,
    about = "Fault-aware training and stuck-at fault analysis of quantized CNNs"
)]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the network described by a config file.
    Train(TrainArgs),
    /// Exhaustively sweep a trained checkpoint under stuck-at faults.
    Sweep(SweepArgs),
    /// Compute the replication cost vs. worst-case-error frontier.
    Pareto(ParetoArgs),
    /// Summarize all sweep reports in a directory.
    Report(ReportArgs),
    /// Generate the synthetic glyph dataset (IDX format).
    GenData(GenDataArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the checkpoint and training log.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory holding the checkpoint; reports are written here.
    #[arg(long)]
    out_dir: PathBuf,
    /// Evaluate on this many test samples (seeded subset); overrides the
    /// config's `sweep.subset_size`.
    #[arg(long)]
    subset_size: Option<usize>,
}

#[derive(Args)]
struct ParetoArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory holding the checkpoint and sweep report.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory with `*_sweep.json` files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenDataArgs {
    /// Directory for the IDX files.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    train_n: usize,
    #[arg(long, default_value_t = 2_000)]
    test_n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Pareto(args) => cmd_pareto(args),
        Command::Report(args) => cmd_report(args),
        Command::GenData(args) => cmd_gen_data(args),
    }
}

fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn data_dir_of(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let env = std::env::var(DATA_DIR_ENV).ok();
    cfg.data_dir(env.as_deref())
}

fn checkpoint_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(format!("{name}.ckpt"))
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = load_config(&args.config, args.seed)?;
    let data = load_auto(&data_dir_of(&cfg)?)?;
    let mut net = build_cnv(&cfg.cnv_options(&data.train))?;
    let fanout = SeedFanout::new(cfg.seed);
    net.init_weights(&mut fanout.stream(streams::WEIGHT_INIT));

    let outcome = train(&mut net, &data, &cfg.train, &fanout, |epoch, _, rec| {
        eprintln!(
            "epoch {epoch}: loss {:.6}, test accuracy {:.2}%, lr {}",
            rec.loss, rec.test_acc, rec.lr
        );
        Ok(())
    })?;

    std::fs::create_dir_all(&args.out_dir)?;
    checkpoint::save_checkpoint(&net, &checkpoint_path(&args.out_dir, &cfg.name))?;
    std::fs::write(
        args.out_dir.join(format!("{}_training_log.csv", cfg.name)),
        training_log_to_csv(&outcome.log),
    )?;

    let last = outcome.log.last().expect("at least one epoch");
    println!(
        "trained {}: {} epochs x {} steps, final test accuracy {:.2}%",
        cfg.name,
        outcome.log.len(),
        outcome.steps_per_epoch,
        last.test_acc
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = load_config(&args.config, args.seed)?;
    let data = load_auto(&data_dir_of(&cfg)?)?;
    let net = checkpoint::load_checkpoint(&checkpoint_path(&args.out_dir, &cfg.name))?;

    let subset = args.subset_size.or(cfg.sweep.subset_size);
    let fanout = SeedFanout::new(cfg.seed);
    let (eval_data, dataset_label) = match subset {
        Some(k) => {
            let idx = subset_indices(data.test.n, k, &mut fanout.stream(streams::EVAL_SUBSET))?;
            (data.test.select(&idx)?, format!("{}[test:{k}]", data.name))
        }
        None => (data.test.clone(), format!("{}[test]", data.name)),
    };

    let report = sweep(
        &net,
        &eval_data,
        cfg.network.fault_model,
        cfg.sweep.batch_size,
        &cfg.name,
        &dataset_label,
    )?;
    let summary = summarize(&report)?;

    std::fs::create_dir_all(&args.out_dir)?;
    std::fs::write(
        args.out_dir.join(format!("{}_report.csv", cfg.name)),
        report_to_csv(&report),
    )?;
    std::fs::write(
        args.out_dir.join(format!("{}_summary.csv", cfg.name)),
        summary_to_csv(&summary),
    )?;
    std::fs::write(
        args.out_dir.join(format!("{}_sweep.json", cfg.name)),
        report_to_json(&report)?,
    )?;

    println!(
        "swept {}: {} configurations on {} samples, error-free {:.2}%, min {:.2}%, max {:.2}%",
        cfg.name,
        report.records.len(),
        report.meta.eval_samples,
        report.error_free_accuracy,
        summary.min_accuracy,
        summary.max_accuracy
    );
    Ok(())
}

fn cmd_pareto(args: &ParetoArgs) -> Result<()> {
    let cfg = load_config(&args.config, None)?;
    let net = checkpoint::load_checkpoint(&checkpoint_path(&args.out_dir, &cfg.name))?;
    let sweep_path = args.out_dir.join(format!("{}_sweep.json", cfg.name));
    let report = report_from_json(&std::fs::read_to_string(&sweep_path)?)?;

    let frontier = pareto_frontier(&net, &report, &cfg.cost_model())?;
    std::fs::write(
        args.out_dir.join(format!("{}_frontier.csv", cfg.name)),
        frontier_to_csv(&frontier),
    )?;

    let first = frontier.first().expect("frontier has the k=0 point");
    let last = frontier.last().expect("frontier has the full-plan point");
    println!(
        "frontier {}: {} points, baseline cost {} at wce {:.2}%, full protection cost {} at wce {:.2}%",
        cfg.name,
        frontier.len(),
        first.cost,
        first.worst_case_error,
        last.cost,
        last.worst_case_error
    );
    Ok(())
}

/// One scatter row per sweep report found on disk.
struct ScatterRow {
    network: String,
    mode: String,
    error_free: f64,
    min_accuracy: f64,
    max_accuracy: f64,
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.out_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with("_sweep.json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no sweep reports (*_sweep.json) in {}",
            args.out_dir.display()
        )));
    }

    let mut rows = Vec::new();
    for path in &paths {
        let report: SweepReport = report_from_json(&std::fs::read_to_string(path)?)?;
        let summary = summarize(&report)?;
        rows.push(ScatterRow {
            network: report.meta.network_id.clone(),
            mode: report.meta.mode.to_string(),
            error_free: report.error_free_accuracy,
            min_accuracy: summary.min_accuracy,
            max_accuracy: summary.max_accuracy,
        });
    }

    println!(
        "{:<28} {:<8} {:>10} {:>8} {:>8}",
        "network", "mode", "error_free", "min_acc", "max_acc"
    );
    for r in &rows {
        println!(
            "{:<28} {:<8} {:>10.2} {:>8.2} {:>8.2}",
            r.network, r.mode, r.error_free, r.min_accuracy, r.max_accuracy
        );
    }

    let mut csv = String::from("network,mode,error_free_accuracy,min_accuracy,max_accuracy\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:.2},{:.2},{:.2}\n",
            r.network, r.mode, r.error_free, r.min_accuracy, r.max_accuracy
        ));
    }
    std::fs::write(args.out_dir.join("scatter.csv"), csv)?;
    Ok(())
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<()> {
    if args.train_n == 0 || args.test_n == 0 {
        return Err(Error::Config(
            "--train-n and --test-n must be at least 1".into(),
        ));
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let fanout = SeedFanout::new(args.seed);
    generate_glyphs(
        &args.out_dir,
        args.train_n,
        args.test_n,
        &mut fanout.stream(streams::SYNTH_DATA),
    )?;
    println!(
        "wrote glyph dataset to {}: {} train, {} test",
        args.out_dir.display(),
        args.train_n,
        args.test_n
    );
    Ok(())
}
