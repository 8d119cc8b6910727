//! Command-line harness: data generation, training runs, statistical
//! verification suites, trajectory comparison, selection experiments, and
//! LSH pool precomputation.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.

mod config;
mod experiment;
mod verify;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use coobatch::arrange::{ArrangementSchedule, Designation, Distribution, LshFamily, LshPool};
use coobatch::data::{generate_blocks, sample_block_pairs, AssociationMatrix, BlocksConfig};
use coobatch::metrics::{read_trajectory_csv, training_gain, write_trajectory_csv};
use coobatch::selection::{
    run_selection_experiment, select_examples, SelectionConfig, SelectionMode,
};
use coobatch::train::{
    read_checkpoint, train, write_checkpoint, EvalSpec, TrainConfig, TrainResources,
};

use config::ConfigFile;

#[derive(Parser)]
#[command(
    name = "coobatch",
    about = "Arrangement experiments for pairwise-association embeddings",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stochastic blocks association matrix file.
    Generate(GenerateArgs),
    /// Run a training experiment from a config file.
    Train(TrainArgs),
    /// Run a statistical verification suite.
    Verify(VerifyArgs),
    /// Compare trajectories: training gain of each method over a baseline.
    Compare(CompareArgs),
    /// Select per-row/per-column example subsets and train on them.
    Select(SelectArgs),
    /// Precompute LSH map pools for replaying refined arrangements.
    LshPool(LshPoolArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Matrix side n.
    #[arg(long)]
    n: usize,
    /// Number of equal-size blocks B.
    #[arg(long)]
    blocks: usize,
    /// In-block interaction probability p.
    #[arg(long, default_value_t = 0.7)]
    inblock: f64,
    /// Number of interaction draws r.
    #[arg(long)]
    interactions: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output matrix file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override embedding dimension d.
    #[arg(long)]
    dim: Option<usize>,
    /// Override minibatch size parameter b.
    #[arg(long)]
    batch: Option<usize>,
    /// Override negatives per positive (lambda).
    #[arg(long)]
    neg: Option<usize>,
    /// Override the learning rate (eta).
    #[arg(long)]
    lr: Option<f64>,
    /// Replace all configured methods with this single schedule.
    #[arg(long)]
    schedule: Option<String>,
    /// Override the update budget.
    #[arg(long)]
    budget: Option<u64>,
    /// Override the run seeds (comma-separated).
    #[arg(long)]
    seeds: Option<String>,
    /// Enable the context bias parameter.
    #[arg(long, overrides_with = "no_bias")]
    bias: bool,
    /// Disable the context bias parameter.
    #[arg(long)]
    no_bias: bool,
    /// Write wall-clock seconds into trajectory CSVs (breaks byte-for-byte
    /// rerun reproducibility of the files).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name: marginals, coplacement, jaccard-preservation,
    /// lsh-collisions, gradients, or cosine-move.
    suite: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct CompareArgs {
    /// Baseline trajectory CSV.
    baseline: PathBuf,
    /// Method trajectory CSVs.
    #[arg(required = true)]
    methods: Vec<PathBuf>,
    /// Quality fractions of each method's peak.
    #[arg(long, value_delimiter = ',', default_values_t = [0.75, 0.95, 0.99])]
    fractions: Vec<f64>,
    /// Metric column: gap or precision.
    #[arg(long, default_value = "gap")]
    metric: String,
}

#[derive(Args)]
struct SelectArgs {
    /// Matrix side n (blocks data).
    #[arg(long)]
    n: usize,
    /// Number of blocks B.
    #[arg(long)]
    blocks: usize,
    #[arg(long, default_value_t = 0.7)]
    inblock: f64,
    #[arg(long)]
    interactions: u64,
    /// Seed for the generated data.
    #[arg(long, default_value_t = 1)]
    data_seed: u64,
    /// Examples selected per row and per column (T).
    #[arg(long, default_value_t = 5)]
    t: usize,
    /// Selection modes to run: coordinated, independent, or both.
    #[arg(long, default_value = "both")]
    mode: String,
    /// Run seeds (comma-separated); each seeds selection and training.
    #[arg(long, default_value = "1")]
    seeds: String,
    #[arg(long, default_value_t = 25)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, default_value_t = 10)]
    neg: usize,
    #[arg(long, default_value_t = 0.02)]
    lr: f64,
    #[arg(long)]
    budget: u64,
    #[arg(long, default_value_t = 50)]
    evals: usize,
    /// Test pairs per side for the cosine gap.
    #[arg(long, default_value_t = 2000)]
    test_pairs: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct LshPoolArgs {
    /// Association matrix file (Jaccard maps).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Coarse embedding checkpoint (angular maps).
    #[arg(long)]
    coarse_checkpoint: Option<PathBuf>,
    /// Map family: jaccard or angular.
    #[arg(long)]
    family: String,
    /// Axis: focus, context, or both.
    #[arg(long, default_value = "both")]
    axis: String,
    /// Maps per axis.
    #[arg(long, default_value_t = 32)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path prefix; `.focus.pool` / `.context.pool` are appended.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Generate(args) => cmd_generate(args),
        Command::Train(args) => cmd_train(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Select(args) => cmd_select(args),
        Command::LshPool(args) => cmd_lsh_pool(args),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let cfg = BlocksConfig {
        n: args.n,
        blocks: args.blocks,
        interactions: args.interactions,
        in_block: args.inblock,
        seed: args.seed,
    };
    let matrix = generate_blocks(&cfg)?;
    matrix.write_to(&args.out)?;
    println!(
        "wrote {} ({}x{}, {} entries, total weight {})",
        args.out.display(),
        matrix.n_focus(),
        matrix.n_context(),
        matrix.nnz(),
        matrix.total()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let mut cfg = ConfigFile::load(&args.config)?;
    if let Some(dim) = args.dim {
        cfg.set("train", "dim", dim.to_string());
    }
    if let Some(batch) = args.batch {
        cfg.set("train", "batch", batch.to_string());
    }
    if let Some(neg) = args.neg {
        cfg.set("train", "neg", neg.to_string());
    }
    if let Some(lr) = args.lr {
        cfg.set("train", "lr", lr.to_string());
    }
    if let Some(budget) = args.budget {
        cfg.set("train", "budget", budget.to_string());
    }
    if let Some(seeds) = &args.seeds {
        cfg.set("train", "seeds", seeds.clone());
    }
    if args.bias {
        cfg.set("train", "bias", "true".into());
    }
    if args.no_bias {
        cfg.set("train", "bias", "false".into());
    }
    if let Some(dir) = &args.out {
        cfg.set("output", "dir", dir.display().to_string());
    }
    if let Some(schedule) = &args.schedule {
        // A schedule flag replaces every configured method.
        ArrangementSchedule::parse(schedule)?;
        cfg.set("method.cli", "schedule", schedule.clone());
        let named: Vec<String> = cfg
            .subsections("method")
            .iter()
            .map(|(name, _)| name.clone())
            .filter(|name| name != "cli")
            .collect();
        for name in named {
            cfg.set(&format!("method.{name}"), "schedule", String::new());
        }
    }

    let exp = experiment::build(&cfg)?;
    fs::create_dir_all(&exp.out_dir)?;

    // Build pools once when any schedule refines.
    let wants_family = |family: LshFamily| {
        exp.methods.iter().any(|(_, sched)| {
            sched.segments().iter().any(
                |&(_, d)| matches!(d, Distribution::CooLsh { family: f, .. } if f == family),
            )
        })
    };
    let mut pool_rng = coobatch::rng::stream(exp.lsh.pool_seed, "cli-lsh-pools");
    let jaccard_pools = if wants_family(LshFamily::Jaccard) {
        Some((
            LshPool::build_jaccard(
                &exp.matrix,
                Designation::Focus,
                exp.lsh.pool_size,
                &mut pool_rng,
            )?,
            LshPool::build_jaccard(
                &exp.matrix,
                Designation::Context,
                exp.lsh.pool_size,
                &mut pool_rng,
            )?,
        ))
    } else {
        None
    };
    let angular_pools = if wants_family(LshFamily::Angular) {
        let path = exp
            .lsh
            .coarse_checkpoint
            .as_ref()
            .ok_or_else(|| anyhow!("angular refinement needs [lsh] coarse-checkpoint"))?;
        let coarse = read_checkpoint(path)
            .with_context(|| format!("loading coarse checkpoint {}", path.display()))?;
        Some((
            LshPool::build_angular(
                &coarse.focus,
                Designation::Focus,
                exp.lsh.pool_size,
                &mut pool_rng,
            )?,
            LshPool::build_angular(
                &coarse.context,
                Designation::Context,
                exp.lsh.pool_size,
                &mut pool_rng,
            )?,
        ))
    } else {
        None
    };

    let resources = TrainResources {
        jaccard_pools: jaccard_pools.as_ref().map(|(f, c)| (f, c)),
        angular_pools: angular_pools.as_ref().map(|(f, c)| (f, c)),
        block_labels: exp.labels.as_deref(),
        shuffle_parts: None,
    };

    for (name, schedule) in &exp.methods {
        for &seed in &exp.params.seeds {
            let train_config = TrainConfig {
                dim: exp.params.dim,
                batch: exp.params.batch,
                negatives: exp.params.negatives,
                learning_rate: exp.params.learning_rate,
                bias: exp.params.bias,
                seed,
                schedule: schedule.clone(),
                budget: exp.params.budget,
                eval_points: exp.params.evals,
            };
            let (mut trajectory, model) = train(&exp.matrix, &exp.eval, &resources, &train_config)?;
            trajectory.config_hash = exp.config_hash;
            let csv_path = exp.out_dir.join(format!("{name}-seed{seed}.csv"));
            write_trajectory_csv(&trajectory, &csv_path, args.timings)?;
            let ckpt_path = exp.out_dir.join(format!("{name}-seed{seed}.ckpt"));
            write_checkpoint(&model, &ckpt_path)?;
            let last = trajectory.samples.last().unwrap();
            println!(
                "{name} seed {seed}: {} updates, final gap {:.4}{} -> {}",
                last.update_count,
                last.cosine_gap,
                last.precision_at_k
                    .map(|p| format!(", precision {p:.3}"))
                    .unwrap_or_default(),
                csv_path.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let report = verify::run_suite(&args.suite, args.seed)?;
    report.print();
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let series_of = |path: &PathBuf| -> Result<(String, Vec<(f64, f64)>)> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let trajectory =
            read_trajectory_csv(path).with_context(|| format!("reading {}", path.display()))?;
        let series = match args.metric.as_str() {
            "gap" => trajectory.gap_series(),
            "precision" => trajectory.precision_series(),
            other => bail!("unknown metric '{other}' (expected gap or precision)"),
        };
        if series.is_empty() {
            bail!(
                "{}: no samples for metric '{}'",
                path.display(),
                args.metric
            );
        }
        Ok((name, series))
    };

    let (baseline_name, baseline) = series_of(&args.baseline)?;
    println!("baseline: {baseline_name}");
    let header: Vec<String> = args
        .fractions
        .iter()
        .map(|f| format!("{:>10}", format!("{f}xpeak")))
        .collect();
    println!("{:<28} {}", "method", header.join(" "));
    for path in &args.methods {
        let (name, series) = series_of(path)?;
        let mut cells = Vec::new();
        for &fraction in &args.fractions {
            match training_gain(&baseline, &series, fraction) {
                Ok(gain) => cells.push(format!("{gain:>9.2}%")),
                Err(_) => cells.push(format!("{:>10}", "n/a")),
            }
        }
        println!("{name:<28} {}", cells.join(" "));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_select(args: SelectArgs) -> Result<ExitCode> {
    let blocks = BlocksConfig {
        n: args.n,
        blocks: args.blocks,
        interactions: args.interactions,
        in_block: args.inblock,
        seed: args.data_seed,
    };
    let matrix = generate_blocks(&blocks)?;
    let (positives, negatives) =
        sample_block_pairs(&blocks, args.test_pairs, args.test_pairs, args.data_seed);
    let eval = EvalSpec {
        positives,
        negatives,
        precision: None,
    };

    let modes: Vec<SelectionMode> = match args.mode.to_ascii_lowercase().as_str() {
        "both" => vec![SelectionMode::Coordinated, SelectionMode::Independent],
        other => vec![SelectionMode::parse(other)?],
    };
    let seeds = config::parse_seed_list(&args.seeds)?;
    fs::create_dir_all(&args.out)?;

    for mode in modes {
        let mode_name = match mode {
            SelectionMode::Coordinated => "coordinated",
            SelectionMode::Independent => "independent",
        };
        for &seed in &seeds {
            let selected = select_examples(
                &matrix,
                &SelectionConfig {
                    per_entity: args.t,
                    mode,
                    seed,
                },
            )?;
            let stem = format!("select-{mode_name}-t{}-seed{seed}", args.t);
            selected.write_axis(Designation::Focus, args.out.join(format!("{stem}.rows")))?;
            selected.write_axis(Designation::Context, args.out.join(format!("{stem}.cols")))?;
            let config = TrainConfig {
                dim: args.dim,
                batch: args.batch,
                negatives: args.neg,
                learning_rate: args.lr,
                bias: false,
                seed,
                schedule: ArrangementSchedule::parse("ind")?,
                budget: args.budget,
                eval_points: args.evals,
            };
            let (trajectory, _) = run_selection_experiment(&selected, &eval, &config)?;
            let csv_path = args.out.join(format!("{stem}.csv"));
            write_trajectory_csv(&trajectory, &csv_path, args.timings)?;
            let last = trajectory.samples.last().unwrap();
            println!(
                "{mode_name} T={} seed {seed}: final gap {:.4} -> {}",
                args.t,
                last.cosine_gap,
                csv_path.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_lsh_pool(args: LshPoolArgs) -> Result<ExitCode> {
    let axes: Vec<Designation> = match args.axis.to_ascii_lowercase().as_str() {
        "focus" => vec![Designation::Focus],
        "context" => vec![Designation::Context],
        "both" => vec![Designation::Focus, Designation::Context],
        other => bail!("unknown axis '{other}'"),
    };
    let mut rng = coobatch::rng::stream(args.seed, "cli-lsh-pool");
    for axis in axes {
        let pool = match args.family.to_ascii_lowercase().as_str() {
            "jaccard" => {
                let path = args
                    .matrix
                    .as_ref()
                    .ok_or_else(|| anyhow!("jaccard pools need --matrix"))?;
                let matrix = AssociationMatrix::read_from(path)?;
                LshPool::build_jaccard(&matrix, axis, args.count, &mut rng)?
            }
            "angular" => {
                let path = args
                    .coarse_checkpoint
                    .as_ref()
                    .ok_or_else(|| anyhow!("angular pools need --coarse-checkpoint"))?;
                let coarse = read_checkpoint(path)?;
                let table = match axis {
                    Designation::Focus => &coarse.focus,
                    Designation::Context => &coarse.context,
                };
                LshPool::build_angular(table, axis, args.count, &mut rng)?
            }
            other => bail!("unknown LSH family '{other}'"),
        };
        let suffix = match axis {
            Designation::Focus => "focus",
            Designation::Context => "context",
        };
        let path = args.out.with_extension(format!("{suffix}.pool"));
        pool.write_to(&path)?;
        println!("wrote {} ({} maps)", path.display(), pool.len());
    }
    Ok(ExitCode::SUCCESS)
}
