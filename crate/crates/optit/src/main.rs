use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optit::analyze::{self, SegmentConfig};
use optit::checkpoint::Checkpoint;
use optit::config::ExperimentConfig;
use optit::grid_svg::render_option_grids;
use optit::metrics::read_metrics;
use optit::parallel::PoolExecutor;
use optit::plot::{aggregate, render_curves, PlotStyle};
use optit::runner::{run_experiment, seed_dir, RunOptions, METRICS_FILE};
use optit::selftest::run_selftest;
use optit::sweep::run_sweep;
use optit::trajectory::read_trajectories;
use optit_core::analysis::DiversityConfig;

type BoxError = Box<dyn std::error::Error>;

#[derive(Parser)]
#[command(name = "optit", version, about = "Train and analyse option-iteration agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// TOML config; keys override the chosen preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset used when no config file is given.
    #[arg(long)]
    preset: Option<String>,
    /// Run only this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root (defaults to the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the training length.
    #[arg(long)]
    steps: Option<u64>,
    /// Search threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Lock-step acting and learning; bit-reproducible for a fixed seed.
    #[arg(long)]
    synchronous: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed.
    Run(ExperimentArgs),
    /// Grid-search step size and temperature.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Grid cells trained concurrently.
        #[arg(long, default_value_t = 1)]
        cell_threads: usize,
    },
    /// Learning curves from run directories, as SVG.
    Plot {
        /// `label=dir`, where dir holds seed_*/metrics.csv.
        #[arg(long = "curve", required = true)]
        curves: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "windowed return")]
        title: String,
        /// Clamp drawn values below this.
        #[arg(long, allow_hyphen_values = true)]
        floor: Option<f64>,
    },
    /// Offline analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Print a checkpoint's metadata and layer shapes.
    CheckpointDump { path: PathBuf },
    /// Run the oracle suites.
    Selftest {
        /// Random configurations per gradient check.
        #[arg(long, default_value_t = 20)]
        configs: usize,
    },
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Option arrow grids of a checkpoint, as SVG plus a JSON summary.
    Grids {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed of the drawn maze or controller instance.
        #[arg(long, default_value_t = 0)]
        instance_seed: u64,
    },
    /// Mutual information between option and first button pressed.
    Diversity {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        states: usize,
        #[arg(long, default_value_t = 100)]
        rollouts: usize,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Closed-form cross-entropies of the four-direction example.
    CeDemo {
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 15)]
        width: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Greedy-of-random against optimal on generated electric mazes.
    Bellman {
        #[arg(long, default_value_t = 5)]
        width: usize,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, default_value_t = 1.0)]
        discount: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit options with learned termination to dumped trajectories.
    Segment {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long, default_value_t = 4)]
        options: usize,
        #[arg(long, default_value_t = 4)]
        actions: usize,
        #[arg(long, default_value_t = 20)]
        window: usize,
        #[arg(long, default_value_t = 2)]
        hidden_layers: usize,
        #[arg(long, default_value_t = 64)]
        hidden_units: usize,
        #[arg(long, default_value_t = 2000)]
        updates: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        step_size: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_experiment(a: &ExperimentArgs) -> Result<(ExperimentConfig, PathBuf, RunOptions), BoxError> {
    let mut c = match (&a.config, &a.preset) {
        (Some(p), None) => ExperimentConfig::load(p)?,
        (None, p) => ExperimentConfig::from_toml(&format!("preset = {:?}", p.as_deref().unwrap_or("electric_procmaze7")))?,
        (Some(_), Some(_)) => return Err("--config and --preset are exclusive; set `preset` inside the file".into()),
    };
    if let Some(s) = a.seed {
        c.seeds = vec![s];
    }
    if let Some(n) = a.steps {
        c.run.total_steps = n;
    }
    c.validate()?;
    let out = a.out.clone().unwrap_or_else(|| c.output_dir.clone());
    Ok((c, out, RunOptions { synchronous: a.synchronous, threads: a.threads }))
}

fn print_json(v: &serde_json::Value) -> Result<(), BoxError> {
    use std::io::Write as _;
    match writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v)?) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), BoxError> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn seed_metrics(dir: &Path) -> Result<Vec<PathBuf>, BoxError> {
    let mut found: Vec<(u64, PathBuf)> = Vec::new();
    for e in std::fs::read_dir(dir)? {
        let e = e?;
        let name = e.file_name().to_string_lossy().into_owned();
        if let Some(s) = name.strip_prefix("seed_").and_then(|s| s.parse().ok()) {
            let m = e.path().join(METRICS_FILE);
            if m.exists() {
                found.push((s, m));
            }
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(format!("no seed_*/{METRICS_FILE} under {}", dir.display()).into());
    }
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn run(cli: Cli) -> Result<bool, BoxError> {
    match cli.command {
        Command::Run(a) => {
            let (c, out, opts) = load_experiment(&a)?;
            let mut ok = true;
            for (seed, r) in run_experiment(&c, &out, &opts) {
                match r {
                    Ok(o) => {
                        let last = o.rows.last().map_or(f64::NAN, |r| r.windowed_return_mean);
                        println!("seed {seed}: {} steps, {} updates, {} episodes, final windowed return {last:.4} -> {}", o.total_env_steps, o.updates, o.episodes, o.dir.display());
                    }
                    Err(e) => {
                        ok = false;
                        eprintln!("seed {seed} failed: {e} ({})", seed_dir(&out, seed).display());
                    }
                }
            }
            Ok(ok)
        }
        Command::Sweep { exp, cell_threads } => {
            let (c, out, opts) = load_experiment(&exp)?;
            let r = run_sweep(&c, &out, &opts, cell_threads)?;
            for (i, cell) in r.cells.iter().enumerate() {
                let mark = if r.best == Some(i) { " *" } else { "" };
                println!("step size {:e}, beta {:e}: {:.4}{mark}", cell.step_size, cell.beta, cell.score);
            }
            Ok(r.best.is_some())
        }
        Command::Plot { curves, out, title, floor } => {
            let mut series = Vec::new();
            for spec in &curves {
                let (label, dir) = spec.split_once('=').ok_or_else(|| format!("expected label=dir, got {spec:?}"))?;
                let runs = seed_metrics(Path::new(dir))?.iter().map(|p| read_metrics(p)).collect::<Result<Vec<_>, _>>()?;
                series.push((label.to_owned(), aggregate(&runs)?));
            }
            write_file(&out, &render_curves(&series, &PlotStyle { title, y_floor: floor, ..PlotStyle::default() }))?;
            Ok(true)
        }
        Command::Analyze(cmd) => analyze_command(cmd),
        Command::CheckpointDump { path } => {
            print!("{}", Checkpoint::load(&path)?.dump());
            Ok(true)
        }
        Command::Selftest { configs } => {
            let checks = run_selftest(configs, &optit_core::Sequential);
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn analyze_command(cmd: AnalyzeCommand) -> Result<bool, BoxError> {
    match cmd {
        AnalyzeCommand::Grids { checkpoint, out, instance_seed } => {
            let g = analyze::checkpoint_grids(&Checkpoint::load(&checkpoint)?, instance_seed)?;
            write_file(&out, &render_option_grids(&g))?;
            print_json(&analyze::grids_json(&g))?;
        }
        AnalyzeCommand::Diversity { checkpoint, states, rollouts, horizon, bootstrap, seed, threads } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let dc = DiversityConfig { n_states: states, n_rollouts: rollouts, horizon, bootstrap };
            let r = if threads == 1 {
                analyze::diversity(&ck, &dc, seed, &optit_core::Sequential)?
            } else {
                let pool = PoolExecutor::new(threads)?;
                analyze::diversity(&ck, &dc, seed, &pool)?
            };
            print_json(&analyze::diversity_json(&r))?;
        }
        AnalyzeCommand::CeDemo { k, width, depth } => print_json(&analyze::ce_demo_json(k, width, depth))?,
        AnalyzeCommand::Bellman { width, instances, discount, seed } => {
            let rows = analyze::bellman_report(width, instances, discount, seed)?;
            print_json(&serde_json::to_value(&rows)?)?;
            return Ok(rows.iter().all(|r| !r.optimal_enters_wall));
        }
        AnalyzeCommand::Segment { trajectories, options, actions, window, hidden_layers, hidden_units, updates, batch, step_size, seed } => {
            let recs = read_trajectories(std::io::BufReader::new(std::fs::File::open(&trajectories)?))?;
            let c = SegmentConfig { num_options: options, num_actions: actions, window, hidden_layers, hidden_units, updates, batch, step_size, seed };
            print_json(&serde_json::to_value(analyze::fit_segmentation(&recs, &c)?)?)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
