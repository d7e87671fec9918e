use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use expert_skip::baselines::{calibrate_beta, reduced_k_policy};
use expert_skip::calibration::calibrate_alpha;
use expert_skip::data::CalibrationSet;
use expert_skip::dmt::{DmtObjective, SkipProfile, ThresholdPair};
use expert_skip::engine::{flop_count, SkipPolicy, SyntheticMoeModel};
use expert_skip::frontier::{frontier_search, make_grid, naive_search, GridObjective};
use expert_skip::io::{self as eio, BetaFile, ExperimentConfig, FactorsFile, PolicyConfig};
use expert_skip::report::{self, Agreement, RHO_PRESETS};

#[derive(Parser)]
#[command(name = "expert-skip", version, about = "Modality-aware expert skipping for mixture-of-experts models")]
struct Cli {
    /// Worker threads for evaluation; defaults to the available parallelism.
    #[arg(long, global = true, env = "EXPERT_SKIP_THREADS")]
    threads: Option<usize>,

    /// Override the seed stored in the config file.
    #[arg(long, global = true, env = "EXPERT_SKIP_SEED")]
    seed: Option<u64>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the default experiment config.
    InitConfig {
        #[arg(short, long, default_value = "config.toml")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Build the synthetic model described by the config.
    GenModel {
        #[arg(short, long, default_value = "config.toml")]
        config: PathBuf,
        #[arg(short, long, default_value = "model.bin")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Generate the calibration sequences described by the config.
    GenData {
        #[arg(short, long, default_value = "config.toml")]
        config: PathBuf,
        #[arg(short, long, default_value = "data.csv")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Estimate per-layer global factors.
    Calibrate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(short, long, default_value = "factors.toml")]
        out: PathBuf,
    },
    /// Fit per-layer tail-mass fractions for the mass-rule baseline.
    CalibrateBeta {
        #[command(flatten)]
        inputs: Inputs,
        /// Target skipped fraction; defaults to the config value.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(short, long, default_value = "beta.toml")]
        out: PathBuf,
    },
    /// Search the threshold grid for the cheapest pair meeting the target.
    Search {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        factors: FactorsArg,
        #[arg(long)]
        rho: Option<f64>,
        /// Grid points per axis.
        #[arg(short = 'D', long = "grid-points", alias = "D")]
        grid_points: Option<usize>,
        /// Also run the exhaustive search and write an agreement report.
        #[arg(long)]
        naive: bool,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Measure f, g and FLOP savings for one policy.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        factors: FactorsArg,
        #[arg(long, requires = "tau_vision")]
        tau_text: Option<f64>,
        #[arg(long, requires = "tau_text")]
        tau_vision: Option<f64>,
        /// Evaluate truncated top-k with this many kept experts instead.
        #[arg(long, conflicts_with_all = ["tau_text", "beta"])]
        k_prime: Option<usize>,
        /// Evaluate the mass rule with this schedule instead.
        #[arg(long, conflicts_with = "tau_text")]
        beta: Option<PathBuf>,
        /// Per-layer, per-modality skip ratios.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Run DMT and both baselines across several targets.
    Sweep {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        factors: FactorsArg,
        #[arg(long, value_delimiter = ',', default_values_t = RHO_PRESETS.to_vec())]
        rho: Vec<f64>,
        #[arg(short = 'D', long = "grid-points", alias = "D")]
        grid_points: Option<usize>,
        #[arg(short, long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Compare frontier and exhaustive search cost.
    Bench {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        factors: FactorsArg,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(short = 'D', long = "grid-points", alias = "D")]
        grid_points: Option<usize>,
        #[arg(short, long, default_value = "bench.csv")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Inputs {
    #[arg(short, long, default_value = "config.toml")]
    config: PathBuf,
    #[arg(long, default_value = "model.bin")]
    model: PathBuf,
    #[arg(long, default_value = "data.csv")]
    data: PathBuf,
}

#[derive(Args)]
struct FactorsArg {
    #[arg(long = "factors", default_value = "factors.toml")]
    path: PathBuf,
}

struct Loaded {
    config: ExperimentConfig,
    model: SyntheticMoeModel,
    model_hash: String,
    data: CalibrationSet,
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = eio::load_config(path).with_context(|| format!("reading config {}", path.display()))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn load_inputs(inputs: &Inputs, seed: Option<u64>) -> Result<Loaded> {
    let config = load_config(&inputs.config, seed)?;
    let model = eio::load_model(&inputs.model).with_context(|| format!("reading model {}", inputs.model.display()))?;
    let data = eio::load_dataset(&inputs.data).with_context(|| format!("reading data {}", inputs.data.display()))?;
    let model_hash = eio::model_hash(&model);
    log::info!("model {model_hash}, {} calibration samples", data.len());
    Ok(Loaded { config, model, model_hash, data })
}

fn load_factors(arg: &FactorsArg, loaded: &Loaded) -> Result<FactorsFile> {
    let file = eio::load_factors(&arg.path).with_context(|| format!("reading factors {}", arg.path.display()))?;
    if file.model_hash != loaded.model_hash {
        bail!(
            "factors in {} were calibrated for model {}, but the model file hashes to {}; rerun calibrate",
            arg.path.display(),
            file.model_hash,
            loaded.model_hash
        );
    }
    Ok(file)
}

fn refuse_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("{} already exists; pass --force to overwrite", path.display());
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn grid_points(arg: Option<usize>, config: &ExperimentConfig) -> usize {
    arg.unwrap_or(config.grid_points)
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::InitConfig { out, force } => {
            refuse_overwrite(&out, force)?;
            let mut config = ExperimentConfig::default();
            if let Some(seed) = seed {
                config.seed = seed;
            }
            eio::save_config(&config, &out)?;
            println!("wrote {}", out.display());
        }
        Command::GenModel { config, out, force } => {
            let config = load_config(&config, seed)?;
            refuse_overwrite(&out, force)?;
            let model = SyntheticMoeModel::build(&config.model_spec()?)?;
            eio::save_model(&model, &out)?;
            println!("model {} sha256 {}", out.display(), eio::file_hash(&out)?);
        }
        Command::GenData { config, out, force } => {
            let config = load_config(&config, seed)?;
            refuse_overwrite(&out, force)?;
            let data = eio::generate_calibration_set(&config)?;
            eio::save_dataset(&data, &out)?;
            println!("data {} samples {} sha256 {}", out.display(), data.len(), eio::file_hash(&out)?);
        }
        Command::Calibrate { inputs, out } => {
            let loaded = load_inputs(&inputs, seed)?;
            let factors = calibrate_alpha(&loaded.model, &loaded.data)?;
            let file = FactorsFile {
                model_hash: loaded.model_hash,
                samples: loaded.data.len(),
                seed: loaded.config.seed,
                factors,
            };
            eio::save_factors(&file, &out)?;
            println!("layer  alpha         alpha_norm");
            for (l, (a, n)) in file.factors.alpha.iter().zip(&file.factors.alpha_norm).enumerate() {
                let bar = "#".repeat((n * 40.0).round() as usize);
                println!("{l:>5}  {a:<12.6e}  {n:.6}  {bar}");
            }
            println!("wrote {}", out.display());
        }
        Command::CalibrateBeta { inputs, rho, out } => {
            let loaded = load_inputs(&inputs, seed)?;
            let rho = rho.unwrap_or(loaded.config.rho);
            let schedule = calibrate_beta(&loaded.model, &loaded.data, rho)?;
            let file = BetaFile {
                model_hash: loaded.model_hash,
                samples: loaded.data.len(),
                seed: loaded.config.seed,
                rho,
                schedule,
            };
            eio::save_beta(&file, &out)?;
            let betas: Vec<String> = file.schedule.beta.iter().map(|b| format!("{b:.2}")).collect();
            println!("beta per layer: {}", betas.join(" "));
            println!("wrote {}", out.display());
        }
        Command::Search { inputs, factors, rho, grid_points: d, naive, out_dir } => {
            let loaded = load_inputs(&inputs, seed)?;
            let factors = load_factors(&factors, &loaded)?;
            let rho = rho.unwrap_or(loaded.config.rho);
            let grid = make_grid(grid_points(d, &loaded.config))?;
            let objective = DmtObjective::new(&loaded.model, &factors.factors, &loaded.data)?;
            let result = frontier_search(GridObjective::new(&objective, &grid), rho)?;

            let mut w = create(&out_dir.join("frontier.csv"))?;
            report::write_frontier_csv(&result, &grid, &mut w)?;
            finish(w)?;
            let mut w = create(&out_dir.join("summary.csv"))?;
            report::write_frontier_summary(&result, &grid, loaded.data.len(), &mut w)?;
            finish(w)?;
            report::write_frontier_summary(&result, &grid, loaded.data.len(), std::io::stdout().lock())?;
            if !result.violations.is_empty() {
                log::warn!(
                    "search invariants broken {} times; g is not monotone on this grid",
                    result.violations.len()
                );
            }

            if naive {
                let naive = naive_search(GridObjective::new(&objective, &grid), rho)?;
                let agreement = Agreement { naive, frontier: result };
                let mut w = create(&out_dir.join("agreement.csv"))?;
                agreement.write_csv(&mut w)?;
                finish(w)?;
                println!("naive agrees: {}, f-call ratio {:.2}", agreement.agrees(), agreement.f_call_ratio());
            }
        }
        Command::Evaluate { inputs, factors, tau_text, tau_vision, k_prime, beta, profile } => {
            let loaded = load_inputs(&inputs, seed)?;
            let factors = load_factors(&factors, &loaded)?;
            let objective = DmtObjective::new(&loaded.model, &factors.factors, &loaded.data)?;
            let schedule;
            let (label, policy) = match (tau_text.zip(tau_vision), k_prime, &beta, loaded.config.policy) {
                (Some((t, v)), _, _, _) | (None, None, None, PolicyConfig::Dmt { tau_text: t, tau_vision: v }) => {
                    let tau = ThresholdPair::new(t, v)?;
                    (
                        format!("dmt tau_text={t} tau_vision={v}"),
                        SkipPolicy::Dmt { thresholds: tau, factors: &factors.factors },
                    )
                }
                (None, Some(kp), _, _) | (None, None, None, PolicyConfig::ReducedK { k_prime: kp }) => {
                    (format!("reduced_k k'={kp}"), reduced_k_policy(&loaded.model, kp)?)
                }
                (None, None, Some(path), _) => {
                    schedule = eio::load_beta(path).with_context(|| format!("reading {}", path.display()))?.schedule;
                    ("mass_rule".to_string(), SkipPolicy::MassRule(&schedule))
                }
                (None, None, None, PolicyConfig::MassRule) => bail!("the mass_rule policy needs --beta <file>"),
                (None, None, None, PolicyConfig::None) => ("none".to_string(), SkipPolicy::None),
            };
            let eval = objective.evaluate_policy(&policy)?;
            let flops = flop_count(loaded.model.spec(), &eval.stats);
            println!("policy {label}");
            println!("f {}", eval.value.f);
            println!("g {}", eval.value.g);
            println!(
                "expert FLOPs saved {} of {} ({:.2}%)",
                flops.expert_savings(),
                flops.expert_baseline,
                100.0 * flops.expert_savings() as f64 / flops.expert_baseline.max(1) as f64
            );
            println!(
                "total FLOPs {} of {} ({:.2}% saved)",
                flops.skipped_total(),
                flops.baseline_total(),
                100.0 * flops.savings_fraction()
            );
            let prof = SkipProfile::from_stats(&eval.stats);
            match profile {
                Some(path) => {
                    let mut w = create(&path)?;
                    prof.write_csv(&mut w)?;
                    finish(w)?;
                    println!("wrote {}", path.display());
                }
                None => prof.write_csv(std::io::stdout().lock())?,
            }
        }
        Command::Sweep { inputs, factors, rho, grid_points: d, out } => {
            let loaded = load_inputs(&inputs, seed)?;
            let factors = load_factors(&factors, &loaded)?;
            let grid = make_grid(grid_points(d, &loaded.config))?;
            let objective = DmtObjective::new(&loaded.model, &factors.factors, &loaded.data)?;
            let sweep = report::run_sweep(&objective, &grid, &rho)?;
            let mut w = create(&out)?;
            sweep.write_csv(&mut w)?;
            finish(w)?;
            sweep.write_csv(std::io::stdout().lock())?;
        }
        Command::Bench { inputs, factors, rho, grid_points: d, out } => {
            let loaded = load_inputs(&inputs, seed)?;
            let factors = load_factors(&factors, &loaded)?;
            let rho = rho.unwrap_or(loaded.config.rho);
            let grid = make_grid(grid_points(d, &loaded.config))?;
            let objective = DmtObjective::new(&loaded.model, &factors.factors, &loaded.data)?;
            let bench = report::run_bench(&objective, &grid, rho)?;
            let mut w = create(&out)?;
            bench.write_csv(&mut w)?;
            finish(w)?;
            let a = &bench.agreement;
            println!("D {} N {} rho {rho}", bench.grid_size, bench.samples);
            println!(
                "f evaluations: frontier {} naive {} (ratio {:.2})",
                a.frontier.counters.f_calls,
                a.naive.counters.f_calls,
                a.f_call_ratio()
            );
            println!(
                "wall time: frontier {:.3}s naive {:.3}s (ratio {:.1})",
                bench.frontier_seconds,
                bench.naive_seconds,
                bench.wall_ratio()
            );
            println!("optima agree: {}", a.agrees());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
