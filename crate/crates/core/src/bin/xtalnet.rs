use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use xtalnet::pipeline::{self, ExperimentConfig, Overrides, ResolvedConfig, Source};
use xtalnet::Error;

#[derive(Parser)]
#[command(name = "xtalnet", version, about = "Polycrystal CP-FE data generation and DeepONet surrogates")]
struct Cli {
    /// Experiment config: a JSON file or a preset name.
    #[arg(long, global = true, default_value = "al-tension-1pct")]
    config: String,
    /// Top-level seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulation worker threads; overrides the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate seeded Voronoi microstructures.
    GenMicro {
        #[arg(long)]
        grid: Option<usize>,
        /// Grain count, or an inclusive range such as 8-15.
        #[arg(long)]
        grains: Option<String>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run CP-FE on a .pmic file or directory.
    RunCp {
        #[arg(long)]
        micro: PathBuf,
        #[arg(long)]
        material: Option<PathBuf>,
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Simulate the 36 single-crystal basis curves.
    GenBasis {
        #[arg(long)]
        material: Option<PathBuf>,
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Train a surrogate on a dataset and basis.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        basis: PathBuf,
    },
    /// Fine-tune trained SC weights on a new dataset.
    Finetune {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        basis: PathBuf,
        /// Number of new curves used for fine-tuning; defaults to the config.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Predict curves for microstructures.
    Predict {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        micro: PathBuf,
        /// Allow a basis for another material or load than the weights.
        #[arg(long)]
        zero_shot: bool,
    },
    /// Score weights against a dataset.
    Evaluate {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        zero_shot: bool,
    },
    /// Run a preset scenario end to end.
    Repro {
        scenario: String,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        finetune_epochs: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn config_arg(cli: &Cli) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let p = Path::new(&cli.config);
    if p.is_file() {
        let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((ExperimentConfig::from_file(p)?, base))
    } else {
        Ok((pipeline::preset(&cli.config)?, PathBuf::from(".")))
    }
}

fn parse_grains(s: &str) -> Result<[usize; 2], Error> {
    let bad = || Error::Argument(format!("--grains {s:?} is not N or LO-HI"));
    match s.split_once('-') {
        Some((a, b)) => Ok([a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?]),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            Ok([n, n])
        }
    }
}

fn out_dir(cli: &Cli) -> anyhow::Result<PathBuf> {
    cli.out.clone().context("--out is required")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (mut cfg, base) = config_arg(&cli)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    let set_inputs = |cfg: &mut ExperimentConfig, material: &Option<PathBuf>, load: &Option<PathBuf>| {
        if let Some(m) = material {
            cfg.material = Source::File(m.clone());
        }
        if let Some(l) = load {
            cfg.load = Source::File(l.clone());
        }
    };
    let resolve = |cfg: &ExperimentConfig| -> anyhow::Result<ResolvedConfig> {
        let cwd = std::env::current_dir()?;
        Ok(cfg.resolve(&cwd.join(&base))?)
    };
    match &cli.cmd {
        Cmd::GenMicro { grid, grains, count, out_dir: dir } => {
            if let Some(g) = grid {
                cfg.micro.grid = *g;
            }
            if let Some(g) = grains {
                cfg.micro.grains = parse_grains(g)?;
            }
            if let Some(c) = count {
                cfg.micro.count = *c;
            }
            let out = dir.clone().or(cli.out.clone()).context("--out-dir or --out is required")?;
            pipeline::gen_micro(&resolve(&cfg)?, &out)?;
        }
        Cmd::RunCp { micro, material, load } => {
            set_inputs(&mut cfg, material, load);
            pipeline::run_cp(&resolve(&cfg)?, micro, &out_dir(&cli)?)?;
        }
        Cmd::GenBasis { material, load } => {
            set_inputs(&mut cfg, material, load);
            pipeline::gen_basis(&resolve(&cfg)?, &out_dir(&cli)?)?;
        }
        Cmd::Train { dataset, basis } => {
            pipeline::train_cmd(&resolve(&cfg)?, dataset, basis, &out_dir(&cli)?)?;
        }
        Cmd::Finetune { weights, dataset, basis, samples } => {
            let r = resolve(&cfg)?;
            let n = samples.unwrap_or(r.finetune_samples);
            pipeline::finetune_cmd(&r, weights, dataset, basis, n, &out_dir(&cli)?)?;
        }
        Cmd::Predict { weights, basis, micro, zero_shot } => {
            pipeline::predict_cmd(weights, basis, micro, &out_dir(&cli)?, *zero_shot)?;
        }
        Cmd::Evaluate { weights, dataset, basis, zero_shot } => {
            let r = pipeline::evaluate_cmd(weights, dataset, basis, &out_dir(&cli)?, *zero_shot)?;
            println!("{}", serde_json::to_string_pretty(&r.metrics)?);
        }
        Cmd::Repro { scenario, count, epochs, finetune_epochs, samples } => {
            let o = Overrides {
                seed: cli.seed,
                workers: cli.workers,
                count: *count,
                epochs: *epochs,
                finetune_epochs: *finetune_epochs,
                finetune_samples: *samples,
            };
            let s = pipeline::repro(scenario, &o, &out_dir(&cli)?)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map_or(2, pipeline::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
