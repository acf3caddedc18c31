use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ltp_ddpc::bench::{
    build_msd_plant, collect_benchmark_data, median, run_experiment, warm_start, Arm, ExperimentConfig,
    ExperimentResult,
};
use ltp_ddpc::plant::{InputLaw, NoiseModel, Plant};
use ltp_ddpc::Result;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Spring-damper benchmark for periodic data-driven predictive control.
#[derive(Parser)]
#[command(name = "ltp-ddpc", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON); defaults to the built-in benchmark.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; defaults to the first configured seed (all seeds for `compare`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Disable process and measurement noise.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the default configuration.
    DefaultConfig,
    /// Drive the plant with random inputs and record the trajectory.
    Simulate {
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        input_variance: f64,
    },
    /// Collect the offline record and build the data matrices.
    Collect,
    /// Warm up the plant and estimate the data-set index.
    IndexTest,
    /// Run one controller in closed loop.
    Control {
        #[arg(long)]
        mode: Arm,
        /// Record wall-clock solve times (logs are then not reproducible byte for byte).
        #[arg(long)]
        timing: bool,
    },
    /// Run several controllers over one or all seeds.
    Compare {
        /// Include the unregularized P-DeePC and P-SPC arms.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        timing: bool,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let cfg = match &common.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    Ok(if common.deterministic { cfg.deterministic() } else { cfg })
}

fn report_arms(res: &ExperimentResult, cfg: &ExperimentConfig) {
    println!(
        "seed {}: index estimate {} (proper {})",
        res.seed, res.index_test.theta_hat, res.proper_index
    );
    for a in &res.arms {
        let status = a.log.abort.as_deref().unwrap_or("ok");
        println!("  {:<11} steady-state cost {:>12.4}  {}", a.arm.as_str(), a.steady_cost(cfg), status);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    let seed = cli.common.seed.unwrap_or(cfg.seeds[0]);
    let out = &cli.common.out;
    fs::create_dir_all(out)?;
    match cli.cmd {
        Cmd::DefaultConfig => {
            let path = out.join("config.json");
            fs::write(&path, cfg.to_json()? + "\n")?;
            println!("wrote {}", path.display());
        }
        Cmd::Simulate { steps, input_variance } => {
            let sys = build_msd_plant(&cfg.params, cfg.dt, cfg.period)?;
            fs::write(out.join("system.json"), sys.to_json()?)?;
            let mut plant = Plant::new(sys.clone(), 0, DVector::zeros(sys.n()))?;
            if cfg.noise_variance > 0.0 {
                plant = plant.with_noise(NoiseModel::isotropic(cfg.noise_variance), seed);
            }
            let law = InputLaw::Gaussian { variance: input_variance };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..steps {
                plant.step(&law.sample(&mut rng, sys.m()))?;
            }
            plant.history().write_csv(BufWriter::new(File::create(out.join("trajectory.csv"))?))?;
            println!("simulated {steps} steps into {}", out.display());
        }
        Cmd::Collect => {
            let sys = build_msd_plant(&cfg.params, cfg.dt, cfg.period)?;
            let data = collect_benchmark_data(&cfg, &sys, seed)?;
            data.write_json(BufWriter::new(File::create(out.join("data.json"))?))?;
            println!(
                "{} offline samples, {} data sets of {} columns written to {}",
                cfg.offline_length(),
                data.period(),
                data.h(),
                out.join("data.json").display()
            );
        }
        Cmd::IndexTest => {
            let sys = build_msd_plant(&cfg.params, cfg.dt, cfg.period)?;
            let data = collect_benchmark_data(&cfg, &sys, seed)?;
            let (_, outcome) = warm_start(&cfg, &sys, &data, seed)?;
            outcome.write_history_csv(BufWriter::new(File::create(out.join("index_test.csv"))?))?;
            let proper = data.proper_index(outcome.end_time).expect("collected data keeps its start");
            println!(
                "t = {}: estimate {} proper {} accumulated {:?}",
                outcome.end_time, outcome.theta_hat, proper, outcome.final_deltas
            );
        }
        Cmd::Control { mode, timing } => {
            let res = run_experiment(&cfg, &[mode], seed)?;
            res.write_outputs(&cfg, out, timing)?;
            report_arms(&res, &cfg);
        }
        Cmd::Compare { all, timing } => {
            let arms: Vec<Arm> = if all { Arm::ALL.to_vec() } else { Arm::COMPARISON.to_vec() };
            let seeds = cli.common.seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
            let results: Vec<ExperimentResult> = seeds
                .par_iter()
                .map(|&s| run_experiment(&cfg, &arms, s))
                .collect::<Result<_>>()?;
            for res in &results {
                let dir = out.join(format!("seed_{}", res.seed));
                res.write_outputs(&cfg, &dir, timing)?;
                report_arms(res, &cfg);
            }
            write_aggregate(&results, &arms, &cfg, out)?;
        }
    }
    Ok(())
}

fn write_aggregate(results: &[ExperimentResult], arms: &[Arm], cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let correct = results.iter().filter(|r| r.index_test_correct()).count();
    println!("index test correct on {correct}/{} seeds", results.len());
    let mut wr = csv::Writer::from_path(out.join("steady_state.csv"))?;
    let mut header = vec!["seed".to_string(), "index_correct".to_string()];
    header.extend(arms.iter().map(|a| a.as_str().to_string()));
    wr.write_record(&header)?;
    for r in results {
        let mut row = vec![r.seed.to_string(), r.index_test_correct().to_string()];
        row.extend(arms.iter().map(|&a| r.arm(a).map_or(f64::NAN, |x| x.steady_cost(cfg)).to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    for &a in arms {
        let m = median(results.iter().filter_map(|r| r.arm(a)).map(|x| x.steady_cost(cfg)).collect());
        println!("median over seeds {:<11} {m:.4}", a.as_str());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
