use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cfolab_core::channel::{draw_channel, transmit_receive};
use cfolab_core::harness::{
    run_bench, run_emcb, run_estimator, run_mse_vs_iota, run_with_bound, write_csv, EpsilonMode, EstimatorId,
    ExperimentSpec, Preset, ResultRow,
};
use cfolab_core::{CfoError, RandomSource, Result, TrainingKind, TrainingSet};

#[derive(Parser)]
#[command(name = "cfolab", about = "MIMO-OFDM carrier frequency offset estimation lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment file (may name a preset and override fields)
    #[arg(long)]
    config: Option<PathBuf>,
    /// paper-fig1, paper-fig2 or paper-fig3
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated SNR points in dB
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    /// Comma-separated estimators, e.g. simplified:7,ml_grid
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cbts,
    Rs,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one frame and print the estimate
    Estimate {
        #[command(flatten)]
        common: Common,
        /// True CFO; drawn uniformly when omitted
        #[arg(long, allow_hyphen_values = true)]
        epsilon: Option<f64>,
    },
    /// Empirical MSE over an SNR grid, with analytic and bound columns
    MseVsSnr {
        #[command(flatten)]
        common: Common,
        /// Skip the bound computation
        #[arg(long)]
        no_emcb: bool,
    },
    /// Empirical and analytic MSE of the simplified estimator over iota
    MseVsIota {
        #[command(flatten)]
        common: Common,
        /// Comma-separated iota values; every 1..Q-1 when omitted
        #[arg(long, value_delimiter = ',')]
        iotas: Option<Vec<usize>>,
    },
    /// Channel-averaged Cramer-Rao bound
    Emcb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Median runtime of the simplified estimator against the grid search
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Write the training pilots as CSV
    GenTraining {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "cbts")]
        kind: Kind,
    },
}

fn load(common: &Common, default: Preset) -> Result<ExperimentSpec> {
    let mut spec = match (&common.config, &common.preset) {
        (Some(path), None) => ExperimentSpec::from_file(path)?,
        (None, Some(name)) => ExperimentSpec::preset(name.parse()?),
        (None, None) => ExperimentSpec::preset(default),
        (Some(_), Some(_)) => {
            return Err(CfoError::Config(
                "use either --config or --preset (a config file may name its own preset)".into(),
            ))
        }
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(trials) = common.trials {
        spec.trials = trials;
    }
    if let Some(snr) = &common.snr {
        spec.snr_points_db = snr.clone();
    }
    if let Some(ids) = &common.estimators {
        spec.estimators = ids.iter().map(|s| s.parse()).collect::<Result<Vec<EstimatorId>>>()?;
    }
    spec.validate()?;
    Ok(spec)
}

fn output(common: &Common) -> Result<Box<dyn Write>> {
    Ok(match &common.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(common: &Common, rows: &[ResultRow]) -> Result<()> {
    let mut out = output(common)?;
    write_csv(rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate { common, epsilon } => {
            let mut spec = load(&common, Preset::Fig3)?;
            if let Some(e) = epsilon {
                spec.epsilon_mode = EpsilonMode::Fixed(e);
                spec.validate()?;
            }
            let cfg = &spec.config;
            let mut rng = RandomSource::new(spec.seed, 0);
            let half = cfg.q() as f64 / 2.0;
            let eps = match spec.epsilon_mode {
                EpsilonMode::Fixed(e) => e,
                EpsilonMode::UniformRandom => rng.uniform_open(-half, half),
            };
            let snr_db = spec.snr_points_db.first().copied().unwrap_or(20.0);
            let mut out = output(&common)?;
            writeln!(out, "estimator,true_epsilon,epsilon_hat,snr_db")?;
            for id in &spec.estimators {
                let ts = match id.training() {
                    TrainingKind::Cbts => TrainingSet::cbts(cfg)?,
                    TrainingKind::Random => TrainingSet::random(cfg, &mut rng)?,
                };
                let h = draw_channel(&spec.profile, cfg, &mut rng)?;
                let clean = transmit_receive(&ts, &h, eps, 0.0, cfg, &mut rng)?;
                let var = if spec.noiseless { 0.0 } else { clean.signal_power / 10f64.powf(snr_db / 10.0) };
                let frame = transmit_receive(&ts, &h, eps, var, cfg, &mut rng)?;
                let est = run_estimator(*id, &frame, &spec)?;
                writeln!(out, "{id},{eps},{},{snr_db}", est.epsilon_hat)?;
            }
            out.flush()?;
        }
        Command::MseVsSnr { common, no_emcb } => {
            let mut spec = load(&common, Preset::Fig3)?;
            if no_emcb {
                spec.emcb_draws = 0;
            }
            emit(&common, &run_with_bound(&spec)?)?;
        }
        Command::MseVsIota { common, iotas } => {
            let mut spec = load(&common, Preset::Fig1)?;
            if iotas.is_some() {
                spec.iotas = iotas;
                spec.validate()?;
            }
            emit(&common, &run_mse_vs_iota(&spec)?)?;
        }
        Command::Emcb { common, draws } => {
            let mut spec = load(&common, Preset::Fig3)?;
            if let Some(d) = draws {
                spec.emcb_draws = d;
            }
            emit(&common, &run_emcb(&spec)?.1)?;
        }
        Command::Bench { common, repetitions } => {
            let mut spec = load(&common, Preset::Fig3)?;
            if let Some(r) = repetitions {
                spec.bench_repetitions = r;
            }
            let report = run_bench(&spec)?;
            eprintln!(
                "simplified (iota={}): {:.1} us, ml_grid: {:.1} us, speedup {:.1}x over {} frames",
                report.iota,
                report.simplified_median_us,
                report.ml_grid_median_us,
                report.speedup,
                report.repetitions
            );
            emit(&common, &report.rows())?;
        }
        Command::GenTraining { common, kind } => {
            let spec = load(&common, Preset::Fig3)?;
            let ts = match kind {
                Kind::Cbts => TrainingSet::cbts(&spec.config)?,
                Kind::Rs => TrainingSet::random(&spec.config, &mut RandomSource::new(spec.seed, 0))?,
            };
            let mut out = output(&common)?;
            ts.write_csv(&mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CfoError::Config(_)) | Err(e @ CfoError::Json(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
