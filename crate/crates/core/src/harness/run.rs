use rayon::prelude::*;

use crate::analysis::{emcb, gamma_from_snr_db, mse_formula, EmcbResult};
use crate::channel::{draw_channel, propagate, ReceivedFrame};
use crate::error::{CfoError, Result};
use crate::estimator::{estimate_ml_grid, estimate_simplified, stack, CfoEstimate, EstimatorParams};
use crate::numerics::RandomSource;
use crate::training::{SystemConfig, TrainingKind, TrainingSet};

use super::spec::{EpsilonMode, EstimatorId, ExperimentSpec};
use super::ResultRow;

const PURPOSE_CHANNEL: u64 = 0;
const PURPOSE_TRAINING: u64 = 1;
const PURPOSE_NOISE: u64 = 2;

/// Stream id for one trial and purpose. The low 16 bits carry the SNR index
/// for noise streams.
pub fn trial_stream(trial: usize, purpose: u64, snr_index: usize) -> u64 {
    ((trial as u64) << 20) | (purpose << 16) | snr_index as u64
}

/// Squared CFO error modulo the identifiable range `Q`.
pub fn wrapped_sq_error(estimate: f64, truth: f64, q: usize) -> f64 {
    let qf = q as f64;
    let d = (estimate - truth + qf / 2.0).rem_euclid(qf) - qf / 2.0;
    d * d
}

/// Single estimator invocation on a noiseless-plus-noise frame.
pub fn run_estimator(
    id: EstimatorId,
    frame: &ReceivedFrame,
    spec: &ExperimentSpec,
) -> Result<CfoEstimate> {
    let sf = stack(frame, &spec.config)?;
    match id {
        EstimatorId::Simplified { iota } | EstimatorId::SimplifiedRs { iota } => {
            estimate_simplified(&sf, &EstimatorParams { iota, grid: spec.grid }, &spec.config)
        }
        EstimatorId::MlGrid => estimate_ml_grid(&sf, &spec.config, spec.grid),
    }
}

struct Trial {
    epsilon: f64,
    frames: Vec<(TrainingKind, ReceivedFrame)>,
}

fn kinds(spec: &ExperimentSpec) -> Vec<TrainingKind> {
    let mut out = Vec::new();
    for k in [TrainingKind::Cbts, TrainingKind::Random] {
        if spec.estimators.iter().any(|e| e.training() == k) {
            out.push(k);
        }
    }
    out
}

fn noiseless_trial(spec: &ExperimentSpec, cbts: &TrainingSet, trial: usize, kinds: &[TrainingKind]) -> Result<Trial> {
    let cfg = &spec.config;
    let mut rng = RandomSource::new(spec.seed, trial_stream(trial, PURPOSE_CHANNEL, 0));
    let half = cfg.q() as f64 / 2.0;
    let epsilon = match spec.epsilon_mode {
        EpsilonMode::Fixed(e) => e,
        EpsilonMode::UniformRandom => rng.uniform_open(-half, half),
    };
    let h = draw_channel(&spec.profile, cfg, &mut rng)?;
    let frames = kinds
        .iter()
        .map(|&kind| {
            let frame = match kind {
                TrainingKind::Cbts => propagate(cbts, &h, epsilon, cfg)?,
                TrainingKind::Random => {
                    let mut trng = RandomSource::new(spec.seed, trial_stream(trial, PURPOSE_TRAINING, 0));
                    propagate(&TrainingSet::random(cfg, &mut trng)?, &h, epsilon, cfg)?
                }
            };
            Ok((kind, frame))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trial { epsilon, frames })
}

/// Per-trial outcome: for every (estimator, SNR) pair, `Some(sq_error)` or `None` when degenerate.
type TrialOutcome = Vec<Vec<Option<f64>>>;

fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CfoError::Config(format!("thread pool: {e}")))
}

/// Thread cap from `CFOLAB_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("CFOLAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CfoError::Config(format!("CFOLAB_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Noise variance per (training kind, SNR point): the batch's mean noiseless
/// received power divided by the linear SNR.
fn calibrate(spec: &ExperimentSpec, cbts: &TrainingSet, kinds: &[TrainingKind]) -> Result<Vec<Vec<f64>>> {
    let powers = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            noiseless_trial(spec, cbts, t, kinds)
                .map(|tr| tr.frames.iter().map(|(_, f)| f.signal_power).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..kinds.len())
        .map(|k| {
            let mean = powers.iter().map(|p| p[k]).sum::<f64>() / spec.trials as f64;
            spec.snr_points_db
                .iter()
                .map(|db| if spec.noiseless { 0.0 } else { mean / 10f64.powf(db / 10.0) })
                .collect()
        })
        .collect())
}

fn run_trial(
    spec: &ExperimentSpec,
    cbts: &TrainingSet,
    kinds: &[TrainingKind],
    variances: &[Vec<f64>],
    t: usize,
) -> Result<TrialOutcome> {
    let trial = noiseless_trial(spec, cbts, t, kinds)?;
    let q = spec.config.q();
    let mut out = vec![vec![None; spec.snr_points_db.len()]; spec.estimators.len()];
    for s in 0..spec.snr_points_db.len() {
        for (k, (kind, clean)) in trial.frames.iter().enumerate() {
            // Every training kind sees the same noise realization.
            let mut rng = RandomSource::new(spec.seed, trial_stream(t, PURPOSE_NOISE, s));
            let mut frame = clean.clone();
            frame.add_noise(variances[k][s], &mut rng);
            for (e, id) in spec.estimators.iter().enumerate() {
                if id.training() != *kind {
                    continue;
                }
                out[e][s] = match run_estimator(*id, &frame, spec) {
                    Ok(est) => Some(wrapped_sq_error(est.epsilon_hat, trial.epsilon, q)),
                    Err(CfoError::DegenerateCorrelation { .. }) => None,
                    Err(err) => return Err(err),
                };
            }
        }
    }
    Ok(out)
}

fn analytic(id: EstimatorId, snr_db: f64, cfg: &SystemConfig) -> Option<f64> {
    match id {
        EstimatorId::Simplified { iota } => mse_formula(gamma_from_snr_db(snr_db, cfg), iota, cfg).ok(),
        _ => None,
    }
}

/// Monte-Carlo MSE for every estimator at every SNR point.
///
/// Results are reduced in trial order, so the output does not depend on the
/// number of worker threads.
pub fn run_mse_vs_snr(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let cbts = TrainingSet::cbts(&spec.config)?;
    let kinds = kinds(spec);
    pool()?.install(|| {
        let variances = calibrate(spec, &cbts, &kinds)?;
        let outcomes = (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, &cbts, &kinds, &variances, t))
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for (e, id) in spec.estimators.iter().enumerate() {
            for (s, &snr_db) in spec.snr_points_db.iter().enumerate() {
                let (mut sum, mut used, mut degenerate) = (0.0, 0usize, 0usize);
                for o in &outcomes {
                    match o[e][s] {
                        Some(v) => {
                            sum += v;
                            used += 1;
                        }
                        None => degenerate += 1,
                    }
                }
                rows.push(ResultRow {
                    estimator: id.name().to_string(),
                    snr_db,
                    iota: id.iota(),
                    trials: used,
                    empirical_mse: (used > 0).then(|| sum / used as f64),
                    analytic_mse: analytic(*id, snr_db, &spec.config),
                    emcb: None,
                    mean_runtime_us: None,
                    degenerate_count: degenerate,
                });
            }
        }
        Ok(rows)
    })
}

/// Sweeps the simplified estimator over ι (every `1..Q-1` unless the spec lists some).
pub fn run_mse_vs_iota(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let iotas = spec.iotas.clone().unwrap_or_else(|| (1..spec.config.q()).collect());
    let sweep = ExperimentSpec {
        estimators: iotas.into_iter().map(|iota| EstimatorId::Simplified { iota }).collect(),
        ..spec.clone()
    };
    run_mse_vs_snr(&sweep)
}

/// Channel-averaged bound for the spec's Chu-based training, one row per SNR.
pub fn run_emcb(spec: &ExperimentSpec) -> Result<(EmcbResult, Vec<ResultRow>)> {
    spec.validate()?;
    let ts = TrainingSet::cbts(&spec.config)?;
    let res = pool()?.install(|| {
        emcb(&spec.config, &spec.profile, &ts, &spec.snr_points_db, spec.emcb_draws, spec.seed)
    })?;
    let rows = res
        .snr_db
        .iter()
        .zip(&res.bound)
        .map(|(&snr_db, &b)| ResultRow {
            estimator: "emcb".into(),
            snr_db,
            iota: None,
            trials: res.n_channel_draws,
            empirical_mse: None,
            analytic_mse: None,
            emcb: Some(b),
            mean_runtime_us: None,
            degenerate_count: 0,
        })
        .collect();
    Ok((res, rows))
}

/// MSE rows with the EMCB column filled on every row at matching SNR, followed by the bound rows.
pub fn run_with_bound(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let mut rows = run_mse_vs_snr(spec)?;
    if spec.emcb_draws == 0 {
        return Ok(rows);
    }
    let (res, bound_rows) = run_emcb(spec)?;
    for row in rows.iter_mut() {
        row.emcb = res
            .snr_db
            .iter()
            .position(|&s| s == row.snr_db)
            .map(|i| res.bound[i]);
    }
    rows.extend(bound_rows);
    Ok(rows)
}
