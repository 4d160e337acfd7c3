use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{draw_channel, transmit_receive};
use crate::error::{CfoError, Result};
use crate::numerics::RandomSource;
use crate::training::TrainingSet;

use super::run::run_estimator;
use super::spec::{EstimatorId, ExperimentSpec};
use super::ResultRow;

/// Median wall-clock cost of one estimate, stacking included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub iota: usize,
    pub snr_db: f64,
    pub repetitions: usize,
    pub simplified_median_us: f64,
    pub ml_grid_median_us: f64,
    /// `ml_grid_median_us / simplified_median_us`.
    pub speedup: f64,
}

impl BenchReport {
    pub fn rows(&self) -> Vec<ResultRow> {
        let row = |name: &str, iota, t| ResultRow {
            estimator: name.into(),
            snr_db: self.snr_db,
            iota,
            trials: self.repetitions,
            empirical_mse: None,
            analytic_mse: None,
            emcb: None,
            mean_runtime_us: Some(t),
            degenerate_count: 0,
        };
        vec![
            row("simplified", Some(self.iota), self.simplified_median_us),
            row("ml_grid", None, self.ml_grid_median_us),
        ]
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times the simplified estimator (first simplified ι in the spec, else 7)
/// against the grid search on identical frames at the spec's first SNR point.
pub fn run_bench(spec: &ExperimentSpec) -> Result<BenchReport> {
    spec.validate()?;
    let reps = spec.bench_repetitions;
    if reps == 0 {
        return Err(CfoError::Config("bench_repetitions must be at least 1".into()));
    }
    let cfg = &spec.config;
    let iota = spec
        .estimators
        .iter()
        .find_map(|e| match e {
            EstimatorId::Simplified { iota } => Some(*iota),
            _ => None,
        })
        .unwrap_or(7.min(cfg.q() - 1));
    let snr_db = spec.snr_points_db.first().copied().unwrap_or(20.0);
    let ts = TrainingSet::cbts(cfg)?;
    let mut rng = RandomSource::new(spec.seed, u64::MAX);
    let frames = (0..reps)
        .map(|_| {
            let h = draw_channel(&spec.profile, cfg, &mut rng)?;
            let half = cfg.q() as f64 / 2.0;
            let eps = rng.uniform_open(-half, half);
            let clean = transmit_receive(&ts, &h, eps, 0.0, cfg, &mut rng)?;
            let var = clean.signal_power / 10f64.powf(snr_db / 10.0);
            transmit_receive(&ts, &h, eps, var, cfg, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let time = |id: EstimatorId| -> Result<f64> {
        let mut samples = Vec::with_capacity(reps);
        for f in &frames {
            let start = Instant::now();
            std::hint::black_box(run_estimator(id, std::hint::black_box(f), spec)?);
            samples.push(start.elapsed().as_secs_f64() * 1e6);
        }
        Ok(median(samples))
    };
    let simplified = time(EstimatorId::Simplified { iota })?;
    let ml = time(EstimatorId::MlGrid)?;
    Ok(BenchReport {
        iota,
        snr_db,
        repetitions: reps,
        simplified_median_us: simplified,
        ml_grid_median_us: ml,
        speedup: ml / simplified,
    })
}
