//! Experiment descriptions, Monte-Carlo runners, timing and CSV output.

mod bench;
mod run;
mod spec;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use bench::{run_bench, BenchReport};
pub use run::{
    run_emcb, run_estimator, run_mse_vs_iota, run_mse_vs_snr, run_with_bound, thread_cap, trial_stream,
    wrapped_sq_error,
};
pub use spec::{
    EpsilonMode, EstimatorId, ExperimentSpec, Preset, DEFAULT_EMCB_DRAWS, DEFAULT_SNR_DB, DEFAULT_TRIALS,
};

pub const CSV_HEADER: &str =
    "estimator,snr_db,iota,trials,empirical_mse,analytic_mse,emcb,mean_runtime_us,degenerate_count";

/// One output line. `trials` counts the non-degenerate trials that entered the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: String,
    pub snr_db: f64,
    pub iota: Option<usize>,
    pub trials: usize,
    pub empirical_mse: Option<f64>,
    pub analytic_mse: Option<f64>,
    pub emcb: Option<f64>,
    pub mean_runtime_us: Option<f64>,
    pub degenerate_count: usize,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.estimator,
            self.snr_db,
            opt(&self.iota),
            self.trials,
            opt(&self.empirical_mse),
            opt(&self.analytic_mse),
            opt(&self.emcb),
            opt(&self.mean_runtime_us),
            self.degenerate_count
        )
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let row = ResultRow {
            estimator: "simplified".into(),
            snr_db: 15.0,
            iota: Some(7),
            trials: 10,
            empirical_mse: Some(0.5),
            analytic_mse: None,
            emcb: None,
            mean_runtime_us: None,
            degenerate_count: 0,
        };
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("simplified,15,7,10,0.5,,,,0"));
        assert_eq!(CSV_HEADER.split(',').count(), 9);
    }
}
