//! Closed-form MSE of the simplified estimator, ι selection, and the
//! extended Miller-Chang bound (EMCB).

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_channel, training_matrix, ChannelProfile};
use crate::error::{CfoError, Result};
use crate::numerics::{ComplexMatrix, RandomSource, C64};
use crate::training::{SystemConfig, TrainingSet};

/// `|sum_mu z_mu^iota|` below this marks ι as degenerate.
pub const DEGENERATE_IOTA_TOL: f64 = 1e-9;

/// Relative tolerance for reporting ties between minimizers.
pub const IOTA_TIE_TOL: f64 = 1e-9;

fn check_iota(iota: usize, cfg: &SystemConfig) -> Result<C64> {
    let q = cfg.q();
    if iota == 0 || iota >= q {
        return Err(CfoError::Config(format!(
            "diagonal index {iota} outside [1, {}]",
            q - 1
        )));
    }
    let d = cfg.lattice_power_sum(iota as i64);
    if d.norm() < DEGENERATE_IOTA_TOL {
        return Err(CfoError::DegenerateIota { iota });
    }
    Ok(d)
}

/// The lattice-geometry term `rho(iota)` of the MSE numerator:
/// `2 m Re{(sum z_mu^{2 iota}) (sum z_mu^{-iota})^2} / |sum z_mu^iota|^2`,
/// `m = min(iota, Q - iota)`.
///
/// `m` counts the diagonal pairs `(iota, Q - iota)` whose signal-noise cross
/// terms correlate. The same conjugate-sum factor applies on both sides of
/// `Q/2`, which makes `rho(iota) = rho(Q - iota)`.
pub fn rho(iota: usize, cfg: &SystemConfig) -> Result<f64> {
    let d = check_iota(iota, cfg)?;
    let q = cfg.q();
    let i = iota as i64;
    let pairs = iota.min(q - iota) as f64;
    let double = cfg.lattice_power_sum(2 * i);
    let conj_sum = cfg.lattice_power_sum(-i);
    Ok(2.0 * pairs * (double * conj_sum * conj_sum).re / d.norm_sqr())
}

/// Analytical operating point at linear SNR `gamma = sigma_x^2 / sigma_w^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisPoint {
    pub gamma: f64,
    pub iota: usize,
    pub rho: f64,
    pub var_zeta: f64,
    pub var_eta: f64,
    pub var_xi: f64,
    pub mse: f64,
}

impl AnalysisPoint {
    pub fn evaluate(gamma: f64, iota: usize, cfg: &SystemConfig) -> Result<Self> {
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(CfoError::Config(format!("gamma must be positive, got {gamma}")));
        }
        let d2 = check_iota(iota, cfg)?.norm_sqr();
        let rho = rho(iota, cfg)?;
        let (n_t, n_r, p, q) = (cfg.n_t as f64, cfg.n_r as f64, cfg.p as f64, cfg.q() as f64);
        let it = iota as f64;
        let inv = 1.0 / gamma;
        let per_diag = 2.0 * n_t * inv + inv * inv;
        let var_zeta = per_diag / (n_r * p * (q - it) * d2);
        let var_eta = per_diag / (n_r * p * it * d2);
        let var_xi = (2.0 * (n_t * q + rho) * inv + q * inv * inv) / (n_r * p * it * (q - it) * d2);
        Ok(Self {
            gamma,
            iota,
            rho,
            var_zeta,
            var_eta,
            var_xi,
            mse: var_xi / (8.0 * PI * PI),
        })
    }
}

/// Predicted MSE of the simplified estimator (in squared subcarrier spacings).
pub fn mse_formula(gamma: f64, iota: usize, cfg: &SystemConfig) -> Result<f64> {
    AnalysisPoint::evaluate(gamma, iota, cfg).map(|a| a.mse)
}

/// `gamma = SNR / N_t` for a unit-power channel.
pub fn gamma_from_snr_db(snr_db: f64, cfg: &SystemConfig) -> f64 {
    10f64.powf(snr_db / 10.0) / cfg.n_t as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IotaOptimum {
    /// Minimizers, ascending; more than one when values tie within [`IOTA_TIE_TOL`].
    pub optimal: Vec<usize>,
    /// ι values excluded because `sum_mu z_mu^iota` vanishes.
    pub degenerate: Vec<usize>,
    /// `(iota, mse)` for every non-degenerate ι.
    pub listing: Vec<(usize, f64)>,
}

pub fn optimal_iota(gamma: f64, cfg: &SystemConfig) -> Result<IotaOptimum> {
    let mut listing = Vec::new();
    let mut degenerate = Vec::new();
    for iota in 1..cfg.q() {
        match mse_formula(gamma, iota, cfg) {
            Ok(v) => listing.push((iota, v)),
            Err(CfoError::DegenerateIota { .. }) => degenerate.push(iota),
            Err(e) => return Err(e),
        }
    }
    let best = listing
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::INFINITY, f64::min);
    let optimal = listing
        .iter()
        .filter(|&&(_, v)| v <= best * (1.0 + IOTA_TIE_TOL))
        .map(|&(i, _)| i)
        .collect();
    Ok(IotaOptimum {
        optimal,
        degenerate,
        listing,
    })
}

/// Orthonormal basis of the column space of the training matrix.
///
/// Projecting onto the complement of this basis is the
/// `I - X (X^H X)^{-1} X^H` operator of the bound, and stays well defined
/// when the channel is longer than the pilot period and `X^H X` is singular.
#[derive(Debug, Clone)]
pub struct RangeBasis {
    basis: ComplexMatrix,
}

impl RangeBasis {
    pub fn new(s: &ComplexMatrix) -> Result<Self> {
        let svd = s.clone().svd(true, false);
        let u = svd.u.ok_or(CfoError::SingularTraining)?;
        let sv = &svd.singular_values;
        let top = sv.iter().cloned().fold(0.0, f64::max);
        if top == 0.0 {
            return Err(CfoError::SingularTraining);
        }
        let tol = top * 1e-10 * s.nrows().max(s.ncols()) as f64;
        let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > tol).collect();
        let basis = ComplexMatrix::from_fn(s.nrows(), keep.len(), |r, c| u[(r, keep[c])]);
        Ok(Self { basis })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `v - U U^H v`.
    pub fn project_out(&self, v: &DVector<C64>) -> DVector<C64> {
        v - &self.basis * (self.basis.adjoint() * v)
    }

    /// `v^H (I - U U^H) v`.
    pub fn complement_energy(&self, v: &DVector<C64>) -> f64 {
        let inside = self.basis.adjoint() * v;
        v.norm_squared() - inside.norm_squared()
    }

    /// Explicit projector `I - U U^H`.
    pub fn projector(&self) -> ComplexMatrix {
        let n = self.basis.nrows();
        ComplexMatrix::identity(n, n) - &self.basis * self.basis.adjoint()
    }
}

/// `N sigma_w^2 / (8 pi^2 D)` where `D = h^H X^H B (I - P_X) B X h`.
pub fn snapshot_crb(n: usize, noise_variance: f64, fisher_energy: f64) -> f64 {
    n as f64 * noise_variance / (8.0 * PI * PI * fisher_energy)
}

/// Per-realization quantities the bound needs.
#[derive(Debug, Clone, Copy)]
pub struct BoundSnapshot {
    /// Mean received signal power per sample.
    pub signal_power: f64,
    /// `h^H X^H B (I - P_X) B X h`.
    pub fisher_energy: f64,
}

pub fn bound_snapshot(
    s: &ComplexMatrix,
    basis: &RangeBasis,
    h: &crate::channel::ChannelRealization,
    cfg: &SystemConfig,
) -> Result<BoundSnapshot> {
    let mut signal_power = 0.0;
    let mut fisher_energy = 0.0;
    for nu in 0..cfg.n_r {
        let sh = s * DVector::from_vec(h.receive_vector(nu));
        signal_power += sh.norm_squared();
        let weighted = DVector::from_fn(sh.len(), |n, _| sh[n] * (cfg.n_g + n) as f64);
        fisher_energy += basis.complement_energy(&weighted);
    }
    if fisher_energy.is_nan() || fisher_energy <= 0.0 {
        return Err(CfoError::SingularTraining);
    }
    Ok(BoundSnapshot {
        signal_power: signal_power / cfg.n_r as f64,
        fisher_energy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmcbResult {
    pub snr_db: Vec<f64>,
    pub noise_variance: Vec<f64>,
    pub bound: Vec<f64>,
    pub n_channel_draws: usize,
    pub seed: u64,
    /// Mean received power per sample over the draws; the SNR reference.
    pub signal_power: f64,
}

/// Channel-averaged snapshot CRB at each SNR. Draw `k` uses stream `k` of `seed`.
pub fn emcb(
    cfg: &SystemConfig,
    profile: &ChannelProfile,
    ts: &TrainingSet,
    snr_db: &[f64],
    n_draws: usize,
    seed: u64,
) -> Result<EmcbResult> {
    if n_draws == 0 {
        return Err(CfoError::Config("EMCB needs at least one channel draw".into()));
    }
    cfg.validate()?;
    profile.validate(cfg)?;
    let s = training_matrix(ts, cfg);
    let basis = RangeBasis::new(&s)?;
    let snaps = (0..n_draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = RandomSource::new(seed, k as u64);
            let h = draw_channel(profile, cfg, &mut rng)?;
            bound_snapshot(&s, &basis, &h, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let signal_power = snaps.iter().map(|s| s.signal_power).sum::<f64>() / n_draws as f64;
    let mean_inv = snaps.iter().map(|s| 1.0 / s.fisher_energy).sum::<f64>() / n_draws as f64;
    let noise_variance: Vec<f64> = snr_db
        .iter()
        .map(|db| signal_power / 10f64.powf(db / 10.0))
        .collect();
    let bound = noise_variance
        .iter()
        .map(|&var| snapshot_crb(cfg.n, var, 1.0) * mean_inv)
        .collect();
    Ok(EmcbResult {
        snr_db: snr_db.to_vec(),
        noise_variance,
        bound,
        n_channel_draws: n_draws,
        seed,
        signal_power,
    })
}
