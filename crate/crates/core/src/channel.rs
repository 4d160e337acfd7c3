//! Frequency-selective Rayleigh channels and the received training block.
//!
//! Two independent routes produce the noiseless received block:
//! [`transmit_receive`] works sample by sample in the time domain (CP
//! insertion, linear convolution, CFO rotation, CP removal), while
//! [`model_receive`] assembles `y = sqrt(N) e^{j2 pi eps N_g / N} (I (x) D_N(eps) S) h`
//! from explicit DFT-row matrices. The two must agree to rounding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CfoError, Result};
use crate::numerics::{dft, dft_matrix_entry, phase_ramp, unit_phasor, ComplexMatrix, RandomSource, C64};
use crate::training::{SystemConfig, TrainingSet};

/// Power-delay profile with delays in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub delays: Vec<usize>,
    pub powers_db: Vec<f64>,
}

impl ChannelProfile {
    /// Six-tap profile: `{0, -0.9, -4.9, -8.0, -7.8, -23.9}` dB at `{0, 4, 16, 24, 46, 74}` samples.
    pub fn reference() -> Self {
        Self {
            delays: vec![0, 4, 16, 24, 46, 74],
            powers_db: vec![0.0, -0.9, -4.9, -8.0, -7.8, -23.9],
        }
    }

    /// One unit-power tap at delay zero.
    pub fn flat() -> Self {
        Self {
            delays: vec![0],
            powers_db: vec![0.0],
        }
    }

    /// Max delay + 1.
    pub fn channel_len(&self) -> usize {
        self.delays.last().map_or(0, |d| d + 1)
    }

    /// Linear tap powers normalized to unit sum.
    pub fn linear_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if self.delays.is_empty() || self.delays.len() != self.powers_db.len() {
            return Err(CfoError::Config(
                "profile needs one power per delay and at least one tap".into(),
            ));
        }
        if self.delays.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CfoError::Config("profile delays must be strictly increasing".into()));
        }
        if self.powers_db.iter().any(|p| !p.is_finite()) {
            return Err(CfoError::Config("profile powers must be finite".into()));
        }
        if self.channel_len() > cfg.channel_len {
            return Err(CfoError::Config(format!(
                "profile spans {} samples but the configured channel length is {}",
                self.channel_len(),
                cfg.channel_len
            )));
        }
        if self.channel_len() > cfg.n_g {
            return Err(CfoError::Config(format!(
                "profile spans {} samples, longer than the cyclic prefix {}",
                self.channel_len(),
                cfg.n_g
            )));
        }
        Ok(())
    }
}

/// Tap vectors `h^{(nu,mu)}`, each of length `L`, stored receive-major so the
/// flattened order is `[h_0; h_1; ...]` with `h_nu = [h^{(nu,0)}; h^{(nu,1)}; ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub n_r: usize,
    pub n_t: usize,
    pub len: usize,
    pub taps: Vec<Vec<C64>>,
}

impl ChannelRealization {
    pub fn tap(&self, nu: usize, mu: usize) -> &[C64] {
        &self.taps[nu * self.n_t + mu]
    }

    /// One unit tap at delay zero on every link.
    pub fn unit(cfg: &SystemConfig) -> Self {
        let mut taps = vec![vec![C64::new(0.0, 0.0); cfg.channel_len]; cfg.n_r * cfg.n_t];
        taps.iter_mut().for_each(|t| t[0] = C64::new(1.0, 0.0));
        Self {
            n_r: cfg.n_r,
            n_t: cfg.n_t,
            len: cfg.channel_len,
            taps,
        }
    }

    pub fn zero(cfg: &SystemConfig) -> Self {
        Self {
            n_r: cfg.n_r,
            n_t: cfg.n_t,
            len: cfg.channel_len,
            taps: vec![vec![C64::new(0.0, 0.0); cfg.channel_len]; cfg.n_r * cfg.n_t],
        }
    }

    /// `h_nu`, the concatenation over transmit antennas.
    pub fn receive_vector(&self, nu: usize) -> Vec<C64> {
        (0..self.n_t).flat_map(|mu| self.tap(nu, mu).iter().copied()).collect()
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().flatten().map(|v| v.norm_sqr()).sum()
    }
}

/// Independent CN(0, p_l) taps on the profile's delays; zero elsewhere.
pub fn draw_channel(
    profile: &ChannelProfile,
    cfg: &SystemConfig,
    rng: &mut RandomSource,
) -> Result<ChannelRealization> {
    profile.validate(cfg)?;
    let powers = profile.linear_powers();
    let mut ch = ChannelRealization::zero(cfg);
    for taps in ch.taps.iter_mut() {
        for (&d, &p) in profile.delays.iter().zip(&powers) {
            taps[d] = rng.complex_gaussian(p);
        }
    }
    Ok(ch)
}

/// Received training block after CP removal.
#[derive(Debug, Clone)]
pub struct ReceivedFrame {
    /// One length-`N` vector per receive antenna.
    pub y: Vec<Vec<C64>>,
    pub true_epsilon: f64,
    pub noise_variance: f64,
    /// Mean noiseless power per received sample.
    pub signal_power: f64,
    /// Per-row signal power of the stacked model, `signal_power / N_t`
    /// under uncorrelated antenna contributions.
    pub sigma_x2: f64,
}

impl ReceivedFrame {
    fn noiseless(y: Vec<Vec<C64>>, epsilon: f64, n_t: usize) -> Self {
        let count: usize = y.iter().map(Vec::len).sum();
        let signal_power = y.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>() / count as f64;
        Self {
            y,
            true_epsilon: epsilon,
            noise_variance: 0.0,
            signal_power,
            sigma_x2: signal_power / n_t as f64,
        }
    }

    /// Adds CN(0, variance) to every sample.
    pub fn add_noise(&mut self, variance: f64, rng: &mut RandomSource) {
        if variance > 0.0 {
            for v in self.y.iter_mut().flatten() {
                *v += rng.complex_gaussian(variance);
            }
        }
        self.noise_variance = variance;
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "antenna,index,real,imag")?;
        for (nu, y) in self.y.iter().enumerate() {
            for (k, v) in y.iter().enumerate() {
                writeln!(out, "{nu},{k},{:e},{:e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

pub fn check_cfo_range(epsilon: f64, cfg: &SystemConfig) -> Result<()> {
    let half = cfg.q() as f64 / 2.0;
    if !(epsilon > -half && epsilon < half) {
        return Err(CfoError::CfoOutOfRange {
            epsilon,
            half_range: half,
        });
    }
    Ok(())
}

fn check_shapes(ts: &TrainingSet, ch: &ChannelRealization, cfg: &SystemConfig) -> Result<()> {
    if ts.time_sequences.len() != cfg.n_t || ch.n_t != cfg.n_t {
        return Err(CfoError::DimensionMismatch {
            expected: cfg.n_t,
            found: ch.n_t,
        });
    }
    if ch.n_r != cfg.n_r {
        return Err(CfoError::DimensionMismatch {
            expected: cfg.n_r,
            found: ch.n_r,
        });
    }
    if ch.len > cfg.n_g {
        return Err(CfoError::Config(format!(
            "channel length {} exceeds the cyclic prefix {}",
            ch.len, cfg.n_g
        )));
    }
    Ok(())
}

/// Noiseless time-domain propagation: CP prepend, linear convolution,
/// CFO rotation `exp(j 2 pi eps m / N)` from the first CP sample, CP removal.
pub fn propagate(
    ts: &TrainingSet,
    ch: &ChannelRealization,
    epsilon: f64,
    cfg: &SystemConfig,
) -> Result<ReceivedFrame> {
    cfg.validate()?;
    check_cfo_range(epsilon, cfg)?;
    check_shapes(ts, ch, cfg)?;
    let (n, n_g) = (cfg.n, cfg.n_g);
    let with_cp: Vec<Vec<C64>> = ts
        .time_sequences
        .iter()
        .map(|t| t[n - n_g..].iter().chain(t.iter()).copied().collect())
        .collect();
    let rotation = phase_ramp(n + n_g, epsilon, n);
    let y = (0..cfg.n_r)
        .map(|nu| {
            (n_g..n + n_g)
                .map(|m| {
                    let mut acc = C64::new(0.0, 0.0);
                    for (mu, tx) in with_cp.iter().enumerate() {
                        for (l, h) in ch.tap(nu, mu).iter().enumerate() {
                            if *h != C64::new(0.0, 0.0) {
                                acc += h * tx[m - l];
                            }
                        }
                    }
                    acc * rotation[m]
                })
                .collect()
        })
        .collect();
    Ok(ReceivedFrame::noiseless(y, epsilon, cfg.n_t))
}

/// Time-domain simulation with additive CN(0, noise_variance) noise.
pub fn transmit_receive(
    ts: &TrainingSet,
    ch: &ChannelRealization,
    epsilon: f64,
    noise_variance: f64,
    cfg: &SystemConfig,
    rng: &mut RandomSource,
) -> Result<ReceivedFrame> {
    let mut frame = propagate(ts, ch, epsilon, cfg)?;
    frame.add_noise(noise_variance, rng);
    Ok(frame)
}

/// The `N x N_t L` training matrix `S = F_bar^H diag{s~} F_breve`.
pub fn training_matrix(ts: &TrainingSet, cfg: &SystemConfig) -> ComplexMatrix {
    let (n, p, q, l_max, n_t) = (cfg.n, cfg.p, cfg.q(), cfg.channel_len, cfg.n_t);
    let lattice = |mu: usize, k: usize| cfg.offsets[mu] + k * q;
    // F_bar: stacked lattice rows of F_N.
    let f_bar = ComplexMatrix::from_fn(n_t * p, n, |row, col| {
        dft_matrix_entry(lattice(row / p, row % p), col, n)
    });
    // diag{s~} F_breve: block diagonal, block mu = diag(s~_mu) Theta^T F_N [I_L 0]^T.
    let weighted = ComplexMatrix::from_fn(n_t * p, n_t * l_max, |row, col| {
        let (mu, k) = (row / p, row % p);
        if col / l_max != mu {
            return C64::new(0.0, 0.0);
        }
        ts.freq_pilots[mu][k] * dft_matrix_entry(lattice(mu, k), col % l_max, n)
    });
    f_bar.adjoint() * weighted
}

/// Noiseless received block from the explicit matrix model.
pub fn model_receive(
    ts: &TrainingSet,
    ch: &ChannelRealization,
    epsilon: f64,
    cfg: &SystemConfig,
) -> Result<ReceivedFrame> {
    cfg.validate()?;
    check_cfo_range(epsilon, cfg)?;
    check_shapes(ts, ch, cfg)?;
    let s = training_matrix(ts, cfg);
    let front = unit_phasor(epsilon * cfg.n_g as f64 / cfg.n as f64) * (cfg.n as f64).sqrt();
    let ramp = phase_ramp(cfg.n, epsilon, cfg.n);
    let y = (0..cfg.n_r)
        .map(|nu| {
            let h = nalgebra::DVector::from_vec(padded_receive_vector(ch, nu, cfg.channel_len));
            let sh = &s * h;
            sh.iter().zip(&ramp).map(|(v, r)| v * r * front).collect()
        })
        .collect();
    Ok(ReceivedFrame::noiseless(y, epsilon, cfg.n_t))
}

fn padded_receive_vector(ch: &ChannelRealization, nu: usize, len: usize) -> Vec<C64> {
    (0..ch.n_t)
        .flat_map(|mu| {
            let t = ch.tap(nu, mu);
            (0..len).map(move |l| t.get(l).copied().unwrap_or_default())
        })
        .collect()
}

/// Noiseless `X` (`N_t x N_r P`) with
/// `x^{(nu,mu)} = sqrt(P) e^{j2 pi eps N_g/N} D_P(eps + i_mu) F_P^H diag{s~_mu} Theta_{i_mu}^T F_N [I_L 0]^T h^{(nu,mu)}`.
pub fn stacked_signal_matrix(
    ts: &TrainingSet,
    ch: &ChannelRealization,
    epsilon: f64,
    cfg: &SystemConfig,
) -> Result<ComplexMatrix> {
    check_shapes(ts, ch, cfg)?;
    let (n, p, q) = (cfg.n, cfg.p, cfg.q());
    let front = unit_phasor(epsilon * cfg.n_g as f64 / n as f64) * (p as f64).sqrt();
    let mut x = ComplexMatrix::zeros(cfg.n_t, cfg.n_r * p);
    for nu in 0..cfg.n_r {
        for mu in 0..cfg.n_t {
            let mut h = vec![C64::new(0.0, 0.0); n];
            h[..ch.len].copy_from_slice(ch.tap(nu, mu));
            let freq = dft(&h, false);
            let offset = cfg.offsets[mu];
            let weighted: Vec<C64> = (0..p)
                .map(|k| ts.freq_pilots[mu][k] * freq[offset + k * q])
                .collect();
            let row = dft(&weighted, true);
            let ramp = phase_ramp(p, epsilon + offset as f64, n);
            for (k, (v, r)) in row.iter().zip(&ramp).enumerate() {
                x[(mu, nu * p + k)] = v * r * front;
            }
        }
    }
    Ok(x)
}

/// Empirical `sigma_x^2`: mean squared magnitude of the entries of `X`.
pub fn empirical_sigma_x2(x: &ComplexMatrix) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}
