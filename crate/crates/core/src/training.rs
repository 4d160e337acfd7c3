//! System dimensioning and training-sequence construction.
//!
//! Each transmit antenna `mu` gets `P` pilots on the subcarrier lattice
//! `{i_mu + k Q}`. For the Chu-based design (CBTS) the pilots are the unitary
//! DFT of the Chu sequence cyclically shifted by `mu * M`, `M = floor(P / N_t)`,
//! scaled by `sqrt(Q / N_t)`. The random baseline (RS) keeps the lattice and
//! the per-antenna energy but draws i.i.d. unit-modulus phases.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CfoError, Result};
use crate::numerics::{cyclic_shift, dft, C64, RandomSource};

/// Dimensioning of one MIMO-OFDM training block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Subcarriers, `N`.
    pub n: usize,
    /// Pilot length, `P`.
    pub p: usize,
    pub n_t: usize,
    pub n_r: usize,
    /// Cyclic prefix length in samples.
    pub n_g: usize,
    /// Maximum channel length `L` in samples.
    pub channel_len: usize,
    /// Lattice offsets `i_mu`, one per transmit antenna.
    pub offsets: Vec<usize>,
    /// Chu root `upsilon`.
    #[serde(default = "default_root")]
    pub chu_root: usize,
}

fn default_root() -> usize {
    1
}

/// Offset set of the first ι-sweep experiment.
pub const OFFSETS_FIG1: [usize; 3] = [3, 5, 11];
/// Offset set of the second ι-sweep experiment and of the SNR comparison.
pub const OFFSETS_FIG2: [usize; 3] = [3, 7, 14];

impl SystemConfig {
    /// `N = 1024`, `P = 64`, `N_r = 2`, `N_g = 80`, `L = 75`, with the given offsets.
    pub fn reference(offsets: &[usize]) -> Self {
        Self {
            n: 1024,
            p: 64,
            n_t: offsets.len(),
            n_r: 2,
            n_g: 80,
            channel_len: 75,
            offsets: offsets.to_vec(),
            chu_root: 1,
        }
    }

    /// Repetition count `Q = N / P`.
    pub fn q(&self) -> usize {
        self.n / self.p
    }

    /// Shift stride `M = floor(P / N_t)`.
    pub fn shift_stride(&self) -> usize {
        self.p / self.n_t
    }

    /// Whether `P >= L` holds. The derivation assumes it, but the reference
    /// delay profile (L = 75, P = 64) does not satisfy it, so it is reported
    /// rather than enforced.
    pub fn short_channel_assumption_holds(&self) -> bool {
        self.p >= self.channel_len
    }

    /// `z_mu = exp(j 2 pi i_mu / Q)`.
    pub fn lattice_phasors(&self) -> Vec<C64> {
        let q = self.q() as f64;
        self.offsets
            .iter()
            .map(|&i| C64::from_polar(1.0, 2.0 * PI * i as f64 / q))
            .collect()
    }

    /// `sum_mu z_mu^k` for any integer power `k`.
    pub fn lattice_power_sum(&self, k: i64) -> C64 {
        let q = self.q() as i64;
        self.offsets
            .iter()
            .map(|&i| {
                let e = (i as i64 * k).rem_euclid(q);
                C64::from_polar(1.0, 2.0 * PI * e as f64 / q as f64)
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CfoError::Config(msg));
        if self.p < 2 {
            return bad(format!("pilot length P = {} must be at least 2", self.p));
        }
        if self.n == 0 || !self.n.is_multiple_of(2 * self.p) {
            return bad(format!("N = {} must be a positive multiple of 2P = {}", self.n, 2 * self.p));
        }
        let q = self.q();
        if self.n_t == 0 || self.n_r == 0 {
            return bad("antenna counts must be positive".into());
        }
        if self.n_t >= q {
            return bad(format!("N_t = {} must be smaller than Q = {q}", self.n_t));
        }
        if self.offsets.len() != self.n_t {
            return bad(format!(
                "{} lattice offsets given for N_t = {}",
                self.offsets.len(),
                self.n_t
            ));
        }
        for (k, &i) in self.offsets.iter().enumerate() {
            if i >= q {
                return bad(format!("offset i_{k} = {i} outside [0, {}]", q - 1));
            }
            if self.offsets[..k].contains(&i) {
                return bad(format!("offset {i} repeated"));
            }
        }
        if gcd(self.chu_root, self.p) != 1 {
            return bad(format!(
                "Chu root {} is not coprime with P = {}",
                self.chu_root, self.p
            ));
        }
        if self.channel_len == 0 || self.channel_len > self.n_g {
            return bad(format!(
                "channel length L = {} must lie in [1, N_g = {}]",
                self.channel_len, self.n_g
            ));
        }
        Ok(())
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `[s]_p = exp(j pi upsilon p^2 / P)`.
pub fn chu_sequence(p: usize, root: usize) -> Result<Vec<C64>> {
    if p < 2 {
        return Err(CfoError::Config(format!("Chu length {p} must be at least 2")));
    }
    if gcd(root, p) != 1 {
        return Err(CfoError::Config(format!(
            "Chu root {root} is not coprime with length {p}"
        )));
    }
    // p^2 reduced mod 2P keeps the phase argument small for long sequences.
    let two_p = 2 * p as u128;
    Ok((0..p as u128)
        .map(|k| {
            let e = (root as u128 * k * k) % two_p;
            C64::from_polar(1.0, PI * e as f64 / p as f64)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrainingKind {
    /// Chu-sequence based training.
    Cbts,
    /// Random unit-modulus phases on the same lattice.
    Random,
}

impl fmt::Display for TrainingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingKind::Cbts => "cbts",
            TrainingKind::Random => "rs",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub kind: TrainingKind,
    /// Per-antenna frequency pilots (length `P`).
    pub freq_pilots: Vec<Vec<C64>>,
    /// Per-antenna full-grid vectors (length `N`), nonzero on the antenna's lattice.
    pub grid_vectors: Vec<Vec<C64>>,
    /// Per-antenna time-domain block before CP insertion: the unitary inverse
    /// DFT of the grid vector.
    pub time_sequences: Vec<Vec<C64>>,
}

impl TrainingSet {
    pub fn cbts(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let chu = chu_sequence(cfg.p, cfg.chu_root)?;
        let m = cfg.shift_stride();
        let scale = (cfg.q() as f64 / cfg.n_t as f64).sqrt();
        let pilots = (0..cfg.n_t)
            .map(|mu| {
                dft(&cyclic_shift(&chu, (mu * m) as isize), false)
                    .into_iter()
                    .map(|v| v * scale)
                    .collect()
            })
            .collect();
        Ok(Self::from_pilots(cfg, TrainingKind::Cbts, pilots))
    }

    pub fn random(cfg: &SystemConfig, rng: &mut RandomSource) -> Result<Self> {
        cfg.validate()?;
        let scale = (cfg.q() as f64 / cfg.n_t as f64).sqrt();
        let pilots = (0..cfg.n_t)
            .map(|_| (0..cfg.p).map(|_| rng.unit_phase() * scale).collect())
            .collect();
        Ok(Self::from_pilots(cfg, TrainingKind::Random, pilots))
    }

    fn from_pilots(cfg: &SystemConfig, kind: TrainingKind, freq_pilots: Vec<Vec<C64>>) -> Self {
        let q = cfg.q();
        let grid_vectors: Vec<Vec<C64>> = freq_pilots
            .iter()
            .zip(&cfg.offsets)
            .map(|(pilots, &offset)| {
                let mut grid = vec![C64::new(0.0, 0.0); cfg.n];
                for (k, &v) in pilots.iter().enumerate() {
                    grid[offset + k * q] = v;
                }
                grid
            })
            .collect();
        let time_sequences = grid_vectors.iter().map(|g| dft(g, true)).collect();
        Self {
            kind,
            freq_pilots,
            grid_vectors,
            time_sequences,
        }
    }

    /// `s_mu = sqrt(N_t / Q) F_P^H s~_mu`; the shifted Chu sequence for CBTS.
    pub fn base_sequence(&self, cfg: &SystemConfig, mu: usize) -> Vec<C64> {
        let scale = (cfg.n_t as f64 / cfg.q() as f64).sqrt();
        dft(&self.freq_pilots[mu], true)
            .into_iter()
            .map(|v| v * scale)
            .collect()
    }

    /// Writes one row per lattice subcarrier: `index,antenna,real,imag`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,antenna,real,imag")?;
        for (mu, grid) in self.grid_vectors.iter().enumerate() {
            for (k, v) in grid.iter().enumerate() {
                if *v != C64::new(0.0, 0.0) {
                    writeln!(out, "{k},{mu},{:e},{:e}", v.re, v.im)?;
                }
            }
        }
        Ok(())
    }
}

pub fn build_training(
    cfg: &SystemConfig,
    kind: TrainingKind,
    rng: &mut RandomSource,
) -> Result<TrainingSet> {
    match kind {
        TrainingKind::Cbts => TrainingSet::cbts(cfg),
        TrainingKind::Random => TrainingSet::random(cfg, rng),
    }
}

/// `[A^{(mu,mu')}]_{l,l'} = (s_mu^{(l)})^T D_P((i_mu - i_mu')) (s_mu'^{(l')})^*`.
///
/// Governs the leakage between antennas in the signal correlation `X X^H`.
pub fn cross_correlation_matrix(
    ts: &TrainingSet,
    cfg: &SystemConfig,
    l: usize,
    l_prime: usize,
    mu: usize,
    mu_prime: usize,
) -> C64 {
    let a = cyclic_shift(&ts.base_sequence(cfg, mu), l as isize);
    let b = cyclic_shift(&ts.base_sequence(cfg, mu_prime), l_prime as isize);
    let offset_diff = cfg.offsets[mu] as f64 - cfg.offsets[mu_prime] as f64;
    a.iter()
        .zip(&b)
        .enumerate()
        .map(|(p, (x, y))| {
            x * y.conj() * C64::from_polar(1.0, 2.0 * PI * offset_diff * p as f64 / cfg.n as f64)
        })
        .sum()
}
