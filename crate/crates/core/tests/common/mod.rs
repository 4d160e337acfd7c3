//! Reference computations written directly from the defining sums, kept
//! separate from the library code paths they check.

#![allow(dead_code)]

use std::f64::consts::PI;

use cfolab_core::channel::ChannelRealization;
use cfolab_core::{ComplexMatrix, SystemConfig, TrainingSet, C64};

pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// `exp(j pi root k^2 / P)` for even `P`.
pub fn chu_brute(p: usize, root: usize) -> Vec<C64> {
    (0..p).map(|k| cis(PI * root as f64 * (k * k) as f64 / p as f64)).collect()
}

/// `sum_p s_p conj(s_{(p + tau) mod P})`.
pub fn periodic_autocorrelation(s: &[C64], tau: usize) -> C64 {
    let p = s.len();
    (0..p).map(|k| s[k] * s[(k + tau) % p].conj()).sum()
}

/// Closed-form `[A^{(mu,mu')}]_{l,l'}` for the Chu-based design with stride `m`.
pub fn closed_form_a(cfg: &SystemConfig, mu: usize, mu_p: usize, l: usize, l_p: usize) -> C64 {
    let p = cfg.p as f64;
    let v = cfg.chu_root as f64;
    let m = cfg.shift_stride();
    let p_a = (mu * m + l) as f64;
    let p_b = (mu_p * m + l_p) as f64;
    let w = (cfg.offsets[mu] as f64 - cfg.offsets[mu_p] as f64) / cfg.q() as f64;
    let d = v * (p_a - p_b) - w;
    let denom = (PI * d / p).sin();
    if denom.abs() < 1e-12 {
        // 0/0 limit: aligned shifts on the same lattice.
        let sign = if ((v * (p_a - p_b)).round() as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        return C64::new(p * sign, 0.0) * cis(PI * v * (p_a * p_a - p_b * p_b) / p);
    }
    let sign = if ((v * (p_a - p_b)).round() as i64 + 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    cis(PI * v * (p_a * p_a - p_b * p_b) / p) * cis(-PI * (p - 1.0) * d / p) * (sign * (PI * w).sin() / denom)
}

/// Post-CP received block via circular convolution of each training block.
pub fn circular_receive(ts: &TrainingSet, ch: &ChannelRealization, eps: f64, cfg: &SystemConfig) -> Vec<Vec<C64>> {
    let n = cfg.n;
    (0..cfg.n_r)
        .map(|nu| {
            (0..n)
                .map(|k| {
                    let mut acc = C64::new(0.0, 0.0);
                    for mu in 0..cfg.n_t {
                        for (l, h) in ch.tap(nu, mu).iter().enumerate() {
                            acc += h * ts.time_sequences[mu][(k + n - l) % n];
                        }
                    }
                    acc * cis(2.0 * PI * eps * (k + cfg.n_g) as f64 / n as f64)
                })
                .collect()
        })
        .collect()
}

/// `[B]_{q,mu} = exp(j 2 pi (eps + i_mu) q / Q)`.
pub fn steering(eps: f64, cfg: &SystemConfig) -> ComplexMatrix {
    let q = cfg.q() as f64;
    ComplexMatrix::from_fn(cfg.q(), cfg.n_t, |row, mu| {
        cis(2.0 * PI * (eps + cfg.offsets[mu] as f64) * row as f64 / q)
    })
}

/// Eq.-4-style likelihood `sum_mu b_mu^H R b_mu` by plain double loops.
pub fn trace_likelihood(r: &ComplexMatrix, eps: f64, cfg: &SystemConfig) -> f64 {
    let b = steering(eps, cfg);
    let q = cfg.q();
    let mut total = 0.0;
    for mu in 0..cfg.n_t {
        for i in 0..q {
            for j in 0..q {
                total += (b[(i, mu)].conj() * r[(i, j)] * b[(j, mu)]).re;
            }
        }
    }
    total
}

pub fn max_diff(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Shortest signed distance on the circle of circumference `q`.
pub fn wrapped(a: f64, b: f64, q: usize) -> f64 {
    let qf = q as f64;
    (a - b + qf / 2.0).rem_euclid(qf) - qf / 2.0
}

pub const EPSILONS: [f64; 5] = [-7.5, -2.3, 0.0, 0.5, 7.0];

/// Unit single-tap channels at delay zero.
pub fn unit_channels(cfg: &SystemConfig) -> ChannelRealization {
    ChannelRealization::unit(cfg)
}
