//! Correlation-based CFO estimation.
//!
//! The received block of each antenna is folded into a `Q x P` matrix (one
//! row per repetition period), the sample correlation `R = Y Y^H` is formed,
//! and its upper-diagonal sums `c_q` drive everything else. The likelihood
//! is a Laurent polynomial in `z = exp(j 2 pi eps / Q)`:
//!
//! `f(z) = sum_q a_q z^q + conj(a_q) z^{-q}`, `a_q = c_q sum_mu z_mu^q`.
//!
//! Its derivative factors (approximately) as `z^{-(Q+1)} (z^Q - kappa) g(z)`,
//! so the stationary point nearest the truth is one of the `Q` roots of
//! `z^Q = kappa`, and the estimator only compares `f` on those roots.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::ReceivedFrame;
use crate::error::{CfoError, Result};
use crate::numerics::{unit_phasor, ComplexMatrix, C64};
use crate::training::SystemConfig;

/// Folded received block with its sample correlation.
#[derive(Debug, Clone)]
pub struct StackedFrame {
    /// `Q x N_r P`; `[Y_nu]_{q,p} = y_nu[qP + p]`.
    pub y: ComplexMatrix,
    /// `Y Y^H`.
    pub r_yy: ComplexMatrix,
    /// `c_q = sum_{j - i = q} R_{i,j}`, `q = 0..Q-1`.
    pub c: Vec<C64>,
}

impl StackedFrame {
    pub fn q(&self) -> usize {
        self.c.len()
    }
}

pub fn stack(frame: &ReceivedFrame, cfg: &SystemConfig) -> Result<StackedFrame> {
    if frame.y.len() != cfg.n_r {
        return Err(CfoError::DimensionMismatch {
            expected: cfg.n_r,
            found: frame.y.len(),
        });
    }
    stack_samples(&frame.y, cfg.p, cfg.q())
}

/// Stacks raw per-antenna sample vectors of length `p * q`.
pub fn stack_samples(y: &[Vec<C64>], p: usize, q: usize) -> Result<StackedFrame> {
    let n = p * q;
    if let Some(bad) = y.iter().find(|v| v.len() != n) {
        return Err(CfoError::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let n_r = y.len();
    let ymat = ComplexMatrix::from_fn(q, n_r * p, |row, col| y[col / p][row * p + col % p]);
    let r_yy = &ymat * ymat.adjoint();
    let c = diagonal_sums(&r_yy);
    Ok(StackedFrame { y: ymat, r_yy, c })
}

/// Upper-diagonal sums of a square matrix.
pub fn diagonal_sums(r: &ComplexMatrix) -> Vec<C64> {
    let q = r.nrows();
    (0..q)
        .map(|d| (0..q - d).map(|i| r[(i, i + d)]).sum())
        .collect()
}

fn check_iota(iota: usize, q: usize) -> Result<()> {
    if iota == 0 || iota >= q {
        return Err(CfoError::Config(format!(
            "diagonal index {iota} outside [1, {}]",
            q - 1
        )));
    }
    Ok(())
}

/// `kappa(iota) = iota conj(c_iota) / ((Q - iota) c_{Q - iota})`.
pub fn kappa(sf: &StackedFrame, iota: usize) -> Result<C64> {
    let q = sf.q();
    check_iota(iota, q)?;
    let norm = sf.c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let denom = sf.c[q - iota];
    if denom.norm().is_nan() || denom.norm() <= 1e-12 * norm {
        return Err(CfoError::DegenerateCorrelation { iota });
    }
    Ok(sf.c[iota].conj() * iota as f64 / (denom * (q - iota) as f64))
}

/// The `Q` roots of `z^Q = kappa` mapped to offsets: `arg(kappa) / 2pi + q - Q/2`,
/// with `arg` taken in `[0, 2 pi)` so the candidates tile `[-Q/2, Q/2)`.
pub fn candidates(kappa: C64, q: usize) -> Result<Vec<f64>> {
    if kappa.norm() == 0.0 || !kappa.norm().is_finite() {
        return Err(CfoError::DegenerateCorrelation { iota: 0 });
    }
    let mut frac = kappa.arg().rem_euclid(2.0 * PI) / (2.0 * PI);
    if frac >= 1.0 {
        frac = 0.0;
    }
    let half = q as f64 / 2.0;
    Ok((0..q).map(|k| frac + k as f64 - half).collect())
}

/// Coefficients `a_q = c_q sum_mu z_mu^q` of the likelihood polynomial.
#[derive(Debug, Clone)]
pub struct CostPolynomial {
    pub coeffs: Vec<C64>,
}

impl CostPolynomial {
    pub fn new(sf: &StackedFrame, cfg: &SystemConfig) -> Self {
        let coeffs = sf
            .c
            .iter()
            .enumerate()
            .map(|(q, c)| c * cfg.lattice_power_sum(q as i64))
            .collect();
        Self { coeffs }
    }

    /// `f(z)` before taking the real part. Real (up to rounding) on the unit circle.
    pub fn value(&self, z: C64) -> C64 {
        let zi = z.inv();
        let (mut pos, mut neg) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let mut acc = C64::new(0.0, 0.0);
        for a in &self.coeffs {
            acc += a * pos + a.conj() * neg;
            pos *= z;
            neg *= zi;
        }
        acc
    }

    /// `f'(z) = z^{-1} { sum q a_q z^q - sum q conj(a_q) z^{-q} }`.
    pub fn derivative(&self, z: C64) -> C64 {
        let zi = z.inv();
        let (mut pos, mut neg) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let mut acc = C64::new(0.0, 0.0);
        for (q, a) in self.coeffs.iter().enumerate() {
            acc += (a * pos - a.conj() * neg) * q as f64;
            pos *= z;
            neg *= zi;
        }
        acc * zi
    }

    /// `g(z) = sum_q q a_q z^q`.
    pub fn factor_g(&self, z: C64) -> C64 {
        let mut pos = C64::new(1.0, 0.0);
        let mut acc = C64::new(0.0, 0.0);
        for (q, a) in self.coeffs.iter().enumerate() {
            acc += a * pos * q as f64;
            pos *= z;
        }
        acc
    }

    /// `z^{-(Q+1)} (z^Q - kappa) g(z)`.
    pub fn factored_derivative(&self, z: C64, kappa: C64) -> C64 {
        let q = self.coeffs.len() as i32;
        z.powi(-(q + 1)) * (z.powi(q) - kappa) * self.factor_g(z)
    }
}

/// Reformulated log-likelihood `f(exp(j 2 pi eps / Q))`.
pub fn likelihood(sf: &StackedFrame, epsilon: f64, cfg: &SystemConfig) -> f64 {
    CostPolynomial::new(sf, cfg)
        .value(unit_phasor(epsilon / sf.q() as f64))
        .re
}

/// `B(eps)`: column `mu` is `[exp(j 2 pi (eps + i_mu) q / Q)]_q`.
pub fn steering_matrix(epsilon: f64, cfg: &SystemConfig) -> ComplexMatrix {
    let q = cfg.q();
    ComplexMatrix::from_fn(q, cfg.n_t, |row, mu| {
        unit_phasor((epsilon + cfg.offsets[mu] as f64) * row as f64 / q as f64)
    })
}

/// `Tr[B^H(eps) R B(eps)]`, evaluated as a quadratic form per antenna.
pub fn likelihood_trace(sf: &StackedFrame, epsilon: f64, cfg: &SystemConfig) -> f64 {
    let q = sf.q();
    let r = &sf.r_yy;
    let mut b = vec![C64::new(0.0, 0.0); q];
    let mut total = 0.0;
    for &offset in &cfg.offsets {
        let step = unit_phasor((epsilon + offset as f64) / q as f64);
        let mut cur = C64::new(1.0, 0.0);
        for v in b.iter_mut() {
            *v = cur;
            cur *= step;
        }
        for i in 0..q {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..q {
                row += r[(i, j)] * b[j];
            }
            total += (b[i].conj() * row).re;
        }
    }
    total
}

/// Two-stage grid for the brute-force ML baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlGrid {
    pub coarse: f64,
    pub fine: f64,
}

impl Default for MlGrid {
    fn default() -> Self {
        Self {
            coarse: 0.05,
            fine: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub iota: usize,
    #[serde(default)]
    pub grid: MlGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Simplified,
    MlGrid,
}

#[derive(Debug, Clone)]
pub struct CfoEstimate {
    pub epsilon_hat: f64,
    /// Present for the simplified method only.
    pub kappa: Option<C64>,
    /// The `Q` roots for the simplified method; the refined maximizer for the grid search.
    pub candidates: Vec<f64>,
    pub scores: Vec<f64>,
    pub method: Method,
}

pub fn estimate_simplified(
    sf: &StackedFrame,
    params: &EstimatorParams,
    cfg: &SystemConfig,
) -> Result<CfoEstimate> {
    let k = kappa(sf, params.iota)?;
    let cands = candidates(k, sf.q()).map_err(|_| CfoError::DegenerateCorrelation { iota: params.iota })?;
    let poly = CostPolynomial::new(sf, cfg);
    let q = sf.q() as f64;
    let scores: Vec<f64> = cands
        .iter()
        .map(|&e| poly.value(unit_phasor(e / q)).re)
        .collect();
    let scale = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let tie = 1e-12 * scale;
    let mut best = 0;
    for i in 1..cands.len() {
        let (si, sb) = (scores[i], scores[best]);
        if si > sb + tie || ((si - sb).abs() <= tie && cands[i].abs() < cands[best].abs()) {
            best = i;
        }
    }
    Ok(CfoEstimate {
        epsilon_hat: cands[best],
        kappa: Some(k),
        candidates: cands,
        scores,
        method: Method::Simplified,
    })
}

fn wrap_offset(epsilon: f64, q: usize) -> f64 {
    let qf = q as f64;
    (epsilon + qf / 2.0).rem_euclid(qf) - qf / 2.0
}

/// Grid-search maximization of the trace likelihood over `[-Q/2, Q/2)`:
/// a coarse scan, then a fine scan within one coarse step of the best point.
pub fn estimate_ml_grid(sf: &StackedFrame, cfg: &SystemConfig, grid: MlGrid) -> Result<CfoEstimate> {
    if !(grid.coarse > 0.0 && grid.fine > 0.0) {
        return Err(CfoError::Config("grid steps must be positive".into()));
    }
    let q = sf.q();
    let half = q as f64 / 2.0;
    let coarse_points = (q as f64 / grid.coarse).ceil() as usize;
    let mut best = (-half, f64::NEG_INFINITY);
    for k in 0..coarse_points {
        let e = -half + k as f64 * grid.coarse;
        let v = likelihood_trace(sf, e, cfg);
        if v > best.1 {
            best = (e, v);
        }
    }
    let center = best.0;
    let fine_points = (grid.coarse / grid.fine).round() as i64;
    for k in -fine_points..=fine_points {
        let e = wrap_offset(center + k as f64 * grid.fine, q);
        let v = likelihood_trace(sf, e, cfg);
        if v > best.1 {
            best = (e, v);
        }
    }
    Ok(CfoEstimate {
        epsilon_hat: best.0,
        kappa: None,
        candidates: vec![best.0],
        scores: vec![best.1],
        method: Method::MlGrid,
    })
}

/// Relative residual of the derivative factorization over 64 unit-circle points:
/// `max |f'(z) - z^{-(Q+1)} (z^Q - kappa) g(z)| / max |f'(z)|`.
pub fn derivative_factor_residual(sf: &StackedFrame, iota: usize, cfg: &SystemConfig) -> Result<f64> {
    let k = kappa(sf, iota)?;
    let poly = CostPolynomial::new(sf, cfg);
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for i in 0..64 {
        let z = unit_phasor(i as f64 / 64.0);
        let direct = poly.derivative(z);
        worst = worst.max((direct - poly.factored_derivative(z, k)).norm());
        scale = scale.max(direct.norm());
    }
    Ok(if scale == 0.0 { 0.0 } else { worst / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomSource;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_stacked(seed: u64, q: usize, p: usize, n_r: usize) -> StackedFrame {
        let mut rng = RandomSource::new(seed, 0);
        let y: Vec<Vec<C64>> = (0..n_r)
            .map(|_| (0..p * q).map(|_| rng.complex_gaussian(1.0)).collect())
            .collect();
        stack_samples(&y, p, q).unwrap()
    }

    #[test]
    fn stacking_index_arithmetic() {
        let (a, b, cc, d) = (c(1., 1.), c(2., 0.), c(0., 3.), c(-1., 2.));
        let sf = stack_samples(&[vec![a, b, cc, d]], 2, 2).unwrap();
        assert_eq!(sf.y[(0, 0)], a);
        assert_eq!(sf.y[(0, 1)], b);
        assert_eq!(sf.y[(1, 0)], cc);
        assert_eq!(sf.y[(1, 1)], d);
        let r01 = a * cc.conj() + b * d.conj();
        assert!((sf.r_yy[(0, 1)] - r01).norm() < 1e-12);
        assert!((sf.r_yy[(1, 0)] - r01.conj()).norm() < 1e-12);
        assert!((sf.c[0] - (sf.r_yy[(0, 0)] + sf.r_yy[(1, 1)])).norm() < 1e-12);
        assert!((sf.c[1] - r01).norm() < 1e-12);
    }

    #[test]
    fn stacking_rejects_wrong_length() {
        assert!(matches!(
            stack_samples(&[vec![c(0., 0.); 5]], 2, 2),
            Err(CfoError::DimensionMismatch { expected: 4, found: 5 })
        ));
    }

    #[test]
    fn c0_real_nonnegative_and_r_hermitian() {
        let sf = random_stacked(4, 16, 8, 2);
        assert!(sf.c[0].im.abs() < 1e-9 && sf.c[0].re >= 0.0);
        assert!(crate::numerics::is_hermitian(&sf.r_yy, 1e-12));
    }

    #[test]
    fn kappa_arithmetic() {
        let sf = StackedFrame {
            y: ComplexMatrix::zeros(4, 1),
            r_yy: ComplexMatrix::zeros(4, 4),
            c: vec![c(5., 0.), c(1., 1.), c(0., 0.), c(2., 0.)],
        };
        let k = kappa(&sf, 1).unwrap();
        assert!((k - c(1., -1.) / 6.0).norm() < 1e-15);
        assert!(matches!(kappa(&sf, 2), Err(CfoError::DegenerateCorrelation { iota: 2 })));
        assert!(kappa(&sf, 0).is_err());
        assert!(kappa(&sf, 4).is_err());
    }

    #[test]
    fn candidate_examples() {
        let cands = candidates(c(-1., 0.), 16).unwrap();
        let expect: Vec<f64> = (0..16).map(|k| -7.5 + k as f64).collect();
        assert!(cands.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(candidates(c(1., 0.), 4).unwrap(), vec![-2., -1., 0., 1.]);
        let cands = candidates(c(0.3, -2.0), 16).unwrap();
        assert!(cands.windows(2).all(|w| (w[1] - w[0] - 1.0).abs() < 1e-12));
        assert!(cands.iter().all(|&e| (-8.0..8.0).contains(&e)));
        assert!(candidates(c(0., 0.), 16).is_err());
    }

    #[test]
    fn likelihood_is_real_on_unit_circle() {
        let sf = random_stacked(8, 16, 4, 2);
        let cfg = crate::training::SystemConfig::reference(&crate::training::OFFSETS_FIG2);
        let poly = CostPolynomial::new(&sf, &cfg);
        for k in 0..50 {
            let v = poly.value(unit_phasor(k as f64 / 50.0));
            assert!(v.im.abs() < 1e-10 * v.norm().max(1.0), "{v}");
        }
    }

    #[test]
    fn trace_and_polynomial_forms_differ_by_constant() {
        let sf = random_stacked(12, 16, 4, 2);
        let cfg = crate::training::SystemConfig::reference(&crate::training::OFFSETS_FIG1);
        let offset = cfg.n_t as f64 * sf.c[0].re;
        for k in 0..20 {
            let e = -8.0 + 0.8 * k as f64;
            let diff = likelihood(&sf, e, &cfg) - likelihood_trace(&sf, e, &cfg);
            assert!((diff - offset).abs() < 1e-9 * offset, "{diff} vs {offset}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let sf = random_stacked(21, 16, 4, 1);
        let cfg = crate::training::SystemConfig::reference(&crate::training::OFFSETS_FIG1);
        let poly = CostPolynomial::new(&sf, &cfg);
        let z = unit_phasor(0.137);
        let h = 1e-6;
        let fd = (poly.value(z + h) - poly.value(z - h)) / (2.0 * h);
        let d = poly.derivative(z);
        assert!((fd - d).norm() < 1e-5 * d.norm(), "{fd} vs {d}");
    }

    #[test]
    fn ml_grid_rejects_bad_steps() {
        let sf = random_stacked(2, 16, 4, 1);
        let cfg = crate::training::SystemConfig::reference(&crate::training::OFFSETS_FIG1);
        assert!(estimate_ml_grid(&sf, &cfg, MlGrid { coarse: 0.0, fine: 1e-3 }).is_err());
    }

    #[test]
    fn wrap_keeps_range() {
        assert!((wrap_offset(8.0, 16) + 8.0).abs() < 1e-12);
        assert!((wrap_offset(-8.01, 16) - 7.99).abs() < 1e-12);
        assert!((wrap_offset(3.0, 16) - 3.0).abs() < 1e-12);
    }
}
