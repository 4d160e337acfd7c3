//! Complex-vector arithmetic, the unitary DFT and the seeded random source.
//!
//! The DFT is unitary: the forward transform is
//! `X[k] = N^{-1/2} sum_n x[n] exp(-j 2 pi k n / N)` and the inverse is its
//! conjugate transpose. Every other scale factor in the crate is explicit.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unitary DFT (or its inverse) of `x`.
pub fn dft(x: &[C64], inverse: bool) -> Vec<C64> {
    let n = x.len();
    assert!(n >= 1, "dft of an empty vector");
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    let mut buf = x.to_vec();
    fft.process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Direct O(N^2) evaluation of the unitary DFT. Kept as the oracle for [`dft`].
pub fn dft_direct(x: &[C64], inverse: bool) -> Vec<C64> {
    let n = x.len();
    assert!(n >= 1, "dft of an empty vector");
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(m, &v)| v * unit_phasor(sign * ((k * m) % n) as f64 / n as f64))
                .sum::<C64>()
                * scale
        })
        .collect()
}

/// `exp(j 2 pi cycles)`.
#[inline]
pub fn unit_phasor(cycles: f64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * cycles)
}

/// Entry `(k, n)` of the unitary `N x N` DFT matrix.
#[inline]
pub fn dft_matrix_entry(k: usize, n: usize, size: usize) -> C64 {
    unit_phasor(-(((k * n) % size) as f64) / size as f64) / (size as f64).sqrt()
}

/// Diagonal of `D(epsilon)`: element `n` is `exp(j 2 pi epsilon n / N)`.
pub fn phase_ramp(length: usize, epsilon: f64, n: usize) -> Vec<C64> {
    (0..length)
        .map(|i| unit_phasor(epsilon * i as f64 / n as f64))
        .collect()
}

/// Cyclic down-shift: `out[n] = x[(n - m) mod len]`.
pub fn cyclic_shift(x: &[C64], m: isize) -> Vec<C64> {
    let len = x.len();
    if len == 0 {
        return Vec::new();
    }
    let shift = m.rem_euclid(len as isize) as usize;
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&x[len - shift..]);
    out.extend_from_slice(&x[..len - shift]);
    out
}

pub fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// `sum_n a[n] * conj(b[n])`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `max|A - A^H| <= tol * max|A|`.
pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let diff = max_abs(&(m - m.adjoint()));
    diff <= tol * max_abs(m)
}

/// Deterministic random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto ChaCha's stream word, so
/// different ids give non-overlapping keystreams for the same seed.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on the open interval `(lo, hi)`.
    pub fn uniform_open(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let v = lo + (hi - lo) * self.uniform();
            if v > lo && v < hi {
                return v;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// CN(0, variance): real and imaginary parts i.i.d. N(0, variance / 2).
    pub fn complex_gaussian(&mut self, variance: f64) -> C64 {
        let s = (variance / 2.0).sqrt();
        C64::new(s * self.standard_normal(), s * self.standard_normal())
    }

    /// `exp(j phi)` with `phi` uniform on `[0, 2 pi)`.
    pub fn unit_phase(&mut self) -> C64 {
        unit_phasor(self.uniform())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }
}
