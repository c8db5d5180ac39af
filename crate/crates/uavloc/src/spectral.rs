//! Shared frequency-domain helpers: DFT conventions, fractional delay ramps,
//! and band-limited interpolation of circular sequences.
//!
//! Conventions used throughout the crate:
//! - `dft` is the plain forward transform (no scaling), `idft` carries the
//!   full 1/N factor, so `idft(dft(x)) == x`.
//! - Subcarrier/bin index `k` maps to the signed frequency `k` for
//!   `k < N/2` and `k - N` otherwise, which makes fractional delay ramps
//!   and band-limited interpolation symmetric around DC.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Plain forward DFT, no normalization.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(x.len()).process(&mut buf);
    buf
}

/// Inverse DFT with 1/N normalization.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_inverse(x.len()).process(&mut buf);
    let scale = 1.0 / x.len() as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Signed frequency of bin `k` in an `n`-point DFT.
#[inline]
pub fn signed_freq(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Multiply a spectrum in place by the phase ramp of a circular delay of
/// `delay_samples` (may be fractional or negative).
pub fn apply_delay_ramp(spectrum: &mut [Complex64], delay_samples: f64) {
    let n = spectrum.len();
    for (k, v) in spectrum.iter_mut().enumerate() {
        let phase = -2.0 * PI * signed_freq(k, n) * delay_samples / n as f64;
        *v *= Complex64::from_polar(1.0, phase);
    }
}

/// Band-limited (Dirichlet) interpolation of a circular sequence at the
/// fractional position `x`, evaluated from the sequence's spectrum.
pub fn interp_at(spectrum: &[Complex64], x: f64) -> Complex64 {
    let n = spectrum.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, s) in spectrum.iter().enumerate() {
        let phase = 2.0 * PI * signed_freq(k, n) * x / n as f64;
        acc += s * Complex64::from_polar(1.0, phase);
    }
    acc / n as f64
}

/// Locate the maximum of `|interp(x)|^2` inside `[lo, hi]` by golden-section
/// search. The bracket is assumed to contain a single local maximum.
///
/// Mirror-symmetric by construction: running the search on the reversed
/// sequence over `[-hi, -lo]` visits the negated probe points, so callers
/// relying on antisymmetric lags get bit-exact sign flips.
pub fn golden_peak(spectrum: &[Complex64], lo: f64, hi: f64, iters: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = lo;
    let mut b = hi;
    let mut c1 = b - INV_PHI * (b - a);
    let mut c2 = a + INV_PHI * (b - a);
    let mut f1 = interp_at(spectrum, c1).norm_sqr();
    let mut f2 = interp_at(spectrum, c2).norm_sqr();
    for _ in 0..iters {
        if f1 < f2 {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + INV_PHI * (b - a);
            f2 = interp_at(spectrum, c2).norm_sqr();
        } else {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - INV_PHI * (b - a);
            f1 = interp_at(spectrum, c1).norm_sqr();
        }
    }
    0.5 * (a + b)
}

/// Three-point parabolic vertex offset from the center sample, given the
/// sample values `(y_minus, y_center, y_plus)`. Returns 0 when the curvature
/// is numerically flat.
pub fn parabolic_offset(y_minus: f64, y_center: f64, y_plus: f64) -> f64 {
    let denom = y_minus - 2.0 * y_center + y_plus;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (y_minus - y_plus) / denom).clamp(-1.0, 1.0)
    }
}
