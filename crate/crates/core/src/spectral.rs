//! Short-time Fourier analysis.
//!
//! Frames are indexed by window start: frame `d` covers samples
//! `[d*hop, d*hop + window_len)`. Only full windows are analysed (the tail is
//! dropped, nothing is padded) and only the one-sided bins `0..=window_len/2`
//! are kept, bin `k` corresponding to angular frequency `2*pi*k/window_len`.
//!
//! Start-indexing instead of centre-indexing multiplies every bin by the same
//! linear phase for both signals of a compared pair, so phase differences and
//! magnitudes are unaffected.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Magnitude below which a bin's phase is treated as undefined.
pub const PHASE_MAGNITUDE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowKind {
    /// Periodic (DFT-even) Blackman window.
    #[default]
    BlackmanPeriodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub window_kind: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { window_len: 64, hop: 16, window_kind: WindowKind::BlackmanPeriodic }
    }
}

impl StftConfig {
    pub fn new(window_len: usize, hop: usize) -> Result<Self> {
        let cfg = Self { window_len, hop, window_kind: WindowKind::BlackmanPeriodic };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 || !self.window_len.is_multiple_of(2) {
            return Err(invalid("window length must be even and at least 2"));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(invalid("hop must satisfy 0 < hop <= window length"));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// `floor((len - M)/H) + 1`, or 0 when the series is shorter than a window.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }

    /// Angular frequency (radians per sample) of bin `k`.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        TAU * k as f64 / self.window_len as f64
    }
}

/// `cos(2*pi*n/m)`, exact at multiples of a quarter period.
fn cos_turn(n: usize, m: usize) -> f64 {
    let n = n % m;
    if (4 * n).is_multiple_of(m) {
        return match 4 * n / m {
            0 => 1.0,
            1 | 3 => 0.0,
            _ => -1.0,
        };
    }
    // cos is even about m/2; folding makes the table exactly symmetric.
    libm::cos(TAU * n.min(m - n) as f64 / m as f64)
}

fn sin_turn(n: usize, m: usize) -> f64 {
    let n = n % m;
    if (4 * n).is_multiple_of(m) {
        return match 4 * n / m {
            1 => 1.0,
            3 => -1.0,
            _ => 0.0,
        };
    }
    libm::sin(TAU * n as f64 / m as f64)
}

/// Periodic Blackman window `0.42 - 0.5 cos(2 pi n/M) + 0.08 cos(4 pi n/M)`.
///
/// Evaluated as `(0.34 + 0.16 c^2) - 0.5 c` with `c = cos(2 pi n/M)`, which is
/// the same polynomial but returns exactly 0, 0.34 and 1 at the quarter points.
pub fn blackman_window(m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(invalid("window length must be at least 2"));
    }
    Ok((0..m)
        .map(|n| {
            let c = cos_turn(n, m);
            (0.34 + 0.16 * c * c) - 0.5 * c
        })
        .collect())
}

/// Direct `O(M^2)` DFT, `X[k] = sum_n x[n] exp(-i 2 pi k n / M)`.
///
/// Evaluates every twiddle from its unreduced angle; it shares no code with
/// [`StftPlan`] and serves as the reference the fast path is checked against.
pub fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let m = x.len() as f64;
    (0..x.len())
        .map(|k| {
            x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (n, &v)| {
                let angle = -2.0 * PI * (k as f64) * (n as f64) / m;
                acc + Complex64::new(v * libm::cos(angle), v * libm::sin(angle))
            })
        })
        .collect()
}

/// Complex one-sided STFT grid, `frames x bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStft {
    frames: usize,
    bins: usize,
    data: Vec<Complex64>,
}

impl ComplexStft {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.data[frame * self.bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn power(&self) -> Spectrogram {
        Spectrogram { frames: self.frames, bins: self.bins, data: self.data.iter().map(|c| c.norm_sqr()).collect() }
    }

    /// Principal-value phase in `(-pi, pi]` of entry `(frame, bin)`.
    pub fn phase_at(&self, frame: usize, bin: usize) -> Result<f64> {
        if frame >= self.frames || bin >= self.bins {
            return Err(invalid("frame or bin index out of range"));
        }
        principal_phase(self.get(frame, bin))
    }
}

/// Phase of `c` in `(-pi, pi]`; errors when `|c|` is below [`PHASE_MAGNITUDE_FLOOR`].
pub fn principal_phase(c: Complex64) -> Result<f64> {
    if c.norm() < PHASE_MAGNITUDE_FLOOR {
        return Err(Error::UndefinedPhase);
    }
    let a = libm::atan2(c.im, c.re);
    // atan2 yields -pi for a negative real part with a -0.0 imaginary part.
    Ok(if a <= -PI { PI } else { a })
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(a: f64) -> f64 {
    let mut w = libm::remainder(a, TAU);
    if w <= -PI {
        w += TAU;
    } else if w > PI {
        w -= TAU;
    }
    w
}

/// Power spectrogram `|STFT|^2`, `frames x bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: usize,
    bins: usize,
    data: Vec<f64>,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.data[frame * self.bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Per-bin sums over frames.
    pub fn bin_totals(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.bins];
        for d in 0..self.frames {
            for (o, v) in out.iter_mut().zip(self.frame(d)) {
                *o += v;
            }
        }
        out
    }
}

/// Precomputed window and twiddle table for one [`StftConfig`].
#[derive(Debug, Clone)]
pub struct StftPlan {
    cfg: StftConfig,
    window: Vec<f64>,
    // twiddle[j] = exp(-i 2 pi j / M)
    twiddle: Vec<Complex64>,
}

impl StftPlan {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.window_len;
        let window = blackman_window(m)?;
        let twiddle = (0..m).map(|j| Complex64::new(cos_turn(j, m), -sin_turn(j, m))).collect();
        Ok(Self { cfg, window, twiddle })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn stft(&self, x: &[f64]) -> Result<ComplexStft> {
        let m = self.cfg.window_len;
        if x.len() < m {
            return Err(Error::TooShort { len: x.len(), min: m });
        }
        let frames = self.cfg.frame_count(x.len());
        let bins = self.cfg.bins();
        let mut data = Vec::with_capacity(frames * bins);
        let mut windowed = alloc::vec![0.0; m];
        for d in 0..frames {
            let start = d * self.cfg.hop;
            for ((w, &xv), &wv) in windowed.iter_mut().zip(&x[start..start + m]).zip(&self.window) {
                *w = xv * wv;
            }
            for k in 0..bins {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut j = 0;
                for &v in &windowed {
                    acc += self.twiddle[j] * v;
                    j += k;
                    if j >= m {
                        j -= m;
                    }
                }
                data.push(acc);
            }
        }
        Ok(ComplexStft { frames, bins, data })
    }

    pub fn spectrogram(&self, x: &[f64]) -> Result<Spectrogram> {
        Ok(self.stft(x)?.power())
    }
}

pub fn stft(x: &[f64], cfg: &StftConfig) -> Result<ComplexStft> {
    StftPlan::new(*cfg)?.stft(x)
}

pub fn spectrogram(x: &[f64], cfg: &StftConfig) -> Result<Spectrogram> {
    StftPlan::new(*cfg)?.spectrogram(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn blackman_four_points_exact() {
        assert_eq!(blackman_window(4).unwrap(), vec![0.0, 0.34, 1.0, 0.34]);
    }

    #[test]
    fn blackman_peak_is_one() {
        for m in (2..=256).step_by(2) {
            assert_eq!(blackman_window(m).unwrap()[m / 2], 1.0, "M = {m}");
        }
    }

    #[test]
    fn blackman_sum() {
        let s: f64 = blackman_window(64).unwrap().iter().sum();
        assert!((s - 26.88).abs() < 1e-12, "{s}");
    }

    #[test]
    fn blackman_too_short() {
        assert!(blackman_window(1).is_err());
        assert!(blackman_window(0).is_err());
    }

    #[test]
    fn dft_impulse_and_shift() {
        let x = naive_dft(&[1.0, 0.0, 0.0, 0.0]);
        for c in &x {
            assert!(close(c.re, 1.0, 1e-15) && c.im.abs() < 1e-15);
        }
        let y = naive_dft(&[0.0, 1.0, 0.0, 0.0]);
        let want = [(1.0, 0.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 1.0)];
        for (c, (re, im)) in y.iter().zip(want) {
            assert!((c.re - re).abs() < 1e-15 && (c.im - im).abs() < 1e-15, "{c}");
        }
    }

    #[test]
    fn constant_input_bin_zero_is_window_sum() {
        let s = stft(&vec![1.0; 200], &StftConfig::default()).unwrap();
        for d in 0..s.frames() {
            let c = s.get(d, 0);
            assert!((c.re - 26.88).abs() < 1e-12 && c.im.abs() < 1e-12);
        }
    }

    #[test]
    fn zeros_give_zeros() {
        let sg = spectrogram(&vec![0.0; 130], &StftConfig::default()).unwrap();
        assert_eq!(sg.frames(), 5);
        assert!(sg.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_input_rejected() {
        match stft(&[0.0; 63], &StftConfig::default()) {
            Err(Error::TooShort { len: 63, min: 64 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::new(64, 0).is_err());
        assert!(StftConfig::new(64, 65).is_err());
        assert!(StftConfig::new(63, 16).is_err());
        assert!(StftConfig::new(64, 64).is_ok());
    }

    #[test]
    fn frame_count_formula() {
        let cfg = StftConfig::default();
        for t in 64..=(64 + 5 * 16) {
            let x = vec![0.5; t];
            assert_eq!(stft(&x, &cfg).unwrap().frames(), (t - 64) / 16 + 1);
        }
    }

    #[test]
    fn phase_conventions() {
        let p = |re, im| principal_phase(Complex64::new(re, im)).unwrap();
        assert_eq!(p(1.0, 0.0), 0.0);
        assert!((p(0.0, 1.0) - PI / 2.0).abs() < 1e-15);
        assert_eq!(p(-2.0, 0.0), PI);
        assert_eq!(p(-2.0, -0.0), PI);
        assert_eq!(principal_phase(Complex64::new(1e-13, 0.0)), Err(Error::UndefinedPhase));
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(TAU + 0.1) - 0.1).abs() < 1e-12);
        assert!((wrap_phase(-TAU - 0.1) + 0.1).abs() < 1e-12);
    }
}
