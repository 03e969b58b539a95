//! Short-time Fourier transform magnitudes.

use crate::error::{Result, RmgError};
use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static FFT_CACHE: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

/// Forward FFT of `buf` in place, with per-thread plan caching.
pub fn fft_in_place(buf: &mut [Complex64]) {
    let len = buf.len();
    let fft = FFT_CACHE.with(|c| {
        c.borrow_mut()
            .entry((len, true))
            .or_insert_with(|| FftPlanner::new().plan_fft_forward(len))
            .clone()
    });
    fft.process(buf);
}

/// Inverse FFT of `buf` in place (unnormalized; caller divides by length).
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let len = buf.len();
    let fft = FFT_CACHE.with(|c| {
        c.borrow_mut()
            .entry((len, false))
            .or_insert_with(|| FftPlanner::new().plan_fft_inverse(len))
            .clone()
    });
    fft.process(buf);
}

/// Symmetric Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| 0.5 * (1.0 - (std::f64::consts::TAU * k as f64 / (n - 1) as f64).cos()))
        .collect()
}

fn frame_params(len: usize, win_s: f64, hop_s: f64, fs: usize) -> Result<(usize, usize, usize)> {
    let win = (win_s * fs as f64).round() as usize;
    let hop = (hop_s * fs as f64).round() as usize;
    if win < 4 || hop == 0 || hop > win {
        return Err(RmgError::InvalidParam(format!(
            "stft window {win} / hop {hop} samples"
        )));
    }
    if win > len {
        return Err(RmgError::WindowTooLong { win, len });
    }
    let frames = (len - win) / hop + 1;
    Ok((win, hop, frames))
}

/// Magnitude STFT of a real series: rows are the `win/2 + 1` nonnegative
/// frequency bins, columns the frames.
pub fn stft(x: &[f64], win_s: f64, hop_s: f64, fs: usize) -> Result<Array2<f64>> {
    let (win, hop, frames) = frame_params(x.len(), win_s, hop_s, fs)?;
    let window = hann(win);
    let bins = win / 2 + 1;
    let mut out = Array2::zeros((bins, frames));
    let mut buf = vec![Complex64::default(); win];
    for f in 0..frames {
        let start = f * hop;
        for k in 0..win {
            buf[k] = Complex64::new(x[start + k] * window[k], 0.0);
        }
        fft_in_place(&mut buf);
        for b in 0..bins {
            out[[b, f]] = buf[b].norm();
        }
    }
    Ok(out)
}

/// Magnitude STFT of a complex series: all `win` bins, fftshifted so the
/// frequency axis runs from `-fs/2` to `+fs/2`.
pub fn stft_complex(x: &[Complex64], win_s: f64, hop_s: f64, fs: usize) -> Result<Array2<f64>> {
    let (win, hop, frames) = frame_params(x.len(), win_s, hop_s, fs)?;
    let window = hann(win);
    let mut out = Array2::zeros((win, frames));
    let half = win.div_ceil(2);
    let mut buf = vec![Complex64::default(); win];
    for f in 0..frames {
        let start = f * hop;
        for k in 0..win {
            buf[k] = x[start + k] * window[k];
        }
        fft_in_place(&mut buf);
        for b in 0..win {
            // fftshift: negative bins first.
            let row = (b + win - half) % win;
            out[[row, f]] = buf[b].norm();
        }
    }
    Ok(out)
}

/// Full-bin magnitude STFT of a real series, without the half-spectrum
/// fold; used by energy-conservation checks.
pub fn stft_full(x: &[f64], win_s: f64, hop_s: f64, fs: usize) -> Result<Array2<f64>> {
    let complex: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    stft_complex(&complex, win_s, hop_s, fs)
}

/// Frequency axis of the real-series STFT, in Hz.
pub fn stft_freq_axis(win_s: f64, fs: usize) -> Vec<f64> {
    let win = (win_s * fs as f64).round() as usize;
    let bins = win / 2 + 1;
    (0..bins).map(|b| b as f64 * fs as f64 / win as f64).collect()
}

/// Frame-center time axis in seconds.
pub fn stft_time_axis(len: usize, win_s: f64, hop_s: f64, fs: usize) -> Vec<f64> {
    let win = (win_s * fs as f64).round() as usize;
    let hop = (hop_s * fs as f64).round() as usize;
    let frames = if len >= win { (len - win) / hop + 1 } else { 0 };
    (0..frames)
        .map(|f| (f * hop + win / 2) as f64 / fs as f64)
        .collect()
}
