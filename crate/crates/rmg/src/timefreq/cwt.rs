//! Continuous wavelet transform magnitudes via FFT convolution.

use crate::error::{Result, RmgError};
use crate::timefreq::stft::{fft_in_place, ifft_in_place};
use ndarray::Array2;
use num_complex::Complex64;

/// Mother wavelets. Morlet is complex; Ricker (Mexican hat) and the 4th
/// derivative of a Gaussian are real.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Wavelet {
    Morlet,
    Ricker,
    Gaus4,
}

/// Morlet carrier frequency in radians.
const MORLET_OMEGA0: f64 = 5.0;
/// Dimensionless truncation radius; the Gaussian envelope is below 4e-6
/// beyond `|t| = 5`.
const SUPPORT_RADIUS: f64 = 5.0;

impl Wavelet {
    pub fn parse(name: &str) -> Result<Wavelet> {
        match name.to_ascii_lowercase().as_str() {
            "morlet" => Ok(Wavelet::Morlet),
            "ricker" | "mexh" => Ok(Wavelet::Ricker),
            "gaus4" => Ok(Wavelet::Gaus4),
            other => Err(RmgError::UnknownWavelet(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Wavelet::Morlet => "morlet",
            Wavelet::Ricker => "ricker",
            Wavelet::Gaus4 => "gaus4",
        }
    }

    /// Peak of the Fourier spectrum in cycles per unit of dimensionless
    /// time; divides into the scale to give pseudo-frequency.
    pub fn center_frequency(self) -> f64 {
        match self {
            Wavelet::Morlet => MORLET_OMEGA0 / std::f64::consts::TAU,
            Wavelet::Ricker => std::f64::consts::SQRT_2 / std::f64::consts::TAU,
            Wavelet::Gaus4 => 2.0 / std::f64::consts::TAU,
        }
    }

    /// Mother wavelet at dimensionless time `t`.
    pub fn eval(self, t: f64) -> Complex64 {
        let gauss = (-0.5 * t * t).exp();
        match self {
            Wavelet::Morlet => {
                let c = std::f64::consts::PI.powf(-0.25);
                Complex64::from_polar(c * gauss, MORLET_OMEGA0 * t)
            }
            Wavelet::Ricker => {
                let c = 2.0 / (3.0f64.sqrt() * std::f64::consts::PI.powf(0.25));
                Complex64::new(c * (1.0 - t * t) * gauss, 0.0)
            }
            Wavelet::Gaus4 => {
                // Hermite polynomial He4; the constant L2-normalizes
                // (integral of He4^2 exp(-t^2) dt = 105 sqrt(pi) / 16).
                let c = 4.0 / (105.0 * std::f64::consts::PI.sqrt()).sqrt();
                let t2 = t * t;
                Complex64::new(c * (t2 * t2 - 6.0 * t2 + 3.0) * gauss, 0.0)
            }
        }
    }
}

/// Sampled, L2-renormalized wavelet at `scale` (in samples):
/// `psi(k / scale) / sqrt(scale)` for `k` in `-L..=L`.
pub fn wavelet_kernel(wavelet: Wavelet, scale: f64, max_radius: usize) -> Vec<Complex64> {
    let radius = ((SUPPORT_RADIUS * scale).ceil() as usize).clamp(1, max_radius);
    let norm = scale.sqrt().recip();
    (-(radius as isize)..=radius as isize)
        .map(|k| wavelet.eval(k as f64 / scale) * norm)
        .collect()
}

/// Scales (in samples) for a target pseudo-frequency in Hz.
pub fn scale_for_frequency(wavelet: Wavelet, f_hz: f64, fs: f64) -> f64 {
    wavelet.center_frequency() * fs / f_hz
}

/// Pseudo-frequency in Hz of a scale given in samples.
pub fn pseudo_frequency(wavelet: Wavelet, scale: f64, fs: f64) -> f64 {
    wavelet.center_frequency() * fs / scale
}

/// Logarithmically spaced scales covering `f_lo..f_hi` Hz.
pub fn log_scales(wavelet: Wavelet, f_lo: f64, f_hi: f64, n: usize, fs: f64) -> Vec<f64> {
    assert!(n >= 2 && f_lo > 0.0 && f_lo < f_hi);
    let s_hi = scale_for_frequency(wavelet, f_lo, fs);
    let s_lo = scale_for_frequency(wavelet, f_hi, fs);
    let ratio = (s_hi / s_lo).powf(1.0 / (n - 1) as f64);
    // Largest scale (lowest frequency) first, so plane rows run from low
    // to high pseudo-frequency bottom-up like the STFT bins.
    (0..n).map(|k| s_hi / ratio.powi(k as i32)).collect()
}

/// Precomputed spectra for repeated transforms of equal-length series.
pub struct CwtPlan {
    n: usize,
    fft_len: usize,
    /// Per scale: (kernel radius, conjugated reversed kernel spectrum).
    kernels: Vec<(usize, Vec<Complex64>)>,
}

impl CwtPlan {
    pub fn new(wavelet: Wavelet, scales: &[f64], n: usize) -> Result<CwtPlan> {
        if n == 0 {
            return Err(RmgError::EmptySeries);
        }
        if scales.is_empty() {
            return Err(RmgError::InvalidParam("no CWT scales".into()));
        }
        let max_radius = n - 1;
        let max_l = scales
            .iter()
            .map(|&s| ((SUPPORT_RADIUS * s).ceil() as usize).clamp(1, max_radius))
            .max()
            .unwrap();
        let fft_len = (n + 2 * max_l).next_power_of_two();
        let kernels = scales
            .iter()
            .map(|&scale| {
                let kernel = wavelet_kernel(wavelet, scale, max_radius);
                let radius = kernel.len() / 2;
                // Correlation with conj(psi) == convolution with the
                // reversed conjugate kernel.
                let mut spec = vec![Complex64::default(); fft_len];
                for (j, v) in kernel.iter().rev().enumerate() {
                    spec[j] = v.conj();
                }
                fft_in_place(&mut spec);
                (radius, spec)
            })
            .collect();
        Ok(CwtPlan {
            n,
            fft_len,
            kernels,
        })
    }

    /// Transform one series; rows follow the plan's scale order.
    pub fn transform(&self, x: &[Complex64]) -> Result<Array2<f64>> {
        if x.len() != self.n {
            return Err(RmgError::ShapeMismatch {
                expected: format!("{} samples", self.n),
                got: format!("{}", x.len()),
            });
        }
        let mut xspec = vec![Complex64::default(); self.fft_len];
        xspec[..self.n].copy_from_slice(x);
        fft_in_place(&mut xspec);
        let mut out = Array2::zeros((self.kernels.len(), self.n));
        let inv = 1.0 / self.fft_len as f64;
        let mut buf = vec![Complex64::default(); self.fft_len];
        for (row, (radius, kspec)) in self.kernels.iter().enumerate() {
            for (b, (xs, ks)) in buf.iter_mut().zip(xspec.iter().zip(kspec.iter())) {
                *b = xs * ks;
            }
            ifft_in_place(&mut buf);
            for b in 0..self.n {
                out[[row, b]] = buf[b + radius].norm() * inv;
            }
        }
        Ok(out)
    }
}

/// Magnitude CWT of a real series on the given scales (samples).
pub fn cwt(x: &[f64], wavelet: Wavelet, scales: &[f64], _fs: f64) -> Result<Array2<f64>> {
    let complex: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    cwt_complex(&complex, wavelet, scales, _fs)
}

/// Magnitude CWT of a complex series.
pub fn cwt_complex(
    x: &[Complex64],
    wavelet: Wavelet,
    scales: &[f64],
    _fs: f64,
) -> Result<Array2<f64>> {
    if x.is_empty() {
        return Err(RmgError::EmptySeries);
    }
    CwtPlan::new(wavelet, scales, x.len())?.transform(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_wavelet_rejected() {
        assert!(matches!(
            Wavelet::parse("daub4"),
            Err(RmgError::UnknownWavelet(_))
        ));
        assert_eq!(Wavelet::parse("Morlet").unwrap(), Wavelet::Morlet);
    }

    #[test]
    fn zero_input_zero_output() {
        let x = vec![0.0; 200];
        let scales = log_scales(Wavelet::Ricker, 0.5, 5.0, 8, 50.0);
        let w = cwt(&x, Wavelet::Ricker, &scales, 50.0).unwrap();
        assert_eq!(w.nrows(), 8);
        assert!(w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_reproduces_reversed_wavelet() {
        // Convolving a unit impulse leaves the (reversed, renormalized)
        // wavelet itself; magnitudes are compared against an independent
        // reconstruction from the closed-form formula.
        let n = 257;
        let center = 128usize;
        let mut x = vec![0.0; n];
        x[center] = 1.0;
        let scales = [4.0, 9.5, 17.0];
        let w = cwt(&x, Wavelet::Ricker, &scales, 50.0).unwrap();
        let c = 2.0 / (3.0f64.sqrt() * std::f64::consts::PI.powf(0.25));
        for (row, &scale) in scales.iter().enumerate() {
            for b in 0..n {
                // W[b] = |psi((center - b)/scale)| / sqrt(scale).
                let t = (center as f64 - b as f64) / scale;
                let expect = if t.abs()
                    <= ((5.0 * scale).ceil().min((n - 1) as f64)) / scale
                {
                    (c * (1.0 - t * t) * (-0.5 * t * t).exp() / scale.sqrt()).abs()
                } else {
                    0.0
                };
                assert!(
                    (w[[row, b]] - expect).abs() < 1e-9,
                    "scale {scale} sample {b}: {} vs {expect}",
                    w[[row, b]]
                );
            }
        }
    }

    #[test]
    fn sinusoid_max_energy_scale_matches_pseudo_frequency() {
        let fs = 50.0;
        let n = 1000;
        let x: Vec<f64> = (0..n)
            .map(|k| (std::f64::consts::TAU * 1.0 * k as f64 / fs).sin())
            .collect();
        for wavelet in [Wavelet::Morlet, Wavelet::Ricker, Wavelet::Gaus4] {
            let scales = log_scales(wavelet, 0.1, 5.0, 48, fs);
            let w = cwt(&x, wavelet, &scales, fs).unwrap();
            // Interior energy per scale, away from cone-of-influence edges.
            let (best, _) = (0..scales.len())
                .map(|r| {
                    let e: f64 = (n / 4..3 * n / 4).map(|b| w[[r, b]] * w[[r, b]]).sum();
                    (r, e)
                })
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|(r, e)| (r, e))
                .unwrap();
            let f = pseudo_frequency(wavelet, scales[best], fs);
            assert!(
                (0.8..=1.25).contains(&f),
                "{}: best pseudo-frequency {f}",
                wavelet.name()
            );
        }
    }

    #[test]
    fn magnitude_invariant_to_sign_flip() {
        let x: Vec<f64> = (0..300).map(|k| (k as f64 * 0.17).sin()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let scales = log_scales(Wavelet::Morlet, 0.5, 5.0, 8, 50.0);
        let a = cwt(&x, Wavelet::Morlet, &scales, 50.0).unwrap();
        let b = cwt(&neg, Wavelet::Morlet, &scales, 50.0).unwrap();
        for (p, q) in a.iter().zip(b.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_grid_covers_band() {
        let scales = log_scales(Wavelet::Morlet, 0.1, 5.0, 16, 50.0);
        assert_eq!(scales.len(), 16);
        let f_first = pseudo_frequency(Wavelet::Morlet, scales[0], 50.0);
        let f_last = pseudo_frequency(Wavelet::Morlet, scales[15], 50.0);
        assert!((f_first - 0.1).abs() < 1e-9);
        assert!((f_last - 5.0).abs() < 1e-9);
        // Monotone increasing frequency along rows.
        for w in scales.windows(2) {
            assert!(w[1] < w[0]);
        }
    }
}
