//! Companion sEMG-like traces for the modality comparison.
//!
//! Surface EMG tracks neural stimulation, which precedes the mechanical
//! actuation seen by the radio channels, so the traces are advanced by a
//! configurable lead. Electrode pickup smears pulses with an exponential
//! tail and carries a noise floor even at rest.

use crate::error::{Result, RmgError};
use crate::synth::gesture::MuscleId;
use crate::synth::layout::derive_seed;
use crate::synth::mixing::SynthConfig;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Exponential tail time constant in seconds.
pub const SEMG_TAIL_S: f64 = 0.3;
/// Weight of the tail response added on top of the direct pulse. The kernel
/// is `delta(t) + TAIL_GAIN * exp(-t/tau)/tau`, which widens every pulse
/// while leaving its peak within a few milliseconds of the input peak, so
/// the injected lead stays recoverable by the downstream timing analysis.
pub const SEMG_TAIL_GAIN: f64 = 0.6;
/// Noise floor std as a fraction of `noise_std`, present even at rest.
pub const SEMG_FLOOR_FACTOR: f64 = 1.5;

/// Two sEMG-like series: anterior (flexor-weighted) and posterior
/// (extensor-weighted), advanced by `lag_s` relative to the activations.
pub fn synth_semg(
    activations: &Array2<f64>,
    cfg: &SynthConfig,
    lag_s: f64,
) -> Result<[Vec<f64>; 2]> {
    if activations.nrows() != MuscleId::COUNT {
        return Err(RmgError::ShapeMismatch {
            expected: format!("{} activation rows", MuscleId::COUNT),
            got: format!("{}", activations.nrows()),
        });
    }
    if lag_s < 0.0 {
        return Err(RmgError::InvalidParam(format!(
            "sEMG lead must be nonnegative, got {lag_s}"
        )));
    }
    let n = activations.ncols();
    let lead = (lag_s * cfg.fs as f64).round() as usize;

    let mut anterior = vec![0.0f64; n];
    let mut posterior = vec![0.0f64; n];
    for m in MuscleId::ALL {
        let row = activations.row(m.index());
        let target = if m.is_flexor() {
            &mut anterior
        } else {
            &mut posterior
        };
        for k in 0..n {
            // Advance: the sEMG trace at k reflects the activation at k+lead.
            let v = if k + lead < n { row[k + lead] } else { 0.0 };
            target[k] += v;
        }
    }

    let alpha = (-1.0 / (SEMG_TAIL_S * cfg.fs as f64)).exp();
    let floor = cfg.noise_std * SEMG_FLOOR_FACTOR;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0x73_65_6d_67]));
    let normal = Normal::new(0.0, 1.0).unwrap();
    for series in [&mut anterior, &mut posterior] {
        let mut tail = 0.0f64;
        for v in series.iter_mut() {
            tail = alpha * tail + (1.0 - alpha) * *v;
            *v += SEMG_TAIL_GAIN * tail;
            if floor > 0.0 {
                *v += floor * normal.sample(&mut rng);
            }
        }
    }
    Ok([anterior, posterior])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gesture::{activation_matrix, gesture_catalog};

    fn quiet_cfg() -> SynthConfig {
        SynthConfig {
            noise_std: 0.0,
            ..SynthConfig::default()
        }
    }

    fn fwhm(x: &[f64], fs: usize) -> f64 {
        let (imax, &peak) = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let half = peak / 2.0;
        let mut left = imax;
        while left > 0 && x[left] > half {
            left -= 1;
        }
        let mut right = imax;
        while right + 1 < x.len() && x[right] > half {
            right += 1;
        }
        (right - left) as f64 / fs as f64
    }

    #[test]
    fn rest_is_pure_noise_at_configured_floor() {
        let cfg = SynthConfig {
            noise_std: 0.02,
            ..SynthConfig::default()
        };
        let acts = Array2::zeros((12, 5000));
        let [a, p] = synth_semg(&acts, &cfg, 0.183).unwrap();
        for series in [a, p] {
            let rms = (series.iter().map(|v| v * v).sum::<f64>() / series.len() as f64).sqrt();
            let floor = cfg.noise_std * SEMG_FLOOR_FACTOR;
            assert!(
                (rms - floor).abs() < 0.2 * floor,
                "rest RMS {rms} vs floor {floor}"
            );
        }
    }

    #[test]
    fn tail_widens_quick_pulses() {
        let cfg = quiet_cfg();
        let catalog = gesture_catalog();
        let p1 = &catalog[0];
        let acts = activation_matrix(p1, 1250, 250, 0.0).unwrap();
        let [_, posterior] = synth_semg(&acts, &cfg, 0.0).unwrap();
        // Posterior carries EPL's step-1 pulse.
        let input: Vec<f64> = acts.row(MuscleId::Epl.index()).to_vec();
        assert!(fwhm(&posterior, 250) > fwhm(&input, 250));
    }

    #[test]
    fn lead_advances_the_trace() {
        let cfg = quiet_cfg();
        let catalog = gesture_catalog();
        let acts = activation_matrix(&catalog[0], 1250, 250, 0.0).unwrap();
        let [_, p0] = synth_semg(&acts, &cfg, 0.0).unwrap();
        let [_, p_lead] = synth_semg(&acts, &cfg, 0.2).unwrap();
        let argmax = |x: &[f64]| {
            x.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let shift = argmax(&p0) as isize - argmax(&p_lead) as isize;
        assert_eq!(shift, (0.2 * 250.0) as isize);
    }

    #[test]
    fn negative_lead_rejected() {
        let acts = Array2::zeros((12, 10));
        assert!(synth_semg(&acts, &quiet_cfg(), -0.1).is_err());
    }
}
