//! Mixing of muscle activations into 16-channel complex baseband, and the
//! routine/dataset generators built on it.

use crate::error::{Result, RmgError};
use crate::synth::gesture::{
    activation_matrix, gesture_catalog, GestureId, GestureSpec, MuscleId, NUM_GESTURES, WINDOW_S,
};
use crate::synth::layout::{derive_seed, seeded_uniform, SensorLayout, NUM_CHANNELS, NUM_UNITS};
use ndarray::Array2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Generator settings. `f_rf_hz` is carried as metadata only; the baseband
/// model never uses it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub fs: usize,
    pub t_win_s: f64,
    /// Std of the complex Gaussian noise added per quadrature.
    pub noise_std: f64,
    /// Direct amplitude multiplier on the activations.
    pub subject_scale: f64,
    /// Std of the per-window onset jitter in seconds.
    pub timing_jitter_s: f64,
    /// Quadratic mixing coefficient.
    pub nonlin_beta: f64,
    pub seed: u64,
    pub f_rf_hz: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            fs: 250,
            t_win_s: WINDOW_S,
            noise_std: 0.02,
            subject_scale: 1.0,
            timing_jitter_s: 0.15,
            nonlin_beta: 0.3,
            seed: 42,
            f_rf_hz: 9.0e8,
        }
    }
}

impl SynthConfig {
    pub fn window_samples(&self) -> usize {
        let n = self.fs as f64 * self.t_win_s;
        assert!(
            (n - n.round()).abs() < 1e-9,
            "fs * t_win_s must be an integer"
        );
        n.round() as usize
    }
}

/// Spread of the per-subject amplitude factor.
pub const SUBJECT_SCALE_RANGE: (f64, f64) = (0.7, 1.3);
/// Coupling jitter between subjects.
pub const SUBJECT_COUPLING_SIGMA: f64 = 0.06;
/// Coupling jitter between routines of the same subject (hardware restarts
/// and small armband adjustments between sessions).
pub const ROUTINE_COUPLING_SIGMA: f64 = 0.035;
/// Gain spread between routines.
pub const ROUTINE_GAIN_RANGE: (f64, f64) = (0.9, 1.1);

/// One labeled span inside a recording.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub start_sample: usize,
    pub gesture: GestureId,
    pub routine_id: u32,
    pub subject_id: u32,
}

/// Multi-channel complex baseband, the synthetic stand-in for SDR output.
/// Channel `(tx i, rx j)` lives at index `i * 4 + j`.
#[derive(Clone, Debug)]
pub struct RawRecording {
    pub fs: usize,
    pub channels: Vec<Vec<Complex64>>,
    pub annotations: Vec<Annotation>,
}

impl RawRecording {
    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn channel_index(tx: usize, rx: usize) -> usize {
        debug_assert!(tx < NUM_UNITS && rx < NUM_UNITS);
        tx * NUM_UNITS + rx
    }

    pub fn subject_id(&self) -> Option<u32> {
        self.annotations.first().map(|a| a.subject_id)
    }

    pub fn routine_id(&self) -> Option<u32> {
        self.annotations.first().map(|a| a.routine_id)
    }
}

/// Mix a 12 x n activation matrix into the 16 complex channels.
///
/// Channel `(i, j)` is the per-muscle bilinear coupling term with the
/// muscle's path phase, plus a quadratic cross term whose transmit-side
/// composite carries the phases. The quadratic term makes `(i, j)` and
/// `(j, i)` genuinely different series, mirroring the nonreciprocity of
/// near-field coupling through dispersive tissue.
pub fn mix_channels(
    activations: &Array2<f64>,
    layout: &SensorLayout,
    cfg: &SynthConfig,
) -> Result<RawRecording> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0x6d6978]));
    mix_channels_with_rng(activations, layout, cfg, &mut rng, Vec::new())
}

pub(crate) fn mix_channels_with_rng(
    activations: &Array2<f64>,
    layout: &SensorLayout,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    annotations: Vec<Annotation>,
) -> Result<RawRecording> {
    if activations.nrows() != MuscleId::COUNT {
        return Err(RmgError::ShapeMismatch {
            expected: format!("{} activation rows", MuscleId::COUNT),
            got: format!("{}", activations.nrows()),
        });
    }
    let n = activations.ncols();
    let phases: Vec<Complex64> = layout
        .phase_offsets
        .iter()
        .map(|&p| Complex64::from_polar(1.0, p))
        .collect();

    let mut channels = vec![vec![Complex64::default(); n]; NUM_CHANNELS];
    let scale = cfg.subject_scale;
    for t in 0..n {
        // Per-unit composites of the scaled activations.
        let mut real_comp = [0.0f64; NUM_UNITS];
        let mut phased_comp = [Complex64::default(); NUM_UNITS];
        let mut phased_act = [Complex64::default(); 12];
        for m in 0..MuscleId::COUNT {
            let a = scale * activations[[m, t]];
            phased_act[m] = phases[m] * a;
            for u in 0..NUM_UNITS {
                let c = layout.coupling[[u, m]];
                real_comp[u] += c * a;
                phased_comp[u] += phases[m] * (c * a);
            }
        }
        for i in 0..NUM_UNITS {
            for j in 0..NUM_UNITS {
                let mut v = Complex64::default();
                for m in 0..MuscleId::COUNT {
                    v += phased_act[m] * (layout.coupling[[i, m]] * layout.coupling[[j, m]]);
                }
                v += cfg.nonlin_beta * phased_comp[i] * real_comp[j];
                channels[RawRecording::channel_index(i, j)][t] = v;
            }
        }
    }
    if cfg.noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_std).unwrap();
        for ch in channels.iter_mut() {
            for v in ch.iter_mut() {
                v.re += normal.sample(rng);
                v.im += normal.sample(rng);
            }
        }
    }
    Ok(RawRecording {
        fs: cfg.fs,
        channels,
        annotations,
    })
}

/// Generate one recording of back-to-back 5 s gesture windows.
///
/// Subject identity fixes the amplitude scale and a coupling perturbation;
/// the routine adds its own smaller gain and coupling variation plus
/// per-window onset jitter. Everything derives from `cfg.seed`.
pub fn synth_routine(
    subject_id: u32,
    routine_id: u32,
    gestures: &[GestureId],
    layout: &SensorLayout,
    cfg: &SynthConfig,
) -> Result<RawRecording> {
    if gestures.is_empty() {
        return Err(RmgError::EmptySequence);
    }
    let catalog = gesture_catalog();
    let win = cfg.window_samples();
    let n = win * gestures.len();

    let subject_seed = derive_seed(cfg.seed, &[1, subject_id as u64]);
    let subject_scale = seeded_uniform(subject_seed, SUBJECT_SCALE_RANGE.0, SUBJECT_SCALE_RANGE.1);
    let subject_layout = layout.perturbed(SUBJECT_COUPLING_SIGMA, subject_seed);

    let routine_seed = derive_seed(cfg.seed, &[2, subject_id as u64, routine_id as u64]);
    let routine_gain = seeded_uniform(
        derive_seed(routine_seed, &[0]),
        ROUTINE_GAIN_RANGE.0,
        ROUTINE_GAIN_RANGE.1,
    );
    let routine_layout =
        subject_layout.perturbed(ROUTINE_COUPLING_SIGMA, derive_seed(routine_seed, &[1]));

    let mut jitter_rng = ChaCha8Rng::seed_from_u64(derive_seed(routine_seed, &[2]));
    let jitter_dist = Normal::new(0.0, cfg.timing_jitter_s).unwrap();

    let mut acts = Array2::zeros((MuscleId::COUNT, n));
    let mut annotations = Vec::with_capacity(gestures.len());
    for (w, gid) in gestures.iter().enumerate() {
        let spec: &GestureSpec = &catalog[gid.index()];
        let jitter = jitter_dist.sample(&mut jitter_rng);
        let amp = subject_scale * routine_gain;
        let win_acts = activation_matrix(spec, win, cfg.fs, jitter)?;
        acts.slice_mut(ndarray::s![.., w * win..(w + 1) * win])
            .assign(&(win_acts * amp));
        annotations.push(Annotation {
            start_sample: w * win,
            gesture: *gid,
            routine_id,
            subject_id,
        });
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(routine_seed, &[3]));
    // Subject amplitude is already folded into the activations.
    let mix_cfg = SynthConfig {
        subject_scale: 1.0,
        ..cfg.clone()
    };
    mix_channels_with_rng(&acts, &routine_layout, &mix_cfg, &mut noise_rng, annotations)
}

/// Gestures per recorded routine (about five minutes of windows).
pub const WINDOWS_PER_ROUTINE: usize = 69;

/// Build the gesture sequences for one subject: `reps` repetitions of each
/// of the 23 gestures, shuffled and chunked into routines.
pub fn subject_sequences(subject_id: u32, reps: usize, seed: u64) -> Vec<Vec<GestureId>> {
    let mut all: Vec<GestureId> = (0..NUM_GESTURES)
        .flat_map(|g| std::iter::repeat_n(GestureId(g as u8), reps))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3, subject_id as u64]));
    all.shuffle(&mut rng);
    all.chunks(WINDOWS_PER_ROUTINE)
        .map(<[GestureId]>::to_vec)
        .collect()
}

/// Generate a whole multi-subject dataset; one recording per routine.
/// Subject ids run from 1 to `n_subjects`.
pub fn synth_dataset(
    n_subjects: usize,
    reps: usize,
    layout: &SensorLayout,
    cfg: &SynthConfig,
) -> Result<Vec<RawRecording>> {
    let mut recordings = Vec::new();
    for s in 1..=n_subjects as u32 {
        recordings.extend(synth_subject(s, reps, layout, cfg)?);
    }
    Ok(recordings)
}

/// All routines of a single subject.
pub fn synth_subject(
    subject_id: u32,
    reps: usize,
    layout: &SensorLayout,
    cfg: &SynthConfig,
) -> Result<Vec<RawRecording>> {
    use rayon::prelude::*;
    let sequences = subject_sequences(subject_id, reps, cfg.seed);
    sequences
        .par_iter()
        .enumerate()
        .map(|(r, seq)| synth_routine(subject_id, r as u32, seq, layout, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gesture::{gesture_catalog, BasicGesture, Tempo};

    fn quiet_cfg() -> SynthConfig {
        SynthConfig {
            noise_std: 0.0,
            nonlin_beta: 0.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn zero_activations_zero_output() {
        let acts = Array2::zeros((12, 100));
        let rec = mix_channels(&acts, &SensorLayout::nominal(), &quiet_cfg()).unwrap();
        assert_eq!(rec.channels.len(), 16);
        for ch in &rec.channels {
            assert!(ch.iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn single_muscle_closed_form() {
        let layout = SensorLayout::nominal();
        let cfg = quiet_cfg();
        let m = MuscleId::Epl.index();
        let mut acts = Array2::zeros((12, 50));
        for t in 0..50 {
            acts[[m, t]] = 0.01 * t as f64;
        }
        let rec = mix_channels(&acts, &layout, &cfg).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let ch = &rec.channels[RawRecording::channel_index(i, j)];
                for t in 0..50 {
                    let expect = layout.coupling[[i, m]] * layout.coupling[[j, m]] * acts[[m, t]];
                    assert!(
                        (ch[t].norm() - expect).abs() < 1e-12,
                        "channel ({i},{j}) at t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn linearity_without_quadratic_term() {
        let layout = SensorLayout::nominal();
        let cfg = quiet_cfg();
        let mut a = Array2::zeros((12, 40));
        let mut b = Array2::zeros((12, 40));
        for t in 0..40 {
            a[[MuscleId::Fdp.index(), t]] = (t as f64 * 0.1).sin().abs();
            b[[MuscleId::Ecu.index(), t]] = (t as f64 * 0.07).cos().abs();
        }
        let ra = mix_channels(&a, &layout, &cfg).unwrap();
        let rb = mix_channels(&b, &layout, &cfg).unwrap();
        let rab = mix_channels(&(&a + &b), &layout, &cfg).unwrap();
        for c in 0..16 {
            for t in 0..40 {
                let sum = ra.channels[c][t] + rb.channels[c][t];
                assert!((rab.channels[c][t] - sum).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn coupling_scale_squares_linear_term() {
        let layout = SensorLayout::nominal();
        let cfg = quiet_cfg();
        let mut acts = Array2::zeros((12, 10));
        acts[[MuscleId::Fds.index(), 5]] = 1.0;
        let r1 = mix_channels(&acts, &layout, &cfg).unwrap();
        let r2 = mix_channels(&acts, &layout.scaled(2.0), &cfg).unwrap();
        for c in 0..16 {
            assert!((r2.channels[c][5] - 4.0 * r1.channels[c][5]).norm() < 1e-12);
        }
    }

    #[test]
    fn cross_channels_differ_under_distinct_phases() {
        let layout = SensorLayout::nominal();
        let cfg = SynthConfig {
            noise_std: 0.0,
            ..SynthConfig::default()
        };
        // Two muscles active so the quadratic cross term sees distinct phases.
        let mut acts = Array2::zeros((12, 60));
        for t in 0..60 {
            acts[[MuscleId::Epl.index(), t]] = 0.8;
            acts[[MuscleId::Fcu.index(), t]] = 0.5 + 0.005 * t as f64;
        }
        let rec = mix_channels(&acts, &layout, &cfg).unwrap();
        let c12 = &rec.channels[RawRecording::channel_index(0, 1)];
        let c21 = &rec.channels[RawRecording::channel_index(1, 0)];
        let diff: f64 = c12
            .iter()
            .zip(c21.iter())
            .map(|(a, b)| (a - b).norm())
            .sum();
        assert!(diff > 1e-6, "cross channels should not be reciprocal");
    }

    #[test]
    fn deep_muscles_remain_visible_with_superficial_zeroed() {
        use crate::synth::gesture::MuscleLayer;
        let layout = SensorLayout::nominal();
        let cfg = SynthConfig {
            noise_std: 0.0,
            ..SynthConfig::default()
        };
        let catalog = gesture_catalog();
        let grasp = catalog
            .iter()
            .find(|g| g.basic == BasicGesture::Grasp && g.tempo == Tempo::Quick)
            .unwrap();
        let mut acts = activation_matrix(grasp, 1250, 250, 0.0).unwrap();
        for m in MuscleId::ALL {
            if m.layer() == MuscleLayer::Superficial {
                acts.row_mut(m.index()).fill(0.0);
            }
        }
        let rec = mix_channels(&acts, &layout, &cfg).unwrap();
        let energy: f64 = rec
            .channels
            .iter()
            .flat_map(|ch| ch.iter())
            .map(|v| v.norm_sqr())
            .sum();
        assert!(energy > 1.0, "deep couplings should carry energy: {energy}");
    }

    #[test]
    fn wrong_activation_shape_rejected() {
        let acts = Array2::zeros((11, 10));
        let err = mix_channels(&acts, &SensorLayout::nominal(), &quiet_cfg());
        assert!(matches!(err, Err(RmgError::ShapeMismatch { .. })));
    }

    #[test]
    fn empty_sequence_rejected() {
        let err = synth_routine(
            1,
            0,
            &[],
            &SensorLayout::nominal(),
            &SynthConfig::default(),
        );
        assert!(matches!(err, Err(RmgError::EmptySequence)));
    }

    #[test]
    fn routine_length_and_annotations() {
        let gestures: Vec<GestureId> = (0..60).map(|i| GestureId((i % 23) as u8)).collect();
        let cfg = SynthConfig::default();
        let rec = synth_routine(1, 0, &gestures, &SensorLayout::nominal(), &cfg).unwrap();
        assert_eq!(rec.n_samples(), 60 * 1250);
        assert_eq!(rec.annotations.len(), 60);
        for (w, a) in rec.annotations.iter().enumerate() {
            assert_eq!(a.start_sample, w * 1250);
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let gestures: Vec<GestureId> = (0..8).map(|i| GestureId(i as u8)).collect();
        let cfg = SynthConfig::default();
        let a = synth_routine(2, 1, &gestures, &SensorLayout::nominal(), &cfg).unwrap();
        let b = synth_routine(2, 1, &gestures, &SensorLayout::nominal(), &cfg).unwrap();
        for c in 0..16 {
            assert_eq!(a.channels[c], b.channels[c]);
        }
        let cfg2 = SynthConfig {
            seed: 43,
            ..SynthConfig::default()
        };
        let c = synth_routine(2, 1, &gestures, &SensorLayout::nominal(), &cfg2).unwrap();
        assert_ne!(a.channels[0], c.channels[0]);
    }

    #[test]
    fn dataset_windows_per_subject_in_range() {
        // 23 gestures x 30 reps = 690 windows, inside the 700 +/- band the
        // protocol describes per subject.
        let seqs = subject_sequences(1, 30, 42);
        let total: usize = seqs.iter().map(Vec::len).sum();
        assert_eq!(total, 690);
        assert!((600..=800).contains(&total));
        assert_eq!(seqs.len(), 10);
        for s in &seqs {
            assert!(s.len() <= WINDOWS_PER_ROUTINE);
        }
    }
}
