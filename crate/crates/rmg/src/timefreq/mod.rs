//! Time-frequency features: the five-spectrogram ensemble per window.
//!
//! Two STFT variants trade time against frequency resolution; three CWT
//! variants use different mother wavelets. Every series of a window yields
//! one plane per transform, min-max scaled to [0, 1] and resized to a
//! fixed 40 x 40 grid.

mod cwt;
mod stft;

pub use cwt::{
    cwt, cwt_complex, log_scales, pseudo_frequency, scale_for_frequency, wavelet_kernel, CwtPlan,
    Wavelet,
};
pub use stft::{hann, stft, stft_complex, stft_freq_axis, stft_full, stft_time_axis};

use crate::error::{Result, RmgError};
use crate::preprocess::{GestureWindow, SeriesView};
use crate::synth::GestureId;
use ndarray::{Array2, Array3, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// The five ensemble members.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum TransformId {
    StftA,
    StftB,
    CwtMorlet,
    CwtRicker,
    CwtGaus4,
}

impl TransformId {
    pub const ALL: [TransformId; 5] = [
        TransformId::StftA,
        TransformId::StftB,
        TransformId::CwtMorlet,
        TransformId::CwtRicker,
        TransformId::CwtGaus4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformId::StftA => "stft-a",
            TransformId::StftB => "stft-b",
            TransformId::CwtMorlet => "cwt-morlet",
            TransformId::CwtRicker => "cwt-ricker",
            TransformId::CwtGaus4 => "cwt-gaus4",
        }
    }

    pub fn parse(name: &str) -> Result<TransformId> {
        TransformId::ALL
            .into_iter()
            .find(|t| t.name() == name.to_ascii_lowercase())
            .ok_or_else(|| RmgError::InvalidParam(format!("unknown transform `{name}`")))
    }

    pub fn wavelet(self) -> Option<Wavelet> {
        match self {
            TransformId::CwtMorlet => Some(Wavelet::Morlet),
            TransformId::CwtRicker => Some(Wavelet::Ricker),
            TransformId::CwtGaus4 => Some(Wavelet::Gaus4),
            _ => None,
        }
    }
}

/// Ensemble parameters. Window lengths and wavelet choices are config so
/// alternates are one-line changes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub stft_a_win_s: f64,
    pub stft_a_hop_s: f64,
    pub stft_b_win_s: f64,
    pub stft_b_hop_s: f64,
    pub n_scales: usize,
    pub cwt_f_lo_hz: f64,
    pub cwt_f_hi_hz: f64,
    /// Decimation applied before the CWT. The series are band-limited to
    /// 5 Hz by preprocessing, so a stride of 5 keeps Nyquist margin 5x.
    pub cwt_decimate: usize,
    pub grid: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            stft_a_win_s: 0.5,
            stft_a_hop_s: 0.1,
            stft_b_win_s: 1.0,
            stft_b_hop_s: 0.2,
            n_scales: 16,
            cwt_f_lo_hz: 0.1,
            cwt_f_hi_hz: 5.0,
            cwt_decimate: 5,
            grid: 40,
        }
    }
}

/// One transform's stack of planes for a window.
#[derive(Clone, Debug)]
pub struct Spectrogram {
    pub transform: TransformId,
    /// `n_series x grid x grid`, values in [0, 1].
    pub planes: Array3<f32>,
    /// Pre-resize frequency axis of the real-series variant, in Hz.
    pub freq_axis: Vec<f64>,
    /// Pre-resize frame/shift times in seconds.
    pub time_axis: Vec<f64>,
}

/// The five spectrograms of one window plus its identity.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    pub label: GestureId,
    pub subject_id: u32,
    pub routine_id: u32,
    pub window_index: u32,
    pub spectrograms: Vec<Spectrogram>,
    /// `(transform, series)` pairs whose plane had no dynamic range and
    /// was emitted as zeros.
    pub degenerate_planes: Vec<(TransformId, usize)>,
}

impl FeatureSet {
    pub fn spectrogram(&self, t: TransformId) -> &Spectrogram {
        self.spectrograms
            .iter()
            .find(|s| s.transform == t)
            .expect("transform present")
    }
}

/// Bilinear resize with corner alignment: corners map to corners, constant
/// and affine planes are reproduced exactly, output stays within the
/// source value range.
pub fn resize_bilinear(src: ArrayView2<'_, f64>, h: usize, w: usize) -> Array2<f64> {
    let (sh, sw) = src.dim();
    assert!(sh >= 2 && sw >= 2, "resize source must be at least 2x2");
    assert!(h >= 1 && w >= 1);
    let mut out = Array2::zeros((h, w));
    let row_step = if h > 1 { (sh - 1) as f64 / (h - 1) as f64 } else { 0.0 };
    let col_step = if w > 1 { (sw - 1) as f64 / (w - 1) as f64 } else { 0.0 };
    for r in 0..h {
        let y = r as f64 * row_step;
        let y0 = (y.floor() as usize).min(sh - 2);
        let fy = y - y0 as f64;
        for c in 0..w {
            let x = c as f64 * col_step;
            let x0 = (x.floor() as usize).min(sw - 2);
            let fx = x - x0 as f64;
            let v00 = src[[y0, x0]];
            let v01 = src[[y0, x0 + 1]];
            let v10 = src[[y0 + 1, x0]];
            let v11 = src[[y0 + 1, x0 + 1]];
            out[[r, c]] = v00 * (1.0 - fy) * (1.0 - fx)
                + v01 * (1.0 - fy) * fx
                + v10 * fy * (1.0 - fx)
                + v11 * fy * fx;
        }
    }
    out
}

/// Min-max scale a plane to [0, 1]; degenerate planes become zeros.
fn minmax_scale(plane: &mut Array2<f64>) -> bool {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in plane.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    if !(range > 1e-12) {
        plane.fill(0.0);
        return false;
    }
    plane.mapv_inplace(|v| (v - lo) / range);
    true
}

fn decimate_real(x: ndarray::ArrayView1<'_, f64>, step: usize) -> Vec<f64> {
    x.iter().step_by(step).copied().collect()
}

fn decimate_complex(x: ndarray::ArrayView1<'_, Complex64>, step: usize) -> Vec<Complex64> {
    x.iter().step_by(step).copied().collect()
}

/// Shared transform plans for windows of one shape; build once, use from
/// many threads.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    fs: usize,
    cwt_fs: f64,
    plans: Vec<(Wavelet, CwtPlan)>,
    scales: Vec<Vec<f64>>,
}

impl FeatureExtractor {
    pub fn new(cfg: &FeatureConfig, fs: usize, n_samples: usize) -> Result<FeatureExtractor> {
        if cfg.n_scales < 8 {
            return Err(RmgError::InvalidParam(
                "CWT needs at least 8 scales covering the band".into(),
            ));
        }
        let dec = cfg.cwt_decimate.max(1);
        let cwt_fs = fs as f64 / dec as f64;
        let dec_len = n_samples.div_ceil(dec);
        let wavelets = [Wavelet::Morlet, Wavelet::Ricker, Wavelet::Gaus4];
        let mut plans = Vec::new();
        let mut scales = Vec::new();
        for w in wavelets {
            let s = log_scales(w, cfg.cwt_f_lo_hz, cfg.cwt_f_hi_hz, cfg.n_scales, cwt_fs);
            plans.push((w, CwtPlan::new(w, &s, dec_len)?));
            scales.push(s);
        }
        Ok(FeatureExtractor {
            cfg: cfg.clone(),
            fs,
            cwt_fs,
            plans,
            scales,
        })
    }

    fn stft_plane(&self, series: SeriesView<'_>, win_s: f64, hop_s: f64) -> Result<Array2<f64>> {
        match series {
            SeriesView::Real(x) => stft(x.as_slice().unwrap(), win_s, hop_s, self.fs),
            SeriesView::Complex(x) => {
                stft_complex(x.as_slice().unwrap(), win_s, hop_s, self.fs)
            }
        }
    }

    fn cwt_plane(&self, series: SeriesView<'_>, plan_idx: usize) -> Result<Array2<f64>> {
        let dec = self.cfg.cwt_decimate.max(1);
        let x: Vec<Complex64> = match series {
            SeriesView::Real(x) => decimate_real(x, dec)
                .into_iter()
                .map(|v| Complex64::new(v, 0.0))
                .collect(),
            SeriesView::Complex(x) => decimate_complex(x, dec),
        };
        self.plans[plan_idx].1.transform(&x)
    }

    /// The five-spectrogram ensemble for one window.
    pub fn extract(&self, window: &GestureWindow) -> Result<FeatureSet> {
        let g = self.cfg.grid;
        let n_series = window.n_series();
        let mut degenerate = Vec::new();
        let mut spectrograms = Vec::with_capacity(TransformId::ALL.len());
        for t in TransformId::ALL {
            let mut planes = Array3::zeros((n_series, g, g));
            for s in 0..n_series {
                let series = window.series(s);
                let mut plane = match t {
                    TransformId::StftA => {
                        self.stft_plane(series, self.cfg.stft_a_win_s, self.cfg.stft_a_hop_s)?
                    }
                    TransformId::StftB => {
                        self.stft_plane(series, self.cfg.stft_b_win_s, self.cfg.stft_b_hop_s)?
                    }
                    TransformId::CwtMorlet => self.cwt_plane(series, 0)?,
                    TransformId::CwtRicker => self.cwt_plane(series, 1)?,
                    TransformId::CwtGaus4 => self.cwt_plane(series, 2)?,
                };
                if !minmax_scale(&mut plane) {
                    degenerate.push((t, s));
                }
                let resized = resize_bilinear(plane.view(), g, g);
                for r in 0..g {
                    for c in 0..g {
                        planes[[s, r, c]] = resized[[r, c]] as f32;
                    }
                }
            }
            let (freq_axis, time_axis) = self.axes(t, window.n_samples());
            spectrograms.push(Spectrogram {
                transform: t,
                planes,
                freq_axis,
                time_axis,
            });
        }
        Ok(FeatureSet {
            label: window.label,
            subject_id: window.subject_id,
            routine_id: window.routine_id,
            window_index: window.window_index,
            spectrograms,
            degenerate_planes: degenerate,
        })
    }

    fn axes(&self, t: TransformId, n_samples: usize) -> (Vec<f64>, Vec<f64>) {
        match t {
            TransformId::StftA => (
                stft_freq_axis(self.cfg.stft_a_win_s, self.fs),
                stft_time_axis(n_samples, self.cfg.stft_a_win_s, self.cfg.stft_a_hop_s, self.fs),
            ),
            TransformId::StftB => (
                stft_freq_axis(self.cfg.stft_b_win_s, self.fs),
                stft_time_axis(n_samples, self.cfg.stft_b_win_s, self.cfg.stft_b_hop_s, self.fs),
            ),
            _ => {
                let idx = match t {
                    TransformId::CwtMorlet => 0,
                    TransformId::CwtRicker => 1,
                    _ => 2,
                };
                let w = self.plans[idx].0;
                let freqs = self.scales[idx]
                    .iter()
                    .map(|&s| pseudo_frequency(w, s, self.cwt_fs))
                    .collect();
                let dec = self.cfg.cwt_decimate.max(1);
                let n_dec = n_samples.div_ceil(dec);
                let times = (0..n_dec).map(|k| k as f64 / self.cwt_fs).collect();
                (freqs, times)
            }
        }
    }
}

/// One-shot ensemble extraction.
pub fn make_feature_sets(window: &GestureWindow, cfg: &FeatureConfig) -> Result<FeatureSet> {
    FeatureExtractor::new(cfg, window.fs, window.n_samples())?.extract(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{
        gesture_catalog, synth_routine, BasicGesture, GestureId, SensorLayout, SynthConfig, Tempo,
    };
    use ndarray::array;

    #[test]
    fn resize_preserves_constant_and_corners() {
        let plane = Array2::from_elem((7, 11), 3.0);
        let out = resize_bilinear(plane.view(), 40, 40);
        assert!(out.iter().all(|&v| (v - 3.0).abs() < 1e-12));

        let small = array![[0.0, 1.0], [1.0, 2.0]];
        let up = resize_bilinear(small.view(), 5, 5);
        assert_eq!(up[[0, 0]], 0.0);
        assert_eq!(up[[0, 4]], 1.0);
        assert_eq!(up[[4, 0]], 1.0);
        assert_eq!(up[[4, 4]], 2.0);
    }

    #[test]
    fn resize_reproduces_affine_planes() {
        let mut src = Array2::zeros((9, 13));
        for r in 0..9 {
            for c in 0..13 {
                src[[r, c]] = 2.0 * r as f64 - 0.7 * c as f64 + 1.0;
            }
        }
        let out = resize_bilinear(src.view(), 40, 40);
        for r in 0..40 {
            for c in 0..40 {
                let y = r as f64 * 8.0 / 39.0;
                let x = c as f64 * 12.0 / 39.0;
                let expect = 2.0 * y - 0.7 * x + 1.0;
                assert!((out[[r, c]] - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn resize_bounded_by_source_range() {
        let mut src = Array2::zeros((5, 5));
        for (k, v) in src.iter_mut().enumerate() {
            *v = ((k * 37) % 11) as f64;
        }
        let lo = src.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = resize_bilinear(src.view(), 17, 3);
        for &v in out.iter() {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    fn window_fixture() -> Vec<crate::preprocess::GestureWindow> {
        let gestures: Vec<GestureId> = vec![GestureId(0), GestureId(14), GestureId(22)];
        let rec = synth_routine(
            1,
            0,
            &gestures,
            &SensorLayout::nominal(),
            &SynthConfig::default(),
        )
        .unwrap();
        crate::preprocess::preprocess_pipeline(&rec).unwrap()
    }

    #[test]
    fn feature_set_shape_contract() {
        let wins = window_fixture();
        let fs = make_feature_sets(&wins[0], &FeatureConfig::default()).unwrap();
        assert_eq!(fs.spectrograms.len(), 5);
        for s in &fs.spectrograms {
            assert_eq!(s.planes.dim(), (48, 40, 40));
            assert!(s.planes.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert_eq!(fs.label, wins[0].label);
    }

    #[test]
    fn all_zero_window_gives_zero_planes() {
        let wins = window_fixture();
        let mut zero = wins[0].clone();
        zero.amp.fill(0.0);
        zero.phase.fill(0.0);
        zero.iq.fill(Complex64::default());
        let fs = make_feature_sets(&zero, &FeatureConfig::default()).unwrap();
        for s in &fs.spectrograms {
            assert!(s.planes.iter().all(|&v| v == 0.0));
        }
        // All planes flagged degenerate.
        assert_eq!(fs.degenerate_planes.len(), 5 * 48);
    }

    #[test]
    fn features_independent_of_label() {
        let wins = window_fixture();
        let mut relabeled = wins[0].clone();
        relabeled.label = GestureId(9);
        let a = make_feature_sets(&wins[0], &FeatureConfig::default()).unwrap();
        let b = make_feature_sets(&relabeled, &FeatureConfig::default()).unwrap();
        for (x, y) in a.spectrograms.iter().zip(b.spectrograms.iter()) {
            assert_eq!(x.planes, y.planes);
        }
    }

    #[test]
    fn quick_has_single_lobe_slow_has_plateau() {
        // Evaluated on the activation envelopes directly: a quick gesture
        // concentrates STFT-A time-marginal energy in one lobe, a slow
        // gesture spreads it over the 2 s hold.
        use crate::synth::activation_matrix;
        let catalog = gesture_catalog();
        let quick = catalog
            .iter()
            .find(|g| g.basic == BasicGesture::PointThumb && g.tempo == Tempo::Quick)
            .unwrap();
        let slow = catalog
            .iter()
            .find(|g| g.basic == BasicGesture::PointThumb && g.tempo == Tempo::Slow)
            .unwrap();
        let marginal = |spec: &crate::synth::GestureSpec, muscle: crate::synth::MuscleId| {
            let acts = activation_matrix(spec, 1250, 250, 0.0).unwrap();
            let row: Vec<f64> = acts.row(muscle.index()).to_vec();
            let s = stft(&row, 0.5, 0.1, 250).unwrap();
            (0..s.ncols())
                .map(|f| s.column(f).iter().map(|v| v * v).sum::<f64>())
                .collect::<Vec<f64>>()
        };
        let prominent_peaks = |m: &[f64]| {
            let max = m.iter().cloned().fold(0.0f64, f64::max);
            let mut count = 0;
            for i in 1..m.len() - 1 {
                if m[i] > 0.4 * max && m[i] >= m[i - 1] && m[i] > m[i + 1] {
                    count += 1;
                }
            }
            count
        };
        let width_above_half = |m: &[f64]| {
            let max = m.iter().cloned().fold(0.0f64, f64::max);
            m.iter().filter(|&&v| v > 0.5 * max).count()
        };
        let quick_marginal = marginal(quick, crate::synth::MuscleId::Epl);
        let slow_marginal = marginal(slow, crate::synth::MuscleId::Epl);
        assert_eq!(prominent_peaks(&quick_marginal), 1);
        // Slow holds EPL for 2 s: half-max support spans at least 1.5 s of
        // frames (hop 0.1 s), versus well under that for the quick pulse.
        assert!(width_above_half(&slow_marginal) as f64 * 0.1 > 1.5);
        assert!(width_above_half(&quick_marginal) as f64 * 0.1 < 1.0);
    }
}
