//! Preprocessing: from raw 16-channel complex baseband to labeled
//! 48-series gesture windows.
//!
//! The chain is fixed: band-pass (0.1-5 Hz) -> normalize (mean 0, std 1,
//! computed over the full routine) -> segment into 5 s windows -> annotate
//! -> detrend each window row. Each physical channel contributes an
//! amplitude series, an unwrapped phase series, and the complex series
//! itself (processed per quadrature), 48 series in all.

mod filter;

pub use filter::{bandpass, bandpass_complex, BandpassFilter, Biquad};

use crate::error::{Result, RmgError};
use crate::synth::{Annotation, GestureId, RawRecording, NUM_CHANNELS, WINDOW_S};
use ndarray::Array2;
use num_complex::Complex64;

pub const BAND_LO_HZ: f64 = 0.1;
pub const BAND_HI_HZ: f64 = 5.0;

/// The augmented per-channel series of one recording: 16 amplitude,
/// 16 unwrapped phase, and 16 complex series.
#[derive(Clone, Debug)]
pub struct SeriesSet48 {
    pub fs: usize,
    pub amp: Vec<Vec<f64>>,
    pub phase: Vec<Vec<f64>>,
    pub iq: Vec<Vec<Complex64>>,
    /// Physical channel ids behind the rows (identity for the full set).
    pub channels: Vec<u8>,
}

impl SeriesSet48 {
    pub fn n_series(&self) -> usize {
        3 * self.amp.len()
    }

    pub fn len(&self) -> usize {
        self.amp.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One labeled 5 s segment. Real rows are the amplitude and phase series;
/// the complex series ride along as two quadratures each and count as one
/// series for feature extraction.
#[derive(Clone, Debug)]
pub struct GestureWindow {
    pub subject_id: u32,
    pub routine_id: u32,
    /// Position of the window within its routine.
    pub window_index: u32,
    pub label: GestureId,
    pub fs: usize,
    pub channels: Vec<u8>,
    pub amp: Array2<f64>,
    pub phase: Array2<f64>,
    pub iq: Array2<Complex64>,
}

/// Borrowed view of one of a window's series.
#[derive(Clone, Copy, Debug)]
pub enum SeriesView<'a> {
    Real(ndarray::ArrayView1<'a, f64>),
    Complex(ndarray::ArrayView1<'a, Complex64>),
}

impl GestureWindow {
    pub fn n_channels(&self) -> usize {
        self.amp.nrows()
    }

    pub fn n_series(&self) -> usize {
        3 * self.n_channels()
    }

    pub fn n_samples(&self) -> usize {
        self.amp.ncols()
    }

    /// Series `0..n` are amplitudes, `n..2n` phases, `2n..3n` the complex
    /// series, where `n` is the channel count.
    pub fn series(&self, index: usize) -> SeriesView<'_> {
        let n = self.n_channels();
        match index / n {
            0 => SeriesView::Real(self.amp.row(index)),
            1 => SeriesView::Real(self.phase.row(index - n)),
            2 => SeriesView::Complex(self.iq.row(index - 2 * n)),
            _ => panic!("series index {index} out of range"),
        }
    }

    /// Real-valued matrix for models that consume time waveforms directly:
    /// amplitude rows, phase rows, then the complex series as their
    /// in-phase quadrature.
    pub fn raw_matrix(&self) -> Array2<f64> {
        let n = self.n_channels();
        let len = self.n_samples();
        let mut out = Array2::zeros((3 * n, len));
        for c in 0..n {
            out.row_mut(c).assign(&self.amp.row(c));
            out.row_mut(n + c).assign(&self.phase.row(c));
            for (k, v) in self.iq.row(c).iter().enumerate() {
                out[[2 * n + c, k]] = v.re;
            }
        }
        out
    }

    /// Restrict to a subset of physical channels (ablation studies).
    pub fn select_channels(&self, keep: &[u8]) -> Result<GestureWindow> {
        if keep.is_empty() {
            return Err(RmgError::SelectorError);
        }
        let rows: Vec<usize> = keep
            .iter()
            .map(|c| {
                self.channels
                    .iter()
                    .position(|x| x == c)
                    .ok_or(RmgError::SelectorError)
            })
            .collect::<Result<_>>()?;
        let len = self.n_samples();
        let mut amp = Array2::zeros((rows.len(), len));
        let mut phase = Array2::zeros((rows.len(), len));
        let mut iq = Array2::from_elem((rows.len(), len), Complex64::default());
        for (r, &src) in rows.iter().enumerate() {
            amp.row_mut(r).assign(&self.amp.row(src));
            phase.row_mut(r).assign(&self.phase.row(src));
            iq.row_mut(r).assign(&self.iq.row(src));
        }
        Ok(GestureWindow {
            channels: keep.to_vec(),
            amp,
            phase,
            iq,
            ..self.clone()
        })
    }
}

/// Unwrap phase angles so no adjacent step exceeds pi in magnitude.
pub fn unwrap_phase(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0f64;
    for (k, &a) in angles.iter().enumerate() {
        if k > 0 {
            let d = a - angles[k - 1];
            if d > std::f64::consts::PI {
                offset -= std::f64::consts::TAU;
            } else if d < -std::f64::consts::PI {
                offset += std::f64::consts::TAU;
            }
        }
        out.push(a + offset);
    }
    out
}

/// Expand 16 physical channels into the 48 augmented series.
pub fn augment_channels(rec: &RawRecording) -> Result<SeriesSet48> {
    if rec.channels.len() != NUM_CHANNELS {
        return Err(RmgError::ChannelCountError {
            got: rec.channels.len(),
        });
    }
    let mut amp = Vec::with_capacity(NUM_CHANNELS);
    let mut phase = Vec::with_capacity(NUM_CHANNELS);
    let mut iq = Vec::with_capacity(NUM_CHANNELS);
    for ch in &rec.channels {
        amp.push(ch.iter().map(|v| v.norm()).collect());
        let angles: Vec<f64> = ch.iter().map(|v| v.arg()).collect();
        phase.push(unwrap_phase(&angles));
        iq.push(ch.clone());
    }
    Ok(SeriesSet48 {
        fs: rec.fs,
        amp,
        phase,
        iq,
        channels: (0..NUM_CHANNELS as u8).collect(),
    })
}

/// Center to mean 0 and scale to population standard deviation 1.
pub fn normalize(x: &[f64]) -> Result<Vec<f64>> {
    normalize_indexed(x, 0)
}

fn normalize_indexed(x: &[f64], index: usize) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(RmgError::InvalidParam(
            "normalize needs at least 2 samples".into(),
        ));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 * (1.0 + mean.abs()) {
        return Err(RmgError::DegenerateSeries { index });
    }
    Ok(x.iter().map(|v| (v - mean) / std).collect())
}

/// Remove the ordinary-least-squares line from a series, in place.
pub fn detrend_in_place(x: &mut [f64]) {
    let n = x.len();
    if n < 2 {
        if n == 1 {
            x[0] = 0.0;
        }
        return;
    }
    let nf = n as f64;
    let t_mean = (nf - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (k, v) in x.iter().enumerate() {
        let dt = k as f64 - t_mean;
        cov += dt * (v - x_mean);
        var += dt * dt;
    }
    let slope = cov / var;
    for (k, v) in x.iter_mut().enumerate() {
        *v -= x_mean + slope * (k as f64 - t_mean);
    }
}

/// Detrended copy of a series.
pub fn detrend_series(x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    detrend_in_place(&mut y);
    y
}

/// OLS slope of a series against the sample index (for invariant checks).
pub fn ols_slope(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (k, v) in x.iter().enumerate() {
        let dt = k as f64 - t_mean;
        cov += dt * (v - x_mean);
        var += dt * dt;
    }
    cov / var
}

/// Cut the series set into one window per annotation.
pub fn segment(set: &SeriesSet48, annotations: &[Annotation]) -> Result<Vec<GestureWindow>> {
    let win = (set.fs as f64 * WINDOW_S).round() as usize;
    let len = set.len();
    let mut order: Vec<usize> = (0..annotations.len()).collect();
    order.sort_by_key(|&i| annotations[i].start_sample);
    let mut last_end = 0usize;
    for &i in &order {
        let a = &annotations[i];
        if a.start_sample < last_end || a.start_sample + win > len {
            return Err(RmgError::AnnotationOverlap { index: i });
        }
        last_end = a.start_sample + win;
    }

    let n_ch = set.amp.len();
    let mut windows = Vec::with_capacity(annotations.len());
    for (w, a) in annotations.iter().enumerate() {
        let lo = a.start_sample;
        let hi = lo + win;
        let mut amp = Array2::zeros((n_ch, win));
        let mut phase = Array2::zeros((n_ch, win));
        let mut iq = Array2::from_elem((n_ch, win), Complex64::default());
        for c in 0..n_ch {
            amp.row_mut(c)
                .assign(&ndarray::ArrayView1::from(&set.amp[c][lo..hi]));
            phase
                .row_mut(c)
                .assign(&ndarray::ArrayView1::from(&set.phase[c][lo..hi]));
            iq.row_mut(c)
                .assign(&ndarray::ArrayView1::from(&set.iq[c][lo..hi]));
        }
        windows.push(GestureWindow {
            subject_id: a.subject_id,
            routine_id: a.routine_id,
            window_index: w as u32,
            label: a.gesture,
            fs: set.fs,
            channels: set.channels.clone(),
            amp,
            phase,
            iq,
        });
    }
    Ok(windows)
}

/// Remove each row's best-fit line (complex rows per quadrature).
pub fn detrend(window: &GestureWindow) -> GestureWindow {
    let mut out = window.clone();
    for mut row in out.amp.rows_mut() {
        detrend_in_place(row.as_slice_mut().unwrap());
    }
    for mut row in out.phase.rows_mut() {
        detrend_in_place(row.as_slice_mut().unwrap());
    }
    for mut row in out.iq.rows_mut() {
        let mut re: Vec<f64> = row.iter().map(|v| v.re).collect();
        let mut im: Vec<f64> = row.iter().map(|v| v.im).collect();
        detrend_in_place(&mut re);
        detrend_in_place(&mut im);
        for (k, v) in row.iter_mut().enumerate() {
            *v = Complex64::new(re[k], im[k]);
        }
    }
    out
}

/// Band-pass then normalize every series of the set, over the full series.
fn filter_and_normalize(set: &SeriesSet48) -> Result<SeriesSet48> {
    let fs = set.fs as f64;
    let mut out = set.clone();
    for (c, series) in out.amp.iter_mut().enumerate() {
        *series = bandpass(series, BAND_LO_HZ, BAND_HI_HZ, fs)?;
        *series = normalize_indexed(series, c)?;
    }
    let n_ch = out.amp.len();
    for (c, series) in out.phase.iter_mut().enumerate() {
        *series = bandpass(series, BAND_LO_HZ, BAND_HI_HZ, fs)?;
        *series = normalize_indexed(series, n_ch + c)?;
    }
    for (c, series) in out.iq.iter_mut().enumerate() {
        let filtered = bandpass_complex(series, BAND_LO_HZ, BAND_HI_HZ, fs)?;
        let idx = 2 * n_ch + c;
        let re = normalize_indexed(&filtered.iter().map(|v| v.re).collect::<Vec<_>>(), idx)?;
        let im = normalize_indexed(&filtered.iter().map(|v| v.im).collect::<Vec<_>>(), idx)?;
        *series = re
            .into_iter()
            .zip(im)
            .map(|(r, i)| Complex64::new(r, i))
            .collect();
    }
    Ok(out)
}

/// The full five-step chain, in order: filter, normalize, segment,
/// annotate, detrend.
pub fn preprocess_pipeline(rec: &RawRecording) -> Result<Vec<GestureWindow>> {
    let set = augment_channels(rec)?;
    let set = filter_and_normalize(&set)?;
    let windows = segment(&set, &rec.annotations)?;
    Ok(windows.iter().map(detrend).collect())
}
