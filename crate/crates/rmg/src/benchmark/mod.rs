//! Comparison toolkit for the two sensing modalities: envelope
//! preprocessing, dynamic time warping and barycenter averaging, pulse
//! features, timing/correlation statistics, and event-rate estimation.

use crate::error::{Result, RmgError};
use crate::synth::{gesture_catalog, GestureId, Tempo};
use serde::{Deserialize, Serialize};

/// Natural cubic spline through strictly increasing knots.
struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> CubicSpline {
        let n = xs.len();
        assert!(n >= 2);
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives.
            let mut sub = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut sup = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                sub[i] = h0;
                diag[i] = 2.0 * (h0 + h1);
                sup[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            // Thomas algorithm over 1..n-1 with natural boundaries.
            for i in 2..n - 1 {
                let w = sub[i] / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[n - 2] = rhs[n - 2] / diag[n - 2];
            for i in (1..n - 2).rev() {
                m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
            }
        }
        CubicSpline { xs, ys, m }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Indices of local maxima; a run of equal values counts once (at its
/// midpoint) and only when bounded by a strict rise and a strict fall,
/// which keeps rounding staircases on monotone slopes out.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i < n {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                out.push(i + (j - i) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Cubic-spline envelope through the local maxima, evaluated at every
/// sample. Fewer than 3 maxima returns the input unchanged with
/// `flagged = true`.
pub fn envelope_spline(x: &[f64]) -> (Vec<f64>, bool) {
    let maxima = local_maxima(x);
    if maxima.len() < 3 {
        return (x.to_vec(), true);
    }
    let mut xs: Vec<f64> = Vec::with_capacity(maxima.len() + 2);
    let mut ys: Vec<f64> = Vec::with_capacity(maxima.len() + 2);
    if maxima[0] != 0 {
        xs.push(0.0);
        ys.push(x[0]);
    }
    for &i in &maxima {
        xs.push(i as f64);
        ys.push(x[i]);
    }
    if *maxima.last().unwrap() != x.len() - 1 {
        xs.push((x.len() - 1) as f64);
        ys.push(x[x.len() - 1]);
    }
    let spline = CubicSpline::new(xs, ys);
    ((0..x.len()).map(|i| spline.eval(i as f64)).collect(), false)
}

/// Centered moving average; edge windows shrink symmetrically.
pub fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    if w <= 1 || x.is_empty() {
        return x.to_vec();
    }
    let half = w / 2;
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let sum: f64 = x[lo..hi].iter().sum();
        out.push(sum / (hi - lo) as f64);
    }
    out
}

/// Monotone alignment path of a DTW match.
pub type DtwPath = Vec<(usize, usize)>;

/// Global dynamic time warping with squared local cost and the symmetric
/// step pattern {(1,0), (0,1), (1,1)}; no band constraint.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<(f64, DtwPath)> {
    if a.is_empty() || b.is_empty() {
        return Err(RmgError::EmptySeries);
    }
    let (n, m) = (a.len(), b.len());
    let mut cost = vec![f64::INFINITY; n * m];
    // 0 = start, 1 = from (i-1,j), 2 = from (i,j-1), 3 = diagonal.
    let mut step = vec![0u8; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = (a[i] - b[j]) * (a[i] - b[j]);
            let idx = i * m + j;
            if i == 0 && j == 0 {
                cost[idx] = d;
                continue;
            }
            let mut best = f64::INFINITY;
            let mut which = 0u8;
            if i > 0 && cost[idx - m] < best {
                best = cost[idx - m];
                which = 1;
            }
            if j > 0 && cost[idx - 1] < best {
                best = cost[idx - 1];
                which = 2;
            }
            if i > 0 && j > 0 && cost[idx - m - 1] <= best {
                best = cost[idx - m - 1];
                which = 3;
            }
            cost[idx] = d + best;
            step[idx] = which;
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        path.push((i, j));
        match step[i * m + j] {
            0 => break,
            1 => i -= 1,
            2 => j -= 1,
            _ => {
                i -= 1;
                j -= 1;
            }
        }
    }
    path.reverse();
    Ok((cost[n * m - 1], path))
}

/// Sum of DTW distances from `center` to every series.
pub fn dtw_total_cost(series: &[Vec<f64>], center: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for s in series {
        total += dtw(center, s)?.0;
    }
    Ok(total)
}

/// DTW barycenter averaging from an explicit initial center. Returns the
/// barycenter and the total alignment cost before each update; the cost
/// sequence is checked non-increasing on every run.
pub fn dtw_barycenter_with_init(
    series: &[Vec<f64>],
    init: &[f64],
    iterations: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if series.is_empty() {
        return Err(RmgError::EmptySeries);
    }
    let mut center = init.to_vec();
    let mut costs = Vec::with_capacity(iterations + 1);
    costs.push(dtw_total_cost(series, &center)?);
    for _ in 0..iterations {
        // Running means are exact when all aligned samples are equal, so a
        // set of identical series is a true fixed point.
        let mut means = vec![0.0f64; center.len()];
        let mut counts = vec![0usize; center.len()];
        for s in series {
            let (_, path) = dtw(&center, s)?;
            for (ci, sj) in path {
                counts[ci] += 1;
                means[ci] += (s[sj] - means[ci]) / counts[ci] as f64;
            }
        }
        for (c, (&mean, &count)) in center.iter_mut().zip(means.iter().zip(counts.iter())) {
            if count > 0 {
                *c = mean;
            }
        }
        let cost = dtw_total_cost(series, &center)?;
        let prev = *costs.last().unwrap();
        assert!(
            cost <= prev + 1e-9 * (1.0 + prev.abs()),
            "DBA cost increased: {prev} -> {cost}"
        );
        costs.push(cost);
    }
    Ok((center, costs))
}

/// DTW barycenter averaging initialized from the medoid of the set.
/// The input series must share one length (fixed 5 s windows).
pub fn dtw_barycenter(series: &[Vec<f64>], iterations: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if series.is_empty() {
        return Err(RmgError::EmptySeries);
    }
    let len = series[0].len();
    if series.iter().any(|s| s.len() != len) {
        return Err(RmgError::ShapeMismatch {
            expected: format!("all series of length {len}"),
            got: "mixed lengths".into(),
        });
    }
    let mut best = (0usize, f64::INFINITY);
    for (i, s) in series.iter().enumerate() {
        let c = dtw_total_cost(series, s)?;
        if c < best.1 {
            best = (i, c);
        }
    }
    dtw_barycenter_with_init(series, &series[best.0].clone(), iterations)
}

/// Location, half-magnitude width, and height of a window's main pulse.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PulseFeature {
    pub peak_time_s: f64,
    pub width_s: f64,
    pub peak_value: f64,
}

/// Smoothing window for peak detection, in seconds.
const PEAK_SMOOTH_S: f64 = 0.04;

/// Peak of the smoothed envelope and its half-magnitude width. The half
/// level is relative to the window minimum, so positive affine scalings
/// leave the timing features unchanged.
pub fn detect_peak(x: &[f64], fs: usize) -> Result<PulseFeature> {
    if x.is_empty() {
        return Err(RmgError::EmptySeries);
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-6 {
        return Err(RmgError::NoPeak);
    }
    let (env, _) = envelope_spline(x);
    let w = ((PEAK_SMOOTH_S * fs as f64).round() as usize) | 1;
    let smooth = moving_average(&env, w);

    let (ipeak, &peak) = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let base = smooth.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = base + (peak - base) / 2.0;

    let cross_left = {
        let mut t = 0.0f64;
        for i in (0..ipeak).rev() {
            if smooth[i] <= half {
                let frac = (half - smooth[i]) / (smooth[i + 1] - smooth[i]);
                t = i as f64 + frac;
                break;
            }
        }
        t
    };
    let cross_right = {
        let n = smooth.len();
        let mut t = (n - 1) as f64;
        for i in ipeak + 1..n {
            if smooth[i] <= half {
                let frac = (smooth[i - 1] - half) / (smooth[i - 1] - smooth[i]);
                t = (i - 1) as f64 + frac;
                break;
            }
        }
        t
    };
    Ok(PulseFeature {
        peak_time_s: ipeak as f64 / fs as f64,
        width_s: (cross_right - cross_left) / fs as f64,
        peak_value: peak,
    })
}

/// Aggregate timing statistics over paired quick-gesture windows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModalityComparison {
    pub pearson_r: f64,
    /// Mean of (radio peak time - sEMG peak time); positive when the
    /// radio modality lags.
    pub mean_delay_s: f64,
    pub width_pairs: Vec<(f64, f64)>,
    pub peak_pairs: Vec<(f64, f64)>,
    pub n_samples: usize,
    /// Pairs dropped because either window had no detectable peak.
    pub n_excluded: usize,
    /// True when the peak-time vectors had zero variance and `pearson_r`
    /// is 1 by convention.
    pub degenerate_correlation: bool,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va < 1e-18 || vb < 1e-18 {
        None
    } else {
        Some(cov / (va * vb).sqrt())
    }
}

fn is_quick(g: GestureId) -> bool {
    gesture_catalog()[g.index()].tempo == Tempo::Quick
}

/// Extract pulse features from paired windows and compute the Pearson
/// correlation of peak times, the mean delay, and the width scatter.
/// Only quick-gesture pairs enter; `NoPeak` pairs are excluded and
/// counted.
pub fn compare_modalities(
    rmg_windows: &[Vec<f64>],
    semg_windows: &[Vec<f64>],
    labels: &[GestureId],
    fs: usize,
) -> Result<ModalityComparison> {
    if rmg_windows.len() != semg_windows.len() || rmg_windows.len() != labels.len() {
        return Err(RmgError::ShapeMismatch {
            expected: format!("{} paired windows", rmg_windows.len()),
            got: format!("{} / {}", semg_windows.len(), labels.len()),
        });
    }
    let mut peak_pairs = Vec::new();
    let mut width_pairs = Vec::new();
    let mut excluded = 0usize;
    for ((r, s), &g) in rmg_windows.iter().zip(semg_windows.iter()).zip(labels) {
        if !is_quick(g) {
            continue;
        }
        match (detect_peak(r, fs), detect_peak(s, fs)) {
            (Ok(pr), Ok(ps)) => {
                peak_pairs.push((pr.peak_time_s, ps.peak_time_s));
                width_pairs.push((pr.width_s, ps.width_s));
            }
            _ => excluded += 1,
        }
    }
    if peak_pairs.is_empty() {
        return Err(RmgError::NoPeak);
    }
    let rmg_times: Vec<f64> = peak_pairs.iter().map(|p| p.0).collect();
    let semg_times: Vec<f64> = peak_pairs.iter().map(|p| p.1).collect();
    let (pearson_r, degenerate) = match pearson(&rmg_times, &semg_times) {
        Some(r) => (r, false),
        None => (1.0, true),
    };
    let mean_delay_s = rmg_times
        .iter()
        .zip(semg_times.iter())
        .map(|(a, b)| a - b)
        .sum::<f64>()
        / rmg_times.len() as f64;
    Ok(ModalityComparison {
        pearson_r,
        mean_delay_s,
        n_samples: peak_pairs.len(),
        peak_pairs,
        width_pairs,
        n_excluded: excluded,
        degenerate_correlation: degenerate,
    })
}

fn peak_prominences(x: &[f64], peaks: &[usize]) -> Vec<f64> {
    peaks
        .iter()
        .map(|&p| {
            let h = x[p];
            let mut left_base = h;
            for i in (0..p).rev() {
                if x[i] > h {
                    break;
                }
                left_base = left_base.min(x[i]);
            }
            let mut right_base = h;
            for &v in x.iter().skip(p + 1) {
                if v > h {
                    break;
                }
                right_base = right_base.min(v);
            }
            h - left_base.max(right_base)
        })
        .collect()
}

/// Count prominence-thresholded peaks and convert to events per minute.
/// The threshold is half the median peak height above the window floor.
pub fn estimate_rate(x: &[f64], fs: usize) -> Result<f64> {
    if x.len() < 2 {
        return Err(RmgError::EmptySeries);
    }
    let peaks = local_maxima(x);
    if peaks.is_empty() {
        return Err(RmgError::NoEvents);
    }
    let floor = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut heights: Vec<f64> = peaks.iter().map(|&p| x[p] - floor).collect();
    heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if heights.len() % 2 == 1 {
        heights[heights.len() / 2]
    } else {
        0.5 * (heights[heights.len() / 2 - 1] + heights[heights.len() / 2])
    };
    let threshold = 0.5 * median;
    let prominences = peak_prominences(x, &peaks);
    let events = peaks
        .iter()
        .zip(prominences.iter())
        .filter(|(_, &prom)| prom >= threshold && prom > 1e-9)
        .count();
    if events == 0 {
        return Err(RmgError::NoEvents);
    }
    let minutes = x.len() as f64 / fs as f64 / 60.0;
    Ok(events as f64 / minutes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn envelope_of_rectified_sine_is_one() {
        let fs = 250;
        let x: Vec<f64> = (0..fs * 5)
            .map(|k| (std::f64::consts::TAU * 5.0 * k as f64 / fs as f64).sin().abs())
            .collect();
        let (env, flagged) = envelope_spline(&x);
        assert!(!flagged);
        for &v in &env[fs / 2..x.len() - fs / 2] {
            assert!((v - 1.0).abs() < 0.05, "envelope {v}");
        }
        // Idempotent on this fixture: the envelope of the envelope stays 1.
        let (env2, _) = envelope_spline(&env);
        for (a, b) in env[fs..x.len() - fs].iter().zip(env2[fs..].iter()) {
            assert!((a - b).abs() < 0.01);
        }
    }

    #[test]
    fn envelope_passthrough_without_maxima() {
        let ramp: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let (env, flagged) = envelope_spline(&ramp);
        assert!(flagged);
        assert_eq!(env, ramp);
    }

    #[test]
    fn envelope_touches_maxima_exactly() {
        let x: Vec<f64> = (0..200)
            .map(|k| (k as f64 * 0.3).sin() * (1.0 + 0.3 * (k as f64 * 0.05).cos()))
            .collect();
        let (env, _) = envelope_spline(&x);
        for &i in &local_maxima(&x) {
            assert!((env[i] - x[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn moving_average_constant_and_impulse() {
        let c = vec![2.0; 50];
        assert_eq!(moving_average(&c, 7), c);
        let mut imp = vec![0.0; 21];
        imp[10] = 1.0;
        let ma = moving_average(&imp, 5);
        for (i, &v) in ma.iter().enumerate() {
            if (8..=12).contains(&i) {
                assert!((v - 0.2).abs() < 1e-12);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn moving_average_contracts_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = moving_average(&x, 9);
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64
        };
        assert!(var(&y) <= var(&x));
    }

    #[test]
    fn dtw_identity_and_symmetry() {
        let x: Vec<f64> = (0..40).map(|k| (k as f64 * 0.3).sin()).collect();
        let (d, path) = dtw(&x, &x).unwrap();
        assert_eq!(d, 0.0);
        for (k, &(i, j)) in path.iter().enumerate() {
            assert_eq!((i, j), (k, k));
        }
        let y: Vec<f64> = (0..35).map(|k| (k as f64 * 0.2).cos()).collect();
        let (dxy, pxy) = dtw(&x, &y).unwrap();
        let (dyx, _) = dtw(&y, &x).unwrap();
        assert!((dxy - dyx).abs() < 1e-12);
        assert_eq!(*pxy.first().unwrap(), (0, 0));
        assert_eq!(*pxy.last().unwrap(), (x.len() - 1, y.len() - 1));
        // Monotone steps.
        for w in pxy.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(di <= 1 && dj <= 1 && di + dj >= 1);
        }
        assert!(dxy >= 0.0);
    }

    /// Exhaustive minimum over all monotone paths, for small inputs.
    fn brute_force_dtw(a: &[f64], b: &[f64]) -> f64 {
        fn rec(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
            let d = (a[i] - b[j]) * (a[i] - b[j]);
            let acc = acc + d;
            if i == a.len() - 1 && j == b.len() - 1 {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            if i + 1 < a.len() {
                rec(a, b, i + 1, j, acc, best);
            }
            if j + 1 < b.len() {
                rec(a, b, i, j + 1, acc, best);
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                rec(a, b, i + 1, j + 1, acc, best);
            }
        }
        let mut best = f64::INFINITY;
        rec(a, b, 0, 0, 0.0, &mut best);
        best
    }

    #[test]
    fn dtw_matches_brute_force_on_short_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let la = rng.random_range(1..=6);
            let lb = rng.random_range(1..=6);
            let a: Vec<f64> = (0..la).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..lb).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (d, _) = dtw(&a, &b).unwrap();
            let bf = brute_force_dtw(&a, &b);
            assert!(
                (d - bf).abs() <= 1e-12 * (1.0 + bf.abs()),
                "dtw {d} vs brute force {bf}"
            );
        }
    }

    #[test]
    fn dtw_empty_rejected() {
        assert!(matches!(dtw(&[], &[1.0]), Err(RmgError::EmptySeries)));
    }

    #[test]
    fn dba_fixed_points() {
        let x: Vec<f64> = (0..30).map(|k| (k as f64 * 0.4).sin()).collect();
        let set = vec![x.clone(), x.clone(), x.clone()];
        let (bary, _) = dtw_barycenter(&set, 5).unwrap();
        assert_eq!(bary, x);
        let (single, _) = dtw_barycenter(&[x.clone()], 3).unwrap();
        assert_eq!(single, x);
    }

    #[test]
    fn dba_cost_non_increasing_on_opposed_pair() {
        let x: Vec<f64> = (0..30).map(|k| (k as f64 * 0.4).sin()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let (_, costs) = dtw_barycenter_with_init(&[x.clone(), neg], &x, 5).unwrap();
        for w in costs.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn gaussian_peak_feature() {
        let fs = 250;
        let sigma = 0.2f64;
        let x: Vec<f64> = (0..5 * fs)
            .map(|k| {
                let t = k as f64 / fs as f64 - 2.0;
                (-t * t / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let p = detect_peak(&x, fs).unwrap();
        assert!((p.peak_time_s - 2.0).abs() <= 0.01, "peak {}", p.peak_time_s);
        let fwhm = 2.0 * sigma * (2.0f64.ln() * 2.0).sqrt();
        assert!((p.width_s - fwhm).abs() <= 0.01, "width {}", p.width_s);
    }

    #[test]
    fn two_pulses_reports_global_max() {
        let fs = 250;
        let mut x = vec![0.0f64; 5 * fs];
        for k in 0..x.len() {
            let t = k as f64 / fs as f64;
            x[k] = (-(t - 1.0) * (t - 1.0) / 0.02).exp() + 0.6 * (-(t - 3.0) * (t - 3.0) / 0.02).exp();
        }
        let p = detect_peak(&x, fs).unwrap();
        assert!((p.peak_time_s - 1.0).abs() < 0.05);
    }

    #[test]
    fn flat_window_has_no_peak() {
        assert!(matches!(
            detect_peak(&vec![0.25; 1250], 250),
            Err(RmgError::NoPeak)
        ));
    }

    #[test]
    fn peak_features_invariant_to_positive_affine_scale() {
        let fs = 250;
        let x: Vec<f64> = (0..5 * fs)
            .map(|k| {
                let t = k as f64 / fs as f64 - 2.2;
                (-t * t / 0.1).exp()
            })
            .collect();
        let scaled: Vec<f64> = x.iter().map(|v| 7.5 * v + 3.0).collect();
        let a = detect_peak(&x, fs).unwrap();
        let b = detect_peak(&scaled, fs).unwrap();
        assert!((a.peak_time_s - b.peak_time_s).abs() < 1e-9);
        assert!((a.width_s - b.width_s).abs() < 1e-9);
    }

    #[test]
    fn mean_delay_equivariant_under_semg_shift() {
        let fs = 250;
        let pulse = |center: f64| -> Vec<f64> {
            (0..5 * fs)
                .map(|k| {
                    let t = k as f64 / fs as f64 - center;
                    (-t * t / 0.08).exp()
                })
                .collect()
        };
        let labels = vec![GestureId(0), GestureId(1), GestureId(2)];
        let rmg = vec![pulse(2.0), pulse(2.5), pulse(1.5)];
        let semg = vec![pulse(1.8), pulse(2.3), pulse(1.3)];
        let base = compare_modalities(&rmg, &semg, &labels, fs).unwrap();
        let delta = 0.2;
        let shifted: Vec<Vec<f64>> = vec![
            pulse(1.8 + delta),
            pulse(2.3 + delta),
            pulse(1.3 + delta),
        ];
        let moved = compare_modalities(&rmg, &shifted, &labels, fs).unwrap();
        assert!((moved.mean_delay_s - (base.mean_delay_s - delta)).abs() < 1e-6);
        assert!((base.mean_delay_s - 0.2).abs() < 0.01);
    }

    #[test]
    fn identical_pairs_degenerate_correlation() {
        let fs = 250;
        let pulse: Vec<f64> = (0..5 * fs)
            .map(|k| {
                let t = k as f64 / fs as f64 - 2.0;
                (-t * t / 0.08).exp()
            })
            .collect();
        let windows = vec![pulse.clone(), pulse.clone(), pulse.clone()];
        let labels = vec![GestureId(0), GestureId(1), GestureId(2)];
        let cmp = compare_modalities(&windows, &windows, &labels, fs).unwrap();
        assert!(cmp.degenerate_correlation);
        assert_eq!(cmp.pearson_r, 1.0);
        assert!(cmp.mean_delay_s.abs() < 1e-12);
    }

    #[test]
    fn slow_gestures_are_filtered_out() {
        let fs = 250;
        let pulse: Vec<f64> = (0..5 * fs)
            .map(|k| {
                let t = k as f64 / fs as f64 - 2.0;
                (-t * t / 0.08).exp()
            })
            .collect();
        // Label 14 is a slow gesture; only the quick pair (label 0) counts.
        let labels = vec![GestureId(0), GestureId(14)];
        let windows = vec![pulse.clone(), pulse.clone()];
        let cmp = compare_modalities(&windows, &windows, &labels, fs).unwrap();
        assert_eq!(cmp.n_samples, 1);
    }

    fn pulse_train(rate_per_min: f64, seconds: f64, fs: usize) -> Vec<f64> {
        let n = (seconds * fs as f64) as usize;
        let period = 60.0 / rate_per_min;
        let mut x = vec![0.0f64; n];
        let mut center = period / 2.0;
        while center < seconds {
            for k in 0..n {
                let t = k as f64 / fs as f64 - center;
                x[k] += (-t * t / (2.0 * 0.05 * 0.05)).exp();
            }
            center += period;
        }
        x
    }

    #[test]
    fn metronome_rate_recovered() {
        let fs = 250;
        let x = pulse_train(150.0, 20.0, fs);
        let rate = estimate_rate(&x, fs).unwrap();
        assert!((rate - 150.0).abs() <= 2.0, "rate {rate}");
    }

    #[test]
    fn slow_grip_rate_exact() {
        let fs = 250;
        let x = pulse_train(3.0, 120.0, fs);
        let rate = estimate_rate(&x, fs).unwrap();
        assert_eq!(rate, 3.0);
    }

    #[test]
    fn constant_input_has_no_events() {
        assert!(matches!(
            estimate_rate(&vec![1.0; 5000], 250),
            Err(RmgError::NoEvents)
        ));
    }
}
