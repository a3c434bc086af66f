//! Evaluation metrics: recovery error, respiration rate, spectral entropy
//! and the CSI-versus-BFI stability comparison.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::sra::Spectrogram;

fn same_dims(a: &Spectrogram, b: &Spectrogram) -> Result<()> {
    if (a.n_f, a.n_t) != (b.n_f, b.n_t) {
        return Err(Error::Shape {
            expected: format!("{}x{}", b.n_f, b.n_t),
            found: format!("{}x{}", a.n_f, a.n_t),
        });
    }
    Ok(())
}

/// Mean squared entrywise difference over the whole matrix.
pub fn recovery_mse(recovered: &Spectrogram, truth: &Spectrogram) -> Result<f64> {
    same_dims(recovered, truth)?;
    if truth.data.is_empty() {
        return Err(Error::NoData("empty spectrogram".into()));
    }
    let sum: f64 = recovered.data.iter().zip(&truth.data).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / truth.data.len() as f64)
}

/// Mean squared difference restricted to the columns where `cols` holds.
pub fn column_mse(recovered: &Spectrogram, truth: &Spectrogram, cols: &[bool]) -> Result<f64> {
    same_dims(recovered, truth)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in (0..truth.n_t).filter(|&t| cols.get(t).copied().unwrap_or(false)) {
        for f in 0..truth.n_f {
            let d = recovered.get(f, t) - truth.get(f, t);
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoData("no selected columns".into()));
    }
    Ok(sum / n as f64)
}

/// Fills no-data columns by linear interpolation between the nearest known
/// columns on either side; leading and trailing gaps copy the nearest one.
pub fn interpolate_columns(x: &Spectrogram) -> Result<Spectrogram> {
    let known: Vec<usize> = (0..x.n_t).filter(|&t| !x.no_data_cols[t]).collect();
    if known.is_empty() {
        return Err(Error::NoData("every column is missing".into()));
    }
    let mut out = x.clone();
    for t in 0..x.n_t {
        if !x.no_data_cols[t] {
            continue;
        }
        let k = known.partition_point(|&c| c < t);
        let (a, b) = match (k.checked_sub(1).map(|i| known[i]), known.get(k).copied()) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, a),
            (None, Some(b)) => (b, b),
            (None, None) => unreachable!(),
        };
        let w = if a == b { 0.0 } else { (t - a) as f64 / (b - a) as f64 };
        for f in 0..x.n_f {
            out.set(f, t, (1.0 - w) * x.get(f, a) + w * x.get(f, b));
        }
        out.no_data_cols[t] = false;
    }
    Ok(out)
}

/// Keeps the known columns of `x` and takes the masked ones from `model`.
pub fn merge_known(x: &Spectrogram, model: &Spectrogram) -> Result<Spectrogram> {
    same_dims(model, x)?;
    let mut out = x.clone();
    for t in (0..x.n_t).filter(|&t| x.no_data_cols[t]) {
        for f in 0..x.n_f {
            out.set(f, t, model.get(f, t));
        }
        out.no_data_cols[t] = false;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub bpm: f64,
    /// Peak height over the mean of the time-averaged spectrum.
    pub confidence: f64,
}

/// Time-averaged spectrum over the columns that carry data.
pub fn mean_spectrum(spec: &Spectrogram) -> Result<Vec<f64>> {
    let cols: Vec<usize> = (0..spec.n_t).filter(|&t| !spec.no_data_cols[t]).collect();
    if cols.is_empty() {
        return Err(Error::NoData("every spectrogram column is no-data".into()));
    }
    Ok((0..spec.n_f)
        .map(|f| cols.iter().map(|&t| spec.get(f, t)).sum::<f64>() / cols.len() as f64)
        .collect())
}

/// Spectral-peak rate estimate inside `band_hz`, refined by a parabola
/// through the peak and its two neighbours.
pub fn estimate_rate(spec: &Spectrogram, band_hz: (f64, f64), bin_hz: f64) -> Result<RateEstimate> {
    let (lo, hi) = band_hz;
    if !(bin_hz > 0.0) || !(hi > lo) || lo < 0.0 {
        return Err(Error::domain(format!("bad band [{lo}, {hi}] Hz or bin width {bin_hz}")));
    }
    let top = (spec.n_f as f64 - 1.0) * bin_hz;
    if lo > top {
        return Err(Error::domain(format!("band starts at {lo} Hz, above the {top} Hz coverage")));
    }
    let s = mean_spectrum(spec)?;
    let first = (lo / bin_hz - 1e-9).ceil() as usize;
    let last = ((hi / bin_hz + 1e-9).floor() as usize).min(spec.n_f - 1);
    if first > last {
        return Err(Error::domain(format!("band [{lo}, {hi}] Hz holds no bin")));
    }
    let k = (first..=last).fold(first, |best, i| if s[i] > s[best] { i } else { best });
    let mut offset = 0.0;
    if k > 0 && k + 1 < s.len() {
        let (a, b, c) = (s[k - 1], s[k], s[k + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            offset = (0.5 * (a - c) / den).clamp(-0.5, 0.5);
        }
    }
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let confidence = if mean > 0.0 { s[k] / mean } else { 0.0 };
    Ok(RateEstimate {
        bpm: (60.0 * (k as f64 + offset) * bin_hz).max(0.0),
        confidence,
    })
}

fn column_entropy(col: &[f64]) -> f64 {
    let total: f64 = col.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return (col.len() as f64).log2();
    }
    -col.iter()
        .map(|v| v.max(0.0) / total)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// Mean Shannon entropy in bits of the per-column normalized spectra.
/// All-zero columns count as uniform.
pub fn spectral_entropy(spec: &Spectrogram) -> Result<f64> {
    let cols: Vec<usize> = (0..spec.n_t).filter(|&t| !spec.no_data_cols[t]).collect();
    if cols.is_empty() {
        return Err(Error::NoData("every spectrogram column is no-data".into()));
    }
    Ok(cols.iter().map(|&t| column_entropy(&spec.column(t))).sum::<f64>() / cols.len() as f64)
}

/// Standard deviation of the least-squares linear residual.
fn detrended_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let tm = (n - 1.0) / 2.0;
    let xm = x.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let d = i as f64 - tm;
        sxy += d * (v - xm);
        sxx += d * d;
    }
    let slope = sxy / sxx;
    let ss: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let r = v - xm - slope * (i as f64 - tm);
            r * r
        })
        .sum();
    (ss / n).sqrt()
}

/// One-sided Welch power spectral density with Hann segments and 50%
/// overlap. Returns `(frequencies, density)`.
pub fn welch(x: &[f64], rate: f64, segment: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let seg = segment.min(x.len());
    if seg < 2 {
        return Err(Error::domain("welch needs at least two samples"));
    }
    let step = (seg / 2).max(1);
    let window: Vec<f64> = (0..seg).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos()).collect();
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let n_bins = seg / 2 + 1;
    let mut psd = vec![0.0; n_bins];
    let mut count = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut start = 0;
    while start + seg <= x.len() {
        let s = &x[start..start + seg];
        let mean = s.iter().sum::<f64>() / seg as f64;
        for ((b, v), w) in buf.iter_mut().zip(s).zip(&window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in psd.iter_mut().enumerate() {
            let scale = if k == 0 || (seg % 2 == 0 && k == seg / 2) { 1.0 } else { 2.0 };
            *p += scale * buf[k].norm_sqr() / (rate * wpow);
        }
        count += 1;
        start += step;
    }
    for p in psd.iter_mut() {
        *p /= count as f64;
    }
    let freqs = (0..n_bins).map(|k| k as f64 * rate / seg as f64).collect();
    Ok((freqs, psd))
}

/// Share of total power above `cutoff_hz`.
pub fn high_frequency_fraction(freqs: &[f64], psd: &[f64], cutoff_hz: f64) -> f64 {
    let total: f64 = psd.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    freqs.iter().zip(psd).filter(|(f, _)| **f > cutoff_hz).map(|(_, p)| p).sum::<f64>() / total
}

pub const WELCH_SEGMENT: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub csi_std: Vec<f64>,
    pub bfi_std: Vec<f64>,
    pub freqs: Vec<f64>,
    pub csi_psd: Vec<f64>,
    pub bfi_psd: Vec<f64>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

impl ComparisonReport {
    pub fn median_csi_std(&self) -> f64 {
        median(&self.csi_std)
    }

    pub fn median_bfi_std(&self) -> f64 {
        median(&self.bfi_std)
    }
}

/// Per-window detrended standard deviations and Welch spectra of two tracks
/// sampled uniformly at `rate` Hz.
pub fn compare_csi_bfi(csi: &[f64], bfi: &[f64], rate: f64, window_s: f64) -> Result<ComparisonReport> {
    if csi.len() != bfi.len() {
        return Err(Error::Shape {
            expected: format!("{} samples", csi.len()),
            found: format!("{} samples", bfi.len()),
        });
    }
    if !(rate > 0.0) || !(window_s > 0.0) {
        return Err(Error::domain("rate and window must be positive"));
    }
    let w = (window_s * rate).round() as usize;
    if w < 2 || csi.len() < w {
        return Err(Error::domain(format!(
            "tracks of {} samples are shorter than one {window_s} s window",
            csi.len()
        )));
    }
    let stds = |x: &[f64]| x.chunks_exact(w).map(detrended_std).collect::<Vec<_>>();
    let (freqs, csi_psd) = welch(csi, rate, WELCH_SEGMENT)?;
    let (_, bfi_psd) = welch(bfi, rate, WELCH_SEGMENT)?;
    Ok(ComparisonReport {
        csi_std: stds(csi),
        bfi_std: stds(bfi),
        freqs,
        csi_psd,
        bfi_psd,
    })
}

/// `metric,value` rows.
pub fn metrics_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("metric,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn spec(n_f: usize, n_t: usize, f: impl Fn(usize, usize) -> f64) -> Spectrogram {
        let mut data = vec![0.0; n_f * n_t];
        for i in 0..n_f {
            for t in 0..n_t {
                data[i * n_t + t] = f(i, t);
            }
        }
        Spectrogram::new(n_f, n_t, data, vec![false; n_t], 0.0, 0.25).unwrap()
    }

    #[test]
    fn mse_basics() {
        let a = spec(4, 6, |f, t| (f * t) as f64 * 0.01);
        let b = spec(4, 6, |f, t| (f * t) as f64 * 0.01 + 0.1);
        assert_eq!(recovery_mse(&a, &a).unwrap(), 0.0);
        assert!((recovery_mse(&a, &b).unwrap() - 0.01).abs() < 1e-12);
        let c = spec(3, 6, |_, _| 0.0);
        assert!(matches!(recovery_mse(&a, &c), Err(Error::Shape { .. })));
    }

    #[test]
    fn masked_column_errors_scale_by_fraction() {
        let truth = spec(4, 10, |f, t| 0.05 * (f + t) as f64);
        let mut rec = truth.clone();
        let cols = [1usize, 4, 7];
        for &t in &cols {
            for f in 0..4 {
                rec.set(f, t, truth.get(f, t) + 0.2 * (f as f64 + 1.0));
            }
        }
        let mut sel = vec![false; 10];
        for &t in &cols {
            sel[t] = true;
        }
        let col = column_mse(&rec, &truth, &sel).unwrap();
        let col_hand = 0.04 * (1.0 + 4.0 + 9.0 + 16.0) / 4.0;
        assert!((col - col_hand).abs() < 1e-12);
        let whole = recovery_mse(&rec, &truth).unwrap();
        assert!((whole - 0.3 * col_hand).abs() < 1e-12);
    }

    #[test]
    fn tone_at_quarter_hertz_is_fifteen_bpm() {
        // Peak exactly on bin 2 of 0.125 Hz bins.
        let s = spec(32, 20, |f, _| match f {
            2 => 1.0,
            1 | 3 => 0.5,
            _ => 0.02,
        });
        let r = estimate_rate(&s, (0.1, 0.7), 0.125).unwrap();
        assert!((r.bpm - 15.0).abs() < 0.3, "{}", r.bpm);
        assert!(r.confidence > 1.0);
    }

    #[test]
    fn parabolic_refinement_moves_toward_heavier_neighbour() {
        let s = spec(32, 4, |f, _| match f {
            2 => 1.0,
            3 => 0.8,
            1 => 0.2,
            _ => 0.0,
        });
        let r = estimate_rate(&s, (0.1, 0.7), 0.125).unwrap();
        // Vertex of the parabola through (1, 0.2), (2, 1.0), (3, 0.8).
        let off = 0.5 * (0.2 - 0.8) / (0.2 - 2.0 + 0.8);
        assert!((r.bpm - 60.0 * (2.0 + off) * 0.125).abs() < 1e-9);
        assert!(r.bpm > 15.0);
    }

    #[test]
    fn no_data_spectrogram_is_rejected() {
        let mut s = spec(4, 3, |_, _| 0.5);
        s.no_data_cols = vec![true; 3];
        assert!(matches!(estimate_rate(&s, (0.0, 0.3), 0.125), Err(Error::NoData(_))));
        assert!(matches!(spectral_entropy(&s), Err(Error::NoData(_))));
    }

    #[test]
    fn entropy_extremes() {
        let single = spec(32, 5, |f, _| if f == 7 { 0.9 } else { 0.0 });
        assert_eq!(spectral_entropy(&single).unwrap(), 0.0);
        let uniform = spec(32, 5, |_, _| 0.3);
        assert!((spectral_entropy(&uniform).unwrap() - 5.0).abs() < 1e-12);
        let zeros = spec(32, 5, |_, _| 0.0);
        assert!((spectral_entropy(&zeros).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sentinel_columns_are_ignored_by_entropy() {
        let s = spec(4, 4, |f, _| if f == 0 { 1.0 } else { 0.0 });
        let s = s.with_mask(&[false, true, true, false]);
        assert_eq!(spectral_entropy(&s).unwrap(), 0.0);
    }

    #[test]
    fn interpolation_fills_gaps_linearly() {
        let s = spec(2, 6, |f, t| (f + 1) as f64 * t as f64);
        let masked = s.with_mask(&[true, false, true, true, false, true]);
        let filled = interpolate_columns(&masked).unwrap();
        assert!(filled.no_data_cols.iter().all(|&b| !b));
        for f in 0..2 {
            // Interior gap is exactly linear; the edges copy their neighbour.
            for t in 1..5 {
                assert!((filled.get(f, t) - s.get(f, t)).abs() < 1e-12);
            }
            assert_eq!(filled.get(f, 0), s.get(f, 1));
            assert_eq!(filled.get(f, 5), s.get(f, 4));
        }
    }

    #[test]
    fn merge_takes_only_missing_columns() {
        let truth = spec(2, 4, |f, t| (f + t) as f64 * 0.1);
        let x = truth.with_mask(&[false, true, false, false]);
        let model = spec(2, 4, |_, _| 0.7);
        let m = merge_known(&x, &model).unwrap();
        assert_eq!(m.get(0, 1), 0.7);
        assert_eq!(m.get(1, 2), truth.get(1, 2));
    }

    #[test]
    fn constant_tracks_have_zero_std() {
        let x = vec![2.5; 1000];
        let r = compare_csi_bfi(&x, &x, 100.0, 0.1).unwrap();
        assert_eq!(r.csi_std.len(), 100);
        assert!(r.csi_std.iter().chain(&r.bfi_std).all(|&s| s.abs() < 1e-12));
    }

    #[test]
    fn linear_ramps_detrend_to_zero() {
        let x: Vec<f64> = (0..500).map(|i| 0.3 * i as f64 - 4.0).collect();
        let r = compare_csi_bfi(&x, &x, 100.0, 0.1).unwrap();
        assert!(r.csi_std.iter().all(|&s| s < 1e-9));
    }

    #[test]
    fn low_passed_noise_is_more_stable() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let csi: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let h = crate::sra::lowpass_taps(2.0, 100.0, 101);
        let bfi = crate::sra::filtfilt(&csi, &h);
        let r = compare_csi_bfi(&csi, &bfi, 100.0, 0.1).unwrap();
        assert!(r.median_bfi_std() < r.median_csi_std());
        let hf_csi = high_frequency_fraction(&r.freqs, &r.csi_psd, 5.0);
        let hf_bfi = high_frequency_fraction(&r.freqs, &r.bfi_psd, 5.0);
        assert!(hf_bfi < hf_csi, "{hf_bfi} vs {hf_csi}");
    }

    #[test]
    fn welch_recovers_white_noise_level() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..20000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (f, p) = welch(&x, 50.0, 256).unwrap();
        // Unit-variance white noise: one-sided density 2/rate away from DC.
        let mid: Vec<f64> = f.iter().zip(&p).filter(|(f, _)| **f > 2.0 && **f < 23.0).map(|(_, p)| *p).collect();
        let mean = mid.iter().sum::<f64>() / mid.len() as f64;
        assert!((mean - 0.04).abs() < 0.004, "{mean}");
    }

    #[test]
    fn short_tracks_are_rejected() {
        assert!(compare_csi_bfi(&[1.0; 5], &[1.0; 5], 100.0, 0.1).is_err());
        assert!(compare_csi_bfi(&[1.0; 50], &[1.0; 40], 100.0, 0.1).is_err());
    }

    #[test]
    fn csv_rows() {
        let t = metrics_csv(&[("entropy_bits".into(), 1.5)]);
        assert_eq!(t, "metric,value\nentropy_bits,1.5\n");
    }

    proptest! {
        #[test]
        fn entropy_is_bounded(vals in proptest::collection::vec(0.0f64..1.0, 32 * 6)) {
            let s = Spectrogram::new(32, 6, vals, vec![false; 6], 0.0, 0.25).unwrap();
            let h = spectral_entropy(&s).unwrap();
            prop_assert!(h >= -1e-12 && h <= 5.0 + 1e-12);
        }

        #[test]
        fn rate_is_scale_invariant(vals in proptest::collection::vec(0.0f64..1.0, 32 * 4), k in 0.01f64..100.0) {
            let s = Spectrogram::new(32, 4, vals.clone(), vec![false; 4], 0.0, 0.25).unwrap();
            let scaled = Spectrogram::new(32, 4, vals.iter().map(|v| v * k).collect(), vec![false; 4], 0.0, 0.25).unwrap();
            let a = estimate_rate(&s, (0.1, 0.7), 0.125).unwrap();
            let b = estimate_rate(&scaled, (0.1, 0.7), 0.125).unwrap();
            prop_assert!((a.bpm - b.bpm).abs() < 1e-9);
        }

        #[test]
        fn mse_is_symmetric(a in proptest::collection::vec(-1.0f64..1.0, 12), b in proptest::collection::vec(-1.0f64..1.0, 12)) {
            let sa = Spectrogram::new(3, 4, a, vec![false; 4], 0.0, 1.0).unwrap();
            let sb = Spectrogram::new(3, 4, b, vec![false; 4], 0.0, 1.0).unwrap();
            prop_assert_eq!(recovery_mse(&sa, &sb).unwrap(), recovery_mse(&sb, &sa).unwrap());
        }
    }
}
