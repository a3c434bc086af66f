use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{ResampledSeries, SraConfig};
use crate::error::{Error, Result};

/// Value written into every bin of a no-data column.
pub const NO_DATA: f64 = -1.0;

/// `N_F × N_T` matrix in `[−1, 1]`, stored row-major (frequency rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_f: usize,
    pub n_t: usize,
    pub data: Vec<f64>,
    pub no_data_cols: Vec<bool>,
    pub t0: f64,
    pub frame_dt: f64,
}

impl Spectrogram {
    pub fn new(n_f: usize, n_t: usize, data: Vec<f64>, no_data_cols: Vec<bool>, t0: f64, frame_dt: f64) -> Result<Self> {
        if data.len() != n_f * n_t || no_data_cols.len() != n_t {
            return Err(Error::Shape {
                expected: format!("{n_f}x{n_t} values and {n_t} flags"),
                found: format!("{} values and {} flags", data.len(), no_data_cols.len()),
            });
        }
        Ok(Spectrogram {
            n_f,
            n_t,
            data,
            no_data_cols,
            t0,
            frame_dt,
        })
    }

    pub fn get(&self, f: usize, t: usize) -> f64 {
        self.data[f * self.n_t + t]
    }

    pub fn set(&mut self, f: usize, t: usize, v: f64) {
        self.data[f * self.n_t + t] = v;
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..self.n_f).map(|f| self.get(f, t)).collect()
    }

    pub fn frame_time(&self, t: usize) -> f64 {
        self.t0 + t as f64 * self.frame_dt
    }

    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.n_t).map(|t| self.frame_time(t)).collect()
    }

    pub fn duration(&self) -> f64 {
        self.n_t as f64 * self.frame_dt
    }

    /// Columns `a..b` as a new spectrogram.
    pub fn columns(&self, a: usize, b: usize) -> Spectrogram {
        let n_t = b - a;
        let mut data = Vec::with_capacity(self.n_f * n_t);
        for f in 0..self.n_f {
            data.extend_from_slice(&self.data[f * self.n_t + a..f * self.n_t + b]);
        }
        Spectrogram {
            n_f: self.n_f,
            n_t,
            data,
            no_data_cols: self.no_data_cols[a..b].to_vec(),
            t0: self.frame_time(a),
            frame_dt: self.frame_dt,
        }
    }

    /// Copy with the masked columns overwritten by the sentinel.
    pub fn with_mask(&self, mask: &[bool]) -> Spectrogram {
        let mut out = self.clone();
        for (t, &m) in mask.iter().enumerate() {
            if m {
                out.no_data_cols[t] = true;
                for f in 0..self.n_f {
                    out.set(f, t, NO_DATA);
                }
            }
        }
        out
    }

    /// Header `N_F N_T t0_s frame_dt_s`, `N_F` rows of values, then the flag row.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 20 + 64);
        let _ = writeln!(out, "{} {} {} {}", self.n_f, self.n_t, self.t0, self.frame_dt);
        for f in 0..self.n_f {
            let row = &self.data[f * self.n_t..(f + 1) * self.n_t];
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        let flags: Vec<&str> = self.no_data_cols.iter().map(|&b| if b { "1" } else { "0" }).collect();
        let _ = writeln!(out, "{}", flags.join(" "));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::format("empty spectrogram file"))?
            .split_whitespace()
            .collect();
        if header.len() != 4 {
            return Err(Error::format("spectrogram header must be `N_F N_T t0_s frame_dt_s`"));
        }
        let bad = |what: &str, e: &dyn std::fmt::Display| Error::format(format!("bad {what}: {e}"));
        let n_f: usize = header[0].parse().map_err(|e| bad("N_F", &e))?;
        let n_t: usize = header[1].parse().map_err(|e| bad("N_T", &e))?;
        let t0: f64 = header[2].parse().map_err(|e| bad("t0", &e))?;
        let frame_dt: f64 = header[3].parse().map_err(|e| bad("frame_dt", &e))?;
        let mut data = Vec::with_capacity(n_f * n_t);
        for f in 0..n_f {
            let line = lines
                .next()
                .ok_or_else(|| Error::format(format!("missing row {f} of {n_f}")))?;
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|e| bad("value", &e))?);
            }
            if data.len() - before != n_t {
                return Err(Error::format(format!("row {f} has {} values, expected {n_t}", data.len() - before)));
            }
        }
        let flags: Vec<bool> = lines
            .next()
            .ok_or_else(|| Error::format("missing flag row"))?
            .split_whitespace()
            .map(|t| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::format(format!("bad flag `{other}`"))),
            })
            .collect::<Result<_>>()?;
        Spectrogram::new(n_f, n_t, data, flags, t0, frame_dt)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// STFT magnitudes before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSpectrogram {
    pub n_f: usize,
    pub n_t: usize,
    /// Row-major `N_F × N_T`.
    pub magnitudes: Vec<f64>,
    pub no_data_cols: Vec<bool>,
    pub t0: f64,
    pub frame_dt: f64,
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Hann-windowed STFT magnitudes of the lowest `n_f` bins.
///
/// Each frame's mean is removed before windowing so the slowly drifting
/// phase offset does not leak into the low bins. Frame times are window
/// centers.
pub fn stft_magnitudes(rs: &ResampledSeries, cfg: &SraConfig) -> Result<RawSpectrogram> {
    cfg.validate()?;
    let len = cfg.fft_len;
    if rs.len() < len {
        return Err(Error::domain(format!(
            "series has {} samples, shorter than one {len}-sample window",
            rs.len()
        )));
    }
    let n_t = (rs.len() - len) / cfg.hop + 1;
    let n_f = cfg.n_f;
    let window = hann(len);
    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut magnitudes = vec![0.0; n_f * n_t];
    let mut flags = vec![false; n_t];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for m in 0..n_t {
        let seg = &rs.values[m * cfg.hop..m * cfg.hop + len];
        let missing = rs.no_data[m * cfg.hop..m * cfg.hop + len].iter().filter(|&&b| b).count();
        flags[m] = 2 * missing > len;
        let mean = seg.iter().sum::<f64>() / len as f64;
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for f in 0..n_f {
            magnitudes[f * n_t + m] = buf[f].norm();
        }
    }
    Ok(RawSpectrogram {
        n_f,
        n_t,
        magnitudes,
        no_data_cols: flags,
        t0: rs.t0 + len as f64 / (2.0 * rs.rate),
        frame_dt: cfg.hop as f64 / rs.rate,
    })
}

/// Joint min-max over unflagged entries into `[0, 1]`; flagged columns
/// become −1 and a constant input maps to 0.
pub fn normalize(raw: &RawSpectrogram) -> Spectrogram {
    let (n_f, n_t) = (raw.n_f, raw.n_t);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for t in (0..n_t).filter(|&t| !raw.no_data_cols[t]) {
        for f in 0..n_f {
            let v = raw.magnitudes[f * n_t + t];
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let span = hi - lo;
    let mut data = vec![0.0; n_f * n_t];
    for t in 0..n_t {
        for f in 0..n_f {
            data[f * n_t + t] = if raw.no_data_cols[t] {
                NO_DATA
            } else if span > 0.0 {
                ((raw.magnitudes[f * n_t + t] - lo) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
    Spectrogram {
        n_f,
        n_t,
        data,
        no_data_cols: raw.no_data_cols.clone(),
        t0: raw.t0,
        frame_dt: raw.frame_dt,
    }
}

/// STFT followed by normalization.
pub fn spectrogram(rs: &ResampledSeries, cfg: &SraConfig) -> Result<Spectrogram> {
    Ok(normalize(&stft_magnitudes(rs, cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>, no_data: Vec<bool>) -> ResampledSeries {
        ResampledSeries {
            t0: 0.0,
            rate: 64.0,
            values,
            no_data,
        }
    }

    fn raw(n_f: usize, n_t: usize, m: Vec<f64>, flags: Vec<bool>) -> RawSpectrogram {
        RawSpectrogram {
            n_f,
            n_t,
            magnitudes: m,
            no_data_cols: flags,
            t0: 0.0,
            frame_dt: 1.0,
        }
    }

    #[test]
    fn bin_centered_tone_peaks_in_its_bin() {
        let cfg = SraConfig::respiration();
        let k = 3;
        let f = k as f64 * cfg.bin_hz();
        let n = 64 * 60;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / 64.0).sin()).collect();
        let s = spectrogram(&series(x, vec![false; n]), &cfg).unwrap();
        for t in 0..s.n_t {
            let col = s.column(t);
            let arg = (0..s.n_f).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
            assert_eq!(arg, k);
        }
    }

    #[test]
    fn all_missing_input_is_all_sentinel() {
        let cfg = SraConfig::respiration();
        let n = 2000;
        let s = spectrogram(&series(vec![0.3; n], vec![true; n]), &cfg).unwrap();
        assert!(s.no_data_cols.iter().all(|&b| b));
        assert!(s.data.iter().all(|&v| v == NO_DATA));
    }

    #[test]
    fn short_series_is_an_error() {
        let cfg = SraConfig::respiration();
        assert!(stft_magnitudes(&series(vec![0.0; 100], vec![false; 100]), &cfg).is_err());
    }

    #[test]
    fn frame_energy_satisfies_parseval() {
        let len = 64;
        let x: Vec<f64> = (0..len).map(|i| ((i * 7919) % 31) as f64 / 31.0 - 0.4).collect();
        let w = hann(len);
        let mean = x.iter().sum::<f64>() / len as f64;
        let xw: Vec<f64> = x.iter().zip(&w).map(|(a, b)| (a - mean) * b).collect();
        let mut buf: Vec<Complex64> = xw.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(len).process(&mut buf);
        let time_energy: f64 = xw.iter().map(|v| v * v).sum();
        let spec_energy: f64 = buf.iter().map(|z| z.norm_sqr()).sum::<f64>() / len as f64;
        assert!((time_energy / spec_energy - 1.0).abs() < 1e-6);

        // The kept bins agree with the direct transform.
        let cfg = SraConfig {
            fft_len: len,
            hop: len,
            ..SraConfig::motion()
        };
        let r = stft_magnitudes(&series(x, vec![false; len]), &cfg).unwrap();
        for f in 0..cfg.n_f {
            assert!((r.magnitudes[f] - buf[f].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_examples() {
        let s = normalize(&raw(1, 3, vec![2.0, 4.0, 6.0], vec![false; 3]));
        assert_eq!(s.data, vec![0.0, 0.5, 1.0]);
        let s = normalize(&raw(2, 2, vec![3.0; 4], vec![false; 2]));
        assert_eq!(s.data, vec![0.0; 4]);
        let s = normalize(&raw(2, 3, vec![1.0, 9.0, 5.0, 3.0, 0.0, 7.0], vec![false, true, false]));
        assert_eq!(s.get(0, 1), NO_DATA);
        assert_eq!(s.get(1, 1), NO_DATA);
        assert!(s.get(0, 0) < s.get(1, 0) && s.get(1, 0) < s.get(0, 2) && s.get(0, 2) < s.get(1, 2));
    }

    #[test]
    fn normalize_is_idempotent() {
        let r = raw(2, 3, vec![0.0, 0.2, 1.0, 0.7, 0.1, 0.4], vec![false; 3]);
        let once = normalize(&r);
        let twice = normalize(&raw(2, 3, once.data.clone(), vec![false; 3]));
        assert_eq!(once.data, twice.data);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let s = normalize(&raw(2, 3, vec![0.1, 0.3, 0.7, 0.11, 1.0 / 3.0, 0.5], vec![false, true, false]));
        assert_eq!(Spectrogram::from_text(&s.to_text()).unwrap(), s);
        assert!(Spectrogram::from_text("2 3 0 1\n0 0 0\n").is_err());
    }
}
