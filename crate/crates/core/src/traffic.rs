//! Bursty, intermittent frame arrivals.
//!
//! A two-state (on/off) Markov-modulated Poisson process: on-periods last
//! `Exp(mean_burst_s)` and carry Poisson arrivals at `rate_in_burst_hz`;
//! off-periods last `Exp(mean_gap_s · contention_users)` and carry nothing.
//! Beamforming-feedback streams are further thinned to a tenth and capped at
//! ten reports in any one-second window.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::rng;

/// Which frames carry the sensing samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrafficKind {
    UlCsi,
    DlCsi,
    UlBfi,
}

impl TrafficKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrafficKind::UlCsi => "ul-csi",
            TrafficKind::DlCsi => "dl-csi",
            TrafficKind::UlBfi => "ul-bfi",
        }
    }
}

impl fmt::Display for TrafficKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrafficKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "ul-csi" => Ok(TrafficKind::UlCsi),
            "dl-csi" => Ok(TrafficKind::DlCsi),
            "ul-bfi" => Ok(TrafficKind::UlBfi),
            other => Err(Error::format(format!(
                "unknown traffic kind `{other}` (expected ul-csi, dl-csi or ul-bfi)"
            ))),
        }
    }
}

/// Maximum beamforming reports in any one-second window.
pub const BFI_MAX_PER_SECOND: usize = 10;
/// Fraction of sounding opportunities that produce a feedback report.
pub const BFI_THINNING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel {
    pub kind: TrafficKind,
    pub mean_burst_s: f64,
    pub mean_gap_s: f64,
    pub rate_in_burst_hz: f64,
    /// Off-periods are stretched by this many contending users.
    pub contention_users: u32,
    pub seed: u64,
}

impl TrafficModel {
    /// Defaults per strategy. A single-user downlink stream carries on the
    /// order of a hundred frames per 100 ms while in a burst.
    pub fn default_for(kind: TrafficKind, seed: u64) -> Self {
        let (mean_burst_s, mean_gap_s, rate_in_burst_hz) = match kind {
            TrafficKind::DlCsi => (0.4, 0.4, 1000.0),
            TrafficKind::UlCsi => (0.3, 0.5, 200.0),
            TrafficKind::UlBfi => (0.4, 0.4, 200.0),
        };
        TrafficModel {
            kind,
            mean_burst_s,
            mean_gap_s,
            rate_in_burst_hz,
            contention_users: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_burst_s > 0.0) || !(self.mean_gap_s > 0.0) {
            return Err(Error::domain("burst and gap durations must be positive"));
        }
        if !(self.rate_in_burst_hz > 0.0) {
            return Err(Error::domain("in-burst rate must be positive"));
        }
        if self.contention_users < 1 {
            return Err(Error::domain("contention_users must be >= 1"));
        }
        Ok(())
    }
}

/// Strictly increasing sample instants within `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleTimes {
    pub times: Vec<f64>,
}

impl SampleTimes {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::domain("sample times must be finite and non-negative"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("sample times must be strictly increasing"));
        }
        Ok(SampleTimes { times })
    }

    /// Evenly spaced instants `0, 1/rate, ...` strictly below `duration`.
    pub fn uniform(rate_hz: f64, duration: f64) -> Self {
        let n = (duration * rate_hz).ceil().max(0.0) as usize;
        SampleTimes {
            times: (0..n)
                .map(|i| i as f64 / rate_hz)
                .filter(|&t| t < duration)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// One timestamp per line, six decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.times.len() * 12);
        for t in &self.times {
            let _ = writeln!(out, "{t:.6}");
        }
        out
    }

    /// Parses one timestamp per line; also accepts a CSV whose first column
    /// is the timestamp, with an optional header row.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let field = line.split(',').next().unwrap_or("").trim();
            match field.parse::<f64>() {
                Ok(t) => times.push(t),
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(Error::format(format!("line {}: bad timestamp `{field}`: {e}", i + 1)))
                }
            }
        }
        SampleTimes::new(times)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Largest number of samples inside any closed window of length `width`.
    pub fn max_in_window(&self, width: f64) -> usize {
        let mut best = 0;
        let mut lo = 0;
        for hi in 0..self.times.len() {
            while self.times[hi] - self.times[lo] > width {
                lo += 1;
            }
            best = best.max(hi - lo + 1);
        }
        best
    }

    /// Variance-to-mean ratio of counts in consecutive windows of `width`
    /// over `[0, duration)`. Poisson sampling gives 1.
    pub fn burstiness_index(&self, width: f64, duration: f64) -> f64 {
        let bins = (duration / width).floor() as usize;
        if bins == 0 {
            return f64::NAN;
        }
        let mut counts = vec![0.0f64; bins];
        for &t in &self.times {
            let k = (t / width) as usize;
            if k < bins {
                counts[k] += 1.0;
            }
        }
        let mean = counts.iter().sum::<f64>() / bins as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / bins as f64;
        var / mean
    }
}

fn quantize_us(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

/// Draws the arrival instants of one stream over `[0, duration]`.
///
/// Instants are rounded to whole microseconds (the on-disk resolution) and
/// coincident instants are merged.
pub fn generate_arrivals(model: &TrafficModel, duration: f64) -> Result<SampleTimes> {
    model.validate()?;
    if !(duration > 0.0) {
        return Err(Error::domain(format!("duration must be positive, got {duration}")));
    }
    let mut rng = rng::stream(model.seed, &[rng::tag::TRAFFIC, model.kind as u64]);
    let mean_off = model.mean_gap_s * model.contention_users as f64;
    let on_dwell = Exp::new(1.0 / model.mean_burst_s).map_err(|e| Error::domain(e.to_string()))?;
    let off_dwell = Exp::new(1.0 / mean_off).map_err(|e| Error::domain(e.to_string()))?;
    let inter_arrival =
        Exp::new(model.rate_in_burst_hz).map_err(|e| Error::domain(e.to_string()))?;

    let p_on = model.mean_burst_s / (model.mean_burst_s + mean_off);
    let mut on = rng.gen::<f64>() < p_on;
    let mut t = 0.0;
    let mut raw = Vec::new();
    while t < duration {
        if on {
            let end = (t + on_dwell.sample(&mut rng)).min(duration);
            let mut a = t + inter_arrival.sample(&mut rng);
            while a <= end {
                raw.push(a);
                a += inter_arrival.sample(&mut rng);
            }
            t = end;
        } else {
            t += off_dwell.sample(&mut rng);
        }
        on = !on;
    }

    if model.kind == TrafficKind::UlBfi {
        raw.retain(|_| rng.gen::<f64>() < BFI_THINNING);
    }

    let mut times: Vec<f64> = Vec::with_capacity(raw.len());
    for a in raw {
        let q = quantize_us(a).min(duration);
        if times.last().map_or(true, |&last| q > last) {
            times.push(q);
        }
    }

    if model.kind == TrafficKind::UlBfi {
        times = cap_rate(&times, BFI_MAX_PER_SECOND, 1.0);
    }
    SampleTimes::new(times)
}

/// Greedily keeps instants so that no closed window of length `width`
/// holds more than `max_count` of them.
fn cap_rate(times: &[f64], max_count: usize, width: f64) -> Vec<f64> {
    let mut kept: Vec<f64> = Vec::with_capacity(times.len());
    for &t in times {
        let n = kept.len();
        if n < max_count || t - kept[n - max_count] > width {
            kept.push(t);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kind: TrafficKind, seed: u64) -> TrafficModel {
        TrafficModel::default_for(kind, seed)
    }

    #[test]
    fn vanishing_gaps_recover_the_in_burst_rate() {
        // 20 seeds, 100 s each; gaps of 1 ns leave the process always on.
        for seed in 0..20 {
            let m = TrafficModel {
                mean_gap_s: 1e-9,
                rate_in_burst_hz: 200.0,
                ..model(TrafficKind::DlCsi, seed)
            };
            let s = generate_arrivals(&m, 100.0).unwrap();
            let rate = s.len() as f64 / 100.0;
            assert!((rate / 200.0 - 1.0).abs() < 0.05, "seed {seed}: rate {rate}");
        }
    }

    #[test]
    fn tiny_duration_is_often_empty() {
        let empties = (0..50)
            .filter(|&seed| {
                let m = TrafficModel {
                    mean_gap_s: 1.0,
                    ..model(TrafficKind::UlCsi, seed)
                };
                generate_arrivals(&m, 1e-4).unwrap().is_empty()
            })
            .count();
        assert!(empties > 25, "{empties}");
    }

    #[test]
    fn bfi_cap_holds_in_every_window() {
        for seed in 0..10 {
            let m = TrafficModel {
                rate_in_burst_hz: 200.0,
                ..model(TrafficKind::UlBfi, seed)
            };
            let s = generate_arrivals(&m, 60.0).unwrap();
            assert!(s.max_in_window(1.0) <= BFI_MAX_PER_SECOND);
            assert!(!s.is_empty());
        }
        let dense: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
        let capped = cap_rate(&dense, 10, 1.0);
        let s = SampleTimes::new(capped).unwrap();
        assert_eq!(s.max_in_window(1.0), 10);
    }

    #[test]
    fn determinism_and_bounds() {
        let m = model(TrafficKind::DlCsi, 42);
        let a = generate_arrivals(&m, 10.0).unwrap();
        let b = generate_arrivals(&m, 10.0).unwrap();
        assert_eq!(a, b);
        assert!(a.times.iter().all(|&t| (0.0..=10.0).contains(&t)));
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn default_downlink_is_bursty() {
        for seed in 0..5 {
            let m = model(TrafficKind::DlCsi, seed);
            let s = generate_arrivals(&m, 100.0).unwrap();
            assert!(s.burstiness_index(0.1, 100.0) > 1.0);
        }
    }

    #[test]
    fn contention_reduces_sample_count() {
        let median = |users: u32| {
            let mut counts: Vec<usize> = (0..20)
                .map(|seed| {
                    let m = TrafficModel {
                        contention_users: users,
                        ..model(TrafficKind::DlCsi, seed)
                    };
                    generate_arrivals(&m, 30.0).unwrap().len()
                })
                .collect();
            counts.sort_unstable();
            counts[10]
        };
        let (one, two, four) = (median(1), median(2), median(4));
        assert!(one > two && two > four, "{one} {two} {four}");
    }

    #[test]
    fn text_round_trip_is_exact() {
        let s = generate_arrivals(&model(TrafficKind::UlCsi, 3), 5.0).unwrap();
        let back = SampleTimes::from_text(&s.to_text()).unwrap();
        assert_eq!(s, back);
        let csv = "t_s,re,im\n0.5,1,0\n0.75,1,0\n";
        assert_eq!(SampleTimes::from_text(csv).unwrap().times, vec![0.5, 0.75]);
        assert!(SampleTimes::from_text("0.2\n0.1\n").is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("ul-bfi".parse::<TrafficKind>().unwrap(), TrafficKind::UlBfi);
        assert_eq!("dl_csi".parse::<TrafficKind>().unwrap(), TrafficKind::DlCsi);
        assert!("wifi".parse::<TrafficKind>().is_err());
    }
}
