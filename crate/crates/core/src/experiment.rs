//! Canned scenes and trials shared by the CLI and the acceptance suite.
//!
//! The recovery corpus is two four-person tables (eight subjects) with
//! staggered breath holds, sampled uniformly so the label spectrograms are
//! clean. The separability scene is one table whose subjects hold their
//! breath in turn.

use crate::error::Result;
use crate::metrics::{estimate_rate, interpolate_columns, merge_known, recovery_mse, spectral_entropy};
use crate::scene::{Link, MotionProfile, Scene};
use crate::sra::{build_dataset, label_slices, process, Dataset, MaskParams, Pair, SraConfig, Spectrogram};
use crate::tcn::{train_with, EpochLoss, TcnConfig, TcnModel, TrainConfig};

/// Uniform sampling rate used for clean reference captures, Hz.
pub const REFERENCE_RATE_HZ: f64 = 100.0;

/// Breathing band searched by the rate estimator, Hz (9 to 36 bpm).
pub const RESPIRATION_BAND_HZ: (f64, f64) = (0.15, 0.6);

/// Uniform sample instants over `[0, duration)`.
pub fn uniform_times(rate_hz: f64, duration: f64) -> Vec<f64> {
    let n = (duration * rate_hz).round() as usize;
    (0..n).map(|i| i as f64 / rate_hz).collect()
}

fn set_holds(scene: &mut Scene, holds: impl Fn(usize) -> Vec<(f64, f64)>) {
    for (i, u) in scene.users.iter_mut().enumerate() {
        if let MotionProfile::Respiration { holds: h, .. } = &mut u.motion {
            *h = holds(i);
        }
    }
}

/// Two tables with distinct rates; every subject holds for 12 s once per
/// 55 s, offset per subject.
pub fn respiration_corpus(seed: u64, duration: f64) -> Vec<Scene> {
    [[12.0, 15.0, 18.0, 21.0], [14.0, 17.0, 20.0, 23.0]]
        .iter()
        .enumerate()
        .map(|(k, rates)| {
            let mut sc = Scene::four_person_table(*rates, seed.wrapping_mul(10).wrapping_add(k as u64));
            set_holds(&mut sc, |i| {
                let mut out = Vec::new();
                let mut a = 20.0 + 13.0 * i as f64 + 7.0 * k as f64;
                while a + 15.0 < duration {
                    out.push((a, a + 12.0));
                    a += 55.0;
                }
                out
            });
            sc
        })
        .collect()
}

/// Near-field spectrogram of every UE in every scene, uniformly sampled.
pub fn corpus_spectrograms(scenes: &[Scene], duration: f64, cfg: &SraConfig) -> Result<Vec<Spectrogram>> {
    let times = uniform_times(REFERENCE_RATE_HZ, duration);
    let mut out = Vec::new();
    for sc in scenes {
        for i in 0..sc.users.len() {
            let s = sc.render_csi(Link::Ue(i), &times)?;
            out.push(process(&s, 0.0, duration, cfg)?.0);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySetup {
    pub duration_s: f64,
    /// Label slice width, frames.
    pub frames: usize,
    pub masks_per_label: usize,
    pub mask: MaskParams,
    pub split: f64,
    pub sra: SraConfig,
    pub tcn: TcnConfig,
    pub train: TrainConfig,
}

impl Default for RecoverySetup {
    /// Eight subjects for 225 s each (30 min in total), 16 s label slices,
    /// 30% of columns masked in runs of about 1.5 s.
    fn default() -> Self {
        RecoverySetup {
            duration_s: 225.0,
            frames: 64,
            masks_per_label: 4,
            mask: MaskParams {
                fraction: 0.3,
                mean_run: 6.0,
            },
            split: 0.7,
            sra: SraConfig::respiration(),
            tcn: TcnConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    pub model_mse: f64,
    pub interp_mse: f64,
    pub sentinel_mse: f64,
    pub history: Vec<EpochLoss>,
}

pub fn recovery_dataset(setup: &RecoverySetup, seed: u64) -> Result<Dataset> {
    let scenes = respiration_corpus(seed, setup.duration_s);
    let labels: Vec<Spectrogram> = corpus_spectrograms(&scenes, setup.duration_s, &setup.sra)?
        .iter()
        .flat_map(|s| label_slices(s, setup.frames))
        .collect();
    build_dataset(
        &labels,
        setup.masks_per_label,
        setup.mask,
        setup.split,
        setup.sra.min_label_slice_s,
        seed,
    )
}

fn mean_over(pairs: &[Pair], f: impl Fn(&Pair) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for p in pairs {
        total += f(p)?;
    }
    Ok(total / pairs.len().max(1) as f64)
}

/// Linear-interpolation fill and sentinel passthrough errors.
pub fn baseline_mse(pairs: &[Pair]) -> Result<(f64, f64)> {
    Ok((
        mean_over(pairs, |p| recovery_mse(&interpolate_columns(&p.x)?, &p.y))?,
        mean_over(pairs, |p| recovery_mse(&p.x, &p.y))?,
    ))
}

/// Recovery error with known columns kept and missing ones taken from the
/// model.
pub fn model_mse(model: &TcnModel, pairs: &[Pair]) -> Result<f64> {
    mean_over(pairs, |p| recovery_mse(&merge_known(&p.x, &model.predict(&p.x)?)?, &p.y))
}

/// Builds the corpus, trains a fresh network and scores it on the test split.
pub fn recovery_trial(setup: &RecoverySetup, seed: u64) -> Result<RecoveryOutcome> {
    let ds = recovery_dataset(setup, seed)?;
    let tcn = TcnConfig {
        n_f: setup.sra.n_f,
        seed,
        ..setup.tcn.clone()
    };
    let train = TrainConfig { seed, ..setup.train };
    let (model, history) = train_with(TcnModel::new(tcn)?, &ds, &train, |_| {})?;
    let (interp_mse, sentinel_mse) = baseline_mse(&ds.test)?;
    Ok(RecoveryOutcome {
        model_mse: model_mse(&model, &ds.test)?,
        interp_mse,
        sentinel_mse,
        history,
    })
}

pub const SEPARABILITY_RATES: [f64; 4] = [13.0, 16.0, 19.0, 22.0];
pub const SEPARABILITY_DURATION_S: f64 = 120.0;
pub const HOLD_S: f64 = 20.0;

/// One table at [`SEPARABILITY_RATES`]; subject `i` holds its breath over
/// `[10 + 25i, 30 + 25i)` s.
pub fn separability_scene(seed: u64) -> Scene {
    let mut sc = Scene::four_person_table(SEPARABILITY_RATES, seed);
    set_holds(&mut sc, |i| {
        let a = 10.0 + 25.0 * i as f64;
        vec![(a, a + HOLD_S)]
    });
    sc
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub link: Link,
    pub estimated_bpm: f64,
    pub entropy_bits: f64,
    /// Respiration-band energy outside holds over inside holds, dB; `None`
    /// when no frame lies wholly inside or wholly outside a hold.
    pub hold_drop_db: Option<f64>,
}

/// Mean respiration-band energy of frames whose window lies wholly inside
/// (`inside = true`) or wholly outside every hold.
fn band_energy(spec: &Spectrogram, cfg: &SraConfig, band: (f64, f64), holds: &[(f64, f64)], inside: bool) -> Option<f64> {
    let half = cfg.fft_len as f64 / (2.0 * cfg.f_rs);
    let bin = cfg.bin_hz();
    let (lo, hi) = band;
    let bins: Vec<usize> = (0..spec.n_f)
        .filter(|&f| f as f64 * bin >= lo - 1e-9 && f as f64 * bin <= hi + 1e-9)
        .collect();
    let mut total = 0.0;
    let mut n = 0usize;
    for t in (0..spec.n_t).filter(|&t| !spec.no_data_cols[t]) {
        let (a, b) = (spec.frame_time(t) - half, spec.frame_time(t) + half);
        let within = holds.iter().any(|&(s, e)| a >= s && b <= e);
        let clear = holds.iter().all(|&(s, e)| b <= s || a >= e);
        if (inside && within) || (!inside && clear) {
            total += bins.iter().map(|&f| spec.get(f, t).powi(2)).sum::<f64>();
            n += 1;
        }
    }
    (n > 0).then(|| total / n as f64)
}

/// Rate, entropy and hold visibility of one link's spectrogram; `band` is
/// the rate search band in Hz.
pub fn analyze_link(
    spec: &Spectrogram,
    cfg: &SraConfig,
    band: (f64, f64),
    link: Link,
    holds: &[(f64, f64)],
) -> Result<LinkReport> {
    let rate = estimate_rate(spec, band, cfg.bin_hz())?;
    let energy = |inside| band_energy(spec, cfg, band, holds, inside);
    let hold_drop_db = match (energy(false), energy(true)) {
        (Some(out), Some(inn)) if inn > 0.0 => Some(10.0 * (out / inn).log10()),
        (Some(_), Some(_)) => Some(f64::INFINITY),
        _ => None,
    };
    Ok(LinkReport {
        link,
        estimated_bpm: rate.bpm,
        entropy_bits: spectral_entropy(spec)?,
        hold_drop_db,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityReport {
    pub true_bpm: Vec<f64>,
    pub ue: Vec<LinkReport>,
    pub baseline: LinkReport,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl SeparabilityReport {
    /// `|estimate − truth|` per UE.
    pub fn near_field_errors(&self) -> Vec<f64> {
        self.ue
            .iter()
            .zip(&self.true_bpm)
            .map(|(r, t)| (r.estimated_bpm - t).abs())
            .collect()
    }

    /// The single baseline estimate scored against each subject in turn.
    pub fn baseline_errors(&self) -> Vec<f64> {
        self.true_bpm.iter().map(|t| (self.baseline.estimated_bpm - t).abs()).collect()
    }

    pub fn near_field_median_error(&self) -> f64 {
        median(self.near_field_errors())
    }

    pub fn baseline_median_error(&self) -> f64 {
        median(self.baseline_errors())
    }

    pub fn near_field_mean_entropy(&self) -> f64 {
        self.ue.iter().map(|r| r.entropy_bits).sum::<f64>() / self.ue.len().max(1) as f64
    }
}

/// Renders every UE and the baseline observer at `times` and analyzes each.
pub fn separability_trial(scene: &Scene, times: &[f64], duration: f64, cfg: &SraConfig) -> Result<SeparabilityReport> {
    let mut ue = Vec::new();
    let mut true_bpm = Vec::new();
    for (i, u) in scene.users.iter().enumerate() {
        let (rate, holds) = match &u.motion {
            MotionProfile::Respiration { rate_bpm, holds, .. } => (*rate_bpm, holds.clone()),
            _ => (f64::NAN, Vec::new()),
        };
        let s = scene.render_csi(Link::Ue(i), times)?;
        let (spec, _) = process(&s, 0.0, duration, cfg)?;
        ue.push(analyze_link(&spec, cfg, RESPIRATION_BAND_HZ, Link::Ue(i), &holds)?);
        true_bpm.push(rate);
    }
    let s = scene.render_baseline(times)?;
    let (spec, _) = process(&s, 0.0, duration, cfg)?;
    let baseline = analyze_link(&spec, cfg, RESPIRATION_BAND_HZ, Link::Baseline, &[])?;
    Ok(SeparabilityReport {
        true_bpm,
        ue,
        baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_has_eight_subjects_with_holds() {
        let sc = respiration_corpus(1, 225.0);
        assert_eq!(sc.iter().map(|s| s.users.len()).sum::<usize>(), 8);
        for s in &sc {
            s.validate().unwrap();
            for u in &s.users {
                let MotionProfile::Respiration { holds, .. } = &u.motion else { panic!() };
                assert!(!holds.is_empty());
                assert!(holds.iter().all(|&(_, b)| b < 225.0));
            }
        }
    }

    #[test]
    fn separability_holds_are_sequential() {
        let sc = separability_scene(0);
        sc.validate().unwrap();
        let mut last = 0.0;
        for u in &sc.users {
            let MotionProfile::Respiration { holds, .. } = &u.motion else { panic!() };
            assert!(holds[0].0 >= last);
            last = holds[0].1;
        }
        assert!(last <= SEPARABILITY_DURATION_S);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }
}
