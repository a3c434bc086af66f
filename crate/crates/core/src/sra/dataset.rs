use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::Spectrogram;
use crate::error::{Error, Result};
use crate::rng;

/// Bursty column-mask parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParams {
    /// Long-run fraction of masked columns.
    pub fraction: f64,
    /// Mean length of a masked run, in frames.
    pub mean_run: f64,
}

/// Column mask from a two-state Markov chain over frames.
///
/// A masked run ends with probability `1/mean_run` per frame; a present run
/// ends with the probability that makes the stationary masked share equal
/// `fraction`. The first frame is drawn from the stationary distribution.
pub fn make_mask(n_t: usize, params: MaskParams, seed: u64) -> Result<Vec<bool>> {
    let MaskParams { fraction, mean_run } = params;
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::domain(format!("mask fraction must lie in [0, 1], got {fraction}")));
    }
    if !(mean_run >= 1.0) {
        return Err(Error::domain(format!("mean run must be >= 1 frame, got {mean_run}")));
    }
    if fraction == 0.0 {
        return Ok(vec![false; n_t]);
    }
    if fraction == 1.0 {
        return Ok(vec![true; n_t]);
    }
    let leave_missing = 1.0 / mean_run;
    let enter_missing = (fraction / (mean_run * (1.0 - fraction))).min(1.0);
    let mut r = rng::stream(seed, &[rng::tag::MASK]);
    let mut missing = r.gen::<f64>() < fraction;
    let mut out = Vec::with_capacity(n_t);
    for _ in 0..n_t {
        out.push(missing);
        let u = r.gen::<f64>();
        missing = if missing { u >= leave_missing } else { u < enter_missing };
    }
    Ok(out)
}

/// A training pair: masked input and its clean label.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub x: Spectrogram,
    pub y: Spectrogram,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub train: Vec<Pair>,
    pub test: Vec<Pair>,
}

/// Cuts a spectrogram into consecutive `frames`-wide label slices, dropping
/// any chunk that contains a no-data column.
pub fn label_slices(spec: &Spectrogram, frames: usize) -> Vec<Spectrogram> {
    if frames == 0 {
        return Vec::new();
    }
    (0..spec.n_t / frames)
        .map(|i| spec.columns(i * frames, (i + 1) * frames))
        .filter(|s| s.no_data_cols.iter().all(|&b| !b))
        .collect()
}

/// Splits label slices into train/test by a seeded shuffle, then pairs each
/// label with `masks_per_label` freshly masked copies of itself.
pub fn build_dataset(
    labels: &[Spectrogram],
    masks_per_label: usize,
    mask: MaskParams,
    split_fraction: f64,
    min_label_slice_s: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&split_fraction) {
        return Err(Error::domain("split fraction must lie in [0, 1]"));
    }
    let eligible: Vec<&Spectrogram> = labels
        .iter()
        .filter(|s| s.duration() >= min_label_slice_s - 1e-9 && s.no_data_cols.iter().all(|&b| !b))
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoData(format!(
            "no label slice of at least {min_label_slice_s} s without missing columns"
        )));
    }
    let n_f = eligible[0].n_f;
    if let Some(bad) = eligible.iter().find(|s| s.n_f != n_f) {
        return Err(Error::Shape {
            expected: format!("{n_f} frequency bins"),
            found: format!("{}", bad.n_f),
        });
    }
    let mut order: Vec<usize> = (0..eligible.len()).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::tag::SPLIT]));
    let n_train = (split_fraction * eligible.len() as f64).round() as usize;

    let mut ds = Dataset::default();
    for (pos, &i) in order.iter().enumerate() {
        let y = eligible[i];
        for j in 0..masks_per_label {
            let m = make_mask(y.n_t, mask, rng::derive_seed(seed, &[rng::tag::MASK, i as u64, j as u64]))?;
            let pair = Pair {
                x: y.with_mask(&m),
                y: y.clone(),
                mask: m,
            };
            if pos < n_train {
                ds.train.push(pair);
            } else {
                ds.test.push(pair);
            }
        }
    }
    Ok(ds)
}

fn write_split(dir: &Path, pairs: &[Pair]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, p) in pairs.iter().enumerate() {
        p.x.write(&dir.join(format!("{i:04}.x")))?;
        p.y.write(&dir.join(format!("{i:04}.y")))?;
    }
    Ok(())
}

/// Writes `train/NNNN.{x,y}` and `test/NNNN.{x,y}` under `dir`.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    write_split(&dir.join("train"), &ds.train)?;
    write_split(&dir.join("test"), &ds.test)
}

fn read_split(dir: &Path) -> Result<Vec<Pair>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut stems: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_suffix(".y").map(str::to_string)
        })
        .collect();
    stems.sort();
    stems
        .into_iter()
        .map(|s| {
            let x = Spectrogram::read(&dir.join(format!("{s}.x")))?;
            let y = Spectrogram::read(&dir.join(format!("{s}.y")))?;
            if (x.n_f, x.n_t) != (y.n_f, y.n_t) {
                return Err(Error::Shape {
                    expected: format!("{}x{}", y.n_f, y.n_t),
                    found: format!("{}x{} in {s}.x", x.n_f, x.n_t),
                });
            }
            let mask = x
                .no_data_cols
                .iter()
                .zip(&y.no_data_cols)
                .map(|(&a, &b)| a && !b)
                .collect();
            Ok(Pair { x, y, mask })
        })
        .collect()
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    Ok(Dataset {
        train: read_split(&dir.join("train"))?,
        test: read_split(&dir.join("test"))?,
    })
}
