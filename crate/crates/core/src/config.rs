//! Run configuration: a flat `key=value` file whose keys mirror the module
//! configs. Lines starting with `#` and blank lines are ignored. Every key
//! must be listed in [`KEYS`]; anything else is an error naming the key.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::RadioConfig;
use crate::sra::{MaskParams, MotionType, SraConfig};
use crate::tcn::{LossKind, TcnConfig, TrainConfig};
use crate::traffic::{TrafficKind, TrafficModel};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master RNG seed"),
    ("radio.preset", "normalized | wifi_5ghz"),
    ("radio.lambda", "carrier wavelength, m"),
    ("radio.alpha", "path-loss exponent"),
    ("radio.eta", "dynamic-channel scale"),
    ("radio.b", "dynamic-channel floor"),
    ("radio.g_tilde", "combined antenna/reflection gain"),
    ("map.x_min", "raster extent, m"),
    ("map.x_max", "raster extent, m"),
    ("map.y_min", "raster extent, m"),
    ("map.y_max", "raster extent, m"),
    ("map.step", "raster resolution, m"),
    ("map.ap", "AP position x,y"),
    ("map.ue", "subject UE position x,y"),
    ("map.subject", "subject position x,y"),
    ("map.beta", "VIR threshold"),
    ("capacity.beta", "VIR threshold"),
    ("capacity.delta_r", "subject-UE distance, m"),
    ("capacity.k", "mirror half-count"),
    ("capacity.r", "radius sweep lo:hi:step, m"),
    ("scene.file", "scene description file (default: four-person table)"),
    ("scene.rates", "four breathing rates, bpm"),
    ("scene.duration_s", "simulated duration, s"),
    ("scene.sample_rate_hz", "uniform sampling rate when traffic.kind=uniform"),
    ("traffic.kind", "ul-csi | dl-csi | ul-bfi | uniform"),
    ("traffic.mean_burst_s", "mean on-period, s"),
    ("traffic.mean_gap_s", "mean off-period, s"),
    ("traffic.rate_in_burst_hz", "frame rate within a burst, Hz"),
    ("traffic.contention_users", "users sharing the medium"),
    ("sra.motion", "respiration | gesture | activity"),
    ("sra.dt", "segmentation window, s"),
    ("sra.n_nsp", "non-sparse sample threshold"),
    ("sra.f_rs", "resampling rate, Hz"),
    ("sra.f_cut", "low-pass cutoff, Hz"),
    ("sra.n_f", "frequency bins kept"),
    ("sra.fft_len", "STFT window, samples"),
    ("sra.hop", "STFT hop, samples"),
    ("sra.min_label_slice_s", "shortest label slice, s"),
    ("dataset.frames", "label slice width, frames"),
    ("dataset.masks_per_label", "masked copies per label"),
    ("dataset.mask_fraction", "masked column share"),
    ("dataset.mask_mean_run", "mean masked run, frames"),
    ("dataset.split", "train share of label slices"),
    ("tcn.n_c", "hidden channels"),
    ("tcn.kernel_len", "taps per dilated conv"),
    ("tcn.n_blocks", "residual blocks"),
    ("tcn.dilations", "comma-separated dilation per block"),
    ("tcn.bottleneck_dim", "bottleneck channels"),
    ("tcn.bottleneck_kernel", "bottleneck taps (odd)"),
    ("tcn.delay", "look-ahead frames"),
    ("tcn.activation", "relu"),
    ("train.lr", "Adam learning rate"),
    ("train.beta1", "Adam first-moment decay"),
    ("train.beta2", "Adam second-moment decay"),
    ("train.eps", "Adam epsilon"),
    ("train.batch_size", "examples per step"),
    ("train.epochs", "passes over the training split"),
    ("train.grad_clip", "global gradient-norm cap"),
    ("train.loss", "full | masked"),
    ("train.lr_end_ratio", "final/initial learning rate (cosine)"),
    ("eval.band_lo_hz", "rate search band, Hz"),
    ("eval.band_hi_hz", "rate search band, Hz"),
    ("bfi.n_tx", "transmit antennas"),
    ("bfi.n_rx", "receive antennas"),
    ("bfi.bits_phi", "phi quantizer bits (0 = unquantized)"),
    ("bfi.bits_psi", "psi quantizer bits (0 = unquantized)"),
    ("bfi.steps", "motion steps"),
    ("bfi.span_wavelengths", "Δd_T span in wavelengths"),
    ("bfi.sweep_deg", "direction sweep span, degrees"),
    ("register.beta", "VIR threshold"),
    ("register.radius", "admission envelope around the AP, m"),
    ("register.delta_r", "subject-UE distance, m"),
    ("register.script", "arrival script file"),
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

impl RunConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format(m) => Error::format(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Sets `key`, replacing any earlier value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !known(key) {
            return Err(Error::format(format!("unknown config key `{key}`")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Sets `key` only when `value` is present; used for CLI overrides.
    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) -> Result<()> {
        match value {
            Some(v) => self.set(key, v.to_string()),
            None => Ok(()),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::format(format!("bad value `{v}` for `{key}`"))),
        }
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// A comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::format(format!("bad list item `{s}` for `{key}`")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.parsed_or("seed", 0)
    }

    /// Radio constants: the preset (or `default` when unset) with any
    /// individual fields overridden.
    pub fn radio(&self, default: RadioConfig) -> Result<RadioConfig> {
        let base = match self.get("radio.preset") {
            None => default,
            Some("normalized") => RadioConfig::normalized(),
            Some("wifi_5ghz") => RadioConfig::wifi_5ghz(),
            Some(other) => {
                return Err(Error::format(format!(
                    "unknown radio preset `{other}` (expected normalized or wifi_5ghz)"
                )))
            }
        };
        let cfg = RadioConfig {
            lambda: self.parsed_or("radio.lambda", base.lambda)?,
            alpha: self.parsed_or("radio.alpha", base.alpha)?,
            eta: self.parsed_or("radio.eta", base.eta)?,
            b: self.parsed_or("radio.b", base.b)?,
            g_tilde: self.parsed_or("radio.g_tilde", base.g_tilde)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn motion(&self) -> Result<MotionType> {
        self.parsed_or("sra.motion", MotionType::Respiration)
    }

    pub fn sra(&self) -> Result<SraConfig> {
        let b = SraConfig::for_motion(self.motion()?);
        let cfg = SraConfig {
            dt: self.parsed_or("sra.dt", b.dt)?,
            n_nsp: self.parsed_or("sra.n_nsp", b.n_nsp)?,
            f_rs: self.parsed_or("sra.f_rs", b.f_rs)?,
            f_cut: self.parsed_or("sra.f_cut", b.f_cut)?,
            n_f: self.parsed_or("sra.n_f", b.n_f)?,
            fft_len: self.parsed_or("sra.fft_len", b.fft_len)?,
            hop: self.parsed_or("sra.hop", b.hop)?,
            min_label_slice_s: self.parsed_or("sra.min_label_slice_s", b.min_label_slice_s)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mask(&self) -> Result<MaskParams> {
        Ok(MaskParams {
            fraction: self.parsed_or("dataset.mask_fraction", 0.3)?,
            mean_run: self.parsed_or("dataset.mask_mean_run", 6.0)?,
        })
    }

    /// Network shape for spectrograms with `n_f` bins.
    pub fn tcn(&self, n_f: usize) -> Result<TcnConfig> {
        let b = TcnConfig::default();
        let cfg = TcnConfig {
            n_f,
            n_c: self.parsed_or("tcn.n_c", b.n_c)?,
            kernel_len: self.parsed_or("tcn.kernel_len", b.kernel_len)?,
            n_blocks: self.parsed_or("tcn.n_blocks", b.n_blocks)?,
            dilations: self.list("tcn.dilations")?.unwrap_or(b.dilations),
            bottleneck_dim: self.parsed_or("tcn.bottleneck_dim", b.bottleneck_dim)?,
            bottleneck_kernel: self.parsed_or("tcn.bottleneck_kernel", b.bottleneck_kernel)?,
            delay: self.parsed_or("tcn.delay", b.delay)?,
            activation: self.parsed_or("tcn.activation", b.activation)?,
            seed: self.seed()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let b = TrainConfig::default();
        Ok(TrainConfig {
            lr: self.parsed_or("train.lr", b.lr)?,
            beta1: self.parsed_or("train.beta1", b.beta1)?,
            beta2: self.parsed_or("train.beta2", b.beta2)?,
            eps: self.parsed_or("train.eps", b.eps)?,
            batch_size: self.parsed_or("train.batch_size", b.batch_size)?,
            epochs: self.parsed_or("train.epochs", b.epochs)?,
            grad_clip: self.parsed_or("train.grad_clip", b.grad_clip)?,
            seed: self.seed()?,
            loss: self.parsed_or::<LossKind>("train.loss", b.loss)?,
            lr_end_ratio: self.parsed_or("train.lr_end_ratio", b.lr_end_ratio)?,
        })
    }

    /// Traffic model, or `None` for `traffic.kind=uniform`.
    pub fn traffic(&self, default: TrafficKind) -> Result<Option<TrafficModel>> {
        let kind = match self.get("traffic.kind") {
            Some("uniform") => return Ok(None),
            Some(k) => k.parse()?,
            None => default,
        };
        let b = TrafficModel::default_for(kind, self.seed()?);
        let m = TrafficModel {
            mean_burst_s: self.parsed_or("traffic.mean_burst_s", b.mean_burst_s)?,
            mean_gap_s: self.parsed_or("traffic.mean_gap_s", b.mean_gap_s)?,
            rate_in_burst_hz: self.parsed_or("traffic.rate_in_burst_hz", b.rate_in_burst_hz)?,
            contention_users: self.parsed_or("traffic.contention_users", b.contention_users)?,
            ..b
        };
        m.validate()?;
        Ok(Some(m))
    }
}

/// Parses `x,y`.
pub fn parse_point(s: &str) -> Result<crate::geometry::Point2D> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| Error::format(format!("expected x,y, got `{s}`")))?;
    let p = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::format(format!("bad coordinate `{v}` in `{s}`")))
    };
    Ok(crate::geometry::Point2D::new(p(x)?, p(y)?))
}

/// Parses `lo:hi:step`.
pub fn parse_range(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::format(format!("expected lo:hi:step, got `{s}`")));
    }
    let v = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::format(format!("bad number `{t}` in `{s}`")))
    };
    Ok((v(parts[0])?, v(parts[1])?, v(parts[2])?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("seed=3\ntrain.epochz=4\n").unwrap_err();
        assert!(err.to_string().contains("train.epochz"), "{err}");
    }

    #[test]
    fn comments_blanks_and_overrides() {
        let mut c = RunConfig::parse("# hi\n\nseed = 7\ntrain.epochs=3\n").unwrap();
        assert_eq!(c.seed().unwrap(), 7);
        c.set_opt("train.epochs", Some(9)).unwrap();
        c.set_opt::<u32>("seed", None).unwrap();
        let t = c.train().unwrap();
        assert_eq!((t.epochs, t.seed), (9, 7));
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn defaults_match_module_defaults() {
        let c = RunConfig::new();
        assert_eq!(c.sra().unwrap(), SraConfig::respiration());
        assert_eq!(c.tcn(32).unwrap(), TcnConfig::default());
        assert_eq!(c.train().unwrap(), TrainConfig::default());
        assert_eq!(c.radio(RadioConfig::normalized()).unwrap(), RadioConfig::normalized());
    }

    #[test]
    fn typed_values_are_checked() {
        let c = RunConfig::parse("tcn.dilations=1,2\ntcn.n_blocks=2\nradio.alpha=3\n").unwrap();
        assert_eq!(c.tcn(8).unwrap().dilations, vec![1, 2]);
        assert_eq!(c.radio(RadioConfig::wifi_5ghz()).unwrap().alpha, 3.0);
        let bad = RunConfig::parse("train.epochs=many\n").unwrap();
        assert!(bad.train().unwrap_err().to_string().contains("train.epochs"));
        assert!(RunConfig::parse("radio.preset=x\n").unwrap().radio(RadioConfig::normalized()).is_err());
        assert!(RunConfig::parse("no equals sign\n").is_err());
    }

    #[test]
    fn uniform_traffic_is_none() {
        let c = RunConfig::parse("traffic.kind=uniform\n").unwrap();
        assert!(c.traffic(TrafficKind::DlCsi).unwrap().is_none());
        let d = RunConfig::new().traffic(TrafficKind::UlBfi).unwrap().unwrap();
        assert_eq!(d.kind, TrafficKind::UlBfi);
    }

    #[test]
    fn points_and_ranges() {
        assert_eq!(parse_point("1.5, -2").unwrap(), crate::geometry::Point2D::new(1.5, -2.0));
        assert_eq!(parse_range("0.3:4.0:0.01").unwrap(), (0.3, 4.0, 0.01));
        assert!(parse_range("1:2").is_err());
        assert!(parse_point("1").is_err());
    }
}
