use std::fmt::Write as _;

use rand::seq::SliceRandom;

use super::{batch_loss, loss_and_gradients, Example, TcnModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::sra::Dataset;

/// Which entries the training loss covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Every entry of the spectrogram.
    Full,
    /// Only the masked columns.
    MaskedOnly,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Full => "full",
            LossKind::MaskedOnly => "masked",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(LossKind::Full),
            "masked" | "masked-only" | "masked_only" => Ok(LossKind::MaskedOnly),
            other => Err(Error::format(format!("unknown loss `{other}` (expected full or masked)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global gradient-norm ceiling.
    pub grad_clip: f64,
    pub seed: u64,
    pub loss: LossKind,
    /// Cosine decay of the step size across epochs, ending at
    /// `lr · lr_end_ratio`; 1 keeps it constant.
    pub lr_end_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 16,
            epochs: 30,
            grad_clip: 5.0,
            seed: 0,
            loss: LossKind::Full,
            lr_end_ratio: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::domain("lr must be positive"));
        }
        if !(0.0 < self.beta1 && self.beta1 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::domain(format!(
                "need 0 < beta1 < beta2 < 1, got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.eps > 0.0) || !(self.grad_clip > 0.0) {
            return Err(Error::domain("eps and grad_clip must be positive"));
        }
        if !(self.lr_end_ratio > 0.0 && self.lr_end_ratio <= 1.0) {
            return Err(Error::domain("lr_end_ratio must lie in (0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// Adam state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// One bias-corrected update with step size `lr`; parameters are
    /// rounded to `f32` afterwards.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let step = lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.eps);
            params[i] = (params[i] - step) as f32 as f64;
        }
    }
}

fn clip(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= s;
        }
    }
}

/// Step size for a 1-based epoch under the cosine schedule.
pub fn epoch_lr(tcfg: &TrainConfig, epoch: usize) -> f64 {
    let r = tcfg.lr_end_ratio;
    if r >= 1.0 || tcfg.epochs <= 1 {
        return tcfg.lr;
    }
    let x = (epoch - 1) as f64 / (tcfg.epochs - 1) as f64;
    tcfg.lr * (r + (1.0 - r) * 0.5 * (1.0 + (std::f64::consts::PI * x).cos()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches.
    pub train_mse: f64,
    /// Loss on the held-out split after the epoch, if there is one.
    pub test_mse: Option<f64>,
}

/// Mean loss of the model over a set of examples.
pub fn evaluate(model: &TcnModel, examples: &[Example], kind: LossKind) -> Result<f64> {
    batch_loss(model, examples, kind)
}

pub fn train(model: TcnModel, ds: &Dataset, tcfg: &TrainConfig) -> Result<(TcnModel, Vec<EpochLoss>)> {
    train_with(model, ds, tcfg, |_| {})
}

/// Mini-batch Adam with per-epoch seeded shuffling; `on_epoch` sees each
/// history row as it is produced.
pub fn train_with(
    mut model: TcnModel,
    ds: &Dataset,
    tcfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLoss),
) -> Result<(TcnModel, Vec<EpochLoss>)> {
    tcfg.validate()?;
    if ds.train.is_empty() {
        return Err(Error::NoData("training split is empty".into()));
    }
    let train: Vec<Example> = ds.train.iter().map(Example::from_pair).collect::<Result<_>>()?;
    let test: Vec<Example> = ds.test.iter().map(Example::from_pair).collect::<Result<_>>()?;
    let mut adam = Adam::new(model.parameter_count());
    let mut history = Vec::with_capacity(tcfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=tcfg.epochs {
        order.shuffle(&mut rng::stream(tcfg.seed, &[rng::tag::SHUFFLE, epoch as u64]));
        let lr = epoch_lr(tcfg, epoch);
        let mut sum = 0.0;
        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (loss, mut grads) = loss_and_gradients(&model, &batch, tcfg.loss)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, loss });
            }
            clip(&mut grads, tcfg.grad_clip);
            adam.update(model.params_mut(), &grads, lr, tcfg);
            sum += loss * chunk.len() as f64;
        }
        let train_mse = sum / train.len() as f64;
        let test_mse = if test.is_empty() {
            None
        } else {
            Some(evaluate(&model, &test, tcfg.loss)?)
        };
        if !train_mse.is_finite() || test_mse.is_some_and(|t| !t.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: if train_mse.is_finite() { test_mse.unwrap_or(f64::NAN) } else { train_mse },
            });
        }
        let row = EpochLoss {
            epoch,
            train_mse,
            test_mse,
        };
        on_epoch(&row);
        history.push(row);
    }
    Ok((model, history))
}

pub const LOSS_CSV_HEADER: &str = "epoch,train_mse,test_mse";

/// `epoch,train_mse,test_mse`; a missing test split leaves the last field
/// empty.
pub fn loss_history_csv(history: &[EpochLoss]) -> String {
    let mut out = format!("{LOSS_CSV_HEADER}\n");
    for r in history {
        let test = r.test_mse.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", r.epoch, r.train_mse, test);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sra::{Pair, Spectrogram};
    use crate::tcn::{Activation, TcnConfig};

    fn pair(n_f: usize, n_t: usize, phase: f64) -> Pair {
        let mut data = vec![0.0; n_f * n_t];
        for f in 0..n_f {
            for t in 0..n_t {
                let v = 0.5 + 0.4 * ((t as f64 * 0.4 + f as f64 * 0.7 + phase).sin());
                data[f * n_t + t] = v;
            }
        }
        let y = Spectrogram::new(n_f, n_t, data, vec![false; n_t], 0.0, 0.25).unwrap();
        let mask: Vec<bool> = (0..n_t).map(|t| (4..7).contains(&t)).collect();
        Pair {
            x: y.with_mask(&mask),
            y,
            mask,
        }
    }

    fn tiny() -> TcnConfig {
        TcnConfig {
            n_f: 8,
            n_c: 16,
            kernel_len: 3,
            n_blocks: 2,
            dilations: vec![1, 2],
            bottleneck_dim: 4,
            bottleneck_kernel: 3,
            delay: 0,
            activation: Activation::Relu,
            seed: 1,
        }
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { lr: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { beta1: 0.9999, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let t = TrainConfig { epochs: 11, lr_end_ratio: 0.1, ..Default::default() };
        assert!((epoch_lr(&t, 1) - 1e-3).abs() < 1e-15);
        assert!((epoch_lr(&t, 6) - 0.55e-3).abs() < 1e-15);
        assert!((epoch_lr(&t, 11) - 1e-4).abs() < 1e-15);
        assert_eq!(epoch_lr(&TrainConfig::default(), 7), 1e-3);
    }

    #[test]
    fn zero_epochs_leave_the_model_untouched() {
        let m = TcnModel::new(tiny()).unwrap();
        let ds = Dataset {
            train: vec![pair(8, 16, 0.0)],
            test: vec![],
        };
        let (out, hist) = train(m.clone(), &ds, &TrainConfig { epochs: 0, ..Default::default() }).unwrap();
        assert!(hist.is_empty());
        assert_eq!(out, m);
    }

    #[test]
    fn memorizes_a_single_pair() {
        let ds = Dataset {
            train: vec![pair(32, 16, 0.3)],
            test: vec![],
        };
        let m = TcnModel::new(TcnConfig::default()).unwrap();
        let tcfg = TrainConfig {
            epochs: 500,
            ..Default::default()
        };
        let (m, hist) = train(m, &ds, &tcfg).unwrap();
        let last = evaluate(&m, &[Example::from_pair(&ds.train[0]).unwrap()], LossKind::Full).unwrap();
        assert!(last < 1e-4, "final train mse {last}, history tail {:?}", &hist[hist.len() - 3..]);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let ds = Dataset {
            train: (0..6).map(|i| pair(8, 16, i as f64)).collect(),
            test: vec![pair(8, 16, 10.0)],
        };
        let tcfg = TrainConfig {
            epochs: 20,
            batch_size: 4,
            seed: 3,
            ..Default::default()
        };
        let (a, ha) = train(TcnModel::new(tiny()).unwrap(), &ds, &tcfg).unwrap();
        let (b, hb) = train(TcnModel::new(tiny()).unwrap(), &ds, &tcfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
        assert!(ha.last().unwrap().train_mse < ha[0].train_mse);
        assert!(a.params().iter().all(|&p| p as f32 as f64 == p));
    }

    #[test]
    fn divergence_names_the_epoch() {
        let ds = Dataset {
            train: vec![pair(8, 16, 0.0)],
            test: vec![],
        };
        let mut m = TcnModel::new(tiny()).unwrap();
        let n = m.parameter_count();
        m.params_mut()[n - 1] = f64::NAN;
        let err = train(m, &ds, &TrainConfig { epochs: 3, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 1, .. }), "{err}");
        assert!(err.to_string().contains("epoch 1"));
    }

    #[test]
    fn empty_training_split_is_rejected() {
        let m = TcnModel::new(tiny()).unwrap();
        assert!(matches!(
            train(m, &Dataset::default(), &TrainConfig::default()),
            Err(Error::NoData(_))
        ));
    }

    #[test]
    fn history_csv_layout() {
        let h = [
            EpochLoss { epoch: 1, train_mse: 0.5, test_mse: Some(0.25) },
            EpochLoss { epoch: 2, train_mse: 0.125, test_mse: None },
        ];
        assert_eq!(loss_history_csv(&h), "epoch,train_mse,test_mse\n1,0.5,0.25\n2,0.125,\n");
    }
}
