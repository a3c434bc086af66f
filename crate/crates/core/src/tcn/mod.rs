//! Temporal-convolution autoencoder for spectrogram recovery.
//!
//! Four residual blocks of causal dilated convolutions feed a small
//! convolutional bottleneck (stride-2 encoder, nearest-neighbour upsampling,
//! decoder) whose output is added back to the block output, followed by a
//! 1×1 projection to the frequency bins. Gradients are computed by hand in
//! reverse mode; every convolution is an im2col matrix product.
//!
//! Parameters live in one flat `f64` vector so the optimizer and the weight
//! file see a single array. Values are kept on the `f32` grid (initialization
//! and every optimizer step round to `f32`), which makes the 32-bit weight
//! file an exact snapshot.

mod io;
mod train;

pub use io::{load_model, load_model_checked, save_model, MAGIC};
pub use train::{
    epoch_lr,
    evaluate, loss_history_csv, train, train_with, Adam, EpochLoss, LossKind, TrainConfig, LOSS_CSV_HEADER,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::sra::{Pair, Spectrogram, NO_DATA};

/// Channels × time, row-major (one row per channel).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(channels: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || len == 0 {
            return Err(Error::domain("tensor dimensions must be positive"));
        }
        if data.len() != channels * len {
            return Err(Error::Shape {
                expected: format!("{channels}x{len} = {} values", channels * len),
                found: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("tensor holds a non-finite value"));
        }
        Ok(Tensor3 { channels, len, data })
    }

    pub fn zeros(channels: usize, len: usize) -> Self {
        Tensor3 {
            channels,
            len,
            data: vec![0.0; channels * len],
        }
    }

    pub fn get(&self, c: usize, n: usize) -> f64 {
        self.data[c * self.len + n]
    }

    pub fn set(&mut self, c: usize, n: usize, v: f64) {
        self.data[c * self.len + n] = v;
    }

    pub fn from_spectrogram(s: &Spectrogram) -> Result<Self> {
        Tensor3::new(s.n_f, s.n_t, s.data.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

impl Activation {
    pub fn as_str(&self) -> &'static str {
        "relu"
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            other => Err(Error::format(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcnConfig {
    /// Input and output channels (frequency bins).
    pub n_f: usize,
    /// Hidden channels.
    pub n_c: usize,
    pub kernel_len: usize,
    pub n_blocks: usize,
    pub dilations: Vec<usize>,
    pub bottleneck_dim: usize,
    /// Taps of the bottleneck encoder and decoder; odd, centered on the
    /// output frame so the bottleneck sees both sides of a gap.
    pub bottleneck_kernel: usize,
    /// Output frame `n` is read from network position `n + delay`, so the
    /// causal stack sees `delay` frames past the frame it reconstructs. The
    /// input is extended with no-data frames to cover the shift.
    pub delay: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for TcnConfig {
    fn default() -> Self {
        TcnConfig {
            n_f: 32,
            n_c: 64,
            kernel_len: 5,
            n_blocks: 4,
            dilations: vec![1, 2, 4, 8],
            bottleneck_dim: 16,
            bottleneck_kernel: 9,
            delay: 0,
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

impl TcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_f == 0 || self.n_c == 0 || self.bottleneck_dim == 0 {
            return Err(Error::domain("channel counts must be positive"));
        }
        if self.kernel_len == 0 {
            return Err(Error::domain("kernel_len must be >= 1"));
        }
        if self.n_blocks == 0 {
            return Err(Error::domain("need at least one block"));
        }
        if self.dilations.len() != self.n_blocks {
            return Err(Error::domain(format!(
                "{} dilations for {} blocks",
                self.dilations.len(),
                self.n_blocks
            )));
        }
        if self.dilations.iter().any(|d| !d.is_power_of_two())
            || self.dilations.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::domain(format!(
                "dilations must be strictly increasing powers of two, got {:?}",
                self.dilations
            )));
        }
        if self.bottleneck_kernel % 2 == 0 {
            return Err(Error::domain("bottleneck_kernel must be odd"));
        }
        Ok(())
    }

    /// Frames of input history seen by one output frame of the block stack.
    pub fn receptive_field(&self) -> usize {
        1 + 2 * (self.kernel_len - 1) * self.dilations.iter().sum::<usize>()
    }

    /// Closed-form parameter count.
    ///
    /// Block `b` with `c` input channels holds `N_C·L·c + N_C` (first conv),
    /// `N_C·L·N_C + N_C` (second conv) and, when `c ≠ N_C`, `N_C·c + N_C`
    /// (residual projection). The bottleneck adds `2·B·K·N_C + B + N_C` and
    /// the output projection `N_F·N_C + N_F`.
    pub fn parameter_count(&self) -> usize {
        let (nf, nc, l) = (self.n_f, self.n_c, self.kernel_len);
        let (b, k) = (self.bottleneck_dim, self.bottleneck_kernel);
        let mut total = 0;
        for blk in 0..self.n_blocks {
            let c = if blk == 0 { nf } else { nc };
            total += nc * l * c + nc + nc * l * nc + nc;
            if c != nc {
                total += nc * c + nc;
            }
        }
        total + 2 * b * k * nc + b + nc + nf * nc + nf
    }
}

/// One convolution's place in the parameter vector and its geometry:
/// `y[k, m] = b[k] + Σ_i Σ_c W[k, i, c] · x[c, stride·m + offset − dilation·i]`
/// with zeros outside the input.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Conv {
    w: usize,
    b: usize,
    c_in: usize,
    c_out: usize,
    taps: usize,
    dilation: usize,
    stride: usize,
    offset: usize,
}

impl Conv {
    fn n_weights(&self) -> usize {
        self.c_out * self.taps * self.c_in
    }

    fn rows(&self) -> usize {
        self.taps * self.c_in
    }

    fn out_len(&self, t_in: usize) -> usize {
        t_in.div_ceil(self.stride)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    conv1: Conv,
    conv2: Conv,
    proj: Option<Conv>,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    blocks: Vec<Block>,
    enc: Conv,
    dec: Conv,
    out: Conv,
    total: usize,
}

impl Layout {
    /// Parameter order: per block (first conv, second conv, projection),
    /// then encoder, decoder and output projection; each conv stores its
    /// `[c_out][taps][c_in]` weights followed by its biases.
    fn new(cfg: &TcnConfig) -> Layout {
        let mut next = 0;
        let mut conv = |c_in, c_out, taps, dilation, stride, offset| {
            let w = next;
            let b = w + c_out * taps * c_in;
            next = b + c_out;
            Conv {
                w,
                b,
                c_in,
                c_out,
                taps,
                dilation,
                stride,
                offset,
            }
        };
        let (nf, nc, l) = (cfg.n_f, cfg.n_c, cfg.kernel_len);
        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        for (i, &d) in cfg.dilations.iter().enumerate() {
            let c = if i == 0 { nf } else { nc };
            let conv1 = conv(c, nc, l, d, 1, 0);
            let conv2 = conv(nc, nc, l, d, 1, 0);
            let proj = (c != nc).then(|| conv(c, nc, 1, 1, 1, 0));
            blocks.push(Block { conv1, conv2, proj });
        }
        let (bd, k) = (cfg.bottleneck_dim, cfg.bottleneck_kernel);
        let enc = conv(nc, bd, k, 1, 2, (k - 1) / 2);
        let dec = conv(bd, nc, k, 1, 1, (k - 1) / 2);
        let out = conv(nc, nf, 1, 1, 1, 0);
        Layout {
            blocks,
            enc,
            dec,
            out,
            total: next,
        }
    }

    fn convs(&self) -> Vec<Conv> {
        let mut v = Vec::new();
        for b in &self.blocks {
            v.push(b.conv1);
            v.push(b.conv2);
            v.extend(b.proj);
        }
        v.extend([self.enc, self.dec, self.out]);
        v
    }
}

/// Row-major `c = a·b + beta·c` where `a` is `m×k` and `b` is `k×n`; with
/// `ta`/`tb` the operand is stored transposed.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, c: &mut [f64], beta: f64) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if ta { (1, m) } else { (k, 1) };
    let (rsb, csb) = if tb { (1, k) } else { (n, 1) };
    // SAFETY: the assertion above bounds every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn im2col(x: &[f64], t_in: usize, conv: &Conv, t_out: usize) -> Vec<f64> {
    let mut cols = vec![0.0; conv.rows() * t_out];
    for i in 0..conv.taps {
        let shift = (conv.dilation * i) as isize - conv.offset as isize;
        for c in 0..conv.c_in {
            let row = &mut cols[(i * conv.c_in + c) * t_out..][..t_out];
            let xr = &x[c * t_in..][..t_in];
            for (m, r) in row.iter_mut().enumerate() {
                let p = (conv.stride * m) as isize - shift;
                if p >= 0 && (p as usize) < t_in {
                    *r = xr[p as usize];
                }
            }
        }
    }
    cols
}

fn col2im(dcols: &[f64], conv: &Conv, t_out: usize, dx: &mut [f64], t_in: usize) {
    for i in 0..conv.taps {
        let shift = (conv.dilation * i) as isize - conv.offset as isize;
        for c in 0..conv.c_in {
            let row = &dcols[(i * conv.c_in + c) * t_out..][..t_out];
            let xr = &mut dx[c * t_in..][..t_in];
            for (m, r) in row.iter().enumerate() {
                let p = (conv.stride * m) as isize - shift;
                if p >= 0 && (p as usize) < t_in {
                    xr[p as usize] += r;
                }
            }
        }
    }
}

/// Returns the output and the im2col matrix needed for the backward pass.
fn conv_forward(p: &[f64], conv: &Conv, x: &[f64], t_in: usize) -> (Vec<f64>, Vec<f64>) {
    let t_out = conv.out_len(t_in);
    let cols = im2col(x, t_in, conv, t_out);
    let mut y = vec![0.0; conv.c_out * t_out];
    for (k, row) in y.chunks_exact_mut(t_out).enumerate() {
        row.fill(p[conv.b + k]);
    }
    gemm(
        conv.c_out,
        conv.rows(),
        t_out,
        &p[conv.w..conv.w + conv.n_weights()],
        false,
        &cols,
        false,
        &mut y,
        1.0,
    );
    (y, cols)
}

/// Accumulates weight and bias gradients into `g` and returns the input
/// gradient.
fn conv_backward(p: &[f64], g: &mut [f64], conv: &Conv, cols: &[f64], t_in: usize, dy: &[f64]) -> Vec<f64> {
    let t_out = conv.out_len(t_in);
    let rows = conv.rows();
    gemm(
        conv.c_out,
        t_out,
        rows,
        dy,
        false,
        cols,
        true,
        &mut g[conv.w..conv.w + conv.n_weights()],
        1.0,
    );
    for (k, row) in dy.chunks_exact(t_out).enumerate() {
        g[conv.b + k] += row.iter().sum::<f64>();
    }
    let mut dcols = vec![0.0; rows * t_out];
    gemm(
        rows,
        conv.c_out,
        t_out,
        &p[conv.w..conv.w + conv.n_weights()],
        true,
        dy,
        false,
        &mut dcols,
        0.0,
    );
    let mut dx = vec![0.0; conv.c_in * t_in];
    col2im(&dcols, conv, t_out, &mut dx, t_in);
    dx
}

fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

/// Zeroes `d` wherever the pre-activation was not positive.
fn relu_backward(d: &mut [f64], pre: &[f64]) {
    for (g, a) in d.iter_mut().zip(pre) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Causal dilated convolution of `input` with `kernels[k][i][c]`:
/// `z[k, n] = bias[k] + Σ_i Σ_c kernels[k][i][c] · x[c, n − chi·i]`, where
/// samples before the start are zero.
pub fn dilated_conv_forward(input: &Tensor3, kernels: &[Vec<Vec<f64>>], chi: usize, bias: &[f64]) -> Result<Tensor3> {
    if chi == 0 {
        return Err(Error::domain("dilation must be >= 1"));
    }
    let c_out = kernels.len();
    let taps = kernels.first().map_or(0, |k| k.len());
    if c_out == 0 || taps == 0 || bias.len() != c_out {
        return Err(Error::Shape {
            expected: format!("{c_out} biases and at least one tap"),
            found: format!("{} biases, {taps} taps", bias.len()),
        });
    }
    let mut p = Vec::with_capacity(c_out * taps * input.channels + c_out);
    for k in kernels {
        if k.len() != taps || k.iter().any(|t| t.len() != input.channels) {
            return Err(Error::Shape {
                expected: format!("{taps} taps of {} channels per output", input.channels),
                found: "ragged kernel".into(),
            });
        }
        for t in k {
            p.extend_from_slice(t);
        }
    }
    p.extend_from_slice(bias);
    let conv = Conv {
        w: 0,
        b: c_out * taps * input.channels,
        c_in: input.channels,
        c_out,
        taps,
        dilation: chi,
        stride: 1,
        offset: 0,
    };
    let (y, _) = conv_forward(&p, &conv, &input.data, input.len);
    Ok(Tensor3 {
        channels: c_out,
        len: input.len,
        data: y,
    })
}

struct BlockCache {
    cols1: Vec<f64>,
    a1: Vec<f64>,
    cols2: Vec<f64>,
    a2: Vec<f64>,
    proj_cols: Option<Vec<f64>>,
}

struct Cache {
    len: usize,
    blocks: Vec<BlockCache>,
    enc_cols: Vec<f64>,
    enc_pre: Vec<f64>,
    dec_cols: Vec<f64>,
    out_cols: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcnModel {
    config: TcnConfig,
    layout: Layout,
    params: Vec<f64>,
}

impl TcnModel {
    /// Kaiming-uniform weights (bound `√(6/fan_in)`) and zero biases, drawn
    /// from the config seed.
    pub fn new(config: TcnConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut r = rng::stream(config.seed, &[rng::tag::INIT]);
        for conv in layout.convs() {
            let bound = (6.0 / conv.rows() as f64).sqrt();
            for w in &mut params[conv.w..conv.w + conv.n_weights()] {
                *w = r.gen_range(-bound..bound) as f32 as f64;
            }
        }
        Ok(TcnModel { config, layout, params })
    }

    pub(crate) fn from_params(config: TcnConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(Error::Shape {
                expected: format!("{} parameters", layout.total),
                found: format!("{}", params.len()),
            });
        }
        Ok(TcnModel { config, layout, params })
    }

    pub fn config(&self) -> &TcnConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Parameter index ranges per layer type, for gradient checks and
    /// reporting: `(name, start, end)`.
    pub fn parameter_groups(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut push = |name: String, c: &Conv| {
            out.push((format!("{name}.weight"), c.w, c.b));
            out.push((format!("{name}.bias"), c.b, c.b + c.c_out));
        };
        for (i, b) in self.layout.blocks.iter().enumerate() {
            push(format!("block{i}.conv1"), &b.conv1);
            push(format!("block{i}.conv2"), &b.conv2);
            if let Some(p) = &b.proj {
                push(format!("block{i}.residual"), p);
            }
        }
        push("bottleneck.encoder".into(), &self.layout.enc);
        push("bottleneck.decoder".into(), &self.layout.dec);
        push("output".into(), &self.layout.out);
        out
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.channels != self.config.n_f {
            return Err(Error::Shape {
                expected: format!("{} input channels", self.config.n_f),
                found: format!("{}", x.channels),
            });
        }
        Ok(())
    }

    /// Output of the residual block stack alone (causal).
    pub fn blocks_forward(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check_input(x)?;
        let mut cur = x.data.clone();
        for b in &self.layout.blocks {
            cur = self.block(b, &cur, x.len).0;
        }
        Ok(Tensor3 {
            channels: self.config.n_c,
            len: x.len,
            data: cur,
        })
    }

    fn block(&self, b: &Block, x: &[f64], t: usize) -> (Vec<f64>, BlockCache) {
        let p = &self.params;
        let (a1, cols1) = conv_forward(p, &b.conv1, x, t);
        let r1 = relu(&a1);
        let (a2, cols2) = conv_forward(p, &b.conv2, &r1, t);
        let mut out = relu(&a2);
        let proj_cols = match &b.proj {
            Some(c) => {
                let (res, cols) = conv_forward(p, c, x, t);
                add_into(&mut out, &res);
                Some(cols)
            }
            None => {
                add_into(&mut out, x);
                None
            }
        };
        (
            out,
            BlockCache {
                cols1,
                a1,
                cols2,
                a2,
                proj_cols,
            },
        )
    }

    fn forward_cached(&self, x: &Tensor3) -> Result<(Vec<f64>, Cache)> {
        self.check_input(x)?;
        let d = self.config.delay;
        let t = x.len + d;
        let p = &self.params;
        let l = &self.layout;
        let mut h = if d == 0 {
            x.data.clone()
        } else {
            let mut v = vec![NO_DATA; x.channels * t];
            for (dst, src) in v.chunks_exact_mut(t).zip(x.data.chunks_exact(x.len)) {
                dst[..x.len].copy_from_slice(src);
            }
            v
        };
        let mut blocks = Vec::with_capacity(l.blocks.len());
        for b in &l.blocks {
            let (out, cache) = self.block(b, &h, t);
            h = out;
            blocks.push(cache);
        }
        let (enc_pre, enc_cols) = conv_forward(p, &l.enc, &h, t);
        let e = relu(&enc_pre);
        let t2 = l.enc.out_len(t);
        let bd = l.enc.c_out;
        let mut u = vec![0.0; bd * t];
        for c in 0..bd {
            for n in 0..t {
                u[c * t + n] = e[c * t2 + n / 2];
            }
        }
        let (dec, dec_cols) = conv_forward(p, &l.dec, &u, t);
        add_into(&mut h, &dec);
        let (mut y, out_cols) = conv_forward(p, &l.out, &h, t);
        if d > 0 {
            y = y.chunks_exact(t).flat_map(|row| row[d..].iter().copied()).collect();
        }
        Ok((
            y,
            Cache {
                len: t,
                blocks,
                enc_cols,
                enc_pre,
                dec_cols,
                out_cols,
            },
        ))
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        let (y, _) = self.forward_cached(x)?;
        Ok(Tensor3 {
            channels: self.config.n_f,
            len: x.len,
            data: y,
        })
    }

    /// Accumulates parameter gradients for output gradient `dy` into `g`.
    fn backward(&self, cache: &Cache, dy: &[f64], g: &mut [f64]) {
        let p = &self.params;
        let l = &self.layout;
        let t = cache.len;
        let d = self.config.delay;
        let padded;
        let dy = if d == 0 {
            dy
        } else {
            let n = t - d;
            let mut v = vec![0.0; l.out.c_out * t];
            for (dst, src) in v.chunks_exact_mut(t).zip(dy.chunks_exact(n)) {
                dst[d..].copy_from_slice(src);
            }
            padded = v;
            &padded[..]
        };
        let dg = conv_backward(p, g, &l.out, &cache.out_cols, t, dy);
        let du = conv_backward(p, g, &l.dec, &cache.dec_cols, t, &dg);
        let t2 = l.enc.out_len(t);
        let bd = l.enc.c_out;
        let mut de = vec![0.0; bd * t2];
        for c in 0..bd {
            for n in 0..t {
                de[c * t2 + n / 2] += du[c * t + n];
            }
        }
        relu_backward(&mut de, &cache.enc_pre);
        let mut dh = conv_backward(p, g, &l.enc, &cache.enc_cols, t, &de);
        add_into(&mut dh, &dg);
        for (b, bc) in l.blocks.iter().zip(&cache.blocks).rev() {
            let mut da2 = dh.clone();
            relu_backward(&mut da2, &bc.a2);
            let mut da1 = conv_backward(p, g, &b.conv2, &bc.cols2, t, &da2);
            relu_backward(&mut da1, &bc.a1);
            let mut dx = conv_backward(p, g, &b.conv1, &bc.cols1, t, &da1);
            match (&b.proj, &bc.proj_cols) {
                (Some(c), Some(cols)) => add_into(&mut dx, &conv_backward(p, g, c, cols, t, &dh)),
                _ => add_into(&mut dx, &dh),
            }
            dh = dx;
        }
    }

    /// Runs the network over a spectrogram; the result carries no no-data
    /// flags.
    pub fn predict(&self, spec: &Spectrogram) -> Result<Spectrogram> {
        let y = self.forward(&Tensor3::from_spectrogram(spec)?)?;
        Spectrogram::new(spec.n_f, spec.n_t, y.data, vec![false; spec.n_t], spec.t0, spec.frame_dt)
    }
}

/// A training example: masked input, label and the per-column mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Tensor3,
    pub y: Tensor3,
    pub mask: Vec<bool>,
}

impl Example {
    pub fn new(x: Tensor3, y: Tensor3, mask: Vec<bool>) -> Result<Self> {
        if (x.channels, x.len) != (y.channels, y.len) || mask.len() != x.len {
            return Err(Error::Shape {
                expected: format!("{}x{} input, label and {} mask flags", y.channels, y.len, y.len),
                found: format!("{}x{} input, {} flags", x.channels, x.len, mask.len()),
            });
        }
        Ok(Example { x, y, mask })
    }

    pub fn from_pair(p: &Pair) -> Result<Self> {
        Example::new(
            Tensor3::from_spectrogram(&p.x)?,
            Tensor3::from_spectrogram(&p.y)?,
            p.mask.clone(),
        )
    }
}

fn column_weights(e: &Example, kind: LossKind) -> Vec<f64> {
    match kind {
        LossKind::Full => vec![1.0; e.x.len],
        LossKind::MaskedOnly => e.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    }
}

/// Weighted squared error of one example divided by `N_F·N_T`, and its
/// gradient with respect to the output.
fn example_loss(y_hat: &[f64], e: &Example, kind: LossKind) -> (f64, Vec<f64>) {
    let w = column_weights(e, kind);
    let t = e.y.len;
    let norm = (e.y.channels * t) as f64;
    let mut loss = 0.0;
    let mut d = vec![0.0; y_hat.len()];
    for (i, (o, y)) in y_hat.iter().zip(&e.y.data).enumerate() {
        let wt = w[i % t];
        let r = o - y;
        loss += wt * r * r;
        d[i] = 2.0 * wt * r / norm;
    }
    (loss / norm, d)
}

/// Mean loss over a batch and its parameter gradient. With
/// [`LossKind::Full`] the loss is `mean ‖F(X̂) − Y‖² / (N_F·N_T)`; the
/// masked variant counts only masked columns (same normalization).
pub fn loss_and_gradients(model: &TcnModel, batch: &[Example], kind: LossKind) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::NoData("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = vec![0.0; model.params.len()];
    let mut total = 0.0;
    for e in batch {
        let (y_hat, cache) = model.forward_cached(&e.x)?;
        let (loss, mut d) = example_loss(&y_hat, e, kind);
        total += loss;
        for v in d.iter_mut() {
            *v *= scale;
        }
        model.backward(&cache, &d, &mut grads);
    }
    Ok((total * scale, grads))
}

/// Mean loss over a batch without gradients.
pub fn batch_loss(model: &TcnModel, batch: &[Example], kind: LossKind) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::NoData("empty batch".into()));
    }
    let mut total = 0.0;
    for e in batch {
        let y = model.forward(&e.x)?;
        total += example_loss(&y.data, e, kind).0;
    }
    Ok(total / batch.len() as f64)
}
