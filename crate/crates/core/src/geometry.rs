//! Planar geometry, single-bounce reflection gains, channel-variation power
//! and the variation-to-interference ratio (VIR).
//!
//! The reflected path from the AP via a subject S to a device E has gain
//!
//! ```text
//! h = λ²·√G·exp(−i·2π(d_AS + d_SE)/λ) / ((4π)²·(d_AS·d_SE)^(α/2))
//! ```
//!
//! and, when both distances change at speed v, the power of its time
//! derivative is `G̃·v²·(d_AS·d_SE)^(−α)` with `G̃ = (λ/4π)²·G` once the
//! amplitude-variation term is dropped.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Carrier and propagation constants shared by every link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    /// Carrier wavelength in meters.
    pub lambda: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Dynamic-channel scale: `P_d = η·λ²·d_AE^(−α) + b`.
    pub eta: f64,
    /// Dynamic-channel floor.
    pub b: f64,
    /// Combined antenna/reflection gain `G̃ = (λ/4π)²·G`.
    pub g_tilde: f64,
}

impl RadioConfig {
    pub fn new(lambda: f64, alpha: f64, eta: f64, b: f64, g_tilde: f64) -> Result<Self> {
        let cfg = RadioConfig {
            lambda,
            alpha,
            eta,
            b,
            g_tilde,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// All constants normalized to one with α = 4, the setting used for the
    /// feasible-region map and the capacity curves.
    pub fn normalized() -> Self {
        RadioConfig {
            lambda: 1.0,
            alpha: 4.0,
            eta: 1.0,
            b: 1.0,
            g_tilde: 1.0,
        }
    }

    /// 5 GHz Wi-Fi (λ = 6 cm), indoor exponent, unit raw gain `G = 1` and a
    /// weak dynamic channel. Used by the scene simulator.
    pub fn wifi_5ghz() -> Self {
        let lambda = 0.06;
        RadioConfig {
            lambda,
            alpha: 4.0,
            eta: 1e-6,
            b: 0.0,
            g_tilde: (lambda / (4.0 * PI)).powi(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(2.0..=4.0).contains(&self.alpha) {
            return Err(Error::domain(format!("alpha must lie in [2, 4], got {}", self.alpha)));
        }
        if !(self.eta >= 0.0) || !(self.b >= 0.0) {
            return Err(Error::domain("eta and b must be non-negative"));
        }
        if !(self.g_tilde > 0.0 && self.g_tilde.is_finite()) {
            return Err(Error::domain(format!("g_tilde must be > 0, got {}", self.g_tilde)));
        }
        Ok(())
    }

    /// Raw gain `G` recovered from `G̃`.
    pub fn gain(&self) -> f64 {
        self.g_tilde * (4.0 * PI / self.lambda).powi(2)
    }

    /// Power of the dynamic channel on an AP–device link of length `d_ae`.
    pub fn dynamic_power(&self, d_ae: f64) -> f64 {
        self.eta * self.lambda * self.lambda * d_ae.powf(-self.alpha) + self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A moving body: where it is and how intensely it moves (speed in m/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mover {
    pub position: Point2D,
    pub intensity: f64,
}

impl Mover {
    pub fn new(position: Point2D, intensity: f64) -> Self {
        Mover {
            position,
            intensity,
        }
    }
}

/// Complex channel gain of one propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGain(pub Complex64);

impl PathGain {
    pub fn value(&self) -> Complex64 {
        self.0
    }

    pub fn magnitude(&self) -> f64 {
        self.0.norm()
    }
}

fn check_distances(d_as: f64, d_se: f64) -> Result<()> {
    if !(d_as > 0.0) || !(d_se > 0.0) {
        return Err(Error::domain(format!(
            "distances must be positive, got d_as={d_as}, d_se={d_se}"
        )));
    }
    Ok(())
}

/// Gain of the AP → subject → device path.
pub fn reflection_gain(cfg: &RadioConfig, d_as: f64, d_se: f64) -> Result<PathGain> {
    check_distances(d_as, d_se)?;
    Ok(PathGain(reflection_gain_unchecked(cfg, d_as, d_se)))
}

pub(crate) fn reflection_gain_unchecked(cfg: &RadioConfig, d_as: f64, d_se: f64) -> Complex64 {
    let lambda = cfg.lambda;
    let magnitude = lambda * lambda * cfg.gain().sqrt()
        / ((4.0 * PI).powi(2) * (d_as * d_se).powf(cfg.alpha / 2.0));
    // Reduce the path length modulo λ before forming the phase so that
    // lengths differing by whole wavelengths give identical values.
    let cycles = ((d_as + d_se) / lambda).rem_euclid(1.0);
    Complex64::from_polar(magnitude, -2.0 * PI * cycles)
}

/// Variation power with the amplitude term dropped: `G̃·v²·(d_as·d_se)^(−α)`.
pub fn variation_power(cfg: &RadioConfig, d_as: f64, d_se: f64, v: f64) -> Result<f64> {
    check_distances(d_as, d_se)?;
    if !(v >= 0.0) {
        return Err(Error::domain(format!("intensity must be >= 0, got {v}")));
    }
    Ok(cfg.g_tilde * v * v * (d_as * d_se).powf(-cfg.alpha))
}

/// Variation power including the amplitude-variation term.
pub fn variation_power_exact(cfg: &RadioConfig, d_as: f64, d_se: f64, v: f64) -> Result<f64> {
    let approx = variation_power(cfg, d_as, d_se, v)?;
    let lambda = cfg.lambda;
    let spread = (d_as + d_se) / (d_as * d_se);
    let amplitude_term = cfg.alpha * cfg.alpha / 4.0 * spread * spread;
    let phase_term = 16.0 * PI * PI / (lambda * lambda);
    Ok(approx * (amplitude_term + phase_term) / phase_term)
}

/// VIR of `subject` sensed on the AP–`ue` link, with every interferer
/// contributing its own variation power to the denominator.
pub fn vir(
    cfg: &RadioConfig,
    ap: Point2D,
    ue: Point2D,
    subject: &Mover,
    interferers: &[Mover],
) -> Result<f64> {
    let d_ae = ap.distance(&ue);
    if !(d_ae > 0.0) {
        return Err(Error::domain("AP and UE coincide"));
    }
    let signal = variation_power(
        cfg,
        ap.distance(&subject.position),
        subject.position.distance(&ue),
        subject.intensity,
    )?;
    let mut interference = cfg.dynamic_power(d_ae);
    for m in interferers {
        interference += variation_power(
            cfg,
            ap.distance(&m.position),
            m.position.distance(&ue),
            m.intensity,
        )?;
    }
    if interference == 0.0 {
        return Err(Error::domain(
            "VIR denominator is zero (eta = b = 0 and no moving interferer)",
        ));
    }
    Ok(signal / interference)
}

/// A regular raster: cell (ix, iy) sits at `(x0 + ix·dx, y0 + iy·dy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    /// Grid covering `[x_min, x_max] × [y_min, y_max]` at resolution `step`.
    pub fn covering(x_min: f64, x_max: f64, y_min: f64, y_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(x_max >= x_min) || !(y_max >= y_min) {
            return Err(Error::domain("grid needs a positive step and ordered bounds"));
        }
        Ok(Grid {
            x0: x_min,
            y0: y_min,
            dx: step,
            dy: step,
            nx: ((x_max - x_min) / step + 1e-9).floor() as usize + 1,
            ny: ((y_max - y_min) / step + 1e-9).floor() as usize + 1,
        })
    }

    pub fn point(&self, ix: usize, iy: usize) -> Point2D {
        Point2D::new(self.x0 + ix as f64 * self.dx, self.y0 + iy as f64 * self.dy)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn header(&self) -> String {
        format!(
            "# {} {} {} {} {} {}\n",
            self.x0, self.y0, self.dx, self.dy, self.nx, self.ny
        )
    }
}

/// Feasible-region raster for a candidate interferer position.
#[derive(Debug, Clone, PartialEq)]
pub struct VirMap {
    pub grid: Grid,
    /// VIR of the subject with the interferer at each cell (row-major, y outer).
    pub vir_subject: Vec<f64>,
    /// VIR of the interferer sensed at its own UE, with the subject interfering.
    pub vir_interferer: Vec<f64>,
    pub feasible: Vec<bool>,
}

/// Sweeps a single interferer over `grid`.
///
/// The interferer moves with the subject's intensity and carries its own UE
/// at the same offset the subject has from its UE. Cells where any distance
/// collapses to zero hold `+inf` and are infeasible.
pub fn vir_map(
    cfg: &RadioConfig,
    ap: Point2D,
    ue: Point2D,
    subject: &Mover,
    grid: &Grid,
    beta: f64,
) -> Result<VirMap> {
    if !(grid.dx > 0.0 && grid.dy > 0.0) {
        return Err(Error::domain("grid resolution must be positive"));
    }
    if !(beta > 0.0) {
        return Err(Error::domain(format!("threshold must be positive, got {beta}")));
    }
    let ue_offset = Point2D::new(ue.x - subject.position.x, ue.y - subject.position.y);
    let n = grid.len();
    let mut vir_subject = Vec::with_capacity(n);
    let mut vir_interferer = Vec::with_capacity(n);
    let mut feasible = Vec::with_capacity(n);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let cell = grid.point(ix, iy);
            let interferer = Mover::new(cell, subject.intensity);
            let interferer_ue = Point2D::new(cell.x + ue_offset.x, cell.y + ue_offset.y);
            let singular = [ap, ue, subject.position].contains(&cell)
                || [ap, ue, subject.position].contains(&interferer_ue);
            let pair = if singular {
                None
            } else {
                vir(cfg, ap, ue, subject, &[interferer])
                    .and_then(|s| {
                        vir(cfg, ap, interferer_ue, &interferer, &[*subject]).map(|i| (s, i))
                    })
                    .ok()
            };
            match pair {
                Some((s, i)) => {
                    vir_subject.push(s);
                    vir_interferer.push(i);
                    feasible.push(s > beta && i > beta);
                }
                None => {
                    vir_subject.push(f64::INFINITY);
                    vir_interferer.push(f64::INFINITY);
                    feasible.push(false);
                }
            }
        }
    }
    Ok(VirMap {
        grid: *grid,
        vir_subject,
        vir_interferer,
        feasible,
    })
}

impl VirMap {
    /// Text raster of a value layer: header then one line per grid row.
    pub fn values_text(&self, values: &[f64]) -> String {
        let mut out = self.grid.header();
        for row in values.chunks(self.grid.nx.max(1)) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn feasibility_text(&self) -> String {
        let mut out = self.grid.header();
        for row in self.feasible.chunks(self.grid.nx.max(1)) {
            let line: Vec<&str> = row.iter().map(|&f| if f { "1" } else { "0" }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Writes `vir_subject.txt`, `vir_interferer.txt` and `feasible.txt`.
    pub fn write_rasters(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("vir_subject.txt", self.values_text(&self.vir_subject)),
            ("vir_interferer.txt", self.values_text(&self.vir_interferer)),
            ("feasible.txt", self.feasibility_text()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Parses a value raster written by [`VirMap::values_text`].
pub fn parse_raster(text: &str) -> Result<(Grid, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| Error::format("raster header missing"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 {
        return Err(Error::format(format!("raster header needs 6 fields, got {}", h.len())));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::format(format!("bad number `{s}`: {e}")));
    let int = |s: &str| s.parse::<usize>().map_err(|e| Error::format(format!("bad count `{s}`: {e}")));
    let grid = Grid {
        x0: num(h[0])?,
        y0: num(h[1])?,
        dx: num(h[2])?,
        dy: num(h[3])?,
        nx: int(h[4])?,
        ny: int(h[5])?,
    };
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        for tok in line.split_whitespace() {
            values.push(num(tok)?);
        }
    }
    if values.len() != grid.len() {
        let mut msg = String::new();
        let _ = write!(msg, "raster holds {} values, header says {}", values.len(), grid.len());
        return Err(Error::format(msg));
    }
    Ok((grid, values))
}
