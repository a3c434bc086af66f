//! Beamforming feedback: SVD, phase normalization, Givens-angle compression.
//!
//! The station computes `V` from the SVD of the sounded channel, rotates each
//! column so the last row is real and non-negative, and then factors the
//! result as
//!
//! ```text
//! V = D_1 · G_{2,1}ᵀ ··· G_{Ntx,1}ᵀ · D_2 · G_{3,2}ᵀ ··· · Ĩ
//! ```
//!
//! where `D_i` carries the φ angles of column `i` and each real Givens
//! rotation `G_{l,i}` carries one ψ angle. Angles are listed column by
//! column: for column `i`, φ for rows `i..Ntx-1`, then ψ for rows
//! `i+1..Ntx` (all 1-based).
//!
//! A motion of the subject changes the channel as `H1 = Q_rx · H0 · Q_tx`.
//! Row scaling by `Q_rx` with a common amplitude and the common phase in
//! `Q_tx` drop out of the normalized `V`, so the feedback only moves when the
//! direction of the subject seen from the AP changes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Sounded channel, `N_rx × N_tx`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub h: CMatrix,
}

impl ChannelMatrix {
    pub fn new(h: CMatrix) -> Result<Self> {
        if h.rows() == 0 || h.cols() == 0 {
            return Err(Error::domain("channel matrix must be non-empty"));
        }
        if !h.is_finite() {
            return Err(Error::domain("channel matrix has non-finite entries"));
        }
        Ok(ChannelMatrix { h })
    }

    pub fn n_rx(&self) -> usize {
        self.h.rows()
    }

    pub fn n_tx(&self) -> usize {
        self.h.cols()
    }

    /// Entries with real and imaginary parts uniform in `[-1, 1)`.
    pub fn random(n_rx: usize, n_tx: usize, seed: u64) -> Result<Self> {
        let mut r = crate::rng::stream(seed, &[crate::rng::tag::CHANNEL]);
        ChannelMatrix::new(CMatrix::from_fn(n_rx, n_tx, |_, _| {
            Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
        }))
    }
}

/// `N_tx × N_cols` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingMatrix {
    pub v: CMatrix,
}

pub const UNITARY_TOL: f64 = 1e-9;

impl BeamformingMatrix {
    pub fn new(v: CMatrix) -> Result<Self> {
        let err = v.orthonormality_error();
        if !(err < UNITARY_TOL) {
            return Err(Error::domain(format!(
                "beamforming matrix columns are not orthonormal (error {err:.3e})"
            )));
        }
        Ok(BeamformingMatrix { v })
    }

    pub fn n_tx(&self) -> usize {
        self.v.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.v.cols()
    }

    /// The first `n` columns.
    pub fn steering(&self, n: usize) -> BeamformingMatrix {
        BeamformingMatrix {
            v: self.v.leading_columns(n),
        }
    }
}

/// SVD of the channel: `(U, singular values, V)`.
pub fn svd_decompose(h: &ChannelMatrix) -> (CMatrix, Vec<f64>, BeamformingMatrix) {
    let d = linalg::svd(&h.h);
    (d.u, d.s, BeamformingMatrix { v: d.v })
}

/// Rotates each column by a unit-modulus factor so the last-row entry is
/// real and non-negative.
///
/// The returned flags mark columns whose last-row entry is exactly zero;
/// those are left unchanged.
pub fn phase_normalize(v: &BeamformingMatrix) -> (BeamformingMatrix, Vec<bool>) {
    let mut out = v.v.clone();
    let last = out.rows() - 1;
    let mut undefined = vec![false; out.cols()];
    for c in 0..out.cols() {
        let z = out[(last, c)];
        let mag = z.norm();
        if mag == 0.0 {
            undefined[c] = true;
            continue;
        }
        let rot = z.conj() / mag;
        for r in 0..out.rows() {
            out[(r, c)] *= rot;
        }
        out[(last, c)] = Complex64::new(mag, 0.0);
    }
    (BeamformingMatrix { v: out }, undefined)
}

/// Number of φ (equivalently ψ) angles for an `n_tx × n_cols` matrix.
pub fn angle_count(n_tx: usize, n_cols: usize) -> usize {
    (1..=n_cols.min(n_tx.saturating_sub(1))).map(|i| n_tx - i).sum()
}

/// Unquantized Givens angles of a phase-normalized matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GivensAngles {
    pub n_tx: usize,
    pub n_cols: usize,
    /// Radians in `[0, 2π)`.
    pub phi: Vec<f64>,
    /// Radians in `[0, π/2]`.
    pub psi: Vec<f64>,
}

/// Factors a phase-normalized matrix into its φ/ψ angles.
pub fn givens_angles(v: &BeamformingMatrix) -> Result<GivensAngles> {
    let err = v.v.orthonormality_error();
    if !(err < 1e-6) {
        return Err(Error::domain(format!(
            "cannot compress a non-unitary matrix (error {err:.3e})"
        )));
    }
    let (n_tx, n_cols) = (v.n_tx(), v.n_cols());
    if n_cols > n_tx {
        return Err(Error::Shape {
            expected: format!("at most {n_tx} columns"),
            found: format!("{n_cols}"),
        });
    }
    let mut w = v.v.clone();
    let mut phi = Vec::with_capacity(angle_count(n_tx, n_cols));
    let mut psi = Vec::with_capacity(angle_count(n_tx, n_cols));
    for i in 0..n_cols.min(n_tx - 1) {
        for k in i..n_tx - 1 {
            let a = w[(k, i)].arg().rem_euclid(2.0 * PI);
            phi.push(a);
            let rot = Complex64::from_polar(1.0, -a);
            for c in 0..n_cols {
                w[(k, c)] *= rot;
            }
        }
        for l in (i + 1)..n_tx {
            let x = w[(i, i)].re;
            let y = w[(l, i)].re;
            let a = y.atan2(x).clamp(0.0, PI / 2.0);
            psi.push(a);
            let (s, c) = a.sin_cos();
            for col in 0..n_cols {
                let (wi, wl) = (w[(i, col)], w[(l, col)]);
                w[(i, col)] = wi * c + wl * s;
                w[(l, col)] = wl * c - wi * s;
            }
        }
    }
    Ok(GivensAngles {
        n_tx,
        n_cols,
        phi,
        psi,
    })
}

/// Rebuilds the matrix from angles: the inverse of [`givens_angles`].
pub fn from_angles(angles: &GivensAngles) -> Result<BeamformingMatrix> {
    let (n_tx, n_cols) = (angles.n_tx, angles.n_cols);
    let expected = angle_count(n_tx, n_cols);
    if n_cols > n_tx || n_tx == 0 || angles.phi.len() != expected || angles.psi.len() != expected
    {
        return Err(Error::Shape {
            expected: format!("{expected} phi and {expected} psi angles for {n_tx}x{n_cols}"),
            found: format!("{} phi, {} psi", angles.phi.len(), angles.psi.len()),
        });
    }
    let mut acc = CMatrix::identity(n_tx);
    let (mut pi_, mut si) = (0, 0);
    for i in 0..n_cols.min(n_tx - 1) {
        for k in i..n_tx - 1 {
            let rot = Complex64::from_polar(1.0, angles.phi[pi_]);
            pi_ += 1;
            for r in 0..n_tx {
                acc[(r, k)] *= rot;
            }
        }
        for l in (i + 1)..n_tx {
            let (s, c) = angles.psi[si].sin_cos();
            si += 1;
            // Right-multiply by the transposed rotation of rows i and l.
            for r in 0..n_tx {
                let (ai, al) = (acc[(r, i)], acc[(r, l)]);
                acc[(r, i)] = ai * c + al * s;
                acc[(r, l)] = al * c - ai * s;
            }
        }
    }
    Ok(BeamformingMatrix {
        v: acc.leading_columns(n_cols),
    })
}

fn check_bits(b: u32) -> Result<()> {
    if !(1..=16).contains(&b) {
        return Err(Error::domain(format!("quantizer width must be 1..=16 bits, got {b}")));
    }
    Ok(())
}

/// φ code: `2^b` uniform cells over `[0, 2π)`.
pub fn quantize_phi(a: f64, bits: u32) -> u32 {
    let cells = 1u32 << bits;
    let k = (a.rem_euclid(2.0 * PI) / (2.0 * PI) * cells as f64).floor() as u32;
    k.min(cells - 1)
}

pub fn dequantize_phi(code: u32, bits: u32) -> f64 {
    PI * code as f64 / (1u64 << (bits - 1)) as f64 + PI / (1u64 << bits) as f64
}

/// ψ code: `2^b` uniform cells over `[0, π/2]`.
pub fn quantize_psi(a: f64, bits: u32) -> u32 {
    let cells = 1u32 << bits;
    let k = (a.clamp(0.0, PI / 2.0) / (PI / 2.0) * cells as f64).floor() as u32;
    k.min(cells - 1)
}

pub fn dequantize_psi(code: u32, bits: u32) -> f64 {
    PI * code as f64 / (1u64 << (bits + 1)) as f64 + PI / (1u64 << (bits + 2)) as f64
}

/// Quantized feedback for one subcarrier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfiReport {
    pub n_tx: usize,
    pub n_cols: usize,
    pub b_phi: u32,
    pub b_psi: u32,
    pub phi_codes: Vec<u32>,
    pub psi_codes: Vec<u32>,
}

impl BfiReport {
    pub fn phi_angles(&self) -> Vec<f64> {
        self.phi_codes.iter().map(|&k| dequantize_phi(k, self.b_phi)).collect()
    }

    pub fn psi_angles(&self) -> Vec<f64> {
        self.psi_codes.iter().map(|&k| dequantize_psi(k, self.b_psi)).collect()
    }

    /// Header `N_tx N_cols b_phi b_psi`, then the φ codes, then the ψ codes.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {} {}\n", self.n_tx, self.n_cols, self.b_phi, self.b_psi);
        let join = |codes: &[u32]| {
            codes.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(out, "{}", join(&self.phi_codes));
        let _ = writeln!(out, "{}", join(&self.psi_codes));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<usize> = lines
            .next()
            .ok_or_else(|| Error::format("empty BFI report"))?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::format(format!("bad header: {e}"))))
            .collect::<Result<_>>()?;
        if header.len() != 4 {
            return Err(Error::format("BFI header must be `N_tx N_cols b_phi b_psi`"));
        }
        let mut codes = |what: &str| -> Result<Vec<u32>> {
            lines
                .next()
                .unwrap_or("")
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|e| Error::format(format!("bad {what} code: {e}"))))
                .collect()
        };
        let phi_codes = codes("phi")?;
        let psi_codes = codes("psi")?;
        let report = BfiReport {
            n_tx: header[0],
            n_cols: header[1],
            b_phi: header[2] as u32,
            b_psi: header[3] as u32,
            phi_codes,
            psi_codes,
        };
        report.validate()?;
        Ok(report)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        check_bits(self.b_phi)?;
        check_bits(self.b_psi)?;
        let expected = angle_count(self.n_tx, self.n_cols);
        if self.n_cols > self.n_tx
            || self.phi_codes.len() != expected
            || self.psi_codes.len() != expected
        {
            return Err(Error::Shape {
                expected: format!("{expected} phi and {expected} psi codes"),
                found: format!("{} phi, {} psi", self.phi_codes.len(), self.psi_codes.len()),
            });
        }
        if self.phi_codes.iter().any(|&k| k >= 1 << self.b_phi)
            || self.psi_codes.iter().any(|&k| k >= 1 << self.b_psi)
        {
            return Err(Error::domain("quantizer code out of range"));
        }
        Ok(())
    }
}

/// Angle extraction followed by quantization.
pub fn compress(v: &BeamformingMatrix, b_phi: u32, b_psi: u32) -> Result<BfiReport> {
    check_bits(b_phi)?;
    check_bits(b_psi)?;
    let a = givens_angles(v)?;
    Ok(BfiReport {
        n_tx: a.n_tx,
        n_cols: a.n_cols,
        b_phi,
        b_psi,
        phi_codes: a.phi.iter().map(|&x| quantize_phi(x, b_phi)).collect(),
        psi_codes: a.psi.iter().map(|&x| quantize_psi(x, b_psi)).collect(),
    })
}

pub fn decompress(report: &BfiReport) -> Result<BeamformingMatrix> {
    report.validate()?;
    from_angles(&GivensAngles {
        n_tx: report.n_tx,
        n_cols: report.n_cols,
        phi: report.phi_angles(),
        psi: report.psi_angles(),
    })
}

/// Geometry change of one subject between two soundings.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionUpdate {
    /// Change of the subject's direction seen from the AP, radians.
    pub delta_theta: f64,
    /// Path-length change on the AP side, meters.
    pub delta_d_t: f64,
    /// Path-length change per Rx antenna, meters.
    pub delta_d_r: Vec<f64>,
    /// Amplitude ratio per Rx antenna.
    pub rho: Vec<f64>,
    /// Tx antenna spacing, meters.
    pub ell: f64,
    /// Direction of the subject seen from the AP, radians.
    pub theta: f64,
}

impl MotionUpdate {
    /// No motion for an `n_rx`-antenna receiver.
    pub fn none(n_rx: usize, ell: f64, theta: f64) -> Self {
        MotionUpdate {
            delta_theta: 0.0,
            delta_d_t: 0.0,
            delta_d_r: vec![0.0; n_rx],
            rho: vec![1.0; n_rx],
            ell,
            theta,
        }
    }

    pub fn q_rx(&self, lambda: f64) -> Vec<Complex64> {
        self.rho
            .iter()
            .zip(&self.delta_d_r)
            .map(|(&r, &d)| Complex64::from_polar(r, -2.0 * PI * (d / lambda).rem_euclid(1.0)))
            .collect()
    }

    /// Diagonal of `Q_tx`, one entry per Tx antenna.
    pub fn q_tx(&self, n_tx: usize, lambda: f64) -> Vec<Complex64> {
        (0..n_tx)
            .map(|k| {
                let path = self.delta_d_t - k as f64 * self.ell * self.delta_theta * self.theta.sin();
                Complex64::from_polar(1.0, -2.0 * PI * (path / lambda).rem_euclid(1.0))
            })
            .collect()
    }
}

/// `H1 = Q_rx · H0 · Q_tx`.
pub fn apply_motion(h0: &ChannelMatrix, m: &MotionUpdate, lambda: f64) -> Result<ChannelMatrix> {
    if m.delta_d_r.len() != h0.n_rx() || m.rho.len() != h0.n_rx() {
        return Err(Error::Shape {
            expected: format!("{} Rx antennas", h0.n_rx()),
            found: format!("{} path changes, {} amplitude ratios", m.delta_d_r.len(), m.rho.len()),
        });
    }
    if m.rho.iter().any(|&r| !(r > 0.0)) || !(m.ell > 0.0) || !(lambda > 0.0) {
        return Err(Error::domain("rho entries, ell and lambda must be positive"));
    }
    let qr = m.q_rx(lambda);
    let qt = m.q_tx(h0.n_tx(), lambda);
    let h = CMatrix::from_fn(h0.n_rx(), h0.n_tx(), |r, c| qr[r] * h0.h[(r, c)] * qt[c]);
    ChannelMatrix::new(h)
}

/// Left factor predicted for a pure direction change:
/// `Ṽ′ = diag(e^{+i2π(N_tx−k)·ℓ·Δθ·sinθ/λ}) · Ṽ`, `k = 1..N_tx`.
pub fn direction_factor(n_tx: usize, m: &MotionUpdate, lambda: f64) -> Vec<Complex64> {
    (1..=n_tx)
        .map(|k| {
            let path = (n_tx - k) as f64 * m.ell * m.delta_theta * m.theta.sin();
            Complex64::from_polar(1.0, 2.0 * PI * path / lambda)
        })
        .collect()
}

/// Feedback matrix as the AP reconstructs it: steering columns of the
/// normalized `V`, optionally passed through the quantizer.
pub fn feedback_matrix(h: &ChannelMatrix, bits: Option<(u32, u32)>) -> Result<BeamformingMatrix> {
    let (_, _, v) = svd_decompose(h);
    let n_cols = h.n_rx().min(h.n_tx());
    let (vn, _) = phase_normalize(&v.steering(n_cols));
    match bits {
        Some((bp, bs)) => decompress(&compress(&vn, bp, bs)?),
        None => from_angles(&givens_angles(&vn)?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityRow {
    pub t: f64,
    /// Unwrapped phase change of `H[0,0]` since the first step, radians.
    pub csi_phase_change: f64,
    /// `‖Ṽ_t − Ṽ_0‖_F` of the reconstructed feedback matrix.
    pub bfi_change: f64,
}

/// Applies each motion (relative to `h0`) and tracks how raw CSI and
/// reconstructed feedback respond.
pub fn bfi_sensitivity_demo(
    h0: &ChannelMatrix,
    motions: &[(f64, MotionUpdate)],
    lambda: f64,
    bits: Option<(u32, u32)>,
) -> Result<Vec<SensitivityRow>> {
    if motions.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::domain("motion timestamps must be strictly increasing"));
    }
    let v0 = feedback_matrix(h0, bits)?;
    let p0 = h0.h[(0, 0)].arg();
    let mut prev = p0;
    let mut unwrapped = 0.0;
    let mut rows = Vec::with_capacity(motions.len());
    for (t, m) in motions {
        let h1 = apply_motion(h0, m, lambda)?;
        let p = h1.h[(0, 0)].arg();
        let mut dp = p - prev;
        dp -= 2.0 * PI * (dp / (2.0 * PI)).round();
        unwrapped += dp;
        prev = p;
        let v1 = feedback_matrix(&h1, bits)?;
        rows.push(SensitivityRow {
            t: *t,
            csi_phase_change: unwrapped,
            bfi_change: v1.v.sub(&v0.v).frobenius(),
        });
    }
    Ok(rows)
}

/// `steps + 1` motions that lengthen every path by the same amount, from 0
/// to `span` meters, one per `dt` seconds.
pub fn radial_sweep(n_rx: usize, ell: f64, theta: f64, span: f64, steps: usize, dt: f64) -> Vec<(f64, MotionUpdate)> {
    (0..=steps)
        .map(|i| {
            let d = span * i as f64 / steps.max(1) as f64;
            let m = MotionUpdate {
                delta_d_t: d,
                delta_d_r: vec![d; n_rx],
                ..MotionUpdate::none(n_rx, ell, theta)
            };
            (i as f64 * dt, m)
        })
        .collect()
}

/// `steps + 1` motions turning the subject's direction by `0..=span` radians.
pub fn direction_sweep(n_rx: usize, ell: f64, theta: f64, span: f64, steps: usize, dt: f64) -> Vec<(f64, MotionUpdate)> {
    (0..=steps)
        .map(|i| {
            let m = MotionUpdate {
                delta_theta: span * i as f64 / steps.max(1) as f64,
                ..MotionUpdate::none(n_rx, ell, theta)
            };
            (i as f64 * dt, m)
        })
        .collect()
}

pub const SENSITIVITY_CSV_HEADER: &str = "t_s,csi_phase_change_rad,bfi_change";

pub fn sensitivity_csv(rows: &[SensitivityRow]) -> String {
    let mut out = String::from(SENSITIVITY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{:.6},{:.9},{:.9e}", r.t, r.csi_phase_change, r.bfi_change);
    }
    out
}
