//! Synthetic multi-subject scenes rendered to per-link CSI series.
//!
//! Each subject sits next to its own UE. A subject's motion displaces the
//! reflecting point radially by `δ(t)`, lengthening both the AP→subject and
//! subject→receiver legs by `δ(t)`. The received gain is the sum of every
//! subject's reflection, a static line-of-sight term, a slowly varying
//! dynamic term and white observation noise.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{reflection_gain_unchecked, Point2D, RadioConfig};
use crate::rng;

/// Maximum subject–UE distance for a near-field placement.
pub const NEAR_FIELD_M: f64 = 0.3;
/// Correlation time of the dynamic channel term.
pub const DYNAMIC_TAU_S: f64 = 0.5;
/// Cosine components in a random displacement trajectory.
const RANDOM_COMPONENTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RandomKind {
    Gesture,
    Activity,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotionProfile {
    Still,
    /// `A·sin(2π·rate/60·τ)` where `τ` stops advancing during breath holds,
    /// so the chest freezes at its hold-entry position and resumes smoothly.
    Respiration {
        rate_bpm: f64,
        amplitude_m: f64,
        holds: Vec<(f64, f64)>,
    },
    /// Band-limited random displacement with a given RMS speed.
    Random {
        kind: RandomKind,
        rms_speed: f64,
        bandwidth_hz: f64,
        seed: u64,
    },
}

impl MotionProfile {
    pub fn respiration(rate_bpm: f64) -> Self {
        MotionProfile::Respiration {
            rate_bpm,
            amplitude_m: 0.005,
            holds: Vec::new(),
        }
    }

    pub fn gesture(seed: u64) -> Self {
        MotionProfile::Random {
            kind: RandomKind::Gesture,
            rms_speed: 0.3,
            bandwidth_hz: 5.0,
            seed,
        }
    }

    pub fn activity(seed: u64) -> Self {
        MotionProfile::Random {
            kind: RandomKind::Activity,
            rms_speed: 1.0,
            bandwidth_hz: 15.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MotionProfile::Still => Ok(()),
            MotionProfile::Respiration {
                rate_bpm,
                amplitude_m,
                holds,
            } => {
                if !(6.0..=40.0).contains(rate_bpm) {
                    return Err(Error::domain(format!(
                        "respiration rate must lie in [6, 40] bpm, got {rate_bpm}"
                    )));
                }
                if !(*amplitude_m >= 0.0) {
                    return Err(Error::domain("respiration amplitude must be >= 0"));
                }
                let mut last_stop = 0.0;
                for &(start, stop) in holds {
                    if !(start >= last_stop && stop > start) {
                        return Err(Error::domain(
                            "breath holds must be ordered, non-overlapping and non-empty",
                        ));
                    }
                    last_stop = stop;
                }
                Ok(())
            }
            MotionProfile::Random {
                rms_speed,
                bandwidth_hz,
                ..
            } => {
                if !(*rms_speed >= 0.0) || !(*bandwidth_hz > 0.0) {
                    return Err(Error::domain(
                        "random motion needs rms_speed >= 0 and bandwidth_hz > 0",
                    ));
                }
                Ok(())
            }
        }
    }

    /// Whether `t` falls inside a breath hold.
    pub fn holding(&self, t: f64) -> bool {
        match self {
            MotionProfile::Respiration { holds, .. } => {
                holds.iter().any(|&(a, b)| t >= a && t < b)
            }
            _ => false,
        }
    }
}

/// Radial displacement of the reflecting point at time `t`, meters.
pub fn displacement(profile: &MotionProfile, t: f64) -> f64 {
    match profile {
        MotionProfile::Still => 0.0,
        MotionProfile::Respiration {
            rate_bpm,
            amplitude_m,
            holds,
        } => {
            let tau = breathing_time(holds, t);
            amplitude_m * (2.0 * PI * rate_bpm / 60.0 * tau).sin()
        }
        MotionProfile::Random { .. } => RandomTrajectory::new(profile).at(t),
    }
}

/// Time spent breathing before `t`.
fn breathing_time(holds: &[(f64, f64)], t: f64) -> f64 {
    let mut tau = t;
    for &(a, b) in holds {
        if t <= a {
            break;
        }
        tau -= t.min(b) - a;
    }
    tau
}

/// Sum of equal-amplitude cosines at random frequencies in `(0, B]` with
/// random phases, scaled so the RMS of the derivative is `rms_speed`.
#[derive(Debug, Clone)]
struct RandomTrajectory {
    amplitude: f64,
    omegas: Vec<f64>,
    phases: Vec<f64>,
}

impl RandomTrajectory {
    fn new(profile: &MotionProfile) -> Self {
        let (rms_speed, bandwidth_hz, seed, kind) = match profile {
            MotionProfile::Random {
                rms_speed,
                bandwidth_hz,
                seed,
                kind,
            } => (*rms_speed, *bandwidth_hz, *seed, *kind),
            _ => unreachable!("only random profiles have trajectories"),
        };
        let mut r = rng::stream(seed, &[rng::tag::MOTION, kind as u64]);
        let omegas: Vec<f64> = (0..RANDOM_COMPONENTS)
            .map(|_| 2.0 * PI * bandwidth_hz * (1.0 - r.gen::<f64>()))
            .collect();
        let phases: Vec<f64> = (0..RANDOM_COMPONENTS).map(|_| 2.0 * PI * r.gen::<f64>()).collect();
        let mean_sq_rate: f64 = omegas.iter().map(|w| w * w / 2.0).sum();
        RandomTrajectory {
            amplitude: rms_speed / mean_sq_rate.sqrt(),
            omegas,
            phases,
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.amplitude
            * self
                .omegas
                .iter()
                .zip(&self.phases)
                .map(|(w, p)| (w * t + p).cos())
                .sum::<f64>()
    }
}

/// Evaluates a profile at many instants, building any random trajectory once.
fn displacements(profile: &MotionProfile, times: &[f64]) -> Vec<f64> {
    match profile {
        MotionProfile::Random { .. } => {
            let tr = RandomTrajectory::new(profile);
            times.iter().map(|&t| tr.at(t)).collect()
        }
        _ => times.iter().map(|&t| displacement(profile, t)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub ue: Point2D,
    pub subject: Point2D,
    pub motion: MotionProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ap: Point2D,
    pub users: Vec<User>,
    pub baseline_observer: Option<Point2D>,
    pub cfg: RadioConfig,
    /// Standard deviation of the additive complex noise per sample.
    pub noise_std: f64,
    pub seed: u64,
}

/// A receiving device: a user's UE or the baseline observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Link {
    Ue(usize),
    Baseline,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Link::Ue(i) => write!(f, "ue{i}"),
            Link::Baseline => f.write_str("baseline"),
        }
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "baseline" {
            return Ok(Link::Baseline);
        }
        s.strip_prefix("ue")
            .and_then(|n| n.parse::<usize>().ok())
            .map(Link::Ue)
            .ok_or_else(|| Error::UnknownLink(s.to_string()))
    }
}

/// Timestamped complex gains of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiSeries {
    pub link_id: String,
    pub timestamps: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl CsiSeries {
    pub fn new(link_id: impl Into<String>, timestamps: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Shape {
                expected: format!("{} values", timestamps.len()),
                found: format!("{}", values.len()),
            });
        }
        check_increasing(&timestamps)?;
        Ok(CsiSeries {
            link_id: link_id.into(),
            timestamps,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Phase of each sample, unwrapped by nearest-multiple-of-2π continuation.
    pub fn unwrapped_phase(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut offset = 0.0;
        let mut prev = None;
        for z in &self.values {
            let p = z.arg();
            if let Some(q) = prev {
                let jump: f64 = p - q;
                offset -= 2.0 * PI * (jump / (2.0 * PI)).round();
            }
            out.push(p + offset);
            prev = Some(p);
        }
        out
    }

    /// CSV with header `t_s,re,im`; values print in round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 48 + 16);
        out.push_str("t_s,re,im\n");
        for (t, z) in self.timestamps.iter().zip(&self.values) {
            let _ = writeln!(out, "{t},{},{}", z.re, z.im);
        }
        out
    }

    pub fn from_csv(link_id: &str, text: &str) -> Result<Self> {
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("t_s")) {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::format(format!("line {}: expected t_s,re,im", i + 1)));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::format(format!("line {}: `{s}`: {e}", i + 1)))
            };
            ts.push(num(f[0])?);
            vs.push(Complex64::new(num(f[1])?, num(f[2])?));
        }
        CsiSeries::new(link_id, ts, vs)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let link = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_csv(&link, &text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn check_increasing(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("sample times must be finite and strictly increasing"));
    }
    Ok(())
}

/// The separately rendered terms whose sum is the received series.
#[derive(Debug, Clone)]
pub struct Components {
    pub static_gain: Complex64,
    pub dynamic: Vec<Complex64>,
    pub noise: Vec<Complex64>,
    /// One reflected-path track per user, in user order.
    pub subjects: Vec<Vec<Complex64>>,
}

impl Components {
    pub fn total(&self) -> Vec<Complex64> {
        (0..self.dynamic.len())
            .map(|k| {
                let mut z = self.static_gain + self.dynamic[k];
                for s in &self.subjects {
                    z += s[k];
                }
                z + self.noise[k]
            })
            .collect()
    }
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if !(self.noise_std >= 0.0) {
            return Err(Error::domain("noise_std must be >= 0"));
        }
        let mut points = vec![("AP".to_string(), self.ap)];
        if let Some(o) = self.baseline_observer {
            points.push(("baseline observer".into(), o));
        }
        for (i, u) in self.users.iter().enumerate() {
            u.motion.validate()?;
            let d = u.ue.distance(&u.subject);
            if !(d <= NEAR_FIELD_M) {
                return Err(Error::domain(format!(
                    "user {i}: subject is {d:.3} m from its UE (near field requires <= {NEAR_FIELD_M} m)"
                )));
            }
            points.push((format!("user {i} UE"), u.ue));
            points.push((format!("user {i} subject"), u.subject));
        }
        for (i, (na, a)) in points.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::domain(format!("{na} has non-finite coordinates")));
            }
            for (nb, b) in &points[i + 1..] {
                if a.distance(b) == 0.0 {
                    return Err(Error::domain(format!("{na} coincides with {nb}")));
                }
            }
        }
        Ok(())
    }

    pub fn links(&self) -> Vec<Link> {
        let mut v: Vec<Link> = (0..self.users.len()).map(Link::Ue).collect();
        if self.baseline_observer.is_some() {
            v.push(Link::Baseline);
        }
        v
    }

    fn receiver(&self, link: Link) -> Result<(Point2D, u64)> {
        match link {
            Link::Ue(i) if i < self.users.len() => Ok((self.users[i].ue, i as u64)),
            Link::Baseline => self
                .baseline_observer
                .map(|p| (p, u64::MAX))
                .ok_or_else(|| Error::UnknownLink("baseline (scene has no observer)".into())),
            other => Err(Error::UnknownLink(other.to_string())),
        }
    }

    /// Renders every term of the received gain separately.
    pub fn render_components(&self, link: Link, times: &[f64]) -> Result<Components> {
        check_increasing(times)?;
        let (rx, link_tag) = self.receiver(link)?;
        let cfg = &self.cfg;
        let d_ae = self.ap.distance(&rx);
        if !(d_ae > 0.0) {
            return Err(Error::domain("receiver coincides with the AP"));
        }

        let los_cycles = (d_ae / cfg.lambda).rem_euclid(1.0);
        let static_gain = Complex64::from_polar(
            cfg.lambda / (4.0 * PI) * d_ae.powf(-cfg.alpha / 2.0),
            -2.0 * PI * los_cycles,
        );

        // Complex Ornstein-Uhlenbeck process, exact discretization.
        let var = cfg.eta * cfg.lambda * cfg.lambda * d_ae.powf(-cfg.alpha);
        let mut r = rng::stream(self.seed, &[rng::tag::DYNAMIC_CHANNEL, link_tag]);
        let mut dynamic = Vec::with_capacity(times.len());
        if var > 0.0 {
            let sd = (var / 2.0).sqrt();
            let mut x = Complex64::new(sd * gauss(&mut r), sd * gauss(&mut r));
            let mut prev_t = times.first().copied().unwrap_or(0.0);
            for &t in times {
                let a = (-(t - prev_t) / DYNAMIC_TAU_S).exp();
                let s = sd * (1.0 - a * a).sqrt();
                x = x * a + Complex64::new(s * gauss(&mut r), s * gauss(&mut r));
                dynamic.push(x);
                prev_t = t;
            }
        } else {
            dynamic.resize(times.len(), Complex64::new(0.0, 0.0));
        }

        let mut r = rng::stream(self.seed, &[rng::tag::OBSERVATION_NOISE, link_tag]);
        let sd = self.noise_std / 2f64.sqrt();
        let noise: Vec<Complex64> = times
            .iter()
            .map(|_| {
                if sd > 0.0 {
                    Complex64::new(sd * gauss(&mut r), sd * gauss(&mut r))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();

        let subjects = self
            .users
            .iter()
            .map(|u| {
                let d_as = self.ap.distance(&u.subject);
                let d_se = u.subject.distance(&rx);
                displacements(&u.motion, times)
                    .into_iter()
                    .map(|delta| {
                        reflection_gain_unchecked(cfg, (d_as + delta).max(1e-6), (d_se + delta).max(1e-6))
                    })
                    .collect()
            })
            .collect();

        Ok(Components {
            static_gain,
            dynamic,
            noise,
            subjects,
        })
    }

    /// Received gain on `link` at each of `times`.
    pub fn render_csi(&self, link: Link, times: &[f64]) -> Result<CsiSeries> {
        let c = self.render_components(link, times)?;
        CsiSeries::new(link.to_string(), times.to_vec(), c.total())
    }

    /// Received gain at the non-near-field observer.
    pub fn render_baseline(&self, times: &[f64]) -> Result<CsiSeries> {
        if self.baseline_observer.is_none() {
            return Err(Error::UnknownLink("baseline (scene has no observer)".into()));
        }
        self.render_csi(Link::Baseline, times)
    }

    /// Four users 2 m apart around a central AP, UEs 15 cm from their
    /// subjects on the far side, and an observer on the AP side of user 0's
    /// line of sight, away from every subject.
    pub fn four_person_table(rates_bpm: [f64; 4], seed: u64) -> Scene {
        let corners = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
        let users = corners
            .iter()
            .zip(rates_bpm)
            .map(|(&(x, y), rate): (&(f64, f64), f64)| {
                let s = Point2D::new(x, y);
                let norm = x.hypot(y);
                let ue = Point2D::new(x + 0.15 * x / norm, y + 0.15 * y / norm);
                User {
                    ue,
                    subject: s,
                    motion: MotionProfile::respiration(rate),
                }
            })
            .collect();
        Scene {
            ap: Point2D::new(0.0, 0.0),
            users,
            baseline_observer: Some(Point2D::new(0.0, 0.5)),
            cfg: RadioConfig::wifi_5ghz(),
            noise_std: 1e-5,
            seed,
        }
    }

    /// Key=value text with repeated `user.N.*` groups.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let pt = |p: &Point2D| format!("{},{}", p.x, p.y);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "noise_std={}", self.noise_std);
        let _ = writeln!(out, "ap={}", pt(&self.ap));
        if let Some(o) = &self.baseline_observer {
            let _ = writeln!(out, "baseline={}", pt(o));
        }
        let c = &self.cfg;
        let _ = writeln!(out, "radio.lambda={}", c.lambda);
        let _ = writeln!(out, "radio.alpha={}", c.alpha);
        let _ = writeln!(out, "radio.eta={}", c.eta);
        let _ = writeln!(out, "radio.b={}", c.b);
        let _ = writeln!(out, "radio.g_tilde={}", c.g_tilde);
        for (i, u) in self.users.iter().enumerate() {
            let _ = writeln!(out, "user.{i}.ue={}", pt(&u.ue));
            let _ = writeln!(out, "user.{i}.subject={}", pt(&u.subject));
            match &u.motion {
                MotionProfile::Still => {
                    let _ = writeln!(out, "user.{i}.motion=still");
                }
                MotionProfile::Respiration {
                    rate_bpm,
                    amplitude_m,
                    holds,
                } => {
                    let _ = writeln!(out, "user.{i}.motion=respiration");
                    let _ = writeln!(out, "user.{i}.rate_bpm={rate_bpm}");
                    let _ = writeln!(out, "user.{i}.amplitude_m={amplitude_m}");
                    if !holds.is_empty() {
                        let h: Vec<String> = holds.iter().map(|(a, b)| format!("{a}:{b}")).collect();
                        let _ = writeln!(out, "user.{i}.holds={}", h.join(";"));
                    }
                }
                MotionProfile::Random {
                    kind,
                    rms_speed,
                    bandwidth_hz,
                    seed,
                } => {
                    let k = match kind {
                        RandomKind::Gesture => "gesture",
                        RandomKind::Activity => "activity",
                    };
                    let _ = writeln!(out, "user.{i}.motion={k}");
                    let _ = writeln!(out, "user.{i}.rms_speed={rms_speed}");
                    let _ = writeln!(out, "user.{i}.bandwidth_hz={bandwidth_hz}");
                    let _ = writeln!(out, "user.{i}.motion_seed={seed}");
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Scene> {
        let mut top: BTreeMap<String, String> = BTreeMap::new();
        let mut users: BTreeMap<usize, BTreeMap<String, String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(format!("line {}: expected key=value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim().to_string());
            if let Some(rest) = k.strip_prefix("user.") {
                let (n, field) = rest
                    .split_once('.')
                    .ok_or_else(|| Error::format(format!("line {}: bad user key `{k}`", i + 1)))?;
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::format(format!("line {}: bad user index in `{k}`", i + 1)))?;
                users.entry(n).or_default().insert(field.to_string(), v);
            } else {
                top.insert(k.to_string(), v);
            }
        }

        let mut cfg = RadioConfig::wifi_5ghz();
        let mut scene = Scene {
            ap: Point2D::new(0.0, 0.0),
            users: Vec::new(),
            baseline_observer: None,
            cfg,
            noise_std: 1e-5,
            seed: 0,
        };
        for (k, v) in &top {
            match k.as_str() {
                "seed" => scene.seed = parse_num(k, v)?,
                "noise_std" => scene.noise_std = parse_num(k, v)?,
                "ap" => scene.ap = parse_point(k, v)?,
                "baseline" => scene.baseline_observer = Some(parse_point(k, v)?),
                "radio.lambda" => cfg.lambda = parse_num(k, v)?,
                "radio.alpha" => cfg.alpha = parse_num(k, v)?,
                "radio.eta" => cfg.eta = parse_num(k, v)?,
                "radio.b" => cfg.b = parse_num(k, v)?,
                "radio.g_tilde" => cfg.g_tilde = parse_num(k, v)?,
                other => return Err(Error::format(format!("unknown scene key `{other}`"))),
            }
        }
        scene.cfg = cfg;

        for (expected, (n, fields)) in users.into_iter().enumerate() {
            if n != expected {
                return Err(Error::format(format!("user indices must be contiguous; missing user.{expected}")));
            }
            scene.users.push(parse_user(n, &fields, scene.seed)?);
        }
        scene.validate()?;
        Ok(scene)
    }

    pub fn read(path: &Path) -> Result<Scene> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scene::from_text(&text)
    }
}

fn gauss<R: Rng>(r: &mut R) -> f64 {
    StandardNormal.sample(r)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| Error::format(format!("`{key}`: bad value `{v}`: {e}")))
}

fn parse_point(key: &str, v: &str) -> Result<Point2D> {
    let (x, y) = v
        .split_once(',')
        .ok_or_else(|| Error::format(format!("`{key}`: expected `x,y`, got `{v}`")))?;
    Ok(Point2D::new(parse_num(key, x.trim())?, parse_num(key, y.trim())?))
}

fn parse_user(n: usize, f: &BTreeMap<String, String>, scene_seed: u64) -> Result<User> {
    let key = |name: &str| format!("user.{n}.{name}");
    let get = |name: &str| f.get(name).map(String::as_str);
    let allowed: &[&str] = match get("motion").unwrap_or("still") {
        "still" => &["ue", "subject", "motion"],
        "respiration" => &["ue", "subject", "motion", "rate_bpm", "amplitude_m", "holds"],
        "gesture" | "activity" => &["ue", "subject", "motion", "rms_speed", "bandwidth_hz", "motion_seed"],
        other => return Err(Error::format(format!("`{}`: unknown motion `{other}`", key("motion")))),
    };
    if let Some(bad) = f.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::format(format!("unknown scene key `{}`", key(bad))));
    }
    let point = |name: &str| {
        get(name)
            .ok_or_else(|| Error::format(format!("missing `{}`", key(name))))
            .and_then(|v| parse_point(&key(name), v))
    };
    let ue = point("ue")?;
    let subject = point("subject")?;
    let motion = match get("motion").unwrap_or("still") {
        "respiration" => {
            let rate_bpm = match get("rate_bpm") {
                Some(v) => parse_num(&key("rate_bpm"), v)?,
                None => return Err(Error::format(format!("missing `{}`", key("rate_bpm")))),
            };
            let amplitude_m = match get("amplitude_m") {
                Some(v) => parse_num(&key("amplitude_m"), v)?,
                None => 0.005,
            };
            let mut holds = Vec::new();
            if let Some(v) = get("holds") {
                for part in v.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                    let (a, b) = part.split_once(':').ok_or_else(|| {
                        Error::format(format!("`{}`: expected start:stop pairs", key("holds")))
                    })?;
                    holds.push((parse_num(&key("holds"), a.trim())?, parse_num(&key("holds"), b.trim())?));
                }
            }
            MotionProfile::Respiration {
                rate_bpm,
                amplitude_m,
                holds,
            }
        }
        m @ ("gesture" | "activity") => {
            let seed = match get("motion_seed") {
                Some(v) => parse_num(&key("motion_seed"), v)?,
                None => rng::derive_seed(scene_seed, &[rng::tag::MOTION, n as u64]),
            };
            let mut p = if m == "gesture" {
                MotionProfile::gesture(seed)
            } else {
                MotionProfile::activity(seed)
            };
            if let MotionProfile::Random {
                rms_speed,
                bandwidth_hz,
                ..
            } = &mut p
            {
                if let Some(v) = get("rms_speed") {
                    *rms_speed = parse_num(&key("rms_speed"), v)?;
                }
                if let Some(v) = get("bandwidth_hz") {
                    *bandwidth_hz = parse_num(&key("bandwidth_hz"), v)?;
                }
            }
            p
        }
        _ => MotionProfile::Still,
    };
    Ok(User { ue, subject, motion })
}
