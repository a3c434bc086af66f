//! `nfsense`: drives the toolkit's experiments from the command line.
//!
//! Every subcommand reads an optional `--config` file of `key=value` lines,
//! applies its own flags and any `--set key=value` on top, and writes text or
//! CSV files under `--out`. `NFSENSE_THREADS` caps the worker pool.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use nfsense::bfi::{bfi_sensitivity_demo, direction_sweep, radial_sweep, sensitivity_csv, ChannelMatrix};
use nfsense::capacity::{capacity_csv, capacity_curve, CapacityQuery, FitParams};
use nfsense::config::{parse_point, parse_range, RunConfig};
use nfsense::coordinator::{Decision, Registration, Registry};
use nfsense::experiment::{analyze_link, baseline_mse, model_mse, RESPIRATION_BAND_HZ};
use nfsense::geometry::{vir_map, Grid, Mover, Point2D, RadioConfig};
use nfsense::metrics::{merge_known, metrics_csv};
use nfsense::rng::derive_seed;
use nfsense::scene::{CsiSeries, Link, MotionProfile, Scene};
use nfsense::sra::{build_dataset, label_slices, process, read_dataset, write_dataset, MotionType, SraConfig, Spectrogram};
use nfsense::tcn::{load_model, loss_history_csv, save_model, train_with, TcnModel};
use nfsense::traffic::{generate_arrivals, SampleTimes, TrafficKind};

#[derive(Parser, Debug)]
#[command(name = "nfsense", version, about = "Near-field Wi-Fi multi-person sensing toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// key=value configuration file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Extra configuration override, repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// VIR rasters for one subject and a swept interferer
    FeasibleMap(MapArgs),
    /// Subject-count and spacing bounds over a radius sweep
    Capacity(CapacityArgs),
    /// Render a scene's links to CSI series under bursty traffic
    Simulate(SimulateArgs),
    /// Spectrogram label slices and masked training pairs
    BuildDataset(DatasetArgs),
    /// Train the recovery network
    Train(TrainArgs),
    /// Recover a dense spectrogram from a sparse CSI series
    Recover(RecoverArgs),
    /// Rate, entropy and recovery metrics for a simulated capture
    Eval(EvalArgs),
    /// Raw CSI versus reconstructed beamforming feedback under motion
    BfiDemo(BfiArgs),
    /// Replay an arrival script through the admission coordinator
    RegisterSim(RegisterArgs),
}

#[derive(Args, Debug)]
struct MapArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Subject position x,y
    #[arg(long, allow_hyphen_values = true)]
    subject: Option<String>,
    /// Subject UE position x,y
    #[arg(long, allow_hyphen_values = true)]
    ue: Option<String>,
}

#[derive(Args, Debug)]
struct CapacityArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Radius sweep lo:hi:step in meters
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    delta_r: Option<f64>,
    #[arg(long)]
    k: Option<u32>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scene description file (default: four-person table)
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Four comma-separated breathing rates, bpm
    #[arg(long)]
    rates: Option<String>,
    #[arg(long)]
    duration: Option<f64>,
    /// ul-csi, dl-csi, ul-bfi or uniform
    #[arg(long)]
    traffic_kind: Option<String>,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// Directory written by `simulate`
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    masks_per_label: Option<usize>,
    #[arg(long)]
    mask_fraction: Option<f64>,
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    motion: Option<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory written by `build-dataset`
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// full or masked
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    channels: Option<usize>,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSI series CSV (`t_s,re,im`)
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Directory written by `simulate`
    #[arg(long)]
    input: PathBuf,
    /// Recover near-field spectrograms with this model before scoring
    #[arg(long)]
    model: Option<PathBuf>,
    /// Also score recovery on this dataset's test split
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BfiArgs {
    #[arg(long)]
    n_tx: Option<usize>,
    #[arg(long)]
    n_rx: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    bits_phi: Option<u32>,
    #[arg(long)]
    bits_psi: Option<u32>,
}

#[derive(Args, Debug)]
struct RegisterArgs {
    /// Arrival script; one `register ID X,Y UE_X,UE_Y [MOTION] [STRATEGY]`
    /// or `deregister ID` per line (default: built-in table scenario)
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::new(),
    };
    cfg.set_opt("seed", c.seed)?;
    for kv in &c.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(c: &Common) -> Result<&Path> {
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    Ok(&c.out)
}

fn require(path: &Path) -> Result<()> {
    ensure!(path.exists(), "input not found: {}", path.display());
    Ok(())
}

fn ensure_finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    ensure!(values.into_iter().all(f64::is_finite), "{what} contains a non-finite value");
    Ok(())
}

fn cmd_feasible_map(c: &Common, a: &MapArgs) -> Result<()> {
    let mut cfg = load_config(c)?;
    cfg.set_opt("map.beta", a.beta)?;
    cfg.set_opt("radio.alpha", a.alpha)?;
    cfg.set_opt("map.step", a.step)?;
    cfg.set_opt("map.subject", a.subject.as_ref())?;
    cfg.set_opt("map.ue", a.ue.as_ref())?;
    let radio = cfg.radio(RadioConfig::normalized())?;
    let point = |key: &str, default: &str| parse_point(cfg.get(key).unwrap_or(default));
    let ap = point("map.ap", "0,0")?;
    let subject = point("map.subject", "1,0")?;
    let ue = point("map.ue", "1.1,0")?;
    let grid = Grid::covering(
        cfg.parsed_or("map.x_min", -1.0)?,
        cfg.parsed_or("map.x_max", 2.5)?,
        cfg.parsed_or("map.y_min", -1.5)?,
        cfg.parsed_or("map.y_max", 1.5)?,
        cfg.parsed_or("map.step", 0.02)?,
    )?;
    let map = vir_map(&radio, ap, ue, &Mover::new(subject, 1.0), &grid, cfg.parsed_or("map.beta", 50.0)?)?;
    map.write_rasters(out_dir(c)?)?;
    let n = map.feasible.iter().filter(|&&f| f).count();
    eprintln!("{} of {} cells feasible", n, grid.len());
    Ok(())
}

fn cmd_capacity(c: &Common, a: &CapacityArgs) -> Result<()> {
    let mut cfg = load_config(c)?;
    cfg.set_opt("radio.alpha", a.alpha)?;
    cfg.set_opt("capacity.beta", a.beta)?;
    cfg.set_opt("capacity.r", a.r.as_ref())?;
    cfg.set_opt("capacity.delta_r", a.delta_r)?;
    cfg.set_opt("capacity.k", a.k)?;
    let radio = cfg.radio(RadioConfig::normalized())?;
    let k = cfg.parsed_or("capacity.k", 2)?;
    let (lo, hi, step) = parse_range(cfg.get("capacity.r").unwrap_or("0.3:4.0:0.01"))?;
    let q = CapacityQuery {
        r: lo,
        delta_r: cfg.parsed_or("capacity.delta_r", 0.1)?,
        beta: cfg.parsed_or("capacity.beta", 50.0)?,
        cfg: radio,
        k,
    };
    let rows = capacity_curve(&q, lo, hi, step, &FitParams::for_alpha(radio.alpha, k)?)?;
    let path = out_dir(c)?.join("capacity.csv");
    write(&path, &capacity_csv(&rows))?;
    let best = rows.iter().map(|r| r.n_max_fit).max().unwrap_or(0);
    eprintln!("{} radii, max n_max_fit = {best}", rows.len());
    Ok(())
}

fn scene_from_config(cfg: &RunConfig, seed: u64) -> Result<Scene> {
    if let Some(p) = cfg.get("scene.file") {
        let p = Path::new(p);
        require(p)?;
        return Ok(Scene::read(p)?);
    }
    let rates: Vec<f64> = cfg.list("scene.rates")?.unwrap_or_else(|| vec![13.0, 16.0, 19.0, 22.0]);
    let Ok(rates) = <[f64; 4]>::try_from(rates.as_slice()) else {
        bail!("scene.rates needs exactly four rates, got {}", rates.len());
    };
    let mut scene = Scene::four_person_table(rates, seed);
    // Each subject holds its breath once, in turn.
    for (i, u) in scene.users.iter_mut().enumerate() {
        if let MotionProfile::Respiration { holds, .. } = &mut u.motion {
            let a = 10.0 + 25.0 * i as f64;
            holds.push((a, a + 20.0));
        }
    }
    Ok(scene)
}

fn cmd_simulate(c: &Common, a: &SimulateArgs) -> Result<()> {
    let mut cfg = load_config(c)?;
    cfg.set_opt("scene.file", a.scene.as_ref().map(|p| p.display()))?;
    cfg.set_opt("scene.rates", a.rates.as_ref())?;
    cfg.set_opt("scene.duration_s", a.duration)?;
    cfg.set_opt("traffic.kind", a.traffic_kind.as_ref())?;
    let seed = cfg.seed()?;
    let scene = scene_from_config(&cfg, seed)?;
    let duration: f64 = cfg.parsed_or("scene.duration_s", 120.0)?;
    ensure!(duration > 0.0, "scene.duration_s must be positive");
    let traffic = cfg.traffic(TrafficKind::DlCsi)?;
    let uniform_rate: f64 = cfg.parsed_or("scene.sample_rate_hz", 100.0)?;
    let links = scene.links();
    // Each link draws its own arrival process.
    let series: Vec<nfsense::Result<CsiSeries>> = links
        .par_iter()
        .enumerate()
        .map(|(i, &link)| {
            let times = match &traffic {
                Some(m) => generate_arrivals(&nfsense::traffic::TrafficModel { seed: derive_seed(seed, &[i as u64]), ..*m }, duration)?,
                None => SampleTimes::uniform(uniform_rate, duration),
            };
            scene.render_csi(link, &times.times)
        })
        .collect();
    let dir = out_dir(c)?;
    write(&dir.join("scene.txt"), &scene.to_text())?;
    write(&dir.join("run.txt"), &cfg.to_text())?;
    for (link, s) in links.iter().zip(series) {
        let s = s?;
        eprintln!("{link}: {} samples", s.len());
        s.write(&dir.join(format!("{link}.csv")))?;
    }
    Ok(())
}

/// `ue*.csv` files in `dir`, sorted by name.
fn ue_files(dir: &Path) -> Result<Vec<PathBuf>> {
    require(dir)?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            name.starts_with("ue") && name.ends_with(".csv")
        })
        .collect();
    files.sort();
    ensure!(!files.is_empty(), "no ue*.csv series in {}", dir.display());
    Ok(files)
}

/// Spectrogram of a series over whole seconds from 0 to its last sample.
fn series_spectrogram(s: &CsiSeries, cfg: &SraConfig) -> nfsense::Result<Spectrogram> {
    let end = s.timestamps.last().map_or(0.0, |t| t.ceil().max(*t + 1e-9));
    Ok(process(s, 0.0, end, cfg)?.0)
}

fn read_series(p: &Path) -> Result<CsiSeries> {
    require(p)?;
    CsiSeries::read(p).with_context(|| format!("reading {}", p.display()))
}

fn cmd_build_dataset(c: &Common, a: &DatasetArgs) -> Result<()> {
    let mut cfg = load_config(c)?;
    cfg.set_opt("dataset.frames", a.frames)?;
    cfg.set_opt("dataset.masks_per_label", a.masks_per_label)?;
    cfg.set_opt("dataset.mask_fraction", a.mask_fraction)?;
    cfg.set_opt("dataset.split", a.split)?;
    cfg.set_opt("sra.motion", a.motion.as_ref())?;
    let sra = cfg.sra()?;
    let files = ue_files(&a.input)?;
    let specs: Vec<Spectrogram> = files
        .par_iter()
        .map(|p| -> Result<Spectrogram> { Ok(series_spectrogram(&read_series(p)?, &sra)?) })
        .collect::<Result<_>>()?;
    let frames = cfg.parsed_or("dataset.frames", 64)?;
    let labels: Vec<Spectrogram> = specs.iter().flat_map(|s| label_slices(s, frames)).collect();
    let ds = build_dataset(
        &labels,
        cfg.parsed_or("dataset.masks_per_label", 4)?,
        cfg.mask()?,
        cfg.parsed_or("dataset.split", 0.7)?,
        sra.min_label_slice_s,
        cfg.seed()?,
    )?;
    let dir = out_dir(c)?;
    write_dataset(&ds, dir)?;
    write(&dir.join("run.txt"), &cfg.to_text())?;
    eprintln!("{} labels: {} train, {} test pairs", labels.len(), ds.train.len(), ds.test.len());
    Ok(())
}

fn cmd_train(c: &Common, a: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(c)?;
    cfg.set_opt("train.epochs", a.epochs)?;
    cfg.set_opt("train.lr", a.lr)?;
    cfg.set_opt("train.batch_size", a.batch_size)?;
    cfg.set_opt("train.loss", a.loss.as_ref())?;
    cfg.set_opt("tcn.n_c", a.channels)?;
    require(&a.data)?;
    let ds = read_dataset(&a.data)?;
    let n_f = ds.train.first().or(ds.test.first()).map(|p| p.y.n_f).context("dataset is empty")?;
    let model = TcnModel::new(cfg.tcn(n_f)?)?;
    let tcfg = cfg.train()?;
    let (model, history) = train_with(model, &ds, &tcfg, |e| {
        eprintln!("epoch {} train {:.4e} test {}", e.epoch, e.train_mse, e.test_mse.map_or("-".into(), |t| format!("{t:.4e}")));
    })?;
    ensure_finite("model", model.params().iter().copied())?;
    let dir = out_dir(c)?;
    save_model(&model, &dir.join("model.tcn"))?;
    write(&dir.join("loss.csv"), &loss_history_csv(&history))?;
    Ok(())
}

fn recover_spectrogram(model: &TcnModel, spec: &Spectrogram) -> Result<Spectrogram> {
    ensure!(
        model.config().n_f == spec.n_f,
        "model expects {} frequency bins, spectrogram has {}",
        model.config().n_f,
        spec.n_f
    );
    Ok(merge_known(spec, &model.predict(spec)?)?)
}

fn load(p: &Path) -> Result<TcnModel> {
    require(p)?;
    load_model(p).with_context(|| format!("loading {}", p.display()))
}

fn cmd_recover(c: &Common, a: &RecoverArgs) -> Result<()> {
    let cfg = load_config(c)?;
    let model = load(&a.model)?;
    let series = read_series(&a.input)?;
    let spec = series_spectrogram(&series, &cfg.sra()?)?;
    let rec = recover_spectrogram(&model, &spec)?;
    ensure_finite("recovered spectrogram", rec.data.iter().copied())?;
    let stem = a.input.file_stem().map_or("series".into(), |s| s.to_string_lossy().into_owned());
    let dir = out_dir(c)?;
    spec.write(&dir.join(format!("{stem}.input.spec")))?;
    rec.write(&dir.join(format!("{stem}.recovered.spec")))?;
    let missing = spec.no_data_cols.iter().filter(|&&b| b).count();
    eprintln!("{stem}: {} frames, {missing} filled", spec.n_t);
    Ok(())
}

fn cmd_eval(c: &Common, a: &EvalArgs) -> Result<()> {
    let cfg = load_config(c)?;
    let sra = cfg.sra()?;
    let band = (
        cfg.parsed_or("eval.band_lo_hz", RESPIRATION_BAND_HZ.0)?,
        cfg.parsed_or("eval.band_hi_hz", RESPIRATION_BAND_HZ.1)?,
    );
    let scene_path = a.input.join("scene.txt");
    require(&scene_path)?;
    let scene = Scene::read(&scene_path)?;
    let model = a.model.as_deref().map(load).transpose()?;

    let mut rows: Vec<(String, f64)> = Vec::new();
    let mut links: Vec<(Link, Option<&MotionProfile>)> =
        scene.users.iter().enumerate().map(|(i, u)| (Link::Ue(i), Some(&u.motion))).collect();
    if scene.baseline_observer.is_some() {
        links.push((Link::Baseline, None));
    }
    let reports = links
        .par_iter()
        .map(|&(link, motion)| -> Result<_> {
            let series = read_series(&a.input.join(format!("{link}.csv")))?;
            let mut spec = series_spectrogram(&series, &sra)?;
            if let (Some(m), Link::Ue(_)) = (&model, link) {
                spec = recover_spectrogram(m, &spec)?;
            }
            let holds = match motion {
                Some(MotionProfile::Respiration { holds, .. }) => holds.clone(),
                _ => Vec::new(),
            };
            Ok(analyze_link(&spec, &sra, band, link, &holds)?)
        })
        .collect::<Result<Vec<_>>>()?;

    let truths: Vec<f64> = scene
        .users
        .iter()
        .filter_map(|u| match u.motion {
            MotionProfile::Respiration { rate_bpm, .. } => Some(rate_bpm),
            _ => None,
        })
        .collect();
    let mut near_err = Vec::new();
    let mut near_entropy = Vec::new();
    for r in &reports {
        let name = r.link.to_string();
        rows.push((format!("{name}_est_bpm"), r.estimated_bpm));
        rows.push((format!("{name}_entropy_bits"), r.entropy_bits));
        if let Some(db) = r.hold_drop_db {
            rows.push((format!("{name}_hold_drop_db"), db));
        }
        if let Link::Ue(i) = r.link {
            if let MotionProfile::Respiration { rate_bpm, .. } = scene.users[i].motion {
                let e = (r.estimated_bpm - rate_bpm).abs();
                rows.push((format!("{name}_true_bpm"), rate_bpm));
                rows.push((format!("{name}_error_bpm"), e));
                near_err.push(e);
            }
            near_entropy.push(r.entropy_bits);
        }
    }
    if !near_err.is_empty() {
        rows.push(("near_field_median_error_bpm".into(), median(near_err)));
    }
    if !near_entropy.is_empty() {
        let mean = near_entropy.iter().sum::<f64>() / near_entropy.len() as f64;
        rows.push(("near_field_mean_entropy_bits".into(), mean));
    }
    if let Some(b) = reports.iter().find(|r| r.link == Link::Baseline) {
        if !truths.is_empty() {
            let errs = truths.iter().map(|t| (b.estimated_bpm - t).abs()).collect();
            rows.push(("baseline_median_error_bpm".into(), median(errs)));
        }
    }
    if let Some(d) = &a.data {
        require(d)?;
        let ds = read_dataset(d)?;
        let (interp, sentinel) = baseline_mse(&ds.test)?;
        rows.push(("test_interp_mse".into(), interp));
        rows.push(("test_sentinel_mse".into(), sentinel));
        if let Some(m) = &model {
            rows.push(("test_model_mse".into(), model_mse(m, &ds.test)?));
        }
    }
    ensure_finite("metrics", rows.iter().map(|r| r.1))?;
    write(&out_dir(c)?.join("metrics.csv"), &metrics_csv(&rows))?;
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn cmd_bfi_demo(c: &Common, a: &BfiArgs) -> Result<()> {
    let mut cfg = load_config(c)?;
    cfg.set_opt("bfi.n_tx", a.n_tx)?;
    cfg.set_opt("bfi.n_rx", a.n_rx)?;
    cfg.set_opt("bfi.steps", a.steps)?;
    cfg.set_opt("bfi.bits_phi", a.bits_phi)?;
    cfg.set_opt("bfi.bits_psi", a.bits_psi)?;
    let lambda = cfg.radio(RadioConfig::wifi_5ghz())?.lambda;
    let n_tx = cfg.parsed_or("bfi.n_tx", 3)?;
    let n_rx = cfg.parsed_or("bfi.n_rx", 2)?;
    let steps = cfg.parsed_or("bfi.steps", 40)?;
    let bits = match (cfg.parsed_or("bfi.bits_phi", 0u32)?, cfg.parsed_or("bfi.bits_psi", 0u32)?) {
        (0, 0) => None,
        (p, s) if p > 0 && s > 0 => Some((p, s)),
        _ => bail!("bfi.bits_phi and bfi.bits_psi must both be zero or both positive"),
    };
    let h0 = ChannelMatrix::random(n_rx, n_tx, cfg.seed()?)?;
    let (ell, theta, dt) = (lambda / 2.0, 30f64.to_radians(), 0.1);
    let span = cfg.parsed_or("bfi.span_wavelengths", 2.0)? * lambda;
    let sweep = cfg.parsed_or("bfi.sweep_deg", 10.0f64)?.to_radians();
    let radial = bfi_sensitivity_demo(&h0, &radial_sweep(n_rx, ell, theta, span, steps, dt), lambda, bits)?;
    let turn = bfi_sensitivity_demo(&h0, &direction_sweep(n_rx, ell, theta, sweep, steps, dt), lambda, bits)?;
    let all = radial.iter().chain(&turn);
    ensure_finite("sensitivity", all.flat_map(|r| [r.csi_phase_change, r.bfi_change]))?;
    let dir = out_dir(c)?;
    write(&dir.join("sensitivity_radial.csv"), &sensitivity_csv(&radial))?;
    write(&dir.join("sensitivity_direction.csv"), &sensitivity_csv(&turn))?;
    let max = |rows: &[nfsense::bfi::SensitivityRow]| rows.iter().map(|r| r.bfi_change).fold(0.0, f64::max);
    eprintln!("radial: max BFI change {:.3e}; direction: {:.3e}", max(&radial), max(&turn));
    Ok(())
}

/// Four subjects around the AP, an intruder beside user a's device, then a
/// departure that lets the intruder in.
const DEFAULT_SCRIPT: &str = "\
register a 1,1 1.106,1.106
register b -1,1 -1.106,1.106
register c -1,-1 -1.106,-1.106
register d 1,-1 1.106,-1.106
register x 1.096,1.106 0.986,1.106
deregister a
register x 1.096,1.106 0.986,1.106
";

fn parse_event(line: &str) -> Result<Option<(String, Option<Registration>)>> {
    let f: Vec<&str> = line.split_whitespace().collect();
    match f.as_slice() {
        [] => Ok(None),
        [c, ..] if c.starts_with('#') => Ok(None),
        ["deregister", id] => Ok(Some((id.to_string(), None))),
        ["register", id, pos, ue, rest @ ..] if rest.len() <= 2 => {
            let motion: MotionType = rest.first().map_or(Ok(MotionType::Respiration), |s| s.parse())?;
            let strategy: TrafficKind = rest.get(1).map_or(Ok(TrafficKind::UlCsi), |s| s.parse())?;
            Ok(Some((
                id.to_string(),
                Some(Registration {
                    user_id: id.to_string(),
                    position: parse_point(pos)?,
                    ue: parse_point(ue)?,
                    motion_type: motion,
                    strategy,
                }),
            )))
        }
        _ => bail!("expected `register ID X,Y UE_X,UE_Y [MOTION] [STRATEGY]` or `deregister ID`"),
    }
}

fn cmd_register_sim(c: &Common, a: &RegisterArgs) -> Result<()> {
    let mut cfg = load_config(c)?;
    cfg.set_opt("register.script", a.script.as_ref().map(|p| p.display()))?;
    cfg.set_opt("register.beta", a.beta)?;
    let script = match cfg.get("register.script") {
        Some(p) => {
            let p = Path::new(p);
            require(p)?;
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => DEFAULT_SCRIPT.to_string(),
    };
    let mut reg = Registry::new(
        Point2D::new(0.0, 0.0),
        cfg.radio(RadioConfig::normalized())?,
        cfg.parsed_or("register.beta", 50.0)?,
        cfg.parsed_or("register.radius", 1.6)?,
        cfg.parsed_or("register.delta_r", 0.16)?,
    )?;
    let mut log = String::from("step,action,user_id,decision,detail\n");
    let mut step = 0;
    for (n, line) in script.lines().enumerate() {
        let Some((id, event)) = parse_event(line).with_context(|| format!("script line {}", n + 1))? else {
            continue;
        };
        let (action, decision, detail) = match event {
            Some(r) => match reg.register(r).with_context(|| format!("script line {}", n + 1))? {
                Decision::Admitted { f_cut } => ("register", "admitted", format!("f_cut={f_cut}")),
                Decision::Rejected(why) => ("register", "rejected", why.to_string()),
            },
            None => {
                reg.deregister(&id).with_context(|| format!("script line {}", n + 1))?;
                ("deregister", "removed", String::new())
            }
        };
        log.push_str(&format!("{step},{action},{id},{decision},\"{detail}\"\n"));
        step += 1;
    }
    ensure!(reg.invariant_holds()?, "registry invariant violated");
    let dir = out_dir(c)?;
    write(&dir.join("admission.csv"), &log)?;
    write(&dir.join("registry.csv"), &reg.to_csv())?;
    eprintln!("{} users admitted", reg.users().len());
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("NFSENSE_THREADS") {
        let n: usize = v.parse().with_context(|| format!("NFSENSE_THREADS must be a positive integer, got `{v}`"))?;
        ensure!(n > 0, "NFSENSE_THREADS must be a positive integer, got `{v}`");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_threads()?;
    let c = &cli.common;
    match &cli.cmd {
        Cmd::FeasibleMap(a) => cmd_feasible_map(c, a),
        Cmd::Capacity(a) => cmd_capacity(c, a),
        Cmd::Simulate(a) => cmd_simulate(c, a),
        Cmd::BuildDataset(a) => cmd_build_dataset(c, a),
        Cmd::Train(a) => cmd_train(c, a),
        Cmd::Recover(a) => cmd_recover(c, a),
        Cmd::Eval(a) => cmd_eval(c, a),
        Cmd::BfiDemo(a) => cmd_bfi_demo(c, a),
        Cmd::RegisterSim(a) => cmd_register_sim(c, a),
    }
}
