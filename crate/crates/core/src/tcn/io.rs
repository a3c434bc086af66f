//! Weight file: the magic line, `key=value` config lines, a `weights` line,
//! then every parameter as a little-endian `f32` in layout order.

use std::path::Path;

use super::{TcnConfig, TcnModel};
use crate::error::{Error, Result};

pub const MAGIC: &str = "TCNAE1";
const DATA_MARKER: &str = "weights";

fn header(cfg: &TcnConfig, n: usize) -> String {
    let dil: Vec<String> = cfg.dilations.iter().map(|d| d.to_string()).collect();
    format!(
        "{MAGIC}\nn_f={}\nn_c={}\nkernel_len={}\nn_blocks={}\ndilations={}\nbottleneck_dim={}\nbottleneck_kernel={}\ndelay={}\nactivation={}\nseed={}\nparameters={n}\n{DATA_MARKER}\n",
        cfg.n_f,
        cfg.n_c,
        cfg.kernel_len,
        cfg.n_blocks,
        dil.join(","),
        cfg.bottleneck_dim,
        cfg.bottleneck_kernel,
        cfg.delay,
        cfg.activation.as_str(),
        cfg.seed,
    )
}

pub fn to_bytes(model: &TcnModel) -> Vec<u8> {
    let mut out = header(model.config(), model.parameter_count()).into_bytes();
    out.reserve(4 * model.parameter_count());
    for &p in model.params() {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    out
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::format(format!("bad value `{v}` for `{key}` in weight file")))
}

pub fn from_bytes(bytes: &[u8]) -> Result<TcnModel> {
    let mut cfg = TcnConfig::default();
    let mut declared = None;
    let mut pos = 0;
    let mut first = true;
    loop {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(Error::format("weight file header is truncated"));
        };
        let line = std::str::from_utf8(&bytes[pos..pos + nl])
            .map_err(|_| Error::format("weight file header is not text"))?;
        pos += nl + 1;
        if first {
            if line != MAGIC {
                return Err(Error::format(format!("bad magic `{line}`, expected `{MAGIC}`")));
            }
            first = false;
            continue;
        }
        if line == DATA_MARKER {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(format!("malformed header line `{line}`")))?;
        match k {
            "n_f" => cfg.n_f = num(k, v)?,
            "n_c" => cfg.n_c = num(k, v)?,
            "kernel_len" => cfg.kernel_len = num(k, v)?,
            "n_blocks" => cfg.n_blocks = num(k, v)?,
            "dilations" => cfg.dilations = v.split(',').map(|d| num(k, d)).collect::<Result<_>>()?,
            "bottleneck_dim" => cfg.bottleneck_dim = num(k, v)?,
            "bottleneck_kernel" => cfg.bottleneck_kernel = num(k, v)?,
            "delay" => cfg.delay = num(k, v)?,
            "activation" => cfg.activation = v.parse()?,
            "seed" => cfg.seed = num(k, v)?,
            "parameters" => declared = Some(num::<usize>(k, v)?),
            other => return Err(Error::format(format!("unknown weight file key `{other}`"))),
        }
    }
    cfg.validate()?;
    let n = cfg.parameter_count();
    if let Some(d) = declared {
        if d != n {
            return Err(Error::Shape {
                expected: format!("{n} parameters for the stored config"),
                found: format!("{d} declared"),
            });
        }
    }
    let body = &bytes[pos..];
    if body.len() != 4 * n {
        return Err(Error::format(format!(
            "weight data holds {} bytes, expected {} ({n} f32 values)",
            body.len(),
            4 * n
        )));
    }
    let params: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::format("weight file holds a non-finite value"));
    }
    TcnModel::from_params(cfg, params)
}

pub fn save_model(model: &TcnModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TcnModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Loads a model and insists its architecture equals `expected`
/// (the seed is not compared).
pub fn load_model_checked(path: &Path, expected: &TcnConfig) -> Result<TcnModel> {
    let m = load_model(path)?;
    let c = m.config();
    let pairs = [
        ("n_f", expected.n_f, c.n_f),
        ("n_c", expected.n_c, c.n_c),
        ("kernel_len", expected.kernel_len, c.kernel_len),
        ("n_blocks", expected.n_blocks, c.n_blocks),
        ("bottleneck_dim", expected.bottleneck_dim, c.bottleneck_dim),
        ("bottleneck_kernel", expected.bottleneck_kernel, c.bottleneck_kernel),
        ("delay", expected.delay, c.delay),
    ];
    for (k, e, f) in pairs {
        if e != f {
            return Err(Error::Shape {
                expected: format!("{k}={e}"),
                found: format!("{k}={f} in {}", path.display()),
            });
        }
    }
    if expected.dilations != c.dilations {
        return Err(Error::Shape {
            expected: format!("dilations={:?}", expected.dilations),
            found: format!("dilations={:?} in {}", c.dilations, path.display()),
        });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TcnConfig {
        TcnConfig {
            n_f: 6,
            n_c: 8,
            kernel_len: 3,
            n_blocks: 2,
            dilations: vec![1, 2],
            bottleneck_dim: 4,
            bottleneck_kernel: 3,
            seed: 5,
            ..TcnConfig::default()
        }
    }

    #[test]
    fn round_trip_is_bitwise_exact() {
        let m = TcnModel::new(cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tcn");
        save_model(&m, &p).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back), to_bytes(&m));
    }

    #[test]
    fn truncated_and_corrupt_files_are_errors() {
        let bytes = to_bytes(&TcnModel::new(cfg()).unwrap());
        for cut in [0, 3, 20, bytes.len() - 1] {
            assert!(from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn wrong_architecture_names_the_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tcn");
        save_model(&TcnModel::new(cfg()).unwrap(), &p).unwrap();
        let other = TcnConfig { n_f: 32, ..cfg() };
        let err = load_model_checked(&p, &other).unwrap_err();
        match err {
            Error::Shape { expected, found } => {
                assert!(expected.contains("n_f=32"));
                assert!(found.contains("n_f=6"));
            }
            e => panic!("{e}"),
        }
        assert!(load_model_checked(&p, &cfg()).is_ok());
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load_model(Path::new("/nonexistent/w.tcn")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/w.tcn"));
    }
}
