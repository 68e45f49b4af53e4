use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BridgeError, SamplePath};
use crate::models::Point;

pub const ENSEMBLE_MAGIC: &[u8] = b"HBPATHS1\n";

/// Writes `path_id,step,t,x0..,clamped` rows; `step` is the integrator step
/// index of each recorded state.
pub fn write_paths_csv<W: Write>(out: W, paths: &[SamplePath]) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    let dim = paths.first().map_or(0, |p| p.states[0].dim());
    write!(w, "path_id,step,t")?;
    for j in 0..dim {
        write!(w, ",x{j}")?;
    }
    writeln!(w, ",clamped")?;
    for p in paths {
        for (t, s) in p.times.iter().zip(&p.states) {
            let step = (t / p.dt).round() as usize;
            let clamped = step > 0 && p.clamped.get(step - 1).copied().unwrap_or(false);
            write!(w, "{},{},{}", p.stream, step, t)?;
            for v in s.iter() {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", u8::from(clamped))?;
        }
    }
    w.flush()
}

#[derive(Serialize, Deserialize)]
struct PathMeta {
    stream: u64,
    seed: u64,
    dt: f64,
    n_records: usize,
    n_steps: usize,
    pinned_from: Option<usize>,
    retried: bool,
    clamped_steps: Vec<usize>,
    drift_len: usize,
}

/// Manifest line of an ensemble file; `extra` carries caller metadata
/// (configuration, failure accounting).
#[derive(Serialize, Deserialize)]
struct EnsembleHeader {
    model: String,
    dim: usize,
    extra: serde_json::Value,
    paths: Vec<PathMeta>,
}

/// Binary ensemble: magic, JSON manifest line, then per path the recorded
/// times, states and drift records as little-endian `f64`.
pub fn write_ensemble(
    file: &Path,
    model: &str,
    paths: &[SamplePath],
    extra: serde_json::Value,
) -> Result<(), BridgeError> {
    let dim = paths.first().map_or(0, |p| p.states[0].dim());
    let header = EnsembleHeader {
        model: model.to_string(),
        dim,
        extra,
        paths: paths
            .iter()
            .map(|p| PathMeta {
                stream: p.stream,
                seed: p.seed,
                dt: p.dt,
                n_records: p.times.len(),
                n_steps: p.clamped.len(),
                pinned_from: p.pinned_from,
                retried: p.retried,
                clamped_steps: p
                    .clamped
                    .iter()
                    .enumerate()
                    .filter_map(|(i, c)| c.then_some(i))
                    .collect(),
                drift_len: p.drift.len(),
            })
            .collect(),
    };
    let mut w = BufWriter::new(File::create(file)?);
    w.write_all(ENSEMBLE_MAGIC)?;
    serde_json::to_writer(&mut w, &header).map_err(|e| BridgeError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    for p in paths {
        for t in &p.times {
            w.write_all(&t.to_le_bytes())?;
        }
        for s in &p.states {
            for v in s.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for d in &p.drift {
            for v in d {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an ensemble file; returns the model name, caller metadata and paths.
/// Noise increments are not stored.
pub fn read_ensemble(
    file: &Path,
) -> Result<(String, serde_json::Value, Vec<SamplePath>), BridgeError> {
    let mut r = BufReader::new(File::open(file)?);
    let mut magic = vec![0u8; ENSEMBLE_MAGIC.len()];
    r.read_exact(&mut magic)?;
    if magic != ENSEMBLE_MAGIC {
        return Err(BridgeError::Format("bad magic".into()));
    }
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: EnsembleHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| BridgeError::Format(e.to_string()))?;
    let mut buf = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<f64, BridgeError> {
        r.read_exact(&mut buf)
            .map_err(|_| BridgeError::Format("truncated payload".into()))?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut paths = Vec::with_capacity(header.paths.len());
    for meta in header.paths {
        let times = (0..meta.n_records)
            .map(|_| next(&mut r))
            .collect::<Result<Vec<_>, _>>()?;
        let mut states = Vec::with_capacity(meta.n_records);
        let mut coords = vec![0.0; header.dim];
        for _ in 0..meta.n_records {
            for c in coords.iter_mut() {
                *c = next(&mut r)?;
            }
            states.push(Point::new(&coords));
        }
        let mut drift = Vec::with_capacity(meta.drift_len);
        for _ in 0..meta.drift_len {
            drift.push([next(&mut r)?, next(&mut r)?, next(&mut r)?]);
        }
        let mut clamped = vec![false; meta.n_steps];
        for i in meta.clamped_steps {
            if let Some(c) = clamped.get_mut(i) {
                *c = true;
            }
        }
        paths.push(SamplePath {
            times,
            states,
            increments: Vec::new(),
            clamped,
            drift,
            dt: meta.dt,
            seed: meta.seed,
            stream: meta.stream,
            pinned_from: meta.pinned_from,
            retried: meta.retried,
        });
    }
    Ok((header.model, header.extra, paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::{diffusion_ensemble, DiffusionConfig};
    use crate::VectorFieldSystem;

    #[test]
    fn ensemble_round_trip() {
        let sys = VectorFieldSystem::torus_grushin();
        let cfg = DiffusionConfig::new(0.2, 0.01);
        let paths = diffusion_ensemble(&sys, &Point::new(&[0.1, 0.2]), &cfg, 5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("e.bin");
        write_ensemble(&f, &sys.name, &paths, serde_json::json!({"seed": 5})).unwrap();
        let (model, extra, back) = read_ensemble(&f).unwrap();
        assert_eq!(model, "torus-grushin");
        assert_eq!(extra["seed"], 5);
        assert_eq!(back, paths);

        let mut csv = Vec::new();
        write_paths_csv(&mut csv, &paths).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("path_id,step,t,x0,x1,clamped\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 21);
    }
}
