//! Kernel cache file: a magic line, one JSON header line, then the
//! little-endian `f64` payload (grid values or sample coordinates).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    Anchor, GridRepr, HeisenbergRepr, KdeRepr, KernelError, KernelEstimate, KernelMethod, KernelRepr,
};
use crate::models::{ModelSpace, Point};

pub const CACHE_MAGIC: &[u8] = b"HBKERNEL1\n";

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Layout {
    Grid { n: usize },
    Kde { dim: usize, counts: Vec<usize>, bandwidth: Vec<Vec<f64>>, peak: Vec<f64> },
    Heisenberg { shells: Option<usize> },
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: String,
    space: ModelSpace,
    method: KernelMethod,
    anchor: Anchor,
    symmetric: bool,
    times: Vec<f64>,
    mass: Vec<f64>,
    seed: Option<u64>,
    flags: Vec<String>,
    rel_floor: f64,
    layout: Layout,
    payload_len: usize,
    payload_sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_kernel(k: &KernelEstimate, path: &Path) -> Result<(), KernelError> {
    let mut payload: Vec<f64> = Vec::new();
    let layout = match &k.repr {
        KernelRepr::Grid(g) => {
            for s in &g.slices {
                payload.extend_from_slice(s);
            }
            Layout::Grid { n: g.n }
        }
        KernelRepr::Kde(d) => {
            let dim = k.space.dim();
            for s in &d.samples {
                for p in s {
                    payload.extend_from_slice(p.as_slice());
                }
            }
            Layout::Kde {
                dim,
                counts: d.samples.iter().map(Vec::len).collect(),
                bandwidth: d.bandwidth.clone(),
                peak: d.peak.clone(),
            }
        }
        KernelRepr::Heisenberg(h) => Layout::Heisenberg { shells: h.shells },
    };
    let bytes: Vec<u8> = payload.iter().flat_map(|v| v.to_le_bytes()).collect();
    let header = Header {
        model: k.model.clone(),
        space: k.space,
        method: k.method,
        anchor: k.anchor,
        symmetric: k.symmetric,
        times: k.times.clone(),
        mass: k.mass.clone(),
        seed: k.seed,
        flags: k.flags.clone(),
        rel_floor: k.rel_floor,
        layout,
        payload_len: payload.len(),
        payload_sha256: hex(&Sha256::digest(&bytes)),
    };
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    serde_json::to_writer(&mut w, &header).map_err(|e| KernelError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_kernel(path: &Path) -> Result<KernelEstimate, KernelError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = vec![0u8; CACHE_MAGIC.len()];
    r.read_exact(&mut magic)?;
    if magic != CACHE_MAGIC {
        return Err(KernelError::Format("bad magic".into()));
    }
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header =
        serde_json::from_str(line.trim_end()).map_err(|e| KernelError::Format(e.to_string()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * header.payload_len {
        return Err(KernelError::Format(format!(
            "payload has {} bytes, header declares {} values",
            bytes.len(),
            header.payload_len
        )));
    }
    if hex(&Sha256::digest(&bytes)) != header.payload_sha256 {
        return Err(KernelError::Format("payload checksum mismatch".into()));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let nt = header.times.len();
    let repr = match header.layout {
        Layout::Grid { n } => {
            if values.len() != n * n * nt {
                return Err(KernelError::Format("grid payload size mismatch".into()));
            }
            let slices: Vec<Vec<f64>> = values.chunks_exact(n * n).map(<[f64]>::to_vec).collect();
            let slice_max = slices
                .iter()
                .map(|s| s.iter().cloned().fold(0.0, f64::max))
                .collect();
            KernelRepr::Grid(GridRepr {
                n,
                slices,
                slice_max,
            })
        }
        Layout::Kde {
            dim,
            counts,
            bandwidth,
            peak,
        } => {
            if counts.len() != nt || counts.iter().sum::<usize>() * dim != values.len() {
                return Err(KernelError::Format("sample payload size mismatch".into()));
            }
            let mut samples = Vec::with_capacity(nt);
            let mut it = values.chunks_exact(dim).map(Point::new);
            for c in counts {
                samples.push(it.by_ref().take(c).collect());
            }
            KernelRepr::Kde(KdeRepr {
                samples,
                bandwidth,
                peak,
            })
        }
        Layout::Heisenberg { shells } => KernelRepr::Heisenberg(HeisenbergRepr { shells }),
    };
    Ok(KernelEstimate {
        model: header.model,
        space: header.space,
        method: header.method,
        anchor: header.anchor,
        symmetric: header.symmetric,
        times: header.times,
        mass: header.mass,
        seed: header.seed,
        flags: header.flags,
        rel_floor: header.rel_floor,
        repr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatkernel::{solve_heat_grid, GridMesh};
    use crate::VectorFieldSystem;

    #[test]
    fn grid_round_trip_and_corruption() {
        let sys = VectorFieldSystem::torus_grushin();
        let k = solve_heat_grid(&sys, &Point::new(&[0.25, 0.5]), &[0.02, 0.04], &GridMesh::new(16)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.bin");
        write_kernel(&k, &path).unwrap();
        assert_eq!(read_kernel(&path).unwrap(), k);

        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_kernel(&path), Err(KernelError::Format(_))));
    }
}
