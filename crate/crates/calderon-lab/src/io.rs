//! File formats: digest-stamped CSV and JSON reports, field serialization
//! (flat CSV and the compact binary grid format), dataset JSON with
//! bit-exact round trips, mesh and chain-trace exports.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use calderon_core::conductivity::GridField;
use calderon_core::inference::TraceStep;
use calderon_core::measurement::{ElectrodeData, SpectralData};
use calderon_core::mesh::DiskMesh;
use serde::{Deserialize, Serialize};

use crate::digest::digest_hex;

/// Render an `f64` with a round-trip-exact shortest representation.
pub fn fmt_f64(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// A CSV payload with digest headers: two comment lines carrying the config
/// digest and the digest of the payload itself, then header and rows.
pub fn write_csv(
    path: &Path,
    config_digest: &str,
    header: &str,
    rows: &[String],
) -> io::Result<()> {
    let mut payload = String::new();
    payload.push_str(header);
    payload.push('\n');
    for row in rows {
        payload.push_str(row);
        payload.push('\n');
    }
    let mut out = String::new();
    writeln!(out, "# config_digest = {config_digest}").unwrap();
    writeln!(out, "# content_digest = {}", digest_hex(payload.as_bytes())).unwrap();
    out.push_str(&payload);
    fs::write(path, out)
}

/// A JSON report: `{"config": …, "config_digest": …, "content_digest": …,
/// "results": …}` where the content digest covers the serialized results.
pub fn write_json_report<C: Serialize, R: Serialize>(
    path: &Path,
    config: &C,
    config_digest: &str,
    results: &R,
) -> io::Result<()> {
    let results_json = serde_json::to_string(results)?;
    let body = serde_json::json!({
        "config": config,
        "config_digest": config_digest,
        "content_digest": digest_hex(results_json.as_bytes()),
        "results": results,
    });
    fs::write(path, serde_json::to_string_pretty(&body)?)
}

// ---------------------------------------------------------------------------
// Field serialization
// ---------------------------------------------------------------------------

/// Flat `x,y,value` CSV over the whole grid.
pub fn field_to_csv(field: &GridField) -> String {
    let n = field.n();
    let mut out = String::from("x,y,value\n");
    for iy in 0..n {
        for ix in 0..n {
            let (x, y) = field.coords(ix, iy);
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_f64(x),
                fmt_f64(y),
                fmt_f64(field.at(ix, iy))
            );
        }
    }
    out
}

const GRID_MAGIC: &[u8; 4] = b"CGF1";

/// Compact binary grid format: magic, `grid_n` (u32 LE), mask flag (u8),
/// then row-major doubles, little-endian.
pub fn field_to_binary(field: &GridField, masked: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + 8 * field.values().len());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&(field.n() as u32).to_le_bytes());
    out.push(masked as u8);
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn field_from_binary(bytes: &[u8]) -> io::Result<(GridField, bool)> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != GRID_MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad grid magic"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let mut values = Vec::with_capacity(n * n);
    let mut buf = [0u8; 8];
    for _ in 0..n * n {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok((GridField::from_values(n, values), flag[0] != 0))
}

// ---------------------------------------------------------------------------
// Dataset JSON
// ---------------------------------------------------------------------------

/// Serialized measurement record; matrices row-major. Numbers round-trip
/// bit-exactly through JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum DatasetJson {
    Spectral {
        eps: f64,
        r: f64,
        j: usize,
        k: usize,
        seed: u64,
        matrix: Vec<f64>,
    },
    Electrode {
        eps: f64,
        p: usize,
        seed: u64,
        matrix: Vec<f64>,
    },
}

impl From<&SpectralData> for DatasetJson {
    fn from(d: &SpectralData) -> Self {
        DatasetJson::Spectral {
            eps: d.eps,
            r: d.r,
            j: d.j_max,
            k: d.k_max,
            seed: d.seed,
            matrix: d.y.clone(),
        }
    }
}

impl From<&ElectrodeData> for DatasetJson {
    fn from(d: &ElectrodeData) -> Self {
        DatasetJson::Electrode {
            eps: d.eps,
            p: d.p,
            seed: d.seed,
            matrix: d.y.clone(),
        }
    }
}

pub fn dataset_to_json(d: &DatasetJson) -> String {
    serde_json::to_string_pretty(d).expect("dataset serializes")
}

pub fn dataset_from_json(s: &str) -> serde_json::Result<DatasetJson> {
    serde_json::from_str(s)
}

// ---------------------------------------------------------------------------
// Mesh and trace exports
// ---------------------------------------------------------------------------

/// Plain-text triangle list: a vertex table, then index triples.
pub fn mesh_to_text(mesh: &DiskMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "vertices {}", mesh.n_vertices());
    for p in &mesh.vertices {
        let _ = writeln!(out, "{} {}", fmt_f64(p[0]), fmt_f64(p[1]));
    }
    let _ = writeln!(out, "triangles {}", mesh.n_triangles());
    for t in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

/// Chain trace as CSV rows `(step, loglik, accepted, sup_theta)`.
pub fn trace_rows(trace: &[TraceStep]) -> Vec<String> {
    trace
        .iter()
        .map(|t| {
            format!(
                "{},{},{},{}",
                t.step,
                fmt_f64(t.loglik),
                u8::from(t.accepted),
                fmt_f64(t.sup_theta)
            )
        })
        .collect()
}

/// Write any string to a file, creating parents.
pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())
}
