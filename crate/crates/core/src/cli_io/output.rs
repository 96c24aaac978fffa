//! CSV and manifest files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{Snapshot, SnapshotNode};
use crate::error::{Error, Result};
use crate::flow::EnergyRecord;
use crate::geometry::NodeClass;

use super::config::{fmt_f64, parse_key_values, SCHEMA_VERSION};

pub const ENERGY_HEADER: &str = "step,t,E,dC_inf_rate,min_eig";

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Snapshot as CSV: header `x,y,class,<labels>`, one row per active node in
/// row-major lattice order.
pub fn snapshot_csv(snapshot: &Snapshot) -> String {
    let mut s = String::from("x,y,class");
    for l in &snapshot.labels {
        s.push(',');
        s.push_str(l);
    }
    s.push('\n');
    for (k, nd) in snapshot.nodes.iter().enumerate() {
        let _ = write!(s, "{},{},{}", fmt_f64(nd.x), fmt_f64(nd.y), nd.class.as_str());
        for c in &snapshot.columns {
            let _ = write!(s, ",{}", fmt_f64(c[k]));
        }
        s.push('\n');
    }
    s
}

pub fn write_snapshot(path: &Path, snapshot: &Snapshot) -> Result<()> {
    atomic_write(path, &snapshot_csv(snapshot))
}

/// Reads a snapshot CSV. The grid size is recovered from the node spacing;
/// step, time, domain and fingerprint are not stored in the file and come
/// back empty.
pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| format_error(path, "empty file"))?.split(',').collect();
    if header.len() < 4 || header[..3] != ["x", "y", "class"] {
        return Err(format_error(path, "header must start with x,y,class and name at least one field"));
    }
    let labels: Vec<String> = header[3..].iter().map(|s| s.trim().to_string()).collect();
    let mut xy = Vec::new();
    let mut classes = Vec::new();
    let mut columns = vec![Vec::new(); labels.len()];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(format_error(path, format!("row {} has {} fields, expected {}", row + 2, fields.len(), header.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| format_error(path, format!("row {}: `{s}` is not a number", row + 2)));
        xy.push([num(fields[0])?, num(fields[1])?]);
        classes.push(match fields[2] {
            "internal" => NodeClass::Internal,
            "ghost" => NodeClass::Ghost,
            "inactive" => NodeClass::Inactive,
            other => return Err(format_error(path, format!("row {}: unknown class `{other}`", row + 2))),
        });
        for (c, f) in columns.iter_mut().zip(&fields[3..]) {
            c.push(num(f)?);
        }
    }
    let n = infer_grid_size(&xy).ok_or_else(|| format_error(path, "cannot infer the grid size from the node positions"))?;
    let nodes = xy
        .iter()
        .zip(classes)
        .map(|(p, class)| SnapshotNode {
            i: (p[0] * n as f64).round() as usize,
            j: (p[1] * n as f64).round() as usize,
            x: p[0],
            y: p[1],
            class,
        })
        .collect();
    Ok(Snapshot {
        n,
        domain: String::new(),
        step: 0,
        time: 0.0,
        fingerprint: String::new(),
        nodes,
        labels,
        columns,
    })
}

fn infer_grid_size(xy: &[[f64; 2]]) -> Option<usize> {
    let mut h = f64::INFINITY;
    for axis in 0..2 {
        let mut v: Vec<f64> = xy.iter().map(|p| p[axis]).collect();
        v.sort_by(f64::total_cmp);
        for w in v.windows(2) {
            let d = w[1] - w[0];
            if d > 1e-12 && d < h {
                h = d;
            }
        }
    }
    h.is_finite().then(|| (1.0 / h).round() as usize).filter(|&n| n > 0)
}

pub fn energy_csv(records: &[EnergyRecord]) -> String {
    let mut s = format!("{ENERGY_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.step,
            fmt_f64(r.time),
            fmt_f64(r.energy),
            fmt_f64(r.dc_rate),
            fmt_f64(r.min_eig)
        );
    }
    s
}

pub fn read_energy(path: &Path) -> Result<Vec<EnergyRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(ENERGY_HEADER) {
        return Err(format_error(path, format!("header must be `{ENERGY_HEADER}`")));
    }
    lines
        .enumerate()
        .map(|(row, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || format_error(path, format!("row {}: malformed record `{line}`", row + 2));
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(EnergyRecord {
                step: f[0].parse().map_err(|_| bad())?,
                time: num(f[1])?,
                energy: num(f[2])?,
                dc_rate: num(f[3])?,
                min_eig: num(f[4])?,
            })
        })
        .collect()
}

/// Record of one run, written as `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub schema_version: u32,
    pub fingerprint: String,
    pub code_version: String,
    pub wall_time_s: f64,
    pub steps: usize,
    pub final_time: f64,
    /// `steady-state`, `T reached` or `error`.
    pub termination: String,
    pub error: Option<String>,
    pub energy_file: PathBuf,
    pub snapshot_files: Vec<PathBuf>,
    pub final_snapshot: Option<PathBuf>,
}

const TIME_UNITS: &str = "rescaled time t = c*t_phys; D_tilde = D/c, nu_tilde = nu/c";

impl RunManifest {
    pub fn render(&self) -> String {
        let list = |v: &[PathBuf]| v.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(";");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("schema_version", self.schema_version.to_string());
        kv("fingerprint", self.fingerprint.clone());
        kv("code_version", self.code_version.clone());
        kv("wall_time_s", format!("{:.3}", self.wall_time_s));
        kv("steps", self.steps.to_string());
        kv("final_time", fmt_f64(self.final_time));
        kv("termination", self.termination.clone());
        if let Some(e) = &self.error {
            kv("error", e.replace(['\n', '#'], " "));
        }
        kv("energy_file", self.energy_file.display().to_string());
        kv("snapshot_files", list(&self.snapshot_files));
        kv(
            "final_snapshot",
            self.final_snapshot.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        kv("time_units", TIME_UNITS.into());
        s
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let entries = parse_key_values(text, &origin.display().to_string())?;
        let get = |k: &str| entries.iter().find(|e| e.0 == k).map(|e| e.1.as_str());
        let need = |k: &str| get(k).ok_or_else(|| format_error(origin, format!("missing `{k}`")));
        let number = |k: &str| -> Result<f64> {
            need(k)?.parse().map_err(|_| format_error(origin, format!("`{k}` is not a number")))
        };
        let paths = |s: &str| s.split(';').filter(|p| !p.is_empty()).map(PathBuf::from).collect();
        Ok(RunManifest {
            schema_version: number("schema_version")? as u32,
            fingerprint: need("fingerprint")?.into(),
            code_version: need("code_version")?.into(),
            wall_time_s: number("wall_time_s")?,
            steps: number("steps")? as usize,
            final_time: number("final_time")?,
            termination: need("termination")?.into(),
            error: get("error").map(String::from),
            energy_file: need("energy_file")?.into(),
            snapshot_files: paths(need("snapshot_files")?),
            final_snapshot: get("final_snapshot").filter(|s| !s.is_empty()).map(PathBuf::from),
        })
    }

    pub(crate) fn new(fingerprint: String) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            fingerprint,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
            steps: 0,
            final_time: 0.0,
            termination: String::new(),
            error: None,
            energy_file: PathBuf::new(),
            snapshot_files: Vec::new(),
            final_snapshot: None,
        }
    }
}
