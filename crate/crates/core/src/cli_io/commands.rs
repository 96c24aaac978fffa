//! Experiment subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Instant;

use crate::analysis::{interpolate_at, richardson_order, wasserstein_distance, Snapshot};
use crate::error::{Error, Result};
use crate::flow::{self, Simulator};
use crate::geometry::rotate_about_center;

use super::config::{fmt_f64, DomainKind, RunConfig};
use super::output::{atomic_write, energy_csv, read_snapshot, write_snapshot, RunManifest};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const ENERGY_FILE: &str = "energy.csv";
pub const FINAL_SNAPSHOT_FILE: &str = "final.csv";
pub const CONFIG_ECHO_FILE: &str = "config.txt";

pub fn snapshot_file_name(step: usize) -> String {
    format!("snapshot_{step:06}.csv")
}

/// Runs one simulation and writes its outputs under `config.out_dir`.
///
/// The energy series and manifest are written even when the run fails; the
/// manifest then records `termination = error` and the message, and the error
/// is returned.
pub fn cmd_run(config: &RunConfig) -> Result<RunManifest> {
    let out = config.out_dir.as_path();
    let start = Instant::now();
    atomic_write(&out.join(CONFIG_ECHO_FILE), &config.serialize())?;

    let mut manifest = RunManifest::new(config.params.fingerprint());
    manifest.energy_file = ENERGY_FILE.into();
    let every = config.params.snapshot_every;
    let mut records = Vec::new();
    let mut final_state: Option<Snapshot> = None;

    let outcome = Simulator::new(config.params.clone()).and_then(|mut sim| {
        let files = &mut manifest.snapshot_files;
        let termination = sim.run_with(|s| {
            records.push(s.energy_record());
            let step = s.state().step;
            if step == 0 || (every > 0 && step % every == 0) {
                let name = snapshot_file_name(step);
                write_snapshot(&out.join(&name), &s.snapshot())?;
                files.push(name.into());
            }
            Ok(())
        })?;
        final_state = Some(sim.snapshot());
        Ok(termination)
    });

    atomic_write(&out.join(ENERGY_FILE), &energy_csv(&records))?;
    if let Some(last) = records.last() {
        manifest.steps = last.step;
        manifest.final_time = last.time;
    }
    if let Some(snap) = &final_state {
        write_snapshot(&out.join(FINAL_SNAPSHOT_FILE), snap)?;
        manifest.final_snapshot = Some(FINAL_SNAPSHOT_FILE.into());
    }
    match &outcome {
        Ok(t) => manifest.termination = t.as_str().into(),
        Err(e) => {
            manifest.termination = "error".into();
            manifest.error = Some(e.to_string());
        }
    }
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    atomic_write(&out.join(MANIFEST_FILE), &manifest.render())?;
    log::info!(
        "run {} finished: {} after {} steps ({:.1} s)",
        manifest.fingerprint,
        manifest.termination,
        manifest.steps,
        manifest.wall_time_s
    );
    outcome.map(|_| manifest)
}

/// One row of a resolution study. The distance compares this resolution with
/// the previous one (convergence) or with the rotated run (rotation).
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub distance: Option<f64>,
    pub order: Option<f64>,
}

pub fn study_csv(rows: &[StudyRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut s = String::from("N,distance,order\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.n, opt(r.distance), opt(r.order));
    }
    s
}

/// Final snapshot of a run without writing any files.
fn final_snapshot(config: &RunConfig) -> Result<Snapshot> {
    let mut params = config.params.clone();
    params.snapshot_every = 0;
    let n = params.n;
    let traj = flow::run(params)?;
    log::info!("N = {n}: {} at t = {}", traj.termination.as_str(), traj.final_state.time);
    Ok(traj.snapshots.last().cloned().expect("run keeps a final snapshot"))
}

/// Runs every configuration on its own thread.
fn run_all(configs: &[RunConfig]) -> Result<Vec<Snapshot>> {
    thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || final_snapshot(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InvalidArgument("simulation thread panicked".into()))))
            .collect()
    })
}

fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() || n_list.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(format!("resolution list {n_list:?} must hold values >= 2")));
    }
    Ok(())
}

fn add_orders(rows: &mut [StudyRow], ratios: &[f64]) {
    for k in 1..rows.len() {
        if let (Some(a), Some(b)) = (rows[k - 1].distance, rows[k].distance) {
            rows[k].order = richardson_order(a, b, ratios[k]).ok();
        }
    }
}

/// Distance between the final `‖C‖` fields of consecutive resolutions, on the
/// coarser lattice, restricted to nodes active in both runs.
pub fn compare_resolutions(coarse: &Snapshot, fine: &Snapshot, p: f64) -> Result<f64> {
    let fine = fine.restrict_to_lattice(coarse.n)?;
    let (cv, fv) = (coarse.conductivity_norm()?, fine.conductivity_norm()?);
    let index = fine.lattice_index();
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for (k, nd) in coarse.nodes.iter().enumerate() {
        if let Some(&m) = index.get(&(nd.i, nd.j)) {
            u.push(cv[k]);
            v.push(fv[m]);
        }
    }
    wasserstein_distance(&u, &v, p)
}

/// Convergence study over `n_list` (each with `Δt = h`). Writes
/// `converge.csv` under the output directory.
pub fn cmd_converge(config: &RunConfig, n_list: &[usize], p: f64) -> Result<Vec<StudyRow>> {
    check_n_list(n_list)?;
    let configs: Vec<RunConfig> = n_list.iter().map(|&n| config.at_resolution(n)).collect();
    let snaps = run_all(&configs)?;
    let mut rows = vec![StudyRow {
        n: n_list[0],
        distance: None,
        order: None,
    }];
    let mut ratios = vec![1.0];
    for k in 1..n_list.len() {
        rows.push(StudyRow {
            n: n_list[k],
            distance: Some(compare_resolutions(&snaps[k - 1], &snaps[k], p)?),
            order: None,
        });
        ratios.push(n_list[k] as f64 / n_list[k - 1] as f64);
    }
    add_orders(&mut rows, &ratios);
    atomic_write(&config.out_dir.join("converge.csv"), &study_csv(&rows))?;
    Ok(rows)
}

/// Distance between the unrotated leaf field and the rotated leaf field pulled
/// back through the rotation, sampled at the unrotated active nodes.
pub fn compare_rotated(leaf: &Snapshot, rotated: &Snapshot, theta: f64, p: f64) -> Result<f64> {
    let (lv, rv) = (leaf.conductivity_norm()?, rotated.conductivity_norm()?);
    let index = rotated.lattice_index();
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for (k, nd) in leaf.nodes.iter().enumerate() {
        if let Some(val) = interpolate_at(rotated, &index, &rv, rotate_about_center([nd.x, nd.y], theta)) {
            u.push(lv[k]);
            v.push(val);
        }
    }
    wasserstein_distance(&u, &v, p)
}

/// Rotation study: leaf against the leaf rotated by `theta`, per resolution.
/// Writes `rotate.csv` under the output directory.
pub fn cmd_rotate(config: &RunConfig, theta: f64, n_list: &[usize], p: f64) -> Result<Vec<StudyRow>> {
    check_n_list(n_list)?;
    let mut base = config.clone();
    base.theta = theta;
    let mut configs = Vec::new();
    for &n in n_list {
        configs.push(base.on_domain(DomainKind::Leaf).at_resolution(n));
        configs.push(base.on_domain(DomainKind::RotatedLeaf).at_resolution(n));
    }
    let snaps = run_all(&configs)?;
    let mut rows = Vec::new();
    let mut ratios = vec![1.0];
    for (k, &n) in n_list.iter().enumerate() {
        rows.push(StudyRow {
            n,
            distance: Some(compare_rotated(&snaps[2 * k], &snaps[2 * k + 1], theta, p)?),
            order: None,
        });
        if k > 0 {
            ratios.push(n as f64 / n_list[k - 1] as f64);
        }
    }
    add_orders(&mut rows, &ratios);
    atomic_write(&config.out_dir.join("rotate.csv"), &study_csv(&rows))?;
    Ok(rows)
}

/// Field compared by `cmd_distance`: the scalar conductivity, the tensor
/// norm, or else the last column.
pub fn comparison_field(snapshot: &Snapshot) -> Result<Vec<f64>> {
    if let Some(c) = snapshot.column("C") {
        return Ok(c.to_vec());
    }
    if snapshot.is_tensor() {
        return snapshot.conductivity_norm();
    }
    snapshot
        .columns
        .last()
        .cloned()
        .ok_or_else(|| Error::InvalidArgument("snapshot has no value columns".into()))
}

pub fn cmd_distance(file_a: &Path, file_b: &Path, p: f64) -> Result<f64> {
    let a = comparison_field(&read_snapshot(file_a)?)?;
    let b = comparison_field(&read_snapshot(file_b)?)?;
    wasserstein_distance(&a, &b, p)
}

pub fn cmd_order(e1: f64, e2: f64, ratio: f64) -> Result<f64> {
    richardson_order(e1, e2, ratio)
}

/// Parses a comma-separated resolution list such as `100,200`.
pub fn parse_n_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("`{t}` in --n-list is not a positive integer")))
        })
        .collect()
}

/// Parses an angle in radians; `pi`, `pi/k` and `k*pi` forms are accepted.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let bad = || Error::InvalidArgument(format!("`{s}` is not an angle"));
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
    let pi = std::f64::consts::PI;
    if t == "pi" {
        Ok(pi)
    } else if let Some(d) = t.strip_prefix("pi/") {
        Ok(pi / num(d)?)
    } else if let Some(m) = t.strip_suffix("*pi") {
        Ok(num(m)? * pi)
    } else {
        num(&t)
    }
}

/// Output directory override from the command line.
pub fn with_out_dir(mut config: RunConfig, out: Option<PathBuf>) -> RunConfig {
    if let Some(dir) = out {
        config.out_dir = dir;
    }
    config
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli_io::output::read_energy;
    use crate::cli_io::parse_config_str;
    use std::fs;

    fn small_config(dir: &Path, extra: &str) -> RunConfig {
        let text = format!("domain = circle\nN = 16\nT = 0.25\nsnapshot_every = 2\nout_dir = {}\n{extra}", dir.display());
        parse_config_str(&text, "test").unwrap()
    }

    #[test]
    fn run_writes_every_referenced_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path(), "");
        let m = cmd_run(&cfg).unwrap();
        assert_eq!(m.termination, "T reached");
        assert_eq!(m.steps, 4);
        let energy = read_energy(&dir.path().join(&m.energy_file)).unwrap();
        assert_eq!(energy.len(), 5);
        assert_eq!(m.snapshot_files.len(), 3);
        for f in m.snapshot_files.iter().chain(m.final_snapshot.iter()) {
            let s = read_snapshot(&dir.path().join(f)).unwrap();
            assert_eq!(s.n, 16);
            assert_eq!(s.labels, ["p", "sigma", "C"]);
        }
        let manifest = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(RunManifest::parse(&manifest, Path::new("m")).unwrap().steps, 4);
    }

    #[test]
    fn run_failure_is_flagged_in_manifest() {
        let dir = tempfile::tempdir().unwrap();
        // A Fisher generator leaves its domain when the pressure drops below -1.
        let mut cfg = small_config(dir.path(), "entropy = fisher\n");
        cfg.params.source_strength = 1e6;
        let err = cmd_run(&cfg).unwrap_err();
        let m = RunManifest::parse(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap(), Path::new("m")).unwrap();
        assert_eq!(m.termination, "error");
        assert_eq!(m.error.as_deref(), Some(err.to_string().as_str()));
        assert!(dir.path().join(ENERGY_FILE).exists());
    }

    #[test]
    fn distance_of_identical_and_shifted_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path(), "");
        cmd_run(&cfg).unwrap();
        let a = dir.path().join(FINAL_SNAPSHOT_FILE);
        assert_eq!(cmd_distance(&a, &a, 1.0).unwrap(), 0.0);
        let mut s = read_snapshot(&a).unwrap();
        let k = s.labels.iter().position(|l| l == "C").unwrap();
        for v in &mut s.columns[k] {
            *v += 0.25;
        }
        let b = dir.path().join("shifted.csv");
        write_snapshot(&b, &s).unwrap();
        assert!((cmd_distance(&a, &b, 1.0).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn order_and_argument_parsing() {
        let q = cmd_order(7.3178e-4, 3.1681e-4, 2.0).unwrap();
        assert!((q - 1.2078).abs() < 1e-3);
        assert_eq!(parse_n_list("50, 100,200").unwrap(), [50, 100, 200]);
        assert!(parse_n_list("50,x").is_err());
        assert_eq!(parse_angle("pi/4").unwrap(), std::f64::consts::FRAC_PI_4);
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert_eq!(parse_angle("2*pi").unwrap(), 2.0 * std::f64::consts::PI);
        assert!(parse_angle("quarter").is_err());
    }

    #[test]
    fn small_studies_write_tables() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path(), "");
        cfg.params.t_final = 0.1;
        let rows = cmd_converge(&cfg, &[8, 16, 32], 1.0).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].distance.is_none() && rows[1].distance.unwrap() >= 0.0);
        let text = fs::read_to_string(dir.path().join("converge.csv")).unwrap();
        assert!(text.starts_with("N,distance,order\n8,,\n16,"));
        let rows = cmd_rotate(&cfg, 0.0, &[8], 1.0).unwrap();
        // Zero rotation maps each node onto itself.
        assert!(rows[0].distance.unwrap() < 1e-14);
        assert!(dir.path().join("rotate.csv").exists());
    }
}
