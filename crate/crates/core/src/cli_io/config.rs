//! Flat `key = value` run configuration.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::CoefficientSampling;
use crate::flow::{default_source, EntropyGenerator, SimParams};
use crate::geometry::LevelSet;

/// Version of the configuration and output schemas.
pub const SCHEMA_VERSION: u32 = 1;

/// Accepted keys, in serialization order.
pub const CONFIG_KEYS: [&str; 22] = [
    "domain",
    "N",
    "D_tilde",
    "nu_tilde",
    "gamma",
    "epsilon",
    "r",
    "omega",
    "source_x",
    "source_y",
    "T",
    "dt",
    "C0",
    "entropy",
    "tensor_mode",
    "theta",
    "zeta",
    "alpha",
    "snapshot_every",
    "out_dir",
    "coeff_sampling",
    "solver_tol",
];

/// Default rotation angle for the rotated leaf and the rotation study.
pub const DEFAULT_THETA: f64 = FRAC_PI_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Circle,
    Leaf,
    RotatedLeaf,
}

impl DomainKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "circle" => Some(DomainKind::Circle),
            "leaf" => Some(DomainKind::Leaf),
            "rotated_leaf" => Some(DomainKind::RotatedLeaf),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Circle => "circle",
            DomainKind::Leaf => "leaf",
            DomainKind::RotatedLeaf => "rotated_leaf",
        }
    }

    pub fn level_set(self, theta: f64) -> LevelSet {
        match self {
            DomainKind::Circle => LevelSet::standard_circle(),
            DomainKind::Leaf => LevelSet::standard_leaf(),
            DomainKind::RotatedLeaf => LevelSet::standard_rotated_leaf(theta),
        }
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainKind,
    /// Rotation angle; shapes the domain only for `rotated_leaf`.
    pub theta: f64,
    pub params: SimParams,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Reference parameters for a domain kind.
    pub fn defaults(domain: DomainKind) -> Self {
        RunConfig {
            domain,
            theta: DEFAULT_THETA,
            params: SimParams::reference(domain.level_set(DEFAULT_THETA)),
            out_dir: PathBuf::from("out"),
        }
    }

    /// Same configuration on another domain, with that domain's default
    /// source center.
    pub fn on_domain(&self, domain: DomainKind) -> Self {
        let mut c = self.clone();
        c.domain = domain;
        c.params.domain = domain.level_set(self.theta);
        c.params.source = default_source(&c.params.domain);
        c
    }

    /// Same configuration at resolution `n` with `Δt = h`.
    pub fn at_resolution(&self, n: usize) -> Self {
        let mut c = self.clone();
        c.params = c.params.with_resolution(n);
        c
    }

    /// Renders every key in canonical order; floats are written in their
    /// shortest round-trip form.
    pub fn serialize(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("domain", self.domain.as_str().into());
        kv("N", p.n.to_string());
        kv("D_tilde", fmt_f64(p.d_tilde));
        kv("nu_tilde", fmt_f64(p.nu_tilde));
        kv("gamma", fmt_f64(p.gamma));
        kv("epsilon", fmt_f64(p.epsilon));
        kv("r", fmt_f64(p.r));
        kv("omega", fmt_f64(p.omega));
        kv("source_x", fmt_f64(p.source[0]));
        kv("source_y", fmt_f64(p.source[1]));
        kv("T", fmt_f64(p.t_final));
        kv("dt", fmt_f64(p.dt));
        kv("C0", fmt_f64(p.c0));
        kv("entropy", p.entropy.name().into());
        kv("tensor_mode", p.tensor_mode.to_string());
        kv("theta", fmt_f64(self.theta));
        kv("zeta", fmt_f64(p.zeta));
        kv("alpha", fmt_f64(p.alpha));
        kv("snapshot_every", p.snapshot_every.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("coeff_sampling", p.coeff_sampling.as_str().into());
        kv("solver_tol", fmt_f64(p.solver_tol));
        s
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
/// Returns `(key, value, line)` triples.
pub fn parse_key_values(text: &str, origin: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_error(origin, line, format!("expected `key = value`, found `{content}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(config_error(origin, line, "missing key before `=`".into()));
        }
        if let Some(prev) = out.iter().find(|e| e.0 == key) {
            return Err(config_error(origin, line, format!("key `{key}` already set on line {}", prev.2)));
        }
        out.push((key.to_string(), value.to_string(), line));
    }
    Ok(out)
}

fn config_error(origin: &str, line: usize, message: String) -> Error {
    Error::Config {
        path: origin.to_string(),
        line,
        message,
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| config_error(&origin, 0, format!("cannot read configuration: {e}")))?;
    parse_config_str(&text, &origin)
}

/// Parses configuration text; `origin` names the source in error messages.
pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfig> {
    let entries = parse_key_values(text, origin)?;
    for (key, _, line) in &entries {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(config_error(origin, *line, format!("unknown key `{key}`")));
        }
    }
    let map: HashMap<&str, (&str, usize)> = entries.iter().map(|(k, v, l)| (k.as_str(), (v.as_str(), *l))).collect();
    let get = |k: &str| map.get(k).copied();
    let err = |key: &str, line: usize, msg: String| config_error(origin, line, format!("{key}: {msg}"));

    let real = |key: &str, default: f64, check: fn(f64) -> bool, rule: &str| -> Result<f64> {
        match get(key) {
            None => Ok(default),
            Some((v, line)) => {
                let x: f64 = v.parse().map_err(|_| err(key, line, format!("`{v}` is not a number")))?;
                if !x.is_finite() || !check(x) {
                    return Err(err(key, line, format!("{x} is out of range ({rule})")));
                }
                Ok(x)
            }
        }
    };
    let positive = |x: f64| x > 0.0;
    let nonneg = |x: f64| x >= 0.0;
    let any = |_: f64| true;

    let domain = match get("domain") {
        None => DomainKind::Circle,
        Some((v, line)) => DomainKind::parse(v)
            .ok_or_else(|| err("domain", line, format!("unknown domain `{v}` (circle, leaf, rotated_leaf)")))?,
    };
    let theta = real("theta", DEFAULT_THETA, any, "finite")?;
    let mut c = RunConfig::defaults(domain);
    c.theta = theta;
    c.params.domain = domain.level_set(theta);
    let source = default_source(&c.params.domain);

    let p = &mut c.params;
    if let Some((v, line)) = get("N") {
        let n: usize = v.parse().map_err(|_| err("N", line, format!("`{v}` is not a positive integer")))?;
        if n < 2 {
            return Err(err("N", line, format!("{n} is out of range (N >= 2)")));
        }
        p.n = n;
    }
    p.d_tilde = real("D_tilde", p.d_tilde, nonneg, ">= 0")?;
    p.nu_tilde = real("nu_tilde", p.nu_tilde, nonneg, ">= 0")?;
    p.gamma = real("gamma", p.gamma, |g| g > 0.0 && g < 2.0, "0 < gamma < 2")?;
    p.epsilon = real("epsilon", p.epsilon, positive, "> 0")?;
    p.r = real("r", p.r, nonneg, ">= 0")?;
    p.omega = real("omega", p.omega, nonneg, ">= 0")?;
    p.source = [
        real("source_x", source[0], any, "finite")?,
        real("source_y", source[1], any, "finite")?,
    ];
    p.t_final = real("T", p.t_final, nonneg, ">= 0")?;
    p.dt = real("dt", 1.0 / p.n as f64, positive, "> 0")?;
    p.c0 = real("C0", p.c0, positive, "> 0")?;
    if let Some((v, line)) = get("entropy") {
        p.entropy = EntropyGenerator::parse(v)
            .ok_or_else(|| err("entropy", line, format!("unknown generator `{v}` (quartic, fisher, mixed, quadratic)")))?;
    }
    if let Some((v, line)) = get("tensor_mode") {
        p.tensor_mode = v
            .parse()
            .map_err(|_| err("tensor_mode", line, format!("`{v}` is not true or false")))?;
    }
    p.zeta = real("zeta", p.zeta, positive, "> 0")?;
    p.alpha = real("alpha", p.alpha, positive, "> 0")?;
    if let Some((v, line)) = get("snapshot_every") {
        p.snapshot_every = v
            .parse()
            .map_err(|_| err("snapshot_every", line, format!("`{v}` is not a non-negative integer")))?;
    }
    if let Some((v, line)) = get("coeff_sampling") {
        p.coeff_sampling = CoefficientSampling::parse(v)
            .ok_or_else(|| err("coeff_sampling", line, format!("unknown mode `{v}` (centroid, nodal-q5)")))?;
    }
    p.solver_tol = real("solver_tol", p.solver_tol, |t| t > 0.0 && t < 1.0, "0 < tol < 1")?;
    if let Some((v, line)) = get("out_dir") {
        if v.is_empty() {
            return Err(err("out_dir", line, "empty path".into()));
        }
        c.out_dir = PathBuf::from(v);
    }
    c.params.validate().map_err(|e| config_error(origin, 0, e.to_string()))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_circle_file_gives_reference_defaults() {
        let c = parse_config_str("domain = circle\n", "t").unwrap();
        let p = &c.params;
        assert_eq!(p.d_tilde, 4e-6);
        assert_eq!(p.nu_tilde, 4e-2);
        assert_eq!(p.epsilon, 1e-4);
        assert_eq!(p.gamma, 0.75);
        assert_eq!(p.r, 5e-3);
        assert_eq!(p.omega, 500.0);
        assert_eq!(p.t_final, 400.0);
        assert_eq!(p.dt, p.h());
        assert_eq!(p.source, [0.5, 0.5]);
        let leaf = parse_config_str("domain = leaf\nN = 50\n", "t").unwrap();
        assert_eq!(leaf.params.source, [0.5, 0.2]);
        assert_eq!(leaf.params.dt, 1.0 / 50.0);
    }

    #[test]
    fn errors_name_key_and_line() {
        let e = parse_config_str("domain = circle\n\ngamma = 2.5\n", "cfg").unwrap_err();
        match e {
            Error::Config { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("gamma"));
            }
            other => panic!("{other:?}"),
        }
        let e = parse_config_str("colour = blue\n", "cfg").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, ref message, .. } if message.contains("colour")));
        let e = parse_config_str("domain = square\n", "cfg").unwrap_err();
        assert!(e.is_config());
        assert!(parse_config_str("N = 10\nN = 20\n", "cfg").is_err());
        assert!(parse_config_str("gamma = 2\n", "cfg").is_err());
        assert!(parse_config(Path::new("/nonexistent/config.txt")).unwrap_err().is_config());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = parse_config_str("# run\n\nN = 20  # coarse\nentropy = fisher\ntensor_mode = true\n", "t").unwrap();
        assert_eq!(c.params.n, 20);
        assert_eq!(c.params.entropy, EntropyGenerator::Fisher);
        assert!(c.params.tensor_mode);
    }

    fn config_strategy() -> impl Strategy<Value = RunConfig> {
        (
            (0usize..3, 2usize..400, 0.0f64..1e-3, 0.0f64..1.0, 0.01f64..1.99, 1e-8f64..1.0),
            (0.0f64..0.1, 0.0f64..1000.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..500.0, 1e-4f64..0.1),
            (0.1f64..3.0, 0usize..4, any::<bool>(), -3.0f64..3.0, 0.1f64..5.0, 0.5f64..3.0),
            (0usize..1000, any::<bool>(), 1e-14f64..1e-3, "[a-z][a-z0-9_/]{0,12}"),
        )
            .prop_map(|(a, b, c, d)| {
                let domain = [DomainKind::Circle, DomainKind::Leaf, DomainKind::RotatedLeaf][a.0];
                let mut cfg = RunConfig::defaults(domain);
                cfg.theta = c.3;
                let p = &mut cfg.params;
                p.domain = domain.level_set(c.3);
                p.n = a.1;
                p.d_tilde = a.2;
                p.nu_tilde = a.3;
                p.gamma = a.4;
                p.epsilon = a.5;
                p.r = b.0;
                p.omega = b.1;
                p.source = [b.2, b.3];
                p.t_final = b.4;
                p.dt = b.5;
                p.c0 = c.0;
                p.entropy = [
                    EntropyGenerator::Quartic,
                    EntropyGenerator::Fisher,
                    EntropyGenerator::MIXED,
                    EntropyGenerator::Quadratic,
                ][c.1];
                p.tensor_mode = c.2;
                p.zeta = c.4;
                p.alpha = c.5;
                p.snapshot_every = d.0;
                p.coeff_sampling = if d.1 { CoefficientSampling::NodalQ5 } else { CoefficientSampling::Centroid };
                p.solver_tol = d.2;
                cfg.out_dir = PathBuf::from(d.3);
                cfg
            })
    }

    proptest! {
        #[test]
        fn serialization_round_trips(cfg in config_strategy()) {
            let text = cfg.serialize();
            let back = parse_config_str(&text, "roundtrip").unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
