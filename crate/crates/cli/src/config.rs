//! Flat `key = value` run configuration. Blank lines and `#` comments are ignored; keys use
//! snake_case and the matching command-line flags use kebab-case.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use shapediff::optimize::{InnerProduct, OptConfig};
use shapediff::shapecalc::Regularization;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("no scenario given")]
    MissingScenario,
    #[error("unknown scenario `{0}` (expected taylor, clover, ellipse-newton, poisson or spacetime-heat)")]
    UnknownScenario(String),
    #[error("{0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Taylor,
    Clover,
    EllipseNewton,
    Poisson,
    SpacetimeHeat,
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "taylor" => Self::Taylor,
            "clover" => Self::Clover,
            "ellipse-newton" => Self::EllipseNewton,
            "poisson" => Self::Poisson,
            "spacetime-heat" => Self::SpacetimeHeat,
            _ => return Err(ConfigError::UnknownScenario(s.to_string())),
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Taylor => "taylor",
            Self::Clover => "clover",
            Self::EllipseNewton => "ellipse-newton",
            Self::Poisson => "poisson",
            Self::SpacetimeHeat => "spacetime-heat",
        })
    }
}

/// Functional used by the Taylor scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaylorProblem {
    VolumeBoundary,
    Poisson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub maxh: f64,
    pub order: usize,
    pub ip: InnerProduct,
    pub gamma_cr: f64,
    /// `tangential` or `h1`
    pub regularization: String,
    pub delta: f64,
    pub ellipse_a: f64,
    pub taylor_problem: TaylorProblem,
    pub opt: OptConfig,
    /// write a VTK snapshot every this many accepted steps; 0 keeps only the first and last
    pub snapshot_every: usize,
    /// 0 uses all cores
    pub threads: usize,
    pub out: PathBuf,
}

/// Every accepted key, in the order used for the summary.
pub const KEYS: [&str; 21] = [
    "scenario",
    "maxh",
    "order",
    "ip",
    "gamma_cr",
    "regularization",
    "delta",
    "ellipse_a",
    "taylor_problem",
    "max_iter",
    "eps_grad",
    "alpha0",
    "alpha_incr",
    "alpha_decr",
    "gamma",
    "alpha_max",
    "move_nodes",
    "smooth_sweeps",
    "snapshot_every",
    "threads",
    "out",
];

/// Splits a configuration file into key/value pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
        }
        out.push((k.replace('-', "_"), v.to_string()));
    }
    Ok(out)
}

fn value<T: FromStr>(key: &str, v: &str, expected: &'static str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: v.into(), expected })
}

fn flag(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), value: v.into(), expected: "a boolean" }),
    }
}

impl RunConfig {
    /// Builds a configuration from pairs applied in order, so later pairs override earlier
    /// ones. Defaults depend on the scenario.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        for (k, _) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(k.clone()));
            }
        }
        let scenario: Scenario = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "scenario")
            .ok_or(ConfigError::MissingScenario)?
            .1
            .parse()?;
        let mut cfg = Self::defaults(scenario);
        let mut ip_name = cfg.ip.name().to_string();
        let mut delta = None;
        for (k, v) in pairs {
            let v = v.as_str();
            match k.as_str() {
                "scenario" => {}
                "maxh" => cfg.maxh = value(k, v, "a number")?,
                "order" => cfg.order = value(k, v, "an integer")?,
                "ip" => ip_name = v.to_string(),
                "gamma_cr" => cfg.gamma_cr = value(k, v, "a number")?,
                "regularization" => cfg.regularization = v.to_string(),
                "delta" => delta = Some(value(k, v, "a number")?),
                "ellipse_a" => cfg.ellipse_a = value(k, v, "a number")?,
                "taylor_problem" => {
                    cfg.taylor_problem = match v {
                        "volume-boundary" => TaylorProblem::VolumeBoundary,
                        "poisson" => TaylorProblem::Poisson,
                        _ => return Err(ConfigError::BadValue { key: k.clone(), value: v.into(), expected: "volume-boundary or poisson" }),
                    }
                }
                "max_iter" => cfg.opt.max_iter = value(k, v, "an integer")?,
                "eps_grad" => cfg.opt.eps_grad = value(k, v, "a number")?,
                "alpha0" => cfg.opt.alpha0 = value(k, v, "a number")?,
                "alpha_incr" => cfg.opt.alpha_incr = value(k, v, "a number")?,
                "alpha_decr" => cfg.opt.alpha_decr = value(k, v, "a number")?,
                "gamma" => cfg.opt.gamma = value(k, v, "a number")?,
                "alpha_max" => cfg.opt.alpha_max = value(k, v, "a number")?,
                "move_nodes" => cfg.opt.move_nodes = flag(k, v)?,
                "smooth_sweeps" => cfg.opt.smooth_sweeps = value(k, v, "an integer")?,
                "snapshot_every" => cfg.snapshot_every = value(k, v, "an integer")?,
                "threads" => cfg.threads = value(k, v, "an integer")?,
                "out" => cfg.out = PathBuf::from(v),
                _ => unreachable!("keys checked above"),
            }
        }
        cfg.ip = InnerProduct::parse(&ip_name, cfg.gamma_cr)
            .ok_or_else(|| ConfigError::BadValue { key: "ip".into(), value: ip_name.clone(), expected: "h1, ela or elacr" })?;
        cfg.delta = match (delta, cfg.regularization.as_str()) {
            (Some(d), _) => d,
            (None, "h1") => 0.5,
            (None, _) => 100.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn defaults(scenario: Scenario) -> Self {
        let max_iter = match scenario {
            Scenario::Taylor => 0,
            Scenario::Clover => 120,
            Scenario::EllipseNewton => 10,
            Scenario::Poisson => 300,
            Scenario::SpacetimeHeat => 400,
        };
        Self {
            scenario,
            maxh: 0.05,
            order: 1,
            ip: if scenario == Scenario::Clover { InnerProduct::ElasticityCr(10.0) } else { InnerProduct::H1 },
            gamma_cr: 10.0,
            regularization: "tangential".into(),
            delta: 100.0,
            ellipse_a: 1.3,
            taylor_problem: TaylorProblem::VolumeBoundary,
            opt: OptConfig { max_iter, ..OptConfig::default() },
            snapshot_every: 10,
            threads: 0,
            out: PathBuf::from("out"),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if !(self.maxh > 0.0 && self.maxh <= 1.0) {
            return bad("maxh must lie in (0, 1]");
        }
        if !matches!(self.order, 1 | 2) {
            return bad("order must be 1 or 2");
        }
        if self.scenario == Scenario::SpacetimeHeat && self.order != 1 {
            return bad("the space-time scenario supports order 1 only");
        }
        if self.gamma_cr < 0.0 {
            return bad("gamma_cr must be nonnegative");
        }
        if !matches!(self.regularization.as_str(), "tangential" | "h1") {
            return bad("regularization must be tangential or h1");
        }
        if self.delta <= 0.0 {
            return bad("delta must be positive");
        }
        if self.ellipse_a <= 0.0 {
            return bad("ellipse_a must be positive");
        }
        self.opt.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn regularization(&self) -> Regularization {
        match self.regularization.as_str() {
            "h1" => Regularization::H1(self.delta),
            _ => Regularization::BoundaryTangential(self.delta),
        }
    }

    /// Resolved value of every key, defaults included.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let o = &self.opt;
        let vals = [
            self.scenario.to_string(),
            self.maxh.to_string(),
            self.order.to_string(),
            self.ip.name().to_string(),
            self.gamma_cr.to_string(),
            self.regularization.clone(),
            self.delta.to_string(),
            self.ellipse_a.to_string(),
            match self.taylor_problem {
                TaylorProblem::VolumeBoundary => "volume-boundary".into(),
                TaylorProblem::Poisson => "poisson".into(),
            },
            o.max_iter.to_string(),
            o.eps_grad.to_string(),
            o.alpha0.to_string(),
            o.alpha_incr.to_string(),
            o.alpha_decr.to_string(),
            o.gamma.to_string(),
            o.alpha_max.to_string(),
            o.move_nodes.to_string(),
            o.smooth_sweeps.to_string(),
            self.snapshot_every.to_string(),
            self.threads.to_string(),
            self.out.display().to_string(),
        ];
        KEYS.into_iter().zip(vals).collect()
    }
}
