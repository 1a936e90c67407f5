use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::potentials::{PhysParams, Viscosity};
use crate::schemes::{Params, Scheme};

use super::initial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    /// Cosine pattern used for the accuracy study.
    Example1,
    /// Two touching droplets.
    Merging,
    /// Two separated droplets of different size.
    Coarsening,
    /// Droplets in a prescribed rotating flow.
    Rotating,
    /// Random perturbation of the mixed state (uses `seed`).
    Custom,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Example1 => "example1",
            Experiment::Merging => "merging",
            Experiment::Coarsening => "coarsening",
            Experiment::Rotating => "rotating",
            Experiment::Custom => "custom",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "example1" => Ok(Experiment::Example1),
            "merging" => Ok(Experiment::Merging),
            "coarsening" => Ok(Experiment::Coarsening),
            "rotating" => Ok(Experiment::Rotating),
            "custom" => Ok(Experiment::Custom),
            other => Err(Error::invalid(format!("unknown experiment '{other}'"))),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    /// Subdivisions per side of the unit square.
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub phys: PhysParams,
    pub tol: f64,
    pub max_iters: usize,
    pub lin_tol: f64,
    pub experiment: Experiment,
    /// Output directory; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    /// Write a CSV row and a VTK snapshot every `cadence` steps.
    pub cadence: usize,
    pub seed: u64,
    /// Droplet pair used as the initial phase of the rotating experiment.
    pub rotating_phase: Experiment,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = Params::default();
        RunConfig {
            scheme: Scheme::Geps,
            n: 32,
            dt: p.dt,
            t_end: 1e-2,
            phys: p.phys,
            tol: p.tol,
            max_iters: p.max_iters,
            lin_tol: p.lin_tol,
            experiment: Experiment::Example1,
            out_dir: None,
            cadence: 1,
            seed: 0,
            rotating_phase: Experiment::Coarsening,
        }
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config { line, message: format!("invalid value '{v}' for '{key}'") })
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config { line, message: format!("expected 'key = value', got '{content}'") })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config { line, message: format!("duplicate key '{key}'") });
            }
            let wrap = |e: Error| match e {
                Error::InvalidArgument(m) => Error::Config { line, message: m },
                other => other,
            };
            match key {
                "scheme" => cfg.scheme = value.parse().map_err(wrap)?,
                "n" => cfg.n = parse_num(line, key, value)?,
                "dt" => cfg.dt = parse_num(line, key, value)?,
                "t_end" => cfg.t_end = parse_num(line, key, value)?,
                "eps" => cfg.phys.eps = parse_num(line, key, value)?,
                "eta" => cfg.phys.eta = parse_num(line, key, value)?,
                "lambda" => cfg.phys.lambda = parse_num(line, key, value)?,
                "gamma" => cfg.phys.gamma = parse_num(line, key, value)?,
                "nu" => {
                    cfg.phys.viscosity = match value.split_once(',') {
                        Some((a, b)) => Viscosity::TwoPhase {
                            nu0: parse_num(line, key, a.trim())?,
                            nu1: parse_num(line, key, b.trim())?,
                        },
                        None => Viscosity::Constant(parse_num(line, key, value)?),
                    }
                }
                "tol" => cfg.tol = parse_num(line, key, value)?,
                "max_iters" => cfg.max_iters = parse_num(line, key, value)?,
                "lin_tol" => cfg.lin_tol = parse_num(line, key, value)?,
                "experiment" => cfg.experiment = value.parse().map_err(wrap)?,
                "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
                "cadence" => cfg.cadence = parse_num(line, key, value)?,
                "seed" => cfg.seed = parse_num(line, key, value)?,
                "rotating_phase" => cfg.rotating_phase = value.parse().map_err(wrap)?,
                other => return Err(Error::Config { line, message: format!("unknown key '{other}'") }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if self.cadence == 0 {
            return Err(Error::invalid("cadence must be at least 1"));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::invalid("t_end must be nonnegative"));
        }
        if !matches!(self.rotating_phase, Experiment::Merging | Experiment::Coarsening) {
            return Err(Error::invalid("rotating_phase must be merging or coarsening"));
        }
        self.params().validate()?;
        self.num_steps().map(|_| ())
    }

    /// Number of uniform steps `t_end / dt`; must be an integer.
    pub fn num_steps(&self) -> Result<usize> {
        let k = (self.t_end / self.dt).round();
        if (k * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(Error::invalid(format!(
                "t_end = {} is not an integer multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(k as usize)
    }

    pub fn params(&self) -> Params {
        Params {
            phys: self.phys,
            dt: self.dt,
            tol: self.tol,
            max_iters: self.max_iters,
            scheme: self.scheme,
            lin_tol: self.lin_tol,
            boundary: match self.experiment {
                Experiment::Rotating => Some(std::sync::Arc::new(|x, _t| initial::rotating_velocity(x))),
                _ => None,
            },
        }
    }
}
