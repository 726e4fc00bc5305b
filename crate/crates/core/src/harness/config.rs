use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::RunConfig;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::problems::ProblemName;

/// Run settings read from a `key = value` text file.
///
/// Blank lines and `#` comments are ignored. Keys mirror the command-line
/// flags:
///
/// ```text
/// problem = plate2d-patch
/// loss = collocation
/// seed = 3
/// max_iter = 2000
/// hidden = 20,20,20
/// out = runs/plate
/// threads = 1
/// resolution = 26
/// shared_network = false
/// log_every = 10
/// grad_tol = 1e-8
/// rel_loss_tol = 1e-12
/// ```
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub problem: Option<ProblemName>,
    pub loss: Option<LossKind>,
    pub seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub out: Option<PathBuf>,
    pub hidden: Option<Vec<usize>>,
    pub threads: Option<usize>,
    pub resolution: Option<usize>,
    pub shared_network: Option<bool>,
    pub log_every: Option<usize>,
    pub grad_tol: Option<f64>,
    pub rel_loss_tol: Option<f64>,
}

fn value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::parse(line, format!("bad value `{v}` for `{key}`")))
}

/// Parses `20,20,20` into layer widths.
pub fn parse_hidden(v: &str) -> Option<Vec<usize>> {
    v.split(',').map(|w| w.trim().parse().ok()).collect()
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, v) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, v) = (key.trim(), v.trim());
            match key {
                "problem" => cfg.problem = Some(v.parse()?),
                "loss" => cfg.loss = Some(v.parse()?),
                "seed" => cfg.seed = Some(value(line, key, v)?),
                "max_iter" => cfg.max_iter = Some(value(line, key, v)?),
                "out" => cfg.out = Some(PathBuf::from(v)),
                "hidden" => {
                    cfg.hidden =
                        Some(parse_hidden(v).ok_or_else(|| Error::parse(line, format!("bad layer list `{v}`")))?)
                }
                "threads" => cfg.threads = Some(value(line, key, v)?),
                "resolution" => cfg.resolution = Some(value(line, key, v)?),
                "shared_network" => cfg.shared_network = Some(value(line, key, v)?),
                "log_every" => cfg.log_every = Some(value(line, key, v)?),
                "grad_tol" => cfg.grad_tol = Some(value(line, key, v)?),
                "rel_loss_tol" => cfg.rel_loss_tol = Some(value(line, key, v)?),
                other => return Err(Error::parse(line, format!("unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: ConfigFile) -> ConfigFile {
        ConfigFile {
            problem: other.problem.or(self.problem),
            loss: other.loss.or(self.loss),
            seed: other.seed.or(self.seed),
            max_iter: other.max_iter.or(self.max_iter),
            out: other.out.or(self.out),
            hidden: other.hidden.or(self.hidden),
            threads: other.threads.or(self.threads),
            resolution: other.resolution.or(self.resolution),
            shared_network: other.shared_network.or(self.shared_network),
            log_every: other.log_every.or(self.log_every),
            grad_tol: other.grad_tol.or(self.grad_tol),
            rel_loss_tol: other.rel_loss_tol.or(self.rel_loss_tol),
        }
    }

    /// A full run configuration; `problem` and `loss` are required.
    pub fn to_run_config(&self) -> Result<RunConfig> {
        let problem = self
            .problem
            .ok_or_else(|| Error::InvalidConfig("no problem given".into()))?;
        let loss = self
            .loss
            .ok_or_else(|| Error::InvalidConfig("no loss given".into()))?;
        let mut cfg = RunConfig::new(problem, loss);
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.max_iter {
            cfg.optimizer.max_iterations = n;
        }
        if let Some(n) = self.log_every {
            cfg.optimizer.log_every = n;
        }
        if let Some(t) = self.grad_tol {
            cfg.optimizer.grad_tol = t;
        }
        if let Some(t) = self.rel_loss_tol {
            cfg.optimizer.rel_loss_tol = t;
        }
        if let Some(n) = self.threads {
            cfg.threads = n;
        }
        cfg.output_dir = self.out.clone();
        cfg.hidden_layers = self.hidden.clone();
        cfg.points_per_axis = self.resolution;
        cfg.shared_network = self.shared_network.unwrap_or(false);
        cfg.validate()?;
        Ok(cfg)
    }
}
