use std::path::{Path, PathBuf};

use hypctl::control::ChannelOptions;
use hypctl::stochastic::{DEFAULT_DEPTH, MAX_DEPTH};
use hypctl::system::{load_system, registry, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::args::{RunArgs, Target};

pub const DEFAULT_CELLS_1D: usize = 40;
pub const DEFAULT_CELLS_2D: usize = 8;
pub const DEFAULT_HORIZON: f64 = 1.5;
pub const DEFAULT_CFL: f64 = 0.9;
pub const DEFAULT_ITERS: usize = 80;
pub const DEFAULT_RAYS: usize = 20;

/// Run settings as read from a `--run` file; every key is optional and
/// unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<String>,
    pub config: Option<PathBuf>,
    pub cells: Option<Vec<usize>>,
    pub depth: Option<usize>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub cfl: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub lambdas: Option<Vec<f64>>,
    #[serde(rename = "T_list")]
    pub t_list: Option<Vec<f64>>,
    pub rays: Option<usize>,
    pub v_mask: Option<String>,
    pub boundary_only: Option<bool>,
    pub internal_only: Option<bool>,
    pub drop_b3: Option<bool>,
    pub target: Option<Target>,
}

/// Validated settings with defaults filled in.
#[derive(Debug, Clone)]
pub struct Run {
    pub spec: SystemSpec,
    /// Registry label or config path, as given.
    pub source: String,
    pub cells: Vec<usize>,
    pub depth: usize,
    pub horizon: f64,
    pub cfl: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub iters: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub lambdas: Vec<f64>,
    pub t_list: Vec<f64>,
    pub rays: usize,
    pub v_mask: Option<Vec<bool>>,
    pub boundary_only: bool,
    pub internal_only: bool,
    pub drop_b3: bool,
    pub target: Target,
}

/// Resolved run echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunEcho {
    pub source: String,
    pub label: String,
    pub cells: Vec<usize>,
    pub depth: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub cfl: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub iters: usize,
    pub seed: u64,
    pub out: String,
    pub lambdas: Vec<f64>,
    #[serde(rename = "T_list")]
    pub t_list: Vec<f64>,
    pub rays: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_mask: Option<String>,
    pub boundary_only: bool,
    pub internal_only: bool,
    pub drop_b3: bool,
    pub target: Target,
}

/// Config-stage failure; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(key: &str, detail: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("invalid `{key}`: {detail}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    /// Flags win over file values.
    pub fn overlay(mut self, a: &RunArgs) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(if a.$f.is_some() { self.$f = a.$f.clone(); })*};
        }
        take!(system, config, cells, depth, horizon, cfl, tol, max_iter, iters, seed, out, lambdas, t_list, rays, v_mask, target);
        if a.system.is_some() {
            self.config = None;
        }
        if a.config.is_some() {
            self.system = None;
        }
        for (flag, slot) in [
            (a.boundary_only, &mut self.boundary_only),
            (a.internal_only, &mut self.internal_only),
            (a.drop_b3, &mut self.drop_b3),
        ] {
            if flag {
                *slot = Some(true);
            }
        }
        self
    }

    pub fn resolve(self) -> Result<Run, ConfigError> {
        let (spec, source) = match (&self.system, &self.config) {
            (Some(_), Some(_)) => return Err(ConfigError("give either `system` or `config`, not both".into())),
            (Some(label), None) => (registry::by_label(label).map_err(|e| bad("system", e))?, label.clone()),
            (None, Some(path)) => (
                load_system(path).map_err(|e| ConfigError(e.to_string()))?,
                path.display().to_string(),
            ),
            (None, None) => return Err(ConfigError("one of `system` or `config` is required".into())),
        };
        let dim = spec.space_dim();
        let cells = match self.cells {
            None => vec![if dim == 1 { DEFAULT_CELLS_1D } else { DEFAULT_CELLS_2D }; dim],
            Some(c) if c.len() == 1 => vec![c[0]; dim],
            Some(c) if c.len() == dim => c,
            Some(c) => return Err(bad("cells", format!("{} values for a {dim}-dimensional domain", c.len()))),
        };
        if let Some(c) = cells.iter().find(|&&c| c < 4) {
            return Err(bad("cells", format!("{c} < 4")));
        }
        let depth = self.depth.unwrap_or(DEFAULT_DEPTH);
        if !(1..=MAX_DEPTH).contains(&depth) {
            return Err(bad("depth", format!("{depth} outside 1..={MAX_DEPTH}")));
        }
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(bad(key, format!("{v} is not a positive number")))
            }
        };
        let horizon = positive("T", self.horizon.unwrap_or(DEFAULT_HORIZON))?;
        let cfl = self.cfl.unwrap_or(DEFAULT_CFL);
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(bad("cfl", format!("{cfl} outside (0, 1]")));
        }
        let tol = positive("tol", self.tol.unwrap_or(hypctl::control::DEFAULT_TOL))?;
        let max_iter = self.max_iter.unwrap_or(hypctl::control::DEFAULT_MAX_ITER);
        if max_iter == 0 {
            return Err(bad("max_iter", "must be positive"));
        }
        let iters = self.iters.unwrap_or(DEFAULT_ITERS);
        if iters < hypctl::control::MIN_SPECTRUM_ITERS {
            return Err(bad("iters", format!("{iters} < {}", hypctl::control::MIN_SPECTRUM_ITERS)));
        }
        let lambdas = self.lambdas.unwrap_or_else(|| hypctl::carleman::DEFAULT_LAMBDAS.to_vec());
        if lambdas.is_empty() {
            return Err(bad("lambdas", "empty list"));
        }
        for l in &lambdas {
            positive("lambdas", *l)?;
        }
        let t_list = self.t_list.unwrap_or_else(|| vec![horizon]);
        if t_list.is_empty() {
            return Err(bad("T_list", "empty list"));
        }
        for t in &t_list {
            positive("T_list", *t)?;
        }
        let rays = self.rays.unwrap_or(DEFAULT_RAYS);
        if rays == 0 {
            return Err(bad("rays", "must be positive"));
        }
        let total: usize = cells.iter().product();
        let v_mask = match &self.v_mask {
            None => None,
            Some(s) => {
                let m: Vec<bool> = s
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(bad("v_mask", format!("unexpected character {other:?}"))),
                    })
                    .collect::<Result<_, _>>()?;
                if m.len() != total {
                    return Err(bad("v_mask", format!("{} entries for {total} cells", m.len())));
                }
                Some(m)
            }
        };
        let (boundary_only, internal_only) = (self.boundary_only.unwrap_or(false), self.internal_only.unwrap_or(false));
        if boundary_only && internal_only {
            return Err(ConfigError("`boundary_only` and `internal_only` exclude each other".into()));
        }
        Ok(Run {
            spec,
            source,
            cells,
            depth,
            horizon,
            cfl,
            tol,
            max_iter,
            iters,
            seed: self.seed.unwrap_or(0),
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
            lambdas,
            t_list,
            rays,
            v_mask,
            boundary_only,
            internal_only,
            drop_b3: self.drop_b3.unwrap_or(false),
            target: self.target.unwrap_or(Target::BumpSign),
        })
    }
}

impl Run {
    pub fn channel_options(&self) -> ChannelOptions {
        ChannelOptions {
            no_boundary: self.internal_only,
            no_internal: self.boundary_only,
            drop_b3: self.drop_b3,
            v_mask: self.v_mask.clone(),
        }
    }

    pub fn echo(&self) -> RunEcho {
        RunEcho {
            source: self.source.clone(),
            label: self.spec.label.clone(),
            cells: self.cells.clone(),
            depth: self.depth,
            horizon: self.horizon,
            cfl: self.cfl,
            tol: self.tol,
            max_iter: self.max_iter,
            iters: self.iters,
            seed: self.seed,
            out: self.out.display().to_string(),
            lambdas: self.lambdas.clone(),
            t_list: self.t_list.clone(),
            rays: self.rays,
            v_mask: self.v_mask.as_ref().map(|m| m.iter().map(|&b| if b { '1' } else { '0' }).collect()),
            boundary_only: self.boundary_only,
            internal_only: self.internal_only,
            drop_b3: self.drop_b3,
            target: self.target,
        }
    }
}
