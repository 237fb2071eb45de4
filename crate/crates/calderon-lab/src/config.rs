//! Declarative experiment configuration: one flat `key = value` file, no
//! includes, unknown keys rejected, every run echoing the fully resolved
//! configuration into its outputs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse { line: usize, message: String },
    UnknownKeys(Vec<String>),
    BadValue { key: String, message: String },
    MissingKey(&'static str),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "config io error: {e}"),
            ConfigError::Parse { line, message } => {
                write!(f, "config parse error on line {line}: {message}")
            }
            ConfigError::UnknownKeys(keys) => {
                write!(f, "unknown config keys: {}", keys.join(", "))
            }
            ConfigError::BadValue { key, message } => {
                write!(f, "bad value for {key}: {message}")
            }
            ConfigError::MissingKey(k) => write!(f, "missing required key {k}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

/// Raw `key = value` map.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    map: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if map.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { map })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Recover,
    Stability,
    Lecam,
    Klcheck,
    Truncation,
}

impl Experiment {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "recover" => Some(Self::Recover),
            "stability" => Some(Self::Stability),
            "lecam" => Some(Self::Lecam),
            "klcheck" => Some(Self::Klcheck),
            "truncation" => Some(Self::Truncation),
            _ => None,
        }
    }
}

/// Ground truth generating the synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthSpec {
    /// Homogeneous unit conductivity.
    One,
    /// Two-phase concentric disk.
    Concentric,
}

/// Fully resolved configuration, echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,

    // Geometry, link and grids.
    pub m1: f64,
    pub r0: f64,
    pub r1: f64,
    pub grid_n: usize,
    pub mesh_h: f64,

    // Truth.
    pub truth: TruthSpec,
    pub truth_kappa: f64,
    pub truth_rho: f64,

    // Noise model for recovery runs.
    pub noise_r: f64,
    pub eps_list: Vec<f64>,
    pub data_modes: usize,

    // Prior.
    pub prior_alpha: u32,
    pub prior_ell: f64,
    pub prior_amplitude: f64,
    pub prior_modes: usize,

    // Chain.
    pub chain_beta: f64,
    pub chain_iters: usize,
    pub chain_burnin: usize,
    pub check_baseline: bool,

    pub seeds: Vec<u64>,

    // Stability sweep.
    pub stability_steps: usize,
    pub stability_t_max: f64,
    pub stability_support: f64,
    pub stability_modes: usize,
    pub stability_mesh_h: f64,

    // Noise-model comparison study.
    pub lecam_p_list: Vec<usize>,
    pub lecam_window: usize,
    pub lecam_replicates: usize,
    pub lecam_s2e_p: usize,
    pub lecam_s2e_mode_factor: usize,
    pub lecam_s2e_replicates: usize,

    // Divergence checks.
    pub kl_eps_list: Vec<f64>,
    pub kl_replicates: usize,
    pub kl_window: usize,
    pub mu_list: Vec<f64>,

    // Truncation estimator study.
    pub trunc_eps: f64,
    pub trunc_alpha: f64,
    pub trunc_master: usize,
}

struct Reader {
    map: BTreeMap<String, String>,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl Reader {
    fn get(&self, key: &str) -> Option<&str> {
        if self.map.contains_key(key) {
            self.used.borrow_mut().insert(key.to_string());
        }
        self.map.get(key).map(String::as_str)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.into(),
                message: format!("`{v}` is not a number"),
            }),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.into(),
                message: format!("`{v}` is not an integer"),
            }),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(ConfigError::BadValue {
                key: key.into(),
                message: format!("`{v}` is not true/false"),
            }),
        }
    }

    fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| ConfigError::BadValue {
                        key: key.into(),
                        message: format!("`{s}` is not a number"),
                    })
                })
                .collect(),
        }
    }

    fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| ConfigError::BadValue {
                        key: key.into(),
                        message: format!("`{s}` is not an integer"),
                    })
                })
                .collect(),
        }
    }

    fn u64_list_or(&self, key: &str, default: &[u64]) -> Result<Vec<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| ConfigError::BadValue {
                        key: key.into(),
                        message: format!("`{s}` is not an integer"),
                    })
                })
                .collect(),
        }
    }
}

impl ExperimentConfig {
    /// Resolve a raw map against defaults, rejecting unknown keys.
    pub fn resolve(raw: &RawConfig) -> Result<Self, ConfigError> {
        let reader = Reader {
            map: raw.map.clone(),
            used: Default::default(),
        };
        let experiment = match reader.get("experiment") {
            None => return Err(ConfigError::MissingKey("experiment")),
            Some(v) => Experiment::parse(v).ok_or_else(|| ConfigError::BadValue {
                key: "experiment".into(),
                message: format!("`{v}` is not one of recover|stability|lecam|klcheck|truncation"),
            })?,
        };
        let truth = match reader.get("truth") {
            None => TruthSpec::Concentric,
            Some("one") => TruthSpec::One,
            Some("concentric") => TruthSpec::Concentric,
            Some(v) => {
                return Err(ConfigError::BadValue {
                    key: "truth".into(),
                    message: format!("`{v}` is not one of one|concentric"),
                })
            }
        };

        let cfg = Self {
            experiment,
            m1: reader.f64_or("m1", 0.5)?,
            r0: reader.f64_or("r0", 0.5)?,
            r1: reader.f64_or("r1", 0.75)?,
            grid_n: reader.usize_or("grid_n", 33)?,
            mesh_h: reader.f64_or("mesh_h", 0.1)?,
            truth,
            truth_kappa: reader.f64_or("truth_kappa", 2.0)?,
            truth_rho: reader.f64_or("truth_rho", 0.5)?,
            noise_r: reader.f64_or("noise_r", 0.0)?,
            eps_list: reader.f64_list_or("eps_list", &[0.1, 0.01])?,
            data_modes: reader.usize_or("data_modes", 6)?,
            prior_alpha: reader.usize_or("prior_alpha", 6)? as u32,
            prior_ell: reader.f64_or("prior_ell", 0.4)?,
            prior_amplitude: reader.f64_or("prior_amplitude", 2.0)?,
            prior_modes: reader.usize_or("prior_modes", 16)?,
            chain_beta: reader.f64_or("chain_beta", 0.2)?,
            chain_iters: reader.usize_or("chain_iters", 2500)?,
            chain_burnin: reader.usize_or("chain_burnin", 800)?,
            check_baseline: reader.bool_or("check_baseline", true)?,
            seeds: reader.u64_list_or("seeds", &[1, 2, 3, 4, 5])?,
            stability_steps: reader.usize_or("stability_steps", 10)?,
            stability_t_max: reader.f64_or("stability_t_max", 0.2)?,
            stability_support: reader.f64_or("stability_support", 0.75)?,
            stability_modes: reader.usize_or("stability_modes", 8)?,
            stability_mesh_h: reader.f64_or("stability_mesh_h", 0.04)?,
            lecam_p_list: reader.usize_list_or("lecam_p_list", &[16, 32, 64, 128])?,
            lecam_window: reader.usize_or("lecam_window", 3)?,
            lecam_replicates: reader.usize_or("lecam_replicates", 10_000)?,
            lecam_s2e_p: reader.usize_or("lecam_s2e_p", 8)?,
            lecam_s2e_mode_factor: reader.usize_or("lecam_s2e_mode_factor", 64)?,
            lecam_s2e_replicates: reader.usize_or("lecam_s2e_replicates", 10_000)?,
            kl_eps_list: reader.f64_list_or("kl_eps_list", &[0.25])?,
            kl_replicates: reader.usize_or("kl_replicates", 100_000)?,
            kl_window: reader.usize_or("kl_window", 4)?,
            mu_list: reader.f64_list_or(
                "mu_list",
                &[0.0, 0.002, 0.004, 0.006, 0.008, 0.01],
            )?,
            trunc_eps: reader.f64_or("trunc_eps", 0.0113)?,
            trunc_alpha: reader.f64_or("trunc_alpha", 3.0)?,
            trunc_master: reader.usize_or("trunc_master", 24)?,
        };

        let used = reader.used.borrow();
        let unknown: Vec<String> = raw
            .map
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        Self::resolve(&RawConfig::load(path)?)
    }

    /// Canonical serialization used for the configuration digest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
