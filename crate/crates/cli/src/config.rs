use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use frogsim_core::surgery::Growth;
use frogsim_core::CrossingMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Experiment {
    Speed,
    Shape,
    PoissonTest,
    CriticalFront,
    Crossing,
    ClusterTail,
    Branching,
    Surgery,
    BmBounds,
    CriticalRadius,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Speed => "speed",
            Experiment::Shape => "shape",
            Experiment::PoissonTest => "poisson-test",
            Experiment::CriticalFront => "critical-front",
            Experiment::Crossing => "crossing",
            Experiment::ClusterTail => "cluster-tail",
            Experiment::Branching => "branching",
            Experiment::Surgery => "surgery",
            Experiment::BmBounds => "bm-bounds",
            Experiment::CriticalRadius => "critical-radius",
        }
    }
}

/// A number, or "critical" for the cached critical radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusSpec {
    Value(f64),
    Named(String),
}

/// Expected behavior for experiments whose verdict direction depends on
/// whether the radius is critical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Auto,
    /// Superlinear front, or crossing probability bounded below.
    Critical,
    /// Linear front, or crossing probability decaying in n.
    Subcritical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthFamily {
    Balls,
    Sausage,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "d_dim")]
    pub dim: usize,
    #[serde(default)]
    pub radius: Option<RadiusSpec>,
    /// Multiplies the radius; mostly useful with "critical".
    #[serde(default = "d_one")]
    pub radius_factor: f64,
    #[serde(default)]
    pub box_side: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "d_dt_max")]
    pub dt_max: f64,
    #[serde(default = "d_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub critical_cache: Option<PathBuf>,

    // speed
    #[serde(default)]
    pub n_min: Option<u32>,
    #[serde(default)]
    pub n_max: Option<u32>,
    #[serde(default)]
    pub rays: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub ratio_sd_max: Option<f64>,

    // shape, critical-front
    #[serde(default)]
    pub sample_dt: Option<f64>,
    #[serde(default)]
    pub shape_range: Option<[f64; 2]>,
    #[serde(default)]
    pub slope_range: Option<[f64; 2]>,
    #[serde(default)]
    pub expect: Option<Expect>,

    // poisson-test, surgery
    #[serde(default)]
    pub windows: Option<Vec<Window>>,
    #[serde(default)]
    pub max_corr: Option<f64>,

    // crossing, critical-radius
    #[serde(default)]
    pub ns: Option<Vec<f64>>,
    #[serde(default)]
    pub aspect: Option<f64>,
    #[serde(default)]
    pub mode: Option<CrossingMode>,
    #[serde(default)]
    pub n: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,

    // branching
    #[serde(default)]
    pub gen_max: Option<u32>,
    #[serde(default)]
    pub offspring_replicas: Option<usize>,
    #[serde(default)]
    pub time_grid: Option<Vec<f64>>,

    // surgery
    #[serde(default)]
    pub growth: Option<GrowthFamily>,
    #[serde(default)]
    pub sausage_r: Option<f64>,
    #[serde(default)]
    pub sausage_dt: Option<f64>,
    #[serde(default)]
    pub window_side: Option<f64>,
    #[serde(default)]
    pub nu_intensity: Option<f64>,
    #[serde(default)]
    pub pair_radius: Option<f64>,

    // bm-bounds
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub ells: Option<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

fn d_dim() -> usize {
    2
}
fn d_one() -> f64 {
    1.0
}
fn d_dt_max() -> f64 {
    0.1
}
fn d_replicas() -> usize {
    1
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalCache {
    pub r_hat: f64,
    pub n: f64,
    pub tol: f64,
    pub replicas: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=3).contains(&self.dim) {
            return bad(format!("dim must be 1, 2 or 3 (got {})", self.dim));
        }
        if self.replicas == 0 {
            return bad("replicas must be positive");
        }
        let positive = [
            ("radius_factor", Some(self.radius_factor)),
            ("box_side", self.box_side),
            ("t_max", self.t_max),
            ("dt_max", Some(self.dt_max)),
            ("ratio_sd_max", self.ratio_sd_max),
            ("sample_dt", self.sample_dt),
            ("max_corr", self.max_corr),
            ("aspect", self.aspect),
            ("n", self.n),
            ("tol", self.tol),
            ("sausage_r", self.sausage_r),
            ("sausage_dt", self.sausage_dt),
            ("window_side", self.window_side),
            ("pair_radius", self.pair_radius),
            ("k", self.k),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive and finite"));
                }
            }
        }
        if let Some(nu) = self.nu_intensity {
            if !(nu >= 0.0 && nu.is_finite()) {
                return bad("nu_intensity must be >= 0");
            }
        }
        match &self.radius {
            Some(RadiusSpec::Value(r)) if !(*r > 0.0 && r.is_finite()) => return bad("radius must be positive"),
            Some(RadiusSpec::Named(s)) if s != "critical" => {
                return bad(format!("radius must be a number or \"critical\" (got {s:?})"))
            }
            _ => {}
        }
        for list in [&self.ns, &self.time_grid].into_iter().flatten() {
            if list.is_empty() || list.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return bad("ns and time_grid must be non-empty lists of positive numbers");
            }
        }
        if let Some(ws) = &self.windows {
            if ws.is_empty() {
                return bad("windows must not be empty");
            }
            for w in ws {
                if w.lo.len() != w.hi.len() || w.lo.iter().zip(&w.hi).any(|(a, b)| !(a < b)) {
                    return bad("each window needs lo < hi coordinatewise");
                }
            }
        }
        if let (Some(a), Some(b)) = (self.n_min, self.n_max) {
            if a > b {
                return bad("n_min must not exceed n_max");
            }
        }
        Ok(())
    }

    pub fn needs_radius(&self) -> bool {
        !matches!(self.experiment, Experiment::BmBounds | Experiment::CriticalRadius | Experiment::Surgery)
    }

    pub fn cache_path(&self, out_dir: &Path) -> PathBuf {
        self.critical_cache.clone().unwrap_or_else(|| out_dir.join("critical_radius.json"))
    }

    pub fn growth_models(&self) -> Vec<(&'static str, Growth)> {
        let sausage = Growth::BrownianSausage {
            r: self.sausage_r.unwrap_or(0.2),
            dt: self.sausage_dt.unwrap_or_else(|| (self.sausage_r.unwrap_or(0.2) / 4.0).powi(2) / 2.0),
        };
        match self.growth.unwrap_or(GrowthFamily::Both) {
            GrowthFamily::Balls => vec![("balls", Growth::ConcentricBalls)],
            GrowthFamily::Sausage => vec![("sausage", sausage)],
            GrowthFamily::Both => vec![("balls", Growth::ConcentricBalls), ("sausage", sausage)],
        }
    }
}

/// Radius after resolving "critical" against the cache, and the cached
/// critical value when one was read.
pub fn resolve_radius(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(Option<f64>, Option<f64>), ConfigError> {
    let cache = cfg.cache_path(out_dir);
    let read_cache = || -> Result<f64, ConfigError> {
        let text = std::fs::read_to_string(&cache).map_err(|e| {
            ConfigError(format!("radius \"critical\" needs {} (run critical-radius first): {e}", cache.display()))
        })?;
        let c: CriticalCache =
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("bad critical cache {}: {e}", cache.display())))?;
        Ok(c.r_hat)
    };
    match &cfg.radius {
        None if cfg.needs_radius() => bad(format!("experiment {} needs a radius", cfg.experiment.name())),
        None => Ok((None, None)),
        Some(RadiusSpec::Value(r)) => {
            let crit = if cache.exists() { read_cache().ok() } else { None };
            Ok((Some(r * cfg.radius_factor), crit))
        }
        Some(RadiusSpec::Named(_)) => {
            let rc = read_cache()?;
            Ok((Some(rc * cfg.radius_factor), Some(rc)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "bm-bounds", "replicas": 10}"#).unwrap();
        assert_eq!(c.experiment, Experiment::BmBounds);
        assert_eq!(c.dim, 2);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_experiment_and_fields() {
        assert!(ExperimentConfig::from_json(r#"{"experiment": "warp"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "speed", "radios": 1}"#).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "speed", "radius": -1}"#).unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_json(r#"{"experiment": "speed", "radius": "huge"}"#).unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_json(r#"{"experiment": "speed", "radius": 1, "dim": 4}"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn critical_radius_needs_cache() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::from_json(r#"{"experiment": "speed", "radius": "critical", "radius_factor": 0.5}"#)
            .unwrap();
        assert!(resolve_radius(&c, dir.path()).is_err());
        let cache = CriticalCache { r_hat: 1.2, n: 20.0, tol: 0.02, replicas: 10, seed: 0 };
        std::fs::write(dir.path().join("critical_radius.json"), serde_json::to_string(&cache).unwrap()).unwrap();
        let (r, rc) = resolve_radius(&c, dir.path()).unwrap();
        assert_eq!(r, Some(0.6));
        assert_eq!(rc, Some(1.2));
    }
}
