//! JSON run descriptions and argument parsing helpers.
//!
//! Unknown keys are rejected, and every error names the offending key.

use std::fs;
use std::path::{Path, PathBuf};

use scmx_core::cache::CacheConfig;
use scmx_core::explorer::{grid, DesignPoint, SweepConfig, DEFAULT_ROW_BUFFERS, DEFAULT_T_READ_NS, DEFAULT_T_WRITE_NS};
use scmx_core::hierarchy::HierarchyOptions;
use scmx_core::memdev::DeviceDescription;
use scmx_core::trace::SyntheticTraceSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config error at `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

/// Parses JSON into `T`, reporting the path of the first bad key.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        let key = match unknown_field(&msg) {
            Some(field) if path == "." => field,
            _ => path,
        };
        ConfigError::new(key, msg)
    })
}

fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new(path.display().to_string(), format!("cannot read config: {e}")))?;
    parse_json(&text)
}

/// A workload: a synthetic spec or a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSource {
    pub name: String,
    #[serde(default)]
    pub synthetic: Option<SyntheticTraceSpec>,
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
}

impl WorkloadSource {
    pub fn validate(&self, key: &str) -> Result<(), ConfigError> {
        match (&self.synthetic, &self.trace_path) {
            (Some(s), None) => s
                .validate()
                .map_err(|e| ConfigError::new(format!("{key}.synthetic"), e.to_string())),
            (None, Some(p)) => require_file(p, &format!("{key}.trace_path")),
            _ => Err(ConfigError::new(key, "give exactly one of `synthetic` or `trace_path`")),
        }
    }
}

/// `simulate` input: one trace through a cache and, optionally, a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub workload: WorkloadSource,
    pub cache: Option<CacheConfig>,
    #[serde(default)]
    pub device: Option<DeviceDescription>,
    #[serde(default)]
    pub options: HierarchyOptions,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.workload.validate("workload")?;
        if let Some(c) = &self.cache {
            c.validate().map_err(|e| ConfigError::new("cache", e.to_string()))?;
        }
        if let Some(d) = &self.device {
            d.geometry()
                .validate()
                .map_err(|e| ConfigError::new("device", e.to_string()))?;
            d.timing
                .validate()
                .map_err(|e| ConfigError::new("device.timing", e.to_string()))?;
        }
        if self.cache.is_none() && self.device.is_none() {
            return Err(ConfigError::new("cache", "a run needs a cache, a device, or both"));
        }
        if !(self.options.compute_ns_per_access > 0.0) {
            return Err(ConfigError::new("options.compute_ns_per_access", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub row_buffers: Vec<u64>,
    pub t_read_ns: Vec<f64>,
    pub t_write_ns: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            row_buffers: DEFAULT_ROW_BUFFERS.to_vec(),
            t_read_ns: DEFAULT_T_READ_NS.to_vec(),
            t_write_ns: DEFAULT_T_WRITE_NS.to_vec(),
        }
    }
}

impl GridConfig {
    pub fn points(&self) -> Vec<DesignPoint> {
        grid(&self.row_buffers, &self.t_read_ns, &self.t_write_ns)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, empty) in [
            ("grid.row_buffers", self.row_buffers.is_empty()),
            ("grid.t_read_ns", self.t_read_ns.is_empty()),
            ("grid.t_write_ns", self.t_write_ns.is_empty()),
        ] {
            if empty {
                return Err(ConfigError::new(key, "must not be empty"));
            }
        }
        for p in self.points() {
            if p.validate().is_err() {
                let key = if !(512..=4096).contains(&p.row_buffer_bytes) || !p.row_buffer_bytes.is_power_of_two() {
                    "grid.row_buffers"
                } else if p.t_read_ns < scmx_core::explorer::MIN_T_READ_NS {
                    "grid.t_read_ns"
                } else {
                    "grid.t_write_ns"
                };
                return Err(ConfigError::new(key, format!("invalid design point {p:?}")));
            }
        }
        Ok(())
    }
}

/// The built-in workload suite, regenerated from a seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub n_records: u64,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            n_records: 1_000_000,
            seed: 7,
        }
    }
}

/// `explore` and `pcm-study` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExploreConfig {
    /// Explicit workloads; the built-in suite is used when empty.
    pub workloads: Vec<WorkloadSource>,
    pub suite: SuiteConfig,
    pub grid: GridConfig,
    pub sweep: SweepConfig,
}

impl ExploreConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (i, w) in self.workloads.iter().enumerate() {
            w.validate(&format!("workloads[{i}]"))?;
        }
        self.grid.validate()?;
        let s = &self.sweep;
        if !(0.0..1.0).contains(&s.target_margin) {
            return Err(ConfigError::new("sweep.target_margin", "must be in [0, 1)"));
        }
        if !(s.cache_fraction > 0.0 && s.cache_fraction <= 1.0) {
            return Err(ConfigError::new("sweep.cache_fraction", "must be in (0, 1]"));
        }
        if !(0.0..1.0).contains(&s.warmup_fraction) {
            return Err(ConfigError::new("sweep.warmup_fraction", "must be in [0, 1)"));
        }
        if s.ways == 0 {
            return Err(ConfigError::new("sweep.ways", "must be positive"));
        }
        if !(s.options.compute_ns_per_access > 0.0) {
            return Err(ConfigError::new("sweep.options.compute_ns_per_access", "must be positive"));
        }
        Ok(())
    }
}

pub fn require_file(path: &Path, key: &str) -> Result<(), ConfigError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("no such file: {}", path.display())))
    }
}

/// An output path is usable if its parent directory exists.
pub fn require_output(path: &Path, key: &str) -> Result<(), ConfigError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(ConfigError::new(
            key,
            format!("output directory does not exist: {}", dir.display()),
        )),
        _ => Ok(()),
    }
}

/// Decimal (`0.03125`) or rational (`1/32`).
pub fn parse_fraction(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
            if d == 0.0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            n / d
        }
        None => s.trim().parse().map_err(|_| format!("bad fraction `{s}`"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("bad fraction `{s}`"))
    }
}

/// Non-negative integer, also accepting float notation such as `5e7`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("bad count `{s}`"))?;
    if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(format!("bad count `{s}`"))
    }
}

/// `64..8192` expands to the powers of two in range; otherwise a comma list.
pub fn parse_sizes(s: &str) -> Result<Vec<u64>, String> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo = parse_count(lo)?;
        let hi = parse_count(hi)?;
        if lo == 0 || lo > hi {
            return Err(format!("bad size range `{s}`"));
        }
        return Ok(scmx_core::amat::pow2_sizes(lo, hi));
    }
    s.split(',').map(parse_count).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        assert_eq!(parse_fraction("1/32"), Ok(0.03125));
        assert_eq!(parse_fraction("0.125"), Ok(0.125));
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("x").is_err());
    }

    #[test]
    fn counts_and_sizes() {
        assert_eq!(parse_count("5e7"), Ok(50_000_000));
        assert_eq!(parse_count("5e9"), Ok(5_000_000_000));
        assert!(parse_count("1.5").is_err());
        assert_eq!(parse_sizes("64..512"), Ok(vec![64, 128, 256, 512]));
        assert_eq!(parse_sizes("64,2624"), Ok(vec![64, 2624]));
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_json::<ExploreConfig>(r#"{"sweep": {"cache_fractoin": 0.1}}"#).unwrap_err();
        assert_eq!(e.key, "sweep.cache_fractoin");
        let e = parse_json::<ExploreConfig>(r#"{"bogus": 1}"#).unwrap_err();
        assert_eq!(e.key, "bogus");
    }

    #[test]
    fn wrong_type_is_named() {
        let e = parse_json::<ExploreConfig>(r#"{"grid": {"t_read_ns": ["fast"]}}"#).unwrap_err();
        assert_eq!(e.key, "grid.t_read_ns[0]");
    }

    #[test]
    fn device_description_json() {
        let d: DeviceDescription = parse_json(
            r#"{"ranks":2,"banks_per_rank":8,"row_buffer":1024,"timing":{"tCAS":14,"tRCD":60,"data_rate":2666}}"#,
        )
        .unwrap();
        assert_eq!(d.timing.t_rcd, 60.0);
        assert_eq!(d.geometry().row_buffer_bytes, 1024);
    }

    #[test]
    fn workload_needs_one_source() {
        let w = WorkloadSource {
            name: "w".into(),
            synthetic: None,
            trace_path: None,
        };
        assert_eq!(w.validate("workloads[0]").unwrap_err().key, "workloads[0]");
    }

    #[test]
    fn semantic_errors_name_keys() {
        let mut c = ExploreConfig::default();
        c.sweep.target_margin = 1.5;
        assert_eq!(c.validate().unwrap_err().key, "sweep.target_margin");
        let mut c = ExploreConfig::default();
        c.grid.row_buffers = vec![768];
        assert_eq!(c.validate().unwrap_err().key, "grid.row_buffers");
    }
}
