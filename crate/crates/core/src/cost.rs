//! Relative memory cost and performance per cost.
//!
//! Costs are per bit, relative to planar DRAM, and normalized to equal main
//! memory capacity: a hierarchy costs `cpb(main) + fraction * cpb(cache)`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PLANAR_DRAM: &str = "planar_dram";
pub const STACKED_DRAM: &str = "stacked_dram";

/// Largest cache-to-main capacity ratio a hierarchy may use.
pub const MAX_CACHE_FRACTION: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("unknown technology `{0}`")]
    UnknownTechnology(String),
    #[error("cost of `{0}` must be positive")]
    NonPositive(String),
    #[error("cache fraction {0} must be in [0, 0.2]")]
    BadFraction(f64),
    #[error("cost must be positive")]
    ZeroCost,
}

/// Cost per bit of each technology relative to planar DRAM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostTable(BTreeMap<String, f64>);

impl Default for CostTable {
    fn default() -> Self {
        let entries = [
            (PLANAR_DRAM, 1.00),
            (STACKED_DRAM, 7.00),
            ("slc", 1.00),
            ("mlc", 0.50),
            ("tlc", 0.25),
        ];
        Self(entries.iter().map(|&(k, v)| (k.to_string(), v)).collect())
    }
}

impl CostTable {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self, CostError> {
        let t = Self(entries);
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), CostError> {
        for (k, &v) in &self.0 {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CostError::NonPositive(k.clone()));
            }
        }
        self.cost_per_bit(PLANAR_DRAM).map(|_| ())
    }

    pub fn cost_per_bit(&self, tech: &str) -> Result<f64, CostError> {
        self.0
            .get(tech)
            .copied()
            .ok_or_else(|| CostError::UnknownTechnology(tech.to_string()))
    }

    pub fn insert(&mut self, tech: &str, cost_per_bit: f64) {
        self.0.insert(tech.to_string(), cost_per_bit);
    }

    pub fn technologies(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchySpec {
    pub main_technology: String,
    /// Cache capacity divided by main-memory capacity.
    #[serde(default)]
    pub cache_fraction: f64,
    #[serde(default = "default_cache_tech")]
    pub cache_technology: String,
}

fn default_cache_tech() -> String {
    STACKED_DRAM.to_string()
}

impl HierarchySpec {
    pub fn new(main: &str, cache_fraction: f64) -> Self {
        Self {
            main_technology: main.to_string(),
            cache_fraction,
            cache_technology: default_cache_tech(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub main_cost: f64,
    pub cache_cost: f64,
    pub total_cost: f64,
}

pub fn cost_breakdown(spec: &HierarchySpec, table: &CostTable) -> Result<CostBreakdown, CostError> {
    if !(0.0..=MAX_CACHE_FRACTION).contains(&spec.cache_fraction) {
        return Err(CostError::BadFraction(spec.cache_fraction));
    }
    let base = table.cost_per_bit(PLANAR_DRAM)?;
    let main_cost = table.cost_per_bit(&spec.main_technology)? / base;
    let cache_cost = if spec.cache_fraction == 0.0 {
        0.0
    } else {
        spec.cache_fraction * table.cost_per_bit(&spec.cache_technology)? / base
    };
    Ok(CostBreakdown {
        main_cost,
        cache_cost,
        total_cost: main_cost + cache_cost,
    })
}

/// Total hierarchy cost relative to a planar-DRAM-only system.
pub fn hierarchy_cost(spec: &HierarchySpec, table: &CostTable) -> Result<f64, CostError> {
    cost_breakdown(spec, table).map(|b| b.total_cost)
}

pub fn perf_per_cost(perf_geomean: f64, cost: f64) -> Result<f64, CostError> {
    if !(cost > 0.0) {
        return Err(CostError::ZeroCost);
    }
    Ok(perf_geomean / cost)
}

/// One row of a cost/performance comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub label: String,
    pub perf_geomean: f64,
    pub cache_cost: f64,
    pub total_cost: f64,
    pub perf_per_cost: f64,
}

pub fn cost_report(
    rows: &[(String, HierarchySpec, f64)],
    table: &CostTable,
) -> Result<Vec<CostRow>, CostError> {
    rows.iter()
        .map(|(label, spec, perf)| {
            let b = cost_breakdown(spec, table)?;
            Ok(CostRow {
                label: label.clone(),
                perf_geomean: *perf,
                cache_cost: b.cache_cost,
                total_cost: b.total_cost,
                perf_per_cost: perf_per_cost(*perf, b.total_cost)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost(main: &str, frac: f64) -> f64 {
        hierarchy_cost(&HierarchySpec::new(main, frac), &CostTable::default()).unwrap()
    }

    #[test]
    fn baseline_is_one() {
        assert_eq!(cost(PLANAR_DRAM, 0.0), 1.0);
        assert_eq!(perf_per_cost(1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn cached_pcm_costs() {
        assert_eq!(cost("mlc", 1.0 / 32.0), 0.71875);
        assert_eq!(cost("tlc", 1.0 / 8.0), 1.125);
        assert!((cost("mlc", 0.03) - 0.71).abs() < 1e-12);
    }

    #[test]
    fn perf_per_cost_values() {
        assert!((perf_per_cost(1.28, 0.72).unwrap() - 1.78).abs() < 0.005);
        assert!((perf_per_cost(1.31, 1.22).unwrap() - 1.07).abs() < 0.005);
        assert_eq!(perf_per_cost(1.0, 0.0), Err(CostError::ZeroCost));
    }

    #[test]
    fn errors() {
        let t = CostTable::default();
        assert_eq!(
            hierarchy_cost(&HierarchySpec::new("reram", 0.0), &t),
            Err(CostError::UnknownTechnology("reram".into()))
        );
        assert_eq!(
            hierarchy_cost(&HierarchySpec::new("slc", 0.5), &t),
            Err(CostError::BadFraction(0.5))
        );
        let mut bad = BTreeMap::new();
        bad.insert(PLANAR_DRAM.to_string(), 0.0);
        assert!(CostTable::new(bad).is_err());
    }

    #[test]
    fn linear_in_fraction() {
        let a = cost("slc", 0.0);
        let b = cost("slc", 0.05);
        let c = cost("slc", 0.1);
        assert!(((c - b) - (b - a)).abs() < 1e-12);
    }
}
