//! Grid benchmark over methods × budgets × seeds, run in parallel.
//!
//! ```text
//! problem=cosine_mixture
//! dim=8
//! methods=oqn,og,gd
//! budgets=240,480,960,1920
//! seeds=5
//! ```
//!
//! Gradient descent gets `2M` steps so its gradient count matches the
//! conversion methods to leading order.

use std::path::PathBuf;

use anyhow::{bail, Result};
use oqn_core::oqn::AuditLevel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{get, parse_audit, parse_pairs, ConfigError, Method, ParamsMode, RunConfig};
use crate::report::execute;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub problem: String,
    pub dim: usize,
    pub problem_seed: u64,
    pub methods: Vec<Method>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    pub p_fail: f64,
    pub gap_bound: Option<f64>,
    pub audit: AuditLevel,
    pub csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

const KEYS: &[&str] =
    &["problem", "dim", "problem_seed", "methods", "budgets", "seeds", "base_seed", "p_fail", "gap_bound", "audit", "csv", "report"];

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(|s| s.trim().parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: v.into() }))
        .collect()
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let map = parse_pairs(text, KEYS)?;
        let methods = match map.get("methods") {
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| ConfigError::BadValue { key: "methods".into(), value: v.clone() }))
                .collect::<Result<_, _>>()?,
            None => vec![Method::Oqn],
        };
        let budgets = list("budgets", map.get("budgets").ok_or(ConfigError::Missing("budgets"))?)?;
        let n_seeds: u64 = get(&map, "seeds")?.unwrap_or(5);
        let base: u64 = get(&map, "base_seed")?.unwrap_or(0);
        let audit = match map.get("audit") {
            Some(a) => parse_audit(a).ok_or_else(|| ConfigError::BadValue { key: "audit".into(), value: a.clone() })?,
            None => AuditLevel::Off,
        };
        Ok(Self {
            problem: map.get("problem").cloned().ok_or(ConfigError::Missing("problem"))?,
            dim: get(&map, "dim")?.ok_or(ConfigError::Missing("dim"))?,
            problem_seed: get(&map, "problem_seed")?.unwrap_or(0),
            methods,
            budgets,
            seeds: (base..base + n_seeds).collect(),
            p_fail: get(&map, "p_fail")?.unwrap_or(0.01),
            gap_bound: get(&map, "gap_bound")?,
            audit,
            csv: map.get("csv").map(PathBuf::from),
            report: map.get("report").map(PathBuf::from),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchCell {
    pub method: Method,
    pub budget: usize,
    pub seed: u64,
    pub best_grad_norm: f64,
    pub gradients: u64,
    pub matvecs: u64,
    pub audit_ok: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodTrend {
    pub method: Method,
    pub budgets: Vec<usize>,
    pub medians: Vec<f64>,
    /// Least-squares slope of `log(median)` against `log(M)`.
    pub slope: f64,
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub cells: Vec<BenchCell>,
    pub trends: Vec<MethodTrend>,
}

impl BenchReport {
    pub fn trend(&self, m: Method) -> Option<&MethodTrend> {
        self.trends.iter().find(|t| t.method == m)
    }

    pub fn audits_ok(&self) -> bool {
        self.cells.iter().all(|c| c.audit_ok != Some(false))
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.budgets.is_empty() || cfg.seeds.is_empty() || cfg.methods.is_empty() {
        bail!("bench grid is empty");
    }
    let grid: Vec<(Method, usize, u64)> = cfg
        .methods
        .iter()
        .flat_map(|&m| cfg.budgets.iter().flat_map(move |&b| cfg.seeds.iter().map(move |&s| (m, b, s))))
        .collect();
    let cells: Vec<BenchCell> = grid
        .par_iter()
        .map(|&(method, budget, seed)| {
            let rc = RunConfig {
                problem: cfg.problem.clone(),
                dim: cfg.dim,
                problem_seed: cfg.problem_seed,
                method,
                budget: if method == Method::GdBaseline { 2 * budget } else { budget },
                params: ParamsMode::Auto,
                seed,
                p_fail: cfg.p_fail,
                gap_bound: cfg.gap_bound,
                audit: cfg.audit,
                ..Default::default()
            };
            let r = execute(&rc)?;
            Ok(BenchCell {
                method,
                budget,
                seed,
                best_grad_norm: r.best_grad_norm,
                gradients: r.gradients,
                matvecs: r.matvecs,
                audit_ok: r.audit_ok,
            })
        })
        .collect::<Result<_>>()?;

    let trends = cfg
        .methods
        .iter()
        .map(|&method| {
            let medians: Vec<f64> = cfg
                .budgets
                .iter()
                .map(|&b| {
                    let v: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.method == method && c.budget == b)
                        .map(|c| c.best_grad_norm)
                        .collect();
                    median(&v)
                })
                .collect();
            let xs: Vec<f64> = cfg.budgets.iter().map(|&b| b as f64).collect();
            let slope = if xs.len() >= 2 { loglog_slope(&xs, &medians) } else { f64::NAN };
            let nonincreasing = medians.windows(2).all(|w| w[1] <= w[0]);
            MethodTrend { method, budgets: cfg.budgets.clone(), medians, slope, nonincreasing }
        })
        .collect();
    Ok(BenchReport { config: cfg.clone(), cells, trends })
}

pub fn cells_csv(cells: &[BenchCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "budget", "seed", "best_grad_norm", "gradients", "matvecs"])?;
    for c in cells {
        w.write_record([
            c.method.name().to_string(),
            c.budget.to_string(),
            c.seed.to_string(),
            c.best_grad_norm.to_string(),
            c.gradients.to_string(),
            c.matvecs.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.6)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.6).abs() < 1e-12);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn parses_grid() {
        let c = BenchConfig::parse("problem=cosine_mixture\ndim=8\nmethods=oqn,gd\nbudgets=240,480\nseeds=3\n").unwrap();
        assert_eq!(c.methods, vec![Method::Oqn, Method::GdBaseline]);
        assert_eq!(c.seeds, vec![0, 1, 2]);
        assert!(BenchConfig::parse("problem=x\ndim=2\nbudgets=1,a").is_err());
    }
}
