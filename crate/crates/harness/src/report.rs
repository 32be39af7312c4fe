//! Running a config and writing its artifacts: a JSON report, a per-episode
//! CSV and an optional JSON-lines event log of every step.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use oqn_core::oqn::{compute_hyperparams, run, HintRule, HyperParams, RunOptions, RunReport, StepRecord};
use oqn_core::problems::catalog;
use oqn_core::SeedStream;
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_gd, GdReport};
use crate::config::{Method, ParamsMode, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub k: usize,
    pub grad_norm_wbar: f64,
    pub episode_regret: f64,
    pub sum_loss: f64,
    pub cum_gradients: u64,
    pub cum_matvecs: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: RunConfig,
    pub params: Option<HyperParams>,
    /// Step records are moved to the event log and dropped from here.
    pub run: Option<RunReport>,
    pub gd: Option<GdReport>,
    pub best_grad_norm: f64,
    pub gradients: u64,
    pub matvecs: u64,
    pub audit_ok: Option<bool>,
    pub wall_time_s: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<CsvRow>,
    #[serde(skip)]
    pub steps: Vec<StepRecord>,
}

impl ExperimentReport {
    /// 2 when an audit failed, 0 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.audit_ok == Some(false) { 2 } else { 0 }
    }
}

pub fn resolve_params(config: &RunConfig, spec: &oqn_core::ObjectiveSpec) -> Result<HyperParams> {
    Ok(match &config.params {
        ParamsMode::Auto => compute_hyperparams(spec, config.budget, config.p_fail, config.gap_bound)?,
        ParamsMode::Explicit(p) => *p,
    })
}

/// Runs the configured method. Deterministic in `(config, seed)`.
pub fn execute(config: &RunConfig) -> Result<ExperimentReport> {
    let spec = catalog(&config.problem, config.dim, config.problem_seed)?;
    let started = Instant::now();
    let mut rep = ExperimentReport {
        config: config.clone(),
        params: None,
        run: None,
        gd: None,
        best_grad_norm: f64::NAN,
        gradients: 0,
        matvecs: 0,
        audit_ok: None,
        wall_time_s: None,
        rows: Vec::new(),
        steps: Vec::new(),
    };
    match config.method {
        Method::GdBaseline => {
            let g = baseline_gd(&spec, config.budget, config.step_size)?;
            rep.rows = g
                .grad_norms
                .iter()
                .enumerate()
                .map(|(i, &gn)| CsvRow {
                    k: i + 1,
                    grad_norm_wbar: gn,
                    episode_regret: 0.0,
                    sum_loss: 0.0,
                    cum_gradients: i as u64 + 1,
                    cum_matvecs: 0,
                })
                .collect();
            rep.best_grad_norm = g.best_grad_norm;
            rep.gradients = g.gradients;
            rep.gd = Some(g);
        }
        Method::Oqn | Method::OgBaseline => {
            let params = resolve_params(config, &spec)?;
            let hint = if config.method == Method::Oqn { HintRule::QuasiNewton } else { HintRule::OptimisticGradient };
            let opts = RunOptions { audit: config.audit, hint, eps_target: config.eps_target };
            let mut rng = SeedStream::new(config.seed);
            let mut r = run(&spec, &params, opts, &mut rng)?;
            rep.rows = r
                .episodes
                .iter()
                .map(|e| CsvRow {
                    k: e.k,
                    grad_norm_wbar: e.grad_norm_at_wbar,
                    episode_regret: e.episode_regret,
                    sum_loss: e.sum_loss,
                    cum_gradients: e.cum_gradients,
                    cum_matvecs: e.cum_matvecs,
                })
                .collect();
            rep.best_grad_norm = r.grad_norm_final;
            rep.gradients = r.gradients;
            rep.matvecs = r.matvecs;
            rep.audit_ok = Some(r.audit.all_ok());
            rep.params = Some(params);
            rep.steps = std::mem::take(&mut r.steps);
            rep.run = Some(r);
        }
    }
    if config.record_time {
        rep.wall_time_s = Some(started.elapsed().as_secs_f64());
    }
    Ok(rep)
}

pub fn csv_string(rows: &[CsvRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().context("flushing csv")?)?)
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    std::fs::write(path, csv_string(rows)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_report(path: &Path, rep: &ExperimentReport) -> Result<()> {
    let text = serde_json::to_string_pretty(rep)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_events(path: &Path, steps: &[StepRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for s in steps {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes whichever artifacts the config names.
pub fn write_artifacts(rep: &ExperimentReport) -> Result<()> {
    if let Some(p) = &rep.config.csv {
        write_csv(p, &rep.rows)?;
    }
    if let Some(p) = &rep.config.report {
        write_report(p, rep)?;
    }
    if let Some(p) = &rep.config.events {
        write_events(p, &rep.steps)?;
    }
    Ok(())
}
