//! `oqn run | verify | bench | dump-params`.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 audit or certificate failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use oqn_core::oqn::compute_hyperparams;
use oqn_core::problems::catalog;

use crate::bench::{cells_csv, run_bench, BenchConfig};
use crate::config::RunConfig;
use crate::report::{execute, write_artifacts};
use crate::verify::{verify_suite, VerifyLevel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_AUDIT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "oqn", about = "Optimistic quasi-Newton search for stationary points")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run one experiment from a key=value config.
    Run { config: PathBuf },
    /// Run the randomized verification suite.
    Verify {
        #[arg(long, default_value = "quick")]
        level: String,
    },
    /// Grid over methods, budgets and seeds.
    Bench { config: PathBuf },
    /// Print the automatic hyperparameters, e.g. `dump-params cosine_mixture:d=4 1000`.
    DumpParams {
        problem: String,
        budget: usize,
        #[arg(long, default_value_t = 0.01)]
        p_fail: f64,
        #[arg(long)]
        gap: Option<f64>,
    },
}

/// `name` or `name:d=N[,seed=S]`.
pub fn parse_problem(s: &str) -> Result<(String, usize, u64), String> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let (mut d, mut seed) = (None, 0);
    for kv in rest.split(',').filter(|t| !t.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("bad problem option `{kv}`"))?;
        match k {
            "d" | "dim" => d = Some(v.parse().map_err(|_| format!("bad dimension `{v}`"))?),
            "seed" => seed = v.parse().map_err(|_| format!("bad seed `{v}`"))?,
            _ => return Err(format!("unknown problem option `{k}`")),
        }
    }
    Ok((name.to_string(), d.ok_or("problem needs a dimension, e.g. cosine_mixture:d=4")?, seed))
}

fn is_certificate_failure(e: &anyhow::Error) -> bool {
    matches!(e.downcast_ref::<oqn_core::Error>(), Some(oqn_core::Error::CertificateFailure { .. }))
}

pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match cli.cmd {
        Cmd::Run { config } => {
            let cfg = match RunConfig::from_file(&config).and_then(RunConfig::with_env_seed) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_USAGE;
                }
            };
            let rep = match execute(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "error: {e:#}");
                    return if is_certificate_failure(&e) { EXIT_AUDIT } else { EXIT_USAGE };
                }
            };
            if let Err(e) = write_artifacts(&rep) {
                let _ = writeln!(err, "error: {e:#}");
                return EXIT_USAGE;
            }
            let _ = writeln!(
                out,
                "{} on {} d={} seed={}: best grad norm {:.6e}, {} gradients, {} matvecs",
                cfg.method.name(),
                cfg.problem,
                cfg.dim,
                cfg.seed,
                rep.best_grad_norm,
                rep.gradients,
                rep.matvecs
            );
            if let Some(r) = &rep.run {
                let _ = writeln!(out, "audit: {}", serde_json::to_string(&r.audit).unwrap_or_default());
            }
            rep.exit_code()
        }
        Cmd::Verify { level } => {
            let level: VerifyLevel = match level.parse() {
                Ok(l) => l,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_USAGE;
                }
            };
            let s = verify_suite(level);
            for c in &s.checks {
                let _ = writeln!(out, "{c}");
            }
            if s.passed() { EXIT_OK } else { EXIT_AUDIT }
        }
        Cmd::Bench { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(err, "error: cannot read {}: {e}", config.display());
                    return EXIT_USAGE;
                }
            };
            let cfg = match BenchConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_USAGE;
                }
            };
            let rep = match run_bench(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "error: {e:#}");
                    return if is_certificate_failure(&e) { EXIT_AUDIT } else { EXIT_USAGE };
                }
            };
            let written = (|| -> anyhow::Result<()> {
                if let Some(p) = &cfg.csv {
                    std::fs::write(p, cells_csv(&rep.cells)?)?;
                }
                if let Some(p) = &cfg.report {
                    std::fs::write(p, serde_json::to_string_pretty(&rep)?)?;
                }
                Ok(())
            })();
            if let Err(e) = written {
                let _ = writeln!(err, "error: {e:#}");
                return EXIT_USAGE;
            }
            for t in &rep.trends {
                let meds: Vec<String> = t.medians.iter().map(|m| format!("{m:.3e}")).collect();
                let _ = writeln!(
                    out,
                    "{}: medians [{}], slope {:.3}, nonincreasing {}",
                    t.method.name(),
                    meds.join(", "),
                    t.slope,
                    t.nonincreasing
                );
            }
            if rep.audits_ok() { EXIT_OK } else { EXIT_AUDIT }
        }
        Cmd::DumpParams { problem, budget, p_fail, gap } => {
            let params = parse_problem(&problem)
                .map_err(anyhow::Error::msg)
                .and_then(|(name, d, seed)| Ok(catalog(&name, d, seed)?))
                .and_then(|spec| Ok(compute_hyperparams(&spec, budget, p_fail, gap)?));
            match params {
                Ok(p) => {
                    let _ = writeln!(out, "D={:.17e}", p.d_radius);
                    let _ = writeln!(out, "eta={:.17e}", p.eta);
                    let _ = writeln!(out, "T={}", p.t_len);
                    let _ = writeln!(out, "K={}", p.k_eps);
                    let _ = writeln!(out, "M={}", p.m_total);
                    let _ = writeln!(out, "delta={:.17e}", p.delta_tr);
                    EXIT_OK
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e:#}");
                    EXIT_USAGE
                }
            }
        }
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}
