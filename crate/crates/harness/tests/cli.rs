use std::path::Path;

use oqn_core::oqn::compute_hyperparams;
use oqn_core::problems::catalog;
use oqn_harness::cli::{run_cli_with, EXIT_AUDIT, EXIT_OK, EXIT_USAGE};
use oqn_harness::config::RunConfig;
use oqn_harness::report::{execute, read_csv};

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["oqn"];
    argv.extend_from_slice(args);
    let code = run_cli_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn dump_params_matches_library() {
    let (code, out, _) = cli(&["dump-params", "cosine_mixture:d=4", "1000"]);
    assert_eq!(code, EXIT_OK);
    let p = compute_hyperparams(&catalog("cosine_mixture", 4, 0).unwrap(), 1000, 0.01, None).unwrap();
    let field = |k: &str| -> String {
        out.lines().find_map(|l| l.strip_prefix(&format!("{k}="))).unwrap().to_string()
    };
    assert_eq!(field("D").parse::<f64>().unwrap(), p.d_radius);
    assert_eq!(field("eta").parse::<f64>().unwrap(), p.eta);
    assert_eq!(field("delta").parse::<f64>().unwrap(), p.delta_tr);
    assert_eq!(field("T").parse::<usize>().unwrap(), p.t_len);
    assert_eq!(field("K").parse::<usize>().unwrap(), p.k_eps);
}

#[test]
fn usage_errors_exit_one() {
    let (code, _, err) = cli(&["frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage"), "{err}");
    assert_eq!(cli(&["verify", "--level", ""]).0, EXIT_USAGE);
    assert_eq!(cli(&["dump-params", "cosine_mixture", "10"]).0, EXIT_USAGE);
    assert_eq!(cli(&["run", "/nonexistent/config"]).0, EXIT_USAGE);
    assert_eq!(cli(&["--help"]).0, EXIT_OK);
}

#[test]
fn run_writes_one_csv_row_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let report = dir.path().join("out.json");
    let events = dir.path().join("events.jsonl");
    let cfg = write_config(
        dir.path(),
        "run.cfg",
        &format!(
            "problem=cosine_mixture\ndim=4\nmethod=oqn\nbudget=120\nseed=7\naudit=full\ncsv={}\nreport={}\nevents={}\n",
            csv.display(),
            report.display(),
            events.display()
        ),
    );
    let (code, out, err) = cli(&["run", &cfg]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    let rows = read_csv(&csv).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let k = json["params"]["k_eps"].as_u64().unwrap() as usize;
    assert_eq!(rows.len(), k);
    assert_eq!(rows.last().unwrap().cum_gradients, json["gradients"].as_u64().unwrap());
    assert!(json["run"]["audit"]["regret"]["rhs"].as_f64().unwrap() > 0.0);
    let m = json["params"]["m_total"].as_u64().unwrap() as usize;
    assert_eq!(std::fs::read_to_string(&events).unwrap().lines().count(), m);
}

#[test]
fn identical_config_and_seed_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let csv = dir.path().join(format!("a{i}.csv"));
        let report = dir.path().join(format!("a{i}.json"));
        let cfg = write_config(
            dir.path(),
            &format!("a{i}.cfg"),
            &format!(
                "problem=cosine_mixture\ndim=6\nbudget=240\nseed=11\naudit=full\ncsv={}\nreport={}\n",
                csv.display(),
                report.display()
            ),
        );
        assert_eq!(cli(&["run", &cfg]).0, EXIT_OK);
        let mut json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        // the paths differ by construction
        json["config"]["csv"] = serde_json::Value::Null;
        json["config"]["report"] = serde_json::Value::Null;
        outputs.push((std::fs::read(&csv).unwrap(), json.to_string()));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].1, outputs[1].1);
}

#[test]
fn seed_env_overrides_config() {
    let c = RunConfig::parse("problem=quadratic\ndim=2\nbudget=10\nseed=3\n").unwrap();
    std::env::set_var("OQN_SEED", "42");
    let overridden = c.clone().with_env_seed();
    std::env::set_var("OQN_SEED", "not-a-number");
    let bad = c.clone().with_env_seed();
    std::env::remove_var("OQN_SEED");
    assert_eq!(overridden.unwrap().seed, 42);
    assert!(bad.is_err());
    assert_eq!(c.with_env_seed().unwrap().seed, 3);
}

#[test]
fn failed_audit_maps_to_exit_two() {
    let cfg = RunConfig::parse("problem=cosine_mixture\ndim=4\nbudget=60\naudit=episode\n").unwrap();
    let mut rep = execute(&cfg).unwrap();
    assert_eq!(rep.exit_code(), EXIT_OK);
    rep.audit_ok = Some(false);
    assert_eq!(rep.exit_code(), EXIT_AUDIT);
}

#[test]
fn gd_run_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("gd.csv");
    let cfg = write_config(
        dir.path(),
        "gd.cfg",
        &format!("problem=coupled_trig\ndim=5\nmethod=gd\nbudget=50\ncsv={}\n", csv.display()),
    );
    assert_eq!(cli(&["run", &cfg]).0, EXIT_OK);
    assert_eq!(read_csv(&csv).unwrap().len(), 50);

    let bench_csv = dir.path().join("bench.csv");
    let b = write_config(
        dir.path(),
        "bench.cfg",
        &format!(
            "problem=cosine_mixture\ndim=4\nmethods=oqn,og,gd\nbudgets=60,120\nseeds=2\ncsv={}\n",
            bench_csv.display()
        ),
    );
    let (code, out, err) = cli(&["bench", &b]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out.lines().count(), 3);
    assert_eq!(std::fs::read_to_string(&bench_csv).unwrap().lines().count(), 1 + 3 * 2 * 2);
}

#[test]
fn verify_quick_passes() {
    let (code, out, _) = cli(&["verify", "--level", "quick"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}
