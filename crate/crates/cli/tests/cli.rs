use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn granular(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_granular"));
    cmd.args(args).env_remove("GRANULAR_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("failed to spawn granular")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn assert_schema(value: &serde_json::Value) {
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../../../docs/summary.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

const SMALL: &str = r#"
scenario = "small"
n = 500
dt = 0.05
horizon = 2.0
restitution_e = 0.8
record_interval = 0.5
dissipation_every = 2
orlicz_every = 2
"#;

#[test]
fn elastic_scenario_keeps_energy() {
    let dir = TempDir::new().unwrap();
    let out = granular(&["--quiet", "run", "--scenario", "elastic-maxwellian", "--out", dir.path().to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,E,m_3/2,m_2,m_3,collisions,dEdt_measured,D_estimate");
    let energies: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(energies.len() > 5);
    assert!(energies.iter().all(|e| (e - energies[0]).abs() <= 1e-12 * energies[0]));
    let s = summary(dir.path());
    assert!(s["haff_fit"].is_null());
    assert_schema(&s);
    assert!(fs::read_to_string(dir.path().join("moments.csv")).unwrap().starts_with("t,p,m_p,std_error,bound\n"));
}

#[test]
fn haff_scenario_fills_the_fit() {
    let dir = TempDir::new().unwrap();
    let out = granular(&["--quiet", "run", "--scenario", "haff-e09", "--out", dir.path().to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let s = summary(dir.path());
    assert_schema(&s);
    let kappa = s["haff_fit"]["kappa"].as_f64().unwrap();
    assert!((1.9..=2.1).contains(&kappa), "kappa {kappa}");
    assert_eq!(s["verdict"]["verdict"], "infinite");
    assert_eq!(s["gronwall"]["c_k_source"], "assembled");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let o = dir.path().join(format!("run{k}"));
        let out = granular(&["--quiet", "run", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap()], &[]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        outputs.push(o);
    }
    for f in ["trajectory.csv", "moments.csv", "summary.json"] {
        assert_eq!(fs::read(outputs[0].join(f)).unwrap(), fs::read(outputs[1].join(f)).unwrap(), "{f}");
    }
    assert_schema(&summary(&outputs[0]));
}

#[test]
fn seed_precedence_reaches_the_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, format!("{SMALL}seed = 3\n")).unwrap();
    let seed_of = |args: &[&str], env: &[(&str, &str)]| {
        let o = dir.path().join("out");
        let mut all = vec!["--quiet", "run", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap()];
        all.extend_from_slice(args);
        let out = granular(&all, env);
        assert!(out.status.success(), "{}", text(&out.stderr));
        let s = summary(&o);
        assert_eq!(s["seed"], s["config"]["seed"]);
        s["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&[], &[]), 3);
    assert_eq!(seed_of(&[], &[("GRANULAR_SEED", "17")]), 17);
    assert_eq!(seed_of(&["--seed", "23"], &[("GRANULAR_SEED", "17")]), 23);
}

#[test]
fn malformed_config_exits_2_with_key() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "n = 100\nbogus_key = 1\n").unwrap();
    let out = granular(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("bogus_key") && err.contains("line 2"), "{err}");

    fs::write(&cfg, "dt = -1.0\n").unwrap();
    let out = granular(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("dt"));

    let out = granular(&["run", "--scenario", "no-such-scenario"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_collision_identities_passes() {
    let out = granular(&["verify", "collision-identities"], &[]);
    let stdout = text(&out.stdout);
    assert!(out.status.success(), "{stdout}{}", text(&out.stderr));
    for id in [" 1 ", " 2 ", " 4 ", " 5 ", " 6 "] {
        assert!(stdout.lines().any(|l| l.starts_with("[PASS") && l.contains(id)), "{stdout}");
    }
}

#[test]
fn injected_fault_fails_with_counterexample() {
    let out = granular(&["verify", "all", "--inject-fault", "deltav-sign", "--fail-fast"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = text(&out.stdout);
    let line = stdout.lines().find(|l| l.starts_with("counterexample: ")).expect("no counterexample");
    let ce: serde_json::Value = serde_json::from_str(line.trim_start_matches("counterexample: ")).unwrap();
    assert_eq!(ce["criterion"], 1);
    assert!(ce["v"].is_array() && ce["z"].is_array());
    // Fail-fast stops before the expensive criteria.
    assert!(!stdout.contains("Haff"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    assert_eq!(granular(&["verify", "everything"], &[]).status.code(), Some(2));
}

#[test]
fn classify_and_fit() {
    let out = granular(&["classify", "--scenario", "haff-e09"], &[]);
    assert!(out.status.success());
    assert_eq!(text(&out.stdout).trim(), "infinite (alphaj)");

    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("sticky.toml");
    fs::write(&cfg, "restitution = \"sticky\"\nintensity = \"power\"\nintensity_k = -1.0\n").unwrap();
    let out = granular(&["classify", "--config", cfg.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let line = text(&out.stdout);
    assert!(line.starts_with("finite (deltage-1/2) bound = 2.8284271247461"), "{line}");

    // Exact Haff data: E = 2 (1 + t/5)^{-2}.
    let csv = dir.path().join("traj.csv");
    let mut body = String::from("t,E\n");
    for k in 0..40 {
        let t = k as f64;
        body.push_str(&format!("{t},{}\n", 2.0 * (1.0 + t / 5.0).powi(-2)));
    }
    fs::write(&csv, body).unwrap();
    let out = granular(&["fit", csv.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    let get = |key: &str| -> f64 {
        stdout.lines().find_map(|l| l.strip_prefix(&format!("{key} = "))).unwrap().parse().unwrap()
    };
    assert!((get("kappa") - 2.0).abs() < 1e-6 && (get("tau") - 5.0).abs() < 1e-5 && (get("e0") - 2.0).abs() < 1e-6);

    fs::write(&csv, "time,energy\n0,1\n").unwrap();
    assert_eq!(granular(&["fit", csv.to_str().unwrap()], &[]).status.code(), Some(2));
}
