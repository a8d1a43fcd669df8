use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_branch-lln");

const SMALL_BM: &str = "
experiment = simulate
model = killed_drifted_bm
c = 1
offspring = 2:1
r = 1.5
x0 = 1
t_end = 2
snapshot_times = 1, 2
n_rep = 200
seed = 7
";

struct Run {
    code: i32,
    stderr: String,
    csv: Option<String>,
    json: Option<String>,
}

impl Run {
    fn summary(&self) -> Value {
        serde_json::from_str(self.json.as_deref().expect("json written")).unwrap()
    }
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_with(config: &Path, out: &Path, extra: &[&str], env: Option<(&str, &str)>) -> Run {
    let mut cmd = Command::new(BIN);
    cmd.arg("run").arg(config).arg("--out").arg(out).args(extra).env("RUST_LOG", "warn");
    cmd.env_remove("BRANCH_LLN_WORKERS");
    if let Some((k, v)) = env {
        cmd.env(k, v);
    }
    let Output { status, stderr, .. } = cmd.output().unwrap();
    Run {
        code: status.code().unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
        csv: fs::read_to_string(out).ok(),
        json: fs::read_to_string(out.with_extension("json")).ok(),
    }
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Run {
    run_with(config, out, extra, None)
}

#[test]
fn subcritical_offspring_exits_2_citing_i1() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.conf", &SMALL_BM.replace("offspring = 2:1", "offspring = 0:0.5, 2:0.5"));
    let r = run(&cfg, &dir.path().join("bad.csv"), &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("assumption I1"), "{}", r.stderr);
    assert!(r.csv.is_none());
}

#[test]
fn asymptotic_experiment_rejects_slow_branching() {
    let dir = TempDir::new().unwrap();
    let text = "experiment = qsd\nmodel = killed_recurrent_ou\nlambda = 1\noffspring = 2:1\nr = 1\nx0 = 1\nt_end = 2\n";
    let r = run(&write_config(dir.path(), "i2.conf", text), &dir.path().join("i2.csv"), &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("I2"), "{}", r.stderr);
}

#[test]
fn unknown_keys_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "typo.conf", &format!("{SMALL_BM}\nn_reps = 5\n"));
    let r = run(&cfg, &dir.path().join("typo.csv"), &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("n_reps"), "{}", r.stderr);
}

#[test]
fn missing_interval_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "lln.conf", &SMALL_BM.replace("simulate", "lln"));
    let r = run(&cfg, &dir.path().join("lln.csv"), &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("'b'"), "{}", r.stderr);
}

#[test]
fn phi_for_constant_eigenfunction_is_two() {
    let dir = TempDir::new().unwrap();
    let text = "experiment = phi\nmodel = ergodic_ctmc\nq = -1 1; 2 -2\noffspring = 2:1\nr = 1\nx0 = 1\nt_end = 0\nn_rep = 0\n";
    let r = run(&write_config(dir.path(), "phi.conf", text), &dir.path().join("phi.csv"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let phi = &r.summary()["results"]["phi"];
    assert_eq!(phi["diverged"], Value::Bool(false));
    assert!((phi["value"].as_f64().unwrap() - 2.0).abs() < 1e-8, "{phi}");
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bm.conf", SMALL_BM);
    let a = run(&cfg, &dir.path().join("a.csv"), &["--workers", "1"]);
    let b = run(&cfg, &dir.path().join("b.csv"), &["--workers", "3"]);
    let c = run_with(&cfg, &dir.path().join("c.csv"), &[], Some(("BRANCH_LLN_WORKERS", "2")));
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.csv, b.csv);
    assert_eq!(a.json, b.json);
    assert_eq!(a.csv, c.csv);
    assert_eq!(a.json, c.json);
    assert!(a.csv.unwrap().starts_with("replica_id,t,live,absorbed,dead,births,D_t,overflowed\n"));
}

#[test]
fn seed_override_is_echoed_and_changes_results() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bm.conf", SMALL_BM);
    let a = run(&cfg, &dir.path().join("a.csv"), &[]);
    let b = run(&cfg, &dir.path().join("b.csv"), &["--seed", "8"]);
    assert_eq!(b.summary()["config"]["seed"], Value::from(8u64));
    assert_eq!(b.summary()["seed"], Value::from(8u64));
    assert_ne!(a.csv, b.csv);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bm.conf", SMALL_BM);
    let first = run(&cfg, &dir.path().join("first.csv"), &[]);
    let echo = first.summary()["config"].to_string();
    let again = run(&write_config(dir.path(), "echo.json", &echo), &dir.path().join("second.csv"), &[]);
    assert_eq!(again.code, 0, "{}", again.stderr);
    assert_eq!(first.csv, again.csv);
    assert_eq!(first.json, again.json);
}

#[test]
fn empty_replica_set_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "empty.conf", &SMALL_BM.replace("n_rep = 200", "n_rep = 0"));
    let r = run(&cfg, &dir.path().join("empty.csv"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.csv.as_deref(), Some("replica_id,t,live,absorbed,dead,births,D_t,overflowed\n"));
    let s = r.summary();
    assert_eq!(s["replicas"], Value::from(0));
    assert_eq!(s["results"]["snapshots"][0]["d"]["n"], Value::from(0));
    assert_eq!(s["results"]["snapshots"][0]["d"]["mean"], Value::Null);
}

#[test]
fn qsd_and_lln_have_documented_columns() {
    let dir = TempDir::new().unwrap();
    let qsd = SMALL_BM.replace("simulate", "qsd").replace("n_rep = 200", "n_rep = 20");
    let r = run(&write_config(dir.path(), "qsd.conf", &qsd), &dir.path().join("qsd.csv"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.csv.unwrap().starts_with("replica_id,particle_index,position,weight\n"));
    let lln = format!("{}\nb = 0, 1\nb_prime = 1, inf\n", SMALL_BM.replace("simulate", "lln"));
    let r = run(&write_config(dir.path(), "lln.conf", &lln), &dir.path().join("lln.csv"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = r.csv.unwrap();
    assert!(csv.starts_with("replica_id,t,count_B,count_Bprime,D_t,W_t\n"));
    assert_eq!(csv.lines().count(), 1 + 200 * 2);
}

#[test]
fn json_config_is_accepted() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"experiment": "phi", "model": "killed_drifted_bm", "c": 1, "offspring": {"2": 1}, "r": 0.8, "x0": 1, "t_end": 0, "n_rep": 0}"#;
    let r = run(&write_config(dir.path(), "phi.json", text), &dir.path().join("phi.csv"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.summary()["results"]["phi"]["diverged"], Value::Bool(true));
    assert_eq!(r.summary()["results"]["phi"]["value"], Value::Null);
}

#[test]
fn majority_overflow_exits_4_after_writing() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "tiny.conf", &format!("{SMALL_BM}\nmax_population = 1\n"));
    let r = run(&cfg, &dir.path().join("tiny.csv"), &[]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert!(r.csv.is_some());
    assert!(r.summary()["overflowed"].as_u64().unwrap() * 2 > 200);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bm.conf", SMALL_BM);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let r = run(&cfg, &blocker.join("out.csv"), &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
}

#[test]
fn missing_config_exits_3() {
    let dir = TempDir::new().unwrap();
    let r = run(&dir.path().join("absent.conf"), &dir.path().join("x.csv"), &[]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("absent.conf"), "{}", r.stderr);
}

#[test]
fn zero_workers_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bm.conf", SMALL_BM);
    let r = run(&cfg, &dir.path().join("w.csv"), &["--workers", "0"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn every_preset_parses() {
    let presets = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    let mut n = 0;
    for entry in fs::read_dir(presets).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let cfg = branchlln_cli::ExperimentConfig::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        branchlln_cli::experiments::prepare(cfg, 1).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 12);
}
