use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn toricsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toricsim")).args(args).output().expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_output_does_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "dklp.toml",
        "code = \"4d\"\ndecoder = \"dklp\"\nL = [3, 4]\np = 0.01\ntrials = 4\nseed = 11\nmax_cycles = 50\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(toricsim(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap(), "--workers", "4"]));
    ok(toricsim(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap(), "--workers", "1"]));
    for f in ["results.csv", "trials.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between worker counts");
    }
    let results = std::fs::read_to_string(a.join("results.csv")).unwrap();
    let header = results.lines().next().unwrap();
    assert_eq!(
        header,
        "code,decoder,L,p,q,Q,U,f_c,f_n,strategy,b,tau,l,m,repeats_per_plane,trials,mean_T,stderr_T,n_censored,n_res,n_log,n_restored"
    );
    assert_eq!(results.lines().count(), 3);
    let trials = std::fs::read_to_string(a.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 8);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "h.toml",
        "code = \"2d\"\nL = 3\np = 0.02\ntrials = 6\nseed = 1\nmax_cycles = 10000\n",
    );
    let runs: Vec<String> = ["1", "2"]
        .iter()
        .map(|s| {
            let out = dir.path().join(format!("s{s}"));
            ok(toricsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", s]));
            let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
            assert_eq!(m["seed"].as_u64().unwrap().to_string(), *s);
            std::fs::read_to_string(out.join("trials.csv")).unwrap()
        })
        .collect();
    assert_ne!(runs[0], runs[1]);
}

#[test]
fn trace_of_one_injected_error_has_one_flip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", "code = \"2d\"\nL = 3\np = 0\nq = 0\ntrials = 1\nmax_cycles = 6\n");
    let out = dir.path().join("trace");
    ok(toricsim(&["trace", "--config", &cfg, "--out", out.to_str().unwrap(), "--inject", "7"]));
    let text = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let events: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let kinds: Vec<&str> = events.iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds.iter().filter(|k| **k == "flip").count(), 1);
    assert_eq!(kinds.first(), Some(&"noise_applied"));
    assert_eq!(kinds.last(), Some(&"trial_end"));
    let tests: Vec<&Value> = events.iter().filter(|e| e["kind"] == "failure_test").collect();
    assert_eq!(tests.len(), 6);
    assert!(tests.iter().all(|e| e["failed"] == false));
    assert_eq!(events.last().unwrap()["final_error"], serde_json::json!([]));
}

#[test]
fn trace_replay_reproduces_the_final_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", "code = \"2d\"\nL = 9\np = 0.01\nq = 0.01\ntrials = 1\nseed = 4\nmax_cycles = 40\n");
    let out = dir.path().join("trace");
    ok(toricsim(&["trace", "--config", &cfg, "--out", out.to_str().unwrap(), "--trial", "3"]));
    let text = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let mut err = BTreeSet::new();
    let mut end = None;
    for line in text.lines() {
        let e: Value = serde_json::from_str(line).unwrap();
        match e["kind"].as_str().unwrap() {
            "noise_applied" | "flip" | "correction_applied" => {
                for c in e["cells"].as_array().unwrap() {
                    let c = c.as_u64().unwrap();
                    if !err.remove(&c) {
                        err.insert(c);
                    }
                }
            }
            "trial_end" => end = Some(e),
            _ => {}
        }
    }
    let end = end.expect("trace ends with trial_end");
    let fin: BTreeSet<u64> = end["final_error"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(err, fin);
}

#[test]
fn fit_of_an_infinite_tau_sweep_reports_p_c() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "inf.toml",
        "code = \"2d\"\nL = [3, 9]\np = [0.02, 0.03]\nq = 0\ntau = \"inf\"\ntrials = 40\nseed = 5\n",
    );
    let sim = dir.path().join("sim");
    ok(toricsim(&["simulate", "--config", &cfg, "--out", sim.to_str().unwrap()]));
    let fit = dir.path().join("fit");
    let out = ok(toricsim(&[
        "fit",
        "--input",
        sim.join("results.csv").to_str().unwrap(),
        "--out",
        fit.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("p_c = 1/B"), "{stdout}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(fit.join("fit.json")).unwrap()).unwrap();
    assert_eq!(report["model"], "eq1");
    let (b, p_c) = (report["b"].as_f64().unwrap(), report["p_c"].as_f64().unwrap());
    assert!((p_c * b - 1.0).abs() < 1e-12);
    assert!(p_c > 0.0 && p_c < 1.0);
}

#[test]
fn invalid_configs_exit_nonzero_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (text, key) in [
        ("code = \"2d\"\nL = 10\nQ = 3\np = 0.001\ntrials = 1\n", "`L`"),
        ("code = \"2d\"\nL = 9\np = 1.5\ntrials = 1\n", "`p`"),
        ("code = \"2d\"\nL = 9\np = 0.01\ntrials = 1\nwidth = 2\n", "width"),
        ("code = \"4d\"\ndecoder = \"hastings\"\nL = 8\nl = 3\nm = 0\np = 0.01\ntrials = 1\n", "`m`"),
    ] {
        let cfg = write(dir.path(), "bad.toml", text);
        let out = toricsim(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        assert!(!out.status.success());
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(key), "expected {key} in: {stderr}");
    }
    let out = toricsim(&["simulate", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn hastings_manifest_reports_sixteen_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "h.toml",
        "code = \"4d\"\ndecoder = \"hastings\"\nL = 8\nl = 3\nm = 5\np = 0.0\nq = 0.0\ntrials = 1\nmax_cycles = 1\n",
    );
    let out = dir.path().join("o");
    let run = ok(toricsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]));
    assert!(String::from_utf8_lossy(&run.stderr).contains("16 boxes"));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["points"][0]["boxes"], 16);
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["outputs"], serde_json::json!(["results.csv", "trials.csv"]));
    assert!(m["started_at"].as_str().unwrap() <= m["finished_at"].as_str().unwrap());
}

#[test]
fn trace_rejects_multi_point_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.toml", "code = \"2d\"\nL = [3, 9]\np = 0.01\ntrials = 1\n");
    let out = toricsim(&["trace", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("single (L, p) point"));
}
