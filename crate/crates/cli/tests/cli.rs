//! End-to-end behaviour of the `bridgekernel` binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn run(config: &Path, extra: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_bridgekernel"))
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn json_of(r: &Run) -> Value {
    serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}\n{}", r.stdout, r.stderr))
}

#[test]
fn free_kernel_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "free.json",
        &json!({"schema_version": 1, "seed": 1, "mc": {"n_samples": 100, "n_steps": 8},
                "command": {"name": "kernel", "x": [0.0], "y": [0.0], "t": 1.0}}),
    );
    let r = run(&cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc = json_of(&r);
    let mean = doc["result"]["mean_re"].as_f64().unwrap();
    assert!((mean - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    assert!((mean - 0.398942).abs() < 5e-7);
    assert_eq!(doc["result"]["stderr"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["pass"], Value::Null);
    assert_eq!(doc["command"], "kernel");
}

#[test]
fn upsilon_at_zero_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "u.json", &json!({"schema_version": 1, "command": {"name": "upsilon", "xi": [0.0], "dim": 2}}));
    let r = run(&cfg, &[]);
    assert_eq!(r.code, 0);
    assert_eq!(json_of(&r)["result"]["upsilon"][0].as_f64().unwrap(), 1.0);
}

#[test]
fn oracle_compare_harmonic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "o.json",
        &json!({"schema_version": 1, "seed": 9, "mc": {"n_samples": 20000, "n_steps": 128},
                "grid": {"dim": 1, "n_per_dim": 121, "length": 12.1},
                "command": {"name": "oracle-compare", "x": [0.0], "y": [0.0], "t": 1.0, "v": {"kind": "harmonic", "omega": [1.0]}}}),
    );
    let r = run(&cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc = json_of(&r);
    assert_eq!(doc["pass"], true);
    for key in ["mc_re", "grid_re"] {
        let v = doc["result"][key].as_f64().unwrap();
        assert!((v - 0.3679).abs() < 0.003, "{key} = {v}");
    }
}

#[test]
fn schema_violations_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "a.json", &json!({"schema_version": 1, "command": {"name": "upsilon", "xi": [0.0], "dim": 1, "bogus": 1}}));
    let r = run(&unknown, &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("schema violation"));

    let no_mc = write_config(dir.path(), "b.json", &json!({"schema_version": 1, "command": {"name": "kernel", "x": [0.0], "y": [0.0], "t": 1.0}}));
    assert_eq!(run(&no_mc, &[]).code, 2);

    let bad_time = write_config(
        dir.path(),
        "c.json",
        &json!({"schema_version": 1, "mc": {"n_samples": 10, "n_steps": 4}, "command": {"name": "kernel", "x": [0.0], "y": [0.0], "t": -1.0}}),
    );
    assert_eq!(run(&bad_time, &[]).code, 2);

    assert_eq!(run(&dir.path().join("missing.json"), &[]).code, 2);
}

#[test]
fn numerical_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "overflow.json",
        &json!({"schema_version": 1, "seed": 3, "mc": {"n_samples": 10, "n_steps": 4},
                "command": {"name": "kernel", "x": [0.0], "y": [0.0], "t": 1.0, "v": {"kind": "constant", "value": -1000.0}}}),
    );
    let r = run(&cfg, &[]);
    assert_eq!(r.code, 3);
    let diag: Value = serde_json::from_str(r.stderr.trim()).unwrap();
    assert!(diag["error"].as_str().unwrap().contains("seed 3"));
}

#[test]
fn failed_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sg.json",
        &json!({"schema_version": 1, "mc": {"n_samples": 10, "n_steps": 4},
                "command": {"name": "semigroup", "x": [0.0], "z": [0.5], "t": 0.5, "t_prime": 0.5,
                            "quad_box": {"lower": [-6.0], "upper": [6.0]}, "quad_n": 41, "max_budget_fraction": 0.0}}),
    );
    let r = run(&cfg, &[]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert_eq!(json_of(&r)["pass"], false);
}

#[test]
fn ids_csv_has_fixed_columns_and_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ids.json",
        &json!({"schema_version": 1, "seed": 2, "grid": {"dim": 1, "n_per_dim": 16, "length": 8.0},
                "command": {"name": "ids", "field": {"kind": "squared_exponential", "variance": 0.5, "length": 1.0},
                            "gamma_half_width": 2.0, "n_realizations": 4, "energies": {"lo": -2.0, "hi": 10.0, "n": 25}}}),
    );
    let out = dir.path().join("ids.csv");
    let r = run(&cfg, &["--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let config_line = text.lines().find_map(|l| l.strip_prefix("# config: ")).unwrap();
    let embedded: Value = serde_json::from_str(config_line).unwrap();
    assert_eq!(embedded["command"]["name"], "ids");
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "E,N_trace,N_diag,stderr");
    assert_eq!(data.len(), 26);
    let n_trace: Vec<f64> = data[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(n_trace.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn embedded_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "h.json",
        &json!({"schema_version": 1, "seed": 17, "mc": {"n_samples": 3000, "n_steps": 32},
                "command": {"name": "hermiticity", "x": [0.2, 0.0], "y": [-0.3, 0.4], "t": 1.0,
                            "a": {"kind": "constant_field", "b": [[0.0, 1.0], [-1.0, 0.0]]}}}),
    );
    let first = json_of(&run(&cfg, &["--seed", "99"]));
    assert_eq!(first["provenance"]["seed"], 99);
    assert_eq!(first["config"]["seed"], 99);
    let again = write_config(dir.path(), "again.json", &first["config"]);
    let second = json_of(&run(&again, &[]));
    assert_eq!(first["result"], second["result"]);
    assert_eq!(first["provenance"]["config_sha256"], second["provenance"]["config_sha256"]);
    let other_seed = json_of(&run(&cfg, &[]));
    assert_ne!(first["result"], other_seed["result"]);
}

#[test]
fn every_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mc = json!({"n_samples": 200, "n_steps": 16});
    let field = json!({"kind": "squared_exponential", "variance": 0.3, "length": 1.0});
    let commands = vec![
        json!({"name": "bound-envelope", "t": 1.0, "delta": 0.5, "pairs": [[[0.0], [0.0]], [[1.0], [0.5]]]}),
        json!({"name": "gaussian-identity", "x": [0.0], "y": [0.0], "t": 1.0, "field": field, "n_field_samples": 100}),
        json!({"name": "averaged-kernel", "x": [0.0], "y": [0.0], "t": 1.0, "field": field,
               "field_grid": {"half_width": 3.0, "spacing": 0.5}, "n_fields": 4, "samples_per_field": 50}),
        json!({"name": "averaged-bounds", "t": 1.0, "field": field, "pairs": [[[0.0], [0.5]]]}),
        json!({"name": "truncation-rate", "x": [0.0], "y": [0.0], "t": 1.0,
               "v": {"kind": "power_law", "sign": -1.0, "exponent": 1.9, "coefficient": 0.1}, "radii": [2.0, 4.0]}),
        json!({"name": "laplace", "field": field, "gamma_half_width": 2.0, "n_realizations": 3, "t_list": [1.0], "n_bins": 200}),
        json!({"name": "kato-kappa", "v": {"kind": "harmonic", "omega": [1.0]}, "t": 0.5, "n_s": 8, "n_mc": 100, "probes": [[0.0], [1.0]]}),
    ];
    for (i, command) in commands.into_iter().enumerate() {
        let name = command["name"].as_str().unwrap().to_string();
        let cfg = write_config(
            dir.path(),
            &format!("{i}.json"),
            &json!({"schema_version": 1, "seed": 5, "mc": mc, "grid": {"dim": 1, "n_per_dim": 16, "length": 8.0}, "command": command}),
        );
        let r = run(&cfg, &["--format", "csv"]);
        assert!(r.code == 0 || r.code == 1, "{name}: exit {} {}", r.code, r.stderr);
        assert!(r.stdout.contains(&format!("# command: {name}")));
    }
}
