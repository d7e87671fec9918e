use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expert-skip"))
        .args(args)
        .current_dir(dir)
        .env_remove("EXPERT_SKIP_SEED")
        .env_remove("EXPERT_SKIP_THREADS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = bin(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &Path, layers: usize) {
    ok(dir, &["init-config"]);
    let text = fs::read_to_string(dir.join("config.toml")).unwrap();
    let text = text
        .replace("samples = 1024", "samples = 24")
        .replace("grid_points = 100", "grid_points = 16")
        .replace("num_layers = 4", &format!("num_layers = {layers}"));
    fs::write(dir.join("config.toml"), text).unwrap();
}

fn prepared(layers: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path(), layers);
    ok(dir.path(), &["gen-model"]);
    ok(dir.path(), &["gen-data"]);
    ok(dir.path(), &["calibrate"]);
    dir
}

/// `key value` line from command output.
fn field(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{stdout}"))
        .parse()
        .unwrap()
}

fn summary_row(dir: &Path) -> Vec<String> {
    let text = fs::read_to_string(dir.join("results/summary.csv")).unwrap();
    text.lines().nth(1).unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn generators_print_hashes_and_refuse_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d, 2);
    let first = ok(d, &["gen-model"]);
    assert!(first.contains("sha256 "), "{first}");
    let out = bin(d, &["gen-model"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
    assert_eq!(ok(d, &["gen-model", "--force"]), first);

    let data = ok(d, &["gen-data"]);
    assert!(data.contains("samples 24"), "{data}");
    assert!(!bin(d, &["gen-data"]).status.success());
    assert!(!bin(d, &["init-config"]).status.success());
}

#[test]
fn missing_inputs_fail_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["gen-model", "--config", "nope.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.toml"));
    small_config(dir.path(), 2);
    let out = bin(dir.path(), &["calibrate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.bin"));
}

#[test]
fn single_layer_profile_is_one() {
    let dir = prepared(1);
    let out = ok(dir.path(), &["calibrate"]);
    let row = out.lines().find(|l| l.trim_start().starts_with('0')).unwrap();
    assert_eq!(row.split_whitespace().nth(2), Some("1.000000"), "{out}");
}

#[test]
fn calibrate_is_idempotent() {
    let dir = prepared(3);
    let a = fs::read(dir.path().join("factors.toml")).unwrap();
    ok(dir.path(), &["calibrate"]);
    assert_eq!(fs::read(dir.path().join("factors.toml")).unwrap(), a);
}

#[test]
fn search_meets_target_and_agrees_with_naive() {
    let dir = prepared(4);
    let out = ok(dir.path(), &["search", "--rho", "0.80", "-D", "16", "--naive"]);
    assert!(out.contains("naive agrees: true"), "{out}");
    let row = summary_row(dir.path());
    assert_eq!(row[0], "OK");
    let g: f64 = row[6].parse().unwrap();
    assert!(g >= 0.80, "g = {g}");
    let agreement = fs::read_to_string(dir.path().join("results/agreement.csv")).unwrap();
    let header: Vec<&str> = agreement.lines().next().unwrap().split(',').collect();
    let values: Vec<&str> = agreement.lines().nth(1).unwrap().split(',').collect();
    let ratio: f64 = values[header.iter().position(|h| *h == "f_call_ratio").unwrap()].parse().unwrap();
    assert!(ratio >= 16.0 / 3.0, "ratio {ratio}");
    assert!(dir.path().join("results/frontier.csv").exists());

    for rho in ["0.48", "0.65", "0.85"] {
        ok(dir.path(), &["search", "--rho", rho, "--D", "16"]);
        let g: f64 = summary_row(dir.path())[6].parse().unwrap();
        assert!(g >= rho.parse::<f64>().unwrap());
    }
}

#[test]
fn infeasible_target_exits_zero() {
    let dir = prepared(1);
    // With D = 2 the largest threshold is about 0.88, so top experts stay.
    let out = ok(dir.path(), &["search", "--rho", "0.999", "-D", "2"]);
    assert!(out.contains("INFEASIBLE"), "{out}");
    assert_eq!(summary_row(dir.path())[0], "INFEASIBLE");
}

#[test]
fn evaluate_skip_nothing_is_free() {
    let dir = prepared(2);
    let out = ok(dir.path(), &["evaluate", "--tau-text", "0", "--tau-vision", "0", "--profile", "p.csv"]);
    assert_eq!(field(&out, "f"), 0.0);
    assert_eq!(field(&out, "g"), 0.0);
    assert!(out.contains("expert FLOPs saved 0 of"), "{out}");
    let profile = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(profile.starts_with("layer,modality,routed,skipped,ratio\n"));
    assert!(profile.lines().all(|l| l.starts_with("layer") || l.ends_with(",0")), "{profile}");

    let out = ok(dir.path(), &["evaluate", "--k-prime", "1"]);
    assert_eq!(field(&out, "g"), 0.5);
}

#[test]
fn factors_must_match_model() {
    let dir = prepared(2);
    ok(dir.path(), &["gen-model", "--force", "--seed", "7"]);
    let out = bin(dir.path(), &["evaluate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rerun calibrate"));
}

#[test]
fn seed_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path(), 2);
    let base = ok(dir.path(), &["gen-model", "-o", "a.bin"]);
    let out = Command::new(env!("CARGO_BIN_EXE_expert-skip"))
        .args(["gen-model", "-o", "b.bin"])
        .current_dir(dir.path())
        .env("EXPERT_SKIP_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success());
    let hash = |s: &str| s.split_whitespace().last().unwrap().to_string();
    assert_ne!(hash(&base), hash(&String::from_utf8_lossy(&out.stdout)));
}

#[test]
fn sweep_and_bench_write_csv() {
    let dir = prepared(2);
    ok(dir.path(), &["calibrate-beta", "--rho", "0.4"]);
    let out = ok(dir.path(), &["evaluate", "--beta", "beta.toml"]);
    assert!(field(&out, "g") <= 0.4);

    ok(dir.path(), &["sweep", "--rho", "0.48,0.8", "-D", "8"]);
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 3);
    for line in sweep.lines().skip(1).filter(|l| l.contains(",dmt,")) {
        assert!(line.contains(",true,"), "{line}");
    }

    let out = ok(dir.path(), &["--threads", "1", "bench", "-D", "8", "--rho", "0.5"]);
    assert!(out.contains("optima agree: true"), "{out}");
    assert!(fs::read_to_string(dir.path().join("bench.csv")).unwrap().starts_with("D,N,rho,agree"));
}
