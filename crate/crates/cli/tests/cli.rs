use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phntrack"))
}

const SMALL: &str = r#"
schema = 1
seed = 3
trials = 4
snr_db = [15.0]
sigma2_delta = [1e-4]
symbols_per_packet = 2
detectors = ["proposed", "no_tracking"]
[antennas]
nt = 2
nr = 2
"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn complexity_reference_value() {
    let out = bin()
        .args([
            "complexity",
            "--n",
            "64",
            "--nt",
            "2",
            "--nr",
            "2",
            "--t",
            "2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("mult 51516416"), "{text}");
}

#[test]
fn simulate_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let csv = dir.path().join("r.csv");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .args(["--workers", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let records = phntrack::harness::read_csv(&csv).unwrap();
    assert_eq!(records.len(), 2);

    let json = dir.path().join("r.json");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&json)
        .args(["--seed", "99"])
        .status()
        .unwrap();
    assert!(status.success());
    let parsed = phntrack::harness::read_json(&json).unwrap();
    assert_eq!(parsed.metadata.seed, 99);
    assert_eq!(parsed.records.len(), 2);
}

#[test]
fn seed_override_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let status = bin()
            .args([
                "simulate",
                "--format",
                "csv",
                "--seed",
                "5",
                "--workers",
                workers,
                "--config",
            ])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.csv", "1"), run("b.csv", "3"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.toml",
        &SMALL.replace("trials = 4", "trials = 0"),
    );
    let unknown = write(
        dir.path(),
        "unknown.toml",
        &SMALL.replace("seed = 3", "seed = 3\nbogus = 1"),
    );
    for cfg in [bad, unknown, dir.path().join("missing.toml")] {
        let out = dir.path().join("r.csv");
        let status = bin()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(2), "{}", cfg.display());
        assert!(!out.exists());
    }
}

#[test]
fn fit_rd_recovers_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("rate_bps,mse\n");
    for r in [1e5, 2e5, 5e5, 1e6, 2e6, 5e6] {
        text += &format!("{r},{}\n", 4e6 / (r + 2e4) + 3.0);
    }
    let input = write(dir.path(), "rd.csv", &text);
    let out = dir.path().join("fit.json");
    let status = bin()
        .arg("fit-rd")
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!((fit["a"].as_f64().unwrap() - 3.0).abs() < 1e-3);
    assert!((fit["b"].as_f64().unwrap() / 4e6 - 1.0).abs() < 1e-3);
    assert!((fit["z"].as_f64().unwrap() / 2e4 - 1.0).abs() < 1e-3);
}

#[test]
fn bad_arguments_fail() {
    let status = bin()
        .args([
            "complexity",
            "--n",
            "0",
            "--nt",
            "1",
            "--nr",
            "1",
            "--t",
            "1",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = bin().args(["simulate"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
