use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aicons(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aicons"))
        .args(args)
        .current_dir(dir)
        .env_remove("AICONS_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn simulate_happy_path_writes_outputs_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aicons(
        tmp.path(),
        &[
            "simulate",
            "--engine",
            "aicons",
            "--nodes",
            "10",
            "--rounds",
            "6",
            "--seed",
            "42",
            "--out-dir",
            "run",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "outcomes.csv",
        "contributions.csv",
        "fairness.csv",
        "chain.jsonl",
        "model.bin",
        "manifest.json",
    ] {
        assert!(tmp.path().join("run").join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["pipeline"]["sim"]["rounds"], 6);
    assert_eq!(manifest["pipeline"]["sim"]["engine"], "aicons");
}

#[test]
fn manifest_reproduces_run() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&aicons(
            tmp.path(),
            &[
                "simulate",
                "--engine",
                "pod",
                "--rounds",
                "8",
                "--seed",
                "7",
                "--out-dir",
                "a"
            ]
        )),
        0
    );
    assert_eq!(
        code(&aicons(
            tmp.path(),
            &["--config", "a/manifest.json", "simulate", "--out-dir", "b"]
        )),
        0
    );
    for f in [
        "outcomes.csv",
        "contributions.csv",
        "fairness.csv",
        "chain.jsonl",
    ] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn out_dir_falls_back_to_env() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_aicons"))
        .args(["gen-trace", "--records", "50"])
        .current_dir(tmp.path())
        .env("AICONS_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("from-env/trace.csv").exists());
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&aicons(tmp.path(), &["simulate", "--engine", "unknown"])),
        2
    );
    assert_eq!(code(&aicons(tmp.path(), &["frobnicate"])), 2);
    assert_eq!(
        code(&aicons(tmp.path(), &["simulate", "--no-such-flag"])),
        2
    );
    assert_eq!(code(&aicons(tmp.path(), &["ablate", "--mask", "none"])), 2);
    let o = aicons(tmp.path(), &["--nodes", "1", "simulate"]);
    assert_eq!(code(&o), 2);
    fs::write(tmp.path().join("bad.toml"), "this is = = not toml").unwrap();
    assert_eq!(
        code(&aicons(tmp.path(), &["--config", "bad.toml", "simulate"])),
        2
    );
}

#[test]
fn toml_config_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "[pipeline.sim]\nengine = \"pos\"\nrounds = 4\nseed = 3\n",
    )
    .unwrap();
    let o = aicons(
        tmp.path(),
        &["--config", "run.toml", "simulate", "--out-dir", "t"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let outcomes = fs::read_to_string(tmp.path().join("t/outcomes.csv")).unwrap();
    assert_eq!(outcomes.lines().count(), 5);
    assert!(outcomes.lines().nth(1).unwrap().contains(",pos,"));
}

#[test]
fn tampered_chain_exits_one_and_names_height() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&aicons(
            tmp.path(),
            &[
                "simulate",
                "--engine",
                "pow",
                "--rounds",
                "5",
                "--out-dir",
                "c"
            ]
        )),
        0
    );
    let path = tmp.path().join("c/chain.jsonl");
    let ok = aicons(tmp.path(), &["verify-chain", "c/chain.jsonl"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));

    let mut bytes = fs::read(&path).unwrap();
    let line_starts: Vec<usize> = std::iter::once(0)
        .chain(
            bytes
                .iter()
                .enumerate()
                .filter(|(_, &b)| b == b'\n')
                .map(|(i, _)| i + 1),
        )
        .collect();
    let third = line_starts[3];
    let pos = third
        + bytes[third..]
            .windows(10)
            .position(|w| w == b"\"tx_count\"")
            .unwrap()
        + 11;
    bytes[pos] = if bytes[pos] == b'9' { b'8' } else { b'9' };
    fs::write(&path, &bytes).unwrap();
    let bad = aicons(tmp.path(), &["verify-chain", "c/chain.jsonl"]);
    assert_eq!(code(&bad), 1);
    assert!(
        String::from_utf8_lossy(&bad.stderr).contains("height 3"),
        "{}",
        String::from_utf8_lossy(&bad.stderr)
    );
}

#[test]
fn gen_trace_then_train() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&aicons(
            tmp.path(),
            &[
                "gen-trace",
                "--records",
                "1000",
                "--planted-winner",
                "1",
                "--out-dir",
                "g"
            ]
        )),
        0
    );
    let csv = fs::read_to_string(tmp.path().join("g/trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);
    let o = aicons(
        tmp.path(),
        &[
            "train",
            "--trace",
            "g/trace.csv",
            "--planted-winner",
            "1",
            "--fed-rounds",
            "2",
            "--out-dir",
            "m",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("m/train.json")).unwrap()).unwrap();
    assert!(
        summary["final_accuracy"].as_f64().unwrap() > summary["uniform_baseline"].as_f64().unwrap()
    );
}

#[test]
fn malformed_trace_is_a_domain_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&aicons(
            tmp.path(),
            &["gen-trace", "--records", "100", "--out-dir", "g"]
        )),
        0
    );
    let path = tmp.path().join("g/trace.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut fields: Vec<String> = lines[4].split(',').map(str::to_string).collect();
    fields[2] = "1.5".into();
    lines[4] = fields.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = aicons(
        tmp.path(),
        &["train", "--trace", "g/trace.csv", "--out-dir", "m"],
    );
    assert_eq!(code(&o), 1);
    assert!(
        String::from_utf8_lossy(&o.stderr).contains(":5:"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn ablate_writes_all_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aicons(tmp.path(), &["ablate", "--rounds", "4", "--out-dir", "ab"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("ab/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 10);
}
