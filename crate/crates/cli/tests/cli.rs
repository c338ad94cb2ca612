use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sara_core::io::sha256_file;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_sara");

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic.toml")
}

fn synthetic(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/synthetic").join(name)
}

fn sara(run_dir: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.arg("--config").arg(fixture_config()).arg("--run-dir").arg(run_dir).args(args);
    cmd.env_remove("SARA_LLM_API_KEY");
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// sha256 of every file under `root` except manifests and the response cache.
fn tree_hashes(root: &Path) -> BTreeMap<PathBuf, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            let rel = p.strip_prefix(root).unwrap().to_path_buf();
            if rel.starts_with("manifests") || rel.starts_with("cache") {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(rel, sha256_file(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn refine_to_s2_writes_stage_file_with_monotone_counts() {
    let dir = tempfile::tempdir().unwrap();
    ok(&sara(dir.path(), &["refine", "--to", "s2"]));
    assert!(dir.path().join("stages/s2.jsonl").is_file());
    assert!(!dir.path().join("stages/s3.jsonl").exists());
    let mut last = usize::MAX;
    for stage in ["s0", "s1", "s2"] {
        let r = json(&dir.path().join(format!("stages/report_{stage}.json")));
        let (i, o) = (r["input_count"].as_u64().unwrap() as usize, r["output_count"].as_u64().unwrap() as usize);
        assert!(o <= i && i <= last, "{stage}: {i} -> {o}");
        last = o;
    }
    let m = json(&dir.path().join("manifests/refine.json"));
    assert_eq!(m["command"]["to"], "s2");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 3);
}

#[test]
fn evaluate_scores_against_gold_file() {
    let dir = tempfile::tempdir().unwrap();
    ok(&sara(dir.path(), &["report"]));
    let assignments = std::fs::read_to_string(dir.path().join("assignments.csv")).unwrap();
    let mut gold = String::from("review_id,topic\n");
    for (i, line) in assignments.lines().skip(1).take(100).enumerate() {
        let (id, topic) = line.split_once(',').unwrap();
        let topic = if i < 9 { "Not A Topic" } else { topic };
        gold.push_str(&format!("{id},{topic}\n"));
    }
    let gold_path = dir.path().join("gold.csv");
    std::fs::write(&gold_path, gold).unwrap();
    let stdout = ok(&sara(dir.path(), &["--gold", gold_path.to_str().unwrap(), "evaluate"]));
    assert!(stdout.contains("accuracy 91.0% over 100 items"), "{stdout}");
    let report = json(&dir.path().join("evaluation/accuracy.json"));
    assert_eq!(report["n"], 100);
    assert_eq!(report["correct"], 91);
}

#[test]
fn metrics_table_2_prints_average_row() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&sara(dir.path(), &["metrics", "--table", "2"]));
    assert_eq!(stdout.trim(), "Average 4.2/2.8/59,647/48%/5");
    let d = json(&dir.path().join("metrics/table_average.json"));
    assert_eq!(d["display"]["grc"], "59,647");
}

#[test]
fn replies_table_9_reports_both_aggregations() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&sara(dir.path(), &["replies", "--table", "9"]));
    assert_eq!(stdout.trim(), "reply ratio 20% (pooled 17%), delay 10.2 days");
}

#[test]
fn replay_with_warm_cache_is_byte_identical_and_offline() {
    let dir = tempfile::tempdir().unwrap();
    ok(&sara(dir.path(), &["report"]));
    let first = tree_hashes(dir.path());
    let original = json(&dir.path().join("manifests/report.json"));
    assert!(original["gate"]["backend_calls"].as_u64().unwrap() > 0);
    let manifest = dir.path().join("manifests/report.json");
    let out = Command::new(BIN).arg("replay").arg(&manifest).output().unwrap();
    let stdout = ok(&out);
    assert!(stdout.starts_with("replayed report:"), "{stdout}");
    assert_eq!(first, tree_hashes(dir.path()));
    let replay = json(&dir.path().join("manifests/replay.json"));
    assert_eq!(replay["gate"]["backend_calls"], 0);
    assert_eq!(replay["outputs"], original["outputs"]);
}

#[test]
fn cold_runs_in_separate_directories_agree() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&sara(a.path(), &["report"]));
    ok(&sara(b.path(), &["report"]));
    let (ha, hb) = (tree_hashes(a.path()), tree_hashes(b.path()));
    assert!(ha.len() > 30);
    assert_eq!(ha, hb);
}

#[test]
fn step_by_step_matches_one_shot_report() {
    let steps = tempfile::tempdir().unwrap();
    for cmd in [&["refine"][..], &["sample"], &["extract-topics"], &["assign-topics"], &["metrics"], &["trends"]] {
        ok(&sara(steps.path(), cmd));
    }
    let whole = tempfile::tempdir().unwrap();
    ok(&sara(whole.path(), &["report"]));
    let (s, w) = (tree_hashes(steps.path()), tree_hashes(whole.path()));
    for (rel, hash) in &s {
        assert_eq!(w.get(rel), Some(hash), "{}", rel.display());
    }
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = [synthetic("reviews.jsonl"), synthetic("apps.jsonl"), fixture_config()];
    let before: Vec<String> = inputs.iter().map(|p| sha256_file(p).unwrap()).collect();
    ok(&sara(dir.path(), &["report"]));
    let after: Vec<String> = inputs.iter().map(|p| sha256_file(p).unwrap()).collect();
    assert_eq!(before, after);
    let m = json(&dir.path().join("manifests/report.json"));
    let recorded: Vec<&str> = m["inputs"].as_array().unwrap().iter().map(|f| f["sha256"].as_str().unwrap()).collect();
    for h in &before {
        assert!(recorded.contains(&h.as_str()));
    }
}

#[test]
fn flags_override_file_and_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    ok(&sara(dir.path(), &["--seed", "7", "--category", "Games", "refine"]));
    ok(&sara(dir.path(), &["--seed", "7", "--category", "Games", "sample"]));
    let m = json(&dir.path().join("manifests/sample.json"));
    assert_eq!(m["config"]["pipeline"]["seed"], 7);
    assert_eq!(m["config"]["pipeline"]["min_category_reviews"], 100);
    let flags: Vec<&str> = m["flag_overrides"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(flags, ["run_dir", "seed", "category"]);
    assert!(m["seeds"]["large:Games"].is_u64());
    assert!(dir.path().join("samples/games_large.json").is_file());
    assert!(!dir.path().join("samples/tools_large.json").exists());
}

#[test]
fn missing_input_exits_3_with_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = sara(dir.path(), &["--reviews", "/nonexistent/reviews.jsonl", "refine"]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().find(|l| l.starts_with('{')).expect("json report on stderr");
    let report: Value = serde_json::from_str(line).unwrap();
    assert_eq!(report["kind"], "missing_input");
    assert_eq!(json(&dir.path().join("error.json")), report);
}

#[test]
fn steps_out_of_order_report_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = sara(dir.path(), &["sample"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `refine` first"));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = sara(dir.path(), &["--shots", "4", "refine"]);
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[pipeline]\nseeed = 1\n").unwrap();
    let out = Command::new(BIN).arg("--config").arg(&bad).arg("refine").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(BIN).arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn live_backend_without_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("live.toml");
    std::fs::write(
        &cfg,
        format!(
            "[inputs]\nreviews = {:?}\napps = {:?}\n",
            synthetic("reviews.jsonl").to_str().unwrap(),
            synthetic("apps.jsonl").to_str().unwrap()
        ),
    )
    .unwrap();
    let out = Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("--run-dir")
        .arg(dir.path().join("run"))
        .arg("refine")
        .env_remove("SARA_LLM_API_KEY")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SARA_LLM_API_KEY"));
}

#[test]
fn synth_matches_bundled_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN).arg("synth").arg("--out").arg(dir.path()).output().unwrap();
    ok(&out);
    for name in ["reviews.jsonl", "apps.jsonl"] {
        assert_eq!(sha256_file(&dir.path().join(name)).unwrap(), sha256_file(&synthetic(name)).unwrap(), "{name}");
    }
}

#[test]
fn help_exits_0() {
    let out = Command::new(BIN).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("compare-platforms"));
}

#[test]
fn compare_platforms_on_two_runs() {
    let gps = tempfile::tempdir().unwrap();
    ok(&sara(gps.path(), &["report"]));
    let synth = tempfile::tempdir().unwrap();
    ok(&Command::new(BIN)
        .args(["synth", "--synth-platform", "astore", "--synth-seed", "9", "--out"])
        .arg(synth.path())
        .output()
        .unwrap());
    let astore = tempfile::tempdir().unwrap();
    ok(&sara(
        astore.path(),
        &[
            "--platform",
            "astore",
            "--reviews",
            synth.path().join("reviews.jsonl").to_str().unwrap(),
            "--apps",
            synth.path().join("apps.jsonl").to_str().unwrap(),
            "report",
        ],
    ));
    let out_dir = tempfile::tempdir().unwrap();
    let stdout = ok(&sara(
        out_dir.path(),
        &[
            "compare-platforms",
            "--gps",
            gps.path().join("classified.jsonl").to_str().unwrap(),
            "--astore",
            astore.path().join("classified.jsonl").to_str().unwrap(),
            "--denominator",
            "genai",
        ],
    ));
    assert!(stdout.contains("topic categories compared"));
    let cmp = json(&out_dir.path().join("compare/platforms.json"));
    assert_eq!(cmp["denominator"], "genai");
    assert!(!cmp["rows"].as_array().unwrap().is_empty());
}
