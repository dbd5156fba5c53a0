use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shuttlesense::report::AssessmentReport;
use shuttlesense::shuttlesim::{FixtureSpec, MANIFEST_FILE};

fn run(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shuttlesense"));
    cmd.args(args).env_remove("SHUTTLESENSE_CONFIG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

struct Workspace {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    manifest: PathBuf,
    config: PathBuf,
}

fn workspace(seed: u64) -> Workspace {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    let spec = root.join("spec.json");
    fs::write(&spec, serde_json::to_string(&FixtureSpec::new(seed, 1)).unwrap()).unwrap();
    let o = run(&["simulate", s(&spec), "--out", s(&root.join("session"))], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let config = root.join("config.json");
    fs::write(&config, r#"{"reference": {"p_lo": 0, "p_hi": 100, "n_min": 1}}"#).unwrap();
    Workspace {
        manifest: root.join("session").join(MANIFEST_FILE),
        root,
        config,
        _tmp: tmp,
    }
}

fn read_report(dir: &Path) -> AssessmentReport {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn simulate_build_ref_analyze_on_one_session_scores_100() {
    let w = workspace(5);
    let env = w.root.join("envelope.json");
    let before = snapshot(&w.root.join("session"));
    let o = run(&["--config", s(&w.config), "build-ref", s(&w.manifest), "--out", s(&env)], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("not a reference session"));

    let out = w.root.join("out");
    let args = ["--config", s(&w.config), "analyze", s(&w.manifest), "--envelope", s(&env), "--out", s(&out), "--dump"];
    let o = run(&args, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_report(&out);
    assert_eq!(report.accuracy, Some(100.0));
    assert!(report.faults.is_empty());
    assert_eq!(report.config.reference.n_min, 1);
    assert_eq!(report.strokes.len(), 6);
    assert!(fs::read_to_string(out.join("report.md")).unwrap().contains("## No faults above threshold"));
    let strokes = fs::read_to_string(out.join("strokes.csv")).unwrap();
    assert!(strokes.starts_with("start,peak,end,class,peak_wrist_speed,outgoing_angle\n"));
    assert_eq!(strokes.lines().count(), 7);
    assert!(fs::read_to_string(out.join("angles.csv")).unwrap().starts_with("frame,"));
    for h in &report.heatmaps {
        assert!(out.join(&h.path).is_file());
    }

    let first = snapshot(&out);
    assert_eq!(code(&run(&args, &[])), 0);
    assert_eq!(snapshot(&out), first);
    assert_eq!(snapshot(&w.root.join("session")), before);
}

#[test]
fn config_falls_back_to_environment_variable() {
    let w = workspace(6);
    let env = w.root.join("envelope.json");
    let o = run(&["build-ref", s(&w.manifest), "--out", s(&env)], &[("SHUTTLESENSE_CONFIG", &w.config)]);
    assert_eq!(code(&o), 0);
    let out = w.root.join("out");
    let o = run(
        &["analyze", s(&w.manifest), "--envelope", s(&env), "--out", s(&out), "--format", "json", "--top-k", "3"],
        &[("SHUTTLESENSE_CONFIG", &w.config)],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_report(&out);
    assert_eq!(r.config.reference.p_hi, 100.0);
    assert_eq!(r.config.report.top_k, 3);
    assert!(!out.join("report.md").exists());
}

#[test]
fn exit_codes() {
    let w = workspace(7);
    let missing = w.root.join("nope.json");
    let out = w.root.join("out");

    let o = run(&["analyze", s(&w.manifest), "--envelope", s(&missing), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());

    let o = run(&["validate", s(&w.manifest)], &[]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("single-view session"));

    let strict = w.root.join("strict.json");
    fs::write(&strict, r#"{"ingest": {"confidence_floor": 0.95}}"#).unwrap();
    let o = run(&["--config", s(&strict), "validate", s(&w.manifest)], &[]);
    assert_eq!(code(&o), 1);

    let bad = w.root.join("bad.json");
    fs::write(&bad, r#"{"ingest": {"confidence": 0.5}}"#).unwrap();
    assert_eq!(code(&run(&["--config", s(&bad), "validate", s(&w.manifest)], &[])), 2);
    assert_eq!(code(&run(&["validate"], &[])), 2);
    assert_eq!(code(&run(&["frobnicate"], &[])), 2);

    let garbage = w.root.join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(code(&run(&["validate", s(&garbage)], &[])), 3);
    let o = run(&["analyze", s(&w.manifest), "--envelope", s(&garbage), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 3);
}

#[test]
fn heatmap_and_progress() {
    let w = workspace(8);
    let out = w.root.join("heat");
    let o = run(&["heatmap", s(&w.manifest), s(&w.manifest), "--out", s(&out)], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let index: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("heatmaps.json")).unwrap()).unwrap();
    let entries = index.as_array().unwrap();
    assert!(!entries.is_empty());
    assert!(entries.iter().all(|e| e["shots"].as_u64().unwrap() % 2 == 0));

    let env = w.root.join("envelope.json");
    assert_eq!(code(&run(&["--config", s(&w.config), "build-ref", s(&w.manifest), "--out", s(&env)], &[])), 0);
    let mut reports = Vec::new();
    for k in 0..2 {
        let dir = w.root.join(format!("r{k}"));
        let o = run(&["--config", s(&w.config), "analyze", s(&w.manifest), "--envelope", s(&env), "--out", s(&dir)], &[]);
        assert_eq!(code(&o), 0);
        reports.push(dir.join("report.json"));
    }
    let o = run(&["progress", s(&reports[0]), s(&reports[1]), "--timestamps", "2024-01,2024-02"], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("| fixture | 2024-02 | 100.00 | +0.00 |"));
    assert!(text.contains("Improvement is not monotonic."));

    let o = run(&["progress", s(&reports[0]), "--timestamps", "a,b"], &[]);
    assert_eq!(code(&o), 2);
    let o = run(&["progress", s(&reports[0]), s(&reports[1]), "--timestamps", "b,a"], &[]);
    assert_eq!(code(&o), 3);
}
