//! End-to-end tests of the `heatlab` binary: exit-code contract, the two
//! reference scenarios, the report table, and byte-level determinism.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn heatlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heatlab"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run_scenario(name: &str, out: &Path, extra: &[&str]) -> Output {
    heatlab()
        .arg("run")
        .arg(scenario(name))
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// All files under `dir`, keyed by relative path.
fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn sphere_backward_limit_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_scenario("sphere_backward_limit.json", dir.path(), &[]);
    let text = stdout(&output);
    assert_eq!(output.status.code(), Some(0), "stdout:\n{text}");
    assert!(text.contains("limit: verdict pass, nonflat = true"), "{text}");
    assert!(text.contains("result: pass"), "{text}");
    assert!(dir.path().join("trajectory/trajectory.json").is_file());
    assert!(dir
        .path()
        .join("kernels/conjugate_main/kernel.csv")
        .is_file());
    let limit = fs::read_to_string(dir.path().join("reports/limit_report.json")).unwrap();
    assert!(limit.contains("\"verdict\": \"pass\""), "{limit}");
    assert!(limit.contains("\"nonflat\": true"), "{limit}");
}

#[test]
fn torus_control_scenario_notes_flatness_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_scenario("torus_control.json", dir.path(), &[]);
    let text = stdout(&output);
    assert_eq!(output.status.code(), Some(0), "stdout:\n{text}");
    assert!(text.contains("nonflat = false"), "{text}");
    assert!(
        text.contains("non-flatness certificate not met"),
        "the flat verdict must be noted: {text}"
    );
    assert!(text.contains("[control]"), "{text}");
    assert!(text.contains("result: pass"), "{text}");
}

#[test]
fn malformed_and_missing_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"schema\": \"heatlab/1\",\n  \"name\": }\n").unwrap();
    let output = heatlab().arg("run").arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr).into_owned();
    assert!(err.contains("line 3"), "parse diagnostics: {err}");
    assert!(err.contains("column"), "parse diagnostics: {err}");

    let output = heatlab()
        .arg("run")
        .arg(dir.path().join("absent.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    let wrong_schema = dir.path().join("schema.json");
    let mut text = fs::read_to_string(scenario("torus_control.json")).unwrap();
    text = text.replace("heatlab/1", "heatlab/99");
    fs::write(&wrong_schema, text).unwrap();
    let output = heatlab().arg("run").arg(&wrong_schema).output().unwrap();
    assert_eq!(output.status.code(), Some(2));

    let output = heatlab().arg("run").output().unwrap();
    assert_eq!(output.status.code(), Some(2), "run without a scenario");

    let output = heatlab()
        .arg("limit")
        .arg(scenario("s3_functional.json"))
        .arg("--out")
        .arg(dir.path().join("nolimit"))
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(2),
        "limit verb on a scenario without a limit section"
    );
}

#[test]
fn failing_check_exits_one_and_lists_reports() {
    let dir = tempfile::tempdir().unwrap();
    let strict = dir.path().join("strict.json");
    // An impossible lambda0 expectation turns exactly one check red.
    let text = fs::read_to_string(scenario("torus_control.json"))
        .unwrap()
        .replace("\"expected\": 0.0", "\"expected\": 5.0");
    fs::write(&strict, text).unwrap();
    let out = dir.path().join("out");
    let output = heatlab()
        .arg("run")
        .arg(&strict)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let text = stdout(&output);
    assert!(text.contains("result: FAIL"), "{text}");
    assert!(text.contains("failing reports:"), "{text}");
    assert!(text.contains("lambda0"), "{text}");

    // The report table puts the failure first.
    let table = heatlab()
        .arg("report")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(table.status.code(), Some(0));
    let csv = stdout(&table);
    let flags: Vec<bool> = csv
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).unwrap() == "true")
        .collect();
    let first_pass = flags.iter().position(|&p| p).unwrap_or(flags.len());
    assert!(
        flags[first_pass..].iter().all(|&p| p),
        "fail-first ordering: {csv}"
    );
    assert!(csv.lines().any(|l| l.starts_with("lambda0,false,")), "{csv}");
}

#[test]
fn report_formats_carry_identical_content() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_scenario("s3_functional.json", dir.path(), &[]);
    assert_eq!(output.status.code(), Some(0));

    let csv_out = heatlab()
        .arg("report")
        .arg("--out")
        .arg(dir.path())
        .arg("--format")
        .arg("csv")
        .output()
        .unwrap();
    let json_out = heatlab()
        .arg("report")
        .arg("--out")
        .arg(dir.path())
        .arg("--format")
        .arg("json")
        .output()
        .unwrap();
    assert_eq!(csv_out.status.code(), Some(0));
    assert_eq!(json_out.status.code(), Some(0));

    let csv = stdout(&csv_out);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    let objects = parsed.as_array().unwrap();
    assert_eq!(rows.len(), 3, "one row per check: {csv}");
    assert_eq!(objects.len(), rows.len());
    for (line, obj) in rows.iter().zip(objects) {
        let name = obj["name"].as_str().unwrap();
        let pass = obj["pass"].as_bool().unwrap();
        assert!(
            line.starts_with(&format!("{name},{pass},")),
            "row/object mismatch: {line} vs {obj}"
        );
        let margin: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(margin, obj["margin"].as_f64().unwrap());
    }

    let empty = tempfile::tempdir().unwrap();
    let output = heatlab().arg("report").arg(empty.path()).output().unwrap();
    assert_eq!(output.status.code(), Some(1), "empty dir is an error");
}

#[test]
fn fixed_seed_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    // Different thread caps must not change a single byte either.
    let output = run_scenario("s3_functional.json", &a, &[]);
    assert_eq!(output.status.code(), Some(0));
    let output = heatlab()
        .arg("run")
        .arg(scenario("s3_functional.json"))
        .arg("--out")
        .arg(&b)
        .env("HEATLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(
        ta.keys().collect::<Vec<_>>(),
        tb.keys().collect::<Vec<_>>()
    );
    for (rel, bytes) in &ta {
        assert_eq!(bytes, &tb[rel], "artifact {rel} differs between runs");
    }

    // A different seed changes the sampled corpus, hence the reports.
    let c = dir.path().join("c");
    let output = run_scenario("s3_functional.json", &c, &["--seed", "43"]);
    assert_eq!(output.status.code(), Some(0));
    let tc = tree(&c);
    assert!(
        ta.iter().any(|(rel, bytes)| &tc[rel] != bytes),
        "seed override must reach the trial corpus"
    );
}

#[test]
fn stage_verbs_write_their_own_artifacts() {
    let dir = tempfile::tempdir().unwrap();

    let out = dir.path().join("flow");
    let output = heatlab()
        .arg("flow")
        .arg("--scenario")
        .arg(scenario("torus_control.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(out.join("trajectory/trajectory.json").is_file());
    assert!(!out.join("kernels").exists());

    let out = dir.path().join("kernel");
    let output = heatlab()
        .arg("kernel")
        .arg(scenario("torus_control.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(out.join("kernels/conjugate_main/kernel.json").is_file());
    assert!(!out.join("reports").exists());

    let out = dir.path().join("check");
    let output = heatlab()
        .arg("check")
        .arg(scenario("s3_functional.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(out.join("reports/check_00_lambda0.json").is_file());

    let out = dir.path().join("limit");
    let output = heatlab()
        .arg("limit")
        .arg(scenario("torus_control.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "control limit exits zero");
    assert!(out.join("reports/limit_report.json").is_file());
}
