use std::path::Path;
use std::process::{Command, Output};

fn tamek(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tamek"))
        .args(args)
        .output()
        .expect("spawn tamek")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn bounds_all_lists_six_fields() {
    let o = tamek(&["bounds", "--all"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 6, "{out}");
    let d2: Vec<&str> = rows[0].split_whitespace().collect();
    assert_eq!(&d2[..3], ["1", "1", "2"]);
    let c_f: f64 = d2[5].parse().unwrap();
    assert!((c_f - 16146.993).abs() < 0.01, "{c_f}");
}

#[test]
fn bounds_json_for_one_field() {
    let o = tamek(&["bounds", "--B", "2", "--C", "5", "--D", "29", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let row = &v[0];
    assert_eq!(row["d"], 29);
    let (lo, hi) = (
        row["c_f"]["lo"].as_f64().unwrap(),
        row["c_f"]["hi"].as_f64().unwrap(),
    );
    assert!(lo <= hi && (lo - 192289.567).abs() < 0.01, "{row}");
}

#[test]
fn unknown_field_is_an_error() {
    let o = tamek(&["verify", "--B", "1", "--C", "1", "--D", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn bad_bound_is_an_error() {
    let o = tamek(&[
        "verify",
        "--B",
        "1",
        "--C",
        "1",
        "--D",
        "2",
        "--bound-I",
        "abc",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_artifact_is_an_error() {
    let o = tamek(&["revalidate", "/nonexistent/report.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn partial_run_is_undetermined_and_revalidates() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let csets = dir.path().join("csets");
    let o = tamek(&[
        "verify",
        "--B",
        "1",
        "--C",
        "1",
        "--D",
        "2",
        "--workers",
        "2",
        "--prime-limit",
        "25",
        "--cset-dir",
        p(&csets),
        "--report",
        p(&report),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("undetermined"));

    let o = tamek(&["revalidate", p(&report), "--cset-dir", p(&csets)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("PASS report"));

    let mut files: Vec<_> = std::fs::read_dir(&csets)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert_eq!(files.len(), 25);
    let o = tamek(&["revalidate", p(&files[5])]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("PASS cset"));

    // swap two entries of a C-set
    let text = std::fs::read_to_string(&files[5]).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    assert!(lines.len() > 3);
    let (a, b) = (
        lines[1].split_once(" : ").unwrap().1.to_string(),
        lines[2].split_once(" : ").unwrap().1.to_string(),
    );
    lines[1] = format!("1 : {b}");
    lines[2] = format!("2 : {a}");
    let bad = dir.path().join(files[5].file_name().unwrap());
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let o = tamek(&["revalidate", p(&bad)]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("FAIL cset"));
}

#[test]
fn stopped_run_resumes_to_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &str| {
        let base = dir.path().join(name);
        vec![
            "verify".to_string(),
            "--B=2".into(),
            "--C=3".into(),
            "--D=13".into(),
            "--prime-limit=12".into(),
            format!("--checkpoint={}", p(&base.join("ck.jsonl"))),
            format!("--report={}", p(&base.join("report.json"))),
        ]
    };
    let run = |v: Vec<String>| {
        Command::new(env!("CARGO_BIN_EXE_tamek"))
            .args(&v)
            .output()
            .unwrap()
    };
    std::fs::create_dir_all(dir.path().join("a")).unwrap();
    std::fs::create_dir_all(dir.path().join("b")).unwrap();

    let o = run([args("a"), vec!["--workers=3".into()]].concat());
    assert_eq!(o.status.code(), Some(2));

    let o = run([
        args("b"),
        vec!["--workers=1".into(), "--stop-after=5".into()],
    ]
    .concat());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rerun with --resume"));
    assert!(!dir.path().join("b/report.json").exists());
    let o = run([args("b"), vec!["--workers=2".into(), "--resume".into()]].concat());
    assert_eq!(o.status.code(), Some(2));

    let x = std::fs::read(dir.path().join("a/report.json")).unwrap();
    let y = std::fs::read(dir.path().join("b/report.json")).unwrap();
    assert!(x == y, "reports differ");
}
