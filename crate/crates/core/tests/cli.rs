use std::process::{Command, Output};

fn cascadet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascadet")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(cascadet(&[]).status.code(), Some(1));
    assert_eq!(cascadet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cascadet(&["eval", "--log", "x.jsonl"]).status.code(), Some(1));
    assert_eq!(cascadet(&["train-demo", "--seed", "minus"]).status.code(), Some(1));
    assert_eq!(cascadet(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_reports_counts_and_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let truth = dir.path().join("truth.jsonl");
    let csv = dir.path().join("report.csv");
    std::fs::write(
        &log,
        concat!(
            r#"{"frame":0,"x1":0,"y1":0,"x2":10,"y2":10,"label":"Mask","confidence":0.9,"face_score":0.99}"#,
            "\n",
            r#"{"frame":0,"x1":50,"y1":50,"x2":60,"y2":60,"label":"NoMask","confidence":0.8,"face_score":0.95}"#,
            "\n",
        ),
    )
    .unwrap();
    std::fs::write(
        &truth,
        concat!(
            r#"{"frame":0,"x1":0,"y1":0,"x2":10,"y2":10,"label":"Mask"}"#,
            "\n",
            r#"{"frame":1,"x1":0,"y1":0,"x2":10,"y2":10,"label":"NoMask"}"#,
            "\n",
        ),
    )
    .unwrap();
    let args = ["eval", "--log", log.to_str().unwrap(), "--truth", truth.to_str().unwrap()];
    let out = cascadet(&[&args[..], &["--csv", csv.to_str().unwrap()]].concat());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("face: TP=1 FP=1 FN=1 TN=0"), "{text}");
    assert!(text.contains("mask: TP=1 FP=0 FN=0 TN=0"), "{text}");
    assert!(text.contains("literature values"));
    let csv = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().nth(1).unwrap().starts_with("This run,measured,50.00,50.00,33.33,100.00,100.00,100.00"));

    let strict = cascadet(&[&args[..], &["--iou", "1.5"]].concat());
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"frame\":0}\n").unwrap();
    let out = cascadet(&["eval", "--log", bad.to_str().unwrap(), "--truth", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1:"));
    let out = cascadet(&["eval", "--log", "/nonexistent/log", "--truth", "/nonexistent/truth"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_demo_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let out = cascadet(&["train-demo", "--seed", "11", "--out", curve.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&curve).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,loss,accuracy"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 30);
    assert!(rows.last().unwrap()[2] >= 0.95);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
    assert_eq!(stdout(&out).lines().count(), 31);
}
