use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use cascadet::classifier::BackboneSpec;
use cascadet::detector::detect_faces_traced;
use cascadet::fixture::{self, FixtureSet};
use cascadet::pipeline::{run, Frame, Pipeline, RunConfig};
use cascadet::record::{read_jsonl, Detection};
use cascadet::selfcheck::snapshot;
use cascadet::weights::WeightArchive;

const SEED: u64 = 0;
const FRAMES: usize = 3;

struct Shared {
    cascade: WeightArchive,
    classifier: WeightArchive,
    set: FixtureSet,
}

/// Fixture weights and a written fixture set, built once per test binary.
fn shared() -> &'static Shared {
    static SHARED: OnceLock<Shared> = OnceLock::new();
    SHARED.get_or_init(|| {
        let cascade = fixture::cascade_archive(SEED).unwrap();
        let classifier = fixture::classifier_archive(&BackboneSpec::default(), SEED).unwrap();
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("pipeline_fixture");
        let _ = std::fs::remove_dir_all(&dir);
        let set = fixture::write_fixture_set(&dir, FRAMES, SEED, &cascade, &classifier).unwrap();
        Shared { cascade, classifier, set }
    })
}

fn pipeline() -> Pipeline {
    let s = shared();
    Pipeline::new(&s.cascade, &s.classifier, Default::default(), BackboneSpec::default()).unwrap()
}

fn config(out: &Path, threads: usize) -> RunConfig {
    let s = shared();
    let text = std::fs::read_to_string(&s.set.config).unwrap();
    let mut c = RunConfig::parse(&text, &s.set.dir, Vec::new()).unwrap();
    c.output_dir = out.to_path_buf();
    c.threads = threads;
    c
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/fixture_seed0_frame0.txt")
}

/// Stage counts, raw cascade boxes and final detections for frame 0.
fn trace_text() -> String {
    let frame = fixture::default_scene(SEED).render(0);
    let p = pipeline();
    let (faces, trace) = detect_faces_traced(&frame.to_tensor(), &p.networks, &p.cascade).unwrap();
    let mut out = String::new();
    writeln!(out, "{:?}", trace.counts).unwrap();
    for f in &faces {
        let b = f.bbox;
        writeln!(out, "face {:?} {:?} {:?} {:?} score {:?}", b.x1, b.y1, b.x2, b.y2, f.score).unwrap();
    }
    for d in p.process_frame(&frame).unwrap().0 {
        writeln!(out, "{}", serde_json::to_string(&d).unwrap()).unwrap();
    }
    out
}

#[test]
fn frame_trace_matches_golden_file() {
    let text = trace_text();
    let path = golden_path();
    if std::env::var_os("GOLDEN_UPDATE").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let golden = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; run with GOLDEN_UPDATE=1 to create it", path.display()));
    assert_eq!(text, golden);
    assert!(text.lines().count() > 2, "golden trace should contain detections");
}

#[test]
fn processed_boxes_stay_in_bounds_and_sorted() {
    let p = pipeline();
    let scene = fixture::default_scene(SEED + 1);
    for i in 0..2 {
        let frame = scene.render(i);
        let (dets, _) = p.process_frame(&frame).unwrap();
        for d in &dets {
            assert!(d.x1 < d.x2 && d.x2 as usize <= frame.width, "{d:?}");
            assert!(d.y1 < d.y2 && d.y2 as usize <= frame.height, "{d:?}");
            assert!((0.0..=1.0).contains(&d.confidence));
            assert_eq!(d.frame, frame.index);
        }
        assert!(dets.windows(2).all(|w| w[0].face_score >= w[1].face_score));
    }
    let blank = Frame::filled(0, 200, 120, [0, 0, 0]);
    assert!(p.process_frame(&blank).unwrap().0.is_empty());
}

#[test]
fn log_lines_match_detections_and_outputs_mirror_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run(&config(tmp.path(), 1)).unwrap();
    assert_eq!(summary.frames, FRAMES);
    assert_eq!(summary.failed_frames, 0);
    let text = std::fs::read_to_string(&summary.log_path).unwrap();
    assert_eq!(text.lines().count(), summary.detections);
    let parsed: Vec<Detection> = read_jsonl(&summary.log_path).unwrap();
    assert_eq!(parsed.len(), summary.detections);
    assert!(parsed.windows(2).all(|w| w[0].frame <= w[1].frame));
    for i in 0..FRAMES {
        assert!(tmp.path().join(format!("frame_{i:03}.ppm")).is_file());
    }
    let shown = summary.to_string();
    for stage in ["pyramid", "stage 1", "stage 2", "stage 3", "classifier"] {
        assert!(shown.contains(stage), "{shown}");
    }
}

#[test]
fn output_independent_of_threads_and_reruns() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&config(a.path(), 1)).unwrap();
    run(&config(b.path(), 4)).unwrap();
    run(&config(c.path(), 1)).unwrap();
    let first = snapshot(a.path()).unwrap();
    assert_eq!(first.len(), FRAMES + 1);
    assert_eq!(first, snapshot(b.path()).unwrap());
    assert_eq!(first, snapshot(c.path()).unwrap());
}

#[test]
fn empty_manifest_gives_empty_log() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("empty.txt");
    std::fs::write(&manifest, "# nothing\n").unwrap();
    let mut c = config(&tmp.path().join("out"), 2);
    c.manifest = manifest;
    let summary = run(&c).unwrap();
    assert_eq!((summary.frames, summary.detections), (0, 0));
    assert!(!summary.failed());
    assert_eq!(std::fs::read(&summary.log_path).unwrap(), b"");
}

#[test]
fn bad_frames_are_skipped_and_counted() {
    let s = shared();
    let tmp = tempfile::tempdir().unwrap();
    let good = s.set.dir.join("frames/frame_000.ppm");
    std::fs::write(tmp.path().join("broken.ppm"), b"P6\n4 4\n255\n\x00").unwrap();
    let manifest = tmp.path().join("frames.txt");

    std::fs::write(&manifest, format!("{}\nmissing.ppm\nbroken.ppm\n", good.display())).unwrap();
    let mut c = config(&tmp.path().join("out"), 1);
    c.manifest = manifest.clone();
    let summary = run(&c).unwrap();
    assert_eq!((summary.frames, summary.failed_frames), (3, 2));
    assert!(summary.failed());

    std::fs::write(&manifest, format!("{0}\n{0}\nmissing.ppm\n", good.display())).unwrap();
    let summary = run(&c).unwrap();
    assert_eq!(summary.failed_frames, 1);
    assert!(!summary.failed());
}

#[test]
fn cli_detect_honours_environment_override() {
    let s = shared();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cli_out");
    let status = Command::new(env!("CARGO_BIN_EXE_cascadet"))
        .args(["detect", "--config"])
        .arg(&s.set.config)
        .env("CASCADET_OUTPUT_DIR", &out)
        .env("CASCADET_ANNOTATE", "false")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(String::from_utf8_lossy(&status.stdout).contains("frames:      3"));
    let files = snapshot(&out).unwrap();
    assert_eq!(files.keys().collect::<Vec<_>>(), vec!["detections.jsonl"]);

    let status = Command::new(env!("CARGO_BIN_EXE_cascadet"))
        .args(["detect", "--config"])
        .arg(&s.set.config)
        .env("CASCADET_THREADS", "none")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stderr).contains("threads"));
}
