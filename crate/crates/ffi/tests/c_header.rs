//! Compiles and runs a small C program against the generated header and
//! the static library. Skipped when no C compiler is on the path.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "cascadet.h"

int main(void) {
    CascadetBox a = {0.0f, 0.0f, 10.0f, 10.0f};
    CascadetBox b = {5.0f, 5.0f, 15.0f, 15.0f};
    float o = cascadet_iou(a, b);
    if (o < 0.1428f || o > 0.1429f) return 10;

    CascadetCounts counts = {94, 0, 6, 14};
    CascadetMetrics m;
    if (cascadet_metrics(counts, &m) != CASCADET_STATUS_OK) return 11;
    if (!m.precision.defined || m.precision.value != 94.0) return 12;

    CascadetDetector *det = NULL;
    CascadetStatus s = cascadet_detector_load("/nonexistent/a.cwts", "/nonexistent/b.cwts", &det);
    if (s != CASCADET_STATUS_IO || det != NULL) return 13;
    char msg[256];
    size_t need = cascadet_last_error_message(msg, sizeof msg);
    if (need < 2 || strstr(msg, "nonexistent") == NULL) return 14;
    cascadet_detector_free(det);

    printf("cascadet %s ok\n", cascadet_version());
    return 0;
}
"#;

fn compiler() -> Option<String> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .map(str::to_string)
}

/// `target/<profile>` of the running test binary (`.../deps/<test>`).
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = profile_dir().join("libcascadet_ffi.a");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();

    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success(), "header does not compile as C99");

    if !lib.is_file() {
        eprintln!("{} not built; link step skipped", lib.display());
        return;
    }
    let exe = dir.path().join("smoke");
    let out = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "link failed: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "C program failed: {}", String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).contains("ok"));
}
