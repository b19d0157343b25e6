use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "billiard_counting.h"

int main(void) {
    const char *json = "{\"model\": \"euclidean\", \"loops\": [[[0,0],[1,0],[1,1],[0,1]]]}";
    BcPolygon *p = NULL;
    if (bc_polygon_from_json(json, &p) != BC_STATUS_OK) return 1;
    double z[2] = {0.5, 0.5};
    BcSeries *s = NULL;
    if (bc_count_position(p, z, 2, 1.0, 0, &s) != BC_STATUS_OK) return 2;
    size_t n = bc_series_count(s, 1.0);
    if (bc_polygon_from_json("{", &p) != BC_STATUS_SCHEMA) return 3;
    if (bc_last_error_message() == NULL) return 4;
    printf("%zu\n", n);
    bc_series_free(s);
    bc_polygon_free(p);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // deps/<test binary> -> profile directory
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_links_and_runs_from_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = target_dir().join("libbilliard_counting_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "4");
}
