//! Compiles and runs a small C program against the static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "ris_secrecy.h"

int main(void) {
    RsConfig *cfg = rs_config_new();
    if (rs_config_set_dims(cfg, 2, 4, 2) != RS_STATUS_OK) return 10;
    rs_config_set_stopping(cfg, 20, 1e-5);
    RsChannels *ch = NULL;
    if (rs_channels_generate(cfg, 3, &ch) != RS_STATUS_OK) return 11;
    RsResult *res = NULL;
    if (rs_optimize(cfg, ch, RS_ALGORITHM_BCD_MM, 3, &res) != RS_STATUS_OK) {
        fprintf(stderr, "%s\n", rs_last_error());
        return 12;
    }
    printf("%zu %.17g\n", rs_result_iterations(res), rs_result_wmsr(res));
    if (rs_optimize(NULL, ch, RS_ALGORITHM_BCD_MM, 3, &res) != RS_STATUS_NULL_POINTER) return 13;
    rs_result_free(res);
    rs_channels_free(ch);
    rs_config_free(cfg);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir: PathBuf = exe.parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libris_secrecy_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    let mut parts = text.split_whitespace();
    let iters: usize = parts.next().unwrap().parse().unwrap();
    let v: f64 = parts.next().unwrap().parse().unwrap();
    assert!(iters >= 1 && v >= 0.0);
}
