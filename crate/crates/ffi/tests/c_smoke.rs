//! Compiles and runs a C program against the generated header and the
//! static library. Skipped when no C compiler is found.

use std::path::PathBuf;
use std::process::Command;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: cc unavailable");
        return;
    }
    // The test harness links the rlib; build the archive explicitly so it
    // is never stale.
    let built = Command::new(env!("CARGO"))
        .args(["build", "--quiet", "--profile", "test", "-p", "twtsim-ffi", "--lib"])
        .current_dir(&manifest)
        .status()
        .unwrap();
    assert!(built.success());
    let lib = profile_dir.join("libtwtsim_ffi.a");
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("twtsim_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("delivered"));
}
