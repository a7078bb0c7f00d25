use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// target/<profile>, two levels above the test executable in deps/.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn cc() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok().map(|_| cc)
}

#[test]
fn header_is_valid_c() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler; header check skipped");
        return;
    };
    let header = crate_dir().join("include/gridscen.h");
    assert!(header.exists());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .status()
        .unwrap();
    assert!(status.success());
}

fn link_and_run(cc: &str, staticlib: &Path) {
    let out = std::env::temp_dir().join(format!("gridscen_smoke_{}", std::process::id()));
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror"])
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(staticlib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke test failed to build");
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(
        run.status.success(),
        "C smoke test failed: {}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler; link test skipped");
        return;
    };
    let lib = profile_dir().join("libgridscen_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; link test skipped", lib.display());
        return;
    }
    link_and_run(&cc, &lib);
}
