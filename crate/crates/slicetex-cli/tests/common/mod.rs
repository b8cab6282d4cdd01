//! Helpers shared by the integration suites: locating the binary, pointing
//! it at a shared weights cache, and generating small test textures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Shared cache so the backbone weights are generated once per machine, not
/// once per test. Generation goes through a pid-suffixed temp file and an
/// atomic rename, so parallel tests cannot corrupt it.
pub fn weights_dir() -> PathBuf {
    std::env::temp_dir().join("slicetex-cli-tests-weights")
}

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_slicetex"));
    c.env("SLICETEX_WEIGHTS_DIR", weights_dir());
    c
}

pub fn fresh_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("slicetex-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

pub fn succeed(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn gen_texture(dir: &Path, kind: &str, size: usize) -> PathBuf {
    let path = dir.join(format!("{kind}.png"));
    let out = bin()
        .args(["gen-texture", "--kind", kind, "--size", &size.to_string()])
        .arg("--out")
        .arg(&path)
        .output()
        .unwrap();
    succeed(&out);
    path
}
