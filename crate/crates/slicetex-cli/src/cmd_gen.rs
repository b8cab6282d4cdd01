//! Utility commands: `gen-texture` renders the built-in procedural exemplars
//! (optionally tiled into larger periodic sheets) and `gen-weights` writes a
//! seeded backbone checkpoint, so every experiment in the repository can be
//! reproduced without external downloads.

use crate::{io, CmdError, CmdResult};
use slicetex::patterns::{generate, tile, PatternKind};
use slicetex::vgg::write_random_weights_through;
use std::path::{Path, PathBuf};

pub fn gen_texture(
    kind: &str,
    size: usize,
    seed: u64,
    tiles_y: usize,
    tiles_x: usize,
    out: &Path,
) -> CmdResult<PathBuf> {
    let kind: PatternKind = kind
        .parse()
        .map_err(|e: slicetex::Error| CmdError::usage(e.to_string()))?;
    if size == 0 || tiles_y == 0 || tiles_x == 0 {
        return Err(CmdError::usage("size and tile counts must be positive"));
    }
    let base = generate(kind, size, seed)?;
    let img = if tiles_y > 1 || tiles_x > 1 {
        tile(&base, tiles_y, tiles_x)?
    } else {
        base
    };
    io::save_png(out, &img)?;
    Ok(out.to_owned())
}

/// Writes a seeded He-initialized checkpoint through `deepest` (default the
/// full backbone) and returns its checksum.
pub fn gen_weights(out: &Path, seed: u64, deepest: Option<&str>) -> CmdResult<String> {
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(write_random_weights_through(
        out,
        seed,
        deepest.unwrap_or("conv5_4"),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_generation_is_deterministic_and_tiled() {
        let dir = std::env::temp_dir().join(format!("slicetex-gen-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let a = dir.join("a.png");
        let b = dir.join("b.png");
        gen_texture("bricks", 16, 7, 1, 2, &a).unwrap();
        gen_texture("bricks", 16, 7, 1, 2, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let img = io::load_image(&a).unwrap();
        assert_eq!((img.height(), img.width()), (16, 32));
        assert!(matches!(
            gen_texture("plaid", 16, 7, 1, 1, &a),
            Err(CmdError::Usage(_))
        ));
        std::fs::remove_dir_all(&dir).ok();
    }
}
