//! Comparison grid figures: one row per texture, one column per arm
//! (reference, optional baseline, synthesis), every cell padded into a
//! square tile on a white canvas.

use crate::{CmdError, CmdResult};
use ndarray::Array3;
use slicetex::Image;

pub const GUTTER: usize = 4;

/// Lays the images out row-major. The tile side is the largest image
/// dimension present; the canvas is `rows x (tile + gutter)` high and
/// `cols x (tile + gutter)` wide with a trailing gutter per tile.
pub fn comparison_grid(rows: &[Vec<Image>]) -> CmdResult<Image> {
    if rows.is_empty() || rows.iter().all(|r| r.is_empty()) {
        return Err(CmdError::usage("grid needs at least one image"));
    }
    let cols = rows.iter().map(|r| r.len()).max().unwrap();
    let tile = rows
        .iter()
        .flatten()
        .map(|img| img.height().max(img.width()))
        .max()
        .unwrap();
    let height = rows.len() * (tile + GUTTER);
    let width = cols * (tile + GUTTER);
    let mut canvas = Array3::<f32>::from_elem((height, width, 3), 1.0);
    for (r, row) in rows.iter().enumerate() {
        for (c, img) in row.iter().enumerate() {
            let (top, left) = (r * (tile + GUTTER), c * (tile + GUTTER));
            let data = img.data();
            for y in 0..img.height() {
                for x in 0..img.width() {
                    for ch in 0..3 {
                        canvas[[top + y, left + x, ch]] = data[[y, x, ch]];
                    }
                }
            }
        }
    }
    Ok(Image::new(canvas)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use slicetex::patterns::{generate, PatternKind};

    #[test]
    fn grid_dimensions_follow_the_layout_arithmetic() {
        let a = generate(PatternKind::Bands, 16, 1).unwrap();
        let b = generate(PatternKind::Checker, 8, 2).unwrap();
        let grid = comparison_grid(&[vec![a.clone(), b.clone()], vec![b.clone()]]).unwrap();
        // tile = 16, two rows, two columns.
        assert_eq!(grid.height(), 2 * (16 + GUTTER));
        assert_eq!(grid.width(), 2 * (16 + GUTTER));
        // Padding and the absent second cell of row two stay white.
        let d = grid.data();
        assert_eq!(d[[0, 16, 0]], 1.0);
        assert_eq!(d[[16 + GUTTER + 10, 16 + GUTTER + 10, 1]], 1.0);
        // Top-left pixel comes from the first image.
        assert_eq!(d[[0, 0, 0]], a.data()[[0, 0, 0]]);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(comparison_grid(&[]).is_err());
        assert!(comparison_grid(&[vec![]]).is_err());
    }
}
