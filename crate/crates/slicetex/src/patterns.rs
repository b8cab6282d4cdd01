//! Procedural exemplar textures.
//!
//! Each pattern is deterministic in (kind, size, seed) and lands in [0, 1].
//! They are built to exercise specific statistics: bands and rails carry
//! long-range structure along one axis, bricks and checker are near-periodic
//! with local jitter, waves bend a stripe field, and noise has no structure
//! at all. Handy wherever a real photograph is not available or a test needs
//! a texture with known properties.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::img::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    /// Horizontal color bands, constant along each row.
    Bands,
    /// Staggered brick courses with darker mortar lines.
    Bricks,
    /// Vertical stripes displaced by a smooth horizontal wave.
    Waves,
    /// A jittered checkerboard.
    Checker,
    /// Vertical rails, constant along each column.
    Rails,
    /// Independent per-pixel noise; a negative control.
    Noise,
}

impl PatternKind {
    pub const ALL: [PatternKind; 6] = [
        PatternKind::Bands,
        PatternKind::Bricks,
        PatternKind::Waves,
        PatternKind::Checker,
        PatternKind::Rails,
        PatternKind::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Bands => "bands",
            PatternKind::Bricks => "bricks",
            PatternKind::Waves => "waves",
            PatternKind::Checker => "checker",
            PatternKind::Rails => "rails",
            PatternKind::Noise => "noise",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PatternKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown pattern {s}; expected one of bands, bricks, waves, checker, rails, noise"
                ))
            })
    }
}

fn jitter_color(rng: &mut ChaCha8Rng, base: [f32; 3], amount: f32) -> [f32; 3] {
    [
        base[0] + rng.gen_range(-amount..amount),
        base[1] + rng.gen_range(-amount..amount),
        base[2] + rng.gen_range(-amount..amount),
    ]
}

fn bands(size: usize, rng: &mut ChaCha8Rng) -> Image {
    let band_h = 8usize;
    let palette = [
        [0.85, 0.45, 0.25],
        [0.25, 0.40, 0.65],
        [0.90, 0.85, 0.55],
        [0.35, 0.60, 0.35],
    ];
    let bands = size.div_ceil(band_h);
    let colors: Vec<[f32; 3]> = (0..bands)
        .map(|b| jitter_color(rng, palette[b % palette.len()], 0.08))
        .collect();
    let img = Image::from_fn(size, size, |y, _, c| colors[y / band_h][c]);
    speckle(img, rng, 0.03)
}

fn rails(size: usize, rng: &mut ChaCha8Rng) -> Image {
    let rail_w = 6usize;
    let rails = size.div_ceil(rail_w);
    let colors: Vec<[f32; 3]> = (0..rails)
        .map(|r| {
            let v = if r % 2 == 0 { 0.75 } else { 0.2 };
            jitter_color(rng, [v, v * 0.9, v * 0.7], 0.06)
        })
        .collect();
    let img = Image::from_fn(size, size, |_, x, c| colors[x / rail_w][c]);
    speckle(img, rng, 0.03)
}

fn bricks(size: usize, rng: &mut ChaCha8Rng) -> Image {
    let (bh, bw) = (8usize, 16usize);
    let courses = size.div_ceil(bh);
    let per_course = size.div_ceil(bw) + 1;
    let colors: Vec<Vec<[f32; 3]>> = (0..courses)
        .map(|_| {
            (0..per_course)
                .map(|_| jitter_color(rng, [0.62, 0.28, 0.20], 0.07))
                .collect()
        })
        .collect();
    let mortar = [0.80, 0.78, 0.72];
    let img = Image::from_fn(size, size, |y, x, c| {
        let course = y / bh;
        let shift = if course % 2 == 0 { 0 } else { bw / 2 };
        let in_course = y % bh;
        let xs = x + shift;
        if in_course == 0 || xs % bw == 0 {
            mortar[c]
        } else {
            colors[course][xs / bw][c]
        }
    });
    speckle(img, rng, 0.02)
}

fn waves(size: usize, rng: &mut ChaCha8Rng) -> Image {
    let lambda = 16.0f32;
    let sway = rng.gen_range(2.0f32..4.0);
    let mu = rng.gen_range(24.0f32..40.0);
    let phase = rng.gen_range(0.0f32..std::f32::consts::TAU);
    let img = Image::from_fn(size, size, |y, x, c| {
        let bend = sway * (std::f32::consts::TAU * y as f32 / mu + phase).sin();
        let t = std::f32::consts::TAU * (x as f32 + bend) / lambda;
        let v = 0.5 + 0.38 * (t + 0.35 * c as f32).sin();
        0.15 + 0.7 * v
    });
    speckle(img, rng, 0.02)
}

fn checker(size: usize, rng: &mut ChaCha8Rng) -> Image {
    let cell = 8usize;
    let n = size.div_ceil(cell);
    let colors: Vec<Vec<[f32; 3]>> = (0..n)
        .map(|cy| {
            (0..n)
                .map(|cx| {
                    let base = if (cy + cx) % 2 == 0 {
                        [0.88, 0.86, 0.80]
                    } else {
                        [0.18, 0.22, 0.30]
                    };
                    jitter_color(rng, base, 0.05)
                })
                .collect()
        })
        .collect();
    let img = Image::from_fn(size, size, |y, x, c| colors[y / cell][x / cell][c]);
    speckle(img, rng, 0.02)
}

fn noise(size: usize, rng: &mut ChaCha8Rng) -> Image {
    Image::from_fn(size, size, |_, _, _| rng.gen_range(0.0..1.0))
}

/// Adds uniform per-pixel speckle of the given half-width, then clamps.
fn speckle(img: Image, rng: &mut ChaCha8Rng, amount: f32) -> Image {
    let mut data = img.into_data();
    data.mapv_inplace(|v| (v + rng.gen_range(-amount..amount)).clamp(0.0, 1.0));
    Image::new(data).expect("speckled values stay finite")
}

/// Renders a square exemplar of the requested pattern.
pub fn generate(kind: PatternKind, size: usize, seed: u64) -> Result<Image> {
    if size == 0 {
        return Err(Error::invalid("pattern size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        PatternKind::Bands => bands(size, &mut rng),
        PatternKind::Bricks => bricks(size, &mut rng),
        PatternKind::Waves => waves(size, &mut rng),
        PatternKind::Checker => checker(size, &mut rng),
        PatternKind::Rails => rails(size, &mut rng),
        PatternKind::Noise => noise(size, &mut rng),
    })
}

/// Repeats `img` in a ny x nx grid; exact copies, so the result is periodic
/// with period equal to the tile size.
pub fn tile(img: &Image, ny: usize, nx: usize) -> Result<Image> {
    if ny == 0 || nx == 0 {
        return Err(Error::invalid("tile counts must be positive"));
    }
    let (h, w) = (img.height(), img.width());
    Ok(Image::from_fn(h * ny, w * nx, |y, x, c| {
        img.data()[[y % h, x % w, c]]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_pattern_is_in_range_and_deterministic() {
        for kind in PatternKind::ALL {
            let a = generate(kind, 48, 7).unwrap();
            let b = generate(kind, 48, 7).unwrap();
            assert_eq!(a.data(), b.data(), "{kind} not deterministic");
            assert!(
                a.data().iter().all(|v| (0.0..=1.0).contains(v)),
                "{kind} left [0,1]"
            );
            let c = generate(kind, 48, 8).unwrap();
            assert_ne!(a.data(), c.data(), "{kind} ignores the seed");
        }
    }

    #[test]
    fn bands_vary_down_columns_not_along_rows() {
        let img = generate(PatternKind::Bands, 64, 3).unwrap();
        let data = img.data();
        // Row-wise spread stays at speckle scale; column-wise spread is the
        // full palette range.
        let row_spread: f32 = (0..64)
            .map(|y| {
                let row = data.slice(ndarray::s![y, .., 0]);
                let max = row.iter().cloned().fold(f32::MIN, f32::max);
                let min = row.iter().cloned().fold(f32::MAX, f32::min);
                max - min
            })
            .fold(0.0, f32::max);
        let col = data.slice(ndarray::s![.., 0, 0]);
        let col_spread =
            col.iter().cloned().fold(f32::MIN, f32::max) - col.iter().cloned().fold(f32::MAX, f32::min);
        assert!(row_spread < 0.2, "rows should be near-constant, spread {row_spread}");
        assert!(col_spread > 0.4, "columns should span the palette, spread {col_spread}");
    }

    #[test]
    fn tiling_is_exactly_periodic() {
        let patch = generate(PatternKind::Bricks, 32, 5).unwrap();
        let tiled = tile(&patch, 2, 3).unwrap();
        assert_eq!(tiled.height(), 64);
        assert_eq!(tiled.width(), 96);
        for y in 0..64 {
            for x in 0..96 {
                for c in 0..3 {
                    assert_eq!(
                        tiled.data()[[y, x, c]],
                        patch.data()[[y % 32, x % 32, c]]
                    );
                }
            }
        }
    }

    #[test]
    fn pattern_names_round_trip() {
        for kind in PatternKind::ALL {
            assert_eq!(kind.name().parse::<PatternKind>().unwrap(), kind);
        }
        assert!("marble".parse::<PatternKind>().is_err());
    }
}
