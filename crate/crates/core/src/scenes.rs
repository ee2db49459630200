//! Seeded procedural test scenes and the fixed evaluation corpora built
//! from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{synthesize_lowlight, SynthSpec};
use crate::raster::ImageRgb;

pub const SCENE_KINDS: usize = 6;

fn color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [0; 3].map(|_| rng.random_range(0.1..0.9))
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|k| a[k] + (b[k] - a[k]) * t)
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Clean scene of kind `kind % SCENE_KINDS`, values in `[0.02, 0.98]`.
pub fn scene(kind: usize, height: usize, width: usize, seed: u64) -> ImageRgb {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(kind as u64));
    let (hf, wf) = (height as f64, width as f64);
    let img = match kind % SCENE_KINDS {
        0 => {
            let (top, horizon, ground) = (color(&mut rng), color(&mut rng), color(&mut rng));
            let sun = color(&mut rng).map(|v| 0.5 + 0.5 * v);
            let (sy, sx, sr) = (
                rng.random_range(0.1..0.35),
                rng.random_range(0.2..0.8),
                rng.random_range(0.05..0.12),
            );
            let line = rng.random_range(0.55..0.75);
            ImageRgb::from_fn(height, width, |r, c| {
                let (y, x) = (r as f64 / hf, c as f64 / wf);
                let sky = mix(top, horizon, y / line);
                let land = mix(ground, [0.1; 3], (y - line) / (1.0 - line));
                let base = mix(sky, land, smoothstep(line - 0.01, line + 0.01, y));
                let d = ((y - sy).powi(2) + (x - sx).powi(2)).sqrt();
                mix(base, sun, 1.0 - smoothstep(sr * 0.9, sr, d))
            })
        }
        1 => {
            let (a, b) = (color(&mut rng), color(&mut rng));
            let cell = rng.random_range(12..40) as f64;
            ImageRgb::from_fn(height, width, |r, c| {
                let parity =
                    ((r as f64 / cell).floor() + (c as f64 / cell).floor()) as i64 % 2 == 0;
                let (y, x) = (r as f64 / hf - 0.5, c as f64 / wf - 0.5);
                let vignette = 1.0 - 0.6 * (x * x + y * y);
                (if parity { a } else { b }).map(|v| v * vignette)
            })
        }
        2 => {
            let (bg0, bg1) = (color(&mut rng), color(&mut rng));
            let discs: Vec<_> = (0..rng.random_range(4..9))
                .map(|_| {
                    (
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.06..0.25),
                        color(&mut rng),
                    )
                })
                .collect();
            ImageRgb::from_fn(height, width, |r, c| {
                let (y, x) = (r as f64 / hf, c as f64 / wf);
                let mut px = mix(bg0, bg1, 0.5 * (x + y));
                for &(cy, cx, rad, col) in &discs {
                    let d = ((y - cy).powi(2) + (x - cx).powi(2)).sqrt();
                    px = mix(px, col, 1.0 - smoothstep(rad - 0.01, rad, d));
                }
                px
            })
        }
        3 => {
            let (a, b) = (color(&mut rng), color(&mut rng));
            let (fy, fx) = (rng.random_range(2.0..9.0), rng.random_range(2.0..9.0));
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            ImageRgb::from_fn(height, width, |r, c| {
                let (y, x) = (r as f64 / hf, c as f64 / wf);
                let t = 0.5 + 0.5 * (std::f64::consts::TAU * (fy * y + fx * x * x) + phase).sin();
                mix(a, b, t)
            })
        }
        4 => {
            let blobs: Vec<_> = (0..rng.random_range(5..12))
                .map(|_| {
                    (
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.05..0.3),
                        color(&mut rng),
                    )
                })
                .collect();
            let base = color(&mut rng).map(|v| 0.3 * v);
            ImageRgb::from_fn(height, width, |r, c| {
                let (y, x) = (r as f64 / hf, c as f64 / wf);
                let mut px = base;
                for &(cy, cx, s, col) in &blobs {
                    let g = (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * s * s)).exp();
                    px = [0, 1, 2].map(|k| px[k] + 0.7 * g * col[k]);
                }
                px
            })
        }
        _ => {
            let sky = color(&mut rng);
            let n = rng.random_range(3..7);
            let buildings: Vec<_> = (0..n)
                .map(|i| {
                    let x0 = i as f64 / n as f64 + rng.random_range(0.0..0.05);
                    let x1 = (i + 1) as f64 / n as f64 - rng.random_range(0.0..0.05);
                    (
                        x0,
                        x1,
                        rng.random_range(0.2..0.7),
                        color(&mut rng).map(|v| 0.6 * v),
                    )
                })
                .collect();
            let lit = [0.95, 0.85, 0.5];
            ImageRgb::from_fn(height, width, |r, c| {
                let (y, x) = (r as f64 / hf, c as f64 / wf);
                let mut px = mix(sky, [0.95; 3], y * 0.5);
                for &(x0, x1, top, col) in &buildings {
                    if x >= x0 && x < x1 && y >= top {
                        px = col;
                        let wy = ((y - top) * hf / 10.0).fract();
                        let wx = ((x - x0) * wf / 8.0).fract();
                        if (0.3..0.7).contains(&wy) && (0.3..0.7).contains(&wx) {
                            px = lit;
                        }
                    }
                }
                px
            })
        }
    };
    img.clamp(0.02, 0.98)
}

/// One low-light corpus image and the clean scene it was derived from.
#[derive(Debug, Clone)]
pub struct CorpusImage {
    pub name: String,
    pub low: ImageRgb,
    pub clean: ImageRgb,
    pub synth: SynthSpec,
}

/// The fixed 12-image low-light corpus: every scene kind twice, darkened
/// by factors between 0.15 and 0.425, with `σ = 5` noise on odd entries.
pub fn desk_corpus(size: usize) -> Vec<CorpusImage> {
    (0..12)
        .map(|i| {
            let clean = scene(i, size, size, 1000 + i as u64);
            let synth = SynthSpec {
                darken_factor: 0.15 + 0.025 * i as f64,
                noise_sigma: if i % 2 == 1 { 5.0 } else { 0.0 },
                rng_seed: 2000 + i as u64,
            };
            let low = synthesize_lowlight(&clean, &synth).expect("corpus settings are valid");
            CorpusImage {
                name: format!("desk_{i:02}"),
                low,
                clean,
                synth,
            }
        })
        .collect()
}

/// `count` clean scenes cycling through every kind, for paired synthetic
/// evaluation.
pub fn clean_scenes(count: usize, size: usize, base_seed: u64) -> Vec<(String, ImageRgb)> {
    (0..count)
        .map(|i| {
            (
                format!("scene_{i:03}"),
                scene(i, size, size, base_seed + i as u64),
            )
        })
        .collect()
}
