//! Seeded training augmentations applied jointly to image and labels:
//! flips/rotation/transpose as exact index permutations, photometric jitter
//! and blur on the RGB pixels only, with the regression targets regenerated
//! from the transformed instance map afterwards.

use crate::encoder::{encode_targets, TargetMaps};
use crate::error::Result;
use crate::grid::Grid;
use crate::rng::Rng;
use crate::types::LabeledImage;

/// Sampled color-jitter factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterFactors {
    /// Multiplies all channels; in [0.8, 1.2].
    pub brightness: f64,
    /// Scales the deviation from the image mean; in [0.75, 1.25].
    pub contrast: f64,
    /// Scales HSV saturation; in [0.8, 1.2].
    pub saturation: f64,
    /// Hue shift as a fraction of the full circle; in [-0.05, 0.05].
    pub hue: f64,
}

/// Direction of the 3-pixel motion-blur line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionDir {
    East,
    South,
    SouthEast,
    SouthWest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlurKind {
    /// 3×3 Gaussian with σ = 0.3.
    Gaussian,
    /// 3×3 median filter.
    Median,
    /// Normalized 3-pixel line along the given direction.
    Motion(MotionDir),
}

/// A fully sampled augmentation decision for one patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugPlan {
    pub hflip: bool,
    pub vflip: bool,
    /// Number of 90° counter-clockwise rotations, 0..=3.
    pub rot90_k: u8,
    pub transpose: bool,
    pub jitter: Option<JitterFactors>,
    pub blur: Option<BlurKind>,
}

impl AugPlan {
    /// The plan that changes nothing.
    pub fn identity() -> Self {
        Self {
            hflip: false,
            vflip: false,
            rot90_k: 0,
            transpose: false,
            jitter: None,
            blur: None,
        }
    }
}

/// Default probability that color jitter is applied.
pub const JITTER_PROB: f64 = 0.5;
/// Default probability that one of the three blurs is applied.
pub const BLUR_PROB: f64 = 0.3;

/// Sample a plan from a seed with the default jitter/blur probabilities.
pub fn sample_plan(seed: u64) -> AugPlan {
    sample_plan_with(seed, JITTER_PROB, BLUR_PROB)
}

/// Sample a plan from a seed. Fixed draw order on a xoshiro256** stream:
/// hflip, vflip, rot90_k, transpose, jitter gate (then brightness, contrast,
/// saturation, hue), blur gate (then kind, then motion direction).
pub fn sample_plan_with(seed: u64, jitter_prob: f64, blur_prob: f64) -> AugPlan {
    let mut rng = Rng::new(seed);
    let hflip = rng.bernoulli(0.5);
    let vflip = rng.bernoulli(0.5);
    let rot90_k = rng.next_index(4) as u8;
    let transpose = rng.bernoulli(0.5);
    let jitter = if rng.bernoulli(jitter_prob) {
        Some(JitterFactors {
            brightness: rng.uniform(0.8, 1.2),
            contrast: rng.uniform(0.75, 1.25),
            saturation: rng.uniform(0.8, 1.2),
            hue: rng.uniform(-0.05, 0.05),
        })
    } else {
        None
    };
    let blur = if rng.bernoulli(blur_prob) {
        Some(match rng.next_index(3) {
            0 => BlurKind::Gaussian,
            1 => BlurKind::Median,
            _ => BlurKind::Motion(match rng.next_index(4) {
                0 => MotionDir::East,
                1 => MotionDir::South,
                2 => MotionDir::SouthEast,
                _ => MotionDir::SouthWest,
            }),
        })
    } else {
        None
    };
    AugPlan {
        hflip,
        vflip,
        rot90_k,
        transpose,
        jitter,
        blur,
    }
}

fn permute<T: Copy>(grid: &Grid<T>, plan: &AugPlan) -> Grid<T> {
    let mut g = grid.clone();
    if plan.hflip {
        g = g.hflip();
    }
    if plan.vflip {
        g = g.vflip();
    }
    if plan.rot90_k > 0 {
        g = g.rot90(plan.rot90_k);
    }
    if plan.transpose {
        g = g.transpose();
    }
    g
}

/// Apply the plan's flips/rotation/transpose to rgb, inst, and cls as one
/// index permutation (order: hflip, vflip, rot90, transpose).
pub fn apply_geometric(label: &LabeledImage, plan: &AugPlan) -> LabeledImage {
    LabeledImage {
        rgb: permute(&label.rgb, plan),
        inst: permute(&label.inst, plan),
        cls: permute(&label.cls, plan),
    }
}

/// Apply the plan's color jitter (brightness, contrast, saturation, hue, in
/// that order) and blur to the RGB pixels. Pixels are processed in f64 and
/// written back with a final clamp to [0, 255] and round-half-away-from-zero.
pub fn apply_photometric(rgb: &Grid<[u8; 3]>, plan: &AugPlan) -> Grid<[u8; 3]> {
    if plan.jitter.is_none() && plan.blur.is_none() {
        return rgb.clone();
    }
    let mut img = rgb.map(|px| [px[0] as f64, px[1] as f64, px[2] as f64]);
    if let Some(j) = plan.jitter {
        // Brightness.
        img = img.map(|px| px.map(|v| v * j.brightness));
        // Contrast around the global mean.
        let mean = img.iter().map(|px| px[0] + px[1] + px[2]).sum::<f64>() / (3 * img.len()) as f64;
        img = img.map(|px| px.map(|v| (v - mean) * j.contrast + mean));
        // Saturation and hue operate in HSV; the conversion needs values in
        // [0, 255], so clamp what brightness/contrast pushed outside.
        img = img.map(|px| {
            let [r, g, b] = px.map(|v| v.clamp(0.0, 255.0) / 255.0);
            let (h, s, v) = rgb_to_hsv(r, g, b);
            let s = (s * j.saturation).clamp(0.0, 1.0);
            let h = (h + j.hue * 360.0).rem_euclid(360.0);
            let (r, g, b) = hsv_to_rgb(h, s, v);
            [r * 255.0, g * 255.0, b * 255.0]
        });
    }
    if let Some(kind) = plan.blur {
        img = blur(&img, kind);
    }
    img.map(|px| px.map(|v| v.clamp(0.0, 255.0).round() as u8))
}

fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0).rem_euclid(2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (h / 60.0) as usize % 6 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    (r + m, g + m, b + m)
}

fn blur(img: &Grid<[f64; 3]>, kind: BlurKind) -> Grid<[f64; 3]> {
    let (h, w) = img.shape();
    match kind {
        BlurKind::Gaussian => {
            // Separable 3-tap kernel for σ = 0.3.
            let k1 = (-1.0f64 / (2.0 * 0.3 * 0.3)).exp();
            let norm = 1.0 + 2.0 * k1;
            let taps = [k1 / norm, 1.0 / norm, k1 / norm];
            let horiz = Grid::from_fn(h, w, |r, c| {
                let mut acc = [0.0; 3];
                for (t, &k) in taps.iter().enumerate() {
                    let px = img.get_clamped(r as isize, c as isize + t as isize - 1);
                    for ch in 0..3 {
                        acc[ch] += k * px[ch];
                    }
                }
                acc
            });
            Grid::from_fn(h, w, |r, c| {
                let mut acc = [0.0; 3];
                for (t, &k) in taps.iter().enumerate() {
                    let px = horiz.get_clamped(r as isize + t as isize - 1, c as isize);
                    for ch in 0..3 {
                        acc[ch] += k * px[ch];
                    }
                }
                acc
            })
        }
        BlurKind::Median => Grid::from_fn(h, w, |r, c| {
            let mut out = [0.0; 3];
            for (ch, value) in out.iter_mut().enumerate() {
                let mut window = [0.0f64; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        window[i * 3 + j] = img
                            .get_clamped(r as isize + i as isize - 1, c as isize + j as isize - 1)
                            [ch];
                    }
                }
                window.sort_by(f64::total_cmp);
                *value = window[4];
            }
            out
        }),
        BlurKind::Motion(dir) => {
            let (dr, dc): (isize, isize) = match dir {
                MotionDir::East => (0, 1),
                MotionDir::South => (1, 0),
                MotionDir::SouthEast => (1, 1),
                MotionDir::SouthWest => (1, -1),
            };
            Grid::from_fn(h, w, |r, c| {
                let mut acc = [0.0; 3];
                for step in -1..=1isize {
                    let px = img.get_clamped(r as isize + step * dr, c as isize + step * dc);
                    for ch in 0..3 {
                        acc[ch] += px[ch] / 3.0;
                    }
                }
                acc
            })
        }
    }
}

/// Augment one labeled patch: geometric permutation of all planes,
/// photometric changes to the RGB only, then regenerate the target maps from
/// the transformed instance map.
pub fn augment_sample(label: &LabeledImage, seed: u64) -> Result<(LabeledImage, TargetMaps)> {
    let plan = sample_plan(seed);
    let mut out = apply_geometric(label, &plan);
    out.rgb = apply_photometric(&out.rgb, &plan);
    let targets = encode_targets(&out)?;
    Ok((out, targets))
}
