//! Shared synthetic-data generators for the integration and acceptance
//! suites. Everything is driven by the crate's own seeded PRNG so test
//! inputs are reproducible.

#![allow(dead_code)]

use nucleitool_core::grid::Grid;
use nucleitool_core::rng::Rng;
use nucleitool_core::types::{ClassId, LabeledImage};

/// One synthetic ellipse blob.
#[derive(Debug, Clone, Copy)]
pub struct Blob {
    pub center: (f64, f64),
    pub semi_major: f64,
    pub semi_minor: f64,
    pub angle: f64,
    pub class: u8,
}

impl Blob {
    pub fn contains(&self, r: usize, c: usize) -> bool {
        let dr = r as f64 - self.center.0;
        let dc = c as f64 - self.center.1;
        let (sin, cos) = self.angle.sin_cos();
        let u = dc * cos + dr * sin;
        let v = -dc * sin + dr * cos;
        (u / self.semi_major).powi(2) + (v / self.semi_minor).powi(2) <= 1.0
    }

    /// Radius of the disc that certainly contains the blob.
    pub fn bound(&self) -> f64 {
        self.semi_major.max(self.semi_minor)
    }
}

/// Place `count` non-touching elliptical blobs on an h×w canvas with
/// semi-major axes in [r_min, r_max] and minor/major ratio at least
/// `ratio_min`. Blobs keep a margin from the border and a gap from each
/// other.
pub fn random_blobs_with(
    rng: &mut Rng,
    h: usize,
    w: usize,
    count: usize,
    r_min: f64,
    r_max: f64,
    ratio_min: f64,
) -> Vec<Blob> {
    let mut blobs: Vec<Blob> = Vec::new();
    let mut attempts = 0;
    while blobs.len() < count && attempts < 200_000 {
        attempts += 1;
        let semi_major = rng.uniform(r_min, r_max);
        let semi_minor = semi_major * rng.uniform(ratio_min, 1.0);
        let bound = semi_major.max(semi_minor);
        let margin = bound + 3.0;
        if 2.0 * margin >= h as f64 || 2.0 * margin >= w as f64 {
            continue;
        }
        let center = (
            rng.uniform(margin, h as f64 - margin),
            rng.uniform(margin, w as f64 - margin),
        );
        let candidate = Blob {
            center,
            semi_major,
            semi_minor,
            angle: rng.uniform(0.0, std::f64::consts::PI),
            class: (rng.next_index(6) + 1) as u8,
        };
        let clear = blobs.iter().all(|b| {
            let dr = b.center.0 - center.0;
            let dc = b.center.1 - center.1;
            (dr * dr + dc * dc).sqrt() > b.bound() + candidate.bound() + 4.0
        });
        if clear {
            blobs.push(candidate);
        }
    }
    assert_eq!(blobs.len(), count, "could not place {count} blobs");
    blobs
}

/// Non-touching blobs big enough for the watershed round trip: semi-axes in
/// [6.8, 12.5] (thinner shapes have no interior below the marker energy
/// threshold).
pub fn random_blobs(rng: &mut Rng, h: usize, w: usize, count: usize) -> Vec<Blob> {
    random_blobs_with(rng, h, w, count, 8.0, 12.5, 0.85)
}

/// Rasterize blobs into a labeled image (ids 1..=count in input order).
/// Blobs are disjoint, so each one only needs its bounding box scanned.
pub fn rasterize(blobs: &[Blob], h: usize, w: usize) -> LabeledImage {
    let mut inst = Grid::filled(h, w, 0u32);
    let mut cls = Grid::filled(h, w, ClassId::BACKGROUND);
    for (i, blob) in blobs.iter().enumerate() {
        let bound = blob.bound() + 1.0;
        let r0 = (blob.center.0 - bound).floor().max(0.0) as usize;
        let r1 = ((blob.center.0 + bound).ceil() as usize).min(h - 1);
        let c0 = (blob.center.1 - bound).floor().max(0.0) as usize;
        let c1 = ((blob.center.1 + bound).ceil() as usize).min(w - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                if blob.contains(r, c) {
                    inst.set(r, c, (i + 1) as u32);
                    cls.set(r, c, ClassId::new(blob.class).unwrap());
                }
            }
        }
    }
    LabeledImage::new(Grid::filled(h, w, [128u8; 3]), inst, cls).unwrap()
}

/// A random labeled image with `count` well-separated blobs.
pub fn random_label(rng: &mut Rng, h: usize, w: usize, count: usize) -> LabeledImage {
    let blobs = random_blobs(rng, h, w, count);
    rasterize(&blobs, h, w)
}

/// Two adjacent discs whose centers sit `r1 + r2` apart along a random
/// direction; shared pixels go to the nearer center. Decoding should split
/// them back into two instances.
pub fn touching_pair(rng: &mut Rng, h: usize, w: usize) -> LabeledImage {
    let r1 = rng.uniform(7.0, 12.0);
    let r2 = rng.uniform(7.0, 12.0);
    let theta = rng.uniform(0.0, std::f64::consts::TAU);
    let gap = r1 + r2;
    let margin = r1.max(r2) + gap + 4.0;
    let c1 = (
        rng.uniform(margin, h as f64 - margin),
        rng.uniform(margin, w as f64 - margin),
    );
    let c2 = (c1.0 + gap * theta.sin(), c1.1 + gap * theta.cos());

    let mut inst = Grid::filled(h, w, 0u32);
    let mut cls = Grid::filled(h, w, ClassId::BACKGROUND);
    for r in 0..h {
        for c in 0..w {
            let d1 = ((r as f64 - c1.0).powi(2) + (c as f64 - c1.1).powi(2)).sqrt();
            let d2 = ((r as f64 - c2.0).powi(2) + (c as f64 - c2.1).powi(2)).sqrt();
            let in1 = d1 <= r1;
            let in2 = d2 <= r2;
            if in1 || in2 {
                let id = if in1 && in2 {
                    if d1 / r1 <= d2 / r2 {
                        1
                    } else {
                        2
                    }
                } else if in1 {
                    1
                } else {
                    2
                };
                inst.set(r, c, id);
                cls.set(r, c, ClassId::new(if id == 1 { 2 } else { 3 }).unwrap());
            }
        }
    }
    LabeledImage::new(Grid::filled(h, w, [128u8; 3]), inst, cls).unwrap()
}
