//! Training-target generation: foreground mask, the two distance-map groups
//! (horizontal/vertical and diagonal), and one-hot type maps.

use crate::error::Result;
use crate::grid::Grid;
use crate::instance::group_instances;
use crate::types::{ClassId, LabeledImage, NUM_CLASSES};

/// Which pair of offset axes a distance group encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceAxes {
    /// Channel 0: Δcol (horizontal), channel 1: Δrow (vertical).
    HorizontalVertical,
    /// Channel 0: Δcol+Δrow (the x+y axis), channel 1: Δcol−Δrow (the x−y axis).
    Diagonal,
}

/// The regression/classification targets for one labeled image.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMaps {
    /// 1.0 on nucleus pixels, 0.0 on background.
    pub np: Grid<f64>,
    pub hv: [Grid<f64>; 2],
    pub dg: [Grid<f64>; 2],
    /// One-hot class maps; channel 0 is background.
    pub tp: Vec<Grid<f64>>,
}

/// Per-instance signed offsets from the centroid along two axes, each channel
/// normalized per instance so its extremes reach -1 and +1.
///
/// Offsets are kept in exact integer form (scaled by the instance pixel
/// count) so that a single rounding happens at the final division. Positive
/// offsets divide by the channel maximum, negative ones by |channel minimum|;
/// a degenerate axis stays 0 everywhere.
pub fn encode_distance_group(inst: &Grid<u32>, axes: DistanceAxes) -> [Grid<f64>; 2] {
    let (h, w) = inst.shape();
    let mut out = [Grid::filled(h, w, 0.0f64), Grid::filled(h, w, 0.0f64)];

    // Class map is irrelevant here; reuse the grouping with a permissive
    // class grid so disconnected ids still form one instance each.
    let cls_any = Grid::filled(h, w, ClassId::new(1).unwrap());
    let groups = group_instances(inst, &cls_any).expect("uniform class grid cannot conflict");

    for g in &groups {
        let n = g.pixels.len() as i64;
        // Numerators of (coordinate - centroid), scaled by n to stay integral.
        let offset = |r: usize, c: usize| -> (i64, i64) {
            let dc = n * c as i64 - g.sum_c as i64;
            let dr = n * r as i64 - g.sum_r as i64;
            match axes {
                DistanceAxes::HorizontalVertical => (dc, dr),
                DistanceAxes::Diagonal => (dc + dr, dc - dr),
            }
        };

        let mut max = [i64::MIN; 2];
        let mut min = [i64::MAX; 2];
        for &(r, c) in &g.pixels {
            let (d0, d1) = offset(r, c);
            for (ch, d) in [d0, d1].into_iter().enumerate() {
                max[ch] = max[ch].max(d);
                min[ch] = min[ch].min(d);
            }
        }

        for &(r, c) in &g.pixels {
            let (d0, d1) = offset(r, c);
            for (ch, d) in [d0, d1].into_iter().enumerate() {
                let v = match d.cmp(&0) {
                    std::cmp::Ordering::Greater => d as f64 / max[ch] as f64,
                    std::cmp::Ordering::Less => d as f64 / min[ch].abs() as f64,
                    std::cmp::Ordering::Equal => 0.0,
                };
                out[ch].set(r, c, v);
            }
        }
    }
    out
}

/// Build all target maps from a labeled image.
pub fn encode_targets(label: &LabeledImage) -> Result<TargetMaps> {
    // Surfaces InconsistentClass before any work.
    group_instances(&label.inst, &label.cls)?;

    let (h, w) = label.inst.shape();
    let np = label.inst.map(|id| if id > 0 { 1.0 } else { 0.0 });
    let hv = encode_distance_group(&label.inst, DistanceAxes::HorizontalVertical);
    let dg = encode_distance_group(&label.inst, DistanceAxes::Diagonal);

    let mut tp: Vec<Grid<f64>> = (0..NUM_CLASSES).map(|_| Grid::filled(h, w, 0.0)).collect();
    for ((r, c), class) in label.cls.indexed_iter() {
        tp[class.index()].set(r, c, 1.0);
    }

    Ok(TargetMaps { np, hv, dg, tp })
}

impl TargetMaps {
    pub fn shape(&self) -> (usize, usize) {
        self.np.shape()
    }

    /// Reinterpret targets as prediction maps (binary probabilities and
    /// one-hot class scores). This is the idealized decoder output used by
    /// the round-trip checks.
    pub fn to_predictions(&self) -> crate::types::PredictionMaps {
        crate::types::PredictionMaps {
            np_prob: self.np.clone(),
            hv: self.hv.clone(),
            dg: self.dg.clone(),
            tp_prob: self.tp.clone(),
        }
    }
}
