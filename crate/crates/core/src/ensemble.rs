//! Branch-wise averaging of multiple models' prediction maps.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::types::{PredictionMaps, NUM_CLASSES};

/// Element-wise mean of K prediction sets. Every branch is averaged
/// independently; the type probabilities are re-normalized per pixel when
/// K > 1 to absorb accumulated rounding.
///
/// Summands are accumulated in sorted order, so the result is invariant
/// under permutations of the input list bit-for-bit.
pub fn average_predictions(preds: &[PredictionMaps]) -> Result<PredictionMaps> {
    let first = preds.first().ok_or(Error::EmptyEnsemble)?;
    if preds.iter().any(|p| !p.same_shape(first)) {
        return Err(Error::shape(
            "ensemble members disagree on (H, W)".to_string(),
        ));
    }
    if preds.iter().any(|p| p.tp_prob.len() != NUM_CLASSES) {
        return Err(Error::shape(format!(
            "ensemble member with tp channel count != {NUM_CLASSES}"
        )));
    }
    let k = preds.len();
    if k == 1 {
        return Ok(first.clone());
    }

    // The clamp only clips the odd last-ulp overflow of the rounded sum, so
    // output ranges match the inputs' contracts.
    let mean_of = |pick: &dyn Fn(&PredictionMaps) -> &Grid<f64>, lo: f64, hi: f64| -> Grid<f64> {
        let (h, w) = first.shape();
        let mut scratch = vec![0.0f64; k];
        Grid::from_fn(h, w, |r, c| {
            for (s, p) in scratch.iter_mut().zip(preds.iter()) {
                *s = pick(p).get(r, c);
            }
            scratch.sort_by(f64::total_cmp);
            (scratch.iter().sum::<f64>() / k as f64).clamp(lo, hi)
        })
    };

    let np_prob = mean_of(&|p| &p.np_prob, 0.0, 1.0);
    let hv = [
        mean_of(&|p| &p.hv[0], -1.0, 1.0),
        mean_of(&|p| &p.hv[1], -1.0, 1.0),
    ];
    let dg = [
        mean_of(&|p| &p.dg[0], -1.0, 1.0),
        mean_of(&|p| &p.dg[1], -1.0, 1.0),
    ];
    let mut tp_prob: Vec<Grid<f64>> = (0..NUM_CLASSES)
        .map(|ch| mean_of(&move |p: &PredictionMaps| &p.tp_prob[ch], 0.0, 1.0))
        .collect();

    // Per-pixel simplex renormalization.
    let (h, w) = first.shape();
    for r in 0..h {
        for c in 0..w {
            let sum: f64 = tp_prob.iter().map(|g| g.get(r, c)).sum();
            if sum > 0.0 {
                for g in tp_prob.iter_mut() {
                    let v = g.get(r, c);
                    g.set(r, c, v / sum);
                }
            }
        }
    }

    Ok(PredictionMaps {
        np_prob,
        hv,
        dg,
        tp_prob,
    })
}
