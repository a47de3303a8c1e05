//! Evaluation metrics: class-averaged panoptic quality over dataset-level
//! statistics (mPQ+) and the per-class coefficient of determination over
//! nucleus counts (R²).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::instance::iou;
use crate::types::{InstanceSet, NUM_FG_CLASSES};

/// IoU must strictly exceed this for a gt/pred pair to match.
pub const MATCH_IOU: f64 = 0.5;

/// Matching of two lists of pixel sets at IoU > 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// (gt index, pred index, iou), in descending IoU order.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

/// Match ground-truth against predicted pixel sets. Pairs with IoU > 0.5 are
/// unique per instance, so greedy selection by descending IoU is the optimal
/// matching.
pub fn match_instances(gt: &[&[(usize, usize)]], pred: &[&[(usize, usize)]]) -> MatchResult {
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for (g, gp) in gt.iter().enumerate() {
        for (p, pp) in pred.iter().enumerate() {
            let v = iou(gp, pp);
            if v > MATCH_IOU {
                candidates.push((g, p, v));
            }
        }
    }
    greedy_select(candidates, gt.len(), pred.len())
}

fn greedy_select(
    mut candidates: Vec<(usize, usize, f64)>,
    n_gt: usize,
    n_pred: usize,
) -> MatchResult {
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut gt_used = vec![false; n_gt];
    let mut pred_used = vec![false; n_pred];
    let mut matches = Vec::new();
    for (g, p, v) in candidates {
        if !gt_used[g] && !pred_used[p] {
            gt_used[g] = true;
            pred_used[p] = true;
            matches.push((g, p, v));
        }
    }
    let unmatched_gt = (0..n_gt).filter(|&g| !gt_used[g]).collect();
    let unmatched_pred = (0..n_pred).filter(|&p| !pred_used[p]).collect();
    MatchResult {
        matches,
        unmatched_gt,
        unmatched_pred,
    }
}

/// Dataset-level accumulators per foreground class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PqClassStats {
    pub iou_sum: f64,
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl PqClassStats {
    pub fn is_empty(&self) -> bool {
        self.true_pos == 0 && self.false_pos == 0 && self.false_neg == 0
    }

    /// PQ = Σ matched IoU / (TP + ½FP + ½FN); None when no statistics exist.
    pub fn pq(&self) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let denom =
            self.true_pos as f64 + 0.5 * self.false_pos as f64 + 0.5 * self.false_neg as f64;
        Some(self.iou_sum / denom)
    }
}

/// Per-class PQ statistics accumulated over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PqStats {
    pub classes: [PqClassStats; NUM_FG_CLASSES],
}

impl PqStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Merge another accumulator into this one. Addition is associative and
    /// commutative, so per-image partials can be combined in any grouping.
    pub fn merge(&mut self, other: &PqStats) {
        for (a, b) in self.classes.iter_mut().zip(other.classes.iter()) {
            a.iou_sum += b.iou_sum;
            a.true_pos += b.true_pos;
            a.false_pos += b.false_pos;
            a.false_neg += b.false_neg;
        }
    }

    /// Accumulate the class-partitioned matching of one image pair.
    /// Instances of different classes never match each other.
    pub fn accumulate(&mut self, gt: &InstanceSet, pred: &InstanceSet) {
        assert_eq!(
            (gt.height(), gt.width()),
            (pred.height(), pred.width()),
            "gt/pred image dims differ"
        );
        // Pixel -> gt instance index, for overlap counting in O(pixels).
        let mut gt_at: Grid<u32> = Grid::filled(gt.height(), gt.width(), u32::MAX);
        for (gi, g) in gt.iter().enumerate() {
            for &(r, c) in &g.pixels {
                gt_at.set(r, c, gi as u32);
            }
        }
        let mut overlaps: HashMap<(usize, usize), usize> = HashMap::new();
        for (pi, p) in pred.iter().enumerate() {
            for &(r, c) in &p.pixels {
                let gi = gt_at.get(r, c);
                if gi != u32::MAX {
                    *overlaps.entry((gi as usize, pi)).or_insert(0) += 1;
                }
            }
        }

        for class in 1..=NUM_FG_CLASSES {
            let gt_idx: Vec<usize> = (0..gt.len())
                .filter(|&i| gt.instances[i].class.index() == class)
                .collect();
            let pred_idx: Vec<usize> = (0..pred.len())
                .filter(|&i| pred.instances[i].class.index() == class)
                .collect();

            let mut candidates = Vec::new();
            for (g_local, &gi) in gt_idx.iter().enumerate() {
                for (p_local, &pi) in pred_idx.iter().enumerate() {
                    if let Some(&inter) = overlaps.get(&(gi, pi)) {
                        let union = gt.instances[gi].area() + pred.instances[pi].area() - inter;
                        let v = inter as f64 / union as f64;
                        if v > MATCH_IOU {
                            candidates.push((g_local, p_local, v));
                        }
                    }
                }
            }
            let result = greedy_select(candidates, gt_idx.len(), pred_idx.len());

            let stats = &mut self.classes[class - 1];
            stats.true_pos += result.matches.len() as u64;
            stats.iou_sum += result.matches.iter().map(|m| m.2).sum::<f64>();
            stats.false_neg += result.unmatched_gt.len() as u64;
            stats.false_pos += result.unmatched_pred.len() as u64;
            // Each matched IoU lies in (0.5, 1].
            debug_assert!(stats.iou_sum <= stats.true_pos as f64 + 1e-9);
            debug_assert!(stats.iou_sum >= 0.5 * stats.true_pos as f64);
        }
    }
}

/// mPQ+: per-class PQ from the dataset-level statistics, averaged over the
/// classes that appear at all. Errors if every class is absent.
pub fn mpq_plus(stats: &PqStats) -> Result<([Option<f64>; NUM_FG_CLASSES], f64)> {
    let mut per_class = [None; NUM_FG_CLASSES];
    let mut sum = 0.0;
    let mut present = 0usize;
    for (i, class) in stats.classes.iter().enumerate() {
        per_class[i] = class.pq();
        if let Some(v) = per_class[i] {
            sum += v;
            present += 1;
        }
    }
    if present == 0 {
        return Err(Error::NoClassesPresent);
    }
    Ok((per_class, sum / present as f64))
}

/// Per-image, per-class instance counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountTable {
    pub rows: Vec<[u32; NUM_FG_CLASSES]>,
}

/// Count instances of each class in each image.
pub fn counts_from_instances(sets: &[InstanceSet]) -> CountTable {
    CountTable {
        rows: sets.iter().map(|s| s.class_counts()).collect(),
    }
}

/// Coefficient of determination per class over the per-image counts, plus
/// the mean over the six classes.
///
/// When a class has constant ground-truth counts (SS_tot = 0) the score is
/// 1.0 for an exact prediction and 0.0 otherwise.
pub fn r2_score(gt: &CountTable, pred: &CountTable) -> Result<([f64; NUM_FG_CLASSES], f64)> {
    if gt.rows.len() != pred.rows.len() {
        return Err(Error::shape(format!(
            "count tables have {} vs {} rows",
            gt.rows.len(),
            pred.rows.len()
        )));
    }
    let n = gt.rows.len();
    let mut per_class = [0.0; NUM_FG_CLASSES];
    for class in 0..NUM_FG_CLASSES {
        let mean = gt.rows.iter().map(|r| r[class] as f64).sum::<f64>() / n.max(1) as f64;
        let mut ss_res = 0.0;
        let mut ss_tot = 0.0;
        for (g, p) in gt.rows.iter().zip(pred.rows.iter()) {
            let y = g[class] as f64;
            let y_hat = p[class] as f64;
            ss_res += (y - y_hat) * (y - y_hat);
            ss_tot += (y - mean) * (y - mean);
        }
        per_class[class] = if ss_tot == 0.0 {
            if ss_res == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            1.0 - ss_res / ss_tot
        };
    }
    let mean = per_class.iter().sum::<f64>() / NUM_FG_CLASSES as f64;
    Ok((per_class, mean))
}
