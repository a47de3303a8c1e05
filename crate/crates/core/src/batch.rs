//! Batched, optionally parallel runs of the per-image operations. Work fans
//! out over a bounded rayon pool and results merge in image-index order, so
//! outputs are deterministic regardless of thread count.

use rayon::prelude::*;

use crate::dataset::LabelPair;
use crate::encoder::{encode_targets, TargetMaps};
use crate::error::{Error, Result};
use crate::instance::extract_instances;
use crate::metrics::{counts_from_instances, mpq_plus, r2_score, PqStats};
use crate::postprocess::{postprocess, PostprocessParams};
use crate::types::{InstanceSet, LabeledImage, PredictionMaps, NUM_FG_CLASSES};

/// Run `f` on a rayon pool with exactly `threads` workers (0 = all cores).
/// Rayon operations invoked inside `f` share the one pool.
pub fn with_thread_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("failed to build thread pool");
    pool.install(f)
}

/// Encode targets for every label pair.
pub fn encode_batch(labels: &[LabelPair], threads: usize) -> Result<Vec<TargetMaps>> {
    with_thread_pool(threads, || encode_all(labels))
}

fn encode_all(labels: &[LabelPair]) -> Result<Vec<TargetMaps>> {
    labels
        .par_iter()
        .map(|(inst, cls)| {
            let label = LabeledImage {
                rgb: crate::grid::Grid::filled(inst.height(), inst.width(), [0u8; 3]),
                inst: inst.clone(),
                cls: cls.clone(),
            };
            encode_targets(&label)
        })
        .collect()
}

/// Decode every prediction into instances.
pub fn postprocess_batch(
    preds: &[PredictionMaps],
    params: &PostprocessParams,
    threads: usize,
) -> Vec<InstanceSet> {
    with_thread_pool(threads, || {
        preds.par_iter().map(|p| postprocess(p, params)).collect()
    })
}

/// Extract instance sets from label pairs.
pub fn extract_batch(labels: &[LabelPair], threads: usize) -> Result<Vec<InstanceSet>> {
    with_thread_pool(threads, || extract_all(labels))
}

fn extract_all(labels: &[LabelPair]) -> Result<Vec<InstanceSet>> {
    labels
        .par_iter()
        .map(|(inst, cls)| extract_instances(inst, cls))
        .collect()
}

/// The evaluation report: per-class PQ (None when a class is absent from
/// both sides), their mean, and per-class R² over counts with its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub pq_per_class: [Option<f64>; NUM_FG_CLASSES],
    pub mpq_plus: f64,
    pub r2_per_class: [f64; NUM_FG_CLASSES],
    pub r2_mean: f64,
}

/// Evaluate predicted instance sets against ground truth: dataset-level PQ
/// statistics (accumulated per image in parallel, merged in index order) and
/// the count-based R².
pub fn evaluate_sets(
    gt: &[InstanceSet],
    pred: &[InstanceSet],
    threads: usize,
) -> Result<Evaluation> {
    with_thread_pool(threads, || evaluate_sets_in_pool(gt, pred))
}

fn evaluate_sets_in_pool(gt: &[InstanceSet], pred: &[InstanceSet]) -> Result<Evaluation> {
    if gt.len() != pred.len() {
        return Err(Error::shape(format!(
            "{} ground-truth images vs {} predictions",
            gt.len(),
            pred.len()
        )));
    }
    let partials: Vec<PqStats> = gt
        .par_iter()
        .zip(pred.par_iter())
        .map(|(g, p)| {
            let mut stats = PqStats::new();
            stats.accumulate(g, p);
            stats
        })
        .collect();
    let mut stats = PqStats::new();
    for partial in &partials {
        stats.merge(partial);
    }
    let (pq_per_class, mean_pq) = mpq_plus(&stats)?;

    let gt_counts = counts_from_instances(gt);
    let pred_counts = counts_from_instances(pred);
    let (r2_per_class, r2_mean) = r2_score(&gt_counts, &pred_counts)?;

    Ok(Evaluation {
        pq_per_class,
        mpq_plus: mean_pq,
        r2_per_class,
        r2_mean,
    })
}

/// Augment every image/label pair; image i draws its plan from
/// `seed + i`. Results keep image-index order.
pub fn augment_batch(
    images: &[crate::grid::Grid<[u8; 3]>],
    labels: &[LabelPair],
    seed: u64,
    threads: usize,
) -> Result<Vec<(LabeledImage, TargetMaps)>> {
    if images.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} images vs {} labels",
            images.len(),
            labels.len()
        )));
    }
    with_thread_pool(threads, || {
        images
            .par_iter()
            .zip(labels.par_iter())
            .enumerate()
            .map(|(i, (rgb, (inst, cls)))| {
                let label = LabeledImage::new(rgb.clone(), inst.clone(), cls.clone())?;
                crate::augment::augment_sample(&label, seed.wrapping_add(i as u64))
            })
            .collect()
    })
}

/// Evaluate two label stacks (ground truth vs predicted labels) on one
/// shared pool.
pub fn evaluate_labels(gt: &[LabelPair], pred: &[LabelPair], threads: usize) -> Result<Evaluation> {
    with_thread_pool(threads, || {
        let gt_sets = extract_all(gt)?;
        let pred_sets = extract_all(pred)?;
        evaluate_sets_in_pool(&gt_sets, &pred_sets)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::types::ClassId;

    fn label_with_blob(h: usize, w: usize, class: u8) -> LabelPair {
        let mut inst = Grid::filled(h, w, 0u32);
        let mut cls = Grid::filled(h, w, ClassId::BACKGROUND);
        for r in 2..6 {
            for c in 2..6 {
                inst.set(r, c, 1);
                cls.set(r, c, ClassId::new(class).unwrap());
            }
        }
        (inst, cls)
    }

    #[test]
    fn evaluate_identical_labels_is_perfect() {
        let labels: Vec<LabelPair> = (1..=6).map(|k| label_with_blob(8, 8, k)).collect();
        let eval = evaluate_labels(&labels, &labels, 1).unwrap();
        assert_eq!(eval.mpq_plus, 1.0);
        assert_eq!(eval.r2_mean, 1.0);
        for pq in eval.pq_per_class.iter().flatten() {
            assert_eq!(*pq, 1.0);
        }
    }

    #[test]
    fn thread_count_does_not_change_the_result() {
        let labels: Vec<LabelPair> = (0..8)
            .map(|i| label_with_blob(8, 8, (i % 6 + 1) as u8))
            .collect();
        let mut shifted = labels.clone();
        // Degrade one prediction so the metrics are non-trivial.
        shifted[3] = label_with_blob(8, 8, 2);
        let single = evaluate_labels(&labels, &shifted, 1).unwrap();
        let multi = evaluate_labels(&labels, &shifted, 4).unwrap();
        assert_eq!(single, multi);
    }

    #[test]
    fn encode_batch_matches_single_image_encoding() {
        let labels: Vec<LabelPair> = vec![label_with_blob(8, 8, 3)];
        let batch = encode_batch(&labels, 2).unwrap();
        let single = encode_targets(
            &LabeledImage::new(
                Grid::filled(8, 8, [0u8; 3]),
                labels[0].0.clone(),
                labels[0].1.clone(),
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(batch[0], single);
    }
}
