//! Decoding prediction maps into instances: boundary-energy construction from
//! the two distance groups, marker extraction, and marker-controlled
//! watershed flooding.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::collections::BinaryHeap;

use crate::components::{connected_components, drop_small_components, Connectivity};
use crate::grid::Grid;
use crate::instance::extract_instances;
use crate::sobel::{sobel_x, sobel_y};
use crate::types::{ClassId, InstanceSet, PredictionMaps, NUM_CLASSES};

/// Thresholds for the watershed decoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocessParams {
    /// Foreground probability threshold.
    pub t_fg: f64,
    /// Marker energy threshold: markers grow where energy stays below this.
    pub t_energy: f64,
    /// Components smaller than this are discarded (markers and instances).
    pub min_size: usize,
}

impl Default for PostprocessParams {
    fn default() -> Self {
        Self {
            t_fg: 0.5,
            t_energy: 0.4,
            min_size: 10,
        }
    }
}

const RESCALE_EPS: f64 = 1e-6;

/// Boundary energy of one distance group: Sobel-x of the first channel and
/// Sobel-y of the second, each |·| min-max rescaled over the image, combined
/// by per-pixel max.
pub fn energy_map(group: &[Grid<f64>; 2]) -> Grid<f64> {
    let gx = sobel_x(&group[0]);
    let gy = sobel_y(&group[1]);
    let gx = rescale_abs(&gx);
    let gy = rescale_abs(&gy);
    Grid::from_fn(gx.height(), gx.width(), |r, c| {
        gx.get(r, c).max(gy.get(r, c))
    })
}

fn rescale_abs(g: &Grid<f64>) -> Grid<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in g.iter() {
        let a = v.abs();
        lo = lo.min(a);
        hi = hi.max(a);
    }
    let span = hi - lo + RESCALE_EPS;
    g.map(|v| (v.abs() - lo) / span)
}

/// Combine the two group energies. The interior-ness maps (1 − E) are merged
/// by per-pixel minimum, which is the same as taking the per-pixel maximum of
/// the boundary energies.
pub fn combine_energies(e_hv: &Grid<f64>, e_dg: &Grid<f64>) -> Grid<f64> {
    assert!(e_hv.same_shape(e_dg), "energy shape mismatch");
    Grid::from_fn(e_hv.height(), e_hv.width(), |r, c| {
        e_hv.get(r, c).max(e_dg.get(r, c))
    })
}

/// Seed regions: foreground pixels whose combined energy is below
/// `t_energy`, with components under `min_size` dropped, labeled 1..=K in
/// raster order.
pub fn extract_markers(
    np_prob: &Grid<f64>,
    energy: &Grid<f64>,
    params: &PostprocessParams,
) -> Grid<u32> {
    assert!(np_prob.same_shape(energy), "marker input shape mismatch");
    let mask = Grid::from_fn(np_prob.height(), np_prob.width(), |r, c| {
        np_prob.get(r, c) > params.t_fg && energy.get(r, c) < params.t_energy
    });
    let labels = connected_components(&mask, Connectivity::Eight);
    drop_small_components(&labels, params.min_size)
}

#[derive(PartialEq)]
struct FloodEntry {
    elevation: f64,
    seq: u64,
    index: u32,
}

impl Eq for FloodEntry {}

impl Ord for FloodEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.elevation
            .total_cmp(&other.elevation)
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for FloodEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Marker-controlled flooding of `energy` restricted to `fg`. Each foreground
/// pixel 8-connected to a marker takes the label of the marker it is reached
/// from along the lowest-elevation frontier; ties break by insertion order.
/// Foreground pixels unreachable from any marker stay 0.
pub fn watershed(energy: &Grid<f64>, markers: &Grid<u32>, fg: &Grid<bool>) -> Grid<u32> {
    assert!(energy.same_shape(markers) && energy.same_shape(fg));
    let (h, w) = energy.shape();
    let mut labels = markers.clone();
    let mut queued: Vec<bool> = markers.iter().map(|&m| m > 0).collect();
    let mut heap: BinaryHeap<Reverse<FloodEntry>> = BinaryHeap::new();
    let mut seq = 0u64;

    for ((r, c), m) in markers.indexed_iter() {
        if m > 0 {
            heap.push(Reverse(FloodEntry {
                elevation: energy.get(r, c),
                seq,
                index: (r * w + c) as u32,
            }));
            seq += 1;
        }
    }

    while let Some(Reverse(entry)) = heap.pop() {
        let r = entry.index as usize / w;
        let c = entry.index as usize % w;
        let label = labels.get(r, c);
        for (dr, dc) in NEIGHBORS_8 {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            let ni = nr * w + nc;
            if queued[ni] || !fg.get(nr, nc) {
                continue;
            }
            queued[ni] = true;
            labels.set(nr, nc, label);
            heap.push(Reverse(FloodEntry {
                elevation: energy.get(nr, nc),
                seq,
                index: ni as u32,
            }));
            seq += 1;
        }
    }
    labels
}

/// Per-instance class assignment: majority vote over per-pixel argmax
/// restricted to the foreground classes; if no pixel votes for a foreground
/// class, the class with the highest mean probability wins. Ties go to the
/// smallest class id.
pub fn assign_classes(inst: &Grid<u32>, tp_prob: &[Grid<f64>]) -> BTreeMap<u32, ClassId> {
    assert_eq!(tp_prob.len(), NUM_CLASSES);
    let max_label = inst.iter().copied().max().unwrap_or(0) as usize;
    let mut votes = vec![[0u32; NUM_CLASSES]; max_label + 1];
    let mut prob_sums = vec![[0.0f64; NUM_CLASSES]; max_label + 1];

    for ((r, c), id) in inst.indexed_iter() {
        if id == 0 {
            continue;
        }
        let mut best = 0usize;
        let mut best_p = tp_prob[0].get(r, c);
        for (ch, g) in tp_prob.iter().enumerate().skip(1) {
            let p = g.get(r, c);
            if p > best_p {
                best = ch;
                best_p = p;
            }
        }
        votes[id as usize][best] += 1;
        for ch in 0..NUM_CLASSES {
            prob_sums[id as usize][ch] += tp_prob[ch].get(r, c);
        }
    }

    let mut out = BTreeMap::new();
    for id in 1..=max_label {
        let total: u32 = votes[id].iter().sum();
        if total == 0 {
            continue; // label absent from the map
        }
        let fg_votes = &votes[id][1..];
        let class = if fg_votes.iter().any(|&v| v > 0) {
            let best = fg_votes
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i + 1)
                .unwrap();
            ClassId::new(best as u8).unwrap()
        } else {
            let means = &prob_sums[id][1..];
            let best = means
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i + 1)
                .unwrap();
            ClassId::new(best as u8).unwrap()
        };
        out.insert(id as u32, class);
    }
    out
}

/// Full decoding: energy construction, marker extraction, watershed, small
/// instance removal, raster relabeling, and class assignment.
pub fn postprocess(pred: &PredictionMaps, params: &PostprocessParams) -> InstanceSet {
    let e_hv = energy_map(&pred.hv);
    let e_dg = energy_map(&pred.dg);
    let energy = combine_energies(&e_hv, &e_dg);
    let fg = pred.np_prob.map(|p| p > params.t_fg);

    let markers = extract_markers(&pred.np_prob, &energy, params);
    let flooded = watershed(&energy, &markers, &fg);
    let labels = drop_small_components(&flooded, params.min_size);

    let classes = assign_classes(&labels, &pred.tp_prob);
    let cls = labels.map(|id| {
        if id == 0 {
            ClassId::BACKGROUND
        } else {
            classes[&id]
        }
    });
    extract_instances(&labels, &cls).expect("per-label class maps are consistent by construction")
}
