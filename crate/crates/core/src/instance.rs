//! Instance extraction from id/class maps, and pixel-set IoU.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::types::{ClassId, Instance, InstanceSet};

pub(crate) struct InstanceGroup {
    pub id: u32,
    pub pixels: Vec<(usize, usize)>,
    pub class: ClassId,
    pub sum_r: u64,
    pub sum_c: u64,
}

/// Group pixels by instance id in raster order of first occurrence, checking
/// that every id carries exactly one foreground class.
pub(crate) fn group_instances(inst: &Grid<u32>, cls: &Grid<ClassId>) -> Result<Vec<InstanceGroup>> {
    assert!(inst.same_shape(cls), "inst/cls shape mismatch");
    let mut groups: Vec<InstanceGroup> = Vec::new();
    let mut index_of: HashMap<u32, usize> = HashMap::new();

    for ((r, c), id) in inst.indexed_iter() {
        if id == 0 {
            continue;
        }
        let class = cls.get(r, c);
        match index_of.get(&id) {
            None => {
                if class.is_background() {
                    return Err(Error::InconsistentClass { id });
                }
                index_of.insert(id, groups.len());
                groups.push(InstanceGroup {
                    id,
                    pixels: vec![(r, c)],
                    class,
                    sum_r: r as u64,
                    sum_c: c as u64,
                });
            }
            Some(&i) => {
                let g = &mut groups[i];
                if g.class != class {
                    return Err(Error::InconsistentClass { id });
                }
                g.pixels.push((r, c));
                g.sum_r += r as u64;
                g.sum_c += c as u64;
            }
        }
    }
    Ok(groups)
}

/// Decode an instance-id map plus class map into an `InstanceSet`.
///
/// Instances appear in raster order of their first pixel; the centroid is the
/// arithmetic mean of pixel coordinates.
pub fn extract_instances(inst: &Grid<u32>, cls: &Grid<ClassId>) -> Result<InstanceSet> {
    let groups = group_instances(inst, cls)?;
    let instances = groups
        .into_iter()
        .map(|g| {
            let n = g.pixels.len() as f64;
            Instance {
                id: g.id,
                centroid: (g.sum_r as f64 / n, g.sum_c as f64 / n),
                class: g.class,
                pixels: g.pixels,
            }
        })
        .collect();
    Ok(InstanceSet::new(inst.height(), inst.width(), instances))
}

/// Intersection-over-union of two pixel sets given as raster-sorted slices.
/// iou(∅, ∅) = 0 by definition.
pub fn iou(a: &[(usize, usize)], b: &[(usize, usize)]) -> f64 {
    let inter = intersection_size(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// |a ∩ b| for raster-sorted pixel slices (linear merge).
pub fn intersection_size(a: &[(usize, usize)], b: &[(usize, usize)]) -> usize {
    let mut i = 0;
    let mut j = 0;
    let mut inter = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_map_gives_empty_set() {
        let inst = Grid::filled(4, 4, 0u32);
        let cls = Grid::filled(4, 4, ClassId::BACKGROUND);
        let set = extract_instances(&inst, &cls).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn block_centroid_and_class() {
        let mut inst = Grid::filled(8, 8, 0u32);
        let mut cls = Grid::filled(8, 8, ClassId::BACKGROUND);
        for r in 0..3 {
            for c in 0..3 {
                inst.set(r, c, 5);
                cls.set(r, c, ClassId::new(2).unwrap());
            }
        }
        let set = extract_instances(&inst, &cls).unwrap();
        assert_eq!(set.len(), 1);
        let instance = &set.instances[0];
        assert_eq!(instance.id, 5);
        assert_eq!(instance.class.value(), 2);
        assert_eq!(instance.centroid, (1.0, 1.0));
        assert_eq!(instance.area(), 9);
    }

    #[test]
    fn split_class_is_rejected() {
        let mut inst = Grid::filled(4, 4, 0u32);
        let mut cls = Grid::filled(4, 4, ClassId::BACKGROUND);
        inst.set(0, 0, 1);
        cls.set(0, 0, ClassId::new(1).unwrap());
        inst.set(0, 1, 1);
        cls.set(0, 1, ClassId::new(2).unwrap());
        match extract_instances(&inst, &cls) {
            Err(Error::InconsistentClass { id: 1 }) => {}
            other => panic!("expected InconsistentClass, got {other:?}"),
        }
    }

    #[test]
    fn roundtrip_through_maps_is_identity() {
        let mut inst = Grid::filled(6, 9, 0u32);
        let mut cls = Grid::filled(6, 9, ClassId::BACKGROUND);
        for (r, c, id, k) in [(0, 0, 3, 1), (0, 1, 3, 1), (4, 7, 9, 6), (5, 7, 9, 6)] {
            inst.set(r, c, id);
            cls.set(r, c, ClassId::new(k).unwrap());
        }
        let set = extract_instances(&inst, &cls).unwrap();
        let (inst2, cls2) = set.to_maps();
        assert_eq!(inst, inst2);
        assert_eq!(cls, cls2);
    }

    #[test]
    fn iou_examples() {
        let a: Vec<_> = (0..5).map(|c| (0usize, c as usize)).collect();
        assert_eq!(iou(&a, &a), 1.0);

        let b: Vec<_> = (0..5).map(|c| (1usize, c as usize)).collect();
        assert_eq!(iou(&a, &b), 0.0);

        // |a| = |b| = 4, overlap 2 -> 2/6.
        let a: Vec<_> = (0..4).map(|c| (0usize, c)).collect();
        let b: Vec<_> = (2..6).map(|c| (0usize, c)).collect();
        assert!((iou(&a, &b) - 2.0 / 6.0).abs() < 1e-15);

        assert_eq!(iou(&[], &[]), 0.0);
    }
}
