//! Domain types shared across the pipeline: class ids, labeled images,
//! prediction maps, and decoded instance sets.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Number of type channels (background + 6 nucleus classes).
pub const NUM_CLASSES: usize = 7;

/// Number of foreground nucleus classes.
pub const NUM_FG_CLASSES: usize = 6;

/// Nucleus class id. 0 is background; 1..=6 are the nucleus types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ClassId(u8);

impl ClassId {
    pub const BACKGROUND: ClassId = ClassId(0);

    pub fn new(value: u8) -> Result<Self> {
        if value as usize >= NUM_CLASSES {
            return Err(Error::InvalidClass {
                value: value as i64,
            });
        }
        Ok(ClassId(value))
    }

    #[inline]
    pub fn value(self) -> u8 {
        self.0
    }

    /// Channel index into a 7-channel type map.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_background(self) -> bool {
        self.0 == 0
    }

    /// The six foreground classes in id order.
    pub fn foreground() -> impl Iterator<Item = ClassId> {
        (1..NUM_CLASSES as u8).map(ClassId)
    }

    pub fn name(self) -> &'static str {
        CLASS_NAMES[self.0 as usize]
    }
}

/// Class names indexed by class id.
pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "background",
    "neutrophil",
    "epithelial",
    "lymphocyte",
    "plasma",
    "eosinophil",
    "connective",
];

/// A ground-truth patch: RGB pixels, per-pixel instance ids (0 = background),
/// and per-pixel class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub rgb: Grid<[u8; 3]>,
    pub inst: Grid<u32>,
    pub cls: Grid<ClassId>,
}

impl LabeledImage {
    pub fn new(rgb: Grid<[u8; 3]>, inst: Grid<u32>, cls: Grid<ClassId>) -> Result<Self> {
        if !rgb.same_shape(&inst) || !rgb.same_shape(&cls) {
            return Err(Error::shape(format!(
                "rgb {:?}, inst {:?}, cls {:?}",
                rgb.shape(),
                inst.shape(),
                cls.shape()
            )));
        }
        let img = Self { rgb, inst, cls };
        img.check_consistency()?;
        Ok(img)
    }

    pub fn height(&self) -> usize {
        self.inst.height()
    }

    pub fn width(&self) -> usize {
        self.inst.width()
    }

    /// Check inst>0 ⇔ cls>0 at every pixel and that each instance id carries
    /// a single class id.
    pub fn check_consistency(&self) -> Result<()> {
        for ((r, c), id) in self.inst.indexed_iter() {
            if (id > 0) != !self.cls.get(r, c).is_background() {
                return Err(Error::InstClassMismatch { row: r, col: c });
            }
        }
        crate::instance::group_instances(&self.inst, &self.cls)?;
        Ok(())
    }
}

/// The three decoder outputs for one image: foreground probability, two
/// distance-map groups, and the 7-class type probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMaps {
    /// Foreground probability in [0, 1].
    pub np_prob: Grid<f64>,
    /// Horizontal (channel 0) and vertical (channel 1) distance maps in [-1, 1].
    pub hv: [Grid<f64>; 2],
    /// Diagonal distance maps in [-1, 1]: channel 0 along x+y, channel 1 along x-y.
    pub dg: [Grid<f64>; 2],
    /// Per-pixel class probabilities, 7 channels summing to 1.
    pub tp_prob: Vec<Grid<f64>>,
}

impl PredictionMaps {
    pub fn shape(&self) -> (usize, usize) {
        self.np_prob.shape()
    }

    pub fn same_shape(&self, other: &PredictionMaps) -> bool {
        self.np_prob.same_shape(&other.np_prob)
    }

    /// Check channel counts, value ranges, and the per-pixel simplex
    /// constraint on the type probabilities (tolerance 1e-6).
    pub fn validate(&self) -> Result<()> {
        if self.tp_prob.len() != NUM_CLASSES {
            return Err(Error::shape(format!(
                "tp_prob has {} channels, expected {NUM_CLASSES}",
                self.tp_prob.len()
            )));
        }
        for g in self
            .hv
            .iter()
            .chain(self.dg.iter())
            .chain(self.tp_prob.iter())
        {
            if !g.same_shape(&self.np_prob) {
                return Err(Error::shape(
                    "prediction channels disagree on (H, W)".to_string(),
                ));
            }
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.np_prob.iter().all(|&v| in_unit(v)) {
            return Err(Error::data("np_prob outside [0, 1]".to_string()));
        }
        if !self
            .hv
            .iter()
            .chain(self.dg.iter())
            .all(|g| g.iter().all(|v| (-1.0..=1.0).contains(v)))
        {
            return Err(Error::data("distance map outside [-1, 1]".to_string()));
        }
        if !self.tp_prob.iter().all(|g| g.iter().all(|&v| in_unit(v))) {
            return Err(Error::data("tp_prob outside [0, 1]".to_string()));
        }
        let (h, w) = self.shape();
        for r in 0..h {
            for c in 0..w {
                let sum: f64 = self.tp_prob.iter().map(|g| g.get(r, c)).sum();
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(Error::data(format!(
                        "tp_prob at ({r}, {c}) sums to {sum}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One decoded nucleus instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: u32,
    /// Pixels in raster order (sorted by row, then column).
    pub pixels: Vec<(usize, usize)>,
    pub class: ClassId,
    /// Arithmetic mean of pixel coordinates, (row, col).
    pub centroid: (f64, f64),
}

impl Instance {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// The set of instances decoded from one image.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    height: usize,
    width: usize,
    pub instances: Vec<Instance>,
}

impl InstanceSet {
    pub fn new(height: usize, width: usize, instances: Vec<Instance>) -> Self {
        Self {
            height,
            width,
            instances,
        }
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self::new(height, width, Vec::new())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Instance> {
        self.instances.iter()
    }

    /// Render back to instance-id and class-id maps.
    pub fn to_maps(&self) -> (Grid<u32>, Grid<ClassId>) {
        let mut inst = Grid::filled(self.height, self.width, 0u32);
        let mut cls = Grid::filled(self.height, self.width, ClassId::BACKGROUND);
        for instance in &self.instances {
            for &(r, c) in &instance.pixels {
                inst.set(r, c, instance.id);
                cls.set(r, c, instance.class);
            }
        }
        (inst, cls)
    }

    /// Instance count per foreground class, indexed by class id - 1.
    pub fn class_counts(&self) -> [u32; NUM_FG_CLASSES] {
        let mut counts = [0u32; NUM_FG_CLASSES];
        for instance in &self.instances {
            if !instance.class.is_background() {
                counts[instance.class.index() - 1] += 1;
            }
        }
        counts
    }
}
