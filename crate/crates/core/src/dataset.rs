//! Dataset container I/O: image stacks, label stacks, domain lists, and the
//! fixed-name prediction/target directories.
//!
//! On disk: images are a (N, H, W, 3) u1 array, labels a (N, H, W, 2)
//! integer array (channel 0 instance id, channel 1 class id), domains a
//! plain text file with one name per image. Prediction and target
//! directories hold four fixed-name f4 files: np.npy (N, H, W),
//! hv.npy (N, 2, H, W), dg.npy (N, 2, H, W), tp.npy (N, 7, H, W).

use std::path::Path;

use crate::encoder::TargetMaps;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::npy::{read_array, write_array, NpyArray, NpyData};
use crate::types::{ClassId, LabeledImage, PredictionMaps, NUM_CLASSES};

/// Minimum accepted patch side length.
pub const MIN_SIDE: usize = 8;

/// One image's label planes: instance ids and class ids.
pub type LabelPair = (Grid<u32>, Grid<ClassId>);

fn into_f32(array: NpyArray, what: &str) -> Result<Vec<f32>> {
    match array.data {
        NpyData::F32(v) => Ok(v),
        other => Err(Error::shape(format!(
            "{what}: expected f4 data, found {:?}",
            other.dtype()
        ))),
    }
}

fn int_at(data: &NpyData, i: usize) -> i64 {
    match data {
        NpyData::U8(v) => v[i] as i64,
        NpyData::U16(v) => v[i] as i64,
        NpyData::I32(v) => v[i] as i64,
        NpyData::F32(v) => v[i] as i64,
    }
}

/// Read a (N, H, W, 3) u1 image stack.
pub fn read_images(path: impl AsRef<Path>) -> Result<Vec<Grid<[u8; 3]>>> {
    let array = read_array(path)?;
    let [n, h, w, c] = shape4(&array, "images")?;
    if c != 3 {
        return Err(Error::shape(format!("images: last dim {c}, expected 3")));
    }
    let bytes = match &array.data {
        NpyData::U8(v) => v,
        other => {
            return Err(Error::shape(format!(
                "images: expected u1 data, found {:?}",
                other.dtype()
            )))
        }
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let base = i * h * w * 3;
        out.push(Grid::from_fn(h, w, |r, cc| {
            let p = base + (r * w + cc) * 3;
            [bytes[p], bytes[p + 1], bytes[p + 2]]
        }));
    }
    Ok(out)
}

/// Write a (N, H, W, 3) u1 image stack.
pub fn write_images(path: impl AsRef<Path>, images: &[Grid<[u8; 3]>]) -> Result<()> {
    let (h, w) = images.first().map(|g| g.shape()).unwrap_or((0, 0));
    let mut bytes = Vec::with_capacity(images.len() * h * w * 3);
    for img in images {
        for px in img.iter() {
            bytes.extend_from_slice(px);
        }
    }
    write_array(
        path,
        &NpyArray::new(vec![images.len(), h, w, 3], NpyData::U8(bytes)),
    )?;
    Ok(())
}

/// Read a (N, H, W, 2) integer label stack into per-image instance/class
/// grids, validating class range and instance/class consistency.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelPair>> {
    let array = read_array(path)?;
    let [n, h, w, c] = shape4(&array, "labels")?;
    if c != 2 {
        return Err(Error::shape(format!("labels: last dim {c}, expected 2")));
    }
    if h < MIN_SIDE || w < MIN_SIDE {
        return Err(Error::shape(format!(
            "labels: patches are {h}x{w}, need at least {MIN_SIDE}x{MIN_SIDE}"
        )));
    }
    if matches!(array.data, NpyData::F32(_)) {
        return Err(Error::shape(
            "labels: expected an integer dtype (u1, u2, i4), found f4".to_string(),
        ));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let base = i * h * w * 2;
        let mut inst = Grid::filled(h, w, 0u32);
        let mut cls = Grid::filled(h, w, ClassId::BACKGROUND);
        for r in 0..h {
            for cc in 0..w {
                let p = base + (r * w + cc) * 2;
                let id = int_at(&array.data, p);
                let class = int_at(&array.data, p + 1);
                if !(0..=u32::MAX as i64).contains(&id) {
                    return Err(Error::shape(format!("labels: negative instance id {id}")));
                }
                if !(0..NUM_CLASSES as i64).contains(&class) {
                    return Err(Error::InvalidClass { value: class });
                }
                inst.set(r, cc, id as u32);
                cls.set(r, cc, ClassId::new(class as u8).unwrap());
            }
        }
        validate_label_pair(&inst, &cls)?;
        out.push((inst, cls));
    }
    Ok(out)
}

fn validate_label_pair(inst: &Grid<u32>, cls: &Grid<ClassId>) -> Result<()> {
    for ((r, c), id) in inst.indexed_iter() {
        if (id > 0) != !cls.get(r, c).is_background() {
            return Err(Error::InstClassMismatch { row: r, col: c });
        }
    }
    crate::instance::group_instances(inst, cls)?;
    Ok(())
}

/// Write per-image instance/class grids as a (N, H, W, 2) i4 stack.
pub fn write_labels(path: impl AsRef<Path>, labels: &[LabelPair]) -> Result<()> {
    let (h, w) = labels.first().map(|(g, _)| g.shape()).unwrap_or((0, 0));
    let mut values = Vec::with_capacity(labels.len() * h * w * 2);
    for (inst, cls) in labels {
        for r in 0..h {
            for c in 0..w {
                values.push(inst.get(r, c) as i32);
                values.push(cls.get(r, c).value() as i32);
            }
        }
    }
    write_array(
        path,
        &NpyArray::new(vec![labels.len(), h, w, 2], NpyData::I32(values)),
    )?;
    Ok(())
}

/// Read a domains file: one domain name per image, one per line.
pub fn read_domains(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// A complete dataset: images, labels, and optionally one domain per image.
#[derive(Debug, Clone)]
pub struct DatasetContainer {
    pub images: Vec<Grid<[u8; 3]>>,
    pub labels: Vec<LabelPair>,
    pub domains: Option<Vec<String>>,
}

impl DatasetContainer {
    pub fn load(
        images_path: impl AsRef<Path>,
        labels_path: impl AsRef<Path>,
        domains_path: Option<&Path>,
    ) -> Result<Self> {
        let images = read_images(images_path)?;
        let labels = read_labels(labels_path)?;
        let domains = domains_path.map(read_domains).transpose()?;
        let container = Self {
            images,
            labels,
            domains,
        };
        container.validate()?;
        Ok(container)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.images.len() != self.labels.len() {
            return Err(Error::shape(format!(
                "{} images vs {} labels",
                self.images.len(),
                self.labels.len()
            )));
        }
        if let Some(domains) = &self.domains {
            if domains.len() != self.labels.len() {
                return Err(Error::shape(format!(
                    "{} domain entries vs {} images",
                    domains.len(),
                    self.labels.len()
                )));
            }
        }
        for (img, (inst, _)) in self.images.iter().zip(self.labels.iter()) {
            if !img.same_shape(inst) {
                return Err(Error::shape("image/label patch sizes differ".to_string()));
            }
        }
        Ok(())
    }

    /// Assemble one labeled image (clones the planes).
    pub fn labeled_image(&self, i: usize) -> Result<LabeledImage> {
        LabeledImage::new(
            self.images[i].clone(),
            self.labels[i].0.clone(),
            self.labels[i].1.clone(),
        )
    }
}

fn shape4(array: &NpyArray, what: &str) -> Result<[usize; 4]> {
    match array.shape.as_slice() {
        &[n, h, w, c] => Ok([n, h, w, c]),
        other => Err(Error::shape(format!(
            "{what}: expected 4 dims, found {other:?}"
        ))),
    }
}

fn grid_to_f32(grid: &Grid<f64>, out: &mut Vec<f32>) {
    out.extend(grid.iter().map(|&v| v as f32));
}

fn grid_from_f32(h: usize, w: usize, values: &[f32]) -> Grid<f64> {
    Grid::from_vec(h, w, values.iter().map(|&v| v as f64).collect())
}

/// Write target maps (or idealized predictions) as the four fixed-name f4
/// files inside `dir`.
pub fn write_target_dir(dir: impl AsRef<Path>, targets: &[TargetMaps]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let (h, w) = targets.first().map(|t| t.shape()).unwrap_or((0, 0));
    let n = targets.len();

    let mut np = Vec::with_capacity(n * h * w);
    let mut hv = Vec::with_capacity(n * 2 * h * w);
    let mut dg = Vec::with_capacity(n * 2 * h * w);
    let mut tp = Vec::with_capacity(n * NUM_CLASSES * h * w);
    for t in targets {
        grid_to_f32(&t.np, &mut np);
        for ch in &t.hv {
            grid_to_f32(ch, &mut hv);
        }
        for ch in &t.dg {
            grid_to_f32(ch, &mut dg);
        }
        for ch in &t.tp {
            grid_to_f32(ch, &mut tp);
        }
    }
    write_array(
        dir.join("np.npy"),
        &NpyArray::new(vec![n, h, w], NpyData::F32(np)),
    )?;
    write_array(
        dir.join("hv.npy"),
        &NpyArray::new(vec![n, 2, h, w], NpyData::F32(hv)),
    )?;
    write_array(
        dir.join("dg.npy"),
        &NpyArray::new(vec![n, 2, h, w], NpyData::F32(dg)),
    )?;
    write_array(
        dir.join("tp.npy"),
        &NpyArray::new(vec![n, NUM_CLASSES, h, w], NpyData::F32(tp)),
    )?;
    Ok(())
}

/// Write prediction maps as the four fixed-name f4 files inside `dir`.
pub fn write_prediction_dir(dir: impl AsRef<Path>, preds: &[PredictionMaps]) -> Result<()> {
    // Identical layout; route through the target writer.
    let as_targets: Vec<TargetMaps> = preds
        .iter()
        .map(|p| TargetMaps {
            np: p.np_prob.clone(),
            hv: p.hv.clone(),
            dg: p.dg.clone(),
            tp: p.tp_prob.clone(),
        })
        .collect();
    write_target_dir(dir, &as_targets)
}

/// Read a prediction (or target) directory back into per-image maps.
pub fn read_prediction_dir(dir: impl AsRef<Path>) -> Result<Vec<PredictionMaps>> {
    let dir = dir.as_ref();
    let np = read_array(dir.join("np.npy"))?;
    let hv = read_array(dir.join("hv.npy"))?;
    let dg = read_array(dir.join("dg.npy"))?;
    let tp = read_array(dir.join("tp.npy"))?;

    let (n, h, w) = match np.shape.as_slice() {
        &[n, h, w] => (n, h, w),
        other => {
            return Err(Error::shape(format!(
                "np.npy: expected 3 dims, found {other:?}"
            )))
        }
    };
    for (name, array, channels) in [("hv", &hv, 2), ("dg", &dg, 2), ("tp", &tp, NUM_CLASSES)] {
        if array.shape != vec![n, channels, h, w] {
            return Err(Error::shape(format!(
                "{name}.npy: expected shape ({n}, {channels}, {h}, {w}), found {:?}",
                array.shape
            )));
        }
    }

    let np_values = into_f32(np, "np.npy")?;
    let hv_values = into_f32(hv, "hv.npy")?;
    let dg_values = into_f32(dg, "dg.npy")?;
    let tp_values = into_f32(tp, "tp.npy")?;

    let hw = h * w;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let slab = |values: &[f32], channels: usize, ch: usize| -> Grid<f64> {
            let base = (i * channels + ch) * hw;
            grid_from_f32(h, w, &values[base..base + hw])
        };
        let pred = PredictionMaps {
            np_prob: slab(&np_values, 1, 0),
            hv: [slab(&hv_values, 2, 0), slab(&hv_values, 2, 1)],
            dg: [slab(&dg_values, 2, 0), slab(&dg_values, 2, 1)],
            tp_prob: (0..NUM_CLASSES)
                .map(|ch| slab(&tp_values, NUM_CLASSES, ch))
                .collect(),
        };
        pred.validate()?;
        out.push(pred);
    }
    Ok(out)
}
