//! Readers and writers for SemanticKITTI-style scan and label files.
//!
//! ```text
//! <frame>.bin    x:f32 y:f32 z:f32 remission:f32   (16 bytes / point, LE)
//! <frame>.label  semantic:u16 | instance:u16 << 16 (4 bytes / point, LE)
//! ```
//!
//! Prediction files use the `.label` layout as well, so any framework that
//! writes SemanticKITTI submissions can feed the evaluation stage.

use std::collections::HashMap;

use crate::error::{check_len, Error, Result};

/// Number of training classes in the default remap table.
pub const NUM_CLASSES: usize = 19;

/// Label id used for points excluded from evaluation.
pub const IGNORE_ID: u16 = 255;

const POINT_STRIDE: usize = 16;
const LABEL_STRIDE: usize = 4;

/// One LiDAR return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub remission: f32,
}

impl Point {
    pub const fn new(x: f32, y: f32, z: f32, remission: f32) -> Self {
        Self { x, y, z, remission }
    }

    /// Euclidean distance from the sensor origin, computed in double precision.
    pub fn range(&self) -> f64 {
        let (x, y, z) = (self.x as f64, self.y as f64, self.z as f64);
        (x * x + y * y + z * z).sqrt()
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.remission.is_finite()
    }
}

/// A single scan. Point order matches file byte order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    /// Builds a cloud, rejecting non-finite values.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Data(format!("point {i} has a non-finite value")));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-point semantic and instance ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    pub semantic: Vec<u16>,
    pub instance: Vec<u16>,
}

impl LabelSet {
    /// Semantic labels with instance ids zeroed.
    pub fn from_semantic(semantic: Vec<u16>) -> Self {
        let instance = vec![0; semantic.len()];
        Self { semantic, instance }
    }

    pub fn len(&self) -> usize {
        self.semantic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semantic.is_empty()
    }
}

pub fn read_scan(bytes: &[u8]) -> Result<PointCloud> {
    if !bytes.len().is_multiple_of(POINT_STRIDE) {
        return Err(Error::Format(format!(
            "scan length {} is not a multiple of {POINT_STRIDE}",
            bytes.len()
        )));
    }
    let points = bytes
        .chunks_exact(POINT_STRIDE)
        .map(|c| {
            let f = |o: usize| f32::from_le_bytes([c[o], c[o + 1], c[o + 2], c[o + 3]]);
            Point::new(f(0), f(4), f(8), f(12))
        })
        .collect();
    PointCloud::new(points)
}

pub fn write_scan(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * POINT_STRIDE);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.remission] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_labels(bytes: &[u8]) -> Result<LabelSet> {
    if !bytes.len().is_multiple_of(LABEL_STRIDE) {
        return Err(Error::Format(format!(
            "label length {} is not a multiple of {LABEL_STRIDE}",
            bytes.len()
        )));
    }
    let n = bytes.len() / LABEL_STRIDE;
    let mut labels = LabelSet {
        semantic: Vec::with_capacity(n),
        instance: Vec::with_capacity(n),
    };
    for c in bytes.chunks_exact(LABEL_STRIDE) {
        let word = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        labels.semantic.push((word & 0xFFFF) as u16);
        labels.instance.push((word >> 16) as u16);
    }
    Ok(labels)
}

/// Panics if the semantic and instance vectors differ in length.
pub fn write_labels(labels: &LabelSet) -> Vec<u8> {
    assert_eq!(labels.semantic.len(), labels.instance.len());
    let mut out = Vec::with_capacity(labels.len() * LABEL_STRIDE);
    for (&s, &i) in labels.semantic.iter().zip(&labels.instance) {
        let word = (s as u32) | ((i as u32) << 16);
        out.extend_from_slice(&word.to_le_bytes());
    }
    out
}

/// Raw dataset id to training id lookup. Ids missing from the table map to
/// the ignore id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemapTable {
    map: HashMap<u16, u16>,
    num_classes: usize,
    ignore: u16,
}

/// The SemanticKITTI 19-class learning map.
pub const SEMANTIC_KITTI_REMAP: &str = include_str!("../data/semantic-kitti-remap.txt");

impl RemapTable {
    pub fn new(map: HashMap<u16, u16>, num_classes: usize, ignore: u16) -> Result<Self> {
        for (&raw, &train) in &map {
            if train != ignore && train as usize >= num_classes {
                return Err(Error::Data(format!(
                    "raw id {raw} maps to {train}, outside [0, {num_classes})"
                )));
            }
        }
        Ok(Self {
            map,
            num_classes,
            ignore,
        })
    }

    /// Parses `raw_id train_id` lines. `#` starts a comment.
    pub fn parse(text: &str, num_classes: usize, ignore: u16) -> Result<Self> {
        let mut map = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [raw, train] => raw.parse::<u16>().ok().zip(train.parse::<u16>().ok()),
                _ => None,
            };
            let Some((raw, train)) = parsed else {
                return Err(Error::Format(format!(
                    "remap table line {}: expected `raw_id train_id`, got `{line}`",
                    lineno + 1
                )));
            };
            if map.insert(raw, train).is_some() {
                return Err(Error::Format(format!(
                    "remap table line {}: raw id {raw} listed twice",
                    lineno + 1
                )));
            }
        }
        Self::new(map, num_classes, ignore)
    }

    pub fn semantic_kitti() -> Self {
        Self::parse(SEMANTIC_KITTI_REMAP, NUM_CLASSES, IGNORE_ID)
            .expect("bundled remap table is valid")
    }

    /// Identity table over `[0, num_classes)`.
    pub fn identity(num_classes: usize, ignore: u16) -> Self {
        let map = (0..num_classes as u16).map(|c| (c, c)).collect();
        Self {
            map,
            num_classes,
            ignore,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn ignore(&self) -> u16 {
        self.ignore
    }

    pub fn lookup(&self, raw: u16) -> Option<u16> {
        self.map.get(&raw).copied()
    }
}

/// Result of [`remap_labels`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Remapped {
    pub labels: LabelSet,
    /// Points whose raw id was absent from the table.
    pub unlisted: usize,
}

pub fn remap_labels(labels: &LabelSet, table: &RemapTable) -> Result<Remapped> {
    check_len("instance ids", labels.instance.len(), labels.semantic.len())?;
    let mut unlisted = 0;
    let semantic = labels
        .semantic
        .iter()
        .map(|&raw| match table.lookup(raw) {
            Some(t) => t,
            None => {
                unlisted += 1;
                table.ignore
            }
        })
        .collect();
    Ok(Remapped {
        labels: LabelSet {
            semantic,
            instance: labels.instance.clone(),
        },
        unlisted,
    })
}
