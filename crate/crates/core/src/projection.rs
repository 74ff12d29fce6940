//! Spherical range-image projection.
//!
//! Every point receives a pixel: yaw picks the column, pitch picks the row,
//! and pitches outside the vertical field of view are clamped to the edge
//! rows. When several points land in one pixel the nearest one (ties: lower
//! point index) owns it and its channels fill the image; the rest are
//! recorded as occluded.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::io::PointCloud;

/// Sentinel owner index for empty pixels.
pub const NO_OWNER: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub height: usize,
    pub width: usize,
    /// Radians above the horizon.
    pub fov_up: f64,
    /// Radians below the horizon, as a positive magnitude.
    pub fov_down: f64,
}

impl Default for ProjectionConfig {
    /// 64 x 2048 with the HDL-64E vertical field of view (+3 / -25 degrees).
    fn default() -> Self {
        Self {
            height: 64,
            width: 2048,
            fov_up: 3f64.to_radians(),
            fov_down: 25f64.to_radians(),
        }
    }
}

impl ProjectionConfig {
    pub fn new(height: usize, width: usize, fov_up: f64, fov_down: f64) -> Result<Self> {
        let cfg = Self {
            height,
            width,
            fov_up,
            fov_down,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidParam(format!(
                "image size {}x{} must be at least 1x1",
                self.height, self.width
            )));
        }
        if !(self.fov_up + self.fov_down > 0.0) || !self.fov().is_finite() {
            return Err(Error::InvalidParam(format!(
                "vertical field of view {} + {} must be positive",
                self.fov_up, self.fov_down
            )));
        }
        if self.height > u32::MAX as usize || self.width > u32::MAX as usize {
            return Err(Error::InvalidParam("image dimensions exceed u32".into()));
        }
        Ok(())
    }

    pub fn fov(&self) -> f64 {
        self.fov_up + self.fov_down
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Column for a yaw angle, clamped to the image.
    pub fn column(&self, yaw: f64) -> usize {
        let u = (0.5 * (1.0 - yaw / PI) * self.width as f64).floor();
        u.clamp(0.0, (self.width - 1) as f64) as usize
    }

    /// Row for a pitch angle and whether it had to be clamped.
    pub fn row(&self, pitch: f64) -> (usize, bool) {
        let v = ((1.0 - (pitch + self.fov_down) / self.fov()) * self.height as f64).floor();
        let max = (self.height - 1) as f64;
        let clamped = v < 0.0 || v > max;
        (v.clamp(0.0, max) as usize, clamped)
    }

    /// Yaw at the centre of column `w`.
    pub fn column_center_yaw(&self, w: f64) -> f64 {
        PI * (1.0 - 2.0 * (w + 0.5) / self.width as f64)
    }

    /// Pitch at the centre of row `h`.
    pub fn row_center_pitch(&self, h: f64) -> f64 {
        (1.0 - (h + 0.5) / self.height as f64) * self.fov() - self.fov_down
    }
}

/// H x W grid of projected channels, row-major.
///
/// Empty pixels carry `range = +inf`, zeros in the other channels, and
/// [`NO_OWNER`] as owner.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    pub height: usize,
    pub width: usize,
    pub x: Vec<f32>,
    pub y: Vec<f32>,
    pub z: Vec<f32>,
    pub range: Vec<f32>,
    pub remission: Vec<f32>,
    pub owner: Vec<u32>,
}

impl RangeImage {
    pub fn empty(height: usize, width: usize) -> Self {
        let n = height * width;
        Self {
            height,
            width,
            x: vec![0.0; n],
            y: vec![0.0; n],
            z: vec![0.0; n],
            range: vec![f32::INFINITY; n],
            remission: vec![0.0; n],
            owner: vec![NO_OWNER; n],
        }
    }

    #[inline]
    pub fn index(&self, h: usize, w: usize) -> usize {
        h * self.width + w
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.owner[idx] != NO_OWNER
    }

    pub fn valid_count(&self) -> usize {
        self.owner.iter().filter(|&&o| o != NO_OWNER).count()
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        [self.x[idx] as f64, self.y[idx] as f64, self.z[idx] as f64]
    }

    /// Checks the structural invariants: channel lengths, finite positive range
    /// on valid pixels, infinite range on empty ones.
    pub fn validate(&self) -> Result<()> {
        let n = self.height * self.width;
        for (what, len) in [
            ("x channel", self.x.len()),
            ("y channel", self.y.len()),
            ("z channel", self.z.len()),
            ("range channel", self.range.len()),
            ("remission channel", self.remission.len()),
            ("owner channel", self.owner.len()),
        ] {
            check_len(what, len, n)?;
        }
        for idx in 0..n {
            let r = self.range[idx];
            let ok = if self.is_valid(idx) {
                r.is_finite() && r > 0.0
            } else {
                r == f32::INFINITY
            };
            if !ok {
                return Err(Error::Data(format!(
                    "pixel {idx}: range {r} inconsistent with validity"
                )));
            }
        }
        Ok(())
    }
}

/// Per-point pixel assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PointProjection {
    pub height: usize,
    pub width: usize,
    pub h: Vec<u32>,
    pub w: Vec<u32>,
    pub range: Vec<f32>,
    pub is_owner: Vec<bool>,
    /// Points whose pitch fell outside the field of view and were clamped.
    pub clamped: usize,
}

impl PointProjection {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    #[inline]
    pub fn pixel(&self, i: usize) -> usize {
        self.h[i] as usize * self.width + self.w[i] as usize
    }

    pub fn owner_count(&self) -> usize {
        self.is_owner.iter().filter(|&&o| o).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.h.len();
        check_len("column indices", self.w.len(), n)?;
        check_len("ranges", self.range.len(), n)?;
        check_len("owner flags", self.is_owner.len(), n)?;
        for i in 0..n {
            if self.h[i] as usize >= self.height || self.w[i] as usize >= self.width {
                return Err(Error::Data(format!(
                    "point {i} projects to ({}, {}) outside {}x{}",
                    self.h[i], self.w[i], self.height, self.width
                )));
            }
        }
        Ok(())
    }

    /// Checks that `self` and `img` describe the same projection: every valid
    /// pixel is owned by exactly one point flagged as owner, with equal range.
    pub fn check_consistent(&self, img: &RangeImage) -> Result<()> {
        if (self.height, self.width) != (img.height, img.width) {
            return Err(Error::Data(format!(
                "projection is {}x{} but range image is {}x{}",
                self.height, self.width, img.height, img.width
            )));
        }
        self.validate()?;
        let mut owners = 0usize;
        for i in 0..self.len() {
            let px = self.pixel(i);
            let owned_here = img.owner[px] == i as u32;
            if owned_here != self.is_owner[i] {
                return Err(Error::Data(format!(
                    "point {i}: owner flag disagrees with the range image"
                )));
            }
            if owned_here {
                owners += 1;
                if img.range[px] != self.range[i] {
                    return Err(Error::Data(format!(
                        "point {i}: range differs from its pixel's range"
                    )));
                }
            }
        }
        if owners != img.valid_count() {
            return Err(Error::Data(format!(
                "{} valid pixels but {owners} owner points",
                img.valid_count()
            )));
        }
        Ok(())
    }
}

/// Projects `cloud` onto the spherical image described by `config`.
pub fn project(cloud: &PointCloud, config: &ProjectionConfig) -> Result<(RangeImage, PointProjection)> {
    config.validate()?;
    if cloud.is_empty() {
        return Err(Error::Data("cannot project an empty cloud".into()));
    }
    if cloud.len() > NO_OWNER as usize {
        return Err(Error::Data("cloud has too many points".into()));
    }
    let n = cloud.len();
    let mut proj = PointProjection {
        height: config.height,
        width: config.width,
        h: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        range: Vec::with_capacity(n),
        is_owner: vec![false; n],
        clamped: 0,
    };
    let mut img = RangeImage::empty(config.height, config.width);

    for (i, p) in cloud.points.iter().enumerate() {
        let r = p.range();
        if !(r > 0.0) {
            return Err(Error::Data(format!("point {i} has zero range")));
        }
        let yaw = (p.y as f64).atan2(p.x as f64);
        let pitch = (p.z as f64 / r).clamp(-1.0, 1.0).asin();
        let u = config.column(yaw);
        let (v, clamped) = config.row(pitch);
        proj.clamped += clamped as usize;
        let range = r as f32;
        proj.h.push(v as u32);
        proj.w.push(u as u32);
        proj.range.push(range);

        // Points arrive in index order, so a strict comparison keeps the lower
        // index on equal range.
        let px = v * config.width + u;
        if img.owner[px] == NO_OWNER || range < img.range[px] {
            img.owner[px] = i as u32;
            img.range[px] = range;
        }
    }

    for px in 0..img.owner.len() {
        let o = img.owner[px];
        if o == NO_OWNER {
            continue;
        }
        let p = &cloud.points[o as usize];
        img.x[px] = p.x;
        img.y[px] = p.y;
        img.z[px] = p.z;
        img.remission[px] = p.remission;
        proj.is_owner[o as usize] = true;
    }
    Ok((img, proj))
}

/// Cartesian point at the centre of pixel `(h, w)` at distance `r`.
pub fn unproject_pixel(h: usize, w: usize, r: f64, config: &ProjectionConfig) -> Result<[f64; 3]> {
    config.validate()?;
    if h >= config.height || w >= config.width {
        return Err(Error::InvalidParam(format!(
            "pixel ({h}, {w}) outside {}x{}",
            config.height, config.width
        )));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParam(format!("range {r} must be positive")));
    }
    let yaw = config.column_center_yaw(w as f64);
    let pitch = config.row_center_pitch(h as f64);
    Ok([
        r * pitch.cos() * yaw.cos(),
        r * pitch.cos() * yaw.sin(),
        r * pitch.sin(),
    ])
}

/// Label agreement between occluded points and their pixel owners.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDisagreement {
    /// Occluded points whose label differs from their owner's label.
    pub differing: usize,
    /// `differing / occluded`, `None` when nothing is occluded.
    pub fraction: Option<f64>,
    /// Pixels holding at least two points with different labels.
    pub cross_class_pixels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionStats {
    pub points: usize,
    pub valid_pixels: usize,
    /// Points per non-empty pixel -> number of such pixels.
    pub multiplicity: BTreeMap<usize, usize>,
    pub occluded: usize,
    pub occluded_fraction: f64,
    pub clamped: usize,
    pub labels: Option<LabelDisagreement>,
}

pub fn occlusion_stats(proj: &PointProjection, labels: Option<&[u16]>) -> Result<OcclusionStats> {
    proj.validate()?;
    if let Some(l) = labels {
        check_len("labels", l.len(), proj.len())?;
    }
    let n = proj.len();
    let mut count = vec![0u32; proj.height * proj.width];
    let mut owner_of = vec![NO_OWNER; proj.height * proj.width];
    for i in 0..n {
        let px = proj.pixel(i);
        count[px] += 1;
        if proj.is_owner[i] {
            owner_of[px] = i as u32;
        }
    }
    let mut multiplicity = BTreeMap::new();
    for &c in count.iter().filter(|&&c| c > 0) {
        *multiplicity.entry(c as usize).or_insert(0) += 1;
    }
    let valid_pixels = count.iter().filter(|&&c| c > 0).count();
    let occluded = n - proj.owner_count();

    let labels = labels.map(|l| {
        let mut differing = 0;
        // A pixel has a cross-class pair iff some point's label differs from
        // its owner's.
        let mut cross = vec![false; count.len()];
        for i in 0..n {
            if proj.is_owner[i] {
                continue;
            }
            let px = proj.pixel(i);
            let owner = owner_of[px];
            if owner != NO_OWNER && l[owner as usize] != l[i] {
                differing += 1;
                cross[px] = true;
            }
        }
        LabelDisagreement {
            differing,
            fraction: (occluded > 0).then(|| differing as f64 / occluded as f64),
            cross_class_pixels: cross.iter().filter(|&&c| c).count(),
        }
    });

    Ok(OcclusionStats {
        points: n,
        valid_pixels,
        multiplicity,
        occluded,
        occluded_fraction: if n == 0 { 0.0 } else { occluded as f64 / n as f64 },
        clamped: proj.clamped,
        labels,
    })
}
