//! Per-point labels from a per-pixel prediction.
//!
//! The network only sees the owner of each pixel. Occluded points have to
//! borrow a label from somewhere:
//!
//! - [`copy_pixel_label`] takes the label of their own pixel (the owner's),
//!   which smears foreground labels onto the background behind it.
//! - [`nla`] scans a k x k patch around the point's pixel and takes the label
//!   of the pixel whose stored range is closest to the point's range.
//! - [`knn_postprocess`] votes over the range-closest pixels of a window with
//!   Gaussian spatial weights and a range cutoff.
//!
//! [`patch_oracle`] and [`true_3d_oracle`] are slow references used by tests.

use crate::error::{check_len, Error, Result};
use crate::io::PointCloud;
use crate::projection::{PointProjection, RangeImage};

/// Predicted class per pixel, aligned with a [`RangeImage`]. Labels of empty
/// pixels are never read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u16>,
}

impl LabelImage {
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        check_len("label image", labels.len(), height * width)?;
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    /// Paints each valid pixel with its owner's label; empty pixels get `fill`.
    pub fn from_owner_labels(img: &RangeImage, point_labels: &[u16], fill: u16) -> Result<Self> {
        let labels = img
            .owner
            .iter()
            .map(|&o| {
                if o == crate::projection::NO_OWNER {
                    Ok(fill)
                } else {
                    point_labels.get(o as usize).copied().ok_or_else(|| {
                        Error::Data(format!("owner {o} has no label ({} labels)", point_labels.len()))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(img.height, img.width, labels)
    }

    /// Checks that every valid pixel of `img` carries a class in
    /// `[0, num_classes)`.
    pub fn check_classes(&self, img: &RangeImage, num_classes: usize) -> Result<()> {
        for idx in 0..self.labels.len() {
            if img.is_valid(idx) && self.labels[idx] as usize >= num_classes {
                return Err(Error::Data(format!(
                    "pixel {idx} predicts class {} >= {num_classes}",
                    self.labels[idx]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NlaParams {
    pub kernel: usize,
}

impl Default for NlaParams {
    fn default() -> Self {
        Self { kernel: 5 }
    }
}

fn check_kernel(kernel: usize) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!("kernel size {kernel} must be odd and >= 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnParams {
    pub kernel: usize,
    pub k: usize,
    /// Meters.
    pub cutoff: f32,
    /// Pixels.
    pub sigma: f32,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            kernel: 5,
            k: 5,
            cutoff: 1.0,
            sigma: 1.0,
        }
    }
}

impl KnnParams {
    fn check(&self) -> Result<()> {
        check_kernel(self.kernel)?;
        if self.k == 0 {
            return Err(Error::InvalidParam("knn needs k >= 1".into()));
        }
        if !(self.cutoff > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::InvalidParam("cutoff and sigma must be positive".into()));
        }
        Ok(())
    }
}

fn check_aligned(img: &RangeImage, labels: &LabelImage, proj: &PointProjection) -> Result<()> {
    if (labels.height, labels.width) != (img.height, img.width) {
        return Err(Error::Data(format!(
            "label image is {}x{} but range image is {}x{}",
            labels.height, labels.width, img.height, img.width
        )));
    }
    check_len("label image", labels.labels.len(), img.height * img.width)?;
    check_len("range image", img.range.len(), img.height * img.width)?;
    if (proj.height, proj.width) != (img.height, img.width) {
        return Err(Error::Data(format!(
            "projection is {}x{} but range image is {}x{}",
            proj.height, proj.width, img.height, img.width
        )));
    }
    proj.validate()
}

/// Row and column bounds (inclusive) of the patch around `(h, w)`, clamped.
#[inline]
fn patch(h: usize, w: usize, radius: usize, height: usize, width: usize) -> (usize, usize, usize, usize) {
    (
        h.saturating_sub(radius),
        (h + radius).min(height - 1),
        w.saturating_sub(radius),
        (w + radius).min(width - 1),
    )
}

fn no_valid_pixel(i: usize) -> Error {
    Error::Data(format!("point {i}: no valid pixel in its patch"))
}

/// Nearest label assignment.
///
/// For each point, the first pixel (row-major) of its clamped k x k patch
/// minimizing `|range(pixel) - range(point)|` donates its label. Empty pixels
/// have infinite range and never win.
pub fn nla(img: &RangeImage, labels: &LabelImage, proj: &PointProjection, params: &NlaParams) -> Result<Vec<u16>> {
    check_kernel(params.kernel)?;
    check_aligned(img, labels, proj)?;
    let (hh, ww) = (img.height, img.width);
    let radius = params.kernel / 2;
    let range = &img.range;
    let mut out = Vec::with_capacity(proj.len());
    for i in 0..proj.len() {
        let r = proj.range[i];
        let (h0, h1, w0, w1) = patch(proj.h[i] as usize, proj.w[i] as usize, radius, hh, ww);
        let mut best = f32::INFINITY;
        let mut best_idx = usize::MAX;
        for row in h0..=h1 {
            let base = row * ww;
            for (off, &pr) in range[base + w0..=base + w1].iter().enumerate() {
                let d = (pr - r).abs();
                if d < best {
                    best = d;
                    best_idx = base + w0 + off;
                }
            }
        }
        if best_idx == usize::MAX {
            return Err(no_valid_pixel(i));
        }
        out.push(labels.labels[best_idx]);
    }
    Ok(out)
}

/// Literal double-loop version of [`nla`] with explicit validity checks.
pub fn patch_oracle(
    img: &RangeImage,
    labels: &LabelImage,
    proj: &PointProjection,
    params: &NlaParams,
) -> Result<Vec<u16>> {
    check_kernel(params.kernel)?;
    check_aligned(img, labels, proj)?;
    let k = params.kernel as i64;
    let mut out = Vec::new();
    for i in 0..proj.len() {
        let (ph, pw) = (proj.h[i] as i64, proj.w[i] as i64);
        let mut min_diff = f64::INFINITY;
        let mut label = None;
        for dh in 0..k {
            for dw in 0..k {
                let (h, w) = (ph - k / 2 + dh, pw - k / 2 + dw);
                if h < 0 || w < 0 || h >= img.height as i64 || w >= img.width as i64 {
                    continue;
                }
                let idx = h as usize * img.width + w as usize;
                if !img.is_valid(idx) {
                    continue;
                }
                let diff = (img.range[idx] - proj.range[i]).abs() as f64;
                if diff < min_diff {
                    min_diff = diff;
                    label = Some(labels.labels[idx]);
                }
            }
        }
        out.push(label.ok_or_else(|| no_valid_pixel(i))?);
    }
    Ok(out)
}

/// Gaussian-weighted vote among the range-closest pixels of the window.
pub fn knn_postprocess(
    img: &RangeImage,
    labels: &LabelImage,
    proj: &PointProjection,
    params: &KnnParams,
) -> Result<Vec<u16>> {
    params.check()?;
    check_aligned(img, labels, proj)?;
    let (hh, ww) = (img.height, img.width);
    let radius = params.kernel / 2;
    // Spatial weights depend only on the Chebyshev offset.
    let weight: Vec<f32> = (0..=radius)
        .map(|d| (-((d * d) as f32) / (2.0 * params.sigma * params.sigma)).exp())
        .collect();

    let mut cand: Vec<(f32, u32, usize)> = Vec::with_capacity(params.kernel * params.kernel);
    let mut votes: Vec<(u16, f32)> = Vec::with_capacity(params.k);
    let mut out = Vec::with_capacity(proj.len());
    for i in 0..proj.len() {
        let (ph, pw) = (proj.h[i] as usize, proj.w[i] as usize);
        let r = proj.range[i];
        let (h0, h1, w0, w1) = patch(ph, pw, radius, hh, ww);
        cand.clear();
        for row in h0..=h1 {
            for col in w0..=w1 {
                let idx = row * ww + col;
                if img.is_valid(idx) {
                    let cheb = row.abs_diff(ph).max(col.abs_diff(pw));
                    cand.push(((img.range[idx] - r).abs(), cheb as u32, idx));
                }
            }
        }
        if cand.is_empty() {
            return Err(no_valid_pixel(i));
        }
        let keep = params.k.min(cand.len());
        if keep < cand.len() {
            // Stable: equal range differences keep row-major order.
            cand.sort_by(|a, b| a.0.total_cmp(&b.0));
            cand.truncate(keep);
        }
        votes.clear();
        let mut nearest = 0;
        for (j, &(dr, cheb, idx)) in cand.iter().enumerate() {
            if dr < cand[nearest].0 {
                nearest = j;
            }
            if dr <= params.cutoff {
                add_vote(&mut votes, labels.labels[idx], weight[cheb as usize]);
            }
        }
        if votes.is_empty() {
            let (_, cheb, idx) = cand[nearest];
            add_vote(&mut votes, labels.labels[idx], weight[cheb as usize]);
        }
        let winner = votes
            .iter()
            .copied()
            .reduce(|best, v| {
                if v.1 > best.1 || (v.1 == best.1 && v.0 < best.0) {
                    v
                } else {
                    best
                }
            })
            .map(|v| v.0)
            .expect("at least one vote");
        out.push(winner);
    }
    Ok(out)
}

fn add_vote(votes: &mut Vec<(u16, f32)>, class: u16, w: f32) {
    match votes.iter_mut().find(|v| v.0 == class) {
        Some(v) => v.1 += w,
        None => votes.push((class, w)),
    }
}

/// Every point takes the label of its own pixel.
pub fn copy_pixel_label(img: &RangeImage, labels: &LabelImage, proj: &PointProjection) -> Result<Vec<u16>> {
    check_aligned(img, labels, proj)?;
    (0..proj.len())
        .map(|i| {
            let px = proj.pixel(i);
            if img.is_valid(px) {
                Ok(labels.labels[px])
            } else {
                Err(Error::Data(format!("point {i} lies on an empty pixel")))
            }
        })
        .collect()
}

/// Label of the Euclidean-nearest pixel owner, by exhaustive search. Ties go
/// to the owner of the earlier pixel in row-major order.
pub fn true_3d_oracle(
    img: &RangeImage,
    labels: &LabelImage,
    proj: &PointProjection,
    cloud: &PointCloud,
) -> Result<Vec<u16>> {
    check_aligned(img, labels, proj)?;
    check_len("cloud", cloud.len(), proj.len())?;
    let owners: Vec<([f64; 3], u16)> = (0..img.owner.len())
        .filter(|&idx| img.is_valid(idx))
        .map(|idx| (img.point(idx), labels.labels[idx]))
        .collect();
    if owners.is_empty() {
        return Err(Error::Data("range image has no owners".into()));
    }
    Ok(cloud
        .points
        .iter()
        .map(|p| {
            let q = [p.x as f64, p.y as f64, p.z as f64];
            let mut best = (f64::INFINITY, owners[0].1);
            for &(o, l) in &owners {
                let d = (o[0] - q[0]).powi(2) + (o[1] - q[1]).powi(2) + (o[2] - q[2]).powi(2);
                if d < best.0 {
                    best = (d, l);
                }
            }
            best.1
        })
        .collect())
}
