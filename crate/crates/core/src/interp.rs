//! Inverse-distance interpolation, corner-aligned bilinear upsampling and
//! the parameter-free multi-scale decoder built on it.
//!
//! Bilinear upsampling is often described as the k = 4, l1-distance case of
//! inverse-distance interpolation on the pixel lattice. The two agree at
//! lattice nodes and, for two collinear neighbours, everywhere on the
//! segment; at general interior points they differ. [`interp_discrepancy`]
//! measures the gap.

use crate::error::{Error, Result};

/// Dense `height x width x channels` map, row-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::LengthMismatch {
                what: "feature data",
                got: data.len(),
                expected: height * width * channels,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("feature value {i} is not finite")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    #[inline]
    pub fn pixel(&self, h: usize, w: usize) -> &[f64] {
        let o = (h * self.width + w) * self.channels;
        &self.data[o..o + self.channels]
    }

    #[inline]
    pub fn get(&self, h: usize, w: usize, c: usize) -> f64 {
        self.data[(h * self.width + w) * self.channels + c]
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::InvalidParam(format!(
                "feature map {}x{}x{} is empty",
                self.height, self.width, self.channels
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distance {
    L1,
    L2,
}

impl Distance {
    #[inline]
    pub fn eval(self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
        match self {
            Distance::L1 => dx.abs() + dy.abs(),
            Distance::L2 => dx.hypot(dy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpSpec {
    pub k: usize,
    pub distance: Distance,
    /// Below this distance a neighbour's value is returned as is.
    pub eps: f64,
}

impl Default for InterpSpec {
    /// Four nearest neighbours under l1.
    fn default() -> Self {
        Self {
            k: 4,
            distance: Distance::L1,
            eps: 1e-12,
        }
    }
}

impl InterpSpec {
    fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParam("interpolation needs k >= 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParam("eps must be positive".into()));
        }
        Ok(())
    }
}

/// A sample with known value.
#[derive(Debug, Clone, PartialEq)]
pub struct Known<'a> {
    pub position: [f64; 2],
    pub value: &'a [f64],
}

/// Inverse-distance weighted mean of the `k` nearest known samples.
///
/// Ties in distance keep input order. If a selected neighbour is closer than
/// `eps`, its value is returned exactly.
pub fn distance_interpolate(known: &[Known<'_>], query: [f64; 2], spec: &InterpSpec) -> Result<Vec<f64>> {
    spec.check()?;
    if known.is_empty() {
        return Err(Error::InvalidParam("no known samples".into()));
    }
    if spec.k > known.len() {
        return Err(Error::InvalidParam(format!(
            "k = {} exceeds the {} known samples",
            spec.k,
            known.len()
        )));
    }
    let channels = known[0].value.len();
    if known.iter().any(|s| s.value.len() != channels) {
        return Err(Error::Data("known samples differ in channel count".into()));
    }
    let mut order: Vec<(f64, usize)> = known
        .iter()
        .enumerate()
        .map(|(i, s)| (spec.distance.eval(s.position, query), i))
        .collect();
    // Stable sort keeps input order among equal distances.
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(weighted_mean(order[..spec.k].iter().map(|&(d, i)| (d, known[i].value)), channels, spec.eps))
}

fn weighted_mean<'a>(
    neighbours: impl Iterator<Item = (f64, &'a [f64])> + Clone,
    channels: usize,
    eps: f64,
) -> Vec<f64> {
    if let Some((_, v)) = neighbours.clone().find(|&(d, _)| d < eps) {
        return v.to_vec();
    }
    let mut acc = vec![0.0; channels];
    let mut total = 0.0;
    for (d, v) in neighbours {
        let w = 1.0 / d;
        total += w;
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    acc
}

/// Input coordinate sampled by output index `i` under the corner-aligned
/// convention.
#[inline]
pub fn source_coord(i: usize, in_len: usize, out_len: usize) -> f64 {
    if out_len <= 1 {
        0.0
    } else {
        i as f64 * (in_len - 1) as f64 / (out_len - 1) as f64
    }
}

struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn taps(in_len: usize, out_len: usize) -> Vec<Tap> {
    (0..out_len)
        .map(|i| {
            let x = source_coord(i, in_len, out_len);
            let lo = (x.floor() as usize).min(in_len - 1);
            let hi = (lo + 1).min(in_len - 1);
            Tap {
                lo,
                hi,
                frac: x - lo as f64,
            }
        })
        .collect()
}

/// Corner-aligned bilinear resize to `out_h x out_w` (upsampling only).
pub fn bilinear_upsample(fmap: &FeatureMap, out_h: usize, out_w: usize) -> Result<FeatureMap> {
    fmap.check_nonempty()?;
    if out_h < fmap.height || out_w < fmap.width {
        return Err(Error::InvalidParam(format!(
            "cannot upsample {}x{} to smaller {out_h}x{out_w}",
            fmap.height, fmap.width
        )));
    }
    let c = fmap.channels;
    let rows = taps(fmap.height, out_h);
    let cols = taps(fmap.width, out_w);
    let mut out = FeatureMap::zeros(out_h, out_w, c);
    for (i, ry) in rows.iter().enumerate() {
        for (j, cx) in cols.iter().enumerate() {
            let (a, b) = (fmap.pixel(ry.lo, cx.lo), fmap.pixel(ry.lo, cx.hi));
            let (d, e) = (fmap.pixel(ry.hi, cx.lo), fmap.pixel(ry.hi, cx.hi));
            let dst = &mut out.data[(i * out_w + j) * c..(i * out_w + j + 1) * c];
            for ch in 0..c {
                let top = a[ch] + (b[ch] - a[ch]) * cx.frac;
                let bottom = d[ch] + (e[ch] - d[ch]) * cx.frac;
                dst[ch] = top + (bottom - top) * ry.frac;
            }
        }
    }
    Ok(out)
}

/// Upsamples every map to the resolution of the first one and concatenates
/// channels in list order. Each map must be the full resolution divided by
/// the same power of two in both dimensions.
pub fn fid_concat(maps: &[FeatureMap]) -> Result<FeatureMap> {
    let Some(full) = maps.first() else {
        return Err(Error::InvalidParam("no feature maps to concatenate".into()));
    };
    let (hh, ww) = (full.height, full.width);
    let mut upsampled = Vec::with_capacity(maps.len());
    for (i, m) in maps.iter().enumerate() {
        m.check_nonempty()
            .map_err(|e| Error::InvalidParam(format!("feature map {i}: {e}")))?;
        let conforming = hh % m.height == 0
            && ww % m.width == 0
            && hh / m.height == ww / m.width
            && (hh / m.height).is_power_of_two();
        if !conforming {
            return Err(Error::InvalidParam(format!(
                "feature map {i} is {}x{}, not {hh}x{ww} divided by a power of two",
                m.height, m.width
            )));
        }
        upsampled.push(if m.height == hh {
            m.clone()
        } else {
            bilinear_upsample(m, hh, ww)?
        });
    }
    let total: usize = upsampled.iter().map(|m| m.channels).sum();
    let mut out = FeatureMap::zeros(hh, ww, total);
    for px in 0..hh * ww {
        let mut o = px * total;
        for m in &upsampled {
            let c = m.channels;
            out.data[o..o + c].copy_from_slice(&m.data[px * c..(px + 1) * c]);
            o += c;
        }
    }
    Ok(out)
}

/// Difference between inverse-distance interpolation over the input lattice
/// and bilinear upsampling, both evaluated at the same output samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub max_abs_diff: f64,
    pub mean_abs_diff: f64,
    /// `distance_interpolate - bilinear_upsample`, same shape as the output.
    pub diff: FeatureMap,
}

pub fn interp_discrepancy(
    fmap: &FeatureMap,
    out_h: usize,
    out_w: usize,
    spec: &InterpSpec,
) -> Result<Discrepancy> {
    spec.check()?;
    let bilinear = bilinear_upsample(fmap, out_h, out_w)?;
    let (hh, ww, c) = (fmap.height, fmap.width, fmap.channels);
    if spec.k > hh * ww {
        return Err(Error::InvalidParam(format!(
            "k = {} exceeds the {} lattice nodes",
            spec.k,
            hh * ww
        )));
    }
    // With at most four neighbours and a lattice at least 2x2, every selected
    // node lies within distance 2 of the query (the enclosing cell's corners
    // already are), so a 6x6 node window around the cell suffices.
    let windowed = spec.k <= 4 && hh >= 2 && ww >= 2;

    let mut diff = FeatureMap::zeros(out_h, out_w, c);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(hh * ww);
    let (mut max_abs, mut sum_abs) = (0.0f64, 0.0f64);
    for i in 0..out_h {
        let y = source_coord(i, hh, out_h);
        for j in 0..out_w {
            let x = source_coord(j, ww, out_w);
            let q = [y, x];
            cand.clear();
            let (r0, r1, c0, c1) = if windowed {
                let (fy, fx) = (y.floor() as usize, x.floor() as usize);
                (fy.saturating_sub(2), (fy + 3).min(hh - 1), fx.saturating_sub(2), (fx + 3).min(ww - 1))
            } else {
                (0, hh - 1, 0, ww - 1)
            };
            // Row-major enumeration matches lattice input order for ties.
            for r in r0..=r1 {
                for s in c0..=c1 {
                    cand.push((spec.distance.eval([r as f64, s as f64], q), r * ww + s));
                }
            }
            cand.sort_by(|a, b| a.0.total_cmp(&b.0));
            let idw = weighted_mean(
                cand[..spec.k].iter().map(|&(d, n)| (d, &fmap.data[n * c..(n + 1) * c])),
                c,
                spec.eps,
            );
            let o = (i * out_w + j) * c;
            for (ch, v) in idw.iter().enumerate() {
                let d = v - bilinear.data[o + ch];
                diff.data[o + ch] = d;
                max_abs = max_abs.max(d.abs());
                sum_abs += d.abs();
            }
        }
    }
    let n = (out_h * out_w * c).max(1);
    Ok(Discrepancy {
        max_abs_diff: max_abs,
        mean_abs_diff: sum_abs / n as f64,
        diff,
    })
}
