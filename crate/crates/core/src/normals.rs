//! Range-image surface normals and the network input tensor.

use crate::error::{check_len, Error, Result};
use crate::interp::FeatureMap;
use crate::projection::RangeImage;

const DEGENERATE_CROSS: f64 = 1e-12;

/// Per-pixel unit normals, oriented towards the sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub height: usize,
    pub width: usize,
    pub normals: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

impl NormalMap {
    pub fn get(&self, h: usize, w: usize) -> Option<[f64; 3]> {
        let i = h * self.width + w;
        self.valid[i].then(|| self.normals[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Forward-difference normals: the right neighbour (wrapping around the
/// azimuth seam) and the neighbour one row down span the tangent plane.
pub fn estimate_normals(img: &RangeImage) -> NormalMap {
    let (hh, ww) = (img.height, img.width);
    let mut normals = vec![[0.0; 3]; hh * ww];
    let mut valid = vec![false; hh * ww];
    for h in 0..hh.saturating_sub(1) {
        for w in 0..ww {
            let i = img.index(h, w);
            let right = img.index(h, (w + 1) % ww);
            let below = img.index(h + 1, w);
            if right == i || !img.is_valid(i) || !img.is_valid(right) || !img.is_valid(below) {
                continue;
            }
            let p = img.point(i);
            let n = cross(sub(img.point(right), p), sub(img.point(below), p));
            let len = dot(n, n).sqrt();
            if !(len >= DEGENERATE_CROSS) {
                continue;
            }
            let mut n = [n[0] / len, n[1] / len, n[2] / len];
            if dot(n, p) > 0.0 {
                n = [-n[0], -n[1], -n[2]];
            }
            normals[i] = n;
            valid[i] = true;
        }
    }
    NormalMap {
        height: hh,
        width: ww,
        normals,
        valid,
    }
}

/// Channel layout of the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputLayout {
    /// x, y, z, range, remission
    Five,
    /// x, y, z, range, remission, n1, n2, n3
    Eight,
}

pub const CHANNEL_NAMES: [&str; 8] = ["x", "y", "z", "range", "remission", "n1", "n2", "n3"];

impl InputLayout {
    pub fn channels(self) -> usize {
        match self {
            InputLayout::Five => 5,
            InputLayout::Eight => 8,
        }
    }

    pub fn names(self) -> &'static [&'static str] {
        &CHANNEL_NAMES[..self.channels()]
    }
}

/// Mean and standard deviation per input channel, in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const SYNTHETIC_STATS: &str = include_str!("../data/synthetic-stats.txt");

impl ChannelStats {
    pub fn identity(layout: InputLayout) -> Self {
        Self {
            mean: vec![0.0; layout.channels()],
            std: vec![1.0; layout.channels()],
        }
    }

    /// Parses `channel mean std` lines and picks the channels of `layout`.
    pub fn parse(text: &str, layout: InputLayout) -> Result<Self> {
        let mut found: [Option<(f64, f64)>; 8] = [None; 8];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Format(format!("stats line {}: `{line}`", lineno + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            let [name, mean, std] = f.as_slice() else {
                return Err(bad());
            };
            let slot = CHANNEL_NAMES
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::Format(format!("stats line {}: unknown channel `{name}`", lineno + 1)))?;
            let mean: f64 = mean.parse().map_err(|_| bad())?;
            let std: f64 = std.parse().map_err(|_| bad())?;
            found[slot] = Some((mean, std));
        }
        let mut stats = Self {
            mean: Vec::new(),
            std: Vec::new(),
        };
        for (slot, name) in layout.names().iter().enumerate() {
            let (m, s) = found[slot]
                .ok_or_else(|| Error::Format(format!("stats file lacks channel `{name}`")))?;
            stats.mean.push(m);
            stats.std.push(s);
        }
        Ok(stats)
    }

    fn check(&self, layout: InputLayout) -> Result<()> {
        check_len("channel means", self.mean.len(), layout.channels())?;
        check_len("channel stds", self.std.len(), layout.channels())?;
        if let Some(c) = self.std.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParam(format!(
                "std of channel `{}` must be positive",
                CHANNEL_NAMES[c]
            )));
        }
        Ok(())
    }
}

/// Standardized `H x W x C` input. Empty pixels are zero in every channel;
/// pixels without a valid normal are zero in the normal channels.
pub fn build_input_tensor(
    img: &RangeImage,
    normals: Option<&NormalMap>,
    layout: InputLayout,
    stats: &ChannelStats,
) -> Result<FeatureMap> {
    stats.check(layout)?;
    let normals = match (layout, normals) {
        (InputLayout::Eight, None) => {
            return Err(Error::InvalidParam("8-channel input requires a normal map".into()))
        }
        (InputLayout::Eight, Some(n)) => {
            if (n.height, n.width) != (img.height, img.width) {
                return Err(Error::Data("normal map size differs from range image".into()));
            }
            Some(n)
        }
        (InputLayout::Five, _) => None,
    };
    let c = layout.channels();
    let mut fmap = FeatureMap::zeros(img.height, img.width, c);
    let standardize = |ch: usize, v: f64| (v - stats.mean[ch]) / stats.std[ch];
    for idx in 0..img.height * img.width {
        if !img.is_valid(idx) {
            continue;
        }
        let raw = [
            img.x[idx] as f64,
            img.y[idx] as f64,
            img.z[idx] as f64,
            img.range[idx] as f64,
            img.remission[idx] as f64,
        ];
        let out = &mut fmap.data[idx * c..(idx + 1) * c];
        for (ch, v) in raw.into_iter().enumerate() {
            out[ch] = standardize(ch, v);
        }
        if let Some(n) = normals {
            if n.valid[idx] {
                for k in 0..3 {
                    out[5 + k] = standardize(5 + k, n.normals[idx][k]);
                }
            }
        }
    }
    Ok(fmap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{Point, PointCloud};
    use crate::projection::{project, unproject_pixel, ProjectionConfig};

    fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
        dot(a, b).clamp(-1.0, 1.0).acos().to_degrees()
    }

    /// One point per pixel on the surface hit by the pixel-centre ray.
    fn scene(cfg: &ProjectionConfig, range_at: impl Fn([f64; 3]) -> Option<f64>) -> RangeImage {
        let mut pts = Vec::new();
        for h in 0..cfg.height {
            for w in 0..cfg.width {
                let d = unproject_pixel(h, w, 1.0, cfg).unwrap();
                if let Some(t) = range_at(d) {
                    pts.push(Point::new((d[0] * t) as f32, (d[1] * t) as f32, (d[2] * t) as f32, 0.1));
                }
            }
        }
        project(&PointCloud::new(pts).unwrap(), cfg).unwrap().0
    }

    #[test]
    fn ground_plane_points_up() {
        let cfg = ProjectionConfig::default();
        let img = scene(&cfg, |d| (d[2] < 0.0).then(|| -2.0 / d[2]).filter(|&t| t < 60.0));
        let nm = estimate_normals(&img);
        assert!(nm.valid_count() > 1000);
        for i in 0..nm.valid.len() {
            if nm.valid[i] {
                assert!(angle_deg(nm.normals[i], [0.0, 0.0, 1.0]) < 2.0);
            }
        }
    }

    #[test]
    fn wall_faces_sensor() {
        let cfg = ProjectionConfig::new(32, 512, 10f64.to_radians(), 10f64.to_radians()).unwrap();
        // Plane x = 10, limited to |y| < 5.
        let img = scene(&cfg, |d| {
            (d[0] > 0.0).then(|| 10.0 / d[0]).filter(|t| (d[1] * t).abs() < 5.0)
        });
        let nm = estimate_normals(&img);
        assert!(nm.valid_count() > 50);
        for i in 0..nm.valid.len() {
            if nm.valid[i] {
                assert!(angle_deg(nm.normals[i], [-1.0, 0.0, 0.0]) < 2.0);
            }
        }
    }

    #[test]
    fn isolated_pixel_is_invalid() {
        let cfg = ProjectionConfig::default();
        let cloud = PointCloud::new(vec![Point::new(10.0, 0.0, 0.0, 0.0)]).unwrap();
        let (img, _) = project(&cloud, &cfg).unwrap();
        assert_eq!(estimate_normals(&img).valid_count(), 0);
    }

    #[test]
    fn tensor_channel_counts_and_identity() {
        let cfg = ProjectionConfig::new(8, 32, 0.3, 0.3).unwrap();
        let img = scene(&cfg, |d| (d[0] > 0.0).then(|| 4.0 / d[0]));
        let nm = estimate_normals(&img);
        let five =
            build_input_tensor(&img, None, InputLayout::Five, &ChannelStats::identity(InputLayout::Five))
                .unwrap();
        assert_eq!(five.channels, 5);
        let eight = build_input_tensor(
            &img,
            Some(&nm),
            InputLayout::Eight,
            &ChannelStats::identity(InputLayout::Eight),
        )
        .unwrap();
        assert_eq!(eight.channels, 8);
        for idx in 0..img.height * img.width {
            let px = &five.data[idx * 5..idx * 5 + 5];
            if img.is_valid(idx) {
                assert_eq!(px[3], img.range[idx] as f64);
                assert_eq!(px[0], img.x[idx] as f64);
            } else {
                assert!(px.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn constant_channel_standardizes_to_zero() {
        let cfg = ProjectionConfig::new(4, 16, 0.3, 0.3).unwrap();
        let img = scene(&cfg, |_| Some(5.0));
        let mut stats = ChannelStats::identity(InputLayout::Five);
        stats.mean[4] = 0.1f32 as f64;
        let t = build_input_tensor(&img, None, InputLayout::Five, &stats).unwrap();
        assert!((0..img.height * img.width).all(|i| t.data[i * 5 + 4] == 0.0));
    }

    #[test]
    fn tensor_errors() {
        let cfg = ProjectionConfig::new(4, 16, 0.3, 0.3).unwrap();
        let img = scene(&cfg, |_| Some(5.0));
        let mut stats = ChannelStats::identity(InputLayout::Five);
        stats.std[2] = 0.0;
        assert!(build_input_tensor(&img, None, InputLayout::Five, &stats).is_err());
        let stats = ChannelStats::identity(InputLayout::Eight);
        assert!(build_input_tensor(&img, None, InputLayout::Eight, &stats).is_err());
    }

    #[test]
    fn bundled_stats_parse() {
        let s = ChannelStats::parse(SYNTHETIC_STATS, InputLayout::Eight).unwrap();
        assert_eq!(s.mean.len(), 8);
        assert!(ChannelStats::parse("x 0 1", InputLayout::Five).is_err());
        assert!(ChannelStats::parse("q 0 1", InputLayout::Five).is_err());
    }
}
