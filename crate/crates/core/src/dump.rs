//! Binary interchange between pipeline stages and PPM rendering.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! channel dump   "RIMG" H:u32 W:u32 channel:u32 | H*W f32, row-major
//! feature dump   "FMAP" H:u32 W:u32 C:u32       | H*W*C f32, channels innermost
//! sidecar        "RPRJ" H:u32 W:u32 N:u32 clamped:u32 reserved:u32
//!                fov_up:f64 fov_down:f64        | N * (h:u32 w:u32 range:f32 flags:u32)
//! ```
//!
//! Empty pixels hold `+inf` in the range channel and `0` elsewhere. Sidecar
//! flag bit 0 marks pixel owners. A pixel label image uses the `.label`
//! layout with `H*W` words.

use crate::error::{check_len, Error, Result};
use crate::interp::FeatureMap;
use crate::io::{PointCloud, IGNORE_ID};
use crate::normals::NormalMap;
use crate::postprocess::LabelImage;
use crate::projection::{PointProjection, ProjectionConfig, RangeImage, NO_OWNER};

const CHANNEL_MAGIC: &[u8; 4] = b"RIMG";
const FEATURE_MAGIC: &[u8; 4] = b"FMAP";
const SIDECAR_MAGIC: &[u8; 4] = b"RPRJ";
const HEADER_LEN: usize = 16;
const SIDECAR_HEADER_LEN: usize = 40;
const SIDECAR_STRIDE: usize = 16;

/// Channel ids used in dump headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Channel {
    X = 0,
    Y = 1,
    Z = 2,
    Range = 3,
    Remission = 4,
    N1 = 5,
    N2 = 6,
    N3 = 7,
}

impl Channel {
    pub const RANGE_IMAGE: [Channel; 5] =
        [Channel::X, Channel::Y, Channel::Z, Channel::Range, Channel::Remission];
    pub const NORMALS: [Channel; 3] = [Channel::N1, Channel::N2, Channel::N3];

    pub fn name(self) -> &'static str {
        crate::normals::CHANNEL_NAMES[self as usize]
    }

    pub fn from_id(id: u32) -> Result<Self> {
        const ALL: [Channel; 8] = [
            Channel::X,
            Channel::Y,
            Channel::Z,
            Channel::Range,
            Channel::Remission,
            Channel::N1,
            Channel::N2,
            Channel::N3,
        ];
        ALL.get(id as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("unknown channel id {id}")))
    }
}

/// A single-channel image read from a dump.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDump {
    pub height: usize,
    pub width: usize,
    pub channel: Channel,
    pub values: Vec<f32>,
}

fn u32_at(b: &[u8], o: usize) -> u32 {
    u32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]])
}

fn f32_at(b: &[u8], o: usize) -> f32 {
    f32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]])
}

fn f64_at(b: &[u8], o: usize) -> f64 {
    let mut a = [0u8; 8];
    a.copy_from_slice(&b[o..o + 8]);
    f64::from_le_bytes(a)
}

fn header(magic: &[u8; 4], a: usize, b: usize, c: usize) -> Vec<u8> {
    let mut out = magic.to_vec();
    for v in [a, b, c] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out
}

fn parse_header(bytes: &[u8], magic: &[u8; 4], what: &str) -> Result<(usize, usize, u32)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != magic {
        return Err(Error::Format(format!("not a {what} (bad magic or short header)")));
    }
    Ok((u32_at(bytes, 4) as usize, u32_at(bytes, 8) as usize, u32_at(bytes, 12)))
}

pub fn write_channel(height: usize, width: usize, channel: Channel, values: &[f32]) -> Vec<u8> {
    assert_eq!(values.len(), height * width);
    let mut out = header(CHANNEL_MAGIC, height, width, channel as usize);
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_channel(bytes: &[u8]) -> Result<ChannelDump> {
    let (height, width, id) = parse_header(bytes, CHANNEL_MAGIC, "channel dump")?;
    let body = &bytes[HEADER_LEN..];
    check_len("channel dump bytes", body.len(), height * width * 4)?;
    Ok(ChannelDump {
        height,
        width,
        channel: Channel::from_id(id)?,
        values: body.chunks_exact(4).map(|c| f32_at(c, 0)).collect(),
    })
}

/// Channel values of a range image.
pub fn range_image_channel(img: &RangeImage, channel: Channel) -> Result<&[f32]> {
    Ok(match channel {
        Channel::X => &img.x,
        Channel::Y => &img.y,
        Channel::Z => &img.z,
        Channel::Range => &img.range,
        Channel::Remission => &img.remission,
        _ => return Err(Error::InvalidParam(format!("{} is not a range image channel", channel.name()))),
    })
}

/// Normal components as f32, zero where invalid.
pub fn normal_channel(normals: &NormalMap, channel: Channel) -> Result<Vec<f32>> {
    let k = match channel {
        Channel::N1 => 0,
        Channel::N2 => 1,
        Channel::N3 => 2,
        _ => return Err(Error::InvalidParam(format!("{} is not a normal channel", channel.name()))),
    };
    Ok(normals
        .normals
        .iter()
        .zip(&normals.valid)
        .map(|(n, &v)| if v { n[k] as f32 } else { 0.0 })
        .collect())
}

pub fn write_feature_map(fmap: &FeatureMap) -> Vec<u8> {
    let mut out = header(FEATURE_MAGIC, fmap.height, fmap.width, fmap.channels);
    out.reserve(fmap.data.len() * 4);
    for &v in &fmap.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read_feature_map(bytes: &[u8]) -> Result<FeatureMap> {
    let (h, w, c) = parse_header(bytes, FEATURE_MAGIC, "feature dump")?;
    let body = &bytes[HEADER_LEN..];
    check_len("feature dump bytes", body.len(), h * w * c as usize * 4)?;
    FeatureMap::from_vec(h, w, c as usize, body.chunks_exact(4).map(|b| f32_at(b, 0) as f64).collect())
}

pub fn write_sidecar(proj: &PointProjection, config: &ProjectionConfig) -> Vec<u8> {
    let mut out = SIDECAR_MAGIC.to_vec();
    for v in [proj.height, proj.width, proj.len(), proj.clamped, 0] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&config.fov_up.to_le_bytes());
    out.extend_from_slice(&config.fov_down.to_le_bytes());
    out.reserve(proj.len() * SIDECAR_STRIDE);
    for i in 0..proj.len() {
        out.extend_from_slice(&proj.h[i].to_le_bytes());
        out.extend_from_slice(&proj.w[i].to_le_bytes());
        out.extend_from_slice(&proj.range[i].to_le_bytes());
        out.extend_from_slice(&(proj.is_owner[i] as u32).to_le_bytes());
    }
    out
}

pub fn read_sidecar(bytes: &[u8]) -> Result<(PointProjection, ProjectionConfig)> {
    if bytes.len() < SIDECAR_HEADER_LEN || &bytes[..4] != SIDECAR_MAGIC {
        return Err(Error::Format("not a projection sidecar".into()));
    }
    let height = u32_at(bytes, 4) as usize;
    let width = u32_at(bytes, 8) as usize;
    let n = u32_at(bytes, 12) as usize;
    let clamped = u32_at(bytes, 16) as usize;
    let config = ProjectionConfig::new(height, width, f64_at(bytes, 24), f64_at(bytes, 32))?;
    let body = &bytes[SIDECAR_HEADER_LEN..];
    check_len("sidecar bytes", body.len(), n * SIDECAR_STRIDE)?;
    let mut proj = PointProjection {
        height,
        width,
        h: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        range: Vec::with_capacity(n),
        is_owner: Vec::with_capacity(n),
        clamped,
    };
    for c in body.chunks_exact(SIDECAR_STRIDE) {
        proj.h.push(u32_at(c, 0));
        proj.w.push(u32_at(c, 4));
        proj.range.push(f32_at(c, 8));
        proj.is_owner.push(u32_at(c, 12) & 1 == 1);
    }
    proj.validate()?;
    Ok((proj, config))
}

/// Reassembles a range image from its five channel dumps (in
/// [`Channel::RANGE_IMAGE`] order) and the sidecar that produced them.
pub fn assemble_range_image(channels: &[ChannelDump], proj: &PointProjection) -> Result<RangeImage> {
    check_len("channel dumps", channels.len(), Channel::RANGE_IMAGE.len())?;
    let mut img = RangeImage::empty(proj.height, proj.width);
    for (dump, expect) in channels.iter().zip(Channel::RANGE_IMAGE) {
        if dump.channel != expect || (dump.height, dump.width) != (proj.height, proj.width) {
            return Err(Error::Data(format!(
                "expected {} channel of {}x{}, got {} of {}x{}",
                expect.name(),
                proj.height,
                proj.width,
                dump.channel.name(),
                dump.height,
                dump.width
            )));
        }
        let dst = match expect {
            Channel::X => &mut img.x,
            Channel::Y => &mut img.y,
            Channel::Z => &mut img.z,
            Channel::Range => &mut img.range,
            _ => &mut img.remission,
        };
        dst.copy_from_slice(&dump.values);
    }
    for i in 0..proj.len() {
        if proj.is_owner[i] {
            let px = proj.pixel(i);
            if img.owner[px] != NO_OWNER {
                return Err(Error::Data(format!("pixel {px} has two owners")));
            }
            img.owner[px] = i as u32;
        }
    }
    img.validate()?;
    proj.check_consistent(&img)?;
    Ok(img)
}

pub fn write_label_image(labels: &LabelImage) -> Vec<u8> {
    crate::io::write_labels(&crate::io::LabelSet::from_semantic(labels.labels.clone()))
}

pub fn read_label_image(bytes: &[u8], height: usize, width: usize) -> Result<LabelImage> {
    let set = crate::io::read_labels(bytes)?;
    LabelImage::new(height, width, set.semantic)
}

/// RGB per class id; unknown ids render black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorTable {
    colors: Vec<Option<[u8; 3]>>,
}

pub const SEMANTIC_KITTI_COLORS: &str = include_str!("../data/class-colors.txt");

impl ColorTable {
    /// Parses `class r g b` lines, `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self> {
        let mut colors = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v: Vec<u16> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Format(format!("color table line {}: `{line}`", lineno + 1)))?;
            let [class, r, g, b] = v.as_slice() else {
                return Err(Error::Format(format!("color table line {}: expected 4 fields", lineno + 1)));
            };
            if [*r, *g, *b].iter().any(|&c| c > 255) {
                return Err(Error::Format(format!("color table line {}: component > 255", lineno + 1)));
            }
            let class = *class as usize;
            if colors.len() <= class {
                colors.resize(class + 1, None);
            }
            colors[class] = Some([*r as u8, *g as u8, *b as u8]);
        }
        Ok(Self { colors })
    }

    pub fn semantic_kitti() -> Self {
        Self::parse(SEMANTIC_KITTI_COLORS).expect("bundled color table is valid")
    }

    pub fn color(&self, class: u16) -> [u8; 3] {
        self.colors.get(class as usize).copied().flatten().unwrap_or([0, 0, 0])
    }
}

fn ppm(height: usize, width: usize, rgb: Vec<u8>) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(rgb);
    out
}

/// Grayscale PPM of one channel, min-max scaled over finite values.
/// Non-finite values render black.
pub fn render_channel(height: usize, width: usize, values: &[f32]) -> Result<Vec<u8>> {
    check_len("channel values", values.len(), height * width)?;
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut rgb = Vec::with_capacity(values.len() * 3);
    for &v in values {
        let g = if v.is_finite() {
            (((v - lo) / span) * 254.0 + 1.0).round() as u8
        } else {
            0
        };
        rgb.extend_from_slice(&[g, g, g]);
    }
    Ok(ppm(height, width, rgb))
}

/// Colour PPM of a pixel label image; `IGNORE_ID` renders black.
pub fn render_labels(labels: &LabelImage, colors: &ColorTable) -> Vec<u8> {
    let mut rgb = Vec::with_capacity(labels.labels.len() * 3);
    for &l in &labels.labels {
        let c = if l == IGNORE_ID { [0, 0, 0] } else { colors.color(l) };
        rgb.extend_from_slice(&c);
    }
    ppm(labels.height, labels.width, rgb)
}

/// Checks the scan matches the sidecar point count.
pub fn check_cloud_matches(cloud: &PointCloud, proj: &PointProjection) -> Result<()> {
    check_len("scan points", cloud.len(), proj.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Point;
    use crate::projection::project;

    fn small_scan() -> (PointCloud, ProjectionConfig) {
        let cfg = ProjectionConfig::new(8, 16, 0.2, 0.4).unwrap();
        let pts = (0..40)
            .map(|i| {
                let a = i as f32 * 0.37;
                Point::new(5.0 * a.cos(), 5.0 * a.sin(), -0.3 + 0.01 * i as f32, 0.25)
            })
            .collect();
        (PointCloud::new(pts).unwrap(), cfg)
    }

    #[test]
    fn channel_header_layout() {
        let bytes = write_channel(2, 3, Channel::Range, &[1.0; 6]);
        assert_eq!(&bytes[..4], b"RIMG");
        assert_eq!(u32_at(&bytes, 4), 2);
        assert_eq!(u32_at(&bytes, 8), 3);
        assert_eq!(u32_at(&bytes, 12), 3);
        assert_eq!(bytes.len(), 16 + 24);
        let d = read_channel(&bytes).unwrap();
        assert_eq!(d.channel, Channel::Range);
        assert!(read_channel(&bytes[..20]).is_err());
    }

    #[test]
    fn range_image_survives_dump_and_sidecar() {
        let (cloud, cfg) = small_scan();
        let (img, proj) = project(&cloud, &cfg).unwrap();
        let dumps: Vec<_> = Channel::RANGE_IMAGE
            .iter()
            .map(|&c| {
                read_channel(&write_channel(img.height, img.width, c, range_image_channel(&img, c).unwrap()))
                    .unwrap()
            })
            .collect();
        let (proj2, cfg2) = read_sidecar(&write_sidecar(&proj, &cfg)).unwrap();
        assert_eq!(proj2, proj);
        assert_eq!(cfg2, cfg);
        assert_eq!(assemble_range_image(&dumps, &proj2).unwrap(), img);
    }

    #[test]
    fn feature_map_dump() {
        let f = FeatureMap::from_vec(1, 2, 3, vec![0.5, 1.0, -2.0, 3.0, 4.0, 8.0]).unwrap();
        let bytes = write_feature_map(&f);
        assert_eq!(u32_at(&bytes, 12), 3);
        assert_eq!(read_feature_map(&bytes).unwrap(), f);
    }

    #[test]
    fn ppm_output() {
        let p = render_channel(1, 2, &[0.0, f32::INFINITY]).unwrap();
        assert!(p.starts_with(b"P6\n2 1\n255\n"));
        let li = LabelImage::new(1, 2, vec![0, IGNORE_ID]).unwrap();
        let p = render_labels(&li, &ColorTable::semantic_kitti());
        assert_eq!(&p[p.len() - 6..], &[100, 150, 245, 0, 0, 0]);
    }

    #[test]
    fn color_table_errors() {
        assert!(ColorTable::parse("0 1 2").is_err());
        assert!(ColorTable::parse("0 1 2 300").is_err());
        assert_eq!(ColorTable::parse("3 1 2 3").unwrap().color(3), [1, 2, 3]);
    }
}
