//! Deterministic ray-cast scenes with known labels.
//!
//! Rays leave the origin on a (rows x cols) angular grid whose cell centres
//! coincide with the pixel centres of a [`ProjectionConfig`] of the same
//! shape, optionally jittered inside the cell. Each ray returns its first hit.
//! When the first hit is an object (not ground) and another surface lies
//! behind it, a second return is emitted with probability `pass_through`
//! (per object, falling back to the sampling default),
//! like a dual-return sensor grazing a thin structure. Second returns share
//! the pixel of their first return, which is how the scenes get many-to-one
//! pixels with a known class on each side.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::{LabelSet, Point, PointCloud};
use crate::projection::ProjectionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    /// Axis lengths before rotation by `yaw_deg`.
    Box { size: [f64; 3] },
    /// Upright cylinder.
    Cylinder { radius: f64, height: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SceneObject {
    #[serde(flatten)]
    pub shape: Shape,
    /// Centre of the footprint in the ground plane.
    pub center: [f64; 2],
    /// Height of the object's base; defaults to the ground height.
    #[serde(default)]
    pub base_z: Option<f64>,
    #[serde(default)]
    pub yaw_deg: f64,
    pub class: u16,
    /// Overrides [`Sampling::pass_through`] for rays whose first hit is this
    /// object. Solid structures such as walls use 0.
    #[serde(default)]
    pub pass_through: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub rows: usize,
    pub cols: usize,
    pub fov_up_deg: f64,
    pub fov_down_deg: f64,
    /// Uniform angular jitter as a fraction of a cell, in `[0, 0.5)`.
    #[serde(default)]
    pub jitter: f64,
    /// Probability of a second return behind an object hit.
    #[serde(default = "default_pass_through")]
    pub pass_through: f64,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
}

fn default_pass_through() -> f64 {
    1.0
}

fn default_max_range() -> f64 {
    80.0
}

impl Default for Sampling {
    /// Matches [`ProjectionConfig::default`] one ray per pixel.
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 2048,
            fov_up_deg: 3.0,
            fov_down_deg: 25.0,
            jitter: 0.2,
            pass_through: 1.0,
            max_range: 80.0,
        }
    }
}

impl Sampling {
    /// The projection whose pixel centres match the ray grid.
    pub fn projection(&self) -> ProjectionConfig {
        ProjectionConfig {
            height: self.rows,
            width: self.cols,
            fov_up: self.fov_up_deg.to_radians(),
            fov_down: self.fov_down_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub ground_height: f64,
    pub ground_class: u16,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub sampling: Sampling,
}

impl SceneSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: Self =
            toml::from_str(text).map_err(|e| Error::Format(format!("scene spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Flat ground only.
    pub fn ground_plane(ground_height: f64, ground_class: u16) -> Self {
        Self {
            ground_height,
            ground_class,
            objects: Vec::new(),
            sampling: Sampling::default(),
        }
    }

    /// A building wall 20 m ahead with thin poles and a trunk in front of it.
    /// The poles are a few pixels wide at the default resolution, so rays
    /// grazing them also return the wall or ground behind.
    pub fn pole_before_wall() -> Self {
        let ground = -1.73;
        let cyl = |x: f64, y: f64, radius: f64, height: f64, class: u16| SceneObject {
            shape: Shape::Cylinder { radius, height },
            center: [x, y],
            base_z: None,
            yaw_deg: 0.0,
            class,
            pass_through: None,
        };
        Self {
            ground_height: ground,
            ground_class: 8,
            objects: vec![
                SceneObject {
                    shape: Shape::Box {
                        size: [0.5, 40.0, 6.0],
                    },
                    center: [20.0, 0.0],
                    base_z: None,
                    yaw_deg: 0.0,
                    class: 12,
                    pass_through: Some(0.0),
                },
                cyl(8.0, 0.0, 0.04, 4.0, 17),
                cyl(10.0, 3.0, 0.05, 3.5, 17),
                cyl(12.0, -4.0, 0.06, 5.0, 15),
                cyl(9.0, -1.5, 0.03, 2.5, 18),
            ],
            sampling: Sampling::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sampling;
        if s.rows == 0 || s.cols == 0 {
            return Err(Error::InvalidParam(format!(
                "sampling density {}x{} must be non-zero",
                s.rows, s.cols
            )));
        }
        if !(s.fov_up_deg + s.fov_down_deg > 0.0) {
            return Err(Error::InvalidParam("sampling field of view must be positive".into()));
        }
        if !(0.0..0.5).contains(&s.jitter) {
            return Err(Error::InvalidParam(format!("jitter {} not in [0, 0.5)", s.jitter)));
        }
        if !(0.0..=1.0).contains(&s.pass_through) {
            return Err(Error::InvalidParam(format!(
                "pass_through {} not in [0, 1]",
                s.pass_through
            )));
        }
        for (k, o) in self.objects.iter().enumerate() {
            if let Some(p) = o.pass_through {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParam(format!(
                        "object {k}: pass_through {p} not in [0, 1]"
                    )));
                }
            }
        }
        if !(s.max_range > 0.0) {
            return Err(Error::InvalidParam("max_range must be positive".into()));
        }
        if !(self.ground_height < 0.0) {
            return Err(Error::InvalidParam(
                "ground must lie below the sensor (ground_height < 0)".into(),
            ));
        }
        for (i, o) in self.objects.iter().enumerate() {
            let ok = match o.shape {
                Shape::Box { size } => size.iter().all(|&d| d > 0.0),
                Shape::Cylinder { radius, height } => radius > 0.0 && height > 0.0,
            };
            if !ok {
                return Err(Error::InvalidParam(format!("object {i} has non-positive dimensions")));
            }
            if o.base_z.unwrap_or(self.ground_height) < self.ground_height {
                return Err(Error::InvalidParam(format!("object {i} sits below the ground")));
            }
            if o.contains_origin(self.ground_height) {
                return Err(Error::InvalidParam(format!("object {i} encloses the sensor")));
            }
        }
        Ok(())
    }
}

/// Output of [`synth_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScan {
    pub cloud: PointCloud,
    pub labels: LabelSet,
    /// For second returns, the index of the first return on the same ray.
    pub occluded_by: Vec<Option<u32>>,
}

impl SyntheticScan {
    /// Ground-truth (front, back) point pairs on the same ray.
    pub fn occlusion_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.occluded_by
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.map(|front| (front as usize, i)))
    }
}

const GROUND: usize = usize::MAX;

pub fn synth_scene(spec: &SceneSpec, seed: u64) -> Result<SyntheticScan> {
    spec.validate()?;
    let s = &spec.sampling;
    let grid = s.projection();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut points = Vec::new();
    let mut semantic = Vec::new();
    let mut occluded_by = Vec::new();
    let mut hits: Vec<(f64, usize)> = Vec::new();

    for row in 0..s.rows {
        for col in 0..s.cols {
            // Draw a fixed number of variates per ray so the stream stays
            // aligned regardless of what the ray hits.
            let jr: f64 = rng.random_range(-1.0..1.0);
            let jc: f64 = rng.random_range(-1.0..1.0);
            let second: f64 = rng.random();
            let noise: [f64; 2] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];

            let pitch = grid.row_center_pitch(row as f64 + jr * s.jitter);
            let yaw = grid.column_center_yaw(col as f64 + jc * s.jitter);
            let dir = [pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin()];

            hits.clear();
            if dir[2] < 0.0 {
                hits.push((spec.ground_height / dir[2], GROUND));
            }
            for (k, o) in spec.objects.iter().enumerate() {
                if let Some(t) = o.intersect(dir, spec.ground_height) {
                    hits.push((t, k));
                }
            }
            hits.retain(|&(t, _)| t > 0.0 && t <= s.max_range);
            hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

            let Some(&(t0, k0)) = hits.first() else {
                continue;
            };
            let front = points.len() as u32;
            let class_of = |k: usize| {
                if k == GROUND {
                    spec.ground_class
                } else {
                    spec.objects[k].class
                }
            };
            points.push(hit_point(dir, t0, class_of(k0), noise[0]));
            semantic.push(class_of(k0));
            occluded_by.push(None);

            let pass = if k0 == GROUND {
                0.0
            } else {
                spec.objects[k0].pass_through.unwrap_or(s.pass_through)
            };
            if second < pass {
                if let Some(&(t1, k1)) = hits.get(1) {
                    points.push(hit_point(dir, t1, class_of(k1), noise[1]));
                    semantic.push(class_of(k1));
                    occluded_by.push(Some(front));
                }
            }
        }
    }

    Ok(SyntheticScan {
        cloud: PointCloud::new(points)?,
        labels: LabelSet::from_semantic(semantic),
        occluded_by,
    })
}

fn hit_point(dir: [f64; 3], t: f64, class: u16, noise: f64) -> Point {
    // Class-dependent reflectance with a little noise.
    let base = 0.15 + 0.04 * (class % 16) as f64;
    let remission = (base + 0.05 * noise).clamp(0.0, 1.0);
    Point::new(
        (dir[0] * t) as f32,
        (dir[1] * t) as f32,
        (dir[2] * t) as f32,
        remission as f32,
    )
}

impl SceneObject {
    fn base(&self, ground: f64) -> f64 {
        self.base_z.unwrap_or(ground)
    }

    /// Ray origin and direction in the object's local frame (footprint centre
    /// at the origin, base at z = 0, axes aligned).
    fn local_ray(&self, dir: [f64; 3], ground: f64) -> ([f64; 3], [f64; 3]) {
        let (s, c) = (-self.yaw_deg.to_radians()).sin_cos();
        let rot = |x: f64, y: f64| (c * x - s * y, s * x + c * y);
        let (ox, oy) = rot(-self.center[0], -self.center[1]);
        let (dx, dy) = rot(dir[0], dir[1]);
        ([ox, oy, -self.base(ground)], [dx, dy, dir[2]])
    }

    fn contains_origin(&self, ground: f64) -> bool {
        let (o, _) = self.local_ray([1.0, 0.0, 0.0], ground);
        match self.shape {
            Shape::Box { size } => {
                o[0].abs() <= size[0] / 2.0 && o[1].abs() <= size[1] / 2.0 && (0.0..=size[2]).contains(&o[2])
            }
            Shape::Cylinder { radius, height } => {
                o[0].hypot(o[1]) <= radius && (0.0..=height).contains(&o[2])
            }
        }
    }

    /// Entry distance along a unit ray from the sensor origin.
    fn intersect(&self, dir: [f64; 3], ground: f64) -> Option<f64> {
        let (o, d) = self.local_ray(dir, ground);
        match self.shape {
            Shape::Box { size } => {
                let lo = [-size[0] / 2.0, -size[1] / 2.0, 0.0];
                let hi = [size[0] / 2.0, size[1] / 2.0, size[2]];
                let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in 0..3 {
                    if d[a] == 0.0 {
                        if o[a] < lo[a] || o[a] > hi[a] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (lo[a] - o[a]) / d[a];
                    let t2 = (hi[a] - o[a]) / d[a];
                    t_near = t_near.max(t1.min(t2));
                    t_far = t_far.min(t1.max(t2));
                }
                (t_near <= t_far && t_near > 0.0).then_some(t_near)
            }
            Shape::Cylinder { radius, height } => {
                let mut best: Option<f64> = None;
                let mut consider = |t: f64| {
                    if t > 0.0 && best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                };
                // Side.
                let a = d[0] * d[0] + d[1] * d[1];
                if a > 0.0 {
                    let b = 2.0 * (o[0] * d[0] + o[1] * d[1]);
                    let c = o[0] * o[0] + o[1] * o[1] - radius * radius;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let t = (-b - disc.sqrt()) / (2.0 * a);
                        let z = o[2] + t * d[2];
                        if (0.0..=height).contains(&z) {
                            consider(t);
                        }
                    }
                }
                // Caps.
                if d[2] != 0.0 {
                    for cap in [0.0, height] {
                        let t = (cap - o[2]) / d[2];
                        let (x, y) = (o[0] + t * d[0], o[1] + t * d[1]);
                        if x * x + y * y <= radius * radius {
                            consider(t);
                        }
                    }
                }
                best
            }
        }
    }
}
