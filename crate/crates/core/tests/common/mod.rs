#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rangeseg_core::{LabelImage, Point, PointCloud, ProjectionConfig, NUM_CLASSES};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random scan inside (and slightly outside) the vertical field of view.
/// About a third of the points are placed on the ray of an earlier point at a
/// different range, so many pixels hold several points.
pub fn random_cloud(rng: &mut impl Rng, cfg: &ProjectionConfig, n: usize) -> PointCloud {
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let margin = 0.05 * cfg.fov();
    while pts.len() < n {
        if !pts.is_empty() && rng.random_bool(0.35) {
            let base = pts[rng.random_range(0..pts.len())];
            let s: f32 = rng.random_range(0.3..3.0);
            // Occasionally an exact duplicate to exercise the range tie rule.
            let s = if rng.random_bool(0.05) { 1.0 } else { s };
            pts.push(Point::new(base.x * s, base.y * s, base.z * s, rng.random()));
            continue;
        }
        let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let pitch = rng.random_range(-cfg.fov_down - margin..cfg.fov_up + margin);
        let r = rng.random_range(0.5..60.0);
        pts.push(Point::new(
            (r * pitch.cos() * yaw.cos()) as f32,
            (r * pitch.cos() * yaw.sin()) as f32,
            (r * pitch.sin()) as f32,
            rng.random(),
        ));
    }
    PointCloud::new(pts).unwrap()
}

pub fn random_label_image(rng: &mut impl Rng, height: usize, width: usize) -> LabelImage {
    let labels = (0..height * width)
        .map(|_| rng.random_range(0..NUM_CLASSES as u16))
        .collect();
    LabelImage::new(height, width, labels).unwrap()
}

/// Pixel of a point by direct evaluation of the projection formula,
/// independent of the library's projection code path.
pub fn reference_pixel(p: &Point, cfg: &ProjectionConfig) -> (usize, usize) {
    let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
    let r = (x * x + y * y + z * z).sqrt();
    let yaw = y.atan2(x);
    let pitch = (z / r).asin();
    let u = (0.5 * (1.0 - yaw / std::f64::consts::PI) * cfg.width as f64).floor();
    let v = ((1.0 - (pitch + cfg.fov_down) / (cfg.fov_up + cfg.fov_down)) * cfg.height as f64).floor();
    let clamp = |t: f64, n: usize| t.max(0.0).min((n - 1) as f64) as usize;
    (clamp(v, cfg.height), clamp(u, cfg.width))
}
