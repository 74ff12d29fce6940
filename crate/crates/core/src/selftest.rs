//! Seeded differential checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{iou, ConfusionMatrix};
use crate::interp::{interp_discrepancy, FeatureMap, InterpSpec};
use crate::io::{read_labels, read_scan, write_labels, write_scan, LabelSet, Point, PointCloud};
use crate::postprocess::{copy_pixel_label, nla, patch_oracle, LabelImage, NlaParams};
use crate::projection::{project, unproject_pixel, ProjectionConfig};
use crate::synth::{synth_scene, SceneSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_config(rng: &mut ChaCha8Rng) -> ProjectionConfig {
    ProjectionConfig::new(
        rng.random_range(1..32),
        rng.random_range(1..128),
        rng.random_range(0.05..0.3),
        rng.random_range(0.05..0.5),
    )
    .expect("positive field of view")
}

/// Random points in and around the field of view; some share the ray of an
/// earlier point so pixels get several points.
fn random_cloud(rng: &mut ChaCha8Rng, cfg: &ProjectionConfig, n: usize) -> PointCloud {
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let margin = 0.05 * cfg.fov();
    while pts.len() < n {
        if !pts.is_empty() && rng.random_bool(0.35) {
            let base = pts[rng.random_range(0..pts.len())];
            let s: f32 = if rng.random_bool(0.05) { 1.0 } else { rng.random_range(0.3..3.0) };
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
    PointCloud::new(pts).expect("finite points")
}

fn random_labels(rng: &mut ChaCha8Rng, h: usize, w: usize) -> LabelImage {
    LabelImage::new(h, w, (0..h * w).map(|_| rng.random_range(0..19)).collect()).expect("sized")
}

fn check(name: &'static str, result: std::result::Result<String, String>) -> Check {
    match result {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn nla_vs_oracle(seed: u64, scans: usize) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = 0;
    for s in 0..scans {
        let cfg = random_config(&mut rng);
        let n = rng.random_range(1..500);
        let cloud = random_cloud(&mut rng, &cfg, n);
        let (img, proj) = project(&cloud, &cfg).map_err(|e| e.to_string())?;
        let labels = random_labels(&mut rng, cfg.height, cfg.width);
        for kernel in [1, 3, 5, 7] {
            let p = NlaParams { kernel };
            let fast = nla(&img, &labels, &proj, &p).map_err(|e| e.to_string())?;
            let slow = patch_oracle(&img, &labels, &proj, &p).map_err(|e| e.to_string())?;
            if fast != slow {
                return Err(format!("scan {s}, kernel {kernel}: nla differs from the patch oracle"));
            }
            if kernel == 1 && fast != copy_pixel_label(&img, &labels, &proj).map_err(|e| e.to_string())? {
                return Err(format!("scan {s}: kernel 1 differs from copy"));
            }
        }
        points += n;
    }
    Ok(format!("{scans} scans, {points} points, kernels 1/3/5/7"))
}

fn projection_invariants(seed: u64, scans: usize) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..scans {
        let cfg = random_config(&mut rng);
        let n = rng.random_range(1..500);
        let cloud = random_cloud(&mut rng, &cfg, n);
        let (img, proj) = project(&cloud, &cfg).map_err(|e| e.to_string())?;
        let mut min = vec![f32::INFINITY; cfg.pixels()];
        for i in 0..proj.len() {
            if proj.h[i] as usize >= cfg.height || proj.w[i] as usize >= cfg.width {
                return Err(format!("scan {s}: point {i} out of bounds"));
            }
            let px = proj.pixel(i);
            min[px] = min[px].min(proj.range[i]);
        }
        if min != img.range {
            return Err(format!("scan {s}: pixel range is not the minimum of its points"));
        }
        if proj.owner_count() != img.valid_count() {
            return Err(format!("scan {s}: owners and valid pixels disagree"));
        }
        let mut centres = Vec::new();
        let mut pixels = Vec::new();
        for px in (0..cfg.pixels()).filter(|&px| img.is_valid(px)) {
            let (h, w) = (px / cfg.width, px % cfg.width);
            let q = unproject_pixel(h, w, img.range[px] as f64, &cfg).map_err(|e| e.to_string())?;
            centres.push(Point::new(q[0] as f32, q[1] as f32, q[2] as f32, 0.0));
            pixels.push(px);
        }
        let (_, back) = project(&PointCloud::new(centres).map_err(|e| e.to_string())?, &cfg)
            .map_err(|e| e.to_string())?;
        if (0..pixels.len()).any(|j| back.pixel(j) != pixels[j]) {
            return Err(format!("scan {s}: pixel round trip failed"));
        }
    }
    Ok(format!("{scans} scans"))
}

fn io_round_trip(seed: u64) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ProjectionConfig::default();
    for _ in 0..50 {
        let n = rng.random_range(1..200);
        let cloud = random_cloud(&mut rng, &cfg, n);
        let bytes = write_scan(&cloud);
        if write_scan(&read_scan(&bytes).map_err(|e| e.to_string())?) != bytes {
            return Err("scan bytes changed".into());
        }
        let labels = LabelSet {
            semantic: (0..cloud.len()).map(|_| rng.random()).collect(),
            instance: (0..cloud.len()).map(|_| rng.random()).collect(),
        };
        let bytes = write_labels(&labels);
        if write_labels(&read_labels(&bytes).map_err(|e| e.to_string())?) != bytes {
            return Err("label bytes changed".into());
        }
    }
    Ok("50 scan and label files".into())
}

fn lattice_exactness(seed: u64) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..20 {
        let (h, w) = (rng.random_range(2..8), rng.random_range(2..8));
        let data = (0..h * w * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fmap = FeatureMap::from_vec(h, w, 2, data).map_err(|e| e.to_string())?;
        let d = interp_discrepancy(&fmap, 2 * h - 1, 2 * w - 1, &InterpSpec::default())
            .map_err(|e| e.to_string())?;
        for i in (0..2 * h - 1).step_by(2) {
            for j in (0..2 * w - 1).step_by(2) {
                if d.diff.pixel(i, j).iter().any(|&v| v != 0.0) {
                    return Err(format!("{h}x{w}: nonzero difference at lattice node ({i},{j})"));
                }
            }
        }
    }
    Ok("20 feature maps".into())
}

fn synth_determinism(seed: u64) -> std::result::Result<String, String> {
    let spec = SceneSpec::pole_before_wall();
    let a = synth_scene(&spec, seed).map_err(|e| e.to_string())?;
    let b = synth_scene(&spec, seed).map_err(|e| e.to_string())?;
    if write_scan(&a.cloud) != write_scan(&b.cloud) || write_labels(&a.labels) != write_labels(&b.labels) {
        return Err("two runs differ".into());
    }
    Ok(format!("{} points", a.cloud.len()))
}

fn metric_example() -> std::result::Result<String, String> {
    // Class 0: tp 1, fp 1, fn 1. Class 1: tp 2, fp 1, fn 1.
    let conf = ConfusionMatrix::from_counts(&[vec![1, 1], vec![1, 2]]).map_err(|e| e.to_string())?;
    let r = iou(&conf).map_err(|e| e.to_string())?;
    let expected = [1.0 / 3.0, 0.5];
    let close = r
        .per_class
        .iter()
        .zip(expected)
        .all(|(got, want)| got.is_some_and(|g| (g - want).abs() < 1e-12));
    if !close {
        return Err(format!("per-class IoU {:?}", r.per_class));
    }
    Ok(format!("mIoU {:.4}", r.miou))
}

/// Runs every check with the given seed. `scans` random scans feed each of
/// the differential checks.
pub fn run(seed: u64, scans: usize) -> Vec<Check> {
    vec![
        check("nla equals patch oracle", nla_vs_oracle(seed, scans)),
        check("projection invariants", projection_invariants(seed.wrapping_add(1), scans)),
        check("scan and label round trip", io_round_trip(seed.wrapping_add(2))),
        check("interpolation exact on lattice", lattice_exactness(seed.wrapping_add(3))),
        check("synthetic scene determinism", synth_determinism(seed)),
        check("IoU hand example", metric_example()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run(5, 20) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
