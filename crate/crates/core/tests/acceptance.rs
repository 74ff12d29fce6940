#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Set `RANGESEG_KITTI_SCAN=/path/to/000000.bin` to include a real scan in the
//! projection invariant checks.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rangeseg_core::*;

use common::{random_cloud, random_label_image, reference_pixel, rng};

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 NLA-oracle equivalence", nla_oracle_equivalence),
        ("2 degeneration analysis", degeneration_analysis),
        ("3 projection invariants", projection_invariants),
        ("4 occlusion existence", occlusion_existence),
        ("5 blur-reduction direction", blur_reduction_direction),
        ("6 latency direction", latency_direction),
        ("7 normal-map checks", normal_map_checks),
        ("8 I/O round-trip", io_round_trip),
        ("9 metric oracle", metric_oracle),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())))));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name} ({secs:.2}s): {why}");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn nla_oracle_equivalence() -> Outcome {
    let mut r = rng(0xA11CE);
    let irregular = [(1, 1), (1, 9), (7, 1), (3, 5), (5, 13), (11, 4), (16, 64), (9, 100), (32, 257), (2, 2)];
    let mut scans = 0;
    let mut points = 0;
    for s in 0..110 {
        let cfg = if s % 11 == 0 {
            ProjectionConfig::default()
        } else {
            let (h, w) = irregular[s % irregular.len()];
            let up = r.random_range(0.02..0.3);
            let down = r.random_range(0.05..0.5);
            ProjectionConfig::new(h, w, up, down).unwrap()
        };
        let n = if cfg.pixels() > 10_000 { 60_000 } else { r.random_range(1..3 * cfg.pixels() + 5) };
        let cloud = random_cloud(&mut r, &cfg, n);
        let (img, proj) = project(&cloud, &cfg).map_err(|e| e.to_string())?;
        let labels = random_label_image(&mut r, cfg.height, cfg.width);
        for kernel in [1, 3, 5, 7] {
            let p = NlaParams { kernel };
            let fast = nla(&img, &labels, &proj, &p).map_err(|e| e.to_string())?;
            let slow = patch_oracle(&img, &labels, &proj, &p).map_err(|e| e.to_string())?;
            ensure!(fast == slow, "scan {s} ({}x{}), kernel {kernel}: nla differs from patch_oracle", cfg.height, cfg.width);
            ensure!(fast.len() == cloud.len(), "scan {s}: output length");
        }
        let k1 = nla(&img, &labels, &proj, &NlaParams { kernel: 1 }).unwrap();
        let copy = copy_pixel_label(&img, &labels, &proj).unwrap();
        ensure!(k1 == copy, "scan {s}: nla(k=1) differs from copy_pixel_label");
        scans += 1;
        points += cloud.len();
    }
    Ok(format!("{scans} scans, {points} points, kernels 1/3/5/7, exact match"))
}

fn degeneration_analysis() -> Outcome {
    let mut r = rng(0xDE6E);
    let spec = InterpSpec::default();
    let mut lattice_checks = 0;
    for _ in 0..50 {
        let (h, w, c) = (r.random_range(2..7), r.random_range(2..7), r.random_range(1..4));
        let data = (0..h * w * c).map(|_| r.random_range(-5.0..5.0)).collect();
        let fmap = FeatureMap::from_vec(h, w, c, data).unwrap();
        let m = r.random_range(1..5);
        let (oh, ow) = ((h - 1) * m + 1, (w - 1) * m + 1);
        let d = interp_discrepancy(&fmap, oh, ow, &spec).map_err(|e| e.to_string())?;
        for i in (0..oh).step_by(m) {
            for j in (0..ow).step_by(m) {
                for ch in 0..c {
                    let v = d.diff.get(i, j, ch);
                    ensure!(v.abs() <= 1e-12, "lattice sample ({i},{j}) differs by {v}");
                    lattice_checks += 1;
                }
            }
        }
    }

    let cell = FeatureMap::from_vec(2, 2, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let d = interp_discrepancy(&cell, 3, 3, &spec).unwrap();
    let idw = d.diff.get(1, 0, 0) + bilinear_upsample(&cell, 3, 3).unwrap().get(1, 0, 0);
    let bil = bilinear_upsample(&cell, 3, 3).unwrap().get(1, 0, 0);
    ensure!((idw - 0.375).abs() <= 1e-9, "4-NN inverse-l1 at (0.5,0) = {idw}, expected 0.375");
    ensure!((bil - 0.5).abs() <= 1e-9, "bilinear at (0.5,0) = {bil}, expected 0.5");
    ensure!((d.diff.get(1, 0, 0) + 0.125).abs() <= 1e-9, "gap {}", d.diff.get(1, 0, 0));

    // Collinear equispaced nodes, two neighbours: linear interpolation.
    let nodes = 20;
    let values: Vec<[f64; 1]> = (0..nodes).map(|_| [r.random_range(-10.0..10.0)]).collect();
    let known: Vec<Known> = values
        .iter()
        .enumerate()
        .map(|(i, v)| Known { position: [i as f64, 0.0], value: v })
        .collect();
    let spec2 = InterpSpec { k: 2, ..Default::default() };
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x: f64 = r.random_range(0.0..(nodes - 1) as f64);
        let got = distance_interpolate(&known, [x, 0.0], &spec2).unwrap()[0];
        let i = (x.floor() as usize).min(nodes - 2);
        let t = x - i as f64;
        let linear = values[i][0] * (1.0 - t) + values[i + 1][0] * t;
        worst = worst.max((got - linear).abs());
    }
    ensure!(worst <= 1e-9, "1D k=2 deviates from linear by {worst}");
    Ok(format!(
        "{lattice_checks} lattice samples exact; unit cell 0.375 vs 0.5 (gap 0.125); 1D k=2 max dev {worst:.1e}"
    ))
}

/// Bounds, owner minimality by brute force, partition, pixel round trip.
fn check_projection(cloud: &PointCloud, cfg: &ProjectionConfig) -> std::result::Result<usize, String> {
    let (img, proj) = project(cloud, cfg).map_err(|e| e.to_string())?;
    let n = cloud.len();
    let mut mapped: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        ensure!((proj.h[i] as usize) < cfg.height && (proj.w[i] as usize) < cfg.width, "point {i} out of bounds");
        let (h, w) = reference_pixel(&cloud.points[i], cfg);
        ensure!((h, w) == (proj.h[i] as usize, proj.w[i] as usize), "point {i}: pixel differs from direct formula");
        mapped.entry(h * cfg.width + w).or_default().push(i);
    }
    let owners = proj.owner_count();
    ensure!(owners + (n - owners) == n && owners == img.valid_count(), "partition violated");
    ensure!(mapped.len() == img.valid_count(), "valid pixels {} vs mapped pixels {}", img.valid_count(), mapped.len());
    let mut centres = Vec::with_capacity(mapped.len());
    let mut pixels = Vec::with_capacity(mapped.len());
    for (&px, pts) in &mapped {
        let min = pts.iter().map(|&i| proj.range[i]).fold(f32::INFINITY, f32::min);
        let expected_owner = *pts.iter().find(|&&i| proj.range[i] == min).unwrap();
        ensure!(img.range[px] == min, "pixel {px}: range {} but minimum {min}", img.range[px]);
        ensure!(img.owner[px] as usize == expected_owner, "pixel {px}: wrong owner");
        ensure!(pts.iter().filter(|&&i| proj.is_owner[i]).count() == 1, "pixel {px}: owner count");
        let (h, w) = (px / cfg.width, px % cfg.width);
        let q = unproject_pixel(h, w, img.range[px] as f64, cfg).map_err(|e| e.to_string())?;
        centres.push(Point::new(q[0] as f32, q[1] as f32, q[2] as f32, 0.0));
        pixels.push((h, w));
    }
    let back = PointCloud::new(centres).unwrap();
    let (_, bp) = project(&back, cfg).map_err(|e| e.to_string())?;
    for (j, &(h, w)) in pixels.iter().enumerate() {
        let got = (bp.h[j] as usize, bp.w[j] as usize);
        ensure!(got == (h, w), "pixel ({h},{w}) round-trips to {got:?}");
    }
    let (img2, proj2) = project(cloud, cfg).unwrap();
    ensure!(img2 == img && proj2 == proj, "projection not deterministic");
    Ok(n)
}

fn projection_invariants() -> Outcome {
    let mut scans = 0;
    let mut points = 0;
    let specs = [SceneSpec::pole_before_wall(), SceneSpec::ground_plane(-1.73, 8)];
    for (k, spec) in specs.iter().enumerate() {
        for seed in 0..3 {
            let scan = synth_scene(spec, seed).map_err(|e| e.to_string())?;
            points += check_projection(&scan.cloud, &spec.sampling.projection()).map_err(|e| format!("scene {k} seed {seed}: {e}"))?;
            scans += 1;
        }
    }
    let mut r = rng(33);
    for s in 0..10 {
        let cfg = ProjectionConfig::new(r.random_range(1..40), r.random_range(1..300), 0.1, 0.4).unwrap();
        let cloud = random_cloud(&mut r, &cfg, 2000);
        points += check_projection(&cloud, &cfg).map_err(|e| format!("random scan {s}: {e}"))?;
        scans += 1;
    }
    let mut real = String::from("no real scan supplied");
    if let Ok(path) = std::env::var("RANGESEG_KITTI_SCAN") {
        let bytes = std::fs::read(&path).map_err(|e| format!("{path}: {e}"))?;
        let cloud = read_scan(&bytes).map_err(|e| e.to_string())?;
        let cloud = PointCloud::new(cloud.points.into_iter().filter(|p| p.range() > 0.0).collect()).unwrap();
        points += check_projection(&cloud, &ProjectionConfig::default())?;
        scans += 1;
        real = format!("real scan {path} included");
    }
    Ok(format!("{scans} scans, {points} points; {real}"))
}

fn occlusion_existence() -> Outcome {
    let spec = SceneSpec::pole_before_wall();
    let cfg = spec.sampling.projection();
    let scan = synth_scene(&spec, 0).map_err(|e| e.to_string())?;
    let (_, proj) = project(&scan.cloud, &cfg).map_err(|e| e.to_string())?;
    let stats = occlusion_stats(&proj, Some(&scan.labels.semantic)).map_err(|e| e.to_string())?;

    // Independent tally straight from the cloud.
    let mut by_pixel: BTreeMap<(usize, usize), Vec<u16>> = BTreeMap::new();
    for (p, &l) in scan.cloud.points.iter().zip(&scan.labels.semantic) {
        by_pixel.entry(reference_pixel(p, &cfg)).or_default().push(l);
    }
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    let mut occluded = 0;
    let mut cross = 0;
    for labels in by_pixel.values() {
        *hist.entry(labels.len()).or_default() += 1;
        occluded += labels.len() - 1;
        if labels.iter().any(|&l| l != labels[0]) {
            cross += 1;
        }
    }
    let lab = stats.labels.as_ref().unwrap();
    ensure!(stats.occluded_fraction > 0.0, "no occluded points");
    ensure!(cross >= 1, "no cross-class co-pixel pair");
    ensure!(hist == stats.multiplicity, "multiplicity {:?} vs brute force {:?}", stats.multiplicity, hist);
    ensure!(occluded == stats.occluded, "occluded {} vs brute force {occluded}", stats.occluded);
    ensure!(cross == lab.cross_class_pixels, "cross-class pixels {} vs brute force {cross}", lab.cross_class_pixels);
    Ok(format!(
        "occluded {} of {} ({:.3}%), {} cross-class pixels, label disagreement {:.3}",
        stats.occluded,
        stats.points,
        100.0 * stats.occluded_fraction,
        cross,
        lab.fraction.unwrap_or(0.0)
    ))
}

fn blur_reduction_direction() -> Outcome {
    let spec = SceneSpec::pole_before_wall();
    let cfg = spec.sampling.projection();
    let mut lines = Vec::new();
    for seed in 0..3 {
        let scan = synth_scene(&spec, seed).map_err(|e| e.to_string())?;
        let gt = &scan.labels.semantic;
        let (img, proj) = project(&scan.cloud, &cfg).map_err(|e| e.to_string())?;
        let pred = LabelImage::from_owner_labels(&img, gt, IGNORE_ID).map_err(|e| e.to_string())?;
        let nla_out = nla(&img, &pred, &proj, &NlaParams::default()).unwrap();
        let copy = copy_pixel_label(&img, &pred, &proj).unwrap();
        let knn_out = knn_postprocess(&img, &pred, &proj, &KnnParams::default()).unwrap();
        let report = blur_metric(&proj, gt, &[(Method::Copy, &copy), (Method::Nla, &nla_out), (Method::Knn, &knn_out)], IGNORE_ID)
            .map_err(|e| e.to_string())?;
        let (acc_copy, acc_nla) = (report.accuracy(Method::Copy).unwrap(), report.accuracy(Method::Nla).unwrap());
        let m_copy = miou(gt, &copy, NUM_CLASSES, IGNORE_ID).unwrap();
        let m_nla = miou(gt, &nla_out, NUM_CLASSES, IGNORE_ID).unwrap();
        let m_knn = miou(gt, &knn_out, NUM_CLASSES, IGNORE_ID).unwrap();
        ensure!(acc_nla >= acc_copy + 0.2, "seed {seed}: occluded accuracy nla {acc_nla:.3} vs copy {acc_copy:.3}");
        ensure!(m_nla >= m_copy, "seed {seed}: mIoU nla {m_nla:.4} < copy {m_copy:.4}");
        lines.push(format!(
            "seed {seed}: occluded acc copy {acc_copy:.3} nla {acc_nla:.3} knn {:.3}; mIoU copy {m_copy:.4} nla {m_nla:.4} knn {m_knn:.4}",
            report.accuracy(Method::Knn).unwrap()
        ));
    }
    Ok(lines.join(" | "))
}

fn latency_direction() -> Outcome {
    let spec = SceneSpec::pole_before_wall();
    let cfg = spec.sampling.projection();
    let scan = synth_scene(&spec, 0).map_err(|e| e.to_string())?;
    let (img, _) = project(&scan.cloud, &cfg).unwrap();
    let pred = LabelImage::from_owner_labels(&img, &scan.labels.semantic, IGNORE_ID).unwrap();
    let input = BenchInput {
        cloud: &scan.cloud,
        config: cfg,
        predictions: &pred,
        gt: Some(&scan.labels.semantic),
        num_classes: NUM_CLASSES,
        ignore: IGNORE_ID,
    };
    let reps = 25;
    let n = bench(&input, &PostProcessor::Nla(NlaParams { kernel: 5 }), reps).map_err(|e| e.to_string())?;
    let k = bench(&input, &PostProcessor::Knn(KnnParams { kernel: 5, ..Default::default() }), reps).map_err(|e| e.to_string())?;
    ensure!(n.deterministic && k.deterministic, "outputs changed across repetitions");
    ensure!(
        n.postprocess.median_ms <= k.postprocess.median_ms,
        "nla median {:.3} ms > knn median {:.3} ms",
        n.postprocess.median_ms,
        k.postprocess.median_ms
    );
    ensure!(n.postprocess.median_ms < 50.0, "nla median {:.3} ms exceeds 50 ms", n.postprocess.median_ms);
    Ok(format!(
        "{} points, {reps} reps: nla median {:.2} ms [p10 {:.2}, p90 {:.2}], knn median {:.2} ms [p10 {:.2}, p90 {:.2}]",
        n.points,
        n.postprocess.median_ms,
        n.postprocess.p10_ms,
        n.postprocess.p90_ms,
        k.postprocess.median_ms,
        k.postprocess.p10_ms,
        k.postprocess.p90_ms
    ))
}

fn check_normals(img: &RangeImage, nm: &NormalMap) -> std::result::Result<usize, String> {
    for i in 0..nm.valid.len() {
        if !nm.valid[i] {
            continue;
        }
        let n = nm.normals[i];
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        ensure!((norm - 1.0).abs() <= 1e-6, "pixel {i}: |n| = {norm}");
        let p = img.point(i);
        let facing = n[0] * p[0] + n[1] * p[1] + n[2] * p[2];
        ensure!(facing <= 0.0, "pixel {i}: n.p = {facing}");
    }
    Ok(nm.valid_count())
}

fn normal_map_checks() -> Outcome {
    let ground = SceneSpec::ground_plane(-1.73, 8);
    let scan = synth_scene(&ground, 5).map_err(|e| e.to_string())?;
    let (img, _) = project(&scan.cloud, &ground.sampling.projection()).unwrap();
    let nm = estimate_normals(&img);
    let valid = check_normals(&img, &nm)?;
    ensure!(valid > 10_000, "only {valid} valid ground normals");
    let mut worst = 0.0f64;
    for (n, &v) in nm.normals.iter().zip(&nm.valid) {
        if v {
            worst = worst.max(n[2].clamp(-1.0, 1.0).acos().to_degrees());
        }
    }
    ensure!(worst <= 2.0, "ground normal deviates {worst:.3} deg from +z");

    let spec = SceneSpec::pole_before_wall();
    let scan = synth_scene(&spec, 5).unwrap();
    let (img, _) = project(&scan.cloud, &spec.sampling.projection()).unwrap();
    let nm2 = estimate_normals(&img);
    let valid2 = check_normals(&img, &nm2)?;
    Ok(format!("ground: {valid} normals, max deviation {worst:.4} deg; pole/wall: {valid2} normals unit and sensor-facing"))
}

fn io_round_trip() -> Outcome {
    let mut r = rng(0x10);
    let mut count = 0;
    for inst in 0..1000 {
        let n = if inst < 3 { inst } else { r.random_range(0..200) };
        let pts = (0..n)
            .map(|_| {
                let mut f = || match r.random_range(0..10) {
                    0 => 0.0,
                    1 => -0.0,
                    2 => f32::MAX,
                    3 => f32::MIN_POSITIVE / 2.0,
                    _ => r.random_range(-1e4f32..1e4),
                };
                Point::new(f(), f(), f(), f())
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let bytes = write_scan(&cloud);
        ensure!(bytes.len() == 16 * n, "scan byte length");
        let back = read_scan(&bytes).map_err(|e| e.to_string())?;
        ensure!(write_scan(&back) == bytes, "instance {inst}: scan bytes differ");
        ensure!(back.points.iter().zip(&cloud.points).all(|(a, b)| a.x.to_bits() == b.x.to_bits()), "instance {inst}: bits differ");

        let mut id = || match r.random_range(0..6) {
            0 => 0,
            1 => 0xFFFF,
            2 => IGNORE_ID,
            _ => r.random(),
        };
        let labels = LabelSet {
            semantic: (0..n).map(|_| id()).collect(),
            instance: (0..n).map(|_| id()).collect(),
        };
        let lb = write_labels(&labels);
        let lback = read_labels(&lb).map_err(|e| e.to_string())?;
        ensure!(lback == labels && write_labels(&lback) == lb, "instance {inst}: labels differ");
        count += 1;
    }
    Ok(format!("{count} scan + label instances byte-exact"))
}

fn metric_oracle() -> Outcome {
    let conf = ConfusionMatrix::from_counts(&[vec![1, 1], vec![0, 2]]).unwrap();
    let r = iou(&conf).map_err(|e| e.to_string())?;
    let (a, b) = (r.per_class[0].unwrap(), r.per_class[1].unwrap());
    ensure!((a - 0.5).abs() <= 1e-12, "IoU0 = {a}");
    ensure!((b - 2.0 / 3.0).abs() <= 1e-12, "IoU1 = {b}");
    ensure!((r.miou - 7.0 / 12.0).abs() <= 1e-12, "mIoU = {}", r.miou);
    for n in 1..6 {
        let rows: Vec<Vec<u64>> = (0..n).map(|g| (0..n).map(|p| if g == p { 3 + g as u64 } else { 0 }).collect()).collect();
        let d = iou(&ConfusionMatrix::from_counts(&rows).unwrap()).unwrap();
        ensure!(d.miou == 1.0, "diagonal {n}x{n} mIoU {}", d.miou);
    }
    Ok(format!("IoU = ({a}, {b}), mIoU = {}; diagonal matrices give 1.0", r.miou))
}
