use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use rangeseg_core::dump::{
    assemble_range_image, normal_channel, range_image_channel, read_channel, read_label_image, read_sidecar,
    render_channel, render_labels, write_channel, write_feature_map, write_label_image, write_sidecar, Channel,
    ColorTable,
};
use rangeseg_core::normals::SYNTHETIC_STATS;
use rangeseg_core::*;

use crate::args::*;
use crate::config::{with_suffix, RunConfig};

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn channel_path(prefix: &Path, channel: Channel) -> std::path::PathBuf {
    with_suffix(prefix, &format!(".{}.raw", channel.name()))
}

/// Range image, projection and config written by `project` under `prefix`.
pub fn load_image(prefix: &Path) -> Result<(RangeImage, PointProjection, ProjectionConfig)> {
    let sidecar = with_suffix(prefix, ".proj");
    let (proj, config) = read_sidecar(&read(&sidecar)?).with_context(|| sidecar.display().to_string())?;
    let dumps = Channel::RANGE_IMAGE
        .iter()
        .map(|&c| {
            let p = channel_path(prefix, c);
            read_channel(&read(&p)?).with_context(|| p.display().to_string())
        })
        .collect::<Result<Vec<_>>>()?;
    let img = assemble_range_image(&dumps, &proj).with_context(|| prefix.display().to_string())?;
    Ok((img, proj, config))
}

pub fn synth(a: &SynthArgs, cfg: &RunConfig) -> Result<String> {
    let spec = SceneSpec::parse(&read_text(&a.spec)?).with_context(|| a.spec.display().to_string())?;
    let scan = synth_scene(&spec, cfg.seed)?;
    write(&with_suffix(&a.out, ".bin"), &write_scan(&scan.cloud))?;
    write(&with_suffix(&a.out, ".label"), &write_labels(&scan.labels))?;
    Ok(format!(
        "{} points, {} second returns\n",
        scan.cloud.len(),
        scan.occlusion_pairs().count()
    ))
}

pub fn project_scan(a: &ProjectArgs, cfg: &RunConfig) -> Result<String> {
    let config = cfg.projection.expect("resolved");
    let cloud = read_scan(&read(&a.scan)?).with_context(|| a.scan.display().to_string())?;
    let labels = match &a.labels {
        Some(p) => {
            let l = read_labels(&read(p)?).with_context(|| p.display().to_string())?;
            ensure!(
                l.len() == cloud.len(),
                "{} has {} labels for {} points",
                p.display(),
                l.len(),
                cloud.len()
            );
            Some(l)
        }
        None => None,
    };
    let (img, proj) = project(&cloud, &config)?;
    for c in Channel::RANGE_IMAGE {
        let values = range_image_channel(&img, c)?;
        write(&channel_path(&a.out, c), &write_channel(img.height, img.width, c, values))?;
    }
    write(&with_suffix(&a.out, ".proj"), &write_sidecar(&proj, &config))?;
    if let Some(l) = labels {
        let pixels = LabelImage::from_owner_labels(&img, &l.semantic, IGNORE_ID)?;
        write(&with_suffix(&a.out, ".pixel.label"), &write_label_image(&pixels))?;
    }
    Ok(format!(
        "{} points, {} valid pixels, {} occluded, {} clamped\n",
        proj.len(),
        img.valid_count(),
        proj.len() - proj.owner_count(),
        proj.clamped
    ))
}

pub fn normals(a: &NormalsArgs, _cfg: &RunConfig) -> Result<String> {
    let (img, _, _) = load_image(&a.image)?;
    let nm = estimate_normals(&img);
    for c in Channel::NORMALS {
        let values = normal_channel(&nm, c)?;
        write(&channel_path(&a.out, c), &write_channel(img.height, img.width, c, &values))?;
    }
    if let Some(path) = &a.tensor {
        let layout = match a.channels {
            Layout::Five => InputLayout::Five,
            Layout::Eight => InputLayout::Eight,
        };
        let text = match &a.stats {
            Some(p) => read_text(p)?,
            None => SYNTHETIC_STATS.to_string(),
        };
        let stats = ChannelStats::parse(&text, layout)?;
        let tensor = build_input_tensor(&img, Some(&nm), layout, &stats)?;
        write(path, &write_feature_map(&tensor))?;
    }
    Ok(format!("{} valid normals of {} valid pixels\n", nm.valid_count(), img.valid_count()))
}

pub fn postprocess(a: &PostprocessArgs, cfg: &RunConfig) -> Result<String> {
    let method = cfg.method.expect("resolved");
    let (img, proj, _) = load_image(&a.image)?;
    let pred = read_label_image(&read(&a.pred)?, img.height, img.width)
        .with_context(|| a.pred.display().to_string())?;
    let labels = method.run(&img, &pred, &proj)?;
    write(&a.out, &write_labels(&LabelSet::from_semantic(labels)))?;
    Ok(format!("{} {}: {} points labelled\n", method.method(), method.params(), proj.len()))
}

fn read_semantic(path: &Path, remap: Option<&RemapTable>) -> Result<Vec<u16>> {
    let labels = read_labels(&read(path)?).with_context(|| path.display().to_string())?;
    Ok(match remap {
        Some(t) => remap_labels(&labels, t)?.labels.semantic,
        None => labels.semantic,
    })
}

pub fn eval(a: &EvalArgs, cfg: &RunConfig) -> Result<String> {
    let table = match &cfg.remap {
        Some(p) => Some(RemapTable::parse(&read_text(p)?, a.num_classes, a.ignore).with_context(|| p.display().to_string())?),
        None => None,
    };
    let gt = read_semantic(&a.gt, table.as_ref())?;
    let pred = read_semantic(&a.pred, table.as_ref())?;
    ensure!(gt.len() == pred.len(), "ground truth has {} labels, prediction {}", gt.len(), pred.len());

    let mut conf = ConfusionMatrix::new(a.num_classes);
    accumulate(&mut conf, &gt, &pred, a.ignore)?;
    let report = iou(&conf)?;

    let mut out = String::new();
    writeln!(out, "{:<16}{}", "points", gt.len())?;
    writeln!(out, "{:<16}{}", "evaluated", conf.total())?;
    writeln!(out, "{:<16}{:.4}", "mIoU", report.miou)?;
    if let Some(p) = &a.proj {
        let (proj, _) = read_sidecar(&read(p)?).with_context(|| p.display().to_string())?;
        match blur_metric(&proj, &gt, &[(Method::Copy, &pred)], a.ignore)? {
            BlurReport::NotApplicable => writeln!(out, "{:<16}n/a", "occluded_acc")?,
            BlurReport::Occluded { points, per_method, .. } => {
                writeln!(out, "{:<16}{}", "occluded", points)?;
                writeln!(out, "{:<16}{:.4}", "occluded_acc", per_method[0].accuracy)?;
            }
        }
    }
    writeln!(out, "{:<8}{:>8}", "class", "iou")?;
    let mut csv = String::from("class,iou\n");
    for (c, v) in report.per_class.iter().enumerate() {
        match v {
            Some(v) => {
                writeln!(out, "{c:<8}{v:>8.4}")?;
                writeln!(csv, "{c},{v:.6}")?;
            }
            None => {
                writeln!(out, "{c:<8}{:>8}", "-")?;
                writeln!(csv, "{c},")?;
            }
        }
    }
    writeln!(csv, "miou,{:.6}", report.miou)?;
    if let Some(p) = &a.csv {
        write(p, csv.as_bytes())?;
    }
    Ok(out)
}

pub fn occlusion(a: &OcclusionArgs, _cfg: &RunConfig) -> Result<String> {
    let (proj, _) = read_sidecar(&read(&a.proj)?).with_context(|| a.proj.display().to_string())?;
    let labels = match &a.labels {
        Some(p) => Some(read_semantic(p, None)?),
        None => None,
    };
    let s = occlusion_stats(&proj, labels.as_deref())?;
    let mut out = String::new();
    writeln!(out, "{:<20}{}", "points", s.points)?;
    writeln!(out, "{:<20}{}", "valid_pixels", s.valid_pixels)?;
    writeln!(out, "{:<20}{}", "occluded", s.occluded)?;
    writeln!(out, "{:<20}{:.6}", "occluded_fraction", s.occluded_fraction)?;
    writeln!(out, "{:<20}{}", "clamped", s.clamped)?;
    if let Some(d) = &s.labels {
        writeln!(out, "{:<20}{}", "label_differs", d.differing)?;
        match d.fraction {
            Some(f) => writeln!(out, "{:<20}{f:.6}", "label_differs_frac")?,
            None => writeln!(out, "{:<20}n/a", "label_differs_frac")?,
        }
        writeln!(out, "{:<20}{}", "cross_class_pixels", d.cross_class_pixels)?;
    }
    writeln!(out, "multiplicity")?;
    for (m, count) in &s.multiplicity {
        writeln!(out, "  {m:<6}{count}")?;
    }
    Ok(out)
}

/// Copy, nla at three kernel sizes and a grid of knn settings.
pub fn sweep() -> Vec<PostProcessor> {
    let mut all = vec![PostProcessor::Copy];
    all.extend([3, 5, 7].map(|kernel| PostProcessor::Nla(NlaParams { kernel })));
    for kernel in [3, 5] {
        for k in [3, 5, 7] {
            for cutoff in [0.5, 1.0, 2.0] {
                all.push(PostProcessor::Knn(KnnParams { kernel, k, cutoff, sigma: 1.0 }));
            }
        }
    }
    all
}

pub fn bench_cmd(a: &BenchArgs, cfg: &RunConfig) -> Result<String> {
    let config = cfg.projection.expect("resolved");
    let (cloud, predictions, gt) = match (&a.scan, &a.pred) {
        (Some(scan), Some(pred)) => {
            let cloud = read_scan(&read(scan)?).with_context(|| scan.display().to_string())?;
            let pred = read_label_image(&read(pred)?, config.height, config.width)
                .with_context(|| pred.display().to_string())?;
            let gt = match &a.gt {
                Some(p) => Some(read_semantic(p, None)?),
                None => None,
            };
            (cloud, pred, gt)
        }
        _ => {
            let spec = match &a.spec {
                Some(p) => SceneSpec::parse(&read_text(p)?).with_context(|| p.display().to_string())?,
                None => SceneSpec::pole_before_wall(),
            };
            let scan = synth_scene(&spec, cfg.seed)?;
            // Ground truth stands in for a perfect network on the owners.
            let (img, _) = project(&scan.cloud, &config)?;
            let pred = LabelImage::from_owner_labels(&img, &scan.labels.semantic, IGNORE_ID)?;
            (scan.cloud, pred, Some(scan.labels.semantic))
        }
    };
    if let Some(g) = &gt {
        ensure!(g.len() == cloud.len(), "ground truth has {} labels for {} points", g.len(), cloud.len());
    }
    let input = BenchInput {
        cloud: &cloud,
        config,
        predictions: &predictions,
        gt: gt.as_deref(),
        num_classes: a.num_classes,
        ignore: a.ignore,
    };
    let methods = if a.sweep { sweep() } else { vec![cfg.method.expect("resolved")] };
    let mut csv = String::from("method,param_set,points,median_ms,p10_ms,p90_ms,projection_median_ms,miou,deterministic\n");
    for m in &methods {
        let r = bench(&input, m, a.reps)?;
        let miou = r.miou.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{},{}",
            r.method,
            r.params,
            r.points,
            r.postprocess.median_ms,
            r.postprocess.p10_ms,
            r.postprocess.p90_ms,
            r.projection.median_ms,
            miou,
            r.deterministic
        )?;
    }
    match &a.csv {
        Some(p) => {
            write(p, csv.as_bytes())?;
            Ok(format!("{} configurations timed\n", methods.len()))
        }
        None => Ok(csv),
    }
}

pub fn render(a: &RenderArgs, _cfg: &RunConfig) -> Result<String> {
    let ppm = if let Some(p) = &a.channel {
        let dump = read_channel(&read(p)?).with_context(|| p.display().to_string())?;
        render_channel(dump.height, dump.width, &dump.values)?
    } else if let (Some(p), Some(h), Some(w)) = (&a.labels, a.height, a.width) {
        let labels = read_label_image(&read(p)?, h, w).with_context(|| p.display().to_string())?;
        let colors = match &a.colors {
            Some(c) => ColorTable::parse(&read_text(c)?)?,
            None => ColorTable::semantic_kitti(),
        };
        render_labels(&labels, &colors)
    } else {
        bail!("nothing to render");
    };
    write(&a.out, &ppm)?;
    Ok(String::new())
}

pub fn selftest(a: &SelftestArgs, cfg: &RunConfig) -> Result<String> {
    let checks = rangeseg_core::selftest::run(cfg.seed, a.scans);
    let mut out = String::new();
    for c in &checks {
        writeln!(out, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        print!("{out}");
        bail!("{failed} of {} checks failed", checks.len());
    }
    Ok(out)
}
