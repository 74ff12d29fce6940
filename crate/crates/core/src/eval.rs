//! Confusion-matrix metrics, occluded-point accuracy and the latency harness.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{check_len, Error, Result};
use crate::io::PointCloud;
use crate::postprocess::{copy_pixel_label, knn_postprocess, nla, KnnParams, LabelImage, NlaParams};
use crate::projection::{project, PointProjection, ProjectionConfig};

/// `counts[gt][pred]` over non-ignored points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    /// Row-major `counts[gt][pred]`.
    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::new(n);
        for (g, row) in rows.iter().enumerate() {
            check_len("confusion row", row.len(), n)?;
            m.counts[g * n..(g + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.num_classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    /// Adds the counts of `other`.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::Data(format!(
                "cannot merge {}-class and {}-class matrices",
                self.num_classes, other.num_classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Tallies points whose ground truth is not `ignore`.
    ///
    /// Ground-truth ids must be `< num_classes` or `ignore`; predictions for
    /// counted points must be `< num_classes`.
    pub fn accumulate(&mut self, gt: &[u16], pred: &[u16], ignore: u16) -> Result<()> {
        check_len("predictions", pred.len(), gt.len())?;
        let n = self.num_classes;
        for (i, (&g, &p)) in gt.iter().zip(pred).enumerate() {
            if g == ignore {
                continue;
            }
            if g as usize >= n || p as usize >= n {
                return Err(Error::Data(format!(
                    "point {i}: class ids gt={g} pred={p} outside [0, {n})"
                )));
            }
            self.counts[g as usize * n + p as usize] += 1;
        }
        Ok(())
    }
}

pub fn accumulate(conf: &mut ConfusionMatrix, gt: &[u16], pred: &[u16], ignore: u16) -> Result<()> {
    conf.accumulate(gt, pred, ignore)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    /// `None` for classes absent from both ground truth and prediction.
    pub per_class: Vec<Option<f64>>,
    pub miou: f64,
}

/// `TP / (TP + FP + FN)` per class; the mean skips undefined classes.
pub fn iou(conf: &ConfusionMatrix) -> Result<IouReport> {
    let n = conf.num_classes;
    let per_class: Vec<Option<f64>> = (0..n)
        .map(|c| {
            let tp = conf.get(c, c);
            let fn_: u64 = (0..n).map(|p| conf.get(c, p)).sum::<u64>() - tp;
            let fp: u64 = (0..n).map(|g| conf.get(g, c)).sum::<u64>() - tp;
            let denom = tp + fp + fn_;
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::Data("no class has a non-zero IoU denominator".into()));
    }
    Ok(IouReport {
        miou: defined.iter().sum::<f64>() / defined.len() as f64,
        per_class,
    })
}

/// Convenience: mIoU of one prediction vector.
pub fn miou(gt: &[u16], pred: &[u16], num_classes: usize, ignore: u16) -> Result<f64> {
    let mut conf = ConfusionMatrix::new(num_classes);
    conf.accumulate(gt, pred, ignore)?;
    Ok(iou(&conf)?.miou)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Copy,
    Nla,
    Knn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Copy => "copy",
            Method::Nla => "nla",
            Method::Knn => "knn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "copy" => Ok(Method::Copy),
            "nla" => Ok(Method::Nla),
            "knn" => Ok(Method::Knn),
            _ => Err(Error::InvalidParam(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodAccuracy {
    pub method: Method,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlurReport {
    /// No occluded point with a non-ignored label.
    NotApplicable,
    Occluded {
        points: usize,
        per_method: Vec<MethodAccuracy>,
        /// `accuracy(nla) - accuracy(copy)` when both were supplied.
        nla_minus_copy: Option<f64>,
    },
}

impl BlurReport {
    pub fn accuracy(&self, method: Method) -> Option<f64> {
        match self {
            BlurReport::NotApplicable => None,
            BlurReport::Occluded { per_method, .. } => {
                per_method.iter().find(|m| m.method == method).map(|m| m.accuracy)
            }
        }
    }
}

/// Accuracy of each method restricted to occluded points (points that do not
/// own their pixel) whose ground truth is not `ignore`.
pub fn blur_metric(
    proj: &PointProjection,
    gt: &[u16],
    outputs: &[(Method, &[u16])],
    ignore: u16,
) -> Result<BlurReport> {
    check_len("ground-truth labels", gt.len(), proj.len())?;
    for (m, out) in outputs {
        if out.len() != gt.len() {
            return Err(Error::Data(format!(
                "{m} output has {} labels, expected {}",
                out.len(),
                gt.len()
            )));
        }
    }
    let selected: Vec<usize> = (0..gt.len())
        .filter(|&i| !proj.is_owner[i] && gt[i] != ignore)
        .collect();
    if selected.is_empty() {
        return Ok(BlurReport::NotApplicable);
    }
    let per_method: Vec<MethodAccuracy> = outputs
        .iter()
        .map(|&(method, out)| {
            let correct = selected.iter().filter(|&&i| out[i] == gt[i]).count();
            MethodAccuracy {
                method,
                correct,
                accuracy: correct as f64 / selected.len() as f64,
            }
        })
        .collect();
    let acc = |m: Method| per_method.iter().find(|a| a.method == m).map(|a| a.accuracy);
    let nla_minus_copy = acc(Method::Nla).zip(acc(Method::Copy)).map(|(n, c)| n - c);
    Ok(BlurReport::Occluded {
        points: selected.len(),
        per_method,
        nla_minus_copy,
    })
}

/// A post-processor and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PostProcessor {
    Copy,
    Nla(NlaParams),
    Knn(KnnParams),
}

impl PostProcessor {
    pub fn method(&self) -> Method {
        match self {
            PostProcessor::Copy => Method::Copy,
            PostProcessor::Nla(_) => Method::Nla,
            PostProcessor::Knn(_) => Method::Knn,
        }
    }

    /// Parameter summary, e.g. `kernel=5` or `kernel=5;k=5;cutoff=1;sigma=1`.
    pub fn params(&self) -> String {
        match self {
            PostProcessor::Copy => String::new(),
            PostProcessor::Nla(p) => format!("kernel={}", p.kernel),
            PostProcessor::Knn(p) => format!(
                "kernel={};k={};cutoff={};sigma={}",
                p.kernel, p.k, p.cutoff, p.sigma
            ),
        }
    }

    pub fn run(
        &self,
        img: &crate::projection::RangeImage,
        labels: &LabelImage,
        proj: &PointProjection,
    ) -> Result<Vec<u16>> {
        match self {
            PostProcessor::Copy => copy_pixel_label(img, labels, proj),
            PostProcessor::Nla(p) => nla(img, labels, proj, p),
            PostProcessor::Knn(p) => knn_postprocess(img, labels, proj, p),
        }
    }
}

/// Wall-clock spread of one stage, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTiming {
    pub median_ms: f64,
    pub p10_ms: f64,
    pub p90_ms: f64,
}

impl StageTiming {
    /// Panics on an empty sample.
    pub fn from_samples(samples: &[f64]) -> Self {
        assert!(!samples.is_empty());
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Self {
            median_ms: percentile(&s, 0.5),
            p10_ms: percentile(&s, 0.1),
            p90_ms: percentile(&s, 0.9),
        }
    }
}

/// Linear interpolation between order statistics of a sorted sample.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub struct BenchInput<'a> {
    pub cloud: &'a PointCloud,
    pub config: ProjectionConfig,
    /// Pixel predictions aligned with `config`.
    pub predictions: &'a LabelImage,
    /// Per-point ground truth for the mIoU column.
    pub gt: Option<&'a [u16]>,
    pub num_classes: usize,
    pub ignore: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub method: Method,
    pub params: String,
    pub points: usize,
    pub height: usize,
    pub width: usize,
    pub repetitions: usize,
    pub projection: StageTiming,
    pub postprocess: StageTiming,
    pub evaluation: Option<StageTiming>,
    pub miou: Option<f64>,
    /// Every timed repetition reproduced the warm-up's labels.
    pub deterministic: bool,
}

/// Times projection, post-processing and evaluation. One untimed warm-up run
/// precedes `repetitions` timed runs.
pub fn bench(input: &BenchInput<'_>, method: &PostProcessor, repetitions: usize) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::InvalidParam("bench needs at least one repetition".into()));
    }
    let run_eval = |labels: &[u16]| -> Result<Option<f64>> {
        input
            .gt
            .map(|gt| miou(gt, labels, input.num_classes, input.ignore))
            .transpose()
    };

    let (img, proj) = project(input.cloud, &input.config)?;
    let reference = method.run(&img, input.predictions, &proj)?;
    let miou_value = run_eval(&reference)?;

    let mut t_proj = Vec::with_capacity(repetitions);
    let mut t_post = Vec::with_capacity(repetitions);
    let mut t_eval = Vec::with_capacity(repetitions);
    let mut deterministic = true;
    for _ in 0..repetitions {
        let start = Instant::now();
        let (img, proj) = project(input.cloud, &input.config)?;
        t_proj.push(start.elapsed().as_secs_f64() * 1e3);

        let start = Instant::now();
        let labels = method.run(&img, input.predictions, &proj)?;
        t_post.push(start.elapsed().as_secs_f64() * 1e3);

        let start = Instant::now();
        let m = run_eval(&labels)?;
        t_eval.push(start.elapsed().as_secs_f64() * 1e3);

        deterministic &= labels == reference && m == miou_value;
    }

    Ok(BenchReport {
        method: method.method(),
        params: method.params(),
        points: input.cloud.len(),
        height: input.config.height,
        width: input.config.width,
        repetitions,
        projection: StageTiming::from_samples(&t_proj),
        postprocess: StageTiming::from_samples(&t_post),
        evaluation: input.gt.map(|_| StageTiming::from_samples(&t_eval)),
        miou: miou_value,
        deterministic,
    })
}
