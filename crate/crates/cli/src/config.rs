use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use rangeseg_core::{KnnParams, NlaParams, PostProcessor, ProjectionConfig};

use crate::args::{Command, MethodArg, MethodArgs, ProjectionArgs};

/// Bad flag values caught after parsing. Exits like a parse error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Everything a subcommand needs, resolved and validated before any file is
/// read or written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub projection: Option<ProjectionConfig>,
    pub stats: Option<PathBuf>,
    pub remap: Option<PathBuf>,
    pub method: Option<PostProcessor>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn resolve(command: &Command) -> Result<Self, UsageError> {
        let mut cfg = RunConfig {
            projection: None,
            stats: None,
            remap: None,
            method: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: 0,
        };
        match command {
            Command::Synth(a) => {
                cfg.inputs.push(a.spec.clone());
                cfg.outputs.push(a.out.clone());
                cfg.seed = a.seed;
            }
            Command::Project(a) => {
                cfg.projection = Some(projection(&a.projection)?);
                cfg.inputs.push(a.scan.clone());
                cfg.inputs.extend(a.labels.clone());
                cfg.outputs.push(a.out.clone());
            }
            Command::Normals(a) => {
                cfg.inputs.push(with_suffix(&a.image, ".proj"));
                cfg.stats = a.stats.clone();
                cfg.inputs.extend(a.stats.clone());
                cfg.outputs.push(a.out.clone());
                cfg.outputs.extend(a.tensor.clone());
            }
            Command::Postprocess(a) => {
                cfg.method = Some(method(&a.method)?);
                cfg.inputs.push(with_suffix(&a.image, ".proj"));
                cfg.inputs.push(a.pred.clone());
                cfg.outputs.push(a.out.clone());
            }
            Command::Eval(a) => {
                if a.num_classes == 0 {
                    return Err(UsageError("--num-classes must be positive".into()));
                }
                cfg.remap = a.remap.clone();
                cfg.inputs.extend([a.gt.clone(), a.pred.clone()]);
                cfg.inputs.extend(a.remap.clone());
                cfg.inputs.extend(a.proj.clone());
                cfg.outputs.extend(a.csv.clone());
            }
            Command::OcclusionStats(a) => {
                cfg.inputs.push(a.proj.clone());
                cfg.inputs.extend(a.labels.clone());
            }
            Command::Bench(a) => {
                if a.reps == 0 {
                    return Err(UsageError("--reps must be positive".into()));
                }
                cfg.projection = Some(projection(&a.projection)?);
                cfg.method = Some(method(&a.method)?);
                cfg.inputs.extend(a.scan.clone());
                cfg.inputs.extend(a.pred.clone());
                cfg.inputs.extend(a.gt.clone());
                cfg.inputs.extend(a.spec.clone());
                cfg.outputs.extend(a.csv.clone());
                cfg.seed = a.seed;
            }
            Command::Render(a) => {
                cfg.inputs.extend(a.channel.clone());
                cfg.inputs.extend(a.labels.clone());
                cfg.inputs.extend(a.colors.clone());
                cfg.outputs.push(a.out.clone());
            }
            Command::Selftest(a) => {
                if a.scans == 0 {
                    return Err(UsageError("--scans must be positive".into()));
                }
                cfg.seed = a.seed;
            }
        }
        Ok(cfg)
    }
}

fn projection(a: &ProjectionArgs) -> Result<ProjectionConfig, UsageError> {
    ProjectionConfig::new(a.height, a.width, a.fov_up.to_radians(), a.fov_down.to_radians())
        .map_err(|e| UsageError(e.to_string()))
}

fn method(a: &MethodArgs) -> Result<PostProcessor, UsageError> {
    let p = match a.method {
        MethodArg::Copy => PostProcessor::Copy,
        MethodArg::Nla => PostProcessor::Nla(NlaParams { kernel: a.kernel }),
        MethodArg::Knn => PostProcessor::Knn(KnnParams {
            kernel: a.kernel,
            k: a.knn_k,
            cutoff: a.cutoff,
            sigma: a.sigma,
        }),
    };
    check_method(&p)?;
    Ok(p)
}

pub fn check_method(p: &PostProcessor) -> Result<(), UsageError> {
    let bad = |m: String| Err(UsageError(m));
    match p {
        PostProcessor::Copy => Ok(()),
        PostProcessor::Nla(n) if n.kernel.is_multiple_of(2) => bad(format!("--kernel {} must be odd", n.kernel)),
        PostProcessor::Nla(_) => Ok(()),
        PostProcessor::Knn(k) if k.kernel.is_multiple_of(2) => bad(format!("--kernel {} must be odd", k.kernel)),
        PostProcessor::Knn(k) if k.k == 0 => bad("--knn-k must be positive".into()),
        PostProcessor::Knn(k) if !(k.cutoff > 0.0) => bad("--cutoff must be positive".into()),
        PostProcessor::Knn(k) if !(k.sigma > 0.0) => bad("--sigma must be positive".into()),
        PostProcessor::Knn(_) => Ok(()),
    }
}

/// `prefix` with `suffix` appended to its last component.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}
