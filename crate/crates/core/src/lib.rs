//! Non-learned core of a range-image LiDAR segmentation pipeline.
//!
//! A scan is projected onto a spherical range image ([`projection`]), a
//! network (not part of this crate) labels each pixel, and [`postprocess`]
//! turns the pixel labels back into per-point labels, including points hidden
//! behind a nearer point in the same pixel. [`eval`] scores the result.
//! [`interp`] holds the interpolation math of the parameter-free decoder and
//! [`normals`] the extra input channels. [`synth`] generates labelled scenes
//! with guaranteed occlusions so all of this can be tested without a model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dump;
pub mod error;
pub mod eval;
pub mod interp;
pub mod io;
pub mod normals;
pub mod postprocess;
pub mod projection;
pub mod selftest;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{
    accumulate, bench, blur_metric, iou, miou, BenchInput, BenchReport, BlurReport, ConfusionMatrix,
    IouReport, Method, PostProcessor, StageTiming,
};
pub use interp::{
    bilinear_upsample, distance_interpolate, fid_concat, interp_discrepancy, Discrepancy, Distance,
    FeatureMap, InterpSpec, Known,
};
pub use io::{
    read_labels, read_scan, remap_labels, write_labels, write_scan, LabelSet, Point, PointCloud,
    RemapTable, IGNORE_ID, NUM_CLASSES,
};
pub use normals::{build_input_tensor, estimate_normals, ChannelStats, InputLayout, NormalMap};
pub use postprocess::{
    copy_pixel_label, knn_postprocess, nla, patch_oracle, true_3d_oracle, KnnParams, LabelImage,
    NlaParams,
};
pub use projection::{
    occlusion_stats, project, unproject_pixel, OcclusionStats, PointProjection, ProjectionConfig,
    RangeImage,
};
pub use synth::{synth_scene, SceneSpec, SyntheticScan};
