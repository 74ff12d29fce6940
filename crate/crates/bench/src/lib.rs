//! Shared input for the kernel benchmarks: the pole-and-wall scene at the
//! default 64 x 2048 resolution, with ground truth as pixel predictions.

use rangeseg_core::{
    project, synth_scene, FeatureMap, LabelImage, PointCloud, PointProjection, ProjectionConfig, RangeImage,
    SceneSpec, IGNORE_ID,
};

pub struct Fixture {
    pub cloud: PointCloud,
    pub config: ProjectionConfig,
    pub image: RangeImage,
    pub projection: PointProjection,
    pub predictions: LabelImage,
}

impl Fixture {
    pub fn pole_wall(seed: u64) -> Self {
        let spec = SceneSpec::pole_before_wall();
        let config = spec.sampling.projection();
        let scan = synth_scene(&spec, seed).expect("built-in scene is valid");
        let (image, projection) = project(&scan.cloud, &config).expect("scan projects");
        let predictions =
            LabelImage::from_owner_labels(&image, &scan.labels.semantic, IGNORE_ID).expect("aligned labels");
        Self {
            cloud: scan.cloud,
            config,
            image,
            projection,
            predictions,
        }
    }
}

/// Decoder-like feature pyramid: full resolution plus strides 2, 4 and 8.
pub fn pyramid(height: usize, width: usize, channels: usize) -> Vec<FeatureMap> {
    [1, 2, 4, 8]
        .iter()
        .map(|&s| {
            let (h, w) = (height / s, width / s);
            let data = (0..h * w * channels).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
            FeatureMap::from_vec(h, w, channels, data).expect("sized")
        })
        .collect()
}
