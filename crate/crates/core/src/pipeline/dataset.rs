//! Synthetic open-set benchmark: known classes are seeded 2-D Gaussian
//! blobs with means on a circle, unknown clusters sit at held-out angles
//! and appear only in the test split, and background points are uniform
//! over the bounding box.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::losses::ClassLayout;
use crate::numerics::{DenseMatrix, Rng};

use super::{TrainConfig, INPUT_DIM};

const DATA_STREAM: u64 = 0x64617461; // "data"

/// One split: points (N x 2) with internal labels (`0..K` known, `K`
/// unknown, `K+1` background).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitData {
    pub points: DenseMatrix,
    pub labels: Vec<usize>,
}

impl SplitData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Where the blobs were placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMeta {
    pub seed: u64,
    pub known_means: Vec<(f64, f64)>,
    pub unknown_means: Vec<(f64, f64)>,
    pub blob_std: f64,
    /// Half-width of the square the background is drawn from.
    pub background_extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub train: SplitData,
    pub test: SplitData,
    pub meta: GenerationMeta,
}

impl SyntheticDataset {
    pub fn layout(&self) -> ClassLayout {
        ClassLayout::new(self.meta.known_means.len())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<SyntheticDataset> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Fully reproducible from `cfg.seed`: known classes take the first `K`
/// angles of a `K + U` spoke layout, unknown clusters the held-out rest.
pub fn generate_dataset(cfg: &TrainConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed).derive(DATA_STREAM);
    let k = cfg.num_known;
    let spokes = k + cfg.unknown_clusters;
    let angle = |i: usize| std::f64::consts::TAU * i as f64 / spokes as f64;
    let mean = |i: usize| {
        (
            cfg.circle_radius * angle(i).cos(),
            cfg.circle_radius * angle(i).sin(),
        )
    };
    let known_means: Vec<(f64, f64)> = (0..k).map(mean).collect();
    let unknown_means: Vec<(f64, f64)> = (k..spokes)
        .map(|i| {
            let (x, y) = mean(i);
            (x * cfg.unknown_radius_factor, y * cfg.unknown_radius_factor)
        })
        .collect();
    let extent = cfg.circle_radius + 3.0 * cfg.blob_std;
    let layout = ClassLayout::new(k);

    let blob = |rng: &mut Rng, center: (f64, f64)| -> [f64; INPUT_DIM] {
        [
            rng.normal(center.0, cfg.blob_std),
            rng.normal(center.1, cfg.blob_std),
        ]
    };

    let mut train_points = Vec::new();
    let mut train_labels = Vec::new();
    for (c, &center) in known_means.iter().enumerate() {
        for _ in 0..cfg.samples_per_class {
            train_points.extend_from_slice(&blob(&mut rng, center));
            train_labels.push(c);
        }
    }
    for _ in 0..cfg.background_samples {
        train_points.push(rng.range(-extent, extent));
        train_points.push(rng.range(-extent, extent));
        train_labels.push(layout.background_index());
    }

    let mut test_points = Vec::new();
    let mut test_labels = Vec::new();
    for (c, &center) in known_means.iter().enumerate() {
        for _ in 0..cfg.test_samples_per_class {
            test_points.extend_from_slice(&blob(&mut rng, center));
            test_labels.push(c);
        }
    }
    for &center in &unknown_means {
        for _ in 0..cfg.unknown_samples_per_cluster {
            test_points.extend_from_slice(&blob(&mut rng, center));
            test_labels.push(layout.unknown_index());
        }
    }
    for _ in 0..cfg.test_background_samples {
        test_points.push(rng.range(-extent, extent));
        test_points.push(rng.range(-extent, extent));
        test_labels.push(layout.background_index());
    }

    let train = SplitData {
        points: DenseMatrix::from_vec(train_labels.len(), INPUT_DIM, train_points)?,
        labels: train_labels,
    };
    let test = SplitData {
        points: DenseMatrix::from_vec(test_labels.len(), INPUT_DIM, test_points)?,
        labels: test_labels,
    };
    Ok(SyntheticDataset {
        train,
        test,
        meta: GenerationMeta {
            seed: cfg.seed,
            known_means,
            unknown_means,
            blob_std: cfg.blob_std,
            background_extent: extent,
        },
    })
}
