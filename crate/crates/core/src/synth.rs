//! Synthetic segmentation tasks.
//!
//! Generates grids whose foreground is a thin elongated structure (polylines,
//! bars) or compact blobs, together with unary features that correlate with
//! the ground truth: a signed-distance channel, a constant bias channel, and
//! pure noise channels. At zero noise the sign of the distance channel
//! recovers the labels exactly, so learned models have a separable regime to
//! verify against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EdgeSet, GridShape, Labeling, UnaryFeatures};
use crate::ssvm::Sample;

/// Number of unary feature channels produced per pixel.
pub const FEATURE_CHANNELS: usize = 4;

/// Signed distances are clamped to this magnitude so features stay O(1).
const DISTANCE_CLAMP: f64 = 3.0;

/// Shape family for the foreground structures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    /// Jittered one-pixel-wide paths spanning the grid.
    Polylines,
    /// Axis-aligned strips one or two pixels thick.
    Bars,
    /// Filled discs.
    Blobs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub shape: GridShape,
    pub samples: usize,
    pub structure: StructureKind,
    /// Standard deviation of the Gaussian feature noise.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("sample count must be at least 1".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise level must be finite and >= 0, got {}",
                self.noise
            )));
        }
        if self.shape.pixels() < 2 {
            return Err(Error::InvalidConfig(
                "grid must have at least 2 pixels".into(),
            ));
        }
        Ok(())
    }
}

/// Generate a deterministic dataset from the config.
pub fn generate(config: &SyntheticConfig) -> Result<Vec<Sample>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.samples)
        .map(|_| generate_one(config, &mut rng))
        .collect()
}

fn generate_one(config: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Result<Sample> {
    let shape = config.shape;
    let p = shape.pixels();
    let mut foreground = vec![false; p];
    match config.structure {
        StructureKind::Polylines => {
            for _ in 0..rng.gen_range(1..=2) {
                draw_polyline(shape, rng, &mut foreground);
            }
        }
        StructureKind::Bars => draw_bar(shape, rng, &mut foreground),
        StructureKind::Blobs => {
            for _ in 0..rng.gen_range(1..=2) {
                draw_blob(shape, rng, &mut foreground);
            }
        }
    }
    // The sample contract requires both classes to be present.
    if foreground.iter().all(|&f| !f) {
        foreground[rng.gen_range(0..p)] = true;
    }
    if foreground.iter().all(|&f| f) {
        foreground[rng.gen_range(0..p)] = false;
    }

    let values: Vec<i8> = foreground.iter().map(|&f| if f { 1 } else { -1 }).collect();
    let y_star = Labeling::new(values)?;
    let signed = signed_distance(&foreground, shape);

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let sigma = config.noise;
    let mut data = Vec::with_capacity(p * FEATURE_CHANNELS);
    for &distance in &signed {
        data.push(distance + sigma * normal.sample(rng));
        data.push(1.0);
        data.push(sigma * normal.sample(rng));
        data.push(sigma * normal.sample(rng));
    }
    let features = UnaryFeatures::new(data, p, FEATURE_CHANNELS)?;
    let edges = EdgeSet::grid_4(shape);
    Sample::new(features, shape, edges, y_star)
}

/// Jittered path across the longer grid axis, one pixel wide.
fn draw_polyline(shape: GridShape, rng: &mut ChaCha8Rng, foreground: &mut [bool]) {
    let (width, height) = (shape.width, shape.height);
    if width >= height {
        let mut row = rng.gen_range(0..height);
        for col in 0..width {
            foreground[shape.index(col, row)] = true;
            let step = rng.gen_range(-1i64..=1);
            row = (row as i64 + step).clamp(0, height as i64 - 1) as usize;
        }
    } else {
        let mut col = rng.gen_range(0..width);
        for row in 0..height {
            foreground[shape.index(col, row)] = true;
            let step = rng.gen_range(-1i64..=1);
            col = (col as i64 + step).clamp(0, width as i64 - 1) as usize;
        }
    }
}

/// Full-span axis-aligned strip, one or two pixels thick.
fn draw_bar(shape: GridShape, rng: &mut ChaCha8Rng, foreground: &mut [bool]) {
    let (width, height) = (shape.width, shape.height);
    let horizontal = rng.gen_bool(0.5);
    let extent = if horizontal { height } else { width };
    let thickness = rng.gen_range(1..=2usize.min(extent));
    let start = rng.gen_range(0..=extent - thickness);
    for offset in 0..thickness {
        let line = start + offset;
        if horizontal {
            for col in 0..width {
                foreground[shape.index(col, line)] = true;
            }
        } else {
            for row in 0..height {
                foreground[shape.index(line, row)] = true;
            }
        }
    }
}

/// Filled disc with a radius scaled to the grid.
fn draw_blob(shape: GridShape, rng: &mut ChaCha8Rng, foreground: &mut [bool]) {
    let (width, height) = (shape.width, shape.height);
    let max_radius = (width.min(height) / 3).max(1);
    let radius = rng.gen_range(1..=max_radius) as i64;
    let cx = rng.gen_range(0..width) as i64;
    let cy = rng.gen_range(0..height) as i64;
    for row in 0..height as i64 {
        for col in 0..width as i64 {
            if (col - cx) * (col - cx) + (row - cy) * (row - cy) <= radius * radius {
                foreground[shape.index(col as usize, row as usize)] = true;
            }
        }
    }
}

/// 4-connected BFS distance from every pixel to the nearest pixel where
/// `source` holds. Pixels inside the source set get distance zero.
fn bfs_distance(source: &[bool], shape: GridShape) -> Vec<usize> {
    let p = shape.pixels();
    let mut distance = vec![usize::MAX; p];
    let mut queue = std::collections::VecDeque::new();
    for (j, &s) in source.iter().enumerate() {
        if s {
            distance[j] = 0;
            queue.push_back(j);
        }
    }
    while let Some(j) = queue.pop_front() {
        let col = j % shape.width;
        let row = j / shape.width;
        let mut visit = |c: usize, r: usize| {
            let k = shape.index(c, r);
            if distance[k] == usize::MAX {
                distance[k] = distance[j] + 1;
                queue.push_back(k);
            }
        };
        if col > 0 {
            visit(col - 1, row);
        }
        if col + 1 < shape.width {
            visit(col + 1, row);
        }
        if row > 0 {
            visit(col, row - 1);
        }
        if row + 1 < shape.height {
            visit(col, row + 1);
        }
    }
    distance
}

/// Clamped signed distance: positive inside the foreground (distance to the
/// nearest background pixel), negative outside.
fn signed_distance(foreground: &[bool], shape: GridShape) -> Vec<f64> {
    let background: Vec<bool> = foreground.iter().map(|&f| !f).collect();
    let to_foreground = bfs_distance(foreground, shape);
    let to_background = bfs_distance(&background, shape);
    foreground
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let raw = if f {
                to_background[j] as f64
            } else {
                -(to_foreground[j] as f64)
            };
            raw.clamp(-DISTANCE_CLAMP, DISTANCE_CLAMP)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(structure: StructureKind, noise: f64, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            shape: GridShape::new(8, 6).unwrap(),
            samples: 5,
            structure,
            noise,
            seed,
        }
    }

    #[test]
    fn rejects_degenerate_configs() {
        let mut bad = config(StructureKind::Bars, 0.5, 0);
        bad.samples = 0;
        assert!(generate(&bad).is_err());
        let mut bad = config(StructureKind::Bars, -0.1, 0);
        bad.noise = -0.1;
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn same_seed_reproduces_identical_samples() {
        let cfg = config(StructureKind::Polylines, 0.7, 42);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.y_star, y.y_star);
            for (u, v) in x.features.data().iter().zip(y.features.data()) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate(&config(StructureKind::Blobs, 0.3, 1)).unwrap();
        let b = generate(&config(StructureKind::Blobs, 0.3, 2)).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| x.y_star != y.y_star));
    }

    #[test]
    fn noiseless_distance_channel_signs_recover_labels() {
        for structure in [
            StructureKind::Polylines,
            StructureKind::Bars,
            StructureKind::Blobs,
        ] {
            let samples = generate(&config(structure, 0.0, 7)).unwrap();
            for sample in samples {
                for j in 0..sample.shape.pixels() {
                    let channel = sample.features.row(j)[0];
                    let sign = if channel > 0.0 { 1 } else { -1 };
                    assert_eq!(sign, sample.y_star.get(j));
                }
            }
        }
    }

    #[test]
    fn bias_channel_is_constant_one() {
        let samples = generate(&config(StructureKind::Bars, 1.5, 9)).unwrap();
        for sample in &samples {
            for j in 0..sample.shape.pixels() {
                assert_eq!(sample.features.row(j)[1], 1.0);
            }
        }
    }

    #[test]
    fn every_sample_has_both_classes() {
        let mut checked = 0;
        for seed in 0..334 {
            for structure in [
                StructureKind::Polylines,
                StructureKind::Bars,
                StructureKind::Blobs,
            ] {
                let cfg = SyntheticConfig {
                    shape: GridShape::new(2 + (seed as usize % 7), 2 + (seed as usize % 5))
                        .unwrap(),
                    samples: 1,
                    structure,
                    noise: (seed % 3) as f64 * 0.5,
                    seed,
                };
                let samples = generate(&cfg).unwrap();
                for sample in samples {
                    sample.validate().unwrap();
                    let m = sample.y_star.positives();
                    assert!(m >= 1 && m < sample.shape.pixels());
                    checked += 1;
                }
            }
        }
        assert!(checked >= 1000);
    }

    #[test]
    fn signed_distance_matches_hand_example() {
        // 3x1 grid, foreground in the middle: distances are -1, +1, -1.
        let shape = GridShape::new(3, 1).unwrap();
        let distances = signed_distance(&[false, true, false], shape);
        assert_eq!(distances, vec![-1.0, 1.0, -1.0]);

        // 5x1 with foreground on the left end: background ramps away.
        let shape = GridShape::new(5, 1).unwrap();
        let distances = signed_distance(&[true, true, false, false, false], shape);
        assert_eq!(distances, vec![2.0, 1.0, -1.0, -2.0, -3.0]);
    }
}
