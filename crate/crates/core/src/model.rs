//! Grid structure, labelings, joint feature map, and energy construction.
//!
//! A labeling assigns every pixel of a grid a label in `{-1, +1}`. The model
//! scores a labeling as `<w, phi(x, y)>` where the joint feature `phi` stacks
//! a sum of per-pixel feature rows (counted for `+1` pixels) and the counts of
//! the three pairwise cases over the model edge set. The energy view negates
//! the score so that MAP inference becomes submodular energy minimization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of pairwise weight slots: both `-1`, disagree, both `+1`.
pub const PAIRWISE_CASES: usize = 3;

/// Rectangular pixel grid, row-major indexing (`index = row * width + col`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub width: usize,
    pub height: usize,
}

impl GridShape {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    /// Total pixel count `p = width * height`.
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        debug_assert!(col < self.width && row < self.height);
        row * self.width + col
    }
}

/// Binary labeling over a grid; entries are `-1` or `+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labeling {
    values: Vec<i8>,
}

impl Labeling {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if value != -1 && value != 1 {
                return Err(Error::InvalidLabel { index, value });
            }
        }
        Ok(Self { values })
    }

    /// All-background labeling (every pixel `-1`).
    pub fn all_background(pixels: usize) -> Self {
        Self {
            values: vec![-1; pixels],
        }
    }

    /// Decode pixel `i` from bit `i` of `mask` (set bit means `+1`).
    pub fn from_mask(mask: u64, pixels: usize) -> Self {
        debug_assert!(pixels <= 64);
        let values = (0..pixels)
            .map(|j| if mask >> j & 1 == 1 { 1 } else { -1 })
            .collect();
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, j: usize) -> i8 {
        self.values[j]
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Number of `+1` labels.
    pub fn positives(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    /// Copy of `self` with the labels at `set` flipped.
    pub fn flip(&self, set: &[usize]) -> Self {
        let mut values = self.values.clone();
        for &j in set {
            values[j] = -values[j];
        }
        Self { values }
    }

    /// Complement labeling (every label flipped).
    pub fn complement(&self) -> Self {
        Self {
            values: self.values.iter().map(|&v| -v).collect(),
        }
    }

    /// Indices where `self` and `other` disagree.
    pub fn mispredictions(&self, other: &Labeling) -> Vec<usize> {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter_map(|(j, (a, b))| (a != b).then_some(j))
            .collect()
    }
}

/// Grid connectivity used when constructing edge sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Undirected edge list over pixel indices, each pair stored with `k < l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSet {
    edges: Vec<(usize, usize)>,
    connectivity: Connectivity,
}

impl EdgeSet {
    pub fn new(mut edges: Vec<(usize, usize)>, connectivity: Connectivity, pixels: usize) -> Result<Self> {
        for edge in edges.iter_mut() {
            if edge.0 > edge.1 {
                *edge = (edge.1, edge.0);
            }
            if edge.0 == edge.1 || edge.1 >= pixels {
                return Err(Error::InvalidEdge {
                    k: edge.0,
                    l: edge.1,
                    pixels,
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &(k, l) in &edges {
            if !seen.insert((k, l)) {
                return Err(Error::DuplicateEdge { k, l });
            }
        }
        Ok(Self { edges, connectivity })
    }

    /// 4-connected grid edges (right and down neighbors).
    pub fn grid_4(shape: GridShape) -> Self {
        let mut edges = Vec::new();
        for row in 0..shape.height {
            for col in 0..shape.width {
                let j = shape.index(col, row);
                if col + 1 < shape.width {
                    edges.push((j, shape.index(col + 1, row)));
                }
                if row + 1 < shape.height {
                    edges.push((j, shape.index(col, row + 1)));
                }
            }
        }
        Self {
            edges,
            connectivity: Connectivity::Four,
        }
    }

    /// 8-connected grid edges (4-connected plus both diagonals).
    pub fn grid_8(shape: GridShape) -> Self {
        let mut edges = Vec::new();
        for row in 0..shape.height {
            for col in 0..shape.width {
                let j = shape.index(col, row);
                if col + 1 < shape.width {
                    edges.push((j, shape.index(col + 1, row)));
                }
                if row + 1 < shape.height {
                    edges.push((j, shape.index(col, row + 1)));
                    if col + 1 < shape.width {
                        edges.push((j, shape.index(col + 1, row + 1)));
                    }
                    if col > 0 {
                        edges.push((j, shape.index(col - 1, row + 1)));
                    }
                }
            }
        }
        Self {
            edges,
            connectivity: Connectivity::Eight,
        }
    }

    pub fn for_connectivity(shape: GridShape, connectivity: Connectivity) -> Self {
        match connectivity {
            Connectivity::Four => Self::grid_4(shape),
            Connectivity::Eight => Self::grid_8(shape),
        }
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }
}

/// Per-pixel feature rows, `pixels x channels`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnaryFeatures {
    data: Vec<f64>,
    pixels: usize,
    channels: usize,
}

impl UnaryFeatures {
    pub fn new(data: Vec<f64>, pixels: usize, channels: usize) -> Result<Self> {
        if data.len() != pixels * channels {
            return Err(Error::DimensionMismatch {
                context: "unary features",
                expected: pixels * channels,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "unary features",
            });
        }
        Ok(Self {
            data,
            pixels,
            channels,
        })
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.channels..(j + 1) * self.channels]
    }

    /// Row-major backing storage, `pixels * channels` long.
    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Model weights: one block per feature channel plus the 3 pairwise cases
/// (both `-1`, disagree, both `+1`).
///
/// The pairwise block must keep the induced energy submodular:
/// `w[both -1] + w[both +1] - 2 w[disagree] >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub unary: Vec<f64>,
    pub pairwise: [f64; PAIRWISE_CASES],
}

impl WeightVector {
    pub fn zeros(channels: usize) -> Self {
        Self {
            unary: vec![0.0; channels],
            pairwise: [0.0; PAIRWISE_CASES],
        }
    }

    pub fn new(unary: Vec<f64>, pairwise: [f64; PAIRWISE_CASES]) -> Result<Self> {
        let w = Self { unary, pairwise };
        w.validate()?;
        Ok(w)
    }

    /// Slack of the submodularity constraint; feasible iff `>= 0`.
    pub fn submodularity_margin(&self) -> f64 {
        self.pairwise[0] + self.pairwise[2] - 2.0 * self.pairwise[1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.unary.iter().any(|v| !v.is_finite())
            || self.pairwise.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite {
                context: "weight vector",
            });
        }
        let margin = self.submodularity_margin();
        if margin < -1e-9 {
            return Err(Error::NonSubmodularWeights { margin });
        }
        Ok(())
    }

    /// Clamp the disagreement weight down to the feasible boundary if the
    /// submodularity constraint is violated.
    pub fn project_submodular(&mut self) {
        let bound = 0.5 * (self.pairwise[0] + self.pairwise[2]);
        if self.pairwise[1] > bound {
            self.pairwise[1] = bound;
        }
    }

    pub fn dim(&self) -> usize {
        self.unary.len() + PAIRWISE_CASES
    }

    /// Inner product with a stacked feature vector of matching layout.
    pub fn dot(&self, phi: &[f64]) -> f64 {
        debug_assert_eq!(phi.len(), self.dim());
        let mut acc = 0.0;
        for (wi, fi) in self.unary.iter().zip(phi) {
            acc += wi * fi;
        }
        for (wi, fi) in self.pairwise.iter().zip(&phi[self.unary.len()..]) {
            acc += wi * fi;
        }
        acc
    }
}

/// Index into 2x2 tables: 0 encodes label `-1`, 1 encodes `+1`.
#[inline]
pub fn label_index(label: i8) -> usize {
    (label == 1) as usize
}

/// Which of the three pairwise cases a label pair falls into.
#[inline]
fn pairwise_case(a: i8, b: i8) -> usize {
    match (a, b) {
        (-1, -1) => 0,
        (1, 1) => 2,
        _ => 1,
    }
}

/// Dense pairwise energy over a grid: per-pixel 2-entry unary tables and a
/// 2x2 table per model edge. All tables are submodular by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyModel {
    pub unary: Vec<[f64; 2]>,
    pub edges: Vec<(usize, usize)>,
    pub pairwise: Vec<[[f64; 2]; 2]>,
}

impl EnergyModel {
    pub fn pixels(&self) -> usize {
        self.unary.len()
    }

    /// Submodularity slack of edge table `e`; feasible iff `>= 0`.
    pub fn table_margin(&self, e: usize) -> f64 {
        let t = &self.pairwise[e];
        t[0][1] + t[1][0] - t[0][0] - t[1][1]
    }

    pub fn energy(&self, y: &Labeling) -> f64 {
        debug_assert_eq!(y.len(), self.pixels());
        let mut total = 0.0;
        for (j, table) in self.unary.iter().enumerate() {
            total += table[label_index(y.get(j))];
        }
        for (e, &(k, l)) in self.edges.iter().enumerate() {
            total += self.pairwise[e][label_index(y.get(k))][label_index(y.get(l))];
        }
        total
    }
}

/// Joint feature map: summed `+1`-pixel feature rows stacked with the counts
/// of the three pairwise cases over the model edges.
pub fn joint_feature(features: &UnaryFeatures, edges: &EdgeSet, y: &Labeling) -> Result<Vec<f64>> {
    if y.len() != features.pixels() {
        return Err(Error::DimensionMismatch {
            context: "joint_feature labeling",
            expected: features.pixels(),
            actual: y.len(),
        });
    }
    let d = features.channels();
    let mut phi = vec![0.0; d + PAIRWISE_CASES];
    for j in 0..y.len() {
        if y.get(j) == 1 {
            for (slot, &f) in phi[..d].iter_mut().zip(features.row(j)) {
                *slot += f;
            }
        }
    }
    for &(k, l) in edges.edges() {
        phi[d + pairwise_case(y.get(k), y.get(l))] += 1.0;
    }
    Ok(phi)
}

/// Model score `<w, phi(x, y)>`.
pub fn score(
    w: &WeightVector,
    features: &UnaryFeatures,
    edges: &EdgeSet,
    y: &Labeling,
) -> Result<f64> {
    if w.unary.len() != features.channels() {
        return Err(Error::DimensionMismatch {
            context: "score weights",
            expected: features.channels(),
            actual: w.unary.len(),
        });
    }
    let phi = joint_feature(features, edges, y)?;
    Ok(w.dot(&phi))
}

/// Negate the score into an energy, optionally adding a per-pixel table
/// (used to fold the ADMM quadratic and modular losses into the unaries).
///
/// Minimizing the result over labelings maximizes
/// `score(w, x, y) - sum_j extra_unary[j][y_j]`.
pub fn build_energy(
    w: &WeightVector,
    features: &UnaryFeatures,
    edges: &EdgeSet,
    extra_unary: Option<&[[f64; 2]]>,
) -> Result<EnergyModel> {
    w.validate()?;
    if w.unary.len() != features.channels() {
        return Err(Error::DimensionMismatch {
            context: "build_energy weights",
            expected: features.channels(),
            actual: w.unary.len(),
        });
    }
    if let Some(extra) = extra_unary {
        if extra.len() != features.pixels() {
            return Err(Error::DimensionMismatch {
                context: "build_energy extra unary",
                expected: features.pixels(),
                actual: extra.len(),
            });
        }
    }

    let p = features.pixels();
    let mut unary = vec![[0.0; 2]; p];
    for (j, table) in unary.iter_mut().enumerate() {
        let dot: f64 = w
            .unary
            .iter()
            .zip(features.row(j))
            .map(|(wi, fi)| wi * fi)
            .sum();
        table[1] = -dot;
        if let Some(extra) = extra_unary {
            table[0] += extra[j][0];
            table[1] += extra[j][1];
        }
    }

    let table = [
        [-w.pairwise[0], -w.pairwise[1]],
        [-w.pairwise[1], -w.pairwise[2]],
    ];
    let pairwise = vec![table; edges.len()];
    Ok(EnergyModel {
        unary,
        edges: edges.edges().to_vec(),
        pairwise,
    })
}
