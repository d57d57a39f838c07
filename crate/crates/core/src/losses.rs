//! Loss functions for binary segmentation and their set-function views.
//!
//! Each loss compares a ground-truth labeling `y*` against a hypothesis and
//! can be read as a set function of the misprediction set
//! `{j : y*_j != y_j}`. The supermodular ones (adjacent-misprediction,
//! squared-cardinality, containment) admit exact augmented maximization in
//! the solvers module; intersection-over-union is evaluation-only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EdgeSet, GridShape, Labeling};
use crate::setfn::SetFunctionOracle;

/// Which exact solver can handle a loss inside the augmented subproblem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossCapability {
    /// Decomposes per pixel; folds directly into unaries.
    Modular,
    /// Pairwise interactions over a loss edge set; solvable by graph cut.
    PairwiseGraph,
    /// Value depends only on the misprediction count, with a convex profile.
    SymmetricCardinality,
    /// Value depends on (false negatives, false positives), convex per axis.
    Biconvex,
    /// No solver; evaluation only.
    None,
}

impl LossCapability {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Modular => "modular",
            Self::PairwiseGraph => "pairwise-graph",
            Self::SymmetricCardinality => "symmetric-cardinality",
            Self::Biconvex => "biconvex",
            Self::None => "none",
        }
    }
}

/// Scale parameter of the squared-cardinality loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SquareScale {
    /// `alpha = sqrt(m)` with `m` the ground truth's foreground count.
    SqrtPositives,
    Fixed(f64),
}

/// A loss function `(y*, y) -> value >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LossFunction {
    /// Number of mispredicted pixels.
    Hamming,
    /// Mispredictions plus `gamma` per loss-edge whose endpoints are both
    /// mispredicted.
    Delta8 { gamma: f64, edges: EdgeSet },
    /// `(mispredictions / alpha)^2`.
    Square { alpha: SquareScale },
    /// Containment-flavored ratio `(e- + e+) / (m - e- + 1)`.
    BiconvexC,
    /// `1 - |intersection| / |union|` over foreground sets; not supermodular.
    IouEval,
}

impl LossFunction {
    /// Adjacent-misprediction loss over the 8-connected edges of `shape`.
    pub fn delta8_grid(gamma: f64, shape: GridShape) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::InvalidLossParameter(format!(
                "delta8 gamma must be >= 0, got {gamma}"
            )));
        }
        Ok(Self::Delta8 {
            gamma,
            edges: EdgeSet::grid_8(shape),
        })
    }

    pub fn square_default() -> Self {
        Self::Square {
            alpha: SquareScale::SqrtPositives,
        }
    }

    pub fn square_fixed(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidLossParameter(format!(
                "square alpha must be > 0, got {alpha}"
            )));
        }
        Ok(Self::Square {
            alpha: SquareScale::Fixed(alpha),
        })
    }

    pub fn capability(&self) -> LossCapability {
        match self {
            Self::Hamming => LossCapability::Modular,
            Self::Delta8 { .. } => LossCapability::PairwiseGraph,
            Self::Square { .. } => LossCapability::SymmetricCardinality,
            Self::BiconvexC => LossCapability::Biconvex,
            Self::IouEval => LossCapability::None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Hamming => "hamming",
            Self::Delta8 { .. } => "delta8",
            Self::Square { .. } => "square",
            Self::BiconvexC => "biconvex",
            Self::IouEval => "iou",
        }
    }

    fn resolve_alpha(scale: SquareScale, m: usize) -> Result<f64> {
        match scale {
            SquareScale::Fixed(alpha) => Ok(alpha),
            SquareScale::SqrtPositives => {
                if m == 0 {
                    Err(Error::DegenerateGroundTruth)
                } else {
                    Ok((m as f64).sqrt())
                }
            }
        }
    }

    /// Loss value for a prediction against the ground truth.
    pub fn evaluate(&self, y_star: &Labeling, y_tilde: &Labeling) -> Result<f64> {
        if y_star.len() != y_tilde.len() {
            return Err(Error::DimensionMismatch {
                context: "loss evaluation",
                expected: y_star.len(),
                actual: y_tilde.len(),
            });
        }
        match self {
            Self::Hamming => {
                Ok(y_star.mispredictions(y_tilde).len() as f64)
            }
            Self::Delta8 { gamma, edges } => {
                let wrong: Vec<bool> = y_star
                    .values()
                    .iter()
                    .zip(y_tilde.values())
                    .map(|(a, b)| a != b)
                    .collect();
                let singles = wrong.iter().filter(|&&w| w).count() as f64;
                let pairs = edges
                    .edges()
                    .iter()
                    .filter(|&&(k, l)| wrong[k] && wrong[l])
                    .count() as f64;
                Ok(singles + gamma * pairs)
            }
            Self::Square { alpha } => {
                let alpha = Self::resolve_alpha(*alpha, y_star.positives())?;
                let k = y_star.mispredictions(y_tilde).len() as f64;
                Ok((k / alpha) * (k / alpha))
            }
            Self::BiconvexC => {
                let counts = error_counts(y_star, y_tilde)?;
                biconvex_c_profile(counts.m, counts.e_minus, counts.e_plus)
            }
            Self::IouEval => {
                let mut intersection = 0usize;
                let mut union = 0usize;
                for (a, b) in y_star.values().iter().zip(y_tilde.values()) {
                    if *a == 1 || *b == 1 {
                        union += 1;
                        if *a == 1 && *b == 1 {
                            intersection += 1;
                        }
                    }
                }
                if union == 0 {
                    // Empty against empty is a perfect prediction.
                    Ok(0.0)
                } else {
                    Ok(1.0 - intersection as f64 / union as f64)
                }
            }
        }
    }

    /// The loss as a normalized set function of the misprediction set.
    ///
    /// Fails eagerly for losses whose parameters cannot be resolved for this
    /// ground truth (squared loss with default scale and no foreground).
    pub fn as_set_function(&self, y_star: &Labeling) -> Result<SetFunctionOracle> {
        let p = y_star.len();
        match self {
            Self::Hamming => Ok(SetFunctionOracle::new(p, |set| set.len() as f64)),
            Self::Delta8 { gamma, edges } => {
                let gamma = *gamma;
                let edges: Vec<(usize, usize)> = edges.edges().to_vec();
                Ok(SetFunctionOracle::new(p, move |set| {
                    let mut member = vec![false; p];
                    for &j in set {
                        member[j] = true;
                    }
                    let pairs = edges
                        .iter()
                        .filter(|&&(k, l)| member[k] && member[l])
                        .count();
                    set.len() as f64 + gamma * pairs as f64
                }))
            }
            Self::Square { alpha } => {
                let alpha = Self::resolve_alpha(*alpha, y_star.positives())?;
                Ok(SetFunctionOracle::new(p, move |set| {
                    let k = set.len() as f64;
                    (k / alpha) * (k / alpha)
                }))
            }
            Self::BiconvexC => {
                let positive: Vec<bool> = y_star.values().iter().map(|&v| v == 1).collect();
                let m = y_star.positives();
                Ok(SetFunctionOracle::new(p, move |set| {
                    let e_minus = set.iter().filter(|&&j| positive[j]).count();
                    set.len() as f64 / (m - e_minus + 1) as f64
                }))
            }
            Self::IouEval => {
                let loss = self.clone();
                let y_star = y_star.clone();
                Ok(SetFunctionOracle::new(p, move |set| {
                    loss.evaluate(&y_star, &y_star.flip(set))
                        .expect("evaluation on equal-length labelings is infallible")
                }))
            }
        }
    }

    /// Cardinality profile `c(k) = (k / alpha)^2`, `k = 0..=p`; only defined
    /// for the squared-cardinality loss.
    pub fn cardinality_profile(&self, m: usize, p: usize) -> Result<Vec<f64>> {
        match self {
            Self::Square { alpha } => {
                let alpha = Self::resolve_alpha(*alpha, m)?;
                Ok((0..=p)
                    .map(|k| {
                        let k = k as f64 / alpha;
                        k * k
                    })
                    .collect())
            }
            other => Err(Error::UnsupportedCapability {
                capability: other.capability().name(),
                operation: "cardinality_profile",
            }),
        }
    }
}

/// False-negative / false-positive counts of a prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    /// Ground-truth foreground pixels predicted background.
    pub e_minus: usize,
    /// Ground-truth background pixels predicted foreground.
    pub e_plus: usize,
    /// Ground-truth foreground count.
    pub m: usize,
}

pub fn error_counts(y_star: &Labeling, y_tilde: &Labeling) -> Result<ErrorCounts> {
    if y_star.len() != y_tilde.len() {
        return Err(Error::DimensionMismatch {
            context: "error counts",
            expected: y_star.len(),
            actual: y_tilde.len(),
        });
    }
    let mut counts = ErrorCounts {
        e_minus: 0,
        e_plus: 0,
        m: 0,
    };
    for (a, b) in y_star.values().iter().zip(y_tilde.values()) {
        if *a == 1 {
            counts.m += 1;
            if *b == -1 {
                counts.e_minus += 1;
            }
        } else if *b == 1 {
            counts.e_plus += 1;
        }
    }
    Ok(counts)
}

/// Containment loss as a function of error counts:
/// `(e- + e+) / (m - e- + 1)`.
pub fn biconvex_c_profile(m: usize, e_minus: usize, e_plus: usize) -> Result<f64> {
    if e_minus > m {
        return Err(Error::InvalidLossParameter(format!(
            "false negatives {e_minus} exceed foreground count {m}"
        )));
    }
    Ok((e_minus + e_plus) as f64 / (m - e_minus + 1) as f64)
}
