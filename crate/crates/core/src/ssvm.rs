//! Max-margin training with cutting planes.
//!
//! The trainer solves the margin-rescaled structured SVM: minimize
//! `1/2 ||w||^2 + C sum_i xi_i` subject to, for every sample and labeling,
//! `<w, phi(x_i, y*_i) - phi(x_i, y)> >= loss(y*_i, y) - xi_i`. The
//! exponential constraint family is approximated by a working set grown one
//! most-violated labeling per sample per round, found by the splitting in
//! [`crate::admm`]. The restricted QP is solved in its dual by coordinate
//! ascent over the per-sample simplex boxes, and after every solve the
//! pairwise block of `w` is projected back onto the submodular cone so
//! inference stays a valid graph cut.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::admm::{loss_augmented_inference, ADMMParams};
use crate::error::{Error, Result};
use crate::losses::LossFunction;
use crate::maxflow::map_predict;
use crate::model::{
    joint_feature, EdgeSet, GridShape, Labeling, UnaryFeatures, WeightVector, PAIRWISE_CASES,
};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One training example.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sample {
    pub features: UnaryFeatures,
    pub shape: GridShape,
    pub edges: EdgeSet,
    pub y_star: Labeling,
}

impl Sample {
    pub fn new(
        features: UnaryFeatures,
        shape: GridShape,
        edges: EdgeSet,
        y_star: Labeling,
    ) -> Result<Self> {
        let sample = Self {
            features,
            shape,
            edges,
            y_star,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.shape.pixels();
        if self.features.pixels() != p {
            return Err(Error::DimensionMismatch {
                context: "sample features",
                expected: p,
                actual: self.features.pixels(),
            });
        }
        if self.y_star.len() != p {
            return Err(Error::DimensionMismatch {
                context: "sample ground truth",
                expected: p,
                actual: self.y_star.len(),
            });
        }
        for &(k, l) in self.edges.edges() {
            if l >= p {
                return Err(Error::InvalidEdge { k, l, pixels: p });
            }
        }
        if self.y_star.positives() == 0 {
            return Err(Error::DegenerateGroundTruth);
        }
        Ok(())
    }
}

/// Training hyper-parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Slack penalty `C`.
    pub c: f64,
    /// Violation slack for termination, relative to each sample's loss
    /// scale (the loss of the fully wrong prediction, floored at 1).
    pub eps_stop: f64,
    pub max_outer_iterations: usize,
    pub loss: LossFunction,
    pub admm: ADMMParams,
}

impl TrainConfig {
    pub fn new(loss: LossFunction) -> Self {
        Self {
            c: 1.0,
            eps_stop: 1e-3,
            max_outer_iterations: 50,
            loss,
            admm: ADMMParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidConfig(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.eps_stop > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eps_stop must be > 0, got {}",
                self.eps_stop
            )));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_outer_iterations must be at least 1".into(),
            ));
        }
        self.admm.validate()
    }
}

/// Regularization grid for cross-validation: `10^i` for `i = -2..=2`.
pub fn c_grid() -> Vec<f64> {
    (-2..=2).map(|i| 10f64.powi(i)).collect()
}

/// Diagnostics accumulated across training.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Restricted-QP dual objective after every coordinate-ascent sweep,
    /// concatenated across outer iterations. Adding planes never changes the
    /// dual value, so the whole sequence is non-decreasing.
    pub dual_objectives: Vec<f64>,
    pub outer_iterations: usize,
    pub cutting_planes: usize,
    pub converged: bool,
    /// Final margin violation per sample beyond its slack (negative means
    /// satisfied), measured with the returned weights.
    pub final_violations: Vec<f64>,
}

/// Trained model: projected weights plus the training trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Model {
    pub w: WeightVector,
    pub config: TrainConfig,
    pub trace: TrainTrace,
}

#[derive(Clone, Debug)]
struct Plane {
    psi: Vec<f64>,
    delta: f64,
    norm_sq: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(target: &mut [f64], factor: f64, source: &[f64]) {
    for (t, s) in target.iter_mut().zip(source) {
        *t += factor * s;
    }
}

fn flat_weights(w: &WeightVector) -> Vec<f64> {
    let mut flat = w.unary.clone();
    flat.extend_from_slice(&w.pairwise);
    flat
}

fn weights_from_flat(flat: &[f64], channels: usize) -> WeightVector {
    WeightVector {
        unary: flat[..channels].to_vec(),
        pairwise: [flat[channels], flat[channels + 1], flat[channels + 2]],
    }
}

fn compute_w(planes: &[Vec<Plane>], alpha: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut w = vec![0.0; dim];
    for (sample_planes, sample_alpha) in planes.iter().zip(alpha) {
        for (plane, &a) in sample_planes.iter().zip(sample_alpha) {
            if a != 0.0 {
                axpy(&mut w, a, &plane.psi);
            }
        }
    }
    w
}

fn dual_objective(planes: &[Vec<Plane>], alpha: &[Vec<f64>], w: &[f64]) -> f64 {
    let linear: f64 = planes
        .iter()
        .zip(alpha)
        .map(|(ps, al)| ps.iter().zip(al).map(|(p, &a)| p.delta * a).sum::<f64>())
        .sum();
    linear - 0.5 * dot(w, w)
}

/// Hinge slack of one sample's working set under weights `w`.
fn sample_slack(planes: &[Plane], w: &[f64]) -> f64 {
    planes
        .iter()
        .map(|p| p.delta - dot(w, &p.psi))
        .fold(0.0, f64::max)
}

fn primal_objective(planes: &[Vec<Plane>], w: &[f64], c: f64) -> f64 {
    let slacks: f64 = planes.iter().map(|ps| sample_slack(ps, w)).sum();
    0.5 * dot(w, w) + c * slacks
}

/// Coordinate ascent on the dual of the restricted QP.
///
/// Free samples (`sum alpha < C`) take exact single-coordinate steps; tight
/// samples transfer mass between their most- and least-violating planes.
/// Runs until the duality gap on the restricted problem drops under
/// `gap_tol` or the sweep budget is exhausted; returns the weight vector
/// and the per-sweep dual objectives.
fn solve_restricted_qp(
    planes: &[Vec<Plane>],
    alpha: &mut [Vec<f64>],
    c: f64,
    dim: usize,
    gap_tol: f64,
    max_sweeps: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut w = compute_w(planes, alpha, dim);
    let mut sweep_duals = Vec::new();
    for _ in 0..max_sweeps {
        for (sample_planes, sample_alpha) in planes.iter().zip(alpha.iter_mut()) {
            let used: f64 = sample_alpha.iter().sum();
            let mut budget = (c - used).max(0.0);
            for (k, plane) in sample_planes.iter().enumerate() {
                if plane.norm_sq <= 1e-12 {
                    continue;
                }
                let gradient = plane.delta - dot(&w, &plane.psi);
                let step = gradient / plane.norm_sq;
                let updated = (sample_alpha[k] + step).clamp(0.0, sample_alpha[k] + budget);
                let change = updated - sample_alpha[k];
                if change != 0.0 {
                    axpy(&mut w, change, &plane.psi);
                    sample_alpha[k] = updated;
                    budget = (budget - change).max(0.0);
                }
            }
            if budget <= 1e-12 && sample_planes.len() >= 2 {
                let mut up: Option<(f64, usize)> = None;
                let mut down: Option<(f64, usize)> = None;
                for (k, plane) in sample_planes.iter().enumerate() {
                    let gradient = plane.delta - dot(&w, &plane.psi);
                    if up.is_none_or(|(g, _)| gradient > g) {
                        up = Some((gradient, k));
                    }
                    if sample_alpha[k] > 1e-12 && down.is_none_or(|(g, _)| gradient < g) {
                        down = Some((gradient, k));
                    }
                }
                if let (Some((gu, ku)), Some((gd, kd))) = (up, down) {
                    if ku != kd && gu - gd > 1e-12 {
                        let mut direction = sample_planes[ku].psi.clone();
                        for (d, s) in direction.iter_mut().zip(&sample_planes[kd].psi) {
                            *d -= s;
                        }
                        let denom = dot(&direction, &direction);
                        if denom > 1e-12 {
                            let t = ((gu - gd) / denom).clamp(0.0, sample_alpha[kd]);
                            if t > 0.0 {
                                sample_alpha[ku] += t;
                                sample_alpha[kd] -= t;
                                axpy(&mut w, t, &direction);
                            }
                        }
                    }
                }
            }
        }
        // Refresh from scratch to keep incremental drift out of the trace.
        w = compute_w(planes, alpha, dim);
        let dual = dual_objective(planes, alpha, &w);
        sweep_duals.push(dual);
        if primal_objective(planes, &w, c) - dual <= gap_tol {
            break;
        }
    }
    (w, sweep_duals)
}

struct Candidate {
    sample: usize,
    labeling: Labeling,
    delta: f64,
    psi: Vec<f64>,
    /// Margin violation beyond the sample's current slack.
    excess: f64,
}

/// One constraint-generation pass over all samples with frozen weights.
fn generation_pass(
    samples: &[Sample],
    phi_star: &[Vec<f64>],
    working: &[Vec<Plane>],
    model_w: &WeightVector,
    config: &TrainConfig,
) -> Result<Vec<Candidate>> {
    let flat = flat_weights(model_w);
    let run_one = |(i, sample): (usize, &Sample)| -> Result<Candidate> {
        let result = loss_augmented_inference(
            model_w,
            &sample.features,
            &sample.edges,
            &sample.y_star,
            &config.loss,
            &config.admm,
        )?;
        let labeling = result.labeling;
        let delta = config.loss.evaluate(&sample.y_star, &labeling)?;
        let phi = joint_feature(&sample.features, &sample.edges, &labeling)?;
        let psi: Vec<f64> = phi_star[i].iter().zip(&phi).map(|(a, b)| a - b).collect();
        let violation = delta - dot(&flat, &psi);
        let slack = sample_slack(&working[i], &flat);
        Ok(Candidate {
            sample: i,
            labeling,
            delta,
            psi,
            excess: violation - slack,
        })
    };
    #[cfg(feature = "parallel")]
    {
        samples.par_iter().enumerate().map(run_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        samples.iter().enumerate().map(run_one).collect()
    }
}

/// Termination threshold for one sample: `eps_stop` scaled by the loss of
/// the fully wrong prediction (floored at 1).
fn violation_threshold(config: &TrainConfig, y_star: &Labeling) -> Result<f64> {
    let worst = config.loss.evaluate(y_star, &y_star.complement())?;
    Ok(config.eps_stop * worst.max(1.0))
}

/// Cutting-plane training.
pub fn train(samples: &[Sample], config: &TrainConfig) -> Result<Model> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    config.validate()?;
    let channels = samples[0].features.channels();
    for sample in samples {
        sample.validate()?;
        if sample.features.channels() != channels {
            return Err(Error::DimensionMismatch {
                context: "feature channels across samples",
                expected: channels,
                actual: sample.features.channels(),
            });
        }
    }
    let dim = channels + PAIRWISE_CASES;

    let phi_star: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| joint_feature(&s.features, &s.edges, &s.y_star))
        .collect::<Result<_>>()?;
    let thresholds: Vec<f64> = samples
        .iter()
        .map(|s| violation_threshold(config, &s.y_star))
        .collect::<Result<_>>()?;

    let n = samples.len();
    let mut working: Vec<Vec<Plane>> = vec![Vec::new(); n];
    let mut seen: Vec<HashSet<Labeling>> = vec![HashSet::new(); n];
    let mut alpha: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut model_w = WeightVector::zeros(channels);
    let mut trace = TrainTrace::default();

    for outer in 1..=config.max_outer_iterations {
        trace.outer_iterations = outer;
        let candidates = generation_pass(samples, &phi_star, &working, &model_w, config)?;
        let mut added = 0;
        for candidate in candidates {
            let i = candidate.sample;
            if candidate.excess > thresholds[i]
                && candidate.labeling != samples[i].y_star
                && !seen[i].contains(&candidate.labeling)
            {
                let norm_sq = dot(&candidate.psi, &candidate.psi);
                working[i].push(Plane {
                    psi: candidate.psi,
                    delta: candidate.delta,
                    norm_sq,
                });
                alpha[i].push(0.0);
                seen[i].insert(candidate.labeling);
                added += 1;
            }
        }
        if added == 0 {
            trace.converged = true;
            break;
        }
        let (w_qp, sweep_duals) =
            solve_restricted_qp(&working, &mut alpha, config.c, dim, 1e-6, 2000);
        trace.dual_objectives.extend(sweep_duals);
        model_w = weights_from_flat(&w_qp, channels);
        model_w.project_submodular();
    }

    // Record the violations of the final model for diagnostics and the
    // termination guarantee.
    let final_pass = generation_pass(samples, &phi_star, &working, &model_w, config)?;
    trace.final_violations = final_pass.iter().map(|c| c.excess).collect();
    trace.cutting_planes = working.iter().map(Vec::len).sum();

    Ok(Model {
        w: model_w,
        config: config.clone(),
        trace,
    })
}

/// Exact MAP prediction with a trained model.
pub fn predict(
    model: &Model,
    features: &UnaryFeatures,
    shape: GridShape,
    edges: &EdgeSet,
) -> Result<Labeling> {
    if features.pixels() != shape.pixels() {
        return Err(Error::DimensionMismatch {
            context: "prediction features",
            expected: shape.pixels(),
            actual: features.pixels(),
        });
    }
    Ok(map_predict(&model.w, features, edges)?.labeling)
}

/// Mean and standard error of a loss over samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub loss: String,
    pub mean: f64,
    pub std_error: f64,
}

pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let variance =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (variance / n as f64).sqrt())
}

/// Evaluate a model's predictions under several losses.
pub fn evaluate_model(
    model: &Model,
    samples: &[Sample],
    losses: &[LossFunction],
) -> Result<Vec<LossStats>> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let predict_one = |sample: &Sample| -> Result<Labeling> {
        predict(model, &sample.features, sample.shape, &sample.edges)
    };
    #[cfg(feature = "parallel")]
    let predictions: Vec<Labeling> = samples.par_iter().map(predict_one).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let predictions: Vec<Labeling> = samples.iter().map(predict_one).collect::<Result<_>>()?;

    losses
        .iter()
        .map(|loss| {
            let values: Vec<f64> = samples
                .iter()
                .zip(&predictions)
                .map(|(s, y)| loss.evaluate(&s.y_star, y))
                .collect::<Result<_>>()?;
            let (mean, std_error) = mean_and_std_error(&values);
            Ok(LossStats {
                loss: loss.name().to_string(),
                mean,
                std_error,
            })
        })
        .collect()
}
