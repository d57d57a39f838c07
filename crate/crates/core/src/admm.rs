//! Loss-augmented inference by consensus splitting.
//!
//! Cutting-plane training needs `argmax_y <w, phi(x,y)> + loss(y*, y)`. The
//! model score wants a graph cut; a supermodular loss wants its own exact
//! maximizer; together they are neither submodular nor supermodular. The
//! splitting keeps two copies of the labeling — `y_a` for the model, `y_b`
//! for the loss — couples them with a scaled dual `u`, and alternates:
//!
//! 1. `y_a`: graph-cut MAP with the quadratic penalty
//!    `rho/2 ||y_a - y_b + u||^2` folded into the unary tables (for binary
//!    labels the quadratic is a per-pixel table);
//! 2. `y_b`: exact loss maximization with the penalty rewritten as a modular
//!    function of the misprediction set;
//! 3. `u += y_a - y_b`.
//!
//! Modular losses need no splitting at all: they fold straight into the
//! unaries of a single cut, which is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{biconvex_c_profile, LossCapability, LossFunction};
use crate::maxflow::minimize_energy;
use crate::model::{build_energy, score, EdgeSet, Labeling, UnaryFeatures, WeightVector};
use crate::solvers::{
    admm_modular_coefficients, solve_biconvex_augmented, solve_pairwise_augmented,
    solve_symmetric_augmented, ModularCoefficients,
};

/// Step size and stopping tolerances of the splitting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ADMMParams {
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iterations: usize,
}

impl Default for ADMMParams {
    fn default() -> Self {
        Self {
            rho: 0.1,
            eps_abs: 1e-4,
            eps_rel: 1e-2,
            max_iterations: 200,
        }
    }
}

impl ADMMParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.eps_abs > 0.0 && self.eps_rel > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ADMM parameters must be positive: rho={}, eps_abs={}, eps_rel={}",
                self.rho, self.eps_abs, self.eps_rel
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Primal and dual residual norms after one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
}

/// Mutable state of one inference run.
#[derive(Clone, Debug)]
pub struct ADMMState {
    pub y_a: Labeling,
    pub y_b: Labeling,
    pub u: Vec<f64>,
    pub t: usize,
    pub residuals: Vec<ResidualRecord>,
}

/// Outcome of [`loss_augmented_inference`].
#[derive(Clone, Debug)]
pub struct ADMMResult {
    pub labeling: Labeling,
    /// True objective `<w, phi> + loss` re-evaluated at `labeling`.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residuals: Vec<ResidualRecord>,
    /// Primal stopping tolerance evaluated at the final iterate.
    pub primal_tolerance: f64,
    /// Dual stopping tolerance evaluated at the final iterate.
    pub dual_tolerance: f64,
}

impl ADMMResult {
    /// Residual trace as CSV with an `iteration,primal,dual` header.
    pub fn residual_csv(&self) -> String {
        let mut out = String::from("iteration,primal,dual\n");
        for r in &self.residuals {
            out.push_str(&format!("{},{},{}\n", r.iteration, r.primal, r.dual));
        }
        out
    }
}

fn labeling_norm(y: &Labeling) -> f64 {
    y.values()
        .iter()
        .map(|&v| (v as f64) * (v as f64))
        .sum::<f64>()
        .sqrt()
}

fn diff_norm(a: &Labeling, b: &Labeling) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Mixed absolute/relative tolerances for the current state, in the order
/// `(primal, dual)`.
fn tolerances(state: &ADMMState, params: &ADMMParams) -> (f64, f64) {
    let sqrt_p = (state.y_b.len() as f64).sqrt();
    let primal_tol = sqrt_p * params.eps_abs
        + params.eps_rel * labeling_norm(&state.y_a).max(labeling_norm(&state.y_b));
    let rho_u_norm =
        params.rho * state.u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dual_tol = sqrt_p * params.eps_abs + params.eps_rel * rho_u_norm;
    (primal_tol, dual_tol)
}

/// Combined residual test: the primal residual `||y_a - y_b||` and dual
/// residual `rho ||y_b_t - y_b_{t-1}||` must both fall under mixed
/// absolute/relative tolerances.
pub fn stopping_criterion(state: &ADMMState, params: &ADMMParams) -> bool {
    let Some(last) = state.residuals.last() else {
        return false;
    };
    let (primal_tol, dual_tol) = tolerances(state, params);
    last.primal <= primal_tol && last.dual <= dual_tol
}

/// Exact single-cut inference for modular losses: the per-pixel loss of the
/// wrong label subtracts from the energy of that label.
fn modular_inference(
    w: &WeightVector,
    features: &UnaryFeatures,
    edges: &EdgeSet,
    y_star: &Labeling,
    loss: &LossFunction,
    params: &ADMMParams,
) -> Result<ADMMResult> {
    let p = features.pixels();
    let mut extra = vec![[0.0; 2]; p];
    for (j, table) in extra.iter_mut().enumerate() {
        let flipped = y_star.flip(&[j]);
        let unit = loss.evaluate(y_star, &flipped)?;
        let wrong_slot = (y_star.get(j) == -1) as usize;
        table[wrong_slot] = -unit;
    }
    let energy = build_energy(w, features, edges, Some(&extra))?;
    let cut = minimize_energy(&energy)?;
    let objective =
        score(w, features, edges, &cut.labeling)? + loss.evaluate(y_star, &cut.labeling)?;
    // Both copies coincide and the dual is zero, so the tolerances are the
    // ones of a fresh state at this labeling.
    let sqrt_p = (p as f64).sqrt();
    Ok(ADMMResult {
        labeling: cut.labeling,
        objective,
        converged: true,
        iterations: 1,
        residuals: vec![ResidualRecord {
            iteration: 1,
            primal: 0.0,
            dual: 0.0,
        }],
        primal_tolerance: sqrt_p * (params.eps_abs + params.eps_rel),
        dual_tolerance: sqrt_p * params.eps_abs,
    })
}

/// Dispatch the loss copy's subproblem to the exact solver for the loss's
/// capability class.
fn solve_subproblem(
    loss: &LossFunction,
    y_star: &Labeling,
    coeffs: &ModularCoefficients,
) -> Result<(Vec<usize>, f64)> {
    match loss {
        LossFunction::Hamming => {
            let set: Vec<usize> = coeffs
                .w
                .iter()
                .enumerate()
                .filter(|&(_, &wj)| 1.0 + wj > 0.0)
                .map(|(j, _)| j)
                .collect();
            let value = set.iter().map(|&j| 1.0 + coeffs.w[j]).sum();
            Ok((set, value))
        }
        LossFunction::Delta8 { gamma, edges } => {
            solve_pairwise_augmented(*gamma, edges, &coeffs.w)
        }
        LossFunction::Square { .. } => {
            let profile = loss.cardinality_profile(y_star.positives(), y_star.len())?;
            solve_symmetric_augmented(&profile, &coeffs.w)
        }
        LossFunction::BiconvexC => {
            let m = y_star.positives();
            let mut w_neg = Vec::with_capacity(m);
            let mut w_pos = Vec::with_capacity(y_star.len() - m);
            for (j, &wj) in coeffs.w.iter().enumerate() {
                if y_star.get(j) == 1 {
                    w_neg.push((j, wj));
                } else {
                    w_pos.push((j, wj));
                }
            }
            solve_biconvex_augmented(
                |e_minus, e_plus| {
                    biconvex_c_profile(m, e_minus, e_plus)
                        .expect("false negative count cannot exceed the foreground count")
                },
                &w_neg,
                &w_pos,
            )
        }
        LossFunction::IouEval => Err(Error::UnsupportedCapability {
            capability: LossCapability::None.name(),
            operation: "loss subproblem",
        }),
    }
}

/// Approximate `argmax_y <w, phi(x,y)> + loss(y*, y)` by the splitting; the
/// returned labeling is whichever copy scores higher on the true objective,
/// taken over the whole trajectory. The splitting is a heuristic on this
/// discrete problem, so intermediate iterates can beat the consensus point;
/// keeping the incumbent costs two cheap evaluations per iteration and never
/// returns anything worse than the final pair.
pub fn loss_augmented_inference(
    w: &WeightVector,
    features: &UnaryFeatures,
    edges: &EdgeSet,
    y_star: &Labeling,
    loss: &LossFunction,
    params: &ADMMParams,
) -> Result<ADMMResult> {
    params.validate()?;
    w.validate()?;
    let p = features.pixels();
    if y_star.len() != p {
        return Err(Error::DimensionMismatch {
            context: "loss-augmented inference ground truth",
            expected: p,
            actual: y_star.len(),
        });
    }
    match loss.capability() {
        LossCapability::None => {
            return Err(Error::UnsupportedCapability {
                capability: LossCapability::None.name(),
                operation: "loss_augmented_inference",
            })
        }
        LossCapability::Modular => {
            return modular_inference(w, features, edges, y_star, loss, params)
        }
        _ => {}
    }

    let mut state = ADMMState {
        y_a: y_star.clone(),
        y_b: y_star.clone(),
        u: vec![0.0; p],
        t: 0,
        residuals: Vec::new(),
    };
    let mut converged = false;
    let mut incumbent: Option<(Labeling, f64)> = None;
    while state.t < params.max_iterations {
        state.t += 1;

        // Inference copy: fold the quadratic penalty into the unaries. With
        // binary labels the penalty is a two-entry table per pixel.
        let extra: Vec<[f64; 2]> = (0..p)
            .map(|j| {
                let target = state.y_b.get(j) as f64 - state.u[j];
                let at = |label: f64| 0.5 * params.rho * (label - target) * (label - target);
                [at(-1.0), at(1.0)]
            })
            .collect();
        let energy = build_energy(w, features, edges, Some(&extra))?;
        state.y_a = minimize_energy(&energy)?.labeling;

        // Loss copy: exact maximization against the modular rewrite.
        let coeffs = admm_modular_coefficients(&state.y_a, y_star, &state.u, params.rho)?;
        let (set, _) = solve_subproblem(loss, y_star, &coeffs)?;
        let prev_y_b = std::mem::replace(&mut state.y_b, y_star.flip(&set));

        for copy in [&state.y_a, &state.y_b] {
            let value = score(w, features, edges, copy)? + loss.evaluate(y_star, copy)?;
            // Strict comparison keeps the earliest maximizer, which keeps the
            // returned labeling independent of how long the tail iterations
            // run after the best point is found.
            if incumbent.as_ref().is_none_or(|(_, best)| value > *best) {
                incumbent = Some((copy.clone(), value));
            }
        }

        for j in 0..p {
            state.u[j] += state.y_a.get(j) as f64 - state.y_b.get(j) as f64;
        }
        let primal = diff_norm(&state.y_a, &state.y_b);
        let dual = params.rho * diff_norm(&state.y_b, &prev_y_b);
        state.residuals.push(ResidualRecord {
            iteration: state.t,
            primal,
            dual,
        });
        if stopping_criterion(&state, params) {
            converged = true;
            break;
        }
    }

    let (primal_tolerance, dual_tolerance) = tolerances(&state, params);
    let (labeling, objective) =
        incumbent.expect("max_iterations >= 1 guarantees at least one iterate");
    Ok(ADMMResult {
        labeling,
        objective,
        converged,
        iterations: state.t,
        residuals: state.residuals,
        primal_tolerance,
        dual_tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Connectivity, GridShape};
    use crate::oracle::brute_force_loss_augmented;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_instance(
        rng: &mut StdRng,
        shape: GridShape,
        scale: f64,
    ) -> (WeightVector, UnaryFeatures, EdgeSet, Labeling) {
        let p = shape.pixels();
        let features = UnaryFeatures::new(
            (0..p * 2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            p,
            2,
        )
        .unwrap();
        let mut w = WeightVector {
            unary: vec![
                rng.gen_range(-scale..scale),
                rng.gen_range(-scale..scale),
            ],
            pairwise: [
                rng.gen_range(-scale..scale),
                rng.gen_range(-scale..scale),
                rng.gen_range(-scale..scale),
            ],
        };
        w.project_submodular();
        let edges = EdgeSet::for_connectivity(shape, Connectivity::Four);
        // Ground truth with at least one foreground and one background pixel.
        let mask = rng.gen_range(1..(1u64 << p) - 1);
        let y_star = Labeling::from_mask(mask, p);
        (w, features, edges, y_star)
    }

    #[test]
    fn zero_weights_hamming_returns_complement() {
        let shape = GridShape::new(3, 3).unwrap();
        let p = shape.pixels();
        let features = UnaryFeatures::new(vec![0.0; p], p, 1).unwrap();
        let edges = EdgeSet::grid_4(shape);
        let y_star = Labeling::from_mask(0b110_010_011, p);
        let result = loss_augmented_inference(
            &WeightVector::zeros(1),
            &features,
            &edges,
            &y_star,
            &LossFunction::Hamming,
            &ADMMParams::default(),
        )
        .unwrap();
        assert_eq!(result.labeling, y_star.complement());
        assert_relative_eq!(result.objective, p as f64);
        assert!(result.converged);
        assert_eq!(result.iterations, 1);
    }

    #[test]
    fn modular_path_is_exact() {
        let mut rng = StdRng::seed_from_u64(31);
        let shape = GridShape::new(3, 3).unwrap();
        for _ in 0..30 {
            let (w, features, edges, y_star) = random_instance(&mut rng, shape, 0.6);
            let result = loss_augmented_inference(
                &w,
                &features,
                &edges,
                &y_star,
                &LossFunction::Hamming,
                &ADMMParams::default(),
            )
            .unwrap();
            let (_, best) = brute_force_loss_augmented(
                &w,
                &features,
                &edges,
                &y_star,
                &LossFunction::Hamming,
            )
            .unwrap();
            assert_relative_eq!(result.objective, best, epsilon = 1e-9);
            assert!(result.converged);
        }
    }

    fn near_optimal_fraction(loss_for: impl Fn(GridShape) -> LossFunction, seed: u64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let shape = GridShape::new(3, 3).unwrap();
        let mut exact = 0;
        let trials = 30;
        for _ in 0..trials {
            let (w, features, edges, y_star) = random_instance(&mut rng, shape, 0.5);
            let loss = loss_for(shape);
            let result = loss_augmented_inference(
                &w,
                &features,
                &edges,
                &y_star,
                &loss,
                &ADMMParams::default(),
            )
            .unwrap();
            let (_, best) =
                brute_force_loss_augmented(&w, &features, &edges, &y_star, &loss).unwrap();
            assert!(best > 0.0, "instance scale should keep the optimum positive");
            assert!(
                result.objective <= best + 1e-9,
                "splitting cannot exceed the exhaustive optimum"
            );
            assert!(
                result.objective >= 0.98 * best,
                "objective {} fell below 98% of optimum {}",
                result.objective,
                best
            );
            if (best - result.objective).abs() <= 1e-9 * best.abs().max(1.0) {
                exact += 1;
            }
            // The invariant on the result type: objective is the true
            // objective re-evaluated at the returned labeling.
            let recomputed = score(&w, &features, &edges, &result.labeling).unwrap()
                + loss.evaluate(&y_star, &result.labeling).unwrap();
            assert_relative_eq!(recomputed, result.objective, epsilon = 1e-9);
        }
        assert!(
            exact * 10 >= trials * 8,
            "only {exact}/{trials} instances were exact"
        );
    }

    #[test]
    fn delta8_splitting_is_near_optimal() {
        near_optimal_fraction(
            |shape| LossFunction::delta8_grid(0.5, shape).unwrap(),
            71,
        );
    }

    #[test]
    fn square_splitting_is_near_optimal() {
        near_optimal_fraction(|_| LossFunction::square_default(), 72);
    }

    #[test]
    fn containment_splitting_is_near_optimal() {
        near_optimal_fraction(|_| LossFunction::BiconvexC, 73);
    }

    #[test]
    fn stopping_criterion_examples() {
        let params = ADMMParams::default();
        // Agreeing copies with an unchanged loss copy stop immediately.
        let agreeing = ADMMState {
            y_a: Labeling::all_background(100),
            y_b: Labeling::all_background(100),
            u: vec![0.0; 100],
            t: 1,
            residuals: vec![ResidualRecord {
                iteration: 1,
                primal: 0.0,
                dual: 0.0,
            }],
        };
        assert!(stopping_criterion(&agreeing, &params));

        // One disagreeing pixel on p = 100: primal residual 2 exceeds
        // 10 * 1e-4 + 1e-2 * 10 = 0.101.
        let mut disagreeing = agreeing.clone();
        disagreeing.y_a = disagreeing.y_a.flip(&[17]);
        disagreeing.residuals = vec![ResidualRecord {
            iteration: 1,
            primal: 2.0,
            dual: 0.0,
        }];
        assert!(!stopping_criterion(&disagreeing, &params));

        // No recorded residuals cannot pass.
        let mut fresh = agreeing;
        fresh.residuals.clear();
        assert!(!stopping_criterion(&fresh, &params));
    }

    #[test]
    fn trace_reported_when_iteration_budget_hits() {
        let mut rng = StdRng::seed_from_u64(77);
        let shape = GridShape::new(3, 3).unwrap();
        let (w, features, edges, y_star) = random_instance(&mut rng, shape, 0.5);
        let params = ADMMParams {
            max_iterations: 2,
            ..ADMMParams::default()
        };
        let loss = LossFunction::delta8_grid(0.5, shape).unwrap();
        let result =
            loss_augmented_inference(&w, &features, &edges, &y_star, &loss, &params).unwrap();
        assert!(result.iterations <= 2);
        assert_eq!(result.residuals.len(), result.iterations);
        let csv = result.residual_csv();
        assert!(csv.starts_with("iteration,primal,dual\n"));
        assert_eq!(csv.lines().count(), 1 + result.residuals.len());
    }

    #[test]
    fn inference_is_deterministic() {
        let mut rng = StdRng::seed_from_u64(99);
        let shape = GridShape::new(4, 3).unwrap();
        let (w, features, edges, y_star) = random_instance(&mut rng, shape, 0.5);
        let loss = LossFunction::delta8_grid(0.5, shape).unwrap();
        let params = ADMMParams::default();
        let first =
            loss_augmented_inference(&w, &features, &edges, &y_star, &loss, &params).unwrap();
        let second =
            loss_augmented_inference(&w, &features, &edges, &y_star, &loss, &params).unwrap();
        assert_eq!(first.objective.to_bits(), second.objective.to_bits());
        assert_eq!(first.labeling, second.labeling);
        assert_eq!(first.iterations, second.iterations);
    }

    #[test]
    fn evaluation_only_loss_is_rejected() {
        let shape = GridShape::new(2, 2).unwrap();
        let p = shape.pixels();
        let features = UnaryFeatures::new(vec![0.0; p], p, 1).unwrap();
        let edges = EdgeSet::grid_4(shape);
        let y_star = Labeling::from_mask(0b0011, p);
        let result = loss_augmented_inference(
            &WeightVector::zeros(1),
            &features,
            &edges,
            &y_star,
            &LossFunction::IouEval,
            &ADMMParams::default(),
        );
        assert!(matches!(
            result,
            Err(Error::UnsupportedCapability { .. })
        ));
    }

    #[test]
    fn converged_runs_satisfy_stopping_inequality() {
        let mut rng = StdRng::seed_from_u64(55);
        let shape = GridShape::new(3, 3).unwrap();
        let params = ADMMParams::default();
        let mut converged_seen = 0;
        for _ in 0..20 {
            let (w, features, edges, y_star) = random_instance(&mut rng, shape, 0.5);
            let loss = LossFunction::square_default();
            let result =
                loss_augmented_inference(&w, &features, &edges, &y_star, &loss, &params)
                    .unwrap();
            if result.converged {
                converged_seen += 1;
                let last = result.residuals.last().unwrap();
                assert!(last.primal <= result.primal_tolerance);
                assert!(last.dual <= result.dual_tolerance);
            }
        }
        assert!(converged_seen > 0);
    }
}
