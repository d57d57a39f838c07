//! Exact maximizers of `loss + modular` over misprediction sets.
//!
//! The consensus splitting reduces loss-augmented inference to repeatedly
//! maximizing `loss(A) + sum_{j in A} w_j` over subsets `A` of pixels, with
//! coefficients `w` produced by [`admm_modular_coefficients`]. One exact
//! solver exists per loss capability:
//!
//! * cardinality losses: sort-and-scan over top-k sets;
//! * biconvex count losses: a sweep over (false negative, false positive)
//!   count pairs with prefix-summed coefficients;
//! * pairwise-graph losses: minimum cut on the negated objective.
//!
//! All sorts break ties by ascending pixel index, and all returned sets are
//! sorted ascending, so results are deterministic.

use crate::error::{Error, Result};
use crate::maxflow::minimize_energy;
use crate::model::{EdgeSet, EnergyModel, Labeling};

/// Modular rewrite of the quadratic ADMM penalty over misprediction sets.
#[derive(Clone, Debug, PartialEq)]
pub struct ModularCoefficients {
    /// Gain of placing each pixel in the misprediction set.
    pub w: Vec<f64>,
    /// Constant dropped by the rewrite; add it back to recover the full
    /// penalty value.
    pub offset: f64,
}

/// Rewrite `-rho/2 * ||y_a - y + u||^2` as a modular function of the
/// misprediction set of `y` against `y_star`, plus a constant.
///
/// Per pixel the penalty takes one of two values depending on whether the
/// pixel is mispredicted, so the gain of mispredicting pixel `j` is
/// `w_j = -rho/2 (y_a_j + y*_j + u_j)^2 + rho/2 (y_a_j - y*_j + u_j)^2`.
pub fn admm_modular_coefficients(
    y_a: &Labeling,
    y_star: &Labeling,
    u: &[f64],
    rho: f64,
) -> Result<ModularCoefficients> {
    let p = y_star.len();
    if y_a.len() != p || u.len() != p {
        return Err(Error::DimensionMismatch {
            context: "modular coefficients",
            expected: p,
            actual: if y_a.len() != p { y_a.len() } else { u.len() },
        });
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidLossParameter(format!(
            "rho must be > 0, got {rho}"
        )));
    }
    let mut w = Vec::with_capacity(p);
    let mut offset = 0.0;
    for j in 0..p {
        let a = y_a.get(j) as f64;
        let s = y_star.get(j) as f64;
        let mispredicted = a + s + u[j];
        let correct = a - s + u[j];
        let penalty_correct = -0.5 * rho * correct * correct;
        w.push(-0.5 * rho * mispredicted * mispredicted - penalty_correct);
        offset += penalty_correct;
    }
    Ok(ModularCoefficients { w, offset })
}

/// Pixel indices sorted by coefficient descending, index ascending.
fn sorted_descending(w: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    order
}

fn check_finite(w: &[f64], context: &'static str) -> Result<()> {
    if w.iter().any(|v| !v.is_finite()) {
        Err(Error::NonFinite { context })
    } else {
        Ok(())
    }
}

/// Maximize `profile[|A|] + sum_{j in A} w_j` over subsets of `{0..p-1}`.
///
/// For any fixed size the best set keeps the largest coefficients, so a
/// single scan over the descending order — accumulating the marginal
/// `profile[k] - profile[k-1] + w_k` — visits the optimum. The empty set
/// (value `profile[0] = 0`) is a candidate, and ties prefer smaller sets, so
/// with a zero profile the result is exactly the strictly-positive pixels.
pub fn solve_symmetric_augmented(profile: &[f64], w: &[f64]) -> Result<(Vec<usize>, f64)> {
    let p = w.len();
    if profile.len() < p + 1 {
        return Err(Error::DimensionMismatch {
            context: "cardinality profile",
            expected: p + 1,
            actual: profile.len(),
        });
    }
    if profile[0] != 0.0 {
        return Err(Error::InvalidLossParameter(format!(
            "cardinality profile must start at 0, got {}",
            profile[0]
        )));
    }
    check_finite(w, "symmetric solver coefficients")?;
    check_finite(profile, "cardinality profile")?;

    let order = sorted_descending(w);
    let mut best_size = 0;
    let mut best_value = 0.0;
    let mut cumulative = 0.0;
    for k in 1..=p {
        cumulative += profile[k] - profile[k - 1] + w[order[k - 1]];
        if cumulative > best_value {
            best_value = cumulative;
            best_size = k;
        }
    }
    let mut set = order[..best_size].to_vec();
    set.sort_unstable();
    Ok((set, best_value))
}

/// Maximize `profile(e_minus, e_plus) + modular` where `w_neg` carries
/// `(pixel, coefficient)` pairs for ground-truth-positive pixels (candidate
/// false negatives) and `w_pos` for ground-truth-negative pixels (candidate
/// false positives).
///
/// The profile depends only on the two counts, so for fixed counts the best
/// members are the largest coefficients on each side; sweeping all count
/// pairs with prefix sums is exact.
pub fn solve_biconvex_augmented<P>(
    profile: P,
    w_neg: &[(usize, f64)],
    w_pos: &[(usize, f64)],
) -> Result<(Vec<usize>, f64)>
where
    P: Fn(usize, usize) -> f64,
{
    let coeffs_neg: Vec<f64> = w_neg.iter().map(|&(_, c)| c).collect();
    let coeffs_pos: Vec<f64> = w_pos.iter().map(|&(_, c)| c).collect();
    check_finite(&coeffs_neg, "biconvex solver coefficients")?;
    check_finite(&coeffs_pos, "biconvex solver coefficients")?;
    let m = w_neg.len();
    let n_pos = w_pos.len();

    let order_neg = sorted_descending(&coeffs_neg);
    let order_pos = sorted_descending(&coeffs_pos);
    let prefix = |order: &[usize], coeffs: &[f64]| {
        let mut sums = Vec::with_capacity(order.len() + 1);
        sums.push(0.0);
        for (k, &i) in order.iter().enumerate() {
            sums.push(sums[k] + coeffs[i]);
        }
        sums
    };
    let sums_neg = prefix(&order_neg, &coeffs_neg);
    let sums_pos = prefix(&order_pos, &coeffs_pos);

    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for j in 0..=m {
        let mut inner = (f64::NEG_INFINITY, 0usize);
        for k in 0..=n_pos {
            let value = profile(j, k) + sums_pos[k];
            if value > inner.0 {
                inner = (value, k);
            }
        }
        let total = inner.0 + sums_neg[j];
        if total > best.0 {
            best = (total, j, inner.1);
        }
    }

    let mut set: Vec<usize> = order_neg[..best.1]
        .iter()
        .map(|&i| w_neg[i].0)
        .chain(order_pos[..best.2].iter().map(|&i| w_pos[i].0))
        .collect();
    set.sort_unstable();
    Ok((set, best.0))
}

/// Maximize `|A| + gamma * (loss edges inside A) + sum_{j in A} w_j`.
///
/// The negated objective is a submodular energy over membership indicators
/// (unary `-1 - w_j` for joining, pairwise `-gamma` when both endpoints
/// join), solved exactly by minimum cut. The cut's tie-break keeps the set
/// minimal, so with `gamma = 0` the result is exactly `{j : 1 + w_j > 0}`.
pub fn solve_pairwise_augmented(
    gamma: f64,
    edges: &EdgeSet,
    w: &[f64],
) -> Result<(Vec<usize>, f64)> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidLossParameter(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }
    check_finite(w, "pairwise solver coefficients")?;
    let p = w.len();
    for &(k, l) in edges.edges() {
        if l >= p {
            return Err(Error::InvalidEdge { k, l, pixels: p });
        }
    }

    let unary = w.iter().map(|&wj| [0.0, -1.0 - wj]).collect();
    let table = [[0.0, 0.0], [0.0, -gamma]];
    let model = EnergyModel {
        unary,
        edges: edges.edges().to_vec(),
        pairwise: vec![table; edges.len()],
    };
    let solution = minimize_energy(&model)?;
    let set = (0..p)
        .filter(|&j| solution.labeling.get(j) == 1)
        .collect();
    Ok((set, -solution.energy))
}
