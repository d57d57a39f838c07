//! Brute-force references and property checkers.
//!
//! Every fast path in this crate (graph cut, the augmented-loss solvers, the
//! ADMM splitting, the min-norm baseline) is validated against the
//! enumerations here on small instances. The checkers verify the structural
//! properties the solvers rely on: supermodularity of a loss's set-function
//! view and per-axis convexity of a count-based profile.

use crate::error::{Error, Result};
use crate::losses::LossFunction;
use crate::model::{EdgeSet, Labeling, UnaryFeatures, WeightVector};
use crate::setfn::SetFunction;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Largest pixel count accepted by the exhaustive labelings scan.
pub const MAX_BRUTE_FORCE_PIXELS: usize = 20;

const SLACK: f64 = 1e-9;

fn better(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

fn best_mask_sequential<F>(total: u64, value: F) -> (f64, u64)
where
    F: Fn(u64) -> f64,
{
    let mut best = (f64::NEG_INFINITY, u64::MAX);
    for mask in 0..total {
        best = better(best, (value(mask), mask));
    }
    best
}

/// Exhaustively find the mask maximizing `value`, breaking ties toward the
/// smallest mask so results are independent of work splitting.
fn best_mask<F>(total: u64, value: F) -> (f64, u64)
where
    F: Fn(u64) -> f64 + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..total)
            .into_par_iter()
            .map(|mask| (value(mask), mask))
            .reduce(|| (f64::NEG_INFINITY, u64::MAX), better)
    }
    #[cfg(not(feature = "parallel"))]
    {
        best_mask_sequential(total, value)
    }
}

fn check_pixels(p: usize) -> Result<()> {
    if p > MAX_BRUTE_FORCE_PIXELS {
        return Err(Error::TooLarge {
            context: "exhaustive labeling scan",
            size: p,
            limit: MAX_BRUTE_FORCE_PIXELS,
        });
    }
    Ok(())
}

fn unary_scores(w: &WeightVector, features: &UnaryFeatures) -> Vec<f64> {
    (0..features.pixels())
        .map(|j| {
            w.unary
                .iter()
                .zip(features.row(j))
                .map(|(wi, fi)| wi * fi)
                .sum()
        })
        .collect()
}

fn mask_score(mask: u64, unary: &[f64], edges: &EdgeSet, pairwise: &[f64; 3]) -> f64 {
    let mut total = 0.0;
    for (j, s) in unary.iter().enumerate() {
        if mask >> j & 1 == 1 {
            total += s;
        }
    }
    for &(k, l) in edges.edges() {
        let case = (mask >> k & 1) + (mask >> l & 1);
        total += pairwise[case as usize];
    }
    total
}

/// Exact loss-augmented maximizer `argmax_y <w, phi(x,y)> + loss(y*, y)` by
/// enumerating all labelings. Limited to small grids.
pub fn brute_force_loss_augmented(
    w: &WeightVector,
    features: &UnaryFeatures,
    edges: &EdgeSet,
    y_star: &Labeling,
    loss: &LossFunction,
) -> Result<(Labeling, f64)> {
    let p = features.pixels();
    check_pixels(p)?;
    if y_star.len() != p {
        return Err(Error::DimensionMismatch {
            context: "brute force ground truth",
            expected: p,
            actual: y_star.len(),
        });
    }
    let unary = unary_scores(w, features);
    let (value, mask) = best_mask(1 << p, |mask| {
        let y = Labeling::from_mask(mask, p);
        let delta = loss
            .evaluate(y_star, &y)
            .expect("lengths checked before the scan");
        mask_score(mask, &unary, edges, &w.pairwise) + delta
    });
    Ok((Labeling::from_mask(mask, p), value))
}

/// Single-threaded [`brute_force_loss_augmented`], compiled regardless of
/// the `parallel` feature. The bench suite uses it as the baseline when
/// measuring what the work-splitting enumeration buys.
pub fn brute_force_loss_augmented_sequential(
    w: &WeightVector,
    features: &UnaryFeatures,
    edges: &EdgeSet,
    y_star: &Labeling,
    loss: &LossFunction,
) -> Result<(Labeling, f64)> {
    let p = features.pixels();
    check_pixels(p)?;
    if y_star.len() != p {
        return Err(Error::DimensionMismatch {
            context: "brute force ground truth",
            expected: p,
            actual: y_star.len(),
        });
    }
    let unary = unary_scores(w, features);
    let (value, mask) = best_mask_sequential(1 << p, |mask| {
        let y = Labeling::from_mask(mask, p);
        let delta = loss
            .evaluate(y_star, &y)
            .expect("lengths checked before the scan");
        mask_score(mask, &unary, edges, &w.pairwise) + delta
    });
    Ok((Labeling::from_mask(mask, p), value))
}

/// Exact MAP maximizer `argmax_y <w, phi(x,y)>` by enumeration; the pure
/// inference cross-check for the graph-cut path.
pub fn brute_force_map(
    w: &WeightVector,
    features: &UnaryFeatures,
    edges: &EdgeSet,
) -> Result<(Labeling, f64)> {
    let p = features.pixels();
    check_pixels(p)?;
    let unary = unary_scores(w, features);
    let (value, mask) = best_mask(1 << p, |mask| mask_score(mask, &unary, edges, &w.pairwise));
    Ok((Labeling::from_mask(mask, p), value))
}

/// Exact maximizer of `f(A) + sum_{j in A} w_j` over all subsets; the
/// reference for the augmented-loss solvers.
pub fn brute_force_augmented_subset<F: SetFunction + ?Sized>(
    f: &F,
    w: &[f64],
) -> Result<(Vec<usize>, f64)> {
    let n = f.ground_set_size();
    check_pixels(n)?;
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            context: "augmented subset coefficients",
            expected: n,
            actual: w.len(),
        });
    }
    let mut best = (f64::NEG_INFINITY, u64::MAX);
    for mask in 0..(1u64 << n) {
        let modular: f64 = (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| w[j]).sum();
        let value = f.evaluate_mask(mask) + modular;
        if value > best.0 || (value == best.0 && mask < best.1) {
            best = (value, mask);
        }
    }
    let set = (0..n).filter(|&j| best.1 >> j & 1 == 1).collect();
    Ok((set, best.0))
}

/// Axis of a count-based profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    FalseNegative,
    FalsePositive,
}

/// One failed inequality found by a checker.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// `f(A + v) - f(A) > f(B + v) - f(B)` for some `A subset B`, `v not in B`
    /// (masks encode the sets).
    Supermodular {
        a: u64,
        b: u64,
        v: usize,
        lhs: f64,
        rhs: f64,
    },
    /// Negative second finite difference of a profile along one axis.
    Biconvex {
        e_minus: usize,
        e_plus: usize,
        axis: Axis,
        second_difference: f64,
    },
}

/// Outcome of a property check; empty means the property held everywhere
/// tested.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
    /// Number of inequality instances examined.
    pub checked: usize,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check increasing marginal gains: `f(A + v) - f(A) <= f(B + v) - f(B)` for
/// all `A subset B`, `v not in B`. Exhaustive up to `n = 10`; beyond that,
/// 10,000 seeded random triples.
pub fn check_supermodular<F: SetFunction + ?Sized>(f: &F) -> ViolationReport {
    let n = f.ground_set_size();
    let mut report = ViolationReport::default();
    if n <= 10 {
        let values: Vec<f64> = (0..1u64 << n).map(|mask| f.evaluate_mask(mask)).collect();
        for b in 0..(1u64 << n) {
            for v in 0..n {
                if b >> v & 1 == 1 {
                    continue;
                }
                let bit = 1u64 << v;
                let rhs = values[(b | bit) as usize] - values[b as usize];
                // Enumerate submasks of b, including b itself and the empty set.
                let mut a = b;
                loop {
                    let lhs = values[(a | bit) as usize] - values[a as usize];
                    report.checked += 1;
                    if lhs > rhs + SLACK {
                        report.violations.push(Violation::Supermodular {
                            a,
                            b,
                            v,
                            lhs,
                            rhs,
                        });
                    }
                    if a == 0 {
                        break;
                    }
                    a = (a - 1) & b;
                }
            }
        }
    } else {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(0x5EED_CAFE);
        let mask_bits = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        for _ in 0..10_000 {
            let b: u64 = rng.gen::<u64>() & mask_bits;
            if b == mask_bits {
                continue;
            }
            let a = rng.gen::<u64>() & b;
            let outside: Vec<usize> = (0..n).filter(|&v| b >> v & 1 == 0).collect();
            let v = outside[rng.gen_range(0..outside.len())];
            let bit = 1u64 << v;
            let lhs = f.evaluate_mask(a | bit) - f.evaluate_mask(a);
            let rhs = f.evaluate_mask(b | bit) - f.evaluate_mask(b);
            report.checked += 1;
            if lhs > rhs + SLACK {
                report.violations.push(Violation::Supermodular {
                    a,
                    b,
                    v,
                    lhs,
                    rhs,
                });
            }
        }
    }
    report
}

/// Check convexity of `profile(e_minus, e_plus)` separately along each axis
/// over the integer grid `[0, m] x [0, p - m]`.
pub fn check_biconvex<P>(profile: P, m: usize, p: usize) -> ViolationReport
where
    P: Fn(usize, usize) -> f64,
{
    let mut report = ViolationReport::default();
    let max_plus = p - m;
    for e_plus in 0..=max_plus {
        for e_minus in 1..m {
            let second = profile(e_minus + 1, e_plus) - 2.0 * profile(e_minus, e_plus)
                + profile(e_minus - 1, e_plus);
            report.checked += 1;
            if second < -SLACK {
                report.violations.push(Violation::Biconvex {
                    e_minus,
                    e_plus,
                    axis: Axis::FalseNegative,
                    second_difference: second,
                });
            }
        }
    }
    for e_minus in 0..=m {
        for e_plus in 1..max_plus {
            let second = profile(e_minus, e_plus + 1) - 2.0 * profile(e_minus, e_plus)
                + profile(e_minus, e_plus - 1);
            report.checked += 1;
            if second < -SLACK {
                report.violations.push(Violation::Biconvex {
                    e_minus,
                    e_plus,
                    axis: Axis::FalsePositive,
                    second_difference: second,
                });
            }
        }
    }
    report
}
