//! Generic submodular minimization via the minimum-norm-point algorithm.
//!
//! This is the timing baseline the specialized solvers are compared against:
//! Wolfe's algorithm finds the smallest-norm point of the base polytope,
//! whose negative support minimizes the function. It only touches the
//! function through [`SetFunction`] evaluations, so it pays the full generic
//! price — `n + 1` oracle calls per linear minimization — where the
//! specialized solvers exploit loss structure.
//!
//! The caller is responsible for passing a submodular function; violations
//! are caught separately by the property checkers on small ground sets.

use crate::error::{Error, Result};
use crate::setfn::SetFunction;

const COEFF_EPS: f64 = 1e-12;
const PIVOT_EPS: f64 = 1e-10;

/// Vertex of the base polytope reached by Edmonds' greedy algorithm along
/// `ordering`: each entry is the marginal gain of its element over the
/// preceding prefix.
pub fn greedy_vertex<F: SetFunction + ?Sized>(oracle: &F, ordering: &[usize]) -> Result<Vec<f64>> {
    let n = oracle.ground_set_size();
    if ordering.len() != n {
        return Err(Error::DimensionMismatch {
            context: "greedy ordering",
            expected: n,
            actual: ordering.len(),
        });
    }
    let mut seen = vec![false; n];
    for &i in ordering {
        if i >= n || seen[i] {
            return Err(Error::InvalidConfig(
                "greedy ordering must be a permutation of the ground set".into(),
            ));
        }
        seen[i] = true;
    }
    let mut x = vec![0.0; n];
    let mut prev = 0.0;
    for i in 1..=n {
        let value = oracle.evaluate(&ordering[..i]);
        x[ordering[i - 1]] = value - prev;
        prev = value;
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Convex combination of the active vertices.
fn combine(vertices: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    let n = vertices[0].len();
    let mut x = vec![0.0; n];
    for (vertex, &weight) in vertices.iter().zip(lambda) {
        for (xi, vi) in x.iter_mut().zip(vertex) {
            *xi += weight * vi;
        }
    }
    x
}

fn normalize(lambda: &mut [f64]) {
    let sum: f64 = lambda.iter().sum();
    if sum > 0.0 {
        for l in lambda.iter_mut() {
            *l /= sum;
        }
    }
}

/// Minimizer of `||sum mu_i v_i||` over affine weights (`sum mu_i = 1`),
/// via the normal equations with a Lagrange multiplier row. `None` when the
/// Gram system is numerically singular.
fn affine_minimizer(vertices: &[Vec<f64>]) -> Option<Vec<f64>> {
    let s = vertices.len();
    let mut a = vec![vec![0.0; s + 2]; s + 1];
    for i in 0..s {
        for j in 0..s {
            a[i][j] = 2.0 * dot(&vertices[i], &vertices[j]);
        }
        a[i][s] = 1.0;
    }
    for j in 0..s {
        a[s][j] = 1.0;
    }
    a[s][s + 1] = 1.0;

    // Gaussian elimination with partial pivoting.
    let dim = s + 1;
    for col in 0..dim {
        let pivot_row = (col..dim)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < PIVOT_EPS {
            return None;
        }
        a.swap(col, pivot_row);
        for row in col + 1..dim {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..dim + 1 {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
    }
    let mut solution = vec![0.0; dim];
    for row in (0..dim).rev() {
        let mut value = a[row][dim];
        for k in row + 1..dim {
            value -= a[row][k] * solution[k];
        }
        solution[row] = value / a[row][row];
    }
    solution.truncate(s);
    Some(solution)
}

/// Output of [`minimize`].
#[derive(Clone, Debug)]
pub struct MinNormResult {
    /// Minimizing set, sorted ascending.
    pub minimizer: Vec<usize>,
    /// Function value at `minimizer`, re-evaluated through the oracle.
    pub value: f64,
    /// The minimum-norm point of the base polytope.
    pub point: Vec<f64>,
    pub major_cycles: usize,
    /// Set when the major-cycle cap was reached before convergence; the
    /// result is then best-so-far rather than certified.
    pub hit_cap: bool,
}

/// Minimize a submodular function by Wolfe's major/minor cycle scheme on
/// the base polytope, then threshold the minimum-norm point at zero. Both
/// the strict and non-strict supports are evaluated and the better one is
/// returned.
pub fn minimize<F: SetFunction + ?Sized>(oracle: &F, tolerance: f64) -> Result<MinNormResult> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be > 0, got {tolerance}"
        )));
    }
    let n = oracle.ground_set_size();
    if n == 0 {
        return Ok(MinNormResult {
            minimizer: Vec::new(),
            value: 0.0,
            point: Vec::new(),
            major_cycles: 0,
            hit_cap: false,
        });
    }

    let identity: Vec<usize> = (0..n).collect();
    let first = greedy_vertex(oracle, &identity)?;
    let mut vertices = vec![first.clone()];
    let mut lambda = vec![1.0];
    let mut x = first;
    let cap = 10 * n * n;
    let mut major_cycles = 0;
    let mut hit_cap = false;

    loop {
        if major_cycles >= cap {
            hit_cap = true;
            break;
        }
        major_cycles += 1;

        // Linear minimization of <x, .> over the base polytope: greedy along
        // ascending x (ties by index, for determinism).
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
        let q = greedy_vertex(oracle, &order)?;
        if dot(&x, &x) - dot(&x, &q) <= tolerance {
            break;
        }
        vertices.push(q);
        lambda.push(0.0);

        // Minor cycles: move to the affine minimizer of the active set,
        // dropping vertices whose weight crosses zero. Each pass either
        // accepts or shrinks the set, so this loop is finite.
        loop {
            let Some(mu) = affine_minimizer(&vertices) else {
                vertices.pop();
                lambda.pop();
                break;
            };
            if mu.iter().all(|&m| m > -COEFF_EPS) {
                lambda = mu.iter().map(|&m| m.max(0.0)).collect();
                let mut i = 0;
                while i < vertices.len() {
                    if lambda[i] < COEFF_EPS {
                        vertices.swap_remove(i);
                        lambda.swap_remove(i);
                    } else {
                        i += 1;
                    }
                }
                normalize(&mut lambda);
                x = combine(&vertices, &lambda);
                break;
            }
            let mut theta = f64::INFINITY;
            for (&l, &m) in lambda.iter().zip(&mu) {
                if m < 0.0 {
                    theta = theta.min(l / (l - m));
                }
            }
            let theta = theta.clamp(0.0, 1.0);
            for (l, &m) in lambda.iter_mut().zip(&mu) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let mut i = 0;
            while i < vertices.len() {
                if lambda[i] < COEFF_EPS {
                    vertices.swap_remove(i);
                    lambda.swap_remove(i);
                } else {
                    i += 1;
                }
            }
            normalize(&mut lambda);
            x = combine(&vertices, &lambda);
        }
    }

    let strict: Vec<usize> = (0..n).filter(|&i| x[i] < 0.0).collect();
    let loose: Vec<usize> = (0..n).filter(|&i| x[i] <= 0.0).collect();
    let strict_value = oracle.evaluate(&strict);
    let loose_value = oracle.evaluate(&loose);
    let (minimizer, value) = if loose_value < strict_value {
        (loose, loose_value)
    } else {
        (strict, strict_value)
    };
    Ok(MinNormResult {
        minimizer,
        value,
        point: x,
        major_cycles,
        hit_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfn::{MemoizedOracle, SetFunctionOracle};
    use crate::solvers::{solve_biconvex_augmented, solve_symmetric_augmented};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn greedy_on_modular_recovers_coefficients() {
        let f = SetFunctionOracle::modular(vec![0.5, -1.0, 2.0]);
        for ordering in [[0usize, 1, 2], [2, 0, 1], [1, 2, 0]] {
            let x = greedy_vertex(&f, &ordering).unwrap();
            assert_eq!(x, vec![0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn greedy_on_coverage_function() {
        // f(S) = min(|S|, 1): the first element claims the whole value.
        let f = SetFunctionOracle::new(2, |set| set.len().min(1) as f64);
        let x = greedy_vertex(&f, &[0, 1]).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
        let x = greedy_vertex(&f, &[1, 0]).unwrap();
        assert_eq!(x, vec![0.0, 1.0]);
    }

    #[test]
    fn greedy_rejects_non_permutations() {
        let f = SetFunctionOracle::modular(vec![1.0; 3]);
        assert!(greedy_vertex(&f, &[0, 1]).is_err());
        assert!(greedy_vertex(&f, &[0, 1, 1]).is_err());
        assert!(greedy_vertex(&f, &[0, 1, 3]).is_err());
    }

    fn random_submodular(rng: &mut StdRng, n: usize) -> SetFunctionOracle {
        // Concave-of-cardinality terms plus a modular part; spec-standard
        // recipe for random submodular functions.
        let sqrt_weight = rng.gen_range(0.0..3.0);
        let log_weight = rng.gen_range(0.0..2.0);
        let modular: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        SetFunctionOracle::new(n, move |set| {
            let k = set.len() as f64;
            sqrt_weight * k.sqrt() + log_weight * (1.0 + k).ln()
                + set.iter().map(|&i| modular[i]).sum::<f64>()
        })
    }

    #[test]
    fn greedy_vertices_lie_in_base_polytope() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.gen_range(2..=8);
            let f = random_submodular(&mut rng, n);
            let mut ordering: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                ordering.swap(i, rng.gen_range(0..=i));
            }
            let x = greedy_vertex(&f, &ordering).unwrap();
            let full: Vec<usize> = (0..n).collect();
            assert_relative_eq!(
                x.iter().sum::<f64>(),
                f.evaluate(&full),
                epsilon = 1e-9
            );
            for mask in 0..(1u64 << n) {
                let set: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                let sum: f64 = set.iter().map(|&i| x[i]).sum();
                assert!(sum <= f.evaluate(&set) + 1e-9);
            }
        }
    }

    #[test]
    fn modular_minimizer_is_negative_support() {
        let f = SetFunctionOracle::modular(vec![-1.0, 2.0]);
        let result = minimize(&f, 1e-9).unwrap();
        assert_eq!(result.minimizer, vec![0]);
        assert_relative_eq!(result.value, -1.0);
        assert_relative_eq!(result.point[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(result.point[1], 2.0, epsilon = 1e-9);
        assert!(!result.hit_cap);
    }

    #[test]
    fn matches_exhaustive_minimum_on_random_functions() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..40 {
            let n = rng.gen_range(2..=10);
            let f = MemoizedOracle::new(random_submodular(&mut rng, n));
            let result = minimize(&f, 1e-9).unwrap();
            let mut best = f64::INFINITY;
            for mask in 0..(1u64 << n) {
                best = best.min(f.evaluate_mask(mask));
            }
            assert!(
                (result.value - best).abs() <= 1e-6,
                "n={n}: got {} expected {best}",
                result.value
            );
            assert!(!result.hit_cap);
        }
    }

    #[test]
    fn agrees_with_symmetric_solver_on_negated_instances() {
        let mut rng = StdRng::seed_from_u64(23);
        for trial in 0..25 {
            let n = if trial == 0 { 14 } else { rng.gen_range(2..=12) };
            let alpha = rng.gen_range(0.7..2.5);
            let profile: Vec<f64> = (0..=n)
                .map(|k| {
                    let s = k as f64 / alpha;
                    s * s
                })
                .collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (_, max_value) = solve_symmetric_augmented(&profile, &w).unwrap();

            let captured = profile.clone();
            let coeffs = w.clone();
            let f = SetFunctionOracle::new(n, move |set| {
                -(captured[set.len()] + set.iter().map(|&i| coeffs[i]).sum::<f64>())
            });
            let result = minimize(&f, 1e-9).unwrap();
            assert!(
                (result.value + max_value).abs() <= 1e-6,
                "n={n}: min {} vs negated max {}",
                result.value,
                -max_value
            );
        }
    }

    #[test]
    fn agrees_with_biconvex_solver_on_negated_instances() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..20 {
            let n = rng.gen_range(3..=12);
            let m = rng.gen_range(1..n);
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w_neg: Vec<(usize, f64)> = (0..m).map(|j| (j, w[j])).collect();
            let w_pos: Vec<(usize, f64)> = (m..n).map(|j| (j, w[j])).collect();
            let (_, max_value) = solve_biconvex_augmented(
                |e_minus, e_plus| {
                    crate::losses::biconvex_c_profile(m, e_minus, e_plus).unwrap()
                },
                &w_neg,
                &w_pos,
            )
            .unwrap();

            let coeffs = w.clone();
            let f = SetFunctionOracle::new(n, move |set| {
                let e_minus = set.iter().filter(|&&j| j < m).count();
                let e_plus = set.len() - e_minus;
                let loss =
                    crate::losses::biconvex_c_profile(m, e_minus, e_plus).unwrap();
                -(loss + set.iter().map(|&i| coeffs[i]).sum::<f64>())
            });
            let result = minimize(&f, 1e-9).unwrap();
            assert!(
                (result.value + max_value).abs() <= 1e-6,
                "n={n} m={m}: min {} vs negated max {}",
                result.value,
                -max_value
            );
        }
    }

    #[test]
    fn minimum_is_never_positive() {
        // The empty set always evaluates to zero, so the reported minimum
        // can never exceed it.
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..10 {
            let n = rng.gen_range(2..=8);
            let f = random_submodular(&mut rng, n);
            let result = minimize(&f, 1e-9).unwrap();
            assert!(result.value <= 1e-9);
        }
    }
}
