//! Wall-clock benchmarking of the augmented-loss subproblem solvers.
//!
//! Each cell times one method on one problem size against a shared seeded
//! instance of the squared-cardinality subproblem: maximize
//! `profile(|A|) + sum_{j in A} w_j`. The specialized sort-and-scan solver
//! is compared with the general minimum-norm-point solver, which is capped
//! at `n = 4096` (beyond that a run takes too long to be useful). Cells run
//! sequentially so the medians are not polluted by contention; per-cell
//! repeats use a trimmed median and interquartile range.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossFunction;
use crate::minnorm::minimize;
use crate::setfn::SetFunctionOracle;
use crate::solvers::solve_symmetric_augmented;

/// Largest size the min-norm solver is asked to handle.
pub const MINNORM_SIZE_CAP: usize = 4096;

/// Minimum repeats per cell; requests below this are raised to it.
pub const MIN_REPEATS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMethod {
    /// Sort-and-scan solver for symmetric losses.
    Symmetric,
    /// General min-norm-point solver on the negated objective.
    MinNorm,
}

impl BenchMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BenchMethod::Symmetric => "sortscan",
            BenchMethod::MinNorm => "minnorm",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub n: usize,
    pub median_ms: f64,
    pub iqr_ms: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Human-readable notes for skipped cells.
    pub skipped: Vec<String>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,n,median_ms,iqr_ms\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{:.6},{:.6}\n",
                row.method, row.n, row.median_ms, row.iqr_ms
            ));
        }
        out
    }
}

/// Shared per-size instance: profile of the squared-cardinality loss and
/// seeded uniform coefficients.
struct Instance {
    profile: Vec<f64>,
    coefficients: Vec<f64>,
}

fn build_instance(n: usize, seed: u64) -> Result<Instance> {
    let m = (n / 2).max(1);
    let profile = LossFunction::square_default().cardinality_profile(m, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
    let coefficients = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok(Instance {
        profile,
        coefficients,
    })
}

fn solve_with(method: BenchMethod, instance: &Instance) -> Result<f64> {
    match method {
        BenchMethod::Symmetric => {
            let (_, value) =
                solve_symmetric_augmented(&instance.profile, &instance.coefficients)?;
            Ok(value)
        }
        BenchMethod::MinNorm => {
            let profile = instance.profile.clone();
            let coefficients = instance.coefficients.clone();
            let n = coefficients.len();
            let oracle = SetFunctionOracle::new(n, move |subset: &[usize]| {
                let gain: f64 = subset.iter().map(|&j| coefficients[j]).sum();
                -(profile[subset.len()] + gain)
            });
            let result = minimize(&oracle, 1e-6)?;
            Ok(-result.value)
        }
    }
}

fn median_and_iqr(mut samples: Vec<f64>) -> (f64, f64) {
    samples.sort_by(f64::total_cmp);
    let r = samples.len();
    let median = if r % 2 == 0 {
        (samples[r / 2 - 1] + samples[r / 2]) / 2.0
    } else {
        samples[r / 2]
    };
    let iqr = samples[(3 * r) / 4] - samples[r / 4];
    (median, iqr)
}

/// Time every `(method, size)` cell. Returns the measured rows plus notes
/// for any skipped cells. The instances are reproducible per `(seed, n)`;
/// the timings themselves are wall clock and vary run to run.
pub fn bench(
    sizes: &[usize],
    methods: &[BenchMethod],
    repeats: usize,
    seed: u64,
) -> Result<BenchReport> {
    if sizes.is_empty() || methods.is_empty() {
        return Err(Error::InvalidConfig(
            "benchmark needs at least one size and one method".into(),
        ));
    }
    let repeats = repeats.max(MIN_REPEATS);
    let mut report = BenchReport::default();
    for &n in sizes {
        if n == 0 {
            return Err(Error::InvalidConfig("benchmark size must be positive".into()));
        }
        let instance = build_instance(n, seed)?;
        for &method in methods {
            if method == BenchMethod::MinNorm && n > MINNORM_SIZE_CAP {
                report.skipped.push(format!(
                    "{} skipped at n={n}: exceeds size cap {MINNORM_SIZE_CAP}",
                    method.name()
                ));
                continue;
            }
            // One warm-up solve, then the measured repeats.
            solve_with(method, &instance)?;
            let mut times = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let started = Instant::now();
                let value = solve_with(method, &instance)?;
                times.push(started.elapsed().as_secs_f64() * 1e3);
                std::hint::black_box(value);
            }
            let (median_ms, iqr_ms) = median_and_iqr(times);
            report.rows.push(BenchRow {
                method: method.name().to_string(),
                n,
                median_ms,
                iqr_ms,
            });
        }
    }
    Ok(report)
}

/// Least-squares slope of `ln(median)` against `ln(n)`.
pub fn log_log_slope(points: &[(usize, f64)]) -> f64 {
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, t)| t.max(1e-9).ln()).collect();
    let mean_x = xs.iter().sum::<f64>() / k;
    let mean_y = ys.iter().sum::<f64>() / k;
    let covariance: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let variance: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    covariance / variance
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn methods_agree_on_shared_instances() {
        for n in [4, 9, 16] {
            let instance = build_instance(n, 11).unwrap();
            let fast = solve_with(BenchMethod::Symmetric, &instance).unwrap();
            let general = solve_with(BenchMethod::MinNorm, &instance).unwrap();
            assert_relative_eq!(fast, general, epsilon = 1e-6);
        }
    }

    #[test]
    fn report_covers_all_feasible_cells() {
        let report = bench(
            &[8, 16],
            &[BenchMethod::Symmetric, BenchMethod::MinNorm],
            1,
            5,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 4);
        assert!(report.skipped.is_empty());
        for row in &report.rows {
            assert!(row.median_ms >= 0.0);
            assert!(row.iqr_ms >= 0.0);
        }
    }

    #[test]
    fn oversized_minnorm_cells_are_skipped_with_a_note() {
        let report = bench(
            &[8, MINNORM_SIZE_CAP + 1],
            &[BenchMethod::Symmetric, BenchMethod::MinNorm],
            1,
            5,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.skipped.len(), 1);
        assert!(report.skipped[0].contains("minnorm"));
        assert!(report.skipped[0].contains("4097"));
    }

    #[test]
    fn csv_schema_is_fixed() {
        let report = bench(&[8], &[BenchMethod::Symmetric], 1, 5).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("method,n,median_ms,iqr_ms"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("sortscan,8,"));
        assert_eq!(row.split(',').count(), 4);
    }

    #[test]
    fn slope_recovers_known_exponent() {
        // t = n^2 exactly: slope must be 2.
        let points: Vec<(usize, f64)> = [16usize, 64, 256]
            .iter()
            .map(|&n| (n, (n * n) as f64))
            .collect();
        assert_relative_eq!(log_log_slope(&points), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_empty_requests() {
        assert!(bench(&[], &[BenchMethod::Symmetric], 1, 0).is_err());
        assert!(bench(&[8], &[], 1, 0).is_err());
        assert!(bench(&[0], &[BenchMethod::Symmetric], 1, 0).is_err());
    }
}
