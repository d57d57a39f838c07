//! Set functions over a ground set `{0..n-1}`.
//!
//! Everything downstream (loss adapters, supermodularity checks, the
//! minimum-norm-point baseline) talks to set functions through the
//! [`SetFunction`] trait. [`SetFunctionOracle`] wraps an arbitrary closure
//! and normalizes it so the empty set evaluates to zero.

use std::cell::RefCell;
use std::collections::HashMap;

/// A real-valued set function with `f(empty) = 0`.
pub trait SetFunction {
    fn ground_set_size(&self) -> usize;

    /// Evaluate on a set given as distinct indices; order is irrelevant.
    fn evaluate(&self, set: &[usize]) -> f64;

    /// Evaluate on a bitmask encoding (bit `i` set means `i` is a member).
    /// Only valid for ground sets of at most 64 elements.
    fn evaluate_mask(&self, mask: u64) -> f64 {
        let n = self.ground_set_size();
        debug_assert!(n <= 64);
        let set: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        self.evaluate(&set)
    }
}

/// Closure-backed oracle, normalized by subtracting the raw value of the
/// empty set.
pub struct SetFunctionOracle {
    n: usize,
    offset: f64,
    eval: Box<dyn Fn(&[usize]) -> f64 + Send + Sync>,
}

impl SetFunctionOracle {
    pub fn new<F>(n: usize, eval: F) -> Self
    where
        F: Fn(&[usize]) -> f64 + Send + Sync + 'static,
    {
        let offset = eval(&[]);
        Self {
            n,
            offset,
            eval: Box::new(eval),
        }
    }

    /// Modular function `f(S) = sum of coefficients over S`.
    pub fn modular(coefficients: Vec<f64>) -> Self {
        let n = coefficients.len();
        Self::new(n, move |set| set.iter().map(|&i| coefficients[i]).sum())
    }
}

impl SetFunction for SetFunctionOracle {
    fn ground_set_size(&self) -> usize {
        self.n
    }

    fn evaluate(&self, set: &[usize]) -> f64 {
        (self.eval)(set) - self.offset
    }
}

impl std::fmt::Debug for SetFunctionOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SetFunctionOracle")
            .field("n", &self.n)
            .field("offset", &self.offset)
            .finish_non_exhaustive()
    }
}

/// Caching wrapper keyed on the bitmask encoding; requires `n <= 64`.
///
/// Off by default in timing paths so that method comparisons count real
/// oracle work; enable it in correctness tests where the same sets recur.
pub struct MemoizedOracle<F> {
    inner: F,
    cache: RefCell<HashMap<u64, f64>>,
}

impl<F: SetFunction> MemoizedOracle<F> {
    pub fn new(inner: F) -> Self {
        assert!(inner.ground_set_size() <= 64);
        Self {
            inner,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn calls_cached(&self) -> usize {
        self.cache.borrow().len()
    }
}

impl<F: SetFunction> SetFunction for MemoizedOracle<F> {
    fn ground_set_size(&self) -> usize {
        self.inner.ground_set_size()
    }

    fn evaluate(&self, set: &[usize]) -> f64 {
        let mask = set.iter().fold(0u64, |acc, &i| acc | 1 << i);
        if let Some(&v) = self.cache.borrow().get(&mask) {
            return v;
        }
        let v = self.inner.evaluate(set);
        self.cache.borrow_mut().insert(mask, v);
        v
    }

    fn evaluate_mask(&self, mask: u64) -> f64 {
        if let Some(&v) = self.cache.borrow().get(&mask) {
            return v;
        }
        let v = self.inner.evaluate_mask(mask);
        self.cache.borrow_mut().insert(mask, v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn modular_oracle_sums_coefficients() {
        let f = SetFunctionOracle::modular(vec![1.0, -2.0, 0.5]);
        assert_eq!(f.ground_set_size(), 3);
        assert_relative_eq!(f.evaluate(&[]), 0.0);
        assert_relative_eq!(f.evaluate(&[0, 2]), 1.5);
        assert_relative_eq!(f.evaluate_mask(0b011), -1.0);
    }

    #[test]
    fn normalization_subtracts_empty_value() {
        let f = SetFunctionOracle::new(2, |set| 10.0 + set.len() as f64);
        assert_relative_eq!(f.evaluate(&[]), 0.0);
        assert_relative_eq!(f.evaluate(&[1]), 1.0);
    }

    #[test]
    fn memoization_caches_by_mask() {
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&calls);
        let f = SetFunctionOracle::new(4, move |set| {
            counter.fetch_add(1, Ordering::SeqCst);
            set.len() as f64
        });
        let baseline = calls.load(Ordering::SeqCst);
        let memo = MemoizedOracle::new(f);
        assert_relative_eq!(memo.evaluate(&[1, 3]), 2.0);
        assert_relative_eq!(memo.evaluate(&[3, 1]), 2.0);
        assert_relative_eq!(memo.evaluate_mask(0b1010), 2.0);
        assert_eq!(calls.load(Ordering::SeqCst) - baseline, 1);
        assert_eq!(memo.calls_cached(), 1);
    }
}
