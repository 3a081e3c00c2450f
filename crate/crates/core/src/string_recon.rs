//! String trace reconstruction, used as a black box by the tree algorithms.
//!
//! [`ExhaustiveStringReconstructor`] runs the mean-based best-match search on a
//! single path over all `2^m` strings. Callers may condition their traces on a
//! minimum length (e.g. the children of a node known to have a child); the
//! expected means account for that exactly.

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rng::{rng_from_seed, splitmix64};
use crate::spider_recon::{best_match_means, empirical_mean, BestMatch, Candidates, MeanOperator};

/// One string reconstruction instance.
#[derive(Clone, Copy, Debug)]
pub struct StringProblem<'a> {
    /// Identifies the sub-problem within a larger reconstruction (a node or
    /// path index). Used for logging and for seeding fallbacks.
    pub key: usize,
    pub traces: &'a [Vec<bool>],
    /// Length of the original string.
    pub len: usize,
    pub q: f64,
    /// Every trace is known to have at least this many bits.
    pub min_trace_len: usize,
}

pub trait StringReconstructor: Sync {
    fn reconstruct(&self, problem: &StringProblem<'_>) -> Result<Vec<bool>>;
}

pub const DEFAULT_STRING_CAP: usize = 16;

#[derive(Clone, Copy, Debug)]
pub struct ExhaustiveStringReconstructor {
    pub cap: usize,
    /// Seed for the uniform fallback when no candidate is a best match.
    pub seed: u64,
    pub exec: Execution,
}

impl Default for ExhaustiveStringReconstructor {
    fn default() -> Self {
        ExhaustiveStringReconstructor { cap: DEFAULT_STRING_CAP, seed: 0, exec: Execution::default() }
    }
}

impl ExhaustiveStringReconstructor {
    pub fn with_exec(exec: Execution) -> Self {
        ExhaustiveStringReconstructor { exec, ..Self::default() }
    }

    pub fn best_match(&self, problem: &StringProblem<'_>) -> Result<BestMatch> {
        let m = problem.len;
        if m > self.cap {
            return Err(Error::StringTooLong { m, cap: self.cap });
        }
        if problem.traces.is_empty() {
            return Err(Error::NoTraces);
        }
        if let Some(t) = problem.traces.iter().find(|t| t.len() > m) {
            return Err(Error::MalformedTrace(format!("trace of length {} for a {m}-bit string", t.len())));
        }
        if m == 0 {
            return Ok(BestMatch { labels: Vec::new(), fallback: false });
        }
        if problem.q == 0.0 {
            if let Some(t) = problem.traces.iter().find(|t| t.len() == m) {
                return Ok(BestMatch { labels: t.clone(), fallback: false });
            }
        }
        let min_len = problem.min_trace_len.min(m);
        let op = MeanOperator::conditioned_string(m, problem.q, min_len)?;
        let mean = empirical_mean(problem.traces, m);
        let mut rng = rng_from_seed(splitmix64(self.seed) ^ problem.key as u64);
        let found = best_match_means(self.exec, &mean, &op, &Candidates::Exhaustive { n: m }, &mut rng);
        if found.fallback {
            log::debug!("string problem {} fell back to a random candidate", problem.key);
        }
        Ok(found)
    }
}

impl StringReconstructor for ExhaustiveStringReconstructor {
    fn reconstruct(&self, problem: &StringProblem<'_>) -> Result<Vec<bool>> {
        Ok(self.best_match(problem)?.labels)
    }
}

/// Convenience wrapper for unconditioned traces.
pub fn exhaustive_best_match_string(traces: &[Vec<bool>], m: usize, q: f64) -> Result<Vec<bool>> {
    ExhaustiveStringReconstructor::default().reconstruct(&StringProblem { key: 0, traces, len: m, q, min_trace_len: 0 })
}

/// Drops censored (`None`) traces and hands the rest to `inner`.
pub fn censored_reconstruct(
    censored: &[Option<Vec<bool>>],
    m: usize,
    q: f64,
    inner: &dyn StringReconstructor,
) -> Result<Vec<bool>> {
    let kept: Vec<Vec<bool>> = censored.iter().flatten().cloned().collect();
    if kept.is_empty() {
        return Err(Error::AllCensored);
    }
    inner.reconstruct(&StringProblem { key: 0, traces: &kept, len: m, q, min_trace_len: 0 })
}

/// Planned trace budget under censoring: `(1 + eps) / ((1 - q^m)(1 - gamma))`
/// times the uncensored budget.
pub fn censored_budget_factor(m: usize, q: f64, gamma: f64, eps: f64) -> f64 {
    (1.0 + eps) / ((1.0 - q.powi(m as i32)) * (1.0 - gamma))
}
