//! Mean-based spider reconstruction.
//!
//! For an `(n, d)`-spider the expected normalized trace is a linear function
//! of the labels. [`MeanOperator`] holds that map; [`best_match`] compares an
//! empirical trace mean against every candidate labeling with the pairwise
//! better-match rule. Also here: the generating function `A(w)` and its
//! factored form, and the large-depth and row reductions to string
//! reconstruction.

use std::cmp::Ordering;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{normalized_spider_labels, spider_paths};
use crate::error::{check_probability, Error, Result};
use crate::par::Execution;
use crate::string_recon::{StringProblem, StringReconstructor};
use crate::trees::{LabeledOrderedTree, SpiderShape, TreeShape};

/// Largest spider handled by exhaustive candidate search.
pub const MAX_EXHAUSTIVE_SPIDER: usize = 20;

/// Binomial coefficient as a float; exact for `n <= 60`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 60 {
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc * (n - i) as u128 / (i + 1) as u128;
        }
        acc as f64
    } else {
        ln_binomial(n, k).exp()
    }
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// `P(Bin(n, p) = x)`.
pub fn binomial_pmf(n: usize, x: usize, p: f64) -> f64 {
    if x > n {
        return 0.0;
    }
    binomial(n, x) * p.powi(x as i32) * (1.0 - p).powi((n - x) as i32)
}

/// `P(Bin(n, p) >= at_least)`.
pub fn binomial_tail(n: usize, p: f64, at_least: usize) -> f64 {
    (at_least..=n).map(|x| binomial_pmf(n, x, p)).sum::<f64>().min(1.0)
}

/// Per-coordinate expectations of a normalized trace.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedTraceMean(pub Vec<f64>);

impl ExpectedTraceMean {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// The linear map from labels to expected normalized trace.
///
/// Row `j`, column `l` is the probability that label `l` lands at trace
/// position `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanOperator {
    n: usize,
    coef: Vec<f64>,
}

impl MeanOperator {
    pub fn spider(shape: &SpiderShape, q: f64) -> Result<Self> {
        check_probability("q", q, false)?;
        let SpiderShape { n, d } = *shape;
        let qd = q.powi(d as i32);
        let mut coef = vec![0.0; n * n];
        for j in 0..n {
            let (sj, rj) = (j / d, j % d);
            for l in j..n {
                let (sl, rl) = (l / d, l % d);
                if rl < rj || sl < sj {
                    continue;
                }
                let within = binomial(rl, rj) * (1.0 - q).powi(rj as i32) * q.powi((rl - rj) as i32);
                let across = binomial(sl, sj) * (1.0 - qd).powi(sj as i32) * qd.powi((sl - sj) as i32);
                coef[j * n + l] = (1.0 - q) * within * across;
            }
        }
        Ok(MeanOperator { n, coef })
    }

    /// Single path of length `m`, for traces conditioned to have at least
    /// `min_len` surviving bits.
    pub fn conditioned_string(m: usize, q: f64, min_len: usize) -> Result<Self> {
        check_probability("q", q, false)?;
        if min_len > m {
            return Err(Error::Config(format!("min_len {min_len} exceeds string length {m}")));
        }
        let p_keep = 1.0 - q;
        let norm = binomial_tail(m, p_keep, min_len);
        let mut coef = vec![0.0; m * m];
        for j in 0..m {
            for l in j..m {
                let land = p_keep * binomial_pmf(l, j, p_keep);
                let rest = binomial_tail(m - 1 - l, p_keep, min_len.saturating_sub(j + 1));
                coef[j * m + l] = land * rest / norm;
            }
        }
        Ok(MeanOperator { n: m, coef })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, j: usize, l: usize) -> f64 {
        self.coef[j * self.n + l]
    }

    pub fn apply(&self, labels: &[f64]) -> ExpectedTraceMean {
        ExpectedTraceMean(
            (0..self.n)
                .map(|j| {
                    let row = &self.coef[j * self.n..(j + 1) * self.n];
                    row.iter().zip(labels).map(|(c, a)| c * a).sum()
                })
                .collect(),
        )
    }

    pub fn apply_bits(&self, bits: &[bool]) -> ExpectedTraceMean {
        let labels: Vec<f64> = bits.iter().map(|&b| b as u8 as f64).collect();
        self.apply(&labels)
    }
}

/// Expected normalized trace of a spider with real labels.
pub fn expected_trace_mean(labels: &[f64], shape: &TreeShape, q: f64) -> Result<ExpectedTraceMean> {
    let s = shape.as_spider()?;
    if labels.len() != s.n {
        return Err(Error::LabelLength { expected: s.n, got: labels.len() });
    }
    Ok(MeanOperator::spider(&s, q)?.apply(labels))
}

/// Base terms `q + (1-q)w` and `q^d + (1-q^d)w^d`.
fn bases(d: usize, q: f64, w: Complex64) -> (Complex64, Complex64) {
    let qd = q.powi(d as i32);
    (q + (1.0 - q) * w, qd + (1.0 - qd) * w.powi(d as i32))
}

/// `A(w)`, the expected trace generating function.
pub fn generating_function(labels: &[f64], shape: &SpiderShape, q: f64, w: Complex64) -> Complex64 {
    let (b1, b2) = bases(shape.d, q, w);
    let d = shape.d;
    labels
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(l, &a)| a * b1.powi((l % d) as i32) * b2.powi((l / d) as i32))
        .sum::<Complex64>()
        * (1.0 - q)
}

/// First index with a nonzero label.
pub fn first_nonzero(labels: &[f64]) -> Option<usize> {
    labels.iter().position(|&a| a != 0.0)
}

/// `A~(w)`: `A(w)` with the factor `(q^d + (1-q^d)w^d)^{floor(l*/d)}` removed.
pub fn factored_generating_function(labels: &[f64], shape: &SpiderShape, q: f64, w: Complex64) -> Result<Complex64> {
    let start = first_nonzero(labels).ok_or(Error::ZeroDifference)?;
    let d = shape.d;
    let (b1, b2) = bases(d, q, w);
    let shift = start / d;
    Ok(labels[start..]
        .iter()
        .enumerate()
        .map(|(off, &a)| {
            let l = start + off;
            a * b1.powi((l % d) as i32) * b2.powi((l / d - shift) as i32)
        })
        .sum::<Complex64>()
        * (1.0 - q))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratingFunctionEval {
    pub w: Complex64,
    pub a_value: Complex64,
    pub a_tilde: Complex64,
    pub ell_star: usize,
}

pub fn eval_generating(labels: &[f64], shape: &TreeShape, q: f64, w: Complex64) -> Result<GeneratingFunctionEval> {
    let s = shape.as_spider()?;
    if labels.len() != s.n {
        return Err(Error::LabelLength { expected: s.n, got: labels.len() });
    }
    check_probability("q", q, false)?;
    let a_tilde = factored_generating_function(labels, &s, q, w)?;
    Ok(GeneratingFunctionEval {
        w,
        a_value: generating_function(labels, &s, q, w),
        a_tilde,
        ell_star: first_nonzero(labels).expect("checked above"),
    })
}

/// Index of the largest absolute gap, smallest index on ties.
pub fn argmax_gap(e1: &[f64], e2: &[f64]) -> usize {
    let mut best = 0;
    let mut gap = f64::NEG_INFINITY;
    for (j, (a, b)) in e1.iter().zip(e2).enumerate() {
        let g = (a - b).abs();
        if g > gap {
            gap = g;
            best = j;
        }
    }
    best
}

pub fn distinguishing_index(labels1: &[bool], labels2: &[bool], shape: &TreeShape, q: f64) -> Result<usize> {
    if labels1 == labels2 {
        return Err(Error::IdenticalLabels);
    }
    let s = shape.as_spider()?;
    for l in [labels1, labels2] {
        if l.len() != s.n {
            return Err(Error::LabelLength { expected: s.n, got: l.len() });
        }
    }
    let op = MeanOperator::spider(&s, q)?;
    Ok(argmax_gap(&op.apply_bits(labels1).0, &op.apply_bits(labels2).0))
}

/// True when candidate 2 is a better match than candidate 1 for `empirical`.
pub fn is_better_match(empirical: &[f64], e1: &[f64], e2: &[f64]) -> bool {
    let j = argmax_gap(e1, e2);
    (empirical[j] - e2[j]).abs() <= (empirical[j] - e1[j]).abs()
}

/// Candidate labelings for [`best_match`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Candidates {
    /// All `2^n` labelings in lexicographic order.
    Exhaustive {
        n: usize,
    },
    List(Vec<Vec<bool>>),
}

impl Candidates {
    pub fn len(&self) -> usize {
        match self {
            Candidates::Exhaustive { n } => 1usize << n,
            Candidates::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, idx: usize) -> Vec<bool> {
        match self {
            Candidates::Exhaustive { n } => (0..*n).map(|t| idx >> (n - 1 - t) & 1 == 1).collect(),
            Candidates::List(v) => v[idx].clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BestMatch {
    pub labels: Vec<bool>,
    /// Set when no candidate beat every other and a random one was returned.
    pub fallback: bool,
}

/// Expected means of every candidate, flattened row-major.
fn candidate_means(exec: Execution, op: &MeanOperator, candidates: &Candidates) -> Vec<f64> {
    let n = op.n();
    match candidates {
        Candidates::Exhaustive { n: bits } => {
            // Means are linear in the labels: build each from the candidate
            // with its lowest set bit cleared. Bit `b` of the index is label
            // `n - 1 - b`.
            let count = 1usize << bits;
            let mut means = vec![0.0; count * n];
            for c in 1..count {
                let low = c.trailing_zeros() as usize;
                let prev = c & (c - 1);
                let l = n - 1 - low;
                let (done, rest) = means.split_at_mut(c * n);
                let src = &done[prev * n..prev * n + n];
                for (j, out) in rest[..n].iter_mut().enumerate() {
                    *out = src[j] + op.entry(j, l);
                }
            }
            means
        }
        Candidates::List(list) => exec.map(list, |c| op.apply_bits(c).0).concat(),
    }
}

/// Pairwise better-match search over `candidates`.
///
/// Returns the candidate that is a better match than every other one. When
/// several qualify the lexicographically smallest wins; when none does, a
/// candidate is drawn uniformly from `rng` and flagged as a fallback.
pub fn best_match_means<R: Rng + ?Sized>(
    exec: Execution,
    empirical: &[f64],
    op: &MeanOperator,
    candidates: &Candidates,
    rng: &mut R,
) -> BestMatch {
    let n = op.n();
    let count = candidates.len();
    assert!(count > 0, "best_match needs at least one candidate");
    let means = candidate_means(exec, op, candidates);
    let row = |c: usize| &means[c * n..(c + 1) * n];

    let scores: Vec<f64> =
        exec.map_range(count, |c| row(c).iter().zip(empirical).map(|(e, u)| (u - e) * (u - e)).sum());
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));

    // Scans rivals in score order so that losers exit early. Returns whether
    // `c` beats everyone, plus the rivals it only tied with.
    let check = |c: usize, collect_ties: bool| -> (bool, Vec<usize>) {
        let mine = row(c);
        let mut ties = Vec::new();
        for &o in &order {
            if o == c {
                continue;
            }
            let theirs = row(o);
            let j = argmax_gap(theirs, mine);
            let (me, them) = ((empirical[j] - mine[j]).abs(), (empirical[j] - theirs[j]).abs());
            if me > them {
                return (false, ties);
            }
            if collect_ties && me == them {
                ties.push(o);
            }
        }
        (true, ties)
    };

    let Some(pos) = exec.position_first(&order, |&c| check(c, false).0) else {
        let pick = rng.random_range(0..count);
        return BestMatch { labels: candidates.get(pick), fallback: true };
    };
    let winner = order[pos];
    let (_, ties) = check(winner, true);
    let mut best = candidates.get(winner);
    for o in ties {
        let labels = candidates.get(o);
        if labels < best && check(o, false).0 {
            best = labels;
        }
    }
    BestMatch { labels: best, fallback: false }
}

/// Coordinate-wise mean of equal-length vectors.
pub fn empirical_mean(vectors: &[Vec<bool>], n: usize) -> Vec<f64> {
    let mut sum = vec![0.0; n];
    for v in vectors {
        for (s, &b) in sum.iter_mut().zip(v) {
            *s += b as u8 as f64;
        }
    }
    let t = vectors.len().max(1) as f64;
    sum.iter_mut().for_each(|s| *s /= t);
    sum
}

/// Best match for normalized spider traces given as label vectors.
pub fn best_match<R: Rng + ?Sized>(
    traces: &[Vec<bool>],
    shape: &TreeShape,
    q: f64,
    candidates: &Candidates,
    rng: &mut R,
) -> Result<BestMatch> {
    let s = shape.as_spider()?;
    if traces.is_empty() {
        return Err(Error::NoTraces);
    }
    if candidates.is_empty() {
        return Err(Error::Config("no candidates".into()));
    }
    let op = MeanOperator::spider(&s, q)?;
    let mean = empirical_mean(traces, s.n);
    Ok(best_match_means(Execution::default(), &mean, &op, candidates, rng))
}

/// Exhaustive mean-based reconstruction from raw spider traces.
pub fn reconstruct_spider_meanbased<R: Rng + ?Sized>(
    exec: Execution,
    traces: &[LabeledOrderedTree],
    shape: &TreeShape,
    q: f64,
    rng: &mut R,
) -> Result<BestMatch> {
    let s = shape.as_spider()?;
    if s.n > MAX_EXHAUSTIVE_SPIDER {
        return Err(Error::ShapeUnsupported(format!("exhaustive search is capped at n = {MAX_EXHAUSTIVE_SPIDER}")));
    }
    if traces.is_empty() {
        return Err(Error::NoTraces);
    }
    let normalized = traces.iter().map(|t| normalized_spider_labels(t, &s)).collect::<Result<Vec<_>>>()?;
    let op = MeanOperator::spider(&s, q)?;
    let mean = empirical_mean(&normalized, s.n);
    Ok(best_match_means(exec, &mean, &op, &Candidates::Exhaustive { n: s.n }, rng))
}

/// `L = max(ceil((4 pi^2 n q^d / C)^(1/3)), 20)`.
pub fn choose_l(n: usize, d: usize, q: f64, c: f64) -> usize {
    let raw = (4.0 * std::f64::consts::PI.powi(2) * n as f64 * q.powi(d as i32) / c).cbrt();
    (raw.ceil() as usize).max(20)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LargeDepthOutcome {
    pub labels: Vec<bool>,
    /// Traces that kept at least one node of every path.
    pub kept: usize,
    pub keep_rate: f64,
}

/// Keeps traces that still show every path and reconstructs each path as a
/// string of length `d`.
pub fn reconstruct_spider_large_depth(
    traces: &[LabeledOrderedTree],
    shape: &TreeShape,
    q: f64,
    recon: &dyn StringReconstructor,
) -> Result<LargeDepthOutcome> {
    let s = shape.as_spider()?;
    if traces.is_empty() {
        return Err(Error::NoTraces);
    }
    if (s.d as f64) < (s.n as f64).ln() / (1.0 / q).ln() {
        log::warn!("depth {} is below log_(1/q) n; most traces will lose a path", s.d);
    }
    let mut per_path: Vec<Vec<Vec<bool>>> = vec![Vec::new(); s.paths()];
    let mut kept = 0;
    for t in traces {
        let paths = spider_paths(t)?;
        if paths.len() == s.paths() {
            kept += 1;
            for (slot, p) in per_path.iter_mut().zip(paths) {
                slot.push(p);
            }
        }
    }
    if kept == 0 {
        return Err(Error::NoCompleteTrace);
    }
    let mut labels = Vec::with_capacity(s.n);
    for (p, strings) in per_path.iter().enumerate() {
        let problem = StringProblem { key: p, traces: strings, len: s.d, q, min_trace_len: 1 };
        labels.extend(recon.reconstruct(&problem)?);
    }
    Ok(LargeDepthOutcome { labels, kept, keep_rate: kept as f64 / traces.len() as f64 })
}

/// Deletion probability seen by each row once damaged paths are dropped.
pub fn row_deletion_probability(d: usize, q: f64) -> f64 {
    1.0 - (1.0 - q).powi(d as i32)
}

/// Drops every path that lost a node and reconstructs each depth level
/// ("row") of the surviving paths as a string of length `n/d`.
pub fn reconstruct_spider_rows(
    traces: &[LabeledOrderedTree],
    shape: &TreeShape,
    q: f64,
    recon: &dyn StringReconstructor,
) -> Result<Vec<bool>> {
    let s = shape.as_spider()?;
    if traces.is_empty() {
        return Err(Error::NoTraces);
    }
    let q_row = row_deletion_probability(s.d, q);
    let mut rows: Vec<Vec<Vec<bool>>> = vec![Vec::with_capacity(traces.len()); s.d];
    for t in traces {
        let intact: Vec<Vec<bool>> = spider_paths(t)?.into_iter().filter(|p| p.len() == s.d).collect();
        for (r, row) in rows.iter_mut().enumerate() {
            row.push(intact.iter().map(|p| p[r]).collect());
        }
    }
    let mut recovered = Vec::with_capacity(s.d);
    for (r, strings) in rows.iter().enumerate() {
        let problem = StringProblem { key: r, traces: strings, len: s.paths(), q: q_row, min_trace_len: 0 };
        recovered.push(recon.reconstruct(&problem)?);
    }
    let mut labels = vec![false; s.n];
    for (r, row) in recovered.iter().enumerate() {
        for (p, &b) in row.iter().enumerate() {
            labels[p * s.d + r] = b;
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(60, 30), 118264581564861424.0);
        let approx = binomial(80, 40);
        assert!((approx / 1.0750720873810762e23 - 1.0).abs() < 1e-10);
        assert_eq!(binomial(3, 4), 0.0);
        assert!((binomial_tail(10, 0.3, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_deletion_means_are_labels() {
        let shape = TreeShape::spider(6, 2).unwrap();
        let labels = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        assert_eq!(expected_trace_mean(&labels, &shape, 0.0).unwrap().0, labels.to_vec());
    }

    #[test]
    fn string_operator_matches_spider_operator() {
        let m = 7;
        let a = MeanOperator::conditioned_string(m, 0.35, 0).unwrap();
        let b = MeanOperator::spider(&SpiderShape { n: m, d: m }, 0.35).unwrap();
        for j in 0..m {
            for l in 0..m {
                assert!((a.entry(j, l) - b.entry(j, l)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn l_choice() {
        assert_eq!(choose_l(16, 2, 0.5, 1.0), 20);
        assert_eq!(choose_l(1_000_000, 1, 0.9, 1.0), 329);
        assert_eq!(choose_l(10, 3, 0.0, 1.0), 20);
    }

    #[test]
    fn exhaustive_candidates_are_lexicographic() {
        let c = Candidates::Exhaustive { n: 3 };
        assert_eq!(c.get(0), vec![false, false, false]);
        assert_eq!(c.get(1), vec![false, false, true]);
        assert_eq!(c.get(6), vec![true, true, false]);
        let op = MeanOperator::spider(&SpiderShape { n: 6, d: 3 }, 0.3).unwrap();
        let means = candidate_means(Execution::Sequential, &op, &Candidates::Exhaustive { n: 6 });
        for idx in [0, 5, 17, 63] {
            let direct = op.apply_bits(&Candidates::Exhaustive { n: 6 }.get(idx)).0;
            for j in 0..6 {
                assert!((means[idx * 6 + j] - direct[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_mean_is_its_own_best_match() {
        let shape = SpiderShape { n: 6, d: 2 };
        let op = MeanOperator::spider(&shape, 0.25).unwrap();
        let truth = vec![true, false, false, true, true, false];
        let mean = op.apply_bits(&truth).0;
        for exec in [Execution::Sequential, Execution::Parallel] {
            let got = best_match_means(exec, &mean, &op, &Candidates::Exhaustive { n: 6 }, &mut rng_from_seed(1));
            assert_eq!(got, BestMatch { labels: truth.clone(), fallback: false });
        }
    }

    #[test]
    fn mutual_ties_resolve_lexicographically() {
        // Two candidates equidistant from the empirical mean at every index.
        let op = MeanOperator::spider(&SpiderShape { n: 1, d: 1 }, 0.0).unwrap();
        let got = best_match_means(
            Execution::Sequential,
            &[0.5],
            &op,
            &Candidates::List(vec![vec![true], vec![false]]),
            &mut rng_from_seed(0),
        );
        assert_eq!(got, BestMatch { labels: vec![false], fallback: false });
    }
}
