//! Reconstruction under the TED channel.
//!
//! Large `k`: [`find_paths`] estimates, for every depth-`(d-1)` trace node with
//! a leaf below it, which original node it came from. Traces are bucketed by
//! that estimate and each bucket's child strings go to a string
//! reconstructor ([`reconstruct_ted_large`]).
//!
//! Any `k`: keep the traces that are s-stable for `i` and take a
//! coordinate-wise majority over the labels of `G_Y(i)`
//! ([`reconstruct_ted_small`]).

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::string_recon::{StringProblem, StringReconstructor};
use crate::trace_analysis::Route;
use crate::trees::{canonical_h, index_sets, KaryShape, LabeledOrderedTree, NodeId, NodeIndex, TreeShape};

/// Nearest integer to `alpha / scale`, halves rounded up.
pub fn alpha_hat(alpha: f64, scale: f64) -> i64 {
    (alpha / scale + 0.5).floor() as i64
}

/// Expected number of surviving nodes in a subtree of height `l + 1`,
/// root excluded: `(1 - q) * sum_{h=1}^{l+1} k^h`.
pub fn level_scale(k: usize, q: f64, l: usize) -> f64 {
    (1.0 - q) * (1..=l + 1).map(|h| (k as f64).powi(h as i32)).sum::<f64>()
}

/// Estimated origin of one depth-`(d-1)` trace node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathEstimate {
    /// The trace node.
    pub node: NodeId,
    /// `digits[l]` is the estimated sibling position of its ancestor at depth
    /// `d - 1 - l`.
    pub digits: Vec<usize>,
    /// Estimated BFS index in `J_{d-1}`.
    pub index: NodeIndex,
}

fn require_depth(shape: &TreeShape) -> Result<KaryShape> {
    let s = shape.as_kary()?;
    if s.d < 2 {
        return Err(Error::ShapeUnsupported(format!("{shape}: depth at least 2 required")));
    }
    Ok(s)
}

fn estimate_one(trace: &LabeledOrderedTree, s: &KaryShape, q: f64, v: NodeId) -> PathEstimate {
    let path = trace.path_from_root(v);
    let d = s.d;
    let mut digits = Vec::with_capacity(d - 1);
    for l in 0..d - 1 {
        let x = path[d - 1 - l];
        let siblings = trace.children(path[d - 2 - l]);
        let scale = level_scale(s.k, q, l);
        let mut estimate: i64 = 0;
        let mut gap = 0usize;
        for &z in siblings {
            if trace.height(z) == l + 1 {
                estimate += alpha_hat(gap as f64, scale);
                if z == x {
                    break;
                }
                estimate += 1;
                gap = 0;
            } else {
                gap += trace.subtree_size(z);
            }
        }
        digits.push((estimate.max(0) as usize).min(s.k - 1));
    }
    let offset: usize = digits.iter().rev().fold(0, |acc, &a| acc * s.k + a);
    PathEstimate { node: v, digits, index: NodeIndex(s.level_start(d - 1) + offset) }
}

/// Estimates for every parent of a depth-`d` trace node, in BFS order.
pub fn estimate_paths(trace: &LabeledOrderedTree, shape: &TreeShape, q: f64) -> Result<Vec<PathEstimate>> {
    let s = require_depth(shape)?;
    let mut parents: Vec<NodeId> =
        (1..trace.len()).filter(|&id| trace.depth(id) == s.d).map(|id| trace.parent(id).expect("non-root")).collect();
    parents.dedup();
    Ok(parents.into_iter().map(|v| estimate_one(trace, &s, q, v)).collect())
}

/// The set of estimated indices `w`.
pub fn find_paths(trace: &LabeledOrderedTree, shape: &TreeShape, q: f64) -> Result<BTreeSet<NodeIndex>> {
    Ok(estimate_paths(trace, shape, q)?.into_iter().map(|e| e.index).collect())
}

/// `(trace index, trace node)` pairs per node of `J_{d-1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceBuckets {
    first: usize,
    buckets: Vec<Vec<(usize, NodeId)>>,
}

impl TraceBuckets {
    pub fn get(&self, j: NodeIndex) -> &[(usize, NodeId)] {
        &self.buckets[j.0 - self.first]
    }
}

pub fn bucket_traces(
    exec: Execution,
    traces: &[LabeledOrderedTree],
    shape: &TreeShape,
    q: f64,
) -> Result<TraceBuckets> {
    let s = require_depth(shape)?;
    let first = s.level_start(s.d - 1);
    let estimates = exec.map(traces, |t| estimate_paths(t, shape, q));
    let mut buckets = vec![Vec::new(); s.level_len(s.d - 1)];
    for (t, est) in estimates.into_iter().enumerate() {
        for e in est? {
            let bucket: &mut Vec<(usize, NodeId)> = &mut buckets[e.index.0 - first];
            if bucket.last().is_none_or(|&(prev, _)| prev != t) {
                bucket.push((t, e.node));
            }
        }
    }
    Ok(TraceBuckets { first, buckets })
}

pub fn reconstruct_ted_large(
    traces: &[LabeledOrderedTree],
    shape: &TreeShape,
    q: f64,
    recon: &dyn StringReconstructor,
) -> Result<Vec<bool>> {
    reconstruct_ted_large_with(Execution::default(), traces, shape, q, recon)
}

pub fn reconstruct_ted_large_with(
    exec: Execution,
    traces: &[LabeledOrderedTree],
    shape: &TreeShape,
    q: f64,
    recon: &dyn StringReconstructor,
) -> Result<Vec<bool>> {
    let s = require_depth(shape)?;
    if traces.is_empty() {
        return Err(Error::NoTraces);
    }
    let buckets = bucket_traces(exec, traces, shape, q)?;
    let level: Vec<NodeIndex> = s.level(s.d - 1).map(NodeIndex).collect();
    for &j in &level {
        if buckets.get(j).is_empty() {
            return Err(Error::EmptyBucket { j });
        }
    }
    let leaves = exec.map(&level, |&j| {
        let strings: Vec<Vec<bool>> =
            buckets.get(j).iter().map(|&(t, v)| traces[t].labels_of(traces[t].children(v))).collect();
        recon.reconstruct(&StringProblem { key: j.0, traces: &strings, len: s.k, q, min_trace_len: 1 })
    });

    let mut labels: Vec<Option<bool>> = vec![None; s.n()];
    for (&j, leaf_labels) in level.iter().zip(leaves) {
        let &(t, v) = &buckets.get(j)[0];
        let trace_path = traces[t].path_from_root(v);
        for (orig, &node) in s.path_to(j).into_iter().zip(&trace_path[1..]) {
            labels[orig.0].get_or_insert(traces[t].label(node).expect("non-root"));
        }
        for (c, b) in s.children(j).zip(leaf_labels?) {
            labels[c] = Some(b);
        }
    }
    Ok(labels.into_iter().map(|l| l.unwrap_or(false)).collect())
}

/// `s = ceil(log_k log_{1/q}(3dk))`, at least 1.
pub fn stability_parameter(k: usize, d: usize, q: f64) -> usize {
    if q <= 0.0 || k < 2 {
        return 1;
    }
    let inner = (3.0 * d as f64 * k as f64).ln() / (1.0 / q).ln();
    if inner <= 1.0 {
        return 1;
    }
    let s = (inner.ln() / (k as f64).ln()).ceil();
    if s < 1.0 {
        1
    } else {
        s as usize
    }
}

/// Coordinate-wise majority; ties go to 0.
pub fn majority(vectors: &[Vec<bool>]) -> Vec<bool> {
    let len = vectors.first().map_or(0, Vec::len);
    (0..len).map(|c| 2 * vectors.iter().filter(|v| v[c]).count() > vectors.len()).collect()
}

pub fn reconstruct_ted_small(traces: &[LabeledOrderedTree], shape: &TreeShape, q: f64) -> Result<Vec<bool>> {
    reconstruct_ted_small_with(Execution::default(), traces, shape, q)
}

pub fn reconstruct_ted_small_with(
    exec: Execution,
    traces: &[LabeledOrderedTree],
    shape: &TreeShape,
    q: f64,
) -> Result<Vec<bool>> {
    let s = require_depth(shape)?;
    if traces.is_empty() {
        return Err(Error::NoTraces);
    }
    let stab = stability_parameter(s.k, s.d, q);
    let owners = index_sets(shape)?.i;
    let parts = exec.map(&owners, |&i| -> Result<(Vec<NodeIndex>, Vec<bool>)> {
        let route = Route::new(shape, i)?;
        let votes: Vec<Vec<bool>> = traces
            .iter()
            .filter(|t| route.is_s_stable(t, stab))
            .map(|t| {
                let g = route.g(t).expect("stable implies a route");
                t.labels_of(&g[1..])
            })
            .collect();
        if votes.is_empty() {
            return Err(Error::NoStableTraces { i });
        }
        let winner = majority(&votes);
        Ok((canonical_h(shape, i)?, winner[route.t_i - 1..].to_vec()))
    });
    let mut labels = vec![false; s.n()];
    for part in parts {
        let (h, bits) = part?;
        for (node, b) in h.into_iter().zip(bits) {
            labels[node.0] = b;
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{delete_ted, DeletionSet};
    use crate::trees::build_complete_kary;

    #[test]
    fn alpha_hat_rounding() {
        assert_eq!(alpha_hat(0.0, 3.0), 0);
        assert_eq!(alpha_hat(7.0, 5.0), 1);
        assert_eq!(alpha_hat(5.0, 2.0), 3);
        assert_eq!(alpha_hat(4.9, 2.0), 2);
    }

    #[test]
    fn stability_parameter_values() {
        assert_eq!(stability_parameter(2, 4, 0.5), 3);
        assert_eq!(stability_parameter(2, 3, 0.1), 1);
        assert_eq!(stability_parameter(64, 2, 0.1), 1);
        assert_eq!(stability_parameter(2, 3, 0.0), 1);
    }

    #[test]
    fn identity_trace_estimates_every_path() {
        for (k, d) in [(2, 2), (3, 3), (4, 2), (1, 3)] {
            let shape = TreeShape::kary(k, d).unwrap();
            let s = shape.as_kary().unwrap();
            let tree = build_complete_kary(k, d, &vec![true; shape.n()]).unwrap();
            let found = find_paths(&tree, &shape, 0.2).unwrap();
            assert_eq!(found, s.level(d - 1).map(NodeIndex).collect());
        }
    }

    #[test]
    fn deleted_sibling_subtree_shifts_estimate() {
        // k = 4, d = 2: delete node 1 and its four children. For node 2 the
        // run before it is empty, so it reads as position 1; the gap mass is
        // zero because TED removes the whole subtree.
        let shape = TreeShape::kary(4, 2).unwrap();
        let tree = build_complete_kary(4, 2, &[false; 20]).unwrap();
        let del: DeletionSet = [1, 8, 9, 10, 11].into_iter().map(NodeIndex).collect();
        let y = delete_ted(&tree, &del).unwrap();
        let est = estimate_paths(&y, &shape, 0.0).unwrap();
        let idx: Vec<usize> = est.iter().map(|e| e.index.0).collect();
        assert_eq!(idx, vec![0, 1, 2]);

        // Deleting node 1 alone splices its four leaves between 0 and 2:
        // a gap of 4 nodes with scale (1 - q) * 4 = 4 moves node 2 back to
        // position 2.
        let del: DeletionSet = [NodeIndex(1)].into_iter().collect();
        let y = delete_ted(&tree, &del).unwrap();
        let est = estimate_paths(&y, &shape, 0.0).unwrap();
        let idx: Vec<usize> = est.iter().map(|e| e.index.0).collect();
        assert_eq!(idx, vec![0, 2, 3]);
    }

    #[test]
    fn majority_ties_to_zero() {
        assert_eq!(majority(&[vec![true, false], vec![false, false]]), vec![false, false]);
        assert_eq!(majority(&[vec![true], vec![true], vec![false]]), vec![true]);
    }
}
