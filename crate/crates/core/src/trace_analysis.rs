//! Canonical subtrees of traces and the structural predicates built on them.
//!
//! `P_Y(i)`, `G_Y(i)` and `H_Y(i)` follow the route positions `pi_i` through a
//! trace, insisting on exactly `k` children at every step. A failed step gives
//! `None` (an undefined result).

use crate::channel::DeletionSet;
use crate::error::Result;
use crate::trees::{pi_function, KaryShape, LabeledOrderedTree, NodeId, NodeIndex, TreeShape};

/// Node list in a trace, or `None` when the route breaks.
pub type TraceSubtree = Option<Vec<NodeId>>;

/// The route of one original node `i`, reusable across traces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route {
    pub i: NodeIndex,
    /// Depth of `i` in the original tree.
    pub t_i: usize,
    pub pi: Vec<usize>,
    k: usize,
}

impl Route {
    pub fn new(shape: &TreeShape, i: NodeIndex) -> Result<Self> {
        let s = shape.as_kary()?;
        let pi = pi_function(shape, i)?;
        Ok(Route { i, t_i: s.depth_of(i), pi, k: s.k })
    }

    fn d(&self) -> usize {
        self.pi.len()
    }

    /// Follows the route for `steps` levels below the root.
    fn walk(&self, trace: &LabeledOrderedTree, steps: usize) -> TraceSubtree {
        let mut nodes = Vec::with_capacity(steps + 1 + self.k);
        let mut v = LabeledOrderedTree::ROOT;
        nodes.push(v);
        for t in 1..=steps {
            let kids = trace.children(v);
            if kids.len() != self.k {
                return None;
            }
            v = kids[self.pi[t - 1]];
            nodes.push(v);
        }
        Some(nodes)
    }

    /// `P_Y(i) = v_0, .., v_{t_i}`.
    pub fn p(&self, trace: &LabeledOrderedTree) -> TraceSubtree {
        self.walk(trace, self.t_i)
    }

    /// `G_Y(i) = v_0, .., v_{d-1}` followed by the `k` children of `v_{d-1}`.
    pub fn g(&self, trace: &LabeledOrderedTree) -> TraceSubtree {
        let mut nodes = self.walk(trace, self.d() - 1)?;
        let kids = trace.children(*nodes.last().expect("root present"));
        if kids.len() != self.k {
            return None;
        }
        nodes.extend_from_slice(kids);
        Some(nodes)
    }

    /// `H_Y(i) = v_{t_i}, .., v_{d+k-1}`, defined when `G_Y(i)` is.
    pub fn h(&self, trace: &LabeledOrderedTree) -> TraceSubtree {
        self.g(trace).map(|g| g[self.t_i..].to_vec())
    }

    /// Definition of s-stability for this route.
    pub fn is_s_stable(&self, trace: &LabeledOrderedTree, s: usize) -> bool {
        let Some(g) = self.g(trace) else {
            return false;
        };
        g[..self.d()].iter().all(|&v| {
            let h = trace.height(v);
            h > s || trace.children(v).iter().all(|&c| trace.height(c) + 1 == h)
        })
    }
}

pub fn trace_p(trace: &LabeledOrderedTree, shape: &TreeShape, i: NodeIndex) -> Result<TraceSubtree> {
    Ok(Route::new(shape, i)?.p(trace))
}

pub fn trace_g(trace: &LabeledOrderedTree, shape: &TreeShape, i: NodeIndex) -> Result<TraceSubtree> {
    Ok(Route::new(shape, i)?.g(trace))
}

pub fn trace_h(trace: &LabeledOrderedTree, shape: &TreeShape, i: NodeIndex) -> Result<TraceSubtree> {
    Ok(Route::new(shape, i)?.h(trace))
}

pub fn is_s_stable(trace: &LabeledOrderedTree, shape: &TreeShape, i: NodeIndex, s: usize) -> Result<bool> {
    Ok(Route::new(shape, i)?.is_s_stable(trace, s))
}

/// True when no internal node of the original shape loses more than `b`
/// consecutive children to `del`.
pub fn is_b_balanced(shape: &KaryShape, del: &DeletionSet, b: usize) -> bool {
    let mut parents: Vec<Option<NodeIndex>> = vec![None];
    parents.extend((0..shape.n().saturating_sub(shape.level_len(shape.d))).map(|i| Some(NodeIndex(i))));
    parents.into_iter().all(|p| {
        let kids = match p {
            None => shape.level(1),
            Some(p) => shape.children(p),
        };
        let mut run = 0;
        for c in kids {
            if del.contains(NodeIndex(c)) {
                run += 1;
                if run > b {
                    return false;
                }
            } else {
                run = 0;
            }
        }
        true
    })
}

/// Labels of the listed trace nodes, the root read as 0.
pub fn labels(trace: &LabeledOrderedTree, nodes: &[NodeId]) -> Vec<bool> {
    trace.labels_of(nodes)
}
