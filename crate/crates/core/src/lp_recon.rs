//! Reconstruction under the Left-Propagation channel.
//!
//! The sets `H_X(i)` partition the tree and each contains exactly one node
//! `j` of depth `d - 1`. Large `k`: the labels read along the route to `j`
//! plus the children of its trace image form a string trace of `H_X(psi(j))`
//! ([`reconstruct_lp_large`]). Any `k`: a single trace with `G_Y(i)` defined
//! already shows `H_X(i)` exactly ([`reconstruct_lp_small`]).

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::string_recon::{StringProblem, StringReconstructor};
use crate::trace_analysis::Route;
use crate::trees::{canonical_h, index_sets, psi, KaryShape, LabeledOrderedTree, NodeIndex, TreeShape};

fn require_depth(shape: &TreeShape) -> Result<KaryShape> {
    let s = shape.as_kary()?;
    if s.d < 2 {
        return Err(Error::ShapeUnsupported(format!("{shape}: depth at least 2 required")));
    }
    Ok(s)
}

/// Route to `j` in `J_{d-1}` together with the depth of `psi(j)`.
#[derive(Clone, Debug)]
pub struct ExtractionRoute {
    pub j: NodeIndex,
    pub owner: NodeIndex,
    route: Route,
    t_owner: usize,
}

impl ExtractionRoute {
    pub fn new(shape: &TreeShape, j: NodeIndex) -> Result<Self> {
        let s = require_depth(shape)?;
        let owner = psi(shape, j)?;
        Ok(ExtractionRoute { j, owner, route: Route::new(shape, j)?, t_owner: s.depth_of(owner) })
    }

    /// `s_Y(j)`, or `None` when `P_Y(j)` is undefined.
    pub fn extract(&self, trace: &LabeledOrderedTree) -> Option<Vec<bool>> {
        let p = self.route.p(trace)?;
        let last = *p.last().expect("route has a root");
        let mut nodes = p[self.t_owner..].to_vec();
        nodes.extend_from_slice(trace.children(last));
        Some(trace.labels_of(&nodes))
    }
}

pub fn extract_s(trace: &LabeledOrderedTree, shape: &TreeShape, j: NodeIndex) -> Result<Option<Vec<bool>>> {
    Ok(ExtractionRoute::new(shape, j)?.extract(trace))
}

pub fn reconstruct_lp_large(
    traces: &[LabeledOrderedTree],
    shape: &TreeShape,
    q: f64,
    recon: &dyn StringReconstructor,
) -> Result<Vec<bool>> {
    reconstruct_lp_large_with(Execution::default(), traces, shape, q, recon)
}

pub fn reconstruct_lp_large_with(
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
    let routes = s.level(s.d - 1).map(|j| ExtractionRoute::new(shape, NodeIndex(j))).collect::<Result<Vec<_>>>()?;
    let extracted: Vec<Vec<Option<Vec<bool>>>> = exec.map(traces, |t| routes.iter().map(|r| r.extract(t)).collect());
    for (t, row) in extracted.iter().enumerate() {
        if let Some(pos) = row.iter().position(Option::is_none) {
            return Err(Error::PerpEncountered { trace: t, j: routes[pos].j });
        }
    }
    let parts = exec.map_range(routes.len(), |r| -> Result<(Vec<NodeIndex>, Vec<bool>)> {
        let route = &routes[r];
        let strings: Vec<Vec<bool>> = extracted.iter().map(|row| row[r].clone().expect("checked")).collect();
        let h = canonical_h(shape, route.owner)?;
        let problem =
            StringProblem { key: route.j.0, traces: &strings, len: h.len(), q, min_trace_len: s.d - route.t_owner };
        Ok((h, recon.reconstruct(&problem)?))
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

pub fn reconstruct_lp_small(traces: &[LabeledOrderedTree], shape: &TreeShape, q: f64) -> Result<Vec<bool>> {
    reconstruct_lp_small_with(Execution::default(), traces, shape, q)
}

/// `q` is unused: the first trace with `G_Y(i)` defined is copied verbatim.
pub fn reconstruct_lp_small_with(
    exec: Execution,
    traces: &[LabeledOrderedTree],
    shape: &TreeShape,
    _q: f64,
) -> Result<Vec<bool>> {
    let s = require_depth(shape)?;
    if traces.is_empty() {
        return Err(Error::NoTraces);
    }
    let owners = index_sets(shape)?.i;
    let parts = exec.map(&owners, |&i| -> Result<(Vec<NodeIndex>, Vec<bool>)> {
        let route = Route::new(shape, i)?;
        let (trace, h) =
            traces.iter().find_map(|t| route.h(t).map(|h| (t, h))).ok_or(Error::NoCaterpillarTrace { i })?;
        Ok((canonical_h(shape, i)?, trace.labels_of(&h)))
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
    use crate::channel::{delete_lp, DeletionSet};
    use crate::trees::build_complete_kary;

    #[test]
    fn identity_extraction_reads_h() {
        let shape = TreeShape::kary(2, 3).unwrap();
        let labels: Vec<bool> = (0..14).map(|i| i % 3 == 0).collect();
        let tree = build_complete_kary(2, 3, &labels).unwrap();
        for j in 2..6 {
            let r = ExtractionRoute::new(&shape, NodeIndex(j)).unwrap();
            let expect: Vec<bool> = canonical_h(&shape, r.owner).unwrap().iter().map(|n| labels[n.0]).collect();
            assert_eq!(r.extract(&tree).unwrap(), expect);
        }
    }

    #[test]
    fn broken_route_is_absent() {
        let shape = TreeShape::kary(2, 3).unwrap();
        let tree = build_complete_kary(2, 3, &[true; 14]).unwrap();
        // Three deletions on the left-only path of node 1 remove slot 4.
        let del: DeletionSet = [1, 4, 10].into_iter().map(NodeIndex).collect();
        let y = delete_lp(&tree, &del).unwrap();
        assert_eq!(extract_s(&y, &shape, NodeIndex(5)).unwrap(), None);
        assert!(extract_s(&y, &shape, NodeIndex(2)).unwrap().is_some());
    }

    #[test]
    fn zero_deletion_recovers_labels() {
        let shape = TreeShape::kary(3, 2).unwrap();
        let labels: Vec<bool> = (0..12).map(|i| i % 2 == 1).collect();
        let tree = build_complete_kary(3, 2, &labels).unwrap();
        assert_eq!(reconstruct_lp_small(&[tree], &shape, 0.0).unwrap(), labels);
    }
}
