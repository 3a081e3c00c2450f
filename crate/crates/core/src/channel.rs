//! Deletion channels on labeled trees and strings.
//!
//! Each channel has a deterministic core driven by an explicit
//! [`DeletionSet`] and a sampler that draws the set with per-node probability
//! `q`. The root is never deleted.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::par::Execution;
use crate::rng::{trace_rng, TraceRng};
use crate::trees::{LabeledOrderedTree, NodeId, NodeIndex, SpiderShape, TreeBuilder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeletionModel {
    #[serde(rename = "ted")]
    Ted,
    #[serde(rename = "lp")]
    LeftPropagation,
}

impl std::str::FromStr for DeletionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ted" => Ok(DeletionModel::Ted),
            "lp" => Ok(DeletionModel::LeftPropagation),
            other => Err(Error::Config(format!("unknown deletion model {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub model: DeletionModel,
    pub q: f64,
    #[serde(default)]
    pub censor_gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(model: DeletionModel, q: f64, seed: u64) -> Result<Self> {
        let cfg = ChannelConfig { model, q, censor_gamma: 0.0, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_censoring(mut self, gamma: f64) -> Result<Self> {
        self.censor_gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("q", self.q, false)?;
        check_probability("gamma", self.censor_gamma, true)
    }
}

/// Original nodes to delete, identified by index. Iterates in increasing
/// index order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DeletionSet(BTreeSet<NodeIndex>);

impl DeletionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, i: NodeIndex) -> bool {
        self.0.insert(i)
    }

    pub fn contains(&self, i: NodeIndex) -> bool {
        self.0.contains(&i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        self.0.iter().copied()
    }

    /// The subset of `0..n` selected by the bits of `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        (0..n).filter(|&i| mask >> i & 1 == 1).map(NodeIndex).collect()
    }
}

impl FromIterator<NodeIndex> for DeletionSet {
    fn from_iter<I: IntoIterator<Item = NodeIndex>>(iter: I) -> Self {
        DeletionSet(iter.into_iter().collect())
    }
}

/// Maps each deleted index to the node currently carrying it.
fn locate(tree: &LabeledOrderedTree, del: &DeletionSet) -> Result<Vec<bool>> {
    let mut marked = vec![false; tree.len()];
    let mut found = 0;
    for (id, mark) in marked.iter_mut().enumerate().skip(1) {
        if tree.origin(id).is_some_and(|o| del.contains(o)) {
            *mark = true;
            found += 1;
        }
    }
    if found != del.len() {
        let missing = del
            .iter()
            .find(|&i| !(1..tree.len()).any(|id| tree.origin(id) == Some(i)))
            .expect("some deleted index is missing");
        return Err(Error::MissingNode(missing));
    }
    Ok(marked)
}

/// TED deletion: each deleted node is replaced, in its parent's child list,
/// by its own surviving children.
pub fn delete_ted(tree: &LabeledOrderedTree, del: &DeletionSet) -> Result<LabeledOrderedTree> {
    let deleted = locate(tree, del)?;
    if del.is_empty() {
        return Ok(tree.clone());
    }
    let mut b = TreeBuilder::new();
    let mut queue = VecDeque::from([(LabeledOrderedTree::ROOT, LabeledOrderedTree::ROOT)]);
    let mut kept = Vec::new();
    while let Some((src, dst)) = queue.pop_front() {
        kept.clear();
        surviving_children(tree, src, &deleted, &mut kept);
        for &c in &kept {
            let label = tree.label(c).expect("non-root label");
            let id = b.push_with(dst, label, tree.origin(c), tree.slot(c));
            queue.push_back((c, id));
        }
    }
    Ok(b.finish())
}

fn surviving_children(tree: &LabeledOrderedTree, id: NodeId, deleted: &[bool], out: &mut Vec<NodeId>) {
    for &c in tree.children(id) {
        if deleted[c] {
            surviving_children(tree, c, deleted, out);
        } else {
            out.push(c);
        }
    }
}

struct WorkNode {
    label: Option<bool>,
    origin: Option<NodeIndex>,
    slot: Option<NodeIndex>,
    parent: Option<usize>,
    children: Vec<usize>,
}

/// Left-Propagation deletion. Deletions run one at a time in increasing
/// index order; each removes the label of the named original node, moves the
/// labels below it on its left-only path up by one and drops the path's last
/// node.
pub fn delete_lp(tree: &LabeledOrderedTree, del: &DeletionSet) -> Result<LabeledOrderedTree> {
    let deleted = locate(tree, del)?;
    if del.is_empty() {
        return Ok(tree.clone());
    }
    let mut work: Vec<WorkNode> = (0..tree.len())
        .map(|id| WorkNode {
            label: tree.label(id),
            origin: tree.origin(id),
            slot: tree.slot(id),
            parent: tree.parent(id),
            children: tree.children(id).to_vec(),
        })
        .collect();
    // Content to process, as a queue of arena ids whose content is deleted.
    // Contents move during the loop, so we track where each one sits.
    let mut targets: Vec<(NodeIndex, usize)> =
        (1..tree.len()).filter(|&id| deleted[id]).map(|id| (tree.origin(id).expect("located by origin"), id)).collect();
    targets.sort_unstable();
    let mut position: Vec<usize> = (0..tree.len()).collect();
    let mut holder: Vec<usize> = (0..tree.len()).collect();

    for (_, content) in targets {
        let mut cur = position[content];
        while let Some(&next) = work[cur].children.first() {
            work[cur].label = work[next].label;
            work[cur].origin = work[next].origin;
            let moved = holder[next];
            holder[cur] = moved;
            position[moved] = cur;
            cur = next;
        }
        let parent = work[cur].parent.expect("deleted node is not the root");
        work[parent].children.retain(|&c| c != cur);
    }

    let mut b = TreeBuilder::new();
    let mut queue = VecDeque::from([(LabeledOrderedTree::ROOT, LabeledOrderedTree::ROOT)]);
    while let Some((src, dst)) = queue.pop_front() {
        for &c in &work[src].children {
            let w = &work[c];
            let id = b.push_with(dst, w.label.expect("non-root label"), w.origin, w.slot);
            queue.push_back((c, id));
        }
    }
    Ok(b.finish())
}

pub fn delete(model: DeletionModel, tree: &LabeledOrderedTree, del: &DeletionSet) -> Result<LabeledOrderedTree> {
    match model {
        DeletionModel::Ted => delete_ted(tree, del),
        DeletionModel::LeftPropagation => delete_lp(tree, del),
    }
}

/// Marks every node that carries provenance independently with probability `q`.
pub fn sample_deletions<R: Rng + ?Sized>(tree: &LabeledOrderedTree, q: f64, rng: &mut R) -> DeletionSet {
    (1..tree.len()).filter_map(|id| tree.origin(id)).filter(|_| q > 0.0 && rng.random_bool(q)).collect()
}

/// One trace of `tree`. The tree must carry provenance (as built by
/// [`crate::trees::build_complete_kary`] or [`crate::trees::build_spider`]).
pub fn sample_trace<R: Rng + ?Sized>(
    tree: &LabeledOrderedTree,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> LabeledOrderedTree {
    let del = sample_deletions(tree, cfg.q, rng);
    delete(cfg.model, tree, &del).expect("sampled deletions come from the tree itself")
}

/// Returns `None`, the empty marker, with probability `gamma`.
pub fn censor<T, R: Rng + ?Sized>(trace: T, gamma: f64, rng: &mut R) -> Option<T> {
    if gamma > 0.0 && rng.random_bool(gamma.min(1.0)) {
        None
    } else {
        Some(trace)
    }
}

/// `count` traces, the `t`-th drawn from its own stream `cfg.seed ^ t`.
pub fn sample_traces(tree: &LabeledOrderedTree, cfg: &ChannelConfig, count: usize) -> Vec<LabeledOrderedTree> {
    sample_traces_with(Execution::default(), tree, cfg, count)
}

pub fn sample_traces_with(
    exec: Execution,
    tree: &LabeledOrderedTree,
    cfg: &ChannelConfig,
    count: usize,
) -> Vec<LabeledOrderedTree> {
    exec.map_range(count, |t| sample_trace(tree, cfg, &mut trace_rng(cfg.seed, t)))
}

/// Like [`sample_traces`], then censors each trace with `cfg.censor_gamma`.
pub fn sample_censored_traces(
    exec: Execution,
    tree: &LabeledOrderedTree,
    cfg: &ChannelConfig,
    count: usize,
) -> Vec<Option<LabeledOrderedTree>> {
    exec.map_range(count, |t| {
        let mut rng = trace_rng(cfg.seed, t);
        let trace = sample_trace(tree, cfg, &mut rng);
        censor(trace, cfg.censor_gamma, &mut rng)
    })
}

/// The string deletion channel with an explicit set of deleted positions.
pub fn delete_string(bits: &[bool], del: &DeletionSet) -> Vec<bool> {
    bits.iter().enumerate().filter(|&(i, _)| !del.contains(NodeIndex(i))).map(|(_, &b)| b).collect()
}

pub fn sample_string_trace<R: Rng + ?Sized>(bits: &[bool], q: f64, rng: &mut R) -> Vec<bool> {
    bits.iter().copied().filter(|_| !(q > 0.0 && rng.random_bool(q))).collect()
}

/// `count` string traces; censored ones are `None`.
pub fn sample_string_traces(
    exec: Execution,
    bits: &[bool],
    q: f64,
    gamma: f64,
    seed: u64,
    count: usize,
) -> Vec<Option<Vec<bool>>> {
    exec.map_range(count, |t| {
        let mut rng: TraceRng = trace_rng(seed, t);
        let trace = sample_string_trace(bits, q, &mut rng);
        censor(trace, gamma, &mut rng)
    })
}

/// Labels of each root-anchored path of a spider trace, top to bottom.
pub fn spider_paths(trace: &LabeledOrderedTree) -> Result<Vec<Vec<bool>>> {
    trace
        .children(LabeledOrderedTree::ROOT)
        .iter()
        .map(|&start| {
            let mut labels = Vec::new();
            let mut cur = start;
            loop {
                labels.push(trace.label(cur).expect("non-root label"));
                match trace.children(cur) {
                    [] => break,
                    [next] => cur = *next,
                    _ => return Err(Error::MalformedTrace("spider trace node with several children".into())),
                }
            }
            Ok(labels)
        })
        .collect()
}

/// Pads a spider trace with zero labels to exactly `n/d` paths of depth `d`,
/// returned as labels in DFS index order.
pub fn normalized_spider_labels(trace: &LabeledOrderedTree, shape: &SpiderShape) -> Result<Vec<bool>> {
    let paths = spider_paths(trace)?;
    if paths.len() > shape.paths() {
        return Err(Error::MalformedTrace(format!("{} paths, expected at most {}", paths.len(), shape.paths())));
    }
    let mut labels = vec![false; shape.n];
    for (p, path) in paths.iter().enumerate() {
        if path.len() > shape.d {
            return Err(Error::MalformedTrace(format!("path of length {} exceeds depth {}", path.len(), shape.d)));
        }
        labels[p * shape.d..p * shape.d + path.len()].copy_from_slice(path);
    }
    Ok(labels)
}

/// Normalized spider trace as a tree.
pub fn normalize_spider_trace(trace: &LabeledOrderedTree, shape: &SpiderShape) -> Result<LabeledOrderedTree> {
    let labels = normalized_spider_labels(trace, shape)?;
    let mut b = TreeBuilder::new();
    for path in labels.chunks(shape.d) {
        let mut parent = LabeledOrderedTree::ROOT;
        for &l in path {
            parent = b.push(parent, l);
        }
    }
    Ok(b.finish())
}
