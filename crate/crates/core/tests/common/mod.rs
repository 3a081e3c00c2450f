//! Shared test helpers: an independent recursive channel implementation and a
//! perfect string reconstructor that answers from the known truth.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use tree_trace::channel::DeletionSet;
use tree_trace::string_recon::{StringProblem, StringReconstructor};
use tree_trace::trees::{LabeledOrderedTree, NodeIndex};
use tree_trace::Result;

/// Owned recursive tree with per-node provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefNode {
    pub label: Option<bool>,
    pub origin: Option<usize>,
    pub slot: Option<usize>,
    pub children: Vec<RefNode>,
}

impl RefNode {
    pub fn from_tree(tree: &LabeledOrderedTree) -> RefNode {
        fn go(tree: &LabeledOrderedTree, id: usize) -> RefNode {
            RefNode {
                label: tree.label(id),
                origin: tree.origin(id).map(|o| o.0),
                slot: tree.slot(id).map(|s| s.0),
                children: tree.children(id).iter().map(|&c| go(tree, c)).collect(),
            }
        }
        go(tree, tree.root())
    }

    pub fn preorder_labels(&self) -> Vec<bool> {
        let mut out = Vec::new();
        self.walk(&mut |n| out.extend(n.label));
        out
    }

    fn walk(&self, f: &mut dyn FnMut(&RefNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

/// TED: a deleted node is replaced by its (already processed) children.
pub fn ref_ted(tree: &RefNode, del: &BTreeSet<usize>) -> RefNode {
    fn go(node: &RefNode, del: &BTreeSet<usize>) -> Vec<RefNode> {
        let kids: Vec<RefNode> = node.children.iter().flat_map(|c| go(c, del)).collect();
        if node.origin.is_some_and(|o| del.contains(&o)) {
            kids
        } else {
            vec![RefNode { children: kids, ..node.clone() }]
        }
    }
    let kids = tree.children.iter().flat_map(|c| go(c, del)).collect();
    RefNode { children: kids, ..tree.clone() }
}

/// LP: deletions in increasing order of the original node; each one pulls the
/// contents of its left-only path up by one and drops the path's end.
pub fn ref_lp(tree: &RefNode, del: &BTreeSet<usize>) -> RefNode {
    // Returns true when `node` itself must be removed.
    fn pull_up(node: &mut RefNode) -> bool {
        if node.children.is_empty() {
            return true;
        }
        node.label = node.children[0].label;
        node.origin = node.children[0].origin;
        if pull_up(&mut node.children[0]) {
            node.children.remove(0);
        }
        false
    }
    fn delete_content(node: &mut RefNode, target: usize) -> bool {
        for idx in 0..node.children.len() {
            if node.children[idx].origin == Some(target) {
                if pull_up(&mut node.children[idx]) {
                    node.children.remove(idx);
                }
                return true;
            }
            if delete_content(&mut node.children[idx], target) {
                return true;
            }
        }
        false
    }
    let mut out = tree.clone();
    for &target in del {
        assert!(delete_content(&mut out, target), "node {target} not found");
    }
    out
}

pub fn to_set(del: &DeletionSet) -> BTreeSet<usize> {
    del.iter().map(|i| i.0).collect()
}

/// Reconstructor that ignores its traces and answers from a table keyed by
/// the problem key.
pub struct OracleStrings {
    pub answers: HashMap<usize, Vec<bool>>,
}

impl StringReconstructor for OracleStrings {
    fn reconstruct(&self, problem: &StringProblem<'_>) -> Result<Vec<bool>> {
        let answer = self.answers.get(&problem.key).expect("oracle knows every key").clone();
        assert_eq!(answer.len(), problem.len, "oracle answer length for key {}", problem.key);
        Ok(answer)
    }
}

pub fn bits(s: &str) -> Vec<bool> {
    s.bytes().map(|b| b == b'1').collect()
}

pub fn all_labelings(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u64..1 << n).map(move |code| (0..n).map(|b| code >> b & 1 == 1).collect())
}

pub fn nodes(ids: &[usize]) -> Vec<NodeIndex> {
    ids.iter().copied().map(NodeIndex).collect()
}

/// Total variation distance between an empirical histogram and exact
/// probabilities.
pub fn total_variation<K: std::hash::Hash + Eq + Clone>(
    counts: &HashMap<K, usize>,
    exact: &HashMap<K, f64>,
    total: usize,
) -> f64 {
    let mut keys: Vec<&K> = exact.keys().collect();
    for k in counts.keys() {
        if !exact.contains_key(k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|k| {
            let p = exact.get(k).copied().unwrap_or(0.0);
            let e = counts.get(k).copied().unwrap_or(0) as f64 / total as f64;
            (p - e).abs()
        })
        .sum::<f64>()
        / 2.0
}
