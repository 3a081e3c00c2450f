//! Tree shapes, indexing, labeled ordered trees and the canonical subtrees of
//! complete k-ary trees.
//!
//! Complete k-ary trees index their non-root nodes in BFS order: the root's
//! children are `0..k`, the next level follows, and so on. Spiders index node
//! `j` (1-based depth) of path `i` (1-based) as `(i-1)d + j - 1`.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Index of a non-root node of an original tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeIndex(pub usize);

impl fmt::Display for NodeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Largest tree this crate agrees to materialize.
const MAX_NODES: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ShapeSpec", into = "ShapeSpec")]
pub enum TreeShape {
    CompleteKary { k: usize, d: usize },
    Spider { n: usize, d: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ShapeSpec {
    Kary { k: usize, d: usize },
    Spider { n: usize, d: usize },
}

impl TryFrom<ShapeSpec> for TreeShape {
    type Error = Error;

    fn try_from(spec: ShapeSpec) -> Result<Self> {
        match spec {
            ShapeSpec::Kary { k, d } => TreeShape::kary(k, d),
            ShapeSpec::Spider { n, d } => TreeShape::spider(n, d),
        }
    }
}

impl From<TreeShape> for ShapeSpec {
    fn from(shape: TreeShape) -> Self {
        match shape {
            TreeShape::CompleteKary { k, d } => ShapeSpec::Kary { k, d },
            TreeShape::Spider { n, d } => ShapeSpec::Spider { n, d },
        }
    }
}

impl TreeShape {
    pub fn kary(k: usize, d: usize) -> Result<Self> {
        if k < 1 || d < 1 {
            return Err(Error::InvalidShape(format!("k={k}, d={d}: both must be at least 1")));
        }
        let mut n: usize = 0;
        let mut level: usize = 1;
        for _ in 0..d {
            level = level
                .checked_mul(k)
                .filter(|&l| l <= MAX_NODES)
                .ok_or_else(|| Error::InvalidShape(format!("k={k}, d={d} is too large")))?;
            n += level;
        }
        if n > MAX_NODES {
            return Err(Error::InvalidShape(format!("k={k}, d={d} is too large")));
        }
        Ok(TreeShape::CompleteKary { k, d })
    }

    pub fn spider(n: usize, d: usize) -> Result<Self> {
        if d < 1 || n < d || !n.is_multiple_of(d) {
            return Err(Error::InvalidShape(format!("spider n={n}, d={d}: need d >= 1 and d | n")));
        }
        if n > MAX_NODES {
            return Err(Error::InvalidShape(format!("spider n={n} is too large")));
        }
        Ok(TreeShape::Spider { n, d })
    }

    /// Number of non-root nodes.
    pub fn n(&self) -> usize {
        match *self {
            TreeShape::CompleteKary { k, d } => KaryShape { k, d }.n(),
            TreeShape::Spider { n, .. } => n,
        }
    }

    pub fn depth(&self) -> usize {
        match *self {
            TreeShape::CompleteKary { d, .. } | TreeShape::Spider { d, .. } => d,
        }
    }

    pub fn as_kary(&self) -> Result<KaryShape> {
        match *self {
            TreeShape::CompleteKary { k, d } => Ok(KaryShape { k, d }),
            TreeShape::Spider { .. } => Err(Error::NotKary),
        }
    }

    pub fn as_spider(&self) -> Result<SpiderShape> {
        match *self {
            TreeShape::Spider { n, d } => Ok(SpiderShape { n, d }),
            TreeShape::CompleteKary { .. } => Err(Error::NotSpider),
        }
    }

    /// True when the shape is a single root-anchored path, where every
    /// channel reduces to the string deletion channel.
    pub fn is_path(&self) -> bool {
        match *self {
            TreeShape::CompleteKary { k, .. } => k == 1,
            TreeShape::Spider { n, d } => n == d,
        }
    }

    /// Builds the tree with `labels` in this shape's index order.
    pub fn build(&self, labels: &[bool]) -> Result<LabeledOrderedTree> {
        match *self {
            TreeShape::CompleteKary { k, d } => build_complete_kary(k, d, labels),
            TreeShape::Spider { n, d } => build_spider(n, d, labels),
        }
    }

    /// Reads labels back in this shape's index order. Only meaningful for
    /// trees with exactly this shape.
    pub fn read_labels(&self, tree: &LabeledOrderedTree) -> Result<Vec<bool>> {
        if tree.non_root_count() != self.n() {
            return Err(Error::LabelLength { expected: self.n(), got: tree.non_root_count() });
        }
        let order = match self {
            TreeShape::CompleteKary { .. } => tree.bfs_order(),
            TreeShape::Spider { .. } => tree.preorder(),
        };
        Ok(order.into_iter().skip(1).map(|id| tree.label(id).unwrap_or(false)).collect())
    }
}

impl fmt::Display for TreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeShape::CompleteKary { k, d } => write!(f, "kary(k={k}, d={d})"),
            TreeShape::Spider { n, d } => write!(f, "spider(n={n}, d={d})"),
        }
    }
}

/// Index arithmetic for a complete k-ary tree of depth `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KaryShape {
    pub k: usize,
    pub d: usize,
}

impl KaryShape {
    pub fn n(&self) -> usize {
        self.level_start(self.d) + self.level_len(self.d)
    }

    /// Number of nodes at depth `t`.
    pub fn level_len(&self, t: usize) -> usize {
        self.k.pow(t as u32)
    }

    /// BFS index of the first node at depth `t >= 1`.
    pub fn level_start(&self, t: usize) -> usize {
        (1..t).map(|h| self.level_len(h)).sum()
    }

    /// `J_t`, the BFS indices at depth `t`.
    pub fn level(&self, t: usize) -> Range<usize> {
        let start = self.level_start(t);
        start..start + self.level_len(t)
    }

    pub fn contains(&self, i: NodeIndex) -> bool {
        i.0 < self.n()
    }

    pub fn check(&self, i: NodeIndex) -> Result<()> {
        if self.contains(i) {
            Ok(())
        } else {
            Err(Error::InvalidIndex(i))
        }
    }

    /// Depth of a valid node, in `1..=d`.
    pub fn depth_of(&self, i: NodeIndex) -> usize {
        let mut t = 1;
        let mut end = self.level_len(1);
        while i.0 >= end {
            t += 1;
            end += self.level_len(t);
        }
        t
    }

    /// Position of `i` among its siblings.
    pub fn position(&self, i: NodeIndex) -> usize {
        (i.0 - self.level_start(self.depth_of(i))) % self.k
    }

    /// Parent of `i`, or `None` when the parent is the root.
    pub fn parent(&self, i: NodeIndex) -> Option<NodeIndex> {
        let t = self.depth_of(i);
        if t == 1 {
            return None;
        }
        let offset = i.0 - self.level_start(t);
        Some(NodeIndex(self.level_start(t - 1) + offset / self.k))
    }

    /// Children of `i` (empty for leaves).
    pub fn children(&self, i: NodeIndex) -> Range<usize> {
        let t = self.depth_of(i);
        if t == self.d {
            return 0..0;
        }
        let first = self.level_start(t + 1) + (i.0 - self.level_start(t)) * self.k;
        first..first + self.k
    }

    /// Ancestors of `i` at depths `1..=depth(i)`, ending with `i`.
    pub fn path_to(&self, i: NodeIndex) -> Vec<NodeIndex> {
        let mut path = vec![i];
        let mut cur = i;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpiderShape {
    pub n: usize,
    pub d: usize,
}

impl SpiderShape {
    pub fn paths(&self) -> usize {
        self.n / self.d
    }

    /// Index of the node at 1-based `depth` on 1-based `path`.
    pub fn index(&self, path: usize, depth: usize) -> NodeIndex {
        NodeIndex((path - 1) * self.d + depth - 1)
    }

    /// Inverse of [`SpiderShape::index`]: 1-based `(path, depth)`.
    pub fn coords(&self, i: NodeIndex) -> (usize, usize) {
        (i.0 / self.d + 1, i.0 % self.d + 1)
    }
}

/// Handle of a node inside a particular [`LabeledOrderedTree`].
pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
struct TreeNode {
    label: Option<bool>,
    origin: Option<NodeIndex>,
    slot: Option<NodeIndex>,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    depth: usize,
    height: usize,
    size: usize,
}

/// A rooted ordered tree with binary labels on its non-root nodes.
///
/// Nodes live in an arena; the root is always id 0 and every node is stored
/// after its parent. Trees are immutable once built.
///
/// Each node may also record two pieces of provenance for testing channels:
/// `origin` is the original node whose label it carries and `slot` is the
/// original position it occupies. Under TED they coincide; Left-Propagation
/// moves labels between slots. Reconstruction code never reads either.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledOrderedTree {
    nodes: Vec<TreeNode>,
}

/// Accumulates nodes top-down and computes depths, heights and subtree sizes.
#[derive(Debug)]
pub struct TreeBuilder {
    nodes: Vec<TreeNode>,
}

impl Default for TreeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl TreeBuilder {
    pub fn new() -> Self {
        let root = TreeNode {
            label: None,
            origin: None,
            slot: None,
            parent: None,
            children: Vec::new(),
            depth: 0,
            height: 0,
            size: 1,
        };
        TreeBuilder { nodes: vec![root] }
    }

    /// Appends a child of `parent`; returns its id.
    pub fn push(&mut self, parent: NodeId, label: bool) -> NodeId {
        self.push_with(parent, label, None, None)
    }

    pub fn push_with(
        &mut self,
        parent: NodeId,
        label: bool,
        origin: Option<NodeIndex>,
        slot: Option<NodeIndex>,
    ) -> NodeId {
        let id = self.nodes.len();
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(TreeNode {
            label: Some(label),
            origin,
            slot,
            parent: Some(parent),
            children: Vec::new(),
            depth,
            height: 0,
            size: 1,
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn finish(mut self) -> LabeledOrderedTree {
        for id in (1..self.nodes.len()).rev() {
            let (height, size) = (self.nodes[id].height, self.nodes[id].size);
            let p = self.nodes[id].parent.expect("non-root node has a parent");
            let parent = &mut self.nodes[p];
            parent.height = parent.height.max(height + 1);
            parent.size += size;
        }
        LabeledOrderedTree { nodes: self.nodes }
    }
}

impl LabeledOrderedTree {
    pub const ROOT: NodeId = 0;

    /// A tree holding only the root.
    pub fn root_only() -> Self {
        TreeBuilder::new().finish()
    }

    pub fn root(&self) -> NodeId {
        Self::ROOT
    }

    /// Total node count including the root.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn non_root_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn label(&self, id: NodeId) -> Option<bool> {
        self.nodes[id].label
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.nodes[id].depth
    }

    /// Length of the longest downward path from `id` to a leaf.
    pub fn height(&self, id: NodeId) -> usize {
        self.nodes[id].height
    }

    /// Number of nodes in the subtree rooted at `id`, itself included.
    pub fn subtree_size(&self, id: NodeId) -> usize {
        self.nodes[id].size
    }

    /// Original node whose label this node carries (channel provenance).
    pub fn origin(&self, id: NodeId) -> Option<NodeIndex> {
        self.nodes[id].origin
    }

    /// Original position this node occupies (channel provenance).
    pub fn slot(&self, id: NodeId) -> Option<NodeIndex> {
        self.nodes[id].slot
    }

    /// Ids in breadth-first order, root first.
    pub fn bfs_order(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.len());
        order.push(Self::ROOT);
        let mut head = 0;
        while head < order.len() {
            let id = order[head];
            order.extend_from_slice(&self.nodes[id].children);
            head += 1;
        }
        order
    }

    /// Ids in depth-first preorder, root first.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            order.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        order
    }

    /// Ids along the path from the root to `id`, inclusive.
    pub fn path_from_root(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Labels of `ids`, with the root read as `false`.
    pub fn labels_of(&self, ids: &[NodeId]) -> Vec<bool> {
        ids.iter().map(|&id| self.nodes[id].label.unwrap_or(false)).collect()
    }

    /// Labels of non-root nodes in preorder. For a path this is its string.
    pub fn preorder_labels(&self) -> Vec<bool> {
        let order = self.preorder();
        self.labels_of(&order[1..])
    }

    /// Structural equality including labels, ignoring provenance.
    pub fn same_labeled_shape(&self, other: &LabeledOrderedTree) -> bool {
        fn walk(a: &LabeledOrderedTree, x: NodeId, b: &LabeledOrderedTree, y: NodeId) -> bool {
            let (cx, cy) = (a.children(x), b.children(y));
            a.label(x) == b.label(y) && cx.len() == cy.len() && cx.iter().zip(cy).all(|(&u, &v)| walk(a, u, b, v))
        }
        walk(self, Self::ROOT, other, Self::ROOT)
    }

    pub(crate) fn from_nested(root: &Nested) -> Result<Self> {
        if root.label.is_some() {
            return Err(Error::MalformedTrace("root must not carry a label".into()));
        }
        let mut b = TreeBuilder::new();
        let mut queue = std::collections::VecDeque::new();
        queue.push_back((LabeledOrderedTree::ROOT, root));
        while let Some((id, node)) = queue.pop_front() {
            for child in &node.children {
                let label = child.label.ok_or_else(|| Error::MalformedTrace("non-root node without a label".into()))?;
                let cid = b.push(id, label);
                queue.push_back((cid, child));
            }
        }
        Ok(b.finish())
    }

    pub(crate) fn to_nested(&self) -> Nested {
        fn walk(t: &LabeledOrderedTree, id: NodeId) -> Nested {
            Nested { label: t.label(id), children: t.children(id).iter().map(|&c| walk(t, c)).collect() }
        }
        walk(self, Self::ROOT)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::MalformedTrace(e.to_string()))
    }
}

/// Serialized form: `{"label": 0|1|null, "children": [...]}`.
#[derive(Serialize, Deserialize)]
pub(crate) struct Nested {
    #[serde(with = "bit_option")]
    label: Option<bool>,
    #[serde(default)]
    children: Vec<Nested>,
}

mod bit_option {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<bool>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_u8(*b as u8),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<bool>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Bit {
            Int(u8),
            Bool(bool),
        }
        match Option::<Bit>::deserialize(d)? {
            None => Ok(None),
            Some(Bit::Bool(b)) => Ok(Some(b)),
            Some(Bit::Int(0)) => Ok(Some(false)),
            Some(Bit::Int(1)) => Ok(Some(true)),
            Some(Bit::Int(x)) => Err(serde::de::Error::custom(format!("label {x} is not a bit"))),
        }
    }
}

impl Serialize for LabeledOrderedTree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_nested().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledOrderedTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let nested = Nested::deserialize(d)?;
        LabeledOrderedTree::from_nested(&nested).map_err(serde::de::Error::custom)
    }
}

fn check_len(expected: usize, labels: &[bool]) -> Result<()> {
    if labels.len() == expected {
        Ok(())
    } else {
        Err(Error::LabelLength { expected, got: labels.len() })
    }
}

/// Complete k-ary tree of depth `d`, labels in BFS order. Node with BFS index
/// `i` gets arena id `i + 1`.
pub fn build_complete_kary(k: usize, d: usize, labels: &[bool]) -> Result<LabeledOrderedTree> {
    let shape = TreeShape::kary(k, d)?.as_kary()?;
    check_len(shape.n(), labels)?;
    let mut b = TreeBuilder::new();
    for (i, &label) in labels.iter().enumerate() {
        let idx = NodeIndex(i);
        let parent = shape.parent(idx).map_or(LabeledOrderedTree::ROOT, |p| p.0 + 1);
        b.push_with(parent, label, Some(idx), Some(idx));
    }
    Ok(b.finish())
}

/// `(n, d)`-spider, labels in DFS index order.
pub fn build_spider(n: usize, d: usize, labels: &[bool]) -> Result<LabeledOrderedTree> {
    TreeShape::spider(n, d)?;
    check_len(n, labels)?;
    let mut b = TreeBuilder::new();
    for path in labels.chunks(d).enumerate() {
        let mut parent = LabeledOrderedTree::ROOT;
        for (j, &label) in path.1.iter().enumerate() {
            let idx = NodeIndex(path.0 * d + j);
            parent = b.push_with(parent, label, Some(idx), Some(idx));
        }
    }
    Ok(b.finish())
}

/// The level sets `J_t`, `I_t` and their union `I`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSets {
    /// `j[t - 1]` is `J_t` for `t` in `1..=d`.
    pub j: Vec<Vec<NodeIndex>>,
    /// `i_t[t - 1]` is `I_t` for `t` in `1..=d`.
    pub i_t: Vec<Vec<NodeIndex>>,
    /// Union of `I_t` over `t` in `1..d`, ascending.
    pub i: Vec<NodeIndex>,
}

impl IndexSets {
    pub fn level(&self, t: usize) -> &[NodeIndex] {
        &self.j[t - 1]
    }
}

pub fn index_sets(shape: &TreeShape) -> Result<IndexSets> {
    let s = shape.as_kary()?;
    let j: Vec<Vec<NodeIndex>> = (1..=s.d).map(|t| s.level(t).map(NodeIndex).collect()).collect();
    let i_t: Vec<Vec<NodeIndex>> = j
        .iter()
        .enumerate()
        .map(
            |(t0, level)| {
                if t0 == 0 {
                    level.clone()
                } else {
                    level.iter().copied().filter(|i| i.0 % s.k != 0).collect()
                }
            },
        )
        .collect();
    let i = i_t[..s.d - 1].iter().flatten().copied().collect();
    Ok(IndexSets { j, i_t, i })
}

/// Vertex of an original tree, as listed by the canonical subtrees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    Root,
    Node(NodeIndex),
}

impl Vertex {
    pub fn index(self) -> Option<NodeIndex> {
        match self {
            Vertex::Root => None,
            Vertex::Node(i) => Some(i),
        }
    }
}

/// Route positions `pi_i(0..d)` of `i`: its own ancestry down to `i`, then
/// leftmost children.
pub fn pi_function(shape: &TreeShape, i: NodeIndex) -> Result<Vec<usize>> {
    let s = shape.as_kary()?;
    s.check(i)?;
    let mut pi: Vec<usize> = s.path_to(i).into_iter().map(|u| s.position(u)).collect();
    pi.resize(s.d, 0);
    Ok(pi)
}

/// `P_X(i)`: root, then the ancestors of `i` down to `i`.
pub fn canonical_p(shape: &TreeShape, i: NodeIndex) -> Result<Vec<Vertex>> {
    let s = shape.as_kary()?;
    s.check(i)?;
    let mut out = vec![Vertex::Root];
    out.extend(s.path_to(i).into_iter().map(Vertex::Node));
    Ok(out)
}

/// Internal route `u_1..u_{d-1}` of `G_X(i)` followed by the `k` children of
/// `u_{d-1}` (for `d = 1`, the root's children).
fn g_nodes(s: &KaryShape, i: NodeIndex) -> Vec<NodeIndex> {
    let t = s.depth_of(i);
    let mut route = s.path_to(i);
    route.truncate(s.d - 1);
    if t < s.d {
        let mut cur = i;
        while route.len() < s.d - 1 {
            cur = NodeIndex(s.children(cur).start);
            route.push(cur);
        }
    }
    let leaves = match route.last() {
        Some(&last) => s.children(last),
        None => s.level(1),
    };
    route.extend(leaves.map(NodeIndex));
    route
}

/// `G_X(i)` in route order: `u_0 = root, u_1, .., u_{d-1}`, then the leaves.
pub fn canonical_g(shape: &TreeShape, i: NodeIndex) -> Result<Vec<Vertex>> {
    let s = shape.as_kary()?;
    s.check(i)?;
    let mut out = vec![Vertex::Root];
    out.extend(g_nodes(&s, i).into_iter().map(Vertex::Node));
    Ok(out)
}

/// `H_X(i)`: the members of `G_X(i)` at depth at least that of `i`.
pub fn canonical_h(shape: &TreeShape, i: NodeIndex) -> Result<Vec<NodeIndex>> {
    let s = shape.as_kary()?;
    s.check(i)?;
    let t = s.depth_of(i);
    Ok(g_nodes(&s, i).split_off(t - 1))
}

/// `G+_X(i)`: `G_X(i)` plus every child of its internal nodes, in BFS order.
pub fn g_plus(shape: &TreeShape, i: NodeIndex) -> Result<Vec<Vertex>> {
    let s = shape.as_kary()?;
    s.check(i)?;
    let g = g_nodes(&s, i);
    let mut out: Vec<NodeIndex> = s.level(1).map(NodeIndex).collect();
    for &u in &g[..s.d - 1] {
        out.extend(s.children(u).map(NodeIndex));
    }
    out.extend(g);
    out.sort_unstable();
    out.dedup();
    let mut v = vec![Vertex::Root];
    v.extend(out.into_iter().map(Vertex::Node));
    Ok(v)
}

/// The `i` in `I` whose `H_X(i)` contains `j`, for `j` in `J_{d-1}`.
pub fn psi(shape: &TreeShape, j: NodeIndex) -> Result<NodeIndex> {
    let s = shape.as_kary()?;
    if s.d < 2 || !s.contains(j) || s.depth_of(j) != s.d - 1 {
        return Err(Error::InvalidIndex(j));
    }
    let mut cur = j;
    while s.position(cur) == 0 {
        match s.parent(cur) {
            Some(p) => cur = p,
            None => break,
        }
    }
    Ok(cur)
}
