//! Encoding trees and their structural entropy.
//!
//! An encoding tree is a rooted tree whose leaves are in bijection with the
//! vertices of a graph. Every node `α` stands for the vertex set under it and
//! caches two quantities of that set:
//!
//! * `vol(α)`: the sum of the weighted degrees of its vertices;
//! * `cut(α)` (`g_α`): the total weight of edges with exactly one endpoint in it.
//!
//! The structural entropy of the graph on the tree is
//!
//! ```text
//! H(G; T) = - Σ_{α ≠ root} cut(α) / vol(V) · log2( vol(α) / vol(parent(α)) )
//! ```
//!
//! where terms with `cut(α) = 0` are zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::{weighted_neg_log2, Scalar};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<S> {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub leaf_vertex: Option<usize>,
    pub vol: S,
    pub cut: S,
}

impl<S: Scalar> TreeNode<S> {
    pub fn is_leaf(&self) -> bool {
        self.leaf_vertex.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingTree<S> {
    nodes: Vec<TreeNode<S>>,
    root: NodeId,
    leaf_of: Vec<NodeId>,
}

impl<S: Scalar> EncodingTree<S> {
    /// Builds a tree from a parent array. `leaf_vertex[i]` is `Some(v)` exactly
    /// for the leaves; exactly one node has no parent. Caches are computed from
    /// `graph`.
    pub fn from_parents(
        graph: &Graph<S>,
        parents: &[Option<NodeId>],
        leaf_vertex: &[Option<usize>],
    ) -> Result<Self> {
        if parents.len() != leaf_vertex.len() {
            return Err(Error::TreeMismatch("parent/leaf arrays differ in length".into()));
        }
        let mut nodes: Vec<TreeNode<S>> = parents
            .iter()
            .zip(leaf_vertex)
            .map(|(&parent, &leaf)| TreeNode {
                parent,
                children: Vec::new(),
                leaf_vertex: leaf,
                vol: S::zero(),
                cut: S::zero(),
            })
            .collect();
        let mut root = None;
        for (i, p) in parents.iter().enumerate() {
            match p {
                None if root.is_some() => {
                    return Err(Error::TreeMismatch("more than one root".into()))
                }
                None => root = Some(i),
                Some(p) if *p >= nodes.len() || *p == i => {
                    return Err(Error::TreeMismatch(format!("node {i} has invalid parent {p}")))
                }
                Some(p) => nodes[*p].children.push(i),
            }
        }
        let root = root.ok_or_else(|| Error::TreeMismatch("no root".into()))?;
        let tree = Self::assemble(graph, nodes, root)?;
        Ok(recompute_caches(graph, &tree))
    }

    /// Validates topology against `graph` and indexes the leaves. Caches are
    /// taken as given.
    pub(crate) fn assemble(graph: &Graph<S>, nodes: Vec<TreeNode<S>>, root: NodeId) -> Result<Self> {
        let n = graph.vertex_count();
        let mut leaf_of = vec![usize::MAX; n];
        for (id, node) in nodes.iter().enumerate() {
            match node.leaf_vertex {
                Some(v) => {
                    if v >= n {
                        return Err(Error::TreeMismatch(format!("leaf for unknown vertex {v}")));
                    }
                    if leaf_of[v] != usize::MAX {
                        return Err(Error::TreeMismatch(format!("vertex {v} has two leaves")));
                    }
                    if !node.children.is_empty() {
                        return Err(Error::TreeMismatch(format!("leaf {id} has children")));
                    }
                    leaf_of[v] = id;
                }
                None if node.children.is_empty() => {
                    return Err(Error::TreeMismatch(format!("internal node {id} has no children")))
                }
                None => {}
            }
            for &c in &node.children {
                if nodes.get(c).and_then(|x| x.parent) != Some(id) {
                    return Err(Error::TreeMismatch(format!("child {c} does not point back to {id}")));
                }
            }
        }
        if let Some(v) = leaf_of.iter().position(|&x| x == usize::MAX) {
            return Err(Error::TreeMismatch(format!("vertex {v} has no leaf")));
        }
        if nodes[root].parent.is_some() {
            return Err(Error::TreeMismatch("root has a parent".into()));
        }
        // Every node reachable from the root exactly once.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        let mut count = 0;
        while let Some(x) = stack.pop() {
            if std::mem::replace(&mut seen[x], true) {
                return Err(Error::TreeMismatch("cycle".into()));
            }
            count += 1;
            stack.extend(nodes[x].children.iter().copied());
        }
        if count != nodes.len() {
            return Err(Error::TreeMismatch("nodes unreachable from the root".into()));
        }
        Ok(EncodingTree { nodes, root, leaf_of })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> &[TreeNode<S>] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &TreeNode<S> {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_of.len()
    }

    /// Node holding graph vertex `v`.
    pub fn leaf_of(&self, v: usize) -> NodeId {
        self.leaf_of[v]
    }

    /// Distance from the root for every node.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(x) = stack.pop() {
            for &c in &self.nodes[x].children {
                depth[c] = depth[x] + 1;
                stack.push(c);
            }
        }
        depth
    }

    /// Height of each node: 0 for leaves, otherwise one more than the highest child.
    pub fn node_heights(&self) -> Vec<usize> {
        let mut h = vec![0; self.nodes.len()];
        for x in self.post_order() {
            h[x] = self.nodes[x]
                .children
                .iter()
                .map(|&c| h[c] + 1)
                .max()
                .unwrap_or(0);
        }
        h
    }

    /// Maximum leaf depth.
    pub fn height(&self) -> usize {
        self.leaf_of
            .iter()
            .map(|&l| self.depth_of(l))
            .max()
            .unwrap_or(0)
    }

    fn depth_of(&self, mut x: NodeId) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[x].parent {
            x = p;
            d += 1;
        }
        d
    }

    /// True when every leaf sits at the same depth.
    pub fn is_uniform(&self) -> bool {
        let depths = self.depths();
        let mut it = self.leaf_of.iter().map(|&l| depths[l]);
        match it.next() {
            Some(d) => it.all(|x| x == d),
            None => true,
        }
    }

    /// Children before parents.
    pub fn post_order(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((x, expanded)) = stack.pop() {
            if expanded {
                order.push(x);
            } else {
                stack.push((x, true));
                for &c in self.nodes[x].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        order
    }

    /// Graph vertices under `x`, ascending.
    pub fn vertices_under(&self, x: NodeId) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![x];
        while let Some(y) = stack.pop() {
            let node = &self.nodes[y];
            if let Some(v) = node.leaf_vertex {
                out.push(v);
            }
            stack.extend(node.children.iter().copied());
        }
        out.sort_unstable();
        out
    }

    /// The vertex sets of the root's children, ascending by smallest vertex.
    pub fn top_modules(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.nodes[self.root]
            .children
            .iter()
            .map(|&c| self.vertices_under(c))
            .collect();
        out.sort();
        out
    }

    /// Largest absolute difference between the cached and the given caches.
    pub fn max_cache_difference(&self, other: &Self) -> f64 {
        self.nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| {
                let dv = (a.vol - b.vol).abs().as_f64();
                let dc = (a.cut - b.cut).abs().as_f64();
                dv.max(dc)
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn into_parts(self) -> (Vec<TreeNode<S>>, NodeId) {
        (self.nodes, self.root)
    }

    fn check_graph(&self, graph: &Graph<S>) -> Result<()> {
        if self.leaf_of.len() != graph.vertex_count() {
            return Err(Error::TreeMismatch(format!(
                "tree has {} leaves, graph has {} vertices",
                self.leaf_of.len(),
                graph.vertex_count()
            )));
        }
        Ok(())
    }
}

/// The height-1 tree: a root whose children are the leaves. Leaf `v` gets
/// node id `v`; the root is node `n`.
pub fn one_level_tree<S: Scalar>(graph: &Graph<S>) -> Result<EncodingTree<S>> {
    let volume = graph.volume();
    if !(volume > S::zero()) {
        return Err(Error::DegenerateGraph);
    }
    let n = graph.vertex_count();
    let mut nodes: Vec<TreeNode<S>> = (0..n)
        .map(|v| TreeNode {
            parent: Some(n),
            children: Vec::new(),
            leaf_vertex: Some(v),
            vol: graph.degree(v),
            cut: graph.degree(v),
        })
        .collect();
    nodes.push(TreeNode {
        parent: None,
        children: (0..n).collect(),
        leaf_vertex: None,
        vol: volume,
        cut: S::zero(),
    });
    EncodingTree::assemble(graph, nodes, n)
}

/// Structural entropy of `graph` on `tree`, in bits, from the tree's caches.
///
/// Terms are accumulated in node-id order.
pub fn structural_entropy<S: Scalar>(graph: &Graph<S>, tree: &EncodingTree<S>) -> Result<S> {
    tree.check_graph(graph)?;
    let volume = graph.volume();
    if !(volume > S::zero()) {
        return Err(Error::DegenerateGraph);
    }
    let mut total = S::zero();
    for node in &tree.nodes {
        if let Some(p) = node.parent {
            let parent_vol = tree.nodes[p].vol;
            if node.cut > S::zero() {
                total += weighted_neg_log2(node.cut / volume, node.vol / parent_vol);
            }
        }
    }
    Ok(total)
}

/// Entropy of the degree distribution, `-Σ_v (d_v / vol) log2(d_v / vol)`.
pub fn degree_entropy<S: Scalar>(graph: &Graph<S>) -> Result<S> {
    let volume = graph.volume();
    if !(volume > S::zero()) {
        return Err(Error::DegenerateGraph);
    }
    Ok(graph
        .degrees()
        .iter()
        .map(|&d| weighted_neg_log2(d / volume, d / volume))
        .sum())
}

/// Recomputes `vol` and `cut` of every node from the graph.
///
/// Volumes accumulate degrees up each leaf's ancestor chain; each edge adds its
/// weight to the cut of every node strictly below the lowest common ancestor
/// of its endpoints.
pub fn recompute_caches<S: Scalar>(graph: &Graph<S>, tree: &EncodingTree<S>) -> EncodingTree<S> {
    let mut out = tree.clone();
    for node in &mut out.nodes {
        node.vol = S::zero();
        node.cut = S::zero();
    }
    let depth = tree.depths();
    for v in 0..graph.vertex_count() {
        let d = graph.degree(v);
        let mut x = Some(tree.leaf_of[v]);
        while let Some(y) = x {
            out.nodes[y].vol += d;
            x = tree.nodes[y].parent;
        }
    }
    for e in graph.edges() {
        let mut a = tree.leaf_of[e.u];
        let mut b = tree.leaf_of[e.v];
        while a != b {
            if depth[a] >= depth[b] {
                out.nodes[a].cut += e.weight;
                a = tree.nodes[a].parent.expect("non-root above lca");
            } else {
                out.nodes[b].cut += e.weight;
                b = tree.nodes[b].parent.expect("non-root above lca");
            }
        }
    }
    out
}

/// One node of the line-delimited tree export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord<S> {
    pub id: NodeId,
    pub parent_id: Option<NodeId>,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_vertex: Option<usize>,
    pub vol: S,
    pub cut: S,
}

/// One line of the tree export: a whole graph's encoding tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord<S> {
    pub graph: usize,
    pub class: usize,
    pub vertex_count: usize,
    pub height: usize,
    pub entropy: S,
    pub nodes: Vec<NodeRecord<S>>,
}

impl<S: Scalar> TreeRecord<S> {
    pub fn new(index: usize, graph: &Graph<S>, tree: &EncodingTree<S>) -> Result<Self> {
        let heights = tree.node_heights();
        let nodes = tree
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| NodeRecord {
                id,
                parent_id: n.parent,
                height: heights[id],
                leaf_vertex: n.leaf_vertex,
                vol: n.vol,
                cut: n.cut,
            })
            .collect();
        Ok(TreeRecord {
            graph: index,
            class: graph.class(),
            vertex_count: graph.vertex_count(),
            height: tree.height(),
            entropy: if graph.volume() > S::zero() {
                structural_entropy(graph, tree)?
            } else {
                S::zero()
            },
            nodes,
        })
    }

    /// Rebuilds the tree for `graph`, keeping the exported caches.
    pub fn to_tree(&self, graph: &Graph<S>) -> Result<EncodingTree<S>> {
        let mut nodes: Vec<TreeNode<S>> = self
            .nodes
            .iter()
            .map(|r| TreeNode {
                parent: r.parent_id,
                children: Vec::new(),
                leaf_vertex: r.leaf_vertex,
                vol: r.vol,
                cut: r.cut,
            })
            .collect();
        let mut root = None;
        for (i, r) in self.nodes.iter().enumerate() {
            if r.id != i {
                return Err(Error::TreeMismatch(format!("record {i} has id {}", r.id)));
            }
            match r.parent_id {
                Some(p) if p < nodes.len() => nodes[p].children.push(i),
                Some(p) => return Err(Error::TreeMismatch(format!("unknown parent {p}"))),
                None => root = Some(i),
            }
        }
        let root = root.ok_or_else(|| Error::TreeMismatch("no root record".into()))?;
        EncodingTree::assemble(graph, nodes, root)
    }
}
