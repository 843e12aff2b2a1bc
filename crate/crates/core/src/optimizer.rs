//! Structural optimization: greedy construction of a low-entropy encoding tree
//! of bounded height.
//!
//! The construction runs in three phases.
//!
//! 1. **Merge.** Starting from the one-level tree, repeatedly take the pair of
//!    root children whose fusion under a new common parent lowers the entropy
//!    the most. Only pairs joined by a graph edge can lower it. When no fusion
//!    lowers the entropy, the remaining root children are fused pairwise with
//!    the smallest increase until the root has at most two children.
//! 2. **Compress.** While the tree is higher than `k`, splice out the internal
//!    node on an over-long root-to-leaf path whose removal raises the entropy
//!    the least.
//! 3. **Pad.** Insert unary nodes above shallow leaves so that every leaf sits
//!    at depth exactly `k`. Unary nodes do not change the entropy.
//!
//! Entropy deltas are evaluated from the terms of the nodes whose parent or
//! caches change; the caches are maintained incrementally.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::{weighted_neg_log2, Scalar};
use crate::tree::{one_level_tree, structural_entropy, EncodingTree, NodeId, TreeNode};

/// Rule used to order candidates with equal entropy deltas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Smallest `(min node id, max node id)` first.
    #[default]
    LexicographicIds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Target tree height (at least 2; the benchmarks use 2..=5).
    pub k: usize,
    pub tie_break: TieBreak,
    /// Record the entropy after every merge and compress step, not only after
    /// each phase.
    pub report_stats: bool,
}

impl OptimizerConfig {
    pub fn with_height(k: usize) -> Self {
        OptimizerConfig {
            k,
            tie_break: TieBreak::LexicographicIds,
            report_stats: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidInput(format!(
                "tree height must be at least 2, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Initial,
    Merge,
    Compress,
    Pad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint<S> {
    pub phase: Phase,
    pub entropy: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerStats<S> {
    pub merge_steps: usize,
    pub compress_steps: usize,
    /// Largest tree height seen while merging.
    pub max_intermediate_height: usize,
    /// Node count after compression, before padding.
    pub unpadded_node_count: usize,
    pub entropy_trace: Vec<TracePoint<S>>,
}

impl<S: Scalar> Default for OptimizerStats<S> {
    fn default() -> Self {
        OptimizerStats {
            merge_steps: 0,
            compress_steps: 0,
            max_intermediate_height: 0,
            unpadded_node_count: 0,
            entropy_trace: Vec::new(),
        }
    }
}

impl<S: Scalar> OptimizerStats<S> {
    fn push(&mut self, phase: Phase, entropy: S) {
        self.entropy_trace.push(TracePoint { phase, entropy });
    }

    /// Entropy values recorded for one phase, in order.
    pub fn trace_of(&self, phase: Phase) -> Vec<S> {
        self.entropy_trace
            .iter()
            .filter(|p| p.phase == phase)
            .map(|p| p.entropy)
            .collect()
    }

    pub fn final_entropy(&self) -> Option<S> {
        self.entropy_trace.last().map(|p| p.entropy)
    }
}

/// Mutable arena used while the tree is being reshaped. Dead nodes stay in the
/// arena until [`Work::finish`] renumbers the survivors.
struct Work<S> {
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    leaf_vertex: Vec<Option<usize>>,
    vol: Vec<S>,
    cut: Vec<S>,
    alive: Vec<bool>,
    root: NodeId,
}

impl<S: Scalar> Work<S> {
    fn from_tree(tree: EncodingTree<S>) -> Self {
        let (nodes, root) = tree.into_parts();
        let len = nodes.len();
        let mut w = Work {
            parent: Vec::with_capacity(len),
            children: Vec::with_capacity(len),
            leaf_vertex: Vec::with_capacity(len),
            vol: Vec::with_capacity(len),
            cut: Vec::with_capacity(len),
            alive: vec![true; len],
            root,
        };
        for n in nodes {
            w.parent.push(n.parent);
            w.children.push(n.children);
            w.leaf_vertex.push(n.leaf_vertex);
            w.vol.push(n.vol);
            w.cut.push(n.cut);
        }
        w
    }

    fn add_node(&mut self, parent: Option<NodeId>, vol: S, cut: S) -> NodeId {
        self.parent.push(parent);
        self.children.push(Vec::new());
        self.leaf_vertex.push(None);
        self.vol.push(vol);
        self.cut.push(cut);
        self.alive.push(true);
        self.parent.len() - 1
    }

    /// Entropy term of `x` if its parent had volume `parent_vol`.
    fn term(&self, x: NodeId, parent_vol: S, volume: S) -> S {
        weighted_neg_log2(self.cut[x] / volume, self.vol[x] / parent_vol)
    }

    /// Heights (leaves 0) and depths of live nodes.
    fn heights_and_depths(&self) -> (Vec<usize>, Vec<usize>) {
        let len = self.parent.len();
        let mut order = Vec::with_capacity(len);
        let mut depth = vec![0; len];
        let mut stack = vec![self.root];
        while let Some(x) = stack.pop() {
            order.push(x);
            for &c in &self.children[x] {
                depth[c] = depth[x] + 1;
                stack.push(c);
            }
        }
        let mut height = vec![0; len];
        for &x in order.iter().rev() {
            height[x] = self.children[x]
                .iter()
                .map(|&c| height[c] + 1)
                .max()
                .unwrap_or(0);
        }
        (height, depth)
    }

    /// Renumbers live nodes: leaves keep their ids (vertex order), internal
    /// nodes follow in breadth-first order from the root.
    fn finish(self, graph: &Graph<S>) -> Result<EncodingTree<S>> {
        let n = graph.vertex_count();
        let mut new_id = vec![usize::MAX; self.parent.len()];
        let mut leaf_count = 0;
        for (id, lv) in self.leaf_vertex.iter().enumerate() {
            if let (Some(v), true) = (lv, self.alive[id]) {
                new_id[id] = *v;
                leaf_count += 1;
            }
        }
        if leaf_count != n {
            return Err(Error::TreeMismatch(format!(
                "{leaf_count} live leaves for {n} vertices"
            )));
        }
        let mut next = n;
        let mut queue = std::collections::VecDeque::from([self.root]);
        let mut internal_order = Vec::new();
        while let Some(x) = queue.pop_front() {
            if self.leaf_vertex[x].is_none() {
                new_id[x] = next;
                next += 1;
                internal_order.push(x);
            }
            queue.extend(self.children[x].iter().copied());
        }
        let mut nodes: Vec<Option<TreeNode<S>>> = vec![None; next];
        for (old, &nid) in new_id.iter().enumerate() {
            if nid == usize::MAX || !self.alive[old] {
                continue;
            }
            nodes[nid] = Some(TreeNode {
                parent: self.parent[old].map(|p| new_id[p]),
                children: self.children[old].iter().map(|&c| new_id[c]).collect(),
                leaf_vertex: self.leaf_vertex[old],
                vol: self.vol[old],
                cut: self.cut[old],
            });
        }
        let nodes = nodes
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::TreeMismatch("detached live node".into()))?;
        EncodingTree::assemble(graph, nodes, new_id[self.root])
    }
}

/// Priority key: smaller delta first, then smaller id pair.
#[derive(Debug, Clone, Copy)]
struct Candidate<S> {
    delta: S,
    a: NodeId,
    b: NodeId,
}

impl<S: Scalar> PartialEq for Candidate<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Candidate<S> {}
impl<S: Scalar> PartialOrd for Candidate<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Candidate<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.delta
            .total_cmp_s(&other.delta)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Deltas above `-threshold` count as "no decrease".
fn decrease_threshold<S: Scalar>() -> S {
    S::epsilon() * S::lit(64.0)
}

struct Merger<'g, S> {
    graph: &'g Graph<S>,
    work: Work<S>,
    volume: S,
    /// Edge weight between root children.
    adjacency: Vec<BTreeMap<NodeId, S>>,
    /// Subtree height per node.
    height: Vec<usize>,
    entropy: S,
}

impl<'g, S: Scalar> Merger<'g, S> {
    fn new(graph: &'g Graph<S>) -> Result<Self> {
        let tree = one_level_tree(graph)?;
        let entropy = structural_entropy(graph, &tree)?;
        let n = graph.vertex_count();
        let mut adjacency: Vec<BTreeMap<NodeId, S>> = (0..n)
            .map(|v| graph.neighbors(v).iter().copied().collect())
            .collect();
        adjacency.push(BTreeMap::new());
        let mut height = vec![0; n];
        height.push(1);
        Ok(Merger {
            graph,
            work: Work::from_tree(tree),
            volume: graph.volume(),
            adjacency,
            height,
            entropy,
        })
    }

    fn is_root_child(&self, x: NodeId) -> bool {
        self.work.alive[x] && self.work.parent[x] == Some(self.work.root)
    }

    /// Entropy change of fusing root children `a` and `b` under a new node.
    fn fusion_delta(&self, a: NodeId, b: NodeId, weight: S) -> S {
        let w = &self.work;
        let v = self.volume;
        let fused_vol = w.vol[a] + w.vol[b];
        let fused_cut = w.cut[a] + w.cut[b] - weight - weight;
        let before = w.term(a, v, v) + w.term(b, v, v);
        let after = w.term(a, fused_vol, v)
            + w.term(b, fused_vol, v)
            + weighted_neg_log2(fused_cut / v, fused_vol / v);
        after - before
    }

    fn candidate(&self, a: NodeId, b: NodeId, weight: S) -> Candidate<S> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        Candidate {
            delta: self.fusion_delta(a, b, weight),
            a,
            b,
        }
    }

    fn fuse(&mut self, c: Candidate<S>) -> NodeId {
        let root = self.work.root;
        let weight = self.adjacency[c.a].get(&c.b).copied().unwrap_or(S::zero());
        let vol = self.work.vol[c.a] + self.work.vol[c.b];
        let cut = self.work.cut[c.a] + self.work.cut[c.b] - weight - weight;
        let p = self.work.add_node(Some(root), vol, cut.max(S::zero()));
        self.work.children[p] = vec![c.a, c.b];
        self.work.parent[c.a] = Some(p);
        self.work.parent[c.b] = Some(p);
        let rc = &mut self.work.children[root];
        rc.retain(|&x| x != c.a && x != c.b);
        rc.push(p);

        let mut merged = std::mem::take(&mut self.adjacency[c.a]);
        for (x, w) in std::mem::take(&mut self.adjacency[c.b]) {
            *merged.entry(x).or_insert(S::zero()) += w;
        }
        merged.remove(&c.a);
        merged.remove(&c.b);
        for (&x, &w) in &merged {
            let adj = &mut self.adjacency[x];
            adj.remove(&c.a);
            adj.remove(&c.b);
            adj.insert(p, w);
        }
        self.adjacency.push(merged);
        self.height.push(self.height[c.a].max(self.height[c.b]) + 1);
        self.entropy += c.delta;
        p
    }

    fn run(mut self, stats: &mut OptimizerStats<S>, report: bool) -> Result<EncodingTree<S>> {
        let threshold = decrease_threshold::<S>();
        let mut heap = BinaryHeap::new();
        for e in self.graph.edges() {
            heap.push(Reverse(self.candidate(e.u, e.v, e.weight)));
        }
        stats.max_intermediate_height = 1;
        while let Some(Reverse(c)) = heap.pop() {
            if !self.is_root_child(c.a) || !self.is_root_child(c.b) {
                continue;
            }
            if c.delta >= -threshold {
                break;
            }
            let p = self.fuse(c);
            stats.merge_steps += 1;
            stats.max_intermediate_height = stats.max_intermediate_height.max(self.height[p] + 1);
            if report {
                stats.push(Phase::Merge, self.entropy);
            }
            let neighbours: Vec<(NodeId, S)> =
                self.adjacency[p].iter().map(|(&x, &w)| (x, w)).collect();
            for (x, w) in neighbours {
                heap.push(Reverse(self.candidate(p, x, w)));
            }
        }

        // Reduce the root to at most two children.
        loop {
            let rc = self.work.children[self.work.root].clone();
            if rc.len() <= 2 {
                break;
            }
            let mut best: Option<Candidate<S>> = None;
            for (i, &a) in rc.iter().enumerate() {
                for &b in &rc[i + 1..] {
                    let w = self.adjacency[a].get(&b).copied().unwrap_or(S::zero());
                    let c = self.candidate(a, b, w);
                    if best.is_none_or(|x| c < x) {
                        best = Some(c);
                    }
                }
            }
            let p = self.fuse(best.expect("at least three root children"));
            stats.merge_steps += 1;
            stats.max_intermediate_height = stats.max_intermediate_height.max(self.height[p] + 1);
            if report {
                stats.push(Phase::Merge, self.entropy);
            }
        }
        self.work.finish(self.graph)
    }
}

/// Greedy binary merging from the one-level tree. See the module docs.
pub fn merge_phase<S: Scalar>(graph: &Graph<S>) -> Result<EncodingTree<S>> {
    let mut stats = OptimizerStats::default();
    merge_phase_with_stats(graph, &mut stats, false)
}

fn merge_phase_with_stats<S: Scalar>(
    graph: &Graph<S>,
    stats: &mut OptimizerStats<S>,
    report: bool,
) -> Result<EncodingTree<S>> {
    Merger::new(graph)?.run(stats, report)
}

/// Entropy change of splicing out internal node `x` (its children move to its
/// parent).
fn removal_delta<S: Scalar>(w: &Work<S>, x: NodeId, volume: S) -> S {
    let p = w.parent[x].expect("non-root");
    let parent_vol = w.vol[p];
    let mut delta = -w.term(x, parent_vol, volume);
    for &c in &w.children[x] {
        delta += w.term(c, parent_vol, volume) - w.term(c, w.vol[x], volume);
    }
    delta
}

fn splice_out<S: Scalar>(w: &mut Work<S>, x: NodeId) {
    let p = w.parent[x].expect("non-root");
    let kids = std::mem::take(&mut w.children[x]);
    for &c in &kids {
        w.parent[c] = Some(p);
    }
    let pos = w.children[p]
        .iter()
        .position(|&c| c == x)
        .expect("child listed under parent");
    w.children[p].splice(pos..=pos, kids);
    w.alive[x] = false;
    w.parent[x] = None;
}

fn compress_work<S: Scalar>(
    w: &mut Work<S>,
    k: usize,
    stats: &mut OptimizerStats<S>,
    report: bool,
    mut entropy: S,
) {
    let volume = w.vol[w.root];
    loop {
        let (height, depth) = w.heights_and_depths();
        if height[w.root] <= k {
            break;
        }
        let mut best: Option<(S, NodeId)> = None;
        for x in 0..w.parent.len() {
            if !w.alive[x] || x == w.root || w.leaf_vertex[x].is_some() {
                continue;
            }
            if depth[x] + height[x] <= k {
                continue;
            }
            let d = removal_delta(w, x, volume);
            let better = match best {
                None => true,
                Some((bd, bx)) => d.total_cmp_s(&bd).then(x.cmp(&bx)) == Ordering::Less,
            };
            if better {
                best = Some((d, x));
            }
        }
        let (d, x) = best.expect("an over-height tree has a removable node");
        splice_out(w, x);
        entropy += d;
        stats.compress_steps += 1;
        if report {
            stats.push(Phase::Compress, entropy);
        }
    }
}

/// Splices out internal nodes until the tree height is at most `k`, each time
/// choosing, among nodes on a root-to-leaf path longer than `k`, the one whose
/// removal increases the entropy least.
pub fn compress_phase<S: Scalar>(
    graph: &Graph<S>,
    tree: EncodingTree<S>,
    k: usize,
) -> Result<EncodingTree<S>> {
    if k == 0 {
        return Err(Error::InvalidInput("height must be positive".into()));
    }
    let mut stats = OptimizerStats::default();
    let mut w = Work::from_tree(tree);
    compress_work(&mut w, k, &mut stats, false, S::zero());
    w.finish(graph)
}

/// Inserts unary nodes directly above leaves shallower than `k` so that every
/// leaf ends up at depth exactly `k`.
pub fn pad_to_height<S: Scalar>(
    graph: &Graph<S>,
    tree: EncodingTree<S>,
    k: usize,
) -> Result<EncodingTree<S>> {
    let h = tree.height();
    if h > k {
        return Err(Error::HeightMismatch {
            expected: k,
            found: h,
        });
    }
    let depths = tree.depths();
    let mut w = Work::from_tree(tree);
    let leaves: Vec<NodeId> = (0..w.parent.len())
        .filter(|&x| w.leaf_vertex[x].is_some())
        .collect();
    for leaf in leaves {
        let missing = k - depths[leaf];
        if missing == 0 {
            continue;
        }
        let mut parent = w.parent[leaf].expect("a leaf below the root");
        let pos = w.children[parent]
            .iter()
            .position(|&c| c == leaf)
            .expect("leaf listed under parent");
        let (vol, cut) = (w.vol[leaf], w.cut[leaf]);
        let mut slot = Some(pos);
        for _ in 0..missing {
            let chain = w.add_node(Some(parent), vol, cut);
            match slot.take() {
                Some(i) => w.children[parent][i] = chain,
                None => w.children[parent].push(chain),
            }
            parent = chain;
        }
        w.children[parent].push(leaf);
        w.parent[leaf] = Some(parent);
    }
    w.finish(graph)
}

/// Optimizes a connected graph: merge, compress to height `k`, pad to exactly `k`.
pub fn optimize_encoding_tree<S: Scalar>(
    graph: &Graph<S>,
    config: &OptimizerConfig,
) -> Result<(EncodingTree<S>, OptimizerStats<S>)> {
    config.validate()?;
    if !(graph.volume() > S::zero()) {
        return Err(Error::DegenerateGraph);
    }
    if !graph.is_connected() {
        return Err(Error::InvalidInput(
            "graph is disconnected; use optimize_disconnected".into(),
        ));
    }
    let mut stats = OptimizerStats::default();
    let compressed = compress_connected(graph, config, &mut stats)?;
    finish_with_padding(graph, compressed, config.k, stats)
}

fn compress_connected<S: Scalar>(
    graph: &Graph<S>,
    config: &OptimizerConfig,
    stats: &mut OptimizerStats<S>,
) -> Result<EncodingTree<S>> {
    let initial = initial_entropy(graph)?;
    stats.push(Phase::Initial, initial);
    let merged = merge_phase_with_stats(graph, stats, config.report_stats)?;
    let merged_entropy = structural_entropy(graph, &merged)?;
    if !config.report_stats {
        stats.push(Phase::Merge, merged_entropy);
    }
    let mut w = Work::from_tree(merged);
    compress_work(&mut w, config.k, stats, config.report_stats, merged_entropy);
    let compressed = w.finish(graph)?;
    Ok(compressed)
}

fn initial_entropy<S: Scalar>(graph: &Graph<S>) -> Result<S> {
    structural_entropy(graph, &one_level_tree(graph)?)
}

fn finish_with_padding<S: Scalar>(
    graph: &Graph<S>,
    compressed: EncodingTree<S>,
    k: usize,
    mut stats: OptimizerStats<S>,
) -> Result<(EncodingTree<S>, OptimizerStats<S>)> {
    stats.unpadded_node_count = compressed.node_count();
    stats.push(Phase::Compress, structural_entropy(graph, &compressed)?);
    let padded = pad_to_height(graph, compressed, k)?;
    stats.push(Phase::Pad, structural_entropy(graph, &padded)?);
    Ok((padded, stats))
}

/// Optimizes each connected component separately and merges the component
/// roots into one global root. Isolated vertices become children of the global
/// root. The result is padded to height `k`.
pub fn optimize_disconnected<S: Scalar>(
    graph: &Graph<S>,
    config: &OptimizerConfig,
) -> Result<(EncodingTree<S>, OptimizerStats<S>)> {
    config.validate()?;
    let volume = graph.volume();
    if !(volume > S::zero()) {
        return Err(Error::DegenerateGraph);
    }
    let components = graph.components();
    if components.len() == 1 {
        return optimize_encoding_tree(graph, config);
    }

    let mut stats = OptimizerStats::default();
    stats.push(Phase::Initial, initial_entropy(graph)?);
    let n = graph.vertex_count();
    // Leaves first (id = vertex), global root at n.
    let mut w = Work {
        parent: vec![Some(n); n],
        children: vec![Vec::new(); n],
        leaf_vertex: (0..n).map(Some).collect(),
        vol: graph.degrees().to_vec(),
        cut: graph.degrees().to_vec(),
        alive: vec![true; n],
        root: n,
    };
    w.add_node(None, volume, S::zero());
    for comp in &components {
        if comp.len() == 1 {
            w.children[n].push(comp[0]);
            continue;
        }
        let sub = graph.induced_subgraph(comp)?;
        let mut sub_stats = OptimizerStats::default();
        let tree = compress_connected(&sub, config, &mut sub_stats)?;
        stats.merge_steps += sub_stats.merge_steps;
        stats.compress_steps += sub_stats.compress_steps;
        stats.max_intermediate_height = stats
            .max_intermediate_height
            .max(sub_stats.max_intermediate_height);
        graft(&mut w, &tree, comp);
    }
    let merged = w.finish(graph)?;
    stats.push(Phase::Merge, structural_entropy(graph, &merged)?);
    finish_with_padding(graph, merged, config.k, stats)
}

/// Copies the non-root nodes of `tree` (built on the subgraph induced by
/// `vertices`) under the root of `w`.
fn graft<S: Scalar>(w: &mut Work<S>, tree: &EncodingTree<S>, vertices: &[usize]) {
    let mut map = vec![usize::MAX; tree.node_count()];
    for (local, &v) in vertices.iter().enumerate() {
        map[tree.leaf_of(local)] = v;
    }
    map[tree.root()] = w.root;
    let mut stack = vec![tree.root()];
    while let Some(x) = stack.pop() {
        let into = map[x];
        for &c in &tree.node(x).children {
            let node = tree.node(c);
            let id = if node.is_leaf() {
                let id = map[c];
                w.parent[id] = Some(into);
                id
            } else {
                let id = w.add_node(Some(into), node.vol, node.cut);
                map[c] = id;
                id
            };
            w.children[into].push(id);
            stack.push(c);
        }
    }
}

/// Optimizes any graph with at least one edge, dispatching on connectivity.
pub fn optimize<S: Scalar>(
    graph: &Graph<S>,
    config: &OptimizerConfig,
) -> Result<(EncodingTree<S>, OptimizerStats<S>)> {
    optimize_disconnected(graph, config)
}
