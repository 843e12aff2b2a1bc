//! Weighted undirected graphs and datasets of labelled graphs.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An undirected weighted edge, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge<S> {
    pub u: usize,
    pub v: usize,
    pub weight: S,
}

/// A weighted undirected simple graph with optional categorical vertex labels
/// and the class label of the whole graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<S> {
    vertex_count: usize,
    edges: Vec<Edge<S>>,
    adjacency: Vec<Vec<(usize, S)>>,
    degree: Vec<S>,
    categories: Option<Vec<u32>>,
    class: usize,
}

impl<S: Scalar> Graph<S> {
    /// Builds a graph from `(u, v, weight)` triples.
    ///
    /// Repeated pairs (in either orientation) collapse to the first occurrence.
    /// Self-loops, out-of-range endpoints and negative or non-finite weights are
    /// rejected.
    pub fn from_edges(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize, S)>,
        categories: Option<Vec<u32>>,
        class: usize,
    ) -> Result<Self> {
        if let Some(c) = &categories {
            if c.len() != vertex_count {
                return Err(Error::InvalidInput(format!(
                    "{} categorical labels for {} vertices",
                    c.len(),
                    vertex_count
                )));
            }
        }
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        for (a, b, w) in edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) out of range for {vertex_count} vertices"
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop on vertex {a}")));
            }
            if !(w >= S::zero()) || !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) has invalid weight {w}"
                )));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if seen.insert((u, v)) {
                kept.push(Edge { u, v, weight: w });
            }
        }
        kept.sort_by_key(|e| (e.u, e.v));

        let mut adjacency = vec![Vec::new(); vertex_count];
        let mut degree = vec![S::zero(); vertex_count];
        for e in &kept {
            adjacency[e.u].push((e.v, e.weight));
            adjacency[e.v].push((e.u, e.weight));
            degree[e.u] += e.weight;
            degree[e.v] += e.weight;
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(x, _)| x);
        }
        Ok(Graph {
            vertex_count,
            edges: kept,
            adjacency,
            degree,
            categories,
            class,
        })
    }

    /// Unweighted convenience constructor (every weight 1), class 0.
    pub fn unweighted(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(
            vertex_count,
            edges.iter().map(|&(u, v)| (u, v, S::one())),
            None,
            0,
        )
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, S)] {
        &self.adjacency[v]
    }

    /// Weighted degree `d_v`.
    pub fn degree(&self, v: usize) -> S {
        self.degree[v]
    }

    pub fn degrees(&self) -> &[S] {
        &self.degree
    }

    /// `vol(V)`, the sum of all degrees.
    pub fn volume(&self) -> S {
        self.degree.iter().copied().sum()
    }

    pub fn categories(&self) -> Option<&[u32]> {
        self.categories.as_deref()
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn with_class(mut self, class: usize) -> Self {
        self.class = class;
        self
    }

    pub fn with_categories(mut self, categories: Vec<u32>) -> Result<Self> {
        if categories.len() != self.vertex_count {
            return Err(Error::InvalidInput(format!(
                "{} categorical labels for {} vertices",
                categories.len(),
                self.vertex_count
            )));
        }
        self.categories = Some(categories);
        Ok(self)
    }

    /// Connected components, each sorted ascending, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.vertex_count];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..self.vertex_count {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(x) = queue.pop_front() {
                comp.push(x);
                for &(y, _) in &self.adjacency[x] {
                    if !seen[y] {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count <= 1 || self.components().len() == 1
    }

    /// Subgraph induced by `vertices` (renumbered in the given order).
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Result<Self> {
        let mut local = vec![usize::MAX; self.vertex_count];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let edges = self.edges.iter().filter_map(|e| {
            let (a, b) = (local[e.u], local[e.v]);
            (a != usize::MAX && b != usize::MAX).then_some((a, b, e.weight))
        });
        let categories = self
            .categories
            .as_ref()
            .map(|c| vertices.iter().map(|&v| c[v]).collect());
        Self::from_edges(vertices.len(), edges, categories, self.class)
    }
}

/// An ordered collection of graphs with dense class labels `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    pub name: String,
    graphs: Vec<Graph<S>>,
    class_count: usize,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(name: impl Into<String>, graphs: Vec<Graph<S>>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::InvalidInput("dataset has no graphs".into()));
        }
        let class_count = graphs.iter().map(|g| g.class + 1).max().unwrap_or(0);
        Ok(Dataset {
            name: name.into(),
            graphs,
            class_count,
        })
    }

    pub fn graphs(&self) -> &[Graph<S>] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn classes(&self) -> Vec<usize> {
        self.graphs.iter().map(Graph::class).collect()
    }

    pub fn has_categories(&self) -> bool {
        self.graphs.iter().all(|g| g.categories.is_some())
    }

    pub fn mean_vertex_count(&self) -> f64 {
        let total: usize = self.graphs.iter().map(Graph::vertex_count).sum();
        total as f64 / self.graphs.len() as f64
    }

    pub fn max_vertex_count(&self) -> usize {
        self.graphs
            .iter()
            .map(Graph::vertex_count)
            .max()
            .unwrap_or(0)
    }
}

/// How vertices are labelled before hierarchical reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// Vertex degree only (social networks).
    Degree,
    /// Interned `(degree, categorical label)` pair (bioinformatics).
    DegreeAndCategory,
}

/// Initial per-vertex labels for one graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialLabeling {
    pub mode: LabelMode,
    pub label_of: Vec<u32>,
}

/// Assigns dataset-wide initial labels.
///
/// Keys `(degree[, category])` are collected over the whole dataset, sorted and
/// numbered from 0, so equal keys in different graphs get equal labels.
pub fn assign_initial_labels<S: Scalar>(
    dataset: &Dataset<S>,
    mode: LabelMode,
) -> Result<Vec<InitialLabeling>> {
    label_graphs(dataset.graphs(), mode)
}

pub(crate) fn label_graphs<S: Scalar>(
    graphs: &[Graph<S>],
    mode: LabelMode,
) -> Result<Vec<InitialLabeling>> {
    let key = |g: &Graph<S>, v: usize| -> (u64, Option<u32>) {
        // Degrees are nonnegative, so the IEEE bit pattern orders them correctly.
        let d = g.degree(v).as_f64().to_bits();
        match mode {
            LabelMode::Degree => (d, None),
            LabelMode::DegreeAndCategory => (d, g.categories().map(|c| c[v])),
        }
    };
    if mode == LabelMode::DegreeAndCategory && graphs.iter().any(|g| g.categories().is_none()) {
        return Err(Error::MissingCategories);
    }
    let mut table = BTreeMap::new();
    for g in graphs {
        for v in 0..g.vertex_count() {
            table.insert(key(g, v), 0u32);
        }
    }
    for (i, slot) in table.values_mut().enumerate() {
        *slot = i as u32;
    }
    Ok(graphs
        .iter()
        .map(|g| InitialLabeling {
            mode,
            label_of: (0..g.vertex_count()).map(|v| table[&key(g, v)]).collect(),
        })
        .collect())
}
