//! Hierarchical reporting over encoding trees and the WL-ET tree kernel.
//!
//! Leaves carry their initial vertex labels. A node at height `i > 0` is
//! labelled by the sorted multiset of its children's labels, compressed to a
//! fresh integer through a [`LabelDictionary`] shared by the whole dataset.
//! The feature vector of a tree counts every label at every height (leaves
//! included) and the kernel of two trees is the inner product of their
//! feature vectors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::InitialLabeling;
use crate::scalar::Scalar;
use crate::tree::{EncodingTree, NodeId};

pub type LabelId = u32;

static NEXT_DICTIONARY: AtomicU64 = AtomicU64::new(1);

/// Injective compression of label strings to integers.
///
/// Keys are prefixed with their height, so the alphabets of different heights
/// never share an id. The dictionary grows during a sequential interning pass
/// and can then be frozen for concurrent read-only use.
#[derive(Debug, Clone)]
pub struct LabelDictionary {
    token: u64,
    ids: HashMap<String, LabelId>,
    keys: Vec<String>,
    height_of: Vec<usize>,
    frozen: bool,
}

impl Default for LabelDictionary {
    fn default() -> Self {
        Self::new()
    }
}

impl LabelDictionary {
    pub fn new() -> Self {
        LabelDictionary {
            token: NEXT_DICTIONARY.fetch_add(1, Ordering::Relaxed),
            ids: HashMap::new(),
            keys: Vec::new(),
            height_of: Vec::new(),
            frozen: false,
        }
    }

    fn key(height: usize, body: &str) -> String {
        format!("{height}:{body}")
    }

    /// Id for `body` at `height`, issuing a new one unless frozen.
    pub fn intern(&mut self, height: usize, body: &str) -> Result<LabelId> {
        let key = Self::key(height, body);
        if let Some(&id) = self.ids.get(&key) {
            return Ok(id);
        }
        if self.frozen {
            return Err(Error::UnknownLabel(key));
        }
        let id = LabelId::try_from(self.keys.len())
            .map_err(|_| Error::Numerical("label dictionary overflow".into()))?;
        self.ids.insert(key.clone(), id);
        self.keys.push(key);
        self.height_of.push(height);
        Ok(id)
    }

    pub fn lookup(&self, height: usize, body: &str) -> Result<LabelId> {
        let key = Self::key(height, body);
        self.ids.get(&key).copied().ok_or(Error::UnknownLabel(key))
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Number of distinct labels, i.e. the feature-space dimension.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// The interned string for `id` (`"height:body"`).
    pub fn key_of(&self, id: LabelId) -> &str {
        &self.keys[id as usize]
    }

    pub fn height_of(&self, id: LabelId) -> usize {
        self.height_of[id as usize]
    }

    /// Ids issued at `height`, ascending.
    pub fn alphabet(&self, height: usize) -> Vec<LabelId> {
        (0..self.keys.len() as LabelId)
            .filter(|&id| self.height_of[id as usize] == height)
            .collect()
    }

    pub(crate) fn token(&self) -> u64 {
        self.token
    }
}

/// Per-height label histogram of one encoding tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    dictionary: u64,
    /// `per_height[i]` holds `(label, count)` sorted by label.
    per_height: Vec<Vec<(LabelId, u32)>>,
}

impl FeatureVector {
    pub fn height(&self) -> usize {
        self.per_height.len().saturating_sub(1)
    }

    pub fn counts_at(&self, height: usize) -> &[(LabelId, u32)] {
        self.per_height.get(height).map_or(&[], Vec::as_slice)
    }

    pub fn total_at(&self, height: usize) -> u64 {
        self.counts_at(height).iter().map(|&(_, c)| c as u64).sum()
    }

    /// `(height, label, count)` triples in height-then-label order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, LabelId, u32)> + '_ {
        self.per_height
            .iter()
            .enumerate()
            .flat_map(|(h, v)| v.iter().map(move |&(l, c)| (h, l, c)))
    }

    pub fn squared_norm(&self) -> u64 {
        self.entries().map(|(_, _, c)| (c as u64) * (c as u64)).sum()
    }

    pub fn sum(&self) -> u64 {
        self.entries().map(|(_, _, c)| c as u64).sum()
    }

    /// Sparse text form: space-separated `height:label:count` triples.
    pub fn to_sparse_string(&self) -> String {
        let mut s = String::new();
        for (h, l, c) in self.entries() {
            if !s.is_empty() {
                s.push(' ');
            }
            let _ = write!(s, "{h}:{l}:{c}");
        }
        s
    }

    fn check_same_dictionary(&self, other: &Self) -> Result<()> {
        if self.dictionary != other.dictionary {
            return Err(Error::DictionaryMismatch);
        }
        Ok(())
    }
}

fn sparse_dot(a: &[(LabelId, u32)], b: &[(LabelId, u32)]) -> u64 {
    let (mut i, mut j, mut acc) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 as u64 * b[j].1 as u64;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

fn sparse_sq_distance(a: &[(LabelId, u32)], b: &[(LabelId, u32)]) -> u64 {
    let (mut i, mut j, mut acc) = (0, 0, 0u64);
    let sq = |x: u32| (x as u64) * (x as u64);
    while i < a.len() || j < b.len() {
        let la = a.get(i).map(|x| x.0);
        let lb = b.get(j).map(|x| x.0);
        match (la, lb) {
            (Some(x), Some(y)) if x == y => {
                acc += sq(a[i].1.abs_diff(b[j].1));
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                acc += sq(a[i].1);
                i += 1;
            }
            (Some(_), None) => {
                acc += sq(a[i].1);
                i += 1;
            }
            _ => {
                acc += sq(b[j].1);
                j += 1;
            }
        }
    }
    acc
}

/// Work counters of one reporting pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportStats {
    pub node_visits: usize,
}

/// Nodes of a uniform-depth tree grouped by height (index 0 = leaves).
fn levels<S: Scalar>(tree: &EncodingTree<S>) -> Result<Vec<Vec<NodeId>>> {
    if !tree.is_uniform() {
        return Err(Error::NonUniformHeight);
    }
    let h = tree.height();
    let depths = tree.depths();
    let mut levels = vec![Vec::new(); h + 1];
    for (id, &d) in depths.iter().enumerate() {
        levels[h - d].push(id);
    }
    Ok(levels)
}

fn check_labels<S: Scalar>(tree: &EncodingTree<S>, labels: &InitialLabeling) -> Result<()> {
    if labels.label_of.len() != tree.leaf_count() {
        return Err(Error::TreeMismatch(format!(
            "{} initial labels for {} leaves",
            labels.label_of.len(),
            tree.leaf_count()
        )));
    }
    Ok(())
}

/// Labels of one level, resolved through `resolve(height, body)`.
fn label_level<S: Scalar>(
    tree: &EncodingTree<S>,
    labels: &InitialLabeling,
    height: usize,
    level: &[NodeId],
    node_label: &mut [LabelId],
    buf: &mut Vec<LabelId>,
    resolve: &mut impl FnMut(usize, &str) -> Result<LabelId>,
) -> Result<()> {
    let mut body = String::new();
    for &x in level {
        body.clear();
        let node = tree.node(x);
        if height == 0 {
            let v = node.leaf_vertex.expect("height-0 nodes are leaves");
            let _ = write!(body, "{}", labels.label_of[v]);
        } else {
            buf.clear();
            buf.extend(node.children.iter().map(|&c| node_label[c]));
            buf.sort_unstable();
            for (i, l) in buf.iter().enumerate() {
                if i > 0 {
                    body.push(',');
                }
                let _ = write!(body, "{l}");
            }
        }
        node_label[x] = resolve(height, &body)?;
    }
    Ok(())
}

fn histogram(levels: &[Vec<NodeId>], node_label: &[LabelId], token: u64) -> FeatureVector {
    let per_height = levels
        .iter()
        .map(|level| {
            let mut ls: Vec<LabelId> = level.iter().map(|&x| node_label[x]).collect();
            ls.sort_unstable();
            let mut out: Vec<(LabelId, u32)> = Vec::new();
            for l in ls {
                match out.last_mut() {
                    Some((last, c)) if *last == l => *c += 1,
                    _ => out.push((l, 1)),
                }
            }
            out
        })
        .collect();
    FeatureVector {
        dictionary: token,
        per_height,
    }
}

fn report<S: Scalar>(
    tree: &EncodingTree<S>,
    labels: &InitialLabeling,
    token: u64,
    mut resolve: impl FnMut(usize, &str) -> Result<LabelId>,
) -> Result<(FeatureVector, ReportStats)> {
    check_labels(tree, labels)?;
    let levels = levels(tree)?;
    let mut node_label = vec![0; tree.node_count()];
    let mut buf = Vec::new();
    let mut stats = ReportStats::default();
    for (height, level) in levels.iter().enumerate() {
        label_level(tree, labels, height, level, &mut node_label, &mut buf, &mut resolve)?;
        stats.node_visits += level.len();
    }
    Ok((histogram(&levels, &node_label, token), stats))
}

/// Runs hierarchical reporting on one tree, interning new labels into `dict`.
pub fn hierarchical_reporting<S: Scalar>(
    tree: &EncodingTree<S>,
    labels: &InitialLabeling,
    dict: &mut LabelDictionary,
) -> Result<FeatureVector> {
    hierarchical_reporting_with_stats(tree, labels, dict).map(|(fv, _)| fv)
}

/// [`hierarchical_reporting`] plus the number of tree nodes visited.
pub fn hierarchical_reporting_with_stats<S: Scalar>(
    tree: &EncodingTree<S>,
    labels: &InitialLabeling,
    dict: &mut LabelDictionary,
) -> Result<(FeatureVector, ReportStats)> {
    let token = dict.token();
    report(tree, labels, token, |h, b| dict.intern(h, b))
}

/// Reporting against a read-only dictionary; labels it has never seen are an
/// error. Safe to run concurrently.
pub fn hierarchical_reporting_frozen<S: Scalar>(
    tree: &EncodingTree<S>,
    labels: &InitialLabeling,
    dict: &LabelDictionary,
) -> Result<FeatureVector> {
    report(tree, labels, dict.token(), |h, b| dict.lookup(h, b)).map(|(fv, _)| fv)
}

/// Feature vectors of a whole dataset.
///
/// Labels are interned level by level across all trees (every tree's height-0
/// labels, then every tree's height-1 labels, ...), so each height's alphabet
/// occupies a contiguous id range. The dictionary is then frozen and the
/// histograms are counted in parallel.
pub fn feature_vectors<S: Scalar>(
    trees: &[EncodingTree<S>],
    labelings: &[InitialLabeling],
    dict: &mut LabelDictionary,
) -> Result<Vec<FeatureVector>> {
    if trees.len() != labelings.len() {
        return Err(Error::InvalidInput(format!(
            "{} trees but {} labelings",
            trees.len(),
            labelings.len()
        )));
    }
    let h = common_height(trees)?;
    let all_levels = trees.iter().map(levels).collect::<Result<Vec<_>>>()?;
    let mut node_labels: Vec<Vec<LabelId>> =
        trees.iter().map(|t| vec![0; t.node_count()]).collect();
    for (t, l) in trees.iter().zip(labelings) {
        check_labels(t, l)?;
    }
    let mut buf = Vec::new();
    for height in 0..=h {
        for (i, tree) in trees.iter().enumerate() {
            label_level(
                tree,
                &labelings[i],
                height,
                &all_levels[i][height],
                &mut node_labels[i],
                &mut buf,
                &mut |hh, b| dict.intern(hh, b),
            )?;
        }
    }
    dict.freeze();
    let dict = &*dict;
    trees
        .par_iter()
        .zip(labelings.par_iter())
        .map(|(t, l)| hierarchical_reporting_frozen(t, l, dict))
        .collect()
}

fn common_height<S: Scalar>(trees: &[EncodingTree<S>]) -> Result<usize> {
    let h = trees.first().map_or(0, EncodingTree::height);
    for t in trees {
        if t.height() != h {
            return Err(Error::HeightMismatch {
                expected: h,
                found: t.height(),
            });
        }
    }
    Ok(h)
}

/// Inner product of two feature vectors.
pub fn kernel_value<S: Scalar>(a: &FeatureVector, b: &FeatureVector) -> Result<S> {
    a.check_same_dictionary(b)?;
    let dot: u64 = a
        .per_height
        .iter()
        .zip(&b.per_height)
        .map(|(x, y)| sparse_dot(x, y))
        .sum();
    S::from_u64(dot).ok_or_else(|| Error::Numerical("kernel value overflow".into()))
}

/// Squared Euclidean distance between two feature vectors.
pub fn squared_distance<S: Scalar>(a: &FeatureVector, b: &FeatureVector) -> Result<S> {
    a.check_same_dictionary(b)?;
    let depth = a.per_height.len().max(b.per_height.len());
    let empty = Vec::new();
    let d: u64 = (0..depth)
        .map(|i| {
            sparse_sq_distance(
                a.per_height.get(i).unwrap_or(&empty),
                b.per_height.get(i).unwrap_or(&empty),
            )
        })
        .sum();
    S::from_u64(d).ok_or_else(|| Error::Numerical("distance overflow".into()))
}

/// `exp(-gamma * ||a - b||^2)`.
pub fn rbf_on_features<S: Scalar>(a: &FeatureVector, b: &FeatureVector, gamma: S) -> Result<S> {
    Ok((-gamma * squared_distance::<S>(a, b)?).exp())
}

/// Dataset-wide rule for the RBF width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaPolicy {
    /// `1 / n_features`.
    Auto,
    /// `1 / (n_features * Var(X))`, the variance taken over all entries of the
    /// dense feature matrix.
    Scale,
}

/// Which kernel the classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    /// The plain inner product of feature vectors.
    Linear,
    RbfAuto,
    RbfScale,
}

impl KernelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelMode::Linear => "linear",
            KernelMode::RbfAuto => "rbf-auto",
            KernelMode::RbfScale => "rbf-scale",
        }
    }

    pub fn gamma_policy(self) -> Option<GammaPolicy> {
        match self {
            KernelMode::Linear => None,
            KernelMode::RbfAuto => Some(GammaPolicy::Auto),
            KernelMode::RbfScale => Some(GammaPolicy::Scale),
        }
    }
}

impl std::fmt::Display for KernelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelMode::Linear),
            "rbf-auto" => Ok(KernelMode::RbfAuto),
            "rbf-scale" => Ok(KernelMode::RbfScale),
            other => Err(Error::InvalidInput(format!(
                "unknown kernel {other:?} (expected linear, rbf-auto or rbf-scale)"
            ))),
        }
    }
}

/// Whether feature vectors are scaled to unit length before the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureScaling {
    #[default]
    Raw,
    L2,
}

/// Resolves the RBF width for a dataset. `n_features` is the dictionary size.
///
/// A zero variance under [`GammaPolicy::Scale`] falls back to `Auto`.
pub fn resolve_gamma<S: Scalar>(
    features: &[FeatureVector],
    n_features: usize,
    policy: GammaPolicy,
    scaling: FeatureScaling,
) -> Result<S> {
    if n_features == 0 {
        return Err(Error::InvalidInput("empty feature space".into()));
    }
    let f = n_features as f64;
    let auto = 1.0 / f;
    let gamma = match policy {
        GammaPolicy::Auto => auto,
        GammaPolicy::Scale => {
            let cells = features.len() as f64 * f;
            let (sum, sum_sq) = features.iter().fold((0.0, 0.0), |(s, q), fv| {
                let norm = (fv.squared_norm() as f64).sqrt();
                match scaling {
                    FeatureScaling::Raw => (s + fv.sum() as f64, q + fv.squared_norm() as f64),
                    FeatureScaling::L2 if norm > 0.0 => (s + fv.sum() as f64 / norm, q + 1.0),
                    FeatureScaling::L2 => (s, q),
                }
            });
            let mean = sum / cells;
            let var = sum_sq / cells - mean * mean;
            if var > 0.0 {
                1.0 / (f * var)
            } else {
                log::warn!("feature variance is zero; using gamma = 1/n_features");
                auto
            }
        }
    };
    Ok(S::lit(gamma))
}

/// Dense symmetric `N x N` kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<S> {
    n: usize,
    values: Vec<S>,
}

impl<S: Scalar> KernelMatrix<S> {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> S + Sync) -> Self {
        let rows: Vec<Vec<S>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| if j < i { S::zero() } else { f(i, j) }).collect())
            .collect();
        let mut values: Vec<S> = rows.into_iter().flatten().collect();
        for i in 0..n {
            for j in 0..i {
                values[i * n + j] = values[j * n + i];
            }
        }
        KernelMatrix { n, values }
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("kernel matrix is not square".into()));
        }
        Ok(KernelMatrix {
            n,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> S {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Rows `rows`, columns `cols`, as a dense row-major block.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Vec<Vec<S>> {
        rows.iter()
            .map(|&i| cols.iter().map(|&j| self.get(i, j)).collect())
            .collect()
    }

    /// Principal submatrix on `idx`.
    pub fn restrict(&self, idx: &[usize]) -> KernelMatrix<S> {
        KernelMatrix {
            n: idx.len(),
            values: idx
                .iter()
                .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
                .map(|(i, j)| self.get(i, j))
                .collect(),
        }
    }

    /// Plain-text form: a header line `N=<n> dataset=<name> kernel=<mode>`
    /// followed by `n` rows of `n` space-separated decimals.
    pub fn to_text(&self, dataset: &str, mode: &str) -> String {
        let mut s = format!("N={} dataset={} kernel={}\n", self.n, dataset, mode);
        for i in 0..self.n {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses [`KernelMatrix::to_text`] output, returning the matrix, the
    /// dataset name and the kernel mode string.
    pub fn from_text(text: &str) -> Result<(Self, String, String)> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty gram file".into()))?;
        let mut n = None;
        let mut dataset = String::new();
        let mut mode = String::new();
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("N", v)) => n = v.parse::<usize>().ok(),
                Some(("dataset", v)) => dataset = v.to_string(),
                Some(("kernel", v)) => mode = v.to_string(),
                _ => {}
            }
        }
        let n = n.ok_or_else(|| Error::InvalidInput("gram header lacks N".into()))?;
        let rows = lines
            .take(n)
            .map(|l| {
                l.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map(S::lit)
                            .map_err(|_| Error::InvalidInput(format!("bad number {t:?}")))
                    })
                    .collect::<Result<Vec<S>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.len() != n {
            return Err(Error::InvalidInput("gram file has too few rows".into()));
        }
        Ok((Self::from_rows(rows)?, dataset, mode))
    }
}

/// Linear (inner-product) Gram matrix of feature vectors.
pub fn linear_gram<S: Scalar>(features: &[FeatureVector]) -> Result<KernelMatrix<S>> {
    check_one_dictionary(features)?;
    Ok(KernelMatrix::from_fn(features.len(), |i, j| {
        kernel_value(&features[i], &features[j]).expect("same dictionary")
    }))
}

fn check_one_dictionary(features: &[FeatureVector]) -> Result<()> {
    if let Some(first) = features.first() {
        for fv in features {
            first.check_same_dictionary(fv)?;
        }
    }
    Ok(())
}

/// Gram matrix for `mode`, optionally on L2-normalised features.
pub fn kernel_gram<S: Scalar>(
    features: &[FeatureVector],
    n_features: usize,
    mode: KernelMode,
    scaling: FeatureScaling,
) -> Result<KernelMatrix<S>> {
    let linear = linear_gram::<S>(features)?;
    let n = features.len();
    let norm: Vec<S> = (0..n).map(|i| linear.get(i, i).sqrt()).collect();
    let cosine = |i: usize, j: usize| {
        let d = norm[i] * norm[j];
        if d > S::zero() {
            linear.get(i, j) / d
        } else {
            S::zero()
        }
    };
    match (mode.gamma_policy(), scaling) {
        (None, FeatureScaling::Raw) => Ok(linear),
        (None, FeatureScaling::L2) => Ok(KernelMatrix::from_fn(n, cosine)),
        (Some(policy), scaling) => {
            let gamma: S = resolve_gamma(features, n_features, policy, scaling)?;
            let unit = |i: usize| if norm[i] > S::zero() { S::one() } else { S::zero() };
            Ok(KernelMatrix::from_fn(n, |i, j| {
                let d2 = match scaling {
                    FeatureScaling::Raw => {
                        squared_distance::<S>(&features[i], &features[j]).expect("same dictionary")
                    }
                    FeatureScaling::L2 => {
                        (unit(i) + unit(j) - cosine(i, j) - cosine(i, j)).max(S::zero())
                    }
                };
                (-gamma * d2).exp()
            }))
        }
    }
}

/// Linear WL-ET Gram matrix of a dataset of equal-height trees.
pub fn gram_matrix<S: Scalar>(
    trees: &[EncodingTree<S>],
    labelings: &[InitialLabeling],
    dict: &mut LabelDictionary,
) -> Result<KernelMatrix<S>> {
    let fvs = feature_vectors(trees, labelings, dict)?;
    linear_gram(&fvs)
}
