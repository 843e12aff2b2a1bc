//! Dataset-level plumbing: trees for every graph, features, kernels, CV.

use rayon::prelude::*;

use crate::cv::{cross_validate_kernels, CvConfig, CvReport, KernelCandidate};
use crate::error::{Error, Result};
use crate::graph::{label_graphs, Dataset, Graph, InitialLabeling, LabelMode};
use crate::kernel::{feature_vectors, kernel_gram, FeatureVector, KernelMatrix, KernelMode, LabelDictionary};
use crate::optimizer::{optimize, OptimizerConfig, OptimizerStats};
use crate::scalar::Scalar;
use crate::tree::{one_level_tree, structural_entropy, EncodingTree};

/// Degree plus category when the dataset has categorical vertex labels,
/// degree alone otherwise.
pub fn default_label_mode<S: Scalar>(dataset: &Dataset<S>) -> LabelMode {
    if dataset.has_categories() {
        LabelMode::DegreeAndCategory
    } else {
        LabelMode::Degree
    }
}

/// A root over one unary chain of length `k - 1` per vertex. Used for edgeless
/// graphs; at `k = 1` it is the one-level tree of any graph.
pub fn chain_tree<S: Scalar>(graph: &Graph<S>, k: usize) -> Result<EncodingTree<S>> {
    let n = graph.vertex_count();
    let root = n;
    let mut parents = vec![None; n + 1];
    let mut leaves: Vec<Option<usize>> = (0..n).map(Some).collect();
    leaves.push(None);
    for v in 0..n {
        let mut below = v;
        for _ in 1..k {
            parents.push(None);
            leaves.push(None);
            let id = parents.len() - 1;
            parents[below] = Some(id);
            below = id;
        }
        parents[below] = Some(root);
    }
    EncodingTree::from_parents(graph, &parents, &leaves)
}

/// One optimized tree per graph, built in parallel.
#[derive(Debug, Clone)]
pub struct TreeSet<S> {
    pub height: usize,
    pub trees: Vec<EncodingTree<S>>,
    /// `None` where nothing was optimized (edgeless graphs, height 1).
    pub stats: Vec<Option<OptimizerStats<S>>>,
}

impl<S: Scalar> TreeSet<S> {
    /// Mean one-level and optimized entropies over graphs with edges.
    pub fn mean_entropies(&self, dataset: &Dataset<S>) -> Result<(f64, f64)> {
        let mut before = 0.0;
        let mut after = 0.0;
        let mut count = 0usize;
        for (g, t) in dataset.graphs().iter().zip(&self.trees) {
            if g.volume() > S::zero() {
                before += structural_entropy(g, &one_level_tree(g)?)?.as_f64();
                after += structural_entropy(g, t)?.as_f64();
                count += 1;
            }
        }
        let c = count.max(1) as f64;
        Ok((before / c, after / c))
    }
}

/// Height 1 has a single candidate per graph, the one-level tree, so nothing
/// is optimized there.
pub fn build_trees<S: Scalar>(dataset: &Dataset<S>, k: usize) -> Result<TreeSet<S>> {
    if k == 0 {
        return Err(Error::InvalidInput("tree height must be at least 1".into()));
    }
    let cfg = OptimizerConfig::with_height(k);
    let built = dataset
        .graphs()
        .par_iter()
        .map(|g| {
            if k == 1 {
                chain_tree(g, 1).map(|t| (t, None))
            } else if g.volume() > S::zero() {
                optimize(g, &cfg).map(|(t, s)| (t, Some(s)))
            } else {
                chain_tree(g, k).map(|t| (t, None))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (trees, stats) = built.into_iter().unzip();
    Ok(TreeSet {
        height: k,
        trees,
        stats,
    })
}

/// Trees, labels and feature vectors of one dataset at one height.
#[derive(Debug, Clone)]
pub struct Features<S> {
    pub trees: TreeSet<S>,
    pub features: Vec<FeatureVector>,
    pub dictionary: LabelDictionary,
}

pub fn dataset_features<S: Scalar>(
    dataset: &Dataset<S>,
    labelings: &[InitialLabeling],
    k: usize,
) -> Result<Features<S>> {
    let trees = build_trees(dataset, k)?;
    let mut dictionary = LabelDictionary::new();
    let features = feature_vectors(&trees.trees, labelings, &mut dictionary)?;
    Ok(Features {
        trees,
        features,
        dictionary,
    })
}

impl<S: Scalar> Features<S> {
    pub fn kernel(&self, mode: KernelMode, scaling: crate::kernel::FeatureScaling) -> Result<KernelMatrix<S>> {
        kernel_gram(&self.features, self.dictionary.len(), mode, scaling)
    }
}

pub fn initial_labels<S: Scalar>(dataset: &Dataset<S>, mode: LabelMode) -> Result<Vec<InitialLabeling>> {
    label_graphs(dataset.graphs(), mode)
}

/// Builds every kernel of the grid and cross-validates them.
pub fn cross_validate<S: Scalar>(
    dataset: &Dataset<S>,
    labelings: &[InitialLabeling],
    config: &CvConfig,
) -> Result<CvReport> {
    config.validate()?;
    let mut candidates = Vec::new();
    for &k in &config.heights {
        let f = dataset_features(dataset, labelings, k)?;
        for &mode in &config.kernel_modes {
            candidates.push(KernelCandidate {
                height: k,
                mode,
                kernel: f.kernel(mode, config.scaling)?,
            });
        }
    }
    cross_validate_kernels(&dataset.name, &candidates, &dataset.classes(), config)
}
