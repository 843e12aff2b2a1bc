mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use setree::kernel::{
    feature_vectors, hierarchical_reporting_with_stats, kernel_gram, squared_distance,
    FeatureScaling,
};
use setree::pipeline::{dataset_features, initial_labels};
use setree::{
    kernel_value, optimize, Dataset, Graph, KernelMatrix, KernelMode, LabelDictionary, LabelMode,
    OptimizerConfig,
};

use common::*;

fn min_eigenvalue(k: &KernelMatrix<f64>) -> f64 {
    let n = k.size();
    let m = DMatrix::from_fn(n, n, |i, j| k.get(i, j));
    m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn random_dataset(count: usize, max_n: usize, seed: u64) -> Dataset<f64> {
    let graphs = (0..count)
        .map(|i| {
            let s = seed.wrapping_mul(31).wrapping_add(i as u64);
            let n = 2 + (s % (max_n as u64 - 1)) as usize;
            random_graph(n, 0.3, s).with_class(i % 2)
        })
        .collect();
    Dataset::new("random", graphs).unwrap()
}

#[test]
fn chain_nodes_relabel_but_keep_counts() {
    // Every node is counted once, at its own height.
    let g = Graph::<f64>::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
    let ds = Dataset::new("p3", vec![g]).unwrap();
    let labels = initial_labels(&ds, LabelMode::Degree).unwrap();
    let f = dataset_features(&ds, &labels, 3).unwrap();
    let fv = &f.features[0];
    assert_eq!(fv.height(), 3);
    assert_eq!(fv.total_at(0), 3);
    assert_eq!(fv.total_at(3), 1);
    let nodes = f.trees.trees[0].node_count() as u64;
    assert_eq!((0..=3).map(|h| fv.total_at(h)).sum::<u64>(), nodes);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gram_is_symmetric_psd(count in 2usize..=24, seed in any::<u64>(), k in 2usize..=4) {
        let ds = random_dataset(count, 14, seed);
        let labels = initial_labels(&ds, LabelMode::Degree).unwrap();
        let f = dataset_features(&ds, &labels, k).unwrap();
        for mode in [KernelMode::Linear, KernelMode::RbfAuto, KernelMode::RbfScale] {
            for scaling in [FeatureScaling::Raw, FeatureScaling::L2] {
                let m = f.kernel(mode, scaling).unwrap();
                prop_assert!(m.is_symmetric());
                let tr = m.trace();
                prop_assert!(min_eigenvalue(&m) >= -1e-9 * tr.max(1.0));
                if mode != KernelMode::Linear {
                    for i in 0..m.size() {
                        prop_assert!((m.get(i, i) - 1.0).abs() < 1e-12);
                        for j in 0..m.size() {
                            prop_assert!(m.get(i, j) > 0.0 && m.get(i, j) <= 1.0 + 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn visits_are_linear_in_tree_size(n in 2usize..=40, p in 0.0f64..0.3, seed in any::<u64>(), k in 2usize..=5) {
        let g = random_graph(n, p, seed);
        let ds = Dataset::new("one", vec![g.clone()]).unwrap();
        let labels = initial_labels(&ds, LabelMode::Degree).unwrap();
        let (t, _) = optimize(&g, &OptimizerConfig::with_height(k)).unwrap();
        let mut dict = LabelDictionary::new();
        let (fv, stats) = hierarchical_reporting_with_stats(&t, &labels[0], &mut dict).unwrap();
        prop_assert_eq!(stats.node_visits, t.node_count());
        prop_assert!(stats.node_visits <= n * k + 1);
        prop_assert_eq!(fv.total_at(0), n as u64);
        prop_assert_eq!(fv.total_at(k), 1);
    }

    #[test]
    fn batch_and_single_tree_paths_agree(count in 2usize..=10, seed in any::<u64>(), k in 2usize..=3) {
        let ds = random_dataset(count, 10, seed);
        let labels = initial_labels(&ds, LabelMode::Degree).unwrap();
        let f = dataset_features(&ds, &labels, k).unwrap();
        let mut dict = LabelDictionary::new();
        let single: Vec<_> = f
            .trees
            .trees
            .iter()
            .zip(&labels)
            .map(|(t, l)| setree::hierarchical_reporting(t, l, &mut dict).unwrap())
            .collect();
        prop_assert_eq!(dict.len(), f.dictionary.len());
        for i in 0..count {
            for j in 0..count {
                let a: f64 = kernel_value(&f.features[i], &f.features[j]).unwrap();
                let b: f64 = kernel_value(&single[i], &single[j]).unwrap();
                prop_assert_eq!(a, b);
            }
        }
        // Batch interning is level-wise, so each height owns a contiguous id block.
        for h in 0..=k {
            let ids = f.dictionary.alphabet(h);
            if let (Some(lo), Some(hi)) = (ids.first(), ids.last()) {
                prop_assert_eq!((hi - lo) as usize + 1, ids.len());
            }
        }
    }

    #[test]
    fn kernel_is_invariant_under_relabelling(n in 2usize..=12, p in 0.0f64..0.5, seed in any::<u64>()) {
        let g = random_connected(n, p, seed);
        let perm = random_permutation(n, seed ^ 7);
        let g2 = permuted(&g, &perm);
        let (t, _) = optimize(&g, &OptimizerConfig::with_height(3)).unwrap();
        let parents: Vec<_> = t.nodes().iter().map(|x| x.parent).collect();
        let leaves: Vec<_> = t.nodes().iter().map(|x| x.leaf_vertex.map(|v| perm[v])).collect();
        let t2 = setree::EncodingTree::from_parents(&g2, &parents, &leaves).unwrap();
        let ds = Dataset::new("pair", vec![g, g2]).unwrap();
        let labels = initial_labels(&ds, LabelMode::Degree).unwrap();
        let mut dict = LabelDictionary::new();
        let fvs = feature_vectors(&[t, t2], &labels, &mut dict).unwrap();
        prop_assert_eq!(squared_distance::<f64>(&fvs[0], &fvs[1]).unwrap(), 0.0);
        let k = kernel_gram::<f64>(&fvs, dict.len(), KernelMode::Linear, FeatureScaling::Raw).unwrap();
        prop_assert_eq!(k.get(0, 1), k.get(0, 0));
    }
}
