//! Exhaustive minimisation of structural entropy over bounded-height trees.
//!
//! Only usable on tiny graphs; it exists to check the greedy optimizer.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tree::{structural_entropy, EncodingTree};
use crate::scalar::Scalar;

pub const MAX_VERTICES: usize = 9;

/// Calls `visit` with every set partition of `0..n`, as a block index per
/// element (restricted growth strings, blocks numbered by first appearance).
pub fn for_each_partition(n: usize, mut visit: impl FnMut(&[usize], usize)) {
    if n == 0 {
        visit(&[], 0);
        return;
    }
    let mut a = vec![0usize; n];
    // max_prefix[i] = max(a[0..i]) + 1 = number of blocks used by the prefix.
    let mut blocks = vec![1usize; n];
    loop {
        visit(&a, blocks[n - 1]);
        // Find the rightmost position that can be incremented.
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            let prefix_blocks = blocks[i - 1];
            if a[i] < prefix_blocks {
                a[i] += 1;
                blocks[i] = prefix_blocks.max(a[i] + 1);
                for j in i + 1..n {
                    a[j] = 0;
                    blocks[j] = blocks[i];
                }
                break;
            }
            i -= 1;
        }
    }
}

/// Builds the tree `root → groups → blocks → leaves` (the group level is
/// skipped when `group_of` is `None`).
fn nested_tree<S: Scalar>(
    graph: &Graph<S>,
    block_of: &[usize],
    block_count: usize,
    group_of: Option<(&[usize], usize)>,
) -> Result<EncodingTree<S>> {
    let n = graph.vertex_count();
    let group_count = group_of.map_or(0, |(_, c)| c);
    // Ids: leaves 0..n, blocks n..n+B, groups n+B..n+B+G, root last.
    let root = n + block_count + group_count;
    let mut parents = vec![None; root + 1];
    let mut leaves = vec![None; root + 1];
    for v in 0..n {
        parents[v] = Some(n + block_of[v]);
        leaves[v] = Some(v);
    }
    for b in 0..block_count {
        parents[n + b] = Some(match group_of {
            Some((g, _)) => n + block_count + g[b],
            None => root,
        });
    }
    for g in 0..group_count {
        parents[n + block_count + g] = Some(root);
    }
    EncodingTree::from_parents(graph, &parents, &leaves)
}

/// Minimum structural entropy over all trees of height at most `k` (k = 2 or
/// 3), found by enumeration. Returns the first minimiser encountered.
///
/// Height-2 trees are set partitions of the vertices; height-3 trees are set
/// partitions of the blocks of such a partition. Unary nodes are entropy
/// neutral, so shallower trees are covered by these shapes.
pub fn brute_force_min_entropy<S: Scalar>(
    graph: &Graph<S>,
    k: usize,
) -> Result<(EncodingTree<S>, S)> {
    let n = graph.vertex_count();
    if n > MAX_VERTICES || !(2..=3).contains(&k) || n == 0 {
        return Err(Error::SearchTooLarge { n, k });
    }
    if !(graph.volume() > S::zero()) {
        return Err(Error::DegenerateGraph);
    }
    let mut best: Option<(EncodingTree<S>, S)> = None;
    let mut failure = None;
    let mut consider = |tree: Result<EncodingTree<S>>| {
        let tree = match tree {
            Ok(t) => t,
            Err(e) => {
                failure.get_or_insert(e);
                return;
            }
        };
        let e = match structural_entropy(graph, &tree) {
            Ok(e) => e,
            Err(err) => {
                failure.get_or_insert(err);
                return;
            }
        };
        if best.as_ref().is_none_or(|(_, b)| e < *b) {
            best = Some((tree, e));
        }
    };
    for_each_partition(n, |block_of, block_count| {
        if k == 2 {
            consider(nested_tree(graph, block_of, block_count, None));
        } else {
            for_each_partition(block_count, |group_of, group_count| {
                consider(nested_tree(
                    graph,
                    block_of,
                    block_count,
                    Some((group_of, group_count)),
                ));
            });
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    best.ok_or(Error::DegenerateGraph)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn bell(n: usize) -> usize {
        let mut count = 0;
        for_each_partition(n, |_, _| count += 1);
        count
    }

    #[test]
    fn partition_counts_are_bell_numbers() {
        let expected = [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147];
        for (n, &b) in expected.iter().enumerate() {
            assert_eq!(bell(n), b, "n = {n}");
        }
    }

    #[test]
    fn cycle4_optimum_is_one_and_a_half_bits() {
        let g = Graph::<f64>::unweighted(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let (t, e) = brute_force_min_entropy(&g, 2).unwrap();
        assert_abs_diff_eq!(e, 1.5, epsilon = 1e-12);
        let modules = t.top_modules();
        assert!(
            modules == vec![vec![0, 1], vec![2, 3]] || modules == vec![vec![0, 3], vec![1, 2]],
            "{modules:?}"
        );
        // Exhaustive check: no partition beats it.
        let mut min = f64::INFINITY;
        for_each_partition(4, |b, c| {
            let t = nested_tree(&g, b, c, None).unwrap();
            min = min.min(structural_entropy(&g, &t).unwrap());
        });
        assert_abs_diff_eq!(min, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn bridged_triangles_split_into_triangles() {
        let g = Graph::<f64>::unweighted(
            6,
            &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)],
        )
        .unwrap();
        let (t, _) = brute_force_min_entropy(&g, 2).unwrap();
        assert_eq!(t.top_modules(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn k2_cannot_beat_one_bit() {
        let g = Graph::<f64>::unweighted(2, &[(0, 1)]).unwrap();
        let (_, e2) = brute_force_min_entropy(&g, 2).unwrap();
        let (_, e3) = brute_force_min_entropy(&g, 3).unwrap();
        assert_abs_diff_eq!(e2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e3, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn deeper_search_never_worse() {
        let g = Graph::<f64>::unweighted(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3)])
            .unwrap();
        let (_, e2) = brute_force_min_entropy(&g, 2).unwrap();
        let (_, e3) = brute_force_min_entropy(&g, 3).unwrap();
        assert!(e3 <= e2 + 1e-12);
    }

    #[test]
    fn guards() {
        let big = Graph::<f64>::unweighted(10, &[(0, 1)]).unwrap();
        assert!(matches!(
            brute_force_min_entropy(&big, 2),
            Err(Error::SearchTooLarge { n: 10, k: 2 })
        ));
        let g = Graph::<f64>::unweighted(2, &[(0, 1)]).unwrap();
        assert!(brute_force_min_entropy(&g, 4).is_err());
    }
}
