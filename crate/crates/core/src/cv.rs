//! Stratified k-fold cross-validation over a grid of precomputed kernels.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{FeatureScaling, KernelMatrix, KernelMode};
use crate::scalar::Scalar;
use crate::svm::{predict, SvmModel, DEFAULT_TOLERANCE};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_C_GRID: [f64; 6] = [1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
pub const DEFAULT_HEIGHTS: [usize; 4] = [2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub heights: Vec<usize>,
    pub c_grid: Vec<f64>,
    pub kernel_modes: Vec<KernelMode>,
    pub scaling: FeatureScaling,
    pub folds: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            heights: DEFAULT_HEIGHTS.to_vec(),
            c_grid: DEFAULT_C_GRID.to_vec(),
            kernel_modes: vec![KernelMode::Linear],
            scaling: FeatureScaling::Raw,
            folds: DEFAULT_FOLDS,
            seed: 0,
            tol: DEFAULT_TOLERANCE,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heights.is_empty() || self.c_grid.is_empty() || self.kernel_modes.is_empty() {
            return Err(Error::InvalidInput("empty hyperparameter grid".into()));
        }
        if self.heights.contains(&0) {
            return Err(Error::InvalidInput("tree height must be at least 1".into()));
        }
        if let Some(c) = self.c_grid.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidInput(format!("C = {c} is not a positive number")));
        }
        if self.folds < 2 {
            return Err(Error::InvalidInput("need at least 2 folds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub c: f64,
    pub height: usize,
    pub kernel_mode: KernelMode,
}

/// Fold accuracies of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub hyperparameters: Hyperparameters,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub dataset: String,
    pub graphs: usize,
    pub seed: u64,
    pub folds: usize,
    /// Test accuracy per fold of the chosen configuration, in `[0, 1]`.
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of `fold_accuracies`.
    pub std: f64,
    pub chosen_hyperparameters: Hyperparameters,
    pub heights: Vec<usize>,
    pub c_grid: Vec<f64>,
    pub kernel_modes: Vec<KernelMode>,
    pub scaling: FeatureScaling,
    /// Every grid point in height, kernel, C order.
    pub grid: Vec<GridResult>,
}

impl CvReport {
    /// `mean±std` in percent with one decimal, as in result tables.
    pub fn table_cell(&self) -> String {
        format!("{:.1}±{:.1}", 100.0 * self.mean, 100.0 * self.std)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad CV report: {e}")))
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Fold index for every example.
///
/// Each class is shuffled with a generator seeded from `seed` and dealt
/// round-robin, continuing where the previous class stopped, so fold sizes
/// differ by at most one and every fold sees every class with at least `folds`
/// members.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            log::warn!(
                "class {class} has {} members, fewer than {folds} folds; stratification is best effort",
                members.len()
            );
        }
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next;
            next = (next + 1) % folds;
        }
    }
    fold_of
}

/// A kernel matrix for one `(height, mode)` pair of the grid.
pub struct KernelCandidate<S> {
    pub height: usize,
    pub mode: KernelMode,
    pub kernel: KernelMatrix<S>,
}

/// Accuracy of every fold for one kernel and one `C`.
pub fn fold_accuracies<S: Scalar>(
    kernel: &KernelMatrix<S>,
    labels: &[usize],
    fold_of: &[usize],
    folds: usize,
    c: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
            if test.is_empty() {
                return Err(Error::InvalidInput(format!("fold {f} is empty")));
            }
            let model = SvmModel::train(kernel, labels, &train, S::lit(c), S::lit(tol))?;
            let hits = predict(&model, kernel, &test)
                .iter()
                .zip(&test)
                .filter(|(p, &i)| **p == labels[i])
                .count();
            Ok(hits as f64 / test.len() as f64)
        })
        .collect()
}

/// Runs the grid and reports the configuration with the highest mean test
/// accuracy (the first one in grid order on ties).
pub fn cross_validate_kernels<S: Scalar>(
    dataset: &str,
    candidates: &[KernelCandidate<S>],
    labels: &[usize],
    config: &CvConfig,
) -> Result<CvReport> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no kernels to evaluate".into()));
    }
    if labels.len() < config.folds {
        return Err(Error::InvalidInput(format!(
            "{} examples cannot fill {} folds",
            labels.len(),
            config.folds
        )));
    }
    let fold_of = stratified_folds(labels, config.folds, config.seed);
    let jobs: Vec<(&KernelCandidate<S>, f64)> = candidates
        .iter()
        .flat_map(|k| config.c_grid.iter().map(move |&c| (k, c)))
        .collect();
    let grid = jobs
        .par_iter()
        .map(|&(k, c)| {
            let acc = fold_accuracies(&k.kernel, labels, &fold_of, config.folds, c, config.tol)?;
            Ok(GridResult {
                hyperparameters: Hyperparameters {
                    c,
                    height: k.height,
                    kernel_mode: k.mode,
                },
                mean: mean(&acc),
                std: sample_std(&acc),
                fold_accuracies: acc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, g) in grid.iter().enumerate() {
        if g.mean > grid[best].mean {
            best = i;
        }
    }
    let chosen = grid[best].clone();
    Ok(CvReport {
        dataset: dataset.to_string(),
        graphs: labels.len(),
        seed: config.seed,
        folds: config.folds,
        fold_accuracies: chosen.fold_accuracies,
        mean: chosen.mean,
        std: chosen.std,
        chosen_hyperparameters: chosen.hyperparameters,
        heights: config.heights.clone(),
        c_grid: config.c_grid.clone(),
        kernel_modes: config.kernel_modes.clone(),
        scaling: config.scaling,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified_and_balanced() {
        let labels: Vec<usize> = (0..95).map(|i| usize::from(i % 3 == 0)).collect();
        let fold_of = stratified_folds(&labels, 10, 7);
        let mut sizes = [0usize; 10];
        let mut ones = [0usize; 10];
        for (i, &f) in fold_of.iter().enumerate() {
            sizes[f] += 1;
            ones[f] += labels[i];
        }
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert!(ones.iter().max().unwrap() - ones.iter().min().unwrap() <= 1);
        assert_eq!(fold_of, stratified_folds(&labels, 10, 7));
        assert_ne!(fold_of, stratified_folds(&labels, 10, 8));
    }

    #[test]
    fn std_is_sample_std() {
        assert_eq!(sample_std(&[1.0, 1.0]), 0.0);
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_class_scores_every_fold_perfectly() {
        let n = 20;
        let kernel = KernelMatrix::from_fn(n, |_, _| 4.0f64);
        let labels = vec![0; n];
        let report = cross_validate_kernels(
            "copies",
            &[KernelCandidate {
                height: 2,
                mode: KernelMode::Linear,
                kernel,
            }],
            &labels,
            &CvConfig {
                heights: vec![2],
                ..CvConfig::default()
            },
        )
        .unwrap();
        assert_eq!(report.fold_accuracies, vec![1.0; 10]);
        assert_eq!(report.mean, 1.0);
        assert_eq!(report.std, 0.0);
        assert_eq!(report.grid.len(), 6);
        assert_eq!(report.table_cell(), "100.0±0.0");
    }

    #[test]
    fn report_round_trips_through_json() {
        let kernel = KernelMatrix::from_fn(12, |i, j| if (i % 2) == (j % 2) { 2.0f64 } else { 0.0 });
        let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let cfg = CvConfig {
            heights: vec![2],
            c_grid: vec![1.0],
            folds: 3,
            ..CvConfig::default()
        };
        let cand = [KernelCandidate {
            height: 2,
            mode: KernelMode::Linear,
            kernel,
        }];
        let r = cross_validate_kernels("toy", &cand, &labels, &cfg).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(CvReport::from_json(&r.to_json()).unwrap(), r);
        assert_eq!(r.to_json(), cross_validate_kernels("toy", &cand, &labels, &cfg).unwrap().to_json());
    }
}
