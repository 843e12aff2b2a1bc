use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setree::cv::{stratified_folds, KernelCandidate, CvConfig};
use setree::svm::{dual_gradient, dual_objective, kkt_violation, smo_train, PairModel};
use setree::{predict, KernelMatrix, KernelMode, SvmModel};

struct Problem {
    kernel: KernelMatrix<f64>,
    y: Vec<f64>,
    c: f64,
}

fn random_problem(seed: u64, rbf: bool) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 30;
    let pts: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let w = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let mut y: Vec<f64> = pts
        .iter()
        .map(|p| {
            let s = p[0] * w[0] + p[1] * w[1] + p[2] * w[2] + rng.gen_range(-0.3..0.3);
            if s > 0.0 { 1.0 } else { -1.0 }
        })
        .collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let kernel = KernelMatrix::from_fn(n, |i, j| {
        let (a, b) = (pts[i], pts[j]);
        if rbf {
            let d: f64 = (0..3).map(|t| (a[t] - b[t]).powi(2)).sum();
            (-0.8 * d).exp()
        } else {
            (0..3).map(|t| a[t] * b[t]).sum()
        }
    });
    let c = [0.1, 1.0, 10.0][(seed % 3) as usize];
    Problem { kernel, y, c }
}

/// Euclidean projection onto `{0 <= a <= c, y'a = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(&vi, &yi)| (vi - lambda * yi).clamp(0.0, c))
            .collect()
    };
    let g = |lambda: f64| -> f64 { at(lambda).iter().zip(y).map(|(a, b)| a * b).sum() };
    let (mut lo, mut hi) = (-1e6, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient on the dual; slow but independent of SMO.
fn oracle(p: &Problem) -> Vec<f64> {
    let n = p.y.len();
    let q = |i: usize, j: usize| p.y[i] * p.y[j] * p.kernel.get(i, j);
    let lipschitz = (0..n)
        .map(|i| (0..n).map(|j| q(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..60_000 {
        let grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| q(i, j) * z[j]).sum::<f64>() - 1.0)
            .collect();
        let v: Vec<f64> = (0..n).map(|i| z[i] - step * grad[i]).collect();
        let next = project(&v, &p.y, p.c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = (0..n)
            .map(|i| next[i] + (t - 1.0) / t_next * (next[i] - x[i]))
            .collect();
        x = next;
        t = t_next;
    }
    x
}

fn decision_values(k: &KernelMatrix<f64>, y: &[f64], alpha: &[f64], rho: f64) -> Vec<f64> {
    (0..y.len())
        .map(|x| (0..y.len()).map(|i| alpha[i] * y[i] * k.get(x, i)).sum::<f64>() - rho)
        .collect()
}

/// Offset from the free support vectors of a dual point. Without free vectors
/// the offset is not unique, so there is nothing to compare.
fn oracle_rho(p: &Problem, alpha: &[f64]) -> Option<f64> {
    let g = dual_gradient(&p.kernel, &p.y, alpha);
    let free: Vec<f64> = (0..alpha.len())
        .filter(|&i| alpha[i] > 1e-6 && alpha[i] < p.c - 1e-6)
        .map(|i| p.y[i] * g[i])
        .collect();
    (!free.is_empty()).then(|| free.iter().sum::<f64>() / free.len() as f64)
}

#[test]
fn two_points_with_identity_gram_are_both_support_vectors() {
    let k = KernelMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let labels = [0, 1];
    let m = SvmModel::train(&k, &labels, &[0, 1], 1.0, 1e-3).unwrap();
    assert_eq!(m.pairs[0].support.len(), 2);
    assert_eq!(predict(&m, &k, &[0, 1]), vec![0, 1]);
    assert!(m.pairs[0].decision(&k, 0) > 0.0);
    assert!(m.pairs[0].decision(&k, 1) < 0.0);
}

#[test]
fn separable_line_with_large_c_is_fit_exactly() {
    let xs: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
    let labels: Vec<usize> = xs.iter().map(|&x| usize::from(x > 0.0)).collect();
    let k = KernelMatrix::from_fn(xs.len(), |i, j| xs[i] * xs[j] + 1.0);
    let all: Vec<usize> = (0..xs.len()).collect();
    let m = SvmModel::train(&k, &labels, &all, 1e3, 1e-3).unwrap();
    assert_eq!(predict(&m, &k, &all), labels);
}

#[test]
fn smo_matches_projected_gradient_oracle() {
    let mut margins_compared = 0;
    for seed in 0..12 {
        let rbf = seed % 2 == 0;
        let p = random_problem(seed, rbf);
        let sol = smo_train(&p.kernel, &p.y, p.c, 1e-3).unwrap();
        let slow = oracle(&p);
        let f_smo = dual_objective(&p.kernel, &p.y, &sol.alpha);
        let f_slow = dual_objective(&p.kernel, &p.y, &slow);
        assert!((f_smo - f_slow).abs() <= 1e-4, "seed {seed}: {f_smo} vs {f_slow}");
        assert!((sol.objective - f_smo).abs() <= 1e-9);

        // Feasibility and optimality of the returned point.
        assert!(sol.alpha.iter().all(|&a| (0.0..=p.c).contains(&a)));
        let eq: f64 = sol.alpha.iter().zip(&p.y).map(|(a, b)| a * b).sum();
        assert!(eq.abs() <= 1e-9);
        let g = dual_gradient(&p.kernel, &p.y, &sol.alpha);
        assert!(kkt_violation(&p.y, &sol.alpha, &g, p.c) <= 1e-3 + 1e-9);

        if let (true, Some(rho)) = (rbf, oracle_rho(&p, &slow)) {
            margins_compared += 1;
            let ours = decision_values(&p.kernel, &p.y, &sol.alpha, sol.rho);
            let theirs = decision_values(&p.kernel, &p.y, &slow, rho);
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).abs() <= 1e-3, "seed {seed}: margin {a} vs {b}");
            }
        }
    }
    assert!(margins_compared >= 3, "only {margins_compared} problems had free vectors");
}

#[test]
fn flipping_labels_negates_scores() {
    for seed in 0..6 {
        let p = random_problem(seed, true);
        let flipped: Vec<f64> = p.y.iter().map(|v| -v).collect();
        let a = smo_train(&p.kernel, &p.y, p.c, 1e-6).unwrap();
        let b = smo_train(&p.kernel, &flipped, p.c, 1e-6).unwrap();
        let da = decision_values(&p.kernel, &p.y, &a.alpha, a.rho);
        let db = decision_values(&p.kernel, &flipped, &b.alpha, b.rho);
        for (x, z) in da.iter().zip(&db) {
            assert!((x + z).abs() <= 1e-4, "seed {seed}: {x} vs {z}");
        }
    }
}

#[test]
fn support_vector_scores_itself_correctly() {
    let k = KernelMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let m = SvmModel::train(&k, &[1, 0], &[0, 1], 1.0, 1e-3).unwrap();
    let pair: &PairModel<f64> = &m.pairs[0];
    let (sv, coef) = pair.support[0];
    assert_eq!(pair.decision(&k, sv).signum(), coef.signum());
}

#[test]
fn noise_is_not_learned_beyond_chance() {
    let mut train_acc = Vec::new();
    let mut test_acc = Vec::new();
    for seed in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = 80;
        let pts: Vec<[f64; 4]> = (0..n)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let k = KernelMatrix::from_fn(n, |i, j| {
            let d: f64 = (0..4).map(|t| (pts[i][t] - pts[j][t]).powi(2)).sum();
            (-d).exp()
        });
        let folds = stratified_folds(&labels, 10, seed);
        for f in 0..10 {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let m = SvmModel::train(&k, &labels, &train, 10.0, 1e-3).unwrap();
            let acc = |idx: &[usize]| {
                let hits = predict(&m, &k, idx)
                    .iter()
                    .zip(idx)
                    .filter(|(p, &i)| **p == labels[i])
                    .count();
                hits as f64 / idx.len() as f64
            };
            train_acc.push(acc(&train));
            test_acc.push(acc(&test));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (tr, te) = (mean(&train_acc), mean(&test_acc));
    assert!(tr >= te, "train {tr} test {te}");
    // 640 test predictions on coin-flip labels: 3 sigma is about 0.06.
    let sigma = (0.25f64 / 640.0).sqrt();
    assert!((te - 0.5).abs() <= 3.0 * sigma, "test accuracy {te}");
}

#[test]
fn cross_validation_is_reproducible() {
    let p = random_problem(5, true);
    let labels: Vec<usize> = p.y.iter().map(|&v| usize::from(v > 0.0)).collect();
    let cand = [KernelCandidate {
        height: 2,
        mode: KernelMode::RbfAuto,
        kernel: p.kernel.clone(),
    }];
    let cfg = CvConfig {
        heights: vec![2],
        kernel_modes: vec![KernelMode::RbfAuto],
        seed: 3,
        ..CvConfig::default()
    };
    let a = setree::cv::cross_validate_kernels("r", &cand, &labels, &cfg).unwrap();
    let b = setree::cv::cross_validate_kernels("r", &cand, &labels, &cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.fold_accuracies.len(), 10);
    let m = a.fold_accuracies.iter().sum::<f64>() / 10.0;
    assert!((a.mean - m).abs() < 1e-15);
}
