//! C-SVM on a precomputed kernel, trained by sequential minimal optimization.
//!
//! The binary solver minimises `1/2 a'Qa - e'a` subject to `0 <= a_i <= C` and
//! `y'a = 0`, with `Q_ij = y_i y_j K_ij`. Working pairs are chosen by maximal
//! violation for the first index and second-order gain for the second; there
//! is no shrinking. Multiclass problems are split one-vs-one and decided by
//! voting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const MAX_ITERATIONS: usize = 1_000_000;

const TAU: f64 = 1e-12;

/// Dual solution of one binary problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySolution<S> {
    pub alpha: Vec<S>,
    /// Decision function is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: S,
    pub iterations: usize,
    /// Maximal KKT violation `m(a) - M(a)` at termination.
    pub violation: S,
    pub objective: S,
}

fn in_up<S: Scalar>(y: S, a: S, c: S) -> bool {
    (y > S::zero() && a < c) || (y < S::zero() && a > S::zero())
}

fn in_low<S: Scalar>(y: S, a: S, c: S) -> bool {
    (y > S::zero() && a > S::zero()) || (y < S::zero() && a < c)
}

/// `m(a) - M(a)` for the gradient `grad` of the dual objective.
pub fn kkt_violation<S: Scalar>(y: &[S], alpha: &[S], grad: &[S], c: S) -> S {
    let mut up = S::neg_infinity();
    let mut low = S::infinity();
    for t in 0..y.len() {
        let v = -y[t] * grad[t];
        if in_up(y[t], alpha[t], c) {
            up = up.max(v);
        }
        if in_low(y[t], alpha[t], c) {
            low = low.min(v);
        }
    }
    if up == S::neg_infinity() || low == S::infinity() {
        S::zero()
    } else {
        (up - low).max(S::zero())
    }
}

/// Gradient `Qa - e` of the dual objective.
pub fn dual_gradient<S: Scalar>(k: &KernelMatrix<S>, y: &[S], alpha: &[S]) -> Vec<S> {
    (0..y.len())
        .map(|i| {
            let s: S = (0..y.len())
                .filter(|&j| alpha[j] != S::zero())
                .map(|j| y[i] * y[j] * k.get(i, j) * alpha[j])
                .sum();
            s - S::one()
        })
        .collect()
}

/// Dual objective `1/2 a'Qa - e'a`.
pub fn dual_objective<S: Scalar>(k: &KernelMatrix<S>, y: &[S], alpha: &[S]) -> S {
    let g = dual_gradient(k, y, alpha);
    (0..y.len())
        .map(|i| alpha[i] * (g[i] - S::one()))
        .sum::<S>()
        / S::lit(2.0)
}

/// Solves the binary dual on kernel `k` with labels `y` in `{-1, +1}`.
pub fn smo_train<S: Scalar>(
    k: &KernelMatrix<S>,
    y: &[S],
    c: S,
    tol: S,
) -> Result<BinarySolution<S>> {
    let n = y.len();
    if k.size() != n {
        return Err(Error::InvalidInput(format!(
            "kernel is {}x{} but there are {n} labels",
            k.size(),
            k.size()
        )));
    }
    if y.iter().any(|&v| v != S::one() && v != -S::one()) {
        return Err(Error::InvalidInput("binary labels must be +1 or -1".into()));
    }
    if !(c > S::zero()) || !(tol > S::zero()) {
        return Err(Error::InvalidInput("C and tolerance must be positive".into()));
    }
    let tau = S::lit(TAU);
    let mut alpha = vec![S::zero(); n];
    let mut grad = vec![-S::one(); n];
    let mut iterations = 0;
    let mut violation;
    loop {
        // First index: maximal violation over the up set.
        let mut gmax = S::neg_infinity();
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(y[t], alpha[t], c) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        // Second index: best second-order gain over the low set.
        let mut gmin = S::infinity();
        let mut j = usize::MAX;
        let mut best = S::infinity();
        for t in 0..n {
            if !in_low(y[t], alpha[t], c) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i == usize::MAX {
                continue;
            }
            let b = gmax - v;
            if b > S::zero() {
                let mut a = k.get(i, i) + k.get(t, t) - S::lit(2.0) * k.get(i, t);
                if a <= S::zero() {
                    a = tau;
                }
                let gain = -b * b / a;
                if gain < best {
                    best = gain;
                    j = t;
                }
            }
        }
        violation = if i == usize::MAX || gmin == S::infinity() {
            S::zero()
        } else {
            gmax - gmin
        };
        if violation < tol || j == usize::MAX {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations,
                violation: violation.as_f64(),
            });
        }
        iterations += 1;

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let kii = k.get(i, i);
        let kjj = k.get(j, j);
        let kij = k.get(i, j);
        let mut quad = kii + kjj - S::lit(2.0) * kij;
        if quad <= S::zero() {
            quad = tau;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > S::zero() {
                if alpha[j] < S::zero() {
                    alpha[j] = S::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < S::zero() {
                alpha[i] = S::zero();
                alpha[j] = -diff;
            }
            if diff > S::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < S::zero() {
                alpha[j] = S::zero();
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < S::zero() {
                alpha[i] = S::zero();
                alpha[j] = sum;
            }
        }
        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k.get(t, i) * dai + y[j] * k.get(t, j) * daj);
        }
        if !grad[i].is_finite() || !grad[j].is_finite() {
            return Err(Error::Numerical("non-finite gradient in SMO".into()));
        }
    }

    let rho = bias(y, &alpha, &grad, c);
    let objective = (0..n)
        .map(|t| alpha[t] * (grad[t] - S::one()))
        .sum::<S>()
        / S::lit(2.0);
    Ok(BinarySolution {
        alpha,
        rho,
        iterations,
        violation,
        objective,
    })
}

/// Offset from the free support vectors, or the midpoint of the feasible
/// interval when there are none.
fn bias<S: Scalar>(y: &[S], alpha: &[S], grad: &[S], c: S) -> S {
    let mut ub = S::infinity();
    let mut lb = S::neg_infinity();
    let mut sum = S::zero();
    let mut free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < S::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= S::zero() {
            if y[t] > S::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / S::from_count(free)
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / S::lit(2.0)
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        S::zero()
    }
}

/// One trained pairwise classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel<S> {
    /// Class voted for when the decision value is positive.
    pub positive: usize,
    pub negative: usize,
    /// `(global training index, alpha_i * y_i)` for every support vector.
    pub support: Vec<(usize, S)>,
    pub rho: S,
    pub iterations: usize,
}

impl<S: Scalar> PairModel<S> {
    pub fn decision(&self, kernel: &KernelMatrix<S>, x: usize) -> S {
        self.support
            .iter()
            .map(|&(i, coef)| coef * kernel.get(x, i))
            .sum::<S>()
            - self.rho
    }
}

/// One-vs-one multiclass SVM over a precomputed kernel. Indices refer to rows
/// of the kernel matrix the model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel<S> {
    /// Classes seen in training, ascending.
    pub classes: Vec<usize>,
    pub pairs: Vec<PairModel<S>>,
}

impl<S: Scalar> SvmModel<S> {
    /// Trains on rows `train` of `kernel` with class labels `labels[i]` for
    /// every row `i` of the kernel.
    pub fn train(
        kernel: &KernelMatrix<S>,
        labels: &[usize],
        train: &[usize],
        c: S,
        tol: S,
    ) -> Result<Self> {
        if labels.len() != kernel.size() {
            return Err(Error::InvalidInput(format!(
                "{} labels for a {}-row kernel",
                labels.len(),
                kernel.size()
            )));
        }
        if train.is_empty() {
            return Err(Error::InvalidInput("empty training set".into()));
        }
        let mut classes: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        classes.sort_unstable();
        classes.dedup();
        let mut pairs = Vec::new();
        for (a_pos, &a) in classes.iter().enumerate() {
            for &b in &classes[a_pos + 1..] {
                let idx: Vec<usize> = train
                    .iter()
                    .copied()
                    .filter(|&i| labels[i] == a || labels[i] == b)
                    .collect();
                let y: Vec<S> = idx
                    .iter()
                    .map(|&i| if labels[i] == a { S::one() } else { -S::one() })
                    .collect();
                let sol = smo_train(&kernel.restrict(&idx), &y, c, tol)?;
                let support = idx
                    .iter()
                    .zip(&sol.alpha)
                    .zip(&y)
                    .filter(|((_, &al), _)| al > S::zero())
                    .map(|((&i, &al), &yy)| (i, al * yy))
                    .collect();
                pairs.push(PairModel {
                    positive: a,
                    negative: b,
                    support,
                    rho: sol.rho,
                    iterations: sol.iterations,
                });
            }
        }
        Ok(SvmModel { classes, pairs })
    }

    /// Predicted class of kernel row `x`. Vote ties go to the smaller class; a
    /// model trained on a single class always predicts it.
    pub fn predict_one(&self, kernel: &KernelMatrix<S>, x: usize) -> usize {
        if self.classes.len() == 1 {
            return self.classes[0];
        }
        let mut votes = vec![0usize; self.classes.len()];
        for p in &self.pairs {
            let winner = if p.decision(kernel, x) > S::zero() {
                p.positive
            } else {
                p.negative
            };
            let slot = self.classes.binary_search(&winner).expect("known class");
            votes[slot] += 1;
        }
        let mut best = 0;
        for (slot, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = slot;
            }
        }
        self.classes[best]
    }
}

/// Predicted classes of kernel rows `test`.
pub fn predict<S: Scalar>(model: &SvmModel<S>, kernel: &KernelMatrix<S>, test: &[usize]) -> Vec<usize> {
    test.iter().map(|&x| model.predict_one(kernel, x)).collect()
}
