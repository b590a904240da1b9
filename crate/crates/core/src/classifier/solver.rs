//! Soft-margin linear SVM trainer.
//!
//! Minimizes (1/2)·||w||^2 + c·Σ max(0, 1 − y_i·(w·x_i − b)) over already
//! standardized features. The dual (box-constrained QP with the equality
//! constraint Σ y_i α_i = 0, which carries the unregularized bias) is solved
//! by pairwise coordinate descent: every epoch sweeps the samples in a
//! seeded shuffled order and pairs each violating sample with its
//! worst-violating partner, then takes the exact two-variable step.
//!
//! At each epoch end the exact optimal bias for the current weights is
//! recovered (the hinge sum is convex piecewise-linear in b, so the
//! minimizer is the midpoint of a breakpoint interval) and the best
//! (weights, bias) pair seen so far becomes the incumbent. The recorded
//! per-epoch objective is the incumbent's, so the trace is non-increasing,
//! and the returned model is the final incumbent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

const TAU: f64 = 1e-12;

pub(crate) struct SolveOptions {
    pub c: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

pub(crate) struct SolveOutcome {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Incumbent primal objective after each epoch.
    pub objective_trace: Vec<f64>,
    pub epochs_run: usize,
    pub converged: bool,
    pub kkt_gap: f64,
}

/// Row-major sample matrix with labels in {-1, +1}.
pub(crate) struct Problem<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub dim: usize,
}

impl Problem<'_> {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    fn dot_rows(&self, i: usize, j: usize) -> f64 {
        dot(self.row(i), self.row(j))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Precompute the Gram matrix when it fits comfortably in memory; larger
/// problems fall back to on-demand dot products.
const GRAM_LIMIT: usize = 2048;

struct Kernel<'a> {
    problem: &'a Problem<'a>,
    gram: Option<Vec<f64>>,
}

impl<'a> Kernel<'a> {
    fn new(problem: &'a Problem<'a>) -> Self {
        let n = problem.len();
        let gram = if n <= GRAM_LIMIT {
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let k = problem.dot_rows(i, j);
                    g[i * n + j] = k;
                    g[j * n + i] = k;
                }
            }
            Some(g)
        } else {
            None
        };
        Kernel { problem, gram }
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        match &self.gram {
            Some(g) => g[i * self.problem.len() + j],
            None => self.problem.dot_rows(i, j),
        }
    }
}

pub(crate) fn primal_objective(weights: &[f64], bias: f64, problem: &Problem<'_>, c: f64) -> f64 {
    let reg = 0.5 * dot(weights, weights);
    let mut hinge = 0.0;
    for i in 0..problem.len() {
        let z = dot(weights, problem.row(i)) - bias;
        hinge += (1.0 - problem.y[i] * z).max(0.0);
    }
    reg + c * hinge
}

/// Exact minimizer of b -> Σ max(0, 1 − y_i (s_i − b)) given the raw scores
/// s_i = w·x_i. Each term's breakpoint is s_i − y_i and the slope crosses
/// zero after the first `n_neg` sorted breakpoints, so the optimal set is
/// the interval between the n_neg-th and (n_neg+1)-th smallest breakpoints;
/// the midpoint is returned.
pub(crate) fn optimal_bias(scores: &[f64], y: &[f64]) -> f64 {
    let mut breakpoints: Vec<f64> = scores.iter().zip(y).map(|(&s, &yi)| s - yi).collect();
    breakpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    let n_neg = y.iter().filter(|&&yi| yi < 0.0).count();
    debug_assert!(n_neg >= 1 && n_neg < y.len());
    0.5 * (breakpoints[n_neg - 1] + breakpoints[n_neg])
}

/// `true` when index t may move upward in the feasible direction.
fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha > 0.0) || (y < 0.0 && alpha < c)
}

pub(crate) fn solve(problem: &Problem<'_>, opts: &SolveOptions) -> SolveOutcome {
    let n = problem.len();
    let d = problem.dim;
    let c = opts.c;
    debug_assert!(n >= 2);

    let kernel = Kernel::new(problem);
    let mut alpha = vec![0.0f64; n];
    let mut weights = vec![0.0f64; d];
    // grad[i] = y_i * (w . x_i) - 1 (dual gradient).
    let mut grad = vec![-1.0f64; n];

    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..n).collect();

    // Incumbent: best primal pair seen, starting from the zero model.
    let zero_scores = vec![0.0f64; n];
    let mut best_bias = optimal_bias(&zero_scores, problem.y);
    let mut best_weights = weights.clone();
    let mut best_objective = primal_objective(&best_weights, best_bias, problem, c);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut kkt_gap = f64::INFINITY;
    let mut epochs_run = 0;

    for _epoch in 0..opts.max_epochs {
        epochs_run += 1;
        order.shuffle(&mut rng);
        let mut updates = 0usize;

        for &i in &order {
            // Violation of i paired with its worst partner, considering both
            // roles i can play.
            let vi = -problem.y[i] * grad[i];
            let mut best_pair: Option<(usize, usize, f64)> = None;

            if in_up(alpha[i], problem.y[i], c) {
                let mut low_val = f64::INFINITY;
                let mut low_idx = usize::MAX;
                for t in 0..n {
                    if t != i && in_low(alpha[t], problem.y[t], c) {
                        let v = -problem.y[t] * grad[t];
                        if v < low_val {
                            low_val = v;
                            low_idx = t;
                        }
                    }
                }
                if low_idx != usize::MAX && vi - low_val > opts.tolerance {
                    best_pair = Some((i, low_idx, vi - low_val));
                }
            }
            if in_low(alpha[i], problem.y[i], c) {
                let mut up_val = f64::NEG_INFINITY;
                let mut up_idx = usize::MAX;
                for t in 0..n {
                    if t != i && in_up(alpha[t], problem.y[t], c) {
                        let v = -problem.y[t] * grad[t];
                        if v > up_val {
                            up_val = v;
                            up_idx = t;
                        }
                    }
                }
                if up_idx != usize::MAX && up_val - vi > opts.tolerance {
                    let violation = up_val - vi;
                    if best_pair.map_or(true, |(_, _, v)| violation > v) {
                        best_pair = Some((up_idx, i, violation));
                    }
                }
            }

            let Some((u, l, _)) = best_pair else { continue };
            pair_update(u, l, problem, &kernel, c, &mut alpha, &mut weights, &mut grad);
            updates += 1;
        }

        // Resynchronize against drift from the incremental updates.
        recompute_state(problem, &alpha, &mut weights, &mut grad);

        let scores: Vec<f64> = (0..n)
            .map(|t| problem.y[t] * (grad[t] + 1.0))
            .collect();
        let bias = optimal_bias(&scores, problem.y);
        let objective = primal_objective(&weights, bias, problem, c);
        if objective < best_objective {
            best_objective = objective;
            best_weights.copy_from_slice(&weights);
            best_bias = bias;
        }
        trace.push(best_objective);

        kkt_gap = max_kkt_violation(problem, &alpha, &grad, c);
        if kkt_gap < opts.tolerance {
            converged = true;
            break;
        }
        if updates == 0 {
            // A full sweep found no pair above tolerance; the maximal
            // violating pair was among those examined, so we are done.
            converged = true;
            break;
        }
    }

    SolveOutcome {
        weights: best_weights,
        bias: best_bias,
        objective_trace: trace,
        epochs_run,
        converged,
        kkt_gap,
    }
}

fn max_kkt_violation(problem: &Problem<'_>, alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut m = f64::NEG_INFINITY;
    let mut mm = f64::INFINITY;
    for t in 0..problem.len() {
        let v = -problem.y[t] * grad[t];
        if in_up(alpha[t], problem.y[t], c) {
            m = m.max(v);
        }
        if in_low(alpha[t], problem.y[t], c) {
            mm = mm.min(v);
        }
    }
    m - mm
}

fn recompute_state(problem: &Problem<'_>, alpha: &[f64], weights: &mut [f64], grad: &mut [f64]) {
    weights.fill(0.0);
    for i in 0..problem.len() {
        let coef = alpha[i] * problem.y[i];
        if coef != 0.0 {
            for (wj, xj) in weights.iter_mut().zip(problem.row(i)) {
                *wj += coef * xj;
            }
        }
    }
    for t in 0..problem.len() {
        grad[t] = problem.y[t] * dot(weights, problem.row(t)) - 1.0;
    }
}

/// Exact two-variable subproblem step preserving Σ y_i α_i, with box
/// clipping. Follows the classic working-set update formulas.
#[allow(clippy::too_many_arguments)]
fn pair_update(
    i: usize,
    j: usize,
    problem: &Problem<'_>,
    kernel: &Kernel<'_>,
    c: f64,
    alpha: &mut [f64],
    weights: &mut [f64],
    grad: &mut [f64],
) {
    let (yi, yj) = (problem.y[i], problem.y[j]);
    let old_ai = alpha[i];
    let old_aj = alpha[j];
    let mut quad = kernel.k(i, i) + kernel.k(j, j) - 2.0 * kernel.k(i, j);
    if quad <= 0.0 {
        quad = TAU;
    }

    if yi != yj {
        let delta = (-grad[i] - grad[j]) / quad;
        let diff = alpha[i] - alpha[j];
        alpha[i] += delta;
        alpha[j] += delta;
        if diff > 0.0 {
            if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = -diff;
        }
        if diff > 0.0 {
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
        } else if alpha[j] < 0.0 {
            alpha[j] = 0.0;
            alpha[i] = sum;
        }
        if sum > c {
            if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = sum - c;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = sum;
        }
    }

    let di = alpha[i] - old_ai;
    let dj = alpha[j] - old_aj;
    if di == 0.0 && dj == 0.0 {
        return;
    }
    for ((wk, xi), xj) in weights.iter_mut().zip(problem.row(i)).zip(problem.row(j)) {
        *wk += di * yi * xi + dj * yj * xj;
    }
    for t in 0..problem.len() {
        grad[t] += problem.y[t] * (di * yi * kernel.k(i, t) + dj * yj * kernel.k(j, t));
    }
}
