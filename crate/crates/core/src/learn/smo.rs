//! Sequential minimal optimization for linear-kernel SVM duals.
//!
//! Solves
//!
//! ```text
//! min_b  1/2 b'Qb + p'b   s.t.  y'b = 0,  0 <= b_t <= C
//! ```
//!
//! with `Q_st = y_s y_t <x_s, x_t>`, using second-order working-set
//! selection. Each dual variable points at a sample row; epsilon-SVR maps
//! every sample to two variables. The primal weight vector
//! `w = sum_t b_t y_t x_t` is maintained explicitly, so each iteration costs
//! O(n) with a precomputed Gram matrix and O(n d) without.

pub(crate) struct DualProblem<'a> {
    pub rows: &'a [Vec<f64>],
    /// Sample row of each dual variable.
    pub sample: Vec<usize>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub c: f64,
}

pub(crate) struct DualSolution {
    pub w: Vec<f64>,
    /// Decision function is `w.x - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective sampled once per epoch and at termination.
    pub objective_trace: Vec<f64>,
}

const TAU: f64 = 1e-12;

/// Largest sample count whose Gram matrix is precomputed (32 MiB).
const GRAM_LIMIT: usize = 2048;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn solve(problem: &DualProblem<'_>, tol: f64, max_epochs: usize) -> DualSolution {
    let l = problem.y.len();
    let dim = problem.rows.first().map_or(0, Vec::len);
    let c = problem.c;
    let y = &problem.y;
    let sample = &problem.sample;
    let rows = problem.rows;

    let sq_norm: Vec<f64> = rows.iter().map(|r| dot(r, r)).collect();
    let mut alpha = vec![0.0f64; l];
    let mut w = vec![0.0f64; dim];
    let mut scores = vec![0.0f64; rows.len()];
    let mut grad = problem.p.clone();
    let n = rows.len();
    // Linear-kernel Gram matrix, precomputed when it fits comfortably.
    let gram: Option<Vec<f64>> = (n <= GRAM_LIMIT).then(|| {
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v = dot(&rows[a], &rows[b]);
                g[a * n + b] = v;
                g[b * n + a] = v;
            }
        }
        g
    });
    let fill_column = |idx: usize, out: &mut [f64]| match &gram {
        Some(g) => out.copy_from_slice(&g[idx * n..(idx + 1) * n]),
        None => {
            for (o, r) in out.iter_mut().zip(rows) {
                *o = dot(&rows[idx], r);
            }
        }
    };
    let mut kernel_col = vec![0.0f64; n];
    let mut kernel_col_j = vec![0.0f64; n];

    let objective = |alpha: &[f64], w: &[f64]| -> f64 {
        0.5 * dot(w, w) + dot(&problem.p, alpha)
    };

    let max_iter = max_epochs.saturating_mul(l.max(1));
    let mut trace = vec![objective(&alpha, &w)];
    let mut iterations = 0;
    let mut converged = false;

    let in_up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < c) || (y[t] < 0.0 && a[t] > 0.0);
    let in_low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < c);

    while iterations < max_iter {
        // First index: maximal violation in the "up" set.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            if in_up(t, &alpha) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let xi = &rows[sample[i]];
        fill_column(sample[i], &mut kernel_col);
        // Second index: largest objective decrease among "low" candidates.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        let kii = sq_norm[sample[i]];
        for t in 0..l {
            if !in_low(t, &alpha) {
                continue;
            }
            let yg = y[t] * grad[t];
            if yg > gmax2 {
                gmax2 = yg;
            }
            let diff = gmax + yg;
            if diff > 0.0 {
                let mut quad = kii + sq_norm[sample[t]] - 2.0 * kernel_col[sample[t]];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let gain = -(diff * diff) / quad;
                if gain < best {
                    best = gain;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            converged = true;
            break;
        }

        let kij = kernel_col[sample[j]];
        let qij = y[i] * y[j] * kij;
        let qii = kii;
        let qjj = sq_norm[sample[j]];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
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
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
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

        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        let xj = &rows[sample[j]];
        for ((wk, a), b) in w.iter_mut().zip(xi).zip(xj) {
            *wk += di * a + dj * b;
        }
        iterations += 1;
        if iterations % l.max(1) == 0 {
            // Refresh exactly once per epoch so incremental updates cannot drift.
            for (s, r) in scores.iter_mut().zip(rows) {
                *s = dot(&w, r);
            }
            trace.push(objective(&alpha, &w));
        } else {
            fill_column(sample[j], &mut kernel_col_j);
            for ((s, a), b) in scores.iter_mut().zip(&kernel_col).zip(&kernel_col_j) {
                *s += di * a + dj * b;
            }
        }
        for t in 0..l {
            grad[t] = y[t] * scores[sample[t]] + problem.p[t];
        }
    }

    // Offset from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut n_free) = (0.0, 0usize);
    for t in 0..l {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        match (ub.is_finite(), lb.is_finite()) {
            (true, true) => (ub + lb) / 2.0,
            (true, false) => ub,
            (false, true) => lb,
            (false, false) => 0.0,
        }
    };

    let final_obj = objective(&alpha, &w);
    if trace.last() != Some(&final_obj) {
        trace.push(final_obj);
    }
    DualSolution {
        w,
        rho,
        iterations,
        converged,
        objective_trace: trace,
    }
}
