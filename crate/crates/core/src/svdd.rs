//! SVDD in the shared subspace, solved in the dual with SMO-style pairwise
//! updates:
//!
//! ```text
//! max  sum_i a_i <y_i, y_i> - sum_ij a_i a_j <y_i, y_j>
//! s.t. sum_i a_i = 1,  0 <= a_i <= C
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};

/// alpha values within this distance of a bound are considered at the bound.
pub const BOUND_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoOptions {
    /// Stop once the maximal KKT violation drops below this.
    pub tol: f64,
    /// Budget in sweeps; one sweep is N pair updates.
    pub max_sweeps: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvddSolution {
    pub alpha: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: f64,
    pub c: f64,
    pub support: Vec<usize>,
    pub boundary: Vec<usize>,
    pub iterations: usize,
    pub max_violation: f64,
}

impl SvddSolution {
    pub fn radius_squared(&self) -> f64 {
        self.radius * self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// Dual objective `sum a_i K_ii - a^T K a` for the columns of `y`.
pub fn dual_objective(y: &DMatrix<f64>, alpha: &[f64]) -> f64 {
    let a = DVector::from_column_slice(alpha);
    let center = y * &a;
    let diag: f64 = y
        .column_iter()
        .zip(alpha)
        .map(|(col, ai)| ai * col.norm_squared())
        .sum();
    diag - center.norm_squared()
}

/// Solve the dual for the `d x N` matrix `y` with the default options.
pub fn solve_svdd(y: &DMatrix<f64>, c: f64) -> Result<SvddSolution> {
    solve_svdd_with(y, c, SmoOptions::default())
}

pub fn solve_svdd_with(y: &DMatrix<f64>, c: f64, opts: SmoOptions) -> Result<SvddSolution> {
    let n = y.ncols();
    if n == 0 {
        return invalid("SVDD needs at least one point");
    }
    let min_c = 1.0 / n as f64;
    if !(c >= min_c * (1.0 - 1e-12)) {
        return Err(Error::InfeasibleC { c, min: min_c });
    }
    let c = c.min(1.0);
    let k = y.transpose() * y;

    // feasible start: fill greedily up to C until the mass reaches 1
    let mut alpha = vec![0.0; n];
    let mut remaining: f64 = 1.0;
    for a in alpha.iter_mut() {
        let take = remaining.min(c);
        *a = take;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    if remaining > 0.0 {
        // only reachable through rounding at C ~ 1/N
        let share = remaining / n as f64;
        alpha.iter_mut().for_each(|a| *a += share);
    }

    // gradient of f(a) = a^T K a - diag(K)^T a
    let mut grad: Vec<f64> = (0..n)
        .map(|i| 2.0 * (0..n).map(|j| k[(i, j)] * alpha[j]).sum::<f64>() - k[(i, i)])
        .collect();

    let budget = opts.max_sweeps.saturating_mul(n).max(1);
    let mut iterations = 0;
    let mut violation;
    loop {
        // i: may grow (a_i < C), smallest gradient; j: may shrink (a_j > 0), largest
        let mut up = None;
        let mut up_g = f64::INFINITY;
        let mut down = None;
        let mut down_g = f64::NEG_INFINITY;
        for t in 0..n {
            if alpha[t] < c - BOUND_EPS && grad[t] < up_g {
                up_g = grad[t];
                up = Some(t);
            }
            if alpha[t] > BOUND_EPS && grad[t] > down_g {
                down_g = grad[t];
                down = Some(t);
            }
        }
        let (Some(i), Some(j)) = (up, down) else {
            violation = 0.0;
            break;
        };
        violation = down_g - up_g;
        if violation < opts.tol || iterations >= budget {
            break;
        }
        let curvature = 2.0 * (k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)]);
        let max_step = (c - alpha[i]).min(alpha[j]);
        let step = if curvature > 1e-15 {
            (violation / curvature).min(max_step)
        } else {
            max_step
        };
        if step <= 0.0 {
            break;
        }
        alpha[i] += step;
        alpha[j] -= step;
        for (t, g) in grad.iter_mut().enumerate() {
            *g += 2.0 * step * (k[(t, i)] - k[(t, j)]);
        }
        iterations += 1;
    }

    if violation > 0.0 {
        if let Some((polished, v)) = polish(&k, &alpha, c) {
            if v <= violation {
                alpha = polished;
                violation = v;
            }
        }
    }

    let a = DVector::from_column_slice(&alpha);
    let center = y * &a;
    let dist2: Vec<f64> = y.column_iter().map(|col| (col - &center).norm_squared()).collect();
    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > BOUND_EPS).collect();
    let boundary: Vec<usize> = support
        .iter()
        .copied()
        .filter(|&t| alpha[t] < c - BOUND_EPS)
        .collect();
    let r2 = if !boundary.is_empty() {
        boundary.iter().map(|&t| dist2[t]).sum::<f64>() / boundary.len() as f64
    } else {
        support.iter().map(|&t| dist2[t]).fold(0.0, f64::max)
    };
    Ok(SvddSolution {
        alpha,
        center: center.as_slice().to_vec(),
        radius: r2.max(0.0).sqrt(),
        c,
        support,
        boundary,
        iterations,
        max_violation: violation,
    })
}

/// Largest KKT violation of a feasible `alpha`: max gradient over entries
/// that may shrink minus min gradient over entries that may grow.
fn kkt_violation(k: &DMatrix<f64>, alpha: &[f64], c: f64) -> f64 {
    let n = alpha.len();
    let a = DVector::from_column_slice(alpha);
    let grad = k * &a * 2.0 - k.diagonal();
    let mut up = f64::INFINITY;
    let mut down = f64::NEG_INFINITY;
    for t in 0..n {
        if alpha[t] < c - BOUND_EPS {
            up = up.min(grad[t]);
        }
        if alpha[t] > BOUND_EPS {
            down = down.max(grad[t]);
        }
    }
    (down - up).max(0.0)
}

/// SMO converges slowly on ill-conditioned faces, so finish with one exact
/// solve of the equality-constrained problem on the free set, keeping the
/// bounded entries fixed. Returns `None` when the system is singular or the
/// solution leaves the box.
fn polish(k: &DMatrix<f64>, alpha: &[f64], c: f64) -> Option<(Vec<f64>, f64)> {
    let free: Vec<usize> = (0..alpha.len())
        .filter(|&t| alpha[t] > BOUND_EPS && alpha[t] < c - BOUND_EPS)
        .collect();
    if free.is_empty() {
        return None;
    }
    let capped: Vec<usize> = (0..alpha.len()).filter(|&t| alpha[t] >= c - BOUND_EPS).collect();
    let f = free.len();
    // [2 K_FF  -1] [a_F]   [diag_F - 2 K_FU c]
    // [  1^T    0] [ mu] = [1 - |U| c        ]
    let mut sys = DMatrix::zeros(f + 1, f + 1);
    let mut rhs = DVector::zeros(f + 1);
    for (r, &i) in free.iter().enumerate() {
        for (col, &j) in free.iter().enumerate() {
            sys[(r, col)] = 2.0 * k[(i, j)];
        }
        sys[(r, f)] = -1.0;
        sys[(f, r)] = 1.0;
        rhs[r] = k[(i, i)] - 2.0 * capped.iter().map(|&j| k[(i, j)] * c).sum::<f64>();
    }
    rhs[f] = 1.0 - capped.len() as f64 * c;
    let sol = sys.lu().solve(&rhs)?;
    let mut out: Vec<f64> = alpha.iter().map(|&a| if a >= c - BOUND_EPS { c } else if a <= BOUND_EPS { 0.0 } else { a }).collect();
    for (r, &i) in free.iter().enumerate() {
        let a = sol[r];
        if !a.is_finite() || a <= 0.0 || a >= c {
            return None;
        }
        out[i] = a;
    }
    let v = kkt_violation(k, &out, c);
    Some((out, v))
}

/// `|y - a|^2 - R^2`; nonpositive means inside the description.
pub fn score(solution: &SvddSolution, y: &[f64]) -> Result<f64> {
    if y.len() != solution.center.len() {
        return shape(format!(
            "score expects a {}-vector, got {}",
            solution.center.len(),
            y.len()
        ));
    }
    let d2: f64 = y
        .iter()
        .zip(&solution.center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(d2 - solution.radius_squared())
}
