//! Damped Gauss-Newton position solver shared by the bistatic-radar and
//! hyperbolic-TDoA localizers. Steps are accepted only when they do not
//! increase the objective (Levenberg-style damping retries otherwise), so
//! the cost history is non-increasing by construction.

use crate::error::{Error, Result};
use crate::scene::Position3;

/// Convergence controls.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Declare convergence when the accepted step is shorter than this.
    pub step_tolerance_m: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iterations: 60, step_tolerance_m: 1e-3 }
    }
}

/// Solver outcome. `converged = false` flags the last iterate of a
/// non-converged solve; degenerate geometry is an error instead.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub position: Position3,
    /// RMS of the residual vector at the solution, in the residual's units.
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted iteration.
    pub cost_history: Vec<f64>,
}

/// One evaluated residual: value and gradient with respect to position.
pub struct ResidualRow {
    pub value: f64,
    pub gradient: [f64; 3],
}

/// Minimize `sum r_i(p)^2` over position by damped Gauss-Newton with the
/// caller's analytic residuals. With `fixed_altitude` the up-component is
/// pinned and only east/north are free.
pub fn solve_position<F>(
    initial: Position3,
    fixed_altitude: Option<f64>,
    eval: F,
    opts: &SolveOptions,
) -> Result<SolveOutcome>
where
    F: Fn(Position3) -> Vec<ResidualRow>,
{
    let dim = if fixed_altitude.is_some() { 2 } else { 3 };
    let mut p = initial;
    if let Some(alt) = fixed_altitude {
        p.up = alt;
    }

    let rows = eval(p);
    let n = rows.len();
    if n < dim {
        return Err(Error::Solver(format!(
            "need at least {dim} residuals for a {dim}-dimensional solve, got {n}"
        )));
    }
    let mut cost = rows.iter().map(|r| r.value * r.value).sum::<f64>();
    let mut rows = rows;
    let mut lambda = 1e-6;
    let mut cost_history = vec![cost];
    let mut iterations = 0;
    let mut converged = false;

    for iter in 0..opts.max_iterations {
        iterations += 1;

        // Normal equations in the free coordinates.
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for row in &rows {
            for a in 0..dim {
                jtr[a] += row.gradient[a] * row.value;
                for (b, jtj_ab) in jtj[a].iter_mut().enumerate().take(dim) {
                    *jtj_ab += row.gradient[a] * row.gradient[b];
                }
            }
        }

        // Rank check at the initial iterate only: it classifies the sensor
        // layout (e.g. collinear receivers). Later iterates may wander into
        // badly conditioned regions, which the damping absorbs.
        if iter == 0 {
            let (eig_min, eig_max) = sym_eigen_range(&jtj, dim);
            if eig_max.is_nan() || eig_max <= 0.0 || eig_min <= eig_max * 1e-14 {
                return Err(Error::Solver(
                    "degenerate geometry: normal-equation matrix is rank deficient".into(),
                ));
            }
        }

        // Damped step, retrying with stronger damping until the objective
        // does not increase.
        let mut accepted = None;
        for _ in 0..25 {
            let mut damped = jtj;
            for a in 0..dim {
                damped[a][a] += lambda * jtj[a][a].max(1e-300);
            }
            let Some(delta) = solve_sym(&damped, &jtr, dim) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            trial.east -= delta[0];
            trial.north -= delta[1];
            if dim == 3 {
                trial.up -= delta[2];
            }
            let trial_rows = eval(trial);
            let trial_cost = trial_rows.iter().map(|r| r.value * r.value).sum::<f64>();
            if trial_cost <= cost {
                let step = (delta[0] * delta[0]
                    + delta[1] * delta[1]
                    + if dim == 3 { delta[2] * delta[2] } else { 0.0 })
                .sqrt();
                accepted = Some((trial, trial_rows, trial_cost, step));
                break;
            }
            lambda *= 10.0;
        }

        let Some((trial, trial_rows, trial_cost, step)) = accepted else {
            converged = false;
            break;
        };
        p = trial;
        rows = trial_rows;
        cost = trial_cost;
        cost_history.push(cost);
        lambda = (lambda / 3.0).max(1e-12);

        if step < opts.step_tolerance_m {
            converged = true;
            break;
        }
    }

    Ok(SolveOutcome {
        position: p,
        residual_rms: (cost / n as f64).sqrt(),
        iterations,
        converged,
        cost_history,
    })
}

/// Grid search over a box, returning the minimizing cell center. Used to
/// seed the iterative solver away from local minima.
pub fn grid_min<F>(
    east: (f64, f64),
    north: (f64, f64),
    up: (f64, f64),
    step: f64,
    cost: F,
) -> Position3
where
    F: Fn(Position3) -> f64,
{
    let steps = |lo: f64, hi: f64| {
        if hi <= lo {
            1
        } else {
            ((hi - lo) / step).ceil() as usize + 1
        }
    };
    let (ne, nn, nu) = (steps(east.0, east.1), steps(north.0, north.1), steps(up.0, up.1));
    let mut best = Position3::new(east.0, north.0, up.0);
    let mut best_cost = f64::INFINITY;
    for i in 0..ne {
        let e = east.0 + i as f64 * step;
        for j in 0..nn {
            let n = north.0 + j as f64 * step;
            for k in 0..nu {
                let u = up.0 + k as f64 * step;
                let p = Position3::new(e, n, u);
                let c = cost(p);
                if c < best_cost {
                    best_cost = c;
                    best = p;
                }
            }
        }
    }
    best
}

/// Solve the symmetric positive-definite `dim x dim` system `A x = b` by
/// Cholesky-free Gaussian elimination with partial pivoting.
fn solve_sym(a: &[[f64; 3]; 3], b: &[f64; 3], dim: usize) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..dim {
        for j in 0..dim {
            m[i][j] = a[i][j];
        }
        m[i][dim] = b[i];
    }
    for col in 0..dim {
        let mut pivot = col;
        for row in col + 1..dim {
            if m[row][col].abs() > m[pivot][col].abs() {
                pivot = row;
            }
        }
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        let pivot_row = m[col];
        for row in m.iter_mut().take(dim).skip(col + 1) {
            let f = row[col] / pivot_row[col];
            for (k, cell) in row.iter_mut().enumerate().skip(col) {
                if k <= dim {
                    *cell -= f * pivot_row[k];
                }
            }
        }
    }
    let mut x = [0.0f64; 3];
    for col in (0..dim).rev() {
        let mut acc = m[col][dim];
        for k in col + 1..dim {
            acc -= m[col][k] * x[k];
        }
        x[col] = acc / m[col][col];
    }
    Some(x)
}

/// Smallest and largest eigenvalue of a symmetric 2x2 or 3x3 matrix.
fn sym_eigen_range(a: &[[f64; 3]; 3], dim: usize) -> (f64, f64) {
    if dim == 2 {
        let tr = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        return (tr / 2.0 - disc, tr / 2.0 + disc);
    }
    // Analytic symmetric 3x3 eigenvalues via the trigonometric method.
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(|x, y| x.partial_cmp(y).unwrap());
        return (d[0], d[2]);
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let detb = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (detb / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let eig1 = q + 2.0 * p * phi.cos();
    let eig3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    (eig3.min(eig1), eig1.max(eig3))
}
