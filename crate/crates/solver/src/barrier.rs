//! Log-barrier interior-point method with damped Newton centering.

use nalgebra::{DMatrix, DVector};

use crate::kkt::{kkt_residual, Multipliers};
use crate::program::{ConvexProgram, Row};
use crate::SolverError;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// KKT residual accepted as optimal.
    pub tol: f64,
    /// Absolute feasibility tolerance on the returned point.
    pub feas_tol: f64,
    /// Barrier stops once the duality gap `m/t` falls below this.
    pub gap_tol: f64,
    pub t0: f64,
    pub mu: f64,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            feas_tol: 1e-8,
            gap_tol: 1e-9,
            t0: 1.0,
            mu: 10.0,
            max_outer: 40,
            max_newton: 200,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub point: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    pub multipliers: Multipliers,
    pub newton_steps: usize,
}

/// Maximizes the program's objective starting from `start`.
///
/// A start that is not strictly feasible first goes through a phase-I
/// problem; if that cannot reach the interior the result is `Infeasible`.
pub fn solve(
    program: &ConvexProgram,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    let n = program.num_vars();
    if start.len() != n {
        return Err(SolverError::Dimension {
            expected: n,
            got: start.len(),
        });
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteStart);
    }
    let rows = program.rows();
    let lower: Vec<f64> = program.variables().iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = program.variables().iter().map(|v| v.upper).collect();
    for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
        if !(l < u) {
            return Err(SolverError::EmptyBox { index: i });
        }
    }

    let mut x = start.to_vec();
    push_into_box(&mut x, &lower, &upper);
    let mut newton_steps = 0;

    if !strictly_feasible(&rows, &x) {
        match phase_one(&rows, &x, &lower, &upper, opts, &mut newton_steps) {
            Some(p) => x = p,
            None => {
                let multipliers = Multipliers::zeros(rows.len(), n);
                return Ok(SolveResult {
                    objective: program.objective_value(&x),
                    kkt_residual: kkt_residual(program, &x, &multipliers),
                    point: x,
                    status: SolveStatus::Infeasible,
                    multipliers,
                    newton_steps,
                });
            }
        }
    }

    let problem = Barrier {
        rows: &rows,
        cost: program.objective().iter().map(|c| -c).collect(),
        lower: &lower,
        upper: &upper,
    };
    let m = problem.barrier_terms() as f64;
    let mut t = opts.t0;
    let mut converged = false;
    for _ in 0..opts.max_outer {
        newton_steps += problem.center(&mut x, t, opts.max_newton, &|_| false);
        if m / t < opts.gap_tol || m == 0.0 {
            converged = true;
            break;
        }
        t *= opts.mu;
    }

    let mut multipliers = problem.multipliers(&x, t);
    let mut kkt = kkt_residual(program, &x, &multipliers);
    if let Some(polished) = polish_multipliers(&rows, &x, &problem, &multipliers) {
        let r = kkt_residual(program, &x, &polished);
        if r < kkt {
            kkt = r;
            multipliers = polished;
        }
    }
    let status = if converged && kkt <= opts.tol && program.max_violation(&x) <= opts.feas_tol {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIter
    };
    Ok(SolveResult {
        objective: program.objective_value(&x),
        point: x,
        status,
        kkt_residual: kkt,
        multipliers,
        newton_steps,
    })
}

fn push_into_box(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &l), &u) in x.iter_mut().zip(lower).zip(upper) {
        let width = u - l;
        let pad = if width.is_finite() {
            (1e-6 * width).min(1e-6)
        } else {
            1e-6 * l.abs().max(u.abs()).clamp(1.0, 1e6)
        };
        if *xi <= l {
            *xi = l + pad;
        }
        if *xi >= u {
            *xi = u - pad;
        }
    }
}

fn strictly_feasible(rows: &[Row], x: &[f64]) -> bool {
    rows.iter().all(|r| r.value(x) < 0.0)
}

/// Minimizes `s` subject to `g_i(x) ≤ s`, stopping as soon as every
/// `g_i(x) < 0`.
fn phase_one(
    rows: &[Row],
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &SolverOptions,
    newton_steps: &mut usize,
) -> Option<Vec<f64>> {
    let n = x0.len();
    let mut x = x0.to_vec();
    // Log arguments must start inside their domain.
    for r in rows {
        if let Some(i) = r.log_arg() {
            if x[i] <= -1.0 + 1e-9 {
                x[i] = 0.0_f64.clamp(lower[i], upper[i]);
                if x[i] <= -1.0 + 1e-9 {
                    return None;
                }
            }
        }
    }
    let s_idx = n;
    let aug: Vec<Row> = rows.iter().map(|r| r.with_linear(s_idx, -1.0)).collect();
    let worst = rows
        .iter()
        .map(|r| r.value(&x))
        .fold(f64::NEG_INFINITY, f64::max);
    if !worst.is_finite() {
        return None;
    }
    let scale = worst.abs().max(1.0);
    x.push(worst + scale);
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    lo.push(-scale);
    hi.push(f64::INFINITY);
    let mut cost = vec![0.0; n + 1];
    cost[s_idx] = 1.0;
    let problem = Barrier {
        rows: &aug,
        cost,
        lower: &lo,
        upper: &hi,
    };
    let done = |z: &[f64]| rows.iter().all(|r| r.value(&z[..n]) < 0.0);
    let m = problem.barrier_terms() as f64;
    let mut t = 1.0 / scale;
    for _ in 0..opts.max_outer {
        *newton_steps += problem.center(&mut x, t, opts.max_newton, &done);
        if done(&x) {
            x.truncate(n);
            return Some(x);
        }
        if m / t < opts.gap_tol * scale {
            break;
        }
        t *= opts.mu;
    }
    None
}

/// `F_t(x) = t·cost·x − Σ log(−g_i) − Σ log(x − l) − Σ log(u − x)`.
struct Barrier<'a> {
    rows: &'a [Row],
    cost: Vec<f64>,
    lower: &'a [f64],
    upper: &'a [f64],
}

impl Barrier<'_> {
    fn barrier_terms(&self) -> usize {
        self.rows.len()
            + self.lower.iter().filter(|l| l.is_finite()).count()
            + self.upper.iter().filter(|u| u.is_finite()).count()
    }

    fn value(&self, x: &[f64], t: f64) -> f64 {
        let mut f = t * self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
        for r in self.rows {
            let g = r.value(x);
            if !(g < 0.0) {
                return f64::INFINITY;
            }
            f -= (-g).ln();
        }
        for ((&xi, &l), &u) in x.iter().zip(self.lower).zip(self.upper) {
            if l.is_finite() {
                if !(xi > l) {
                    return f64::INFINITY;
                }
                f -= (xi - l).ln();
            }
            if u.is_finite() {
                if !(xi < u) {
                    return f64::INFINITY;
                }
                f -= (u - xi).ln();
            }
        }
        f
    }

    fn gradient_hessian(&self, x: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = x.len();
        let mut grad = DVector::from_iterator(n, self.cost.iter().map(|c| t * c));
        let mut hess = DMatrix::<f64>::zeros(n, n);
        let (mut rg, mut rh) = (Vec::new(), Vec::new());
        for r in self.rows {
            let slack = -r.value(x);
            r.derivatives(x, &mut rg, &mut rh);
            let inv = 1.0 / slack;
            for (a, &i) in r.support.iter().enumerate() {
                grad[i] += rg[a] * inv;
                hess[(i, i)] += rh[a] * inv;
                for (b, &j) in r.support.iter().enumerate() {
                    hess[(i, j)] += rg[a] * rg[b] * inv * inv;
                }
            }
        }
        for i in 0..n {
            let (l, u) = (self.lower[i], self.upper[i]);
            if l.is_finite() {
                let d = x[i] - l;
                grad[i] -= 1.0 / d;
                hess[(i, i)] += 1.0 / (d * d);
            }
            if u.is_finite() {
                let d = u - x[i];
                grad[i] += 1.0 / d;
                hess[(i, i)] += 1.0 / (d * d);
            }
        }
        (grad, hess)
    }

    /// Damped Newton on `F_t`; returns the number of steps taken.
    fn center(
        &self,
        x: &mut Vec<f64>,
        t: f64,
        max_newton: usize,
        stop: &dyn Fn(&[f64]) -> bool,
    ) -> usize {
        const ALPHA: f64 = 0.01;
        const BETA: f64 = 0.5;
        let mut steps = 0;
        let mut fx = self.value(x, t);
        while steps < max_newton {
            let (grad, hess) = self.gradient_hessian(x, t);
            let Some(dx) = newton_direction(&hess, &grad) else {
                break;
            };
            let slope = grad.dot(&dx);
            let decrement = -slope;
            if !(decrement > 1e-14) {
                break;
            }
            let mut s = 1.0;
            let mut trial = x.clone();
            let mut accepted = false;
            while s > 1e-14 {
                for (ti, (xi, di)) in trial.iter_mut().zip(x.iter().zip(dx.iter())) {
                    *ti = xi + s * di;
                }
                let ft = self.value(&trial, t);
                if ft.is_finite() && ft <= fx + ALPHA * s * slope {
                    fx = ft;
                    accepted = true;
                    break;
                }
                s *= BETA;
            }
            steps += 1;
            if !accepted {
                // Armijo cannot resolve further progress in floating point;
                // accept a shrinking step only if it still descends along
                // the directional derivative.
                if !self.accept_by_slope(x, &dx, t) {
                    break;
                }
                fx = self.value(x, t);
            } else {
                std::mem::swap(x, &mut trial);
            }
            if stop(x) || decrement / 2.0 < 1e-20 {
                break;
            }
        }
        steps
    }

    fn accept_by_slope(&self, x: &mut Vec<f64>, dx: &DVector<f64>, t: f64) -> bool {
        let mut s = 1.0;
        while s > 1e-12 {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + s * b).collect();
            if self.value(&trial, t).is_finite() {
                let (g, _) = self.gradient_hessian(&trial, t);
                if g.dot(dx) < 0.0 {
                    *x = trial;
                    return true;
                }
            }
            s *= 0.5;
        }
        false
    }

    fn multipliers(&self, x: &[f64], t: f64) -> Multipliers {
        let constraints = self.rows.iter().map(|r| 1.0 / (t * -r.value(x))).collect();
        let lower = x
            .iter()
            .zip(self.lower)
            .map(|(&xi, &l)| {
                if l.is_finite() {
                    1.0 / (t * (xi - l))
                } else {
                    0.0
                }
            })
            .collect();
        let upper = x
            .iter()
            .zip(self.upper)
            .map(|(&xi, &u)| {
                if u.is_finite() {
                    1.0 / (t * (u - xi))
                } else {
                    0.0
                }
            })
            .collect();
        Multipliers {
            constraints,
            lower,
            upper,
        }
    }
}

/// Re-estimates multipliers by least squares on the stationarity condition
/// restricted to the active set, dropping columns that come out negative.
fn polish_multipliers(
    rows: &[Row],
    x: &[f64],
    problem: &Barrier,
    base: &Multipliers,
) -> Option<Multipliers> {
    let n = x.len();
    // (kind, index, column): kind 0 = row, 1 = lower, 2 = upper.
    let mut cols: Vec<(u8, usize, DVector<f64>)> = Vec::new();
    let (mut g, mut h) = (Vec::new(), Vec::new());
    for (i, r) in rows.iter().enumerate() {
        let slack = -r.value(x);
        if base.constraints[i] >= slack {
            r.derivatives(x, &mut g, &mut h);
            let mut col = DVector::zeros(n);
            for (k, &j) in r.support.iter().enumerate() {
                col[j] = g[k];
            }
            cols.push((0, i, col));
        }
    }
    for i in 0..n {
        if problem.lower[i].is_finite() && base.lower[i] >= x[i] - problem.lower[i] {
            let mut col = DVector::zeros(n);
            col[i] = -1.0;
            cols.push((1, i, col));
        }
        if problem.upper[i].is_finite() && base.upper[i] >= problem.upper[i] - x[i] {
            let mut col = DVector::zeros(n);
            col[i] = 1.0;
            cols.push((2, i, col));
        }
    }
    let rhs = DVector::from_iterator(n, problem.cost.iter().map(|c| -c));
    let mut out = Multipliers::zeros(rows.len(), n);
    for _ in 0..n + rows.len() + 1 {
        if cols.is_empty() {
            return Some(out);
        }
        let j = DMatrix::from_columns(&cols.iter().map(|c| c.2.clone()).collect::<Vec<_>>());
        let lam = j.svd(true, true).solve(&rhs, 1e-12).ok()?;
        if lam.iter().all(|&v| v >= 0.0) {
            for ((kind, i, _), &v) in cols.iter().zip(lam.iter()) {
                match kind {
                    0 => out.constraints[*i] = v,
                    1 => out.lower[*i] = v,
                    _ => out.upper[*i] = v,
                }
            }
            return Some(out);
        }
        let worst = lam
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)?;
        cols.remove(worst);
    }
    None
}

/// Solves `H dx = −g`, regularizing the diagonal if `H` is not numerically
/// positive definite.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let diag_max = (0..n)
        .map(|i| hess[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        if reg > 0.0 {
            for i in 0..n {
                h[(i, i)] += reg;
            }
        }
        if let Some(ch) = h.cholesky() {
            let dx = ch.solve(&(-grad));
            if dx.iter().all(|v| v.is_finite()) {
                return Some(dx);
            }
        }
        reg = if reg == 0.0 {
            1e-14 * diag_max
        } else {
            reg * 100.0
        };
    }
    None
}
