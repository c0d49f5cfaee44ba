//! Legendre transforms of convex CGFs: bracketed Newton in one dimension,
//! projected Newton for the vector dual, and projected descent on the
//! primal `inf_{z >= theta} Lambda*(z)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::moments::CgfValue;

/// Residual tolerance for the scalar solver, relative to `max(1, |theta|)`.
pub const SCALAR_TOL: f64 = 1e-10;
/// Projected-gradient tolerance for the vector solvers.
pub const GRAD_TOL: f64 = 1e-8;
/// Largest tolerated disagreement between primal and dual vector rates.
pub const DUALITY_TOL: f64 = 1e-6;

const MAX_REJECTED_NEWTON: u32 = 5;
const MAX_BRACKET: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    AtBoundary,
    Failed,
}

/// Solution of `sup_t <theta, t> - Lambda(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreResult {
    pub theta: Vec<f64>,
    pub t_star: Vec<f64>,
    pub rate: f64,
    pub residual: f64,
    pub status: SolveStatus,
    pub iterations: u32,
    pub method: String,
    /// Primal value for vector solves.
    pub primal_rate: Option<f64>,
    pub detail: Option<String>,
}

impl LegendreResult {
    /// Scalar optimizer.
    pub fn t(&self) -> f64 {
        self.t_star[0]
    }

    pub fn is_converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub(crate) fn boundary(theta: &[f64], method: &str) -> Self {
        Self {
            theta: theta.to_vec(),
            t_star: vec![0.0; theta.len()],
            rate: 0.0,
            residual: 0.0,
            status: SolveStatus::AtBoundary,
            iterations: 0,
            method: method.into(),
            primal_rate: None,
            detail: None,
        }
    }

    fn failed(theta: &[f64], method: &str, t: Vec<f64>, iterations: u32, detail: String) -> Self {
        Self {
            theta: theta.to_vec(),
            t_star: t,
            rate: f64::NAN,
            residual: f64::NAN,
            status: SolveStatus::Failed,
            iterations,
            method: method.into(),
            primal_rate: None,
            detail: Some(detail),
        }
    }
}

/// Scalar Legendre transform on `t >= 0`. `cgf(t)` returns
/// `(Lambda, Lambda', Lambda'')`.
pub fn solve_scalar<F>(theta: f64, cgf: F, method: &str) -> LegendreResult
where
    F: Fn(f64) -> (f64, f64, f64),
{
    let th = [theta];
    let (_, slope0, _) = cgf(0.0);
    if theta <= slope0 {
        return LegendreResult::boundary(&th, method);
    }
    let tol = SCALAR_TOL * theta.abs().max(1.0);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iterations = 0u32;
    loop {
        let (_, d1, _) = cgf(hi);
        iterations += 1;
        if !d1.is_finite() || hi > MAX_BRACKET {
            return LegendreResult::failed(
                &th,
                method,
                vec![hi],
                iterations,
                format!("threshold {theta} is not attained: slope {d1} at t = {hi} still below it"),
            );
        }
        if d1 > theta {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut t = hi;
    let mut rejected = 0u32;
    loop {
        iterations += 1;
        let (v, d1, d2) = cgf(t);
        let r = d1 - theta;
        if r.abs() <= tol {
            if !(d2 > 0.0) {
                return LegendreResult::failed(
                    &th,
                    method,
                    vec![t],
                    iterations,
                    format!("second derivative {d2} is not positive at the solution"),
                );
            }
            return LegendreResult {
                theta: th.to_vec(),
                t_star: vec![t],
                rate: theta * t - v,
                residual: r.abs(),
                status: SolveStatus::Converged,
                iterations,
                method: method.into(),
                primal_rate: None,
                detail: None,
            };
        }
        if r < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || iterations > 500 {
            return LegendreResult::failed(
                &th,
                method,
                vec![t],
                iterations,
                format!("bracket collapsed at t = {t} with residual {r:e}"),
            );
        }
        let newton = t - r / d2;
        t = if rejected < MAX_REJECTED_NEWTON && newton > lo && newton < hi && d2 > 0.0 {
            newton
        } else {
            if rejected < MAX_REJECTED_NEWTON {
                rejected += 1;
            }
            mid
        };
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub_matrix(h: &[f64], n: usize, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| h[rows[i] * n + cols[j]])
}

/// Newton-type step for symmetric positive semidefinite `A`: the
/// pseudo-inverse on the range of `A`, plus a gradient step scaled by the
/// largest eigenvalue along its (numerical) null space. Singular Hessians
/// arise from duplicated or linearly dependent score components.
fn psd_solve(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let eig = a.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = 1e-12 * top;
    let mut x = DVector::zeros(b.len());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let c = v.dot(&b);
        let scale = if ev > cut {
            ev
        } else if top > 0.0 {
            top
        } else {
            1.0
        };
        x += v * (c / scale);
    }
    x
}

/// `sup_{t >= 0} <theta, t> - Lambda(t)` by projected Newton with an
/// Armijo line search.
pub fn solve_dual<F>(theta: &[f64], cgf: F) -> LegendreResult
where
    F: Fn(&[f64]) -> CgfValue,
{
    let method = "projected Newton (dual)";
    let n = theta.len();
    let objective = |c: &CgfValue, t: &[f64]| dot(theta, t) - c.value;
    let mut t = vec![0.0; n];
    let mut cur = cgf(&t);
    let mut iterations = 0u32;
    loop {
        iterations += 1;
        let g: Vec<f64> = theta.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let pg = (0..n)
            .map(|i| {
                if t[i] > 0.0 {
                    g[i].abs()
                } else {
                    g[i].max(0.0)
                }
            })
            .fold(0.0, f64::max);
        if pg <= GRAD_TOL {
            if t.iter().all(|&x| x == 0.0) {
                return LegendreResult::boundary(theta, method);
            }
            return LegendreResult {
                theta: theta.to_vec(),
                rate: objective(&cur, &t),
                t_star: t,
                residual: pg,
                status: SolveStatus::Converged,
                iterations,
                method: method.into(),
                primal_rate: None,
                detail: None,
            };
        }
        if iterations > 200 {
            return LegendreResult::failed(
                theta,
                method,
                t,
                iterations,
                format!("no convergence; projected gradient {pg:e}"),
            );
        }
        let free: Vec<usize> = (0..n).filter(|&i| t[i] > 0.0 || g[i] > 0.0).collect();
        let h = sub_matrix(&cur.hess, n, &free, &free);
        let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let step = psd_solve(h, rhs);
        let mut dir = vec![0.0; n];
        for (k, &i) in free.iter().enumerate() {
            dir[i] = step[k];
        }
        let f0 = objective(&cur, &t);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = t
                .iter()
                .zip(&dir)
                .map(|(a, d)| (a + alpha * d).max(0.0))
                .collect();
            let c = cgf(&trial);
            let f1 = objective(&c, &trial);
            let moved: Vec<f64> = trial.iter().zip(&t).map(|(a, b)| a - b).collect();
            if f1.is_finite() && f1 >= f0 + 1e-4 * dot(&g, &moved) {
                if moved.iter().all(|&m| m == 0.0) {
                    break;
                }
                t = trial;
                cur = c;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return LegendreResult::failed(
                theta,
                method,
                t,
                iterations,
                format!("line search stalled; projected gradient {pg:e}"),
            );
        }
    }
}

/// `Lambda*(z) = sup_t <z, t> - Lambda(t)` over all of `R^n` by damped
/// Newton from `warm`. `None` when the supremum appears to be infinite.
fn conjugate<F>(z: &[f64], warm: &[f64], cgf: &F) -> Option<(f64, Vec<f64>, CgfValue)>
where
    F: Fn(&[f64]) -> CgfValue,
{
    let n = z.len();
    let tol = 1e-11 * z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut t = warm.to_vec();
    let mut cur = cgf(&t);
    let objective = |c: &CgfValue, t: &[f64]| dot(z, t) - c.value;
    for _ in 0..200 {
        let r: Vec<f64> = z.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rn <= tol {
            return Some((objective(&cur, &t), t, cur));
        }
        let h = DMatrix::from_row_slice(n, n, &cur.hess);
        let step = psd_solve(h, DVector::from_vec(r.clone()));
        let f0 = objective(&cur, &t);
        let slope = dot(&r, step.as_slice());
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = t
                .iter()
                .zip(step.iter())
                .map(|(a, d)| a + alpha * d)
                .collect();
            let c = cgf(&trial);
            let f1 = objective(&c, &trial);
            if f1.is_finite() && f1 >= f0 + 1e-4 * alpha * slope {
                moved = trial != t;
                t = trial;
                cur = c;
                break;
            }
            alpha *= 0.5;
        }
        if !moved || t.iter().any(|x| x.abs() > 1e4) {
            break;
        }
    }
    let rn = z
        .iter()
        .zip(&cur.grad)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    (rn <= 1e3 * tol).then(|| (objective(&cur, &t), t, cur))
}

/// Primal value `inf_{z >= theta} Lambda*(z)`, returning the value, the
/// minimizer and the iteration count.
pub fn solve_primal<F>(theta: &[f64], cgf: F) -> Result<(f64, Vec<f64>, u32), String>
where
    F: Fn(&[f64]) -> CgfValue,
{
    let n = theta.len();
    // Feasible start: z = grad Lambda(c * 1) dominates theta for large c.
    let mut c = 1.0;
    let (mut z, mut t) = loop {
        let t0 = vec![c; n];
        let g = cgf(&t0).grad;
        if g.iter().zip(theta).all(|(a, b)| a >= b) {
            break (g, t0);
        }
        c *= 2.0;
        if c > MAX_BRACKET {
            return Err("no feasible starting point above the threshold".into());
        }
    };
    let (mut val, tt, mut cur) = conjugate(&z, &t, &cgf).ok_or("conjugate diverged at start")?;
    t = tt;
    for it in 1..=500u32 {
        let at_bound: Vec<bool> = (0..n).map(|i| z[i] <= theta[i]).collect();
        let pg = (0..n)
            .map(|i| {
                if at_bound[i] {
                    t[i].min(0.0).abs()
                } else {
                    t[i].abs()
                }
            })
            .fold(0.0, f64::max);
        if pg <= GRAD_TOL {
            return Ok((val, z, it));
        }
        let active: Vec<usize> = (0..n).filter(|&i| at_bound[i] && t[i] > 0.0).collect();
        let free: Vec<usize> = (0..n).filter(|&i| !(at_bound[i] && t[i] > 0.0)).collect();
        // Reduced Newton step: the inverse of the free block of the
        // conjugate's Hessian is the Schur complement of the active block.
        let h_ff = sub_matrix(&cur.hess, n, &free, &free);
        let t_f = DVector::from_iterator(free.len(), free.iter().map(|&i| t[i]));
        let schur = if active.is_empty() {
            h_ff
        } else {
            let h_fa = sub_matrix(&cur.hess, n, &free, &active);
            let h_af = sub_matrix(&cur.hess, n, &active, &free);
            let h_aa = sub_matrix(&cur.hess, n, &active, &active);
            let mut sol = DMatrix::zeros(active.len(), free.len());
            for k in 0..free.len() {
                sol.set_column(k, &psd_solve(h_aa.clone(), h_af.column(k).into_owned()));
            }
            h_ff - h_fa * sol
        };
        let step = -(schur * t_f);
        let mut dir = vec![0.0; n];
        for (k, &i) in free.iter().enumerate() {
            dir[i] = step[k];
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..n)
                .map(|i| (z[i] + alpha * dir[i]).max(theta[i]))
                .collect();
            let moved: Vec<f64> = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
            if moved.iter().all(|&m| m == 0.0) {
                break;
            }
            if let Some((v, tt, c)) = conjugate(&trial, &t, &cgf) {
                if v <= val + 1e-4 * dot(&t, &moved) {
                    z = trial;
                    val = v;
                    t = tt;
                    cur = c;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(format!(
                "primal line search stalled after {it} iterations; projected gradient {pg:e}"
            ));
        }
    }
    Err("primal descent did not converge in 500 iterations".into())
}

/// Vector rate: dual value, cross-checked against the primal.
pub fn solve_vector<F>(theta: &[f64], cgf: F) -> LegendreResult
where
    F: Fn(&[f64]) -> CgfValue,
{
    let mut dual = solve_dual(theta, &cgf);
    dual.method = "projected Newton (dual) / projected descent (primal)".into();
    if dual.status != SolveStatus::Converged {
        return dual;
    }
    match solve_primal(theta, &cgf) {
        Ok((primal, _, _)) => {
            dual.primal_rate = Some(primal);
            let gap = (primal - dual.rate).abs();
            if gap > DUALITY_TOL {
                dual.status = SolveStatus::Failed;
                dual.detail = Some(format!(
                    "primal {primal} and dual {} disagree by {gap:e}",
                    dual.rate
                ));
            }
        }
        Err(e) => {
            dual.status = SolveStatus::Failed;
            dual.detail = Some(format!("primal solve failed: {e}"));
        }
    }
    dual
}
