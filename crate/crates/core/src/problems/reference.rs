//! Reference solutions and problem constants.

use alloc::vec;
use alloc::vec::Vec;

use super::{BatchSampler, FiniteSumProblem, Loss, ProblemMetadata};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, least_squares, symmetric_eigenvalues, Matrix};
use crate::math::{abs, dot, norm_sq, sqrt};

const GRAD_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 500;
/// Largest dimension for which the full Hessian spectrum is computed.
const EIGEN_MAX_DIM: usize = 400;

/// Computes `x*`, `f*`, `L_max` and the other certified constants.
///
/// Pure least-squares problems are solved directly (minimum-norm solution
/// of the normal equations); everything else uses damped Newton from the
/// origin until `‖∇f‖ ≤ 1e−12` relative to `max(1, ‖∇f(0)‖)`.
pub fn solve_reference(problem: &FiniteSumProblem) -> Result<ProblemMetadata> {
    let d = problem.dim();
    let zero = vec![0.0; d];
    let g0 = sqrt(norm_sq(&problem.full_gradient(&zero)?));
    let tol = GRAD_TOL * g0.max(1.0);

    let all_ls = problem.components().iter().all(|c| matches!(c.loss, Loss::SquaredResidual { .. }));
    let x_star = if all_ls { solve_least_squares(problem)? } else { damped_newton(problem, tol)? };

    let f_star = problem.full_objective(&x_star)?;
    let gnorm = sqrt(norm_sq(&problem.full_gradient(&x_star)?));
    let (l_f, mu) = curvature_bounds(problem);
    let gaps = component_gaps(problem, &x_star)?;
    let sigma2 = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok(ProblemMetadata {
        x_star,
        f_star,
        l_max: problem.l_max(),
        l_f: Some(l_f),
        mu,
        sigma2: Some(sigma2),
        interpolated: sigma2 <= 1e-10,
        approximate: (gnorm > tol).then_some(gnorm),
    })
}

/// Per-component `f_i(x) − ℓ_i*` in index order.
pub(crate) fn component_gaps(problem: &FiniteSumProblem, x: &[f64]) -> Result<Vec<f64>> {
    problem
        .components()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let v = c.value(x);
            if v.is_finite() {
                Ok(v - c.lower_bound)
            } else {
                Err(Error::NonFinite { index: i })
            }
        })
        .collect()
}

/// Rows scaled so that `f(x) = ½‖Ãx − b̃‖²`.
fn scaled_system(problem: &FiniteSumProblem) -> (Matrix, Vec<f64>) {
    let n = problem.n();
    let d = problem.dim();
    let mut a = Matrix::zeros(n, d);
    let mut b = vec![0.0; n];
    for (i, c) in problem.components().iter().enumerate() {
        if let Loss::SquaredResidual { row, target, weight } = &c.loss {
            let s = sqrt(weight / n as f64);
            a.row_mut(i).iter_mut().zip(row).for_each(|(o, v)| *o = s * v);
            b[i] = s * target;
        }
    }
    (a, b)
}

fn solve_least_squares(problem: &FiniteSumProblem) -> Result<Vec<f64>> {
    let (a, b) = scaled_system(problem);
    match least_squares(&a, &b) {
        Ok(x) => Ok(x),
        Err(Error::Singular) => Ok(cgls(&a, &b)),
        Err(e) => Err(e),
    }
}

/// Conjugate gradients on the normal equations from the origin; converges to
/// the minimum-norm solution for rank-deficient systems.
fn cgls(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let d = a.cols();
    let mut x = vec![0.0; d];
    let mut r = b.to_vec();
    let mut s = a.matvec_t(&r);
    let mut p = s.clone();
    let mut gamma = norm_sq(&s);
    let stop = 1e-28 * gamma.max(1.0);
    for _ in 0..(10 * d).max(100) {
        if gamma <= stop {
            break;
        }
        let q = a.matvec(&p);
        let qq = norm_sq(&q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        s = a.matvec_t(&r);
        let gamma_new = norm_sq(&s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p.iter_mut().zip(&s).for_each(|(pi, si)| *pi = si + beta * *pi);
    }
    x
}

fn hessian(problem: &FiniteSumProblem, x: &[f64]) -> Matrix {
    let d = problem.dim();
    let mut h = Matrix::zeros(d, d);
    let scale = 1.0 / problem.n() as f64;
    for c in problem.components() {
        c.accumulate_hessian(x, scale, &mut h);
    }
    h
}

fn damped_newton(problem: &FiniteSumProblem, tol: f64) -> Result<Vec<f64>> {
    let d = problem.dim();
    let mut x = vec![0.0; d];
    let mut f = problem.full_objective(&x)?;
    for _ in 0..NEWTON_MAX_ITERS {
        let g = problem.full_gradient(&x)?;
        if sqrt(norm_sq(&g)) <= tol {
            break;
        }
        let mut h = hessian(problem, &x);
        let trace: f64 = (0..d).map(|i| h[(i, i)]).sum();
        let shift = 1e-14 * (trace / d as f64).max(f64::MIN_POSITIVE);
        for i in 0..d {
            h[(i, i)] += shift;
        }
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let p = match cholesky_solve(&h, &neg_g) {
            Ok(p) => p,
            Err(_) => neg_g.clone(),
        };
        let slope = dot(&g, &p);
        if !(slope < 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + t * pi).collect();
            if let Ok(ft) = problem.full_objective(&trial) {
                // near the optimum the decrease drops below the rounding of f
                if ft <= f + 1e-4 * t * slope + 4.0 * f64::EPSILON * abs(f) {
                    x = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(x)
}

/// `(L_f, μ)` from the curvature upper bound `(1/n) Σ c_i a_i a_iᵀ`.
///
/// For logistic components `c_i = 1/4` bounds the true curvature from above,
/// so `μ` is only reported for problems without logistic terms.
fn curvature_bounds(problem: &FiniteSumProblem) -> (f64, Option<f64>) {
    let d = problem.dim();
    let n = problem.n() as f64;
    let has_logistic = problem.components().iter().any(|c| matches!(c.loss, Loss::Logistic { .. }));
    let iso: f64 = problem
        .components()
        .iter()
        .filter_map(|c| match c.loss {
            Loss::Quadratic { curvature, .. } => Some(curvature / n),
            _ => None,
        })
        .sum();
    if d <= EIGEN_MAX_DIM {
        let mut h = Matrix::zeros(d, d);
        for c in problem.components() {
            if let Some((coef, row)) = c.curvature_row() {
                let coef = coef / n;
                for (i, ai) in row.iter().enumerate() {
                    h.row_mut(i).iter_mut().zip(row).for_each(|(o, aj)| *o += coef * ai * aj);
                }
            }
        }
        for i in 0..d {
            h[(i, i)] += iso;
        }
        let ev = symmetric_eigenvalues(&h);
        let l = ev[d - 1].max(0.0);
        let lo = ev[0];
        let mu = (!has_logistic && lo > 1e-12 * l).then_some(lo);
        (l, mu)
    } else {
        // power iteration on the implicit operator
        let mut v = vec![1.0 / sqrt(d as f64); d];
        let mut lambda = 0.0;
        for _ in 0..1000 {
            let mut w = vec![0.0; d];
            for c in problem.components() {
                if let Some((coef, row)) = c.curvature_row() {
                    let s = coef / n * dot(row, &v);
                    w.iter_mut().zip(row).for_each(|(o, a)| *o += s * a);
                }
            }
            w.iter_mut().zip(&v).for_each(|(o, vi)| *o += iso * vi);
            let norm = sqrt(norm_sq(&w));
            if norm == 0.0 {
                break;
            }
            let next = norm;
            w.iter_mut().for_each(|o| *o /= norm);
            v = w;
            if (next - lambda).abs() <= 1e-12 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        (lambda, None)
    }
}

/// Estimate of `σ² = E_S[f_S(x*) − ℓ_S*]` at a given batch size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma2Estimate {
    pub value: f64,
    /// Standard error of the Monte-Carlo mean; `None` for exact enumeration.
    pub std_error: Option<f64>,
}

impl Sigma2Estimate {
    pub fn is_exact(&self) -> bool {
        self.std_error.is_none()
    }
}

const ENUMERATION_LIMIT: u128 = 100_000;

fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc)
}

/// Enumerates all batches when `C(n, B) ≤ 10⁵`, otherwise averages `samples`
/// batches drawn from the run sampler.
pub fn estimate_sigma2(
    problem: &FiniteSumProblem,
    metadata: &ProblemMetadata,
    batch_size: usize,
    samples: usize,
    seed: u64,
) -> Result<Sigma2Estimate> {
    let n = problem.n();
    if batch_size == 0 || batch_size > n {
        return Err(Error::param("batch_size", alloc::format!("must lie in [1, {n}]")));
    }
    let gaps = component_gaps(problem, &metadata.x_star)?;
    let b = batch_size as f64;
    let batch_gap = |idx: &[usize]| idx.iter().map(|&i| gaps[i]).sum::<f64>() / b;

    if binomial(n, batch_size).is_some_and(|c| c <= ENUMERATION_LIMIT) {
        let mut idx: Vec<usize> = (0..batch_size).collect();
        let mut total = 0.0;
        let mut count = 0u64;
        loop {
            total += batch_gap(&idx);
            count += 1;
            // next combination in lexicographic order
            let mut i = batch_size;
            loop {
                if i == 0 {
                    return Ok(Sigma2Estimate { value: total / count as f64, std_error: None });
                }
                i -= 1;
                if idx[i] < n - batch_size + i {
                    break;
                }
            }
            idx[i] += 1;
            for j in i + 1..batch_size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    if samples < 2 {
        return Err(Error::param("samples", "Monte-Carlo estimation needs at least 2 samples"));
    }
    let mut sampler = BatchSampler::new(n, batch_size, seed, 0)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let v = batch_gap(sampler.next_batch().indices());
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok(Sigma2Estimate { value: mean, std_error: Some(sqrt(var / m)) })
}

/// Which heavy-ball step-size formula to use with `β*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaForm {
    /// `γ* = (1 + √β*)² / L`
    #[default]
    Squared,
    /// `γ* = (1 + √β*) / L`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbParams {
    pub beta: f64,
    pub gamma: f64,
}

/// Optimal heavy-ball momentum and step-size for an `L`-smooth,
/// `μ`-strongly convex quadratic.
pub fn optimal_hb_params(l: f64, mu: f64, form: GammaForm) -> Result<HbParams> {
    if !(mu > 0.0) {
        return Err(Error::param("mu", "must be positive"));
    }
    if !(l >= mu) || !l.is_finite() {
        return Err(Error::param("L", "must be finite and at least mu"));
    }
    let (sl, sm) = (sqrt(l), sqrt(mu));
    let beta = (sl - sm) * (sl - sm) / ((sl + sm) * (sl + sm));
    let root = 1.0 + sqrt(beta);
    let gamma = match form {
        GammaForm::Squared => root * root / l,
        GammaForm::Linear => root / l,
    };
    Ok(HbParams { beta, gamma })
}
