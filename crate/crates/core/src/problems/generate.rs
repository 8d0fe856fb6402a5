//! Seeded synthetic problem generators.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{solve_reference, Component, FiniteSumProblem};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};
use crate::math::{dot, powf, sigmoid, sqrt};

/// Least squares `f(x) = ½‖Ax − b‖²` written as the mean of
/// `f_i(x) = (n/2)(a_i·x − b_i)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresSpec {
    pub n: usize,
    pub d: usize,
    /// Requested condition number of `AᵀA` (over its nonzero spectrum).
    pub cond_ata: f64,
    /// `b = A x_gen` exactly when true.
    pub consistent: bool,
    /// Noise standard deviation relative to the RMS of `A x_gen`; ignored
    /// for consistent instances.
    pub noise: f64,
    pub planted: Planted,
    /// Project the noise onto the orthogonal complement of `range(A)`, so
    /// that `x_gen` stays the minimizer while `σ² > 0` (needs `n > d`).
    pub orthogonal_noise: bool,
    pub seed: u64,
}

/// Distribution of the planted vector `x_gen`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Planted {
    /// `x_gen ~ N(0, I)`.
    #[default]
    Gaussian,
    /// `x_gen = Σ_j ±v_j` over the right singular vectors, so every
    /// direction of the spectrum starts with the same error.
    SpectralFlat,
}

impl LeastSquaresSpec {
    pub fn new(n: usize, d: usize, cond_ata: f64, consistent: bool, seed: u64) -> Self {
        LeastSquaresSpec {
            n,
            d,
            cond_ata,
            consistent,
            noise: 0.5,
            planted: Planted::Gaussian,
            orthogonal_noise: false,
            seed,
        }
    }

    pub fn with_orthogonal_noise(mut self, on: bool) -> Self {
        self.orthogonal_noise = on;
        self
    }

    pub fn with_planted(mut self, planted: Planted) -> Self {
        self.planted = planted;
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    /// Singular values of `A`: log-uniform from 1 down to `1/√cond`.
    pub fn singular_values(&self) -> Vec<f64> {
        let k = self.n.min(self.d);
        if k == 1 {
            return alloc::vec![1.0];
        }
        (0..k).map(|j| powf(self.cond_ata, -(j as f64) / (2.0 * (k - 1) as f64))).collect()
    }

    /// Builds `A = U Σ Vᵀ` with `U`, `V` drawn as the `Q` factor of Gaussian
    /// matrices.
    pub fn design_matrix(&self, rng: &mut ChaCha8Rng) -> Matrix {
        self.factors(rng).0
    }

    /// `A` with its left and right singular vectors `U`, `V`.
    fn factors(&self, rng: &mut ChaCha8Rng) -> (Matrix, Matrix, Matrix) {
        let k = self.n.min(self.d);
        let u = random_orthonormal(self.n, k, rng);
        let v = random_orthonormal(self.d, k, rng);
        let s = self.singular_values();
        let us = Matrix::from_fn(self.n, k, |i, j| u[(i, j)] * s[j]);
        (us.matmul(&v.transpose()), u, v)
    }

    pub fn generate(&self) -> Result<FiniteSumProblem> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::param("n, d", "must be positive"));
        }
        if !(self.cond_ata >= 1.0) || !self.cond_ata.is_finite() {
            return Err(Error::param("cond_ata", "must be a finite value >= 1"));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::param("noise", "must be nonnegative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (a, u, v) = self.factors(&mut rng);
        let x_gen: Vec<f64> = match self.planted {
            Planted::Gaussian => (0..self.d).map(|_| rng.sample(StandardNormal)).collect(),
            Planted::SpectralFlat => {
                let signs: Vec<f64> = (0..v.cols()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                v.matvec(&signs)
            }
        };
        let mut b: Vec<f64> = (0..self.n).map(|i| dot(a.row(i), &x_gen)).collect();
        if !self.consistent {
            let rms = sqrt(b.iter().map(|v| v * v).sum::<f64>() / self.n as f64);
            let sd = self.noise * if rms > 0.0 { rms } else { 1.0 };
            let mut e: Vec<f64> = (0..self.n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
            if self.orthogonal_noise && self.n > self.d {
                let coef = u.matvec_t(&e);
                let inside = u.matvec(&coef);
                e.iter_mut().zip(&inside).for_each(|(v, w)| *v -= w);
            }
            b.iter_mut().zip(&e).for_each(|(bi, ei)| *bi += ei);
        }
        let weight = self.n as f64;
        let components = (0..self.n).map(|i| Component::squared_residual(a.row(i).to_vec(), b[i], weight)).collect();
        let mut problem = FiniteSumProblem::new(components)?;

        let mut meta = solve_reference(&problem)?;
        if self.consistent && self.d <= self.n {
            // x_gen is the unique minimizer and reproduces b bit for bit.
            meta.f_star = problem.full_objective(&x_gen)?;
            meta.x_star = x_gen;
            meta.approximate = None;
        }
        let s = self.singular_values();
        meta.l_f = Some(s[0] * s[0]);
        meta.mu = if self.d <= self.n { s.last().map(|v| v * v) } else { None };
        let gaps = super::reference::component_gaps(&problem, &meta.x_star)?;
        let sigma2 = gaps.iter().sum::<f64>() / gaps.len() as f64;
        meta.sigma2 = Some(sigma2);
        meta.interpolated = self.consistent || sigma2 <= 1e-10;
        problem.set_metadata(Some(meta));
        Ok(problem)
    }
}

/// Convenience wrapper over [`LeastSquaresSpec`] with the default noise level.
pub fn generate_least_squares(
    n: usize,
    d: usize,
    cond_ata: f64,
    consistent: bool,
    seed: u64,
) -> Result<FiniteSumProblem> {
    LeastSquaresSpec::new(n, d, cond_ata, consistent, seed).generate()
}

/// Binary logistic regression with Gaussian features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticSpec {
    pub n: usize,
    pub d: usize,
    /// Labels follow the sign of a planted separator and points are pushed
    /// off it by `margin`; otherwise labels are drawn from the logistic model.
    pub separable: bool,
    pub margin: f64,
    /// Norm of the planted separator.
    pub signal: f64,
    pub seed: u64,
}

impl LogisticSpec {
    pub fn new(n: usize, d: usize, separable: bool, seed: u64) -> Self {
        LogisticSpec { n, d, separable, margin: 0.5, signal: 2.0, seed }
    }

    pub fn generate(&self) -> Result<FiniteSumProblem> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::param("n, d", "must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut w: Vec<f64> = (0..self.d).map(|_| rng.sample(StandardNormal)).collect();
        let wn = sqrt(dot(&w, &w)).max(f64::MIN_POSITIVE);
        w.iter_mut().for_each(|v| *v /= wn);
        let mut components = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let mut row: Vec<f64> = (0..self.d).map(|_| rng.sample(StandardNormal)).collect();
            let score = self.signal * dot(&row, &w);
            let label = if self.separable {
                let y = if score >= 0.0 { 1.0 } else { -1.0 };
                row.iter_mut().zip(&w).for_each(|(a, wi)| *a += y * self.margin * wi);
                y
            } else {
                let u: f64 = rng.random();
                if u < sigmoid(score) {
                    1.0
                } else {
                    -1.0
                }
            };
            components.push(Component::logistic(row, label));
        }
        let mut problem = FiniteSumProblem::new(components)?;
        let mut meta = solve_reference(&problem)?;
        if self.separable {
            // The infimum 0 is approached along the separator but not attained.
            meta.interpolated = true;
        }
        problem.set_metadata(Some(meta));
        Ok(problem)
    }
}

pub fn generate_logistic(n: usize, d: usize, separable: bool, seed: u64) -> Result<FiniteSumProblem> {
    LogisticSpec::new(n, d, separable, seed).generate()
}

/// `rows x cols` matrix with orthonormal columns (`rows >= cols`).
fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let g = Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    Qr::new(&g).thin_q()
}
