//! Finite-sum objectives `f(x) = (1/n) Σ f_i(x)` with per-component lower
//! bounds, plus generators and reference solvers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::{dot, norm_sq, sigmoid, softplus};

mod generate;
mod reference;
mod sampling;

pub use generate::{generate_least_squares, generate_logistic, LeastSquaresSpec, LogisticSpec, Planted};
pub use reference::{estimate_sigma2, optimal_hb_params, solve_reference, GammaForm, HbParams, Sigma2Estimate};
pub use sampling::{BatchSampler, Minibatch};

/// Loss family of a single component.
#[derive(Debug, Clone, PartialEq)]
pub enum Loss {
    /// `weight/2 · (row·x − target)²`
    SquaredResidual { row: Vec<f64>, target: f64, weight: f64 },
    /// `log(1 + exp(−label · row·x))`, `label ∈ {−1, +1}`
    Logistic { row: Vec<f64>, label: f64 },
    /// `curvature/2 · ‖x − center‖²`
    Quadratic { center: Vec<f64>, curvature: f64 },
}

/// One summand `f_i` with its lower bound `ℓ_i*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub loss: Loss,
    pub lower_bound: f64,
}

impl Component {
    pub fn squared_residual(row: Vec<f64>, target: f64, weight: f64) -> Self {
        Component { loss: Loss::SquaredResidual { row, target, weight }, lower_bound: 0.0 }
    }

    pub fn logistic(row: Vec<f64>, label: f64) -> Self {
        Component { loss: Loss::Logistic { row, label }, lower_bound: 0.0 }
    }

    pub fn quadratic(center: Vec<f64>, curvature: f64) -> Self {
        Component { loss: Loss::Quadratic { center, curvature }, lower_bound: 0.0 }
    }

    pub fn with_lower_bound(mut self, lower_bound: f64) -> Self {
        self.lower_bound = lower_bound;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.loss {
            Loss::SquaredResidual { row, .. } | Loss::Logistic { row, .. } => row.len(),
            Loss::Quadratic { center, .. } => center.len(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.loss {
            Loss::SquaredResidual { row, target, weight } => {
                let r = dot(row, x) - target;
                0.5 * weight * r * r
            }
            Loss::Logistic { row, label } => softplus(-label * dot(row, x)),
            Loss::Quadratic { center, curvature } => 0.5 * curvature * crate::math::dist_sq(x, center),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.value_and_accumulate(x, &mut g);
        g
    }

    /// Returns `f_i(x)` and adds `∇f_i(x)` to `grad`.
    ///
    /// The returned flag is false when the value or the gradient coefficient
    /// is not finite.
    pub fn value_and_accumulate(&self, x: &[f64], grad: &mut [f64]) -> (f64, bool) {
        match &self.loss {
            Loss::SquaredResidual { row, target, weight } => {
                let r = dot(row, x) - target;
                let coef = weight * r;
                for (g, a) in grad.iter_mut().zip(row) {
                    *g += coef * a;
                }
                let v = 0.5 * weight * r * r;
                (v, v.is_finite() && coef.is_finite())
            }
            Loss::Logistic { row, label } => {
                let m = label * dot(row, x);
                let coef = -label * sigmoid(-m);
                for (g, a) in grad.iter_mut().zip(row) {
                    *g += coef * a;
                }
                let v = softplus(-m);
                (v, v.is_finite() && coef.is_finite())
            }
            Loss::Quadratic { center, curvature } => {
                let mut v = 0.0;
                for ((g, xi), ci) in grad.iter_mut().zip(x).zip(center) {
                    let diff = xi - ci;
                    *g += curvature * diff;
                    v += diff * diff;
                }
                let v = 0.5 * curvature * v;
                (v, v.is_finite())
            }
        }
    }

    /// Smoothness constant `L_i`.
    pub fn smoothness(&self) -> f64 {
        match &self.loss {
            Loss::SquaredResidual { row, weight, .. } => weight * norm_sq(row),
            Loss::Logistic { row, .. } => norm_sq(row) / 4.0,
            Loss::Quadratic { curvature, .. } => *curvature,
        }
    }

    /// Adds `scale · ∇²f_i(x)` to `h`.
    pub(crate) fn accumulate_hessian(&self, x: &[f64], scale: f64, h: &mut Matrix) {
        let (row, c) = match &self.loss {
            Loss::SquaredResidual { row, weight, .. } => (row, *weight),
            Loss::Logistic { row, label } => {
                let s = sigmoid(label * dot(row, x));
                (row, s * (1.0 - s))
            }
            Loss::Quadratic { curvature, .. } => {
                for i in 0..h.rows() {
                    h[(i, i)] += scale * curvature;
                }
                return;
            }
        };
        let c = c * scale;
        for (i, ai) in row.iter().enumerate() {
            if *ai == 0.0 {
                continue;
            }
            let hrow = h.row_mut(i);
            for (hj, aj) in hrow.iter_mut().zip(row) {
                *hj += c * ai * aj;
            }
        }
    }

    /// Upper bound on the Hessian as `(coefficient, row)` when the loss is a
    /// function of `row·x`.
    pub(crate) fn curvature_row(&self) -> Option<(f64, &[f64])> {
        match &self.loss {
            Loss::SquaredResidual { row, weight, .. } => Some((*weight, row)),
            Loss::Logistic { row, .. } => Some((0.25, row)),
            Loss::Quadratic { .. } => None,
        }
    }
}

/// Certified reference quantities attached to a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemMetadata {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// `max_i L_i`
    pub l_max: f64,
    /// Smoothness constant of the mean `f`, when known.
    pub l_f: Option<f64>,
    /// Strong-convexity constant of `f`, when positive.
    pub mu: Option<f64>,
    /// `E_S[f_S(x*) − ℓ_S*]`; identical for every batch size under uniform
    /// sampling without replacement.
    pub sigma2: Option<f64>,
    pub interpolated: bool,
    /// Set when the reference solve stopped before reaching the gradient
    /// tolerance; holds the achieved `‖∇f(x*)‖`.
    pub approximate: Option<f64>,
}

/// `f(x) = (1/n) Σ_i f_i(x)` over an ordered collection of components.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSumProblem {
    components: Vec<Component>,
    dim: usize,
    metadata: Option<ProblemMetadata>,
}

/// Mean value, gradient and lower bound over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchEval {
    pub value: f64,
    pub lower_bound: f64,
}

impl BatchEval {
    /// `f_S(x) − ℓ_S*`, clamped at zero.
    pub fn gap(&self) -> f64 {
        (self.value - self.lower_bound).max(0.0)
    }
}

impl FiniteSumProblem {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let first =
            components.first().ok_or_else(|| Error::param("components", "a problem needs at least one component"))?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::param("dimension", "must be positive"));
        }
        if let Some(bad) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::Dimension { expected: dim, got: bad.dim() });
        }
        Ok(FiniteSumProblem { components, dim, metadata: None })
    }

    pub fn with_metadata(mut self, metadata: ProblemMetadata) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn set_metadata(&mut self, metadata: Option<ProblemMetadata>) {
        self.metadata = metadata;
    }

    pub fn metadata(&self) -> Option<&ProblemMetadata> {
        self.metadata.as_ref()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn l_max(&self) -> f64 {
        self.components.iter().map(Component::smoothness).fold(0.0, f64::max)
    }

    /// Computes the batch mean of values and lower bounds and writes the mean
    /// gradient into `grad`. Components are accumulated in ascending index
    /// order.
    pub fn evaluate_batch_into(&self, batch: &Minibatch, x: &[f64], grad: &mut [f64]) -> Result<BatchEval> {
        self.check_dim(x.len())?;
        self.check_dim(grad.len())?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        let mut lower = 0.0;
        for &i in batch.indices() {
            let c = self.components.get(i).ok_or_else(|| {
                Error::Precondition(alloc::format!("batch index {i} out of range for n = {}", self.n()))
            })?;
            let (v, ok) = c.value_and_accumulate(x, grad);
            if !ok {
                return Err(Error::NonFinite { index: i });
            }
            value += v;
            lower += c.lower_bound;
        }
        let b = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= b);
        Ok(BatchEval { value: value / b, lower_bound: lower / b })
    }

    /// Allocating form of [`evaluate_batch_into`](Self::evaluate_batch_into):
    /// returns `(f_S(x), ∇f_S(x), ℓ_S*)`.
    pub fn evaluate_batch(&self, batch: &Minibatch, x: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
        let mut grad = vec![0.0; self.dim];
        let e = self.evaluate_batch_into(batch, x, &mut grad)?;
        Ok((e.value, grad, e.lower_bound))
    }

    /// Exact mean of all component values, accumulated in index order.
    pub fn full_objective(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut value = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            let v = c.value(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            value += v;
        }
        Ok(value / self.n() as f64)
    }

    /// Full gradient `∇f(x)`.
    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate_batch(&Minibatch::full(self.n()), x)?.1)
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::Dimension { expected: self.dim, got });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_quadratics() -> FiniteSumProblem {
        FiniteSumProblem::new(vec![Component::quadratic(vec![0.0], 1.0), Component::quadratic(vec![2.0], 1.0)]).unwrap()
    }

    #[test]
    fn single_quadratic_batch() {
        let p = FiniteSumProblem::new(vec![Component::quadratic(vec![0.0], 1.0)]).unwrap();
        let (v, g, l) = p.evaluate_batch(&Minibatch::full(1), &[2.0]).unwrap();
        assert_eq!((v, g[0], l), (2.0, 2.0, 0.0));
        assert_eq!(p.full_objective(&[2.0]).unwrap(), v);
    }

    #[test]
    fn two_quadratics_batch_at_origin() {
        let p = two_quadratics();
        let (v, g, l) = p.evaluate_batch(&Minibatch::full(2), &[0.0]).unwrap();
        assert_eq!((v, g[0], l), (1.0, -1.0, 0.0));
    }

    #[test]
    fn full_objective_is_mean() {
        assert_eq!(two_quadratics().full_objective(&[1.0]).unwrap(), 0.5);
    }

    #[test]
    fn logistic_at_origin() {
        let c = Component::logistic(vec![1.0, 0.0], 1.0);
        assert!((c.value(&[0.0, 0.0]) - core::f64::consts::LN_2).abs() < 1e-15);
        // −y σ(−y a·x) a = −0.5 (1, 0)
        assert_eq!(c.gradient(&[0.0, 0.0]), vec![-0.5, 0.0]);
        assert_eq!(Component::logistic(vec![3.0, 4.0], -1.0).smoothness(), 25.0 / 4.0);
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        let c = Component::logistic(vec![1.0], 1.0);
        assert!(c.value(&[800.0]) >= 0.0 && c.value(&[800.0]) < 1e-300);
        assert!((c.value(&[-800.0]) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_reports_component_index() {
        let p = FiniteSumProblem::new(vec![
            Component::quadratic(vec![0.0], 1.0),
            Component::squared_residual(vec![1.0], 0.0, f64::INFINITY),
        ])
        .unwrap();
        let err = p.evaluate_batch(&Minibatch::full(2), &[1.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { index: 1 });
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let err = FiniteSumProblem::new(vec![
            Component::quadratic(vec![0.0], 1.0),
            Component::quadratic(vec![0.0, 1.0], 1.0),
        ])
        .unwrap_err();
        assert_eq!(err, Error::Dimension { expected: 1, got: 2 });
        assert!(FiniteSumProblem::new(vec![]).is_err());
    }

    #[test]
    fn out_of_range_batch_index() {
        let p = two_quadratics();
        let batch = Minibatch::new(vec![5], 10).unwrap();
        assert!(matches!(p.evaluate_batch(&batch, &[0.0]), Err(Error::Precondition(_))));
    }
}
