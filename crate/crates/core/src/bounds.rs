//! Closed-form convergence bounds for SHB with momentum-corrected Polyak
//! steps, and the empirical checks run against them.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::{abs, ln, sqrt};
use crate::optimizers::RunRecord;
use crate::problems::FiniteSumProblem;

/// Multiplicative slack applied when comparing a seed average to a bound.
pub const BOUND_SLACK: f64 = 0.10;

/// `α = min{1/(2 L_max), γ_b}`, the lower envelope of SPS-type steps.
pub fn alpha(l_max: f64, gamma_b: f64) -> f64 {
    (1.0 / (2.0 * l_max)).min(gamma_b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thm31 {
    pub rhs: f64,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub beta_max: f64,
}

/// `β_max = α/(2γ_b − α)`; every `β < 1` is admissible when `γ_b ≤ α`.
pub fn thm31_beta_max(alpha: f64, gamma_b: f64) -> f64 {
    let den = 2.0 * gamma_b - alpha;
    if den <= alpha {
        1.0
    } else {
        alpha / den
    }
}

/// `(C1, C2)` for given `α`, `γ_b`, `β`.
pub fn thm31_constants(alpha: f64, gamma_b: f64, beta: f64) -> Result<(f64, f64)> {
    let beta_max = thm31_beta_max(alpha, gamma_b);
    if !(beta >= 0.0 && beta < beta_max) {
        return Err(Error::BetaRange { beta, beta_max });
    }
    let den = alpha * beta + alpha - 2.0 * beta * gamma_b;
    Ok(((1.0 - beta) / den, (2.0 * gamma_b - alpha * beta - alpha) / den))
}

/// `C1 ‖x⁰ − x*‖²/T + C2 σ²` for MomSPS_max with `c = 1`.
pub fn thm31_bound(
    x0_dist_sq: f64,
    iterations: u64,
    beta: f64,
    gamma_b: f64,
    l_max: f64,
    sigma2: f64,
) -> Result<Thm31> {
    let a = alpha(l_max, gamma_b);
    let beta_max = thm31_beta_max(a, gamma_b);
    let (c1, c2) = thm31_constants(a, gamma_b, beta)?;
    let rhs = c1 * x0_dist_sq / iterations as f64 + c2 * sigma2;
    Ok(Thm31 { rhs, alpha: a, c1, c2, beta_max })
}

/// `‖x⁰ − x*‖²/(Tγ) + σ²` for the constant step `γ ≤ (1 − β)/(2 L_max)`.
pub fn cor34_bound(x0_dist_sq: f64, iterations: u64, gamma: f64, beta: f64, l_max: f64, sigma2: f64) -> Result<f64> {
    let gamma_max = (1.0 - beta) / (2.0 * l_max);
    if !(gamma > 0.0) || gamma > gamma_max * (1.0 + 1e-12) {
        return Err(Error::Precondition(alloc::format!(
            "constant step {gamma} exceeds (1 - beta)/(2 L_max) = {gamma_max}"
        )));
    }
    Ok(x0_dist_sq / (iterations as f64 * gamma) + sigma2)
}

/// Bound for MomDecSPS with `c_t = √(t+1)`:
/// `2β(f⁰ − f*)/((1−β)T) + (1+β)D²/((1−β)α√T) + 2σ²/√T`.
pub fn thm35_bound(f0_gap: f64, d2: f64, iterations: u64, beta: f64, alpha: f64, sigma2: f64) -> f64 {
    let t = iterations as f64;
    let st = sqrt(t);
    2.0 * beta * f0_gap / ((1.0 - beta) * t) + (1.0 + beta) * d2 / ((1.0 - beta) * alpha * st) + 2.0 * sigma2 / st
}

/// `θ = β√(f⁰ − f*)/(1−β) + (1+β) c L D²/(2(1−β)) + 1/(2c)`.
pub fn thm36_theta(f0_gap: f64, d2: f64, beta: f64, c: f64, l: f64) -> f64 {
    beta * sqrt(f0_gap.max(0.0)) / (1.0 - beta) + (1.0 + beta) * c * l * d2 / (2.0 * (1.0 - beta)) + 1.0 / (2.0 * c)
}

/// The AdaSPS constant in its other normalization, `2cLD² + 1/c`.
pub fn thm36_theta_alt(d2: f64, c: f64, l: f64) -> f64 {
    2.0 * c * l * d2 + 1.0 / c
}

/// `(θ²/T + θσ/√T, θ)` for MomAdaSPS.
pub fn thm36_bound(f0_gap: f64, d2: f64, iterations: u64, beta: f64, c: f64, l: f64, sigma: f64) -> (f64, f64) {
    let theta = thm36_theta(f0_gap, d2, beta, c, l);
    let t = iterations as f64;
    (theta * theta / t + theta * sigma / sqrt(t), theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TheoremId {
    Thm31,
    Cor34,
    Thm35,
    Thm36,
}

impl TheoremId {
    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Thm31 => "thm31",
            TheoremId::Cor34 => "cor34",
            TheoremId::Thm35 => "thm35",
            TheoremId::Thm36 => "thm36",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm31" => Ok(TheoremId::Thm31),
            "cor34" => Ok(TheoremId::Cor34),
            "thm35" => Ok(TheoremId::Thm35),
            "thm36" => Ok(TheoremId::Thm36),
            _ => Err(Error::param("bound", alloc::format!("unknown bound `{s}`"))),
        }
    }
}

/// Parameters of a bound that are not measured from the runs.
///
/// `‖x⁰ − x*‖²`, `f(x⁰) − f*`, `T` and `D²` come from the records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundSpec {
    Thm31 { beta: f64, gamma_b: f64, l_max: f64, sigma2: f64 },
    Cor34 { gamma: f64, beta: f64, l_max: f64, sigma2: f64 },
    Thm35 { beta: f64, gamma_b: f64, l_max: f64, sigma2: f64 },
    Thm36 { beta: f64, c: f64, l_max: f64, sigma2: f64 },
}

impl BoundSpec {
    pub fn theorem(&self) -> TheoremId {
        match self {
            BoundSpec::Thm31 { .. } => TheoremId::Thm31,
            BoundSpec::Cor34 { .. } => TheoremId::Cor34,
            BoundSpec::Thm35 { .. } => TheoremId::Thm35,
            BoundSpec::Thm36 { .. } => TheoremId::Thm36,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub theorem: TheoremId,
    /// Mean over seeds of `f(x̄^T) − f*`; NaN if any run diverged.
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
    pub diverged: bool,
    pub seeds: usize,
    pub iterations: u64,
    /// Named inputs (`alpha`, `C1`, `sigma2`, `D2`, ...) in evaluation order.
    pub inputs: Vec<(String, f64)>,
}

impl BoundReport {
    pub fn input(&self, key: &str) -> Option<f64> {
        self.inputs.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

/// Mean and standard error of a sample with at least two entries.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, sqrt(var / k))
}

/// Compares the seed average of `f(x̄^T) − f*` against `bound`.
///
/// The records must share `T` and carry metadata. `D²` is the largest value
/// over all seeds.
pub fn check_bound(records: &[RunRecord], bound: &BoundSpec) -> Result<BoundReport> {
    if records.len() < 2 {
        return Err(Error::param("seeds", "bound checks need at least two runs"));
    }
    let first = &records[0];
    let f_star = first.f_star.ok_or(Error::MissingMetadata("bound checks"))?;
    let x0_dist_sq = first.rows.first().map_or(f64::NAN, |r| r.dist_sq);
    let f0_gap = (first.f0 - f_star).max(0.0);
    let iterations = records.iter().map(record_iterations).max().unwrap_or(0);
    if iterations == 0 || records.iter().any(|r| !r.diverged && record_iterations(r) != iterations) {
        return Err(Error::Precondition("records do not share a common horizon T".into()));
    }
    let diverged = records.iter().any(|r| r.diverged);
    let d2 = records.iter().map(|r| r.d2).fold(0.0, f64::max);

    let mut inputs: Vec<(String, f64)> = Vec::new();
    let mut put = |k: &str, v: f64| inputs.push((k.into(), v));
    put("x0_dist_sq", x0_dist_sq);
    put("f0_gap", f0_gap);
    let rhs = match *bound {
        BoundSpec::Thm31 { beta, gamma_b, l_max, sigma2 } => {
            let b = thm31_bound(x0_dist_sq, iterations, beta, gamma_b, l_max, sigma2)?;
            put("alpha", b.alpha);
            put("C1", b.c1);
            put("C2", b.c2);
            put("beta_max", b.beta_max);
            put("sigma2", sigma2);
            put("L_max", l_max);
            put("beta", beta);
            put("gamma_b", gamma_b);
            put("c", 1.0);
            b.rhs
        }
        BoundSpec::Cor34 { gamma, beta, l_max, sigma2 } => {
            put("gamma", gamma);
            put("sigma2", sigma2);
            put("L_max", l_max);
            put("beta", beta);
            cor34_bound(x0_dist_sq, iterations, gamma, beta, l_max, sigma2)?
        }
        BoundSpec::Thm35 { beta, gamma_b, l_max, sigma2 } => {
            let a = alpha(l_max, gamma_b);
            put("alpha", a);
            put("sigma2", sigma2);
            put("D2", d2);
            put("L_max", l_max);
            put("beta", beta);
            put("gamma_b", gamma_b);
            put("c", 1.0);
            thm35_bound(f0_gap, d2, iterations, beta, a, sigma2)
        }
        BoundSpec::Thm36 { beta, c, l_max, sigma2 } => {
            let (rhs, theta) = thm36_bound(f0_gap, d2, iterations, beta, c, l_max, sqrt(sigma2.max(0.0)));
            put("theta", theta);
            put("theta_alt", thm36_theta_alt(d2, c, l_max));
            put("sigma2", sigma2);
            put("D2", d2);
            put("L_max", l_max);
            put("beta", beta);
            put("c", c);
            rhs
        }
    };
    if !rhs.is_finite() {
        return Err(Error::Precondition(alloc::format!("bound evaluated to {rhs}")));
    }

    let (lhs, lhs_stderr) = if diverged {
        (f64::NAN, f64::NAN)
    } else {
        let gaps: Vec<f64> = records.iter().map(|r| r.f_cesaro - f_star).collect();
        mean_stderr(&gaps)
    };
    let satisfied = !diverged && lhs <= rhs * (1.0 + BOUND_SLACK);
    Ok(BoundReport {
        theorem: bound.theorem(),
        lhs,
        lhs_stderr,
        rhs,
        slack: BOUND_SLACK,
        satisfied,
        diverged,
        seeds: records.len(),
        iterations,
        inputs,
    })
}

fn record_iterations(r: &RunRecord) -> u64 {
    r.cesaro.last().map_or(0, |c| c.t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeFit {
    Slope(f64),
    /// Suboptimality reached the evaluation floor inside the window.
    Converged,
}

impl SlopeFit {
    pub fn slope(self) -> Option<f64> {
        match self {
            SlopeFit::Slope(s) => Some(s),
            SlopeFit::Converged => None,
        }
    }
}

/// Least-squares slope of `log y` against `log t`.
pub fn log_log_slope(points: &[(f64, f64)]) -> SlopeFit {
    if points.iter().any(|&(_, y)| !(y > 0.0)) {
        return SlopeFit::Converged;
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(t, _)| ln(t)).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| ln(y)).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    SlopeFit::Slope(sxy / sxx)
}

/// Seed-averaged `f(x̄^t) − f*` at the power-of-two checkpoints shared by
/// all records.
pub fn dyadic_mean_subopt(records: &[RunRecord]) -> Vec<(u64, f64)> {
    let Some(first) = records.first() else { return Vec::new() };
    first
        .cesaro
        .iter()
        .filter(|c| c.t.is_power_of_two())
        .filter_map(|c| {
            let vals: Option<Vec<f64>> =
                records.iter().map(|r| r.cesaro.iter().find(|p| p.t == c.t).map(|p| p.subopt)).collect();
            let vals = vals?;
            Some((c.t, vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect()
}

/// Slope of the seed-averaged Cesàro suboptimality over the last `window`
/// power-of-two checkpoints.
///
/// Values at or below `1e-13 · max(1, |f*|)` count as converged.
pub fn fit_rate_slope(records: &[RunRecord], window: usize) -> Result<SlopeFit> {
    let f_star = records.first().and_then(|r| r.f_star).ok_or(Error::MissingMetadata("slope fits"))?;
    if records.iter().any(|r| r.diverged) {
        return Err(Error::Precondition("cannot fit a rate to a diverged run".into()));
    }
    let pts = dyadic_mean_subopt(records);
    if window < 2 || pts.len() < window {
        return Err(Error::param("window", alloc::format!("need {window} >= 2 checkpoints, have {}", pts.len())));
    }
    let floor = 1e-13 * f_star.abs().max(1.0);
    let tail = &pts[pts.len() - window..];
    if tail.iter().any(|&(_, s)| s <= floor) {
        return Ok(SlopeFit::Converged);
    }
    let pts: Vec<(f64, f64)> = tail.iter().map(|&(t, s)| (t as f64, s)).collect();
    Ok(log_log_slope(&pts))
}

/// Worst relative error of each component gradient against central
/// differences (`h = 1e−6·(1 + |x_j|)`) at `trials` random points around
/// `x*` (or the origin).
pub fn finite_diff_check(problem: &FiniteSumProblem, trials: usize, seed: u64) -> Result<f64> {
    let d = problem.dim();
    let center = problem.metadata().map_or_else(|| vec![0.0; d], |m| m.x_star.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut x = vec![0.0; d];
    for _ in 0..trials {
        for (xi, ci) in x.iter_mut().zip(&center) {
            let e: f64 = rng.sample(StandardNormal);
            *xi = ci + e;
        }
        for (i, comp) in problem.components().iter().enumerate() {
            let g = comp.gradient(&x);
            let mut num: f64 = 0.0;
            let mut den: f64 = 0.0;
            for j in 0..d {
                let h = 1e-6 * (1.0 + abs(x[j]));
                let orig = x[j];
                x[j] = orig + h;
                let hi = comp.value(&x);
                x[j] = orig - h;
                let lo = comp.value(&x);
                x[j] = orig;
                if !(hi.is_finite() && lo.is_finite()) {
                    return Err(Error::NonFinite { index: i });
                }
                let fd = (hi - lo) / ((orig + h) - (orig - h));
                num = num.max(abs(fd - g[j]));
                den = den.max(abs(g[j]));
            }
            if num > 0.0 {
                worst = worst.max(num / den.max(f64::MIN_POSITIVE));
            }
        }
    }
    Ok(worst)
}
