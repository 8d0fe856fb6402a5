//! SHB and IMA iteration engines.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{dist_sq, norm_sq, sqrt};
use crate::problems::{BatchSampler, FiniteSumProblem};
use crate::stepsizes::{ima_equivalent_eta, StepSizeState};

/// Runs with `T` up to this many iterations log every iterate by default.
pub const DEFAULT_LOG_LIMIT: u64 = 10_000;

/// A run stops once `f(x^t)` exceeds this multiple of `max(1, f(x^0))`.
pub const DIVERGENCE_FACTOR: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Shb,
    Ima,
    ProjectedIma,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Shb => "shb",
            OptimizerKind::Ima => "ima",
            OptimizerKind::ProjectedIma => "projected_ima",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shb" => Ok(OptimizerKind::Shb),
            "ima" => Ok(OptimizerKind::Ima),
            "projected_ima" => Ok(OptimizerKind::ProjectedIma),
            _ => Err(Error::param("optimizer", alloc::format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShbState {
    pub x: Vec<f64>,
    pub x_prev: Vec<f64>,
}

impl ShbState {
    /// Starts with `x_prev = x^0`, so the first step is a plain SGD step.
    pub fn new(x0: Vec<f64>) -> Self {
        ShbState { x_prev: x0.clone(), x: x0 }
    }

    /// In-place form of [`shb_step`].
    pub fn advance(&mut self, gamma: f64, beta: f64, grad: &[f64], iteration: u64) -> Result<()> {
        if grad.len() != self.x.len() {
            return Err(Error::Dimension { expected: self.x.len(), got: grad.len() });
        }
        let mut finite = true;
        for ((x, xp), g) in self.x.iter_mut().zip(self.x_prev.iter_mut()).zip(grad) {
            let cur = *x;
            let next = cur - gamma * g + beta * (cur - *xp);
            finite &= next.is_finite();
            *xp = cur;
            *x = next;
        }
        if finite {
            Ok(())
        } else {
            Err(Error::Diverged { iteration })
        }
    }
}

/// `x⁺ = x − γ g + β(x − x_prev)`, `x_prev⁺ = x`.
pub fn shb_step(state: &ShbState, gamma: f64, beta: f64, grad: &[f64], iteration: u64) -> Result<ShbState> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::param("beta", "beta must lie in [0,1)"));
    }
    let mut next = state.clone();
    next.advance(gamma, beta, grad, iteration)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImaState {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub lambda: f64,
}

impl ImaState {
    /// Starts with `z^0 = x^0`.
    pub fn new(x0: Vec<f64>, lambda: f64) -> Self {
        ImaState { z: x0.clone(), x: x0, lambda }
    }

    /// In-place form of [`ima_step`], optionally projecting `z`.
    pub fn advance(
        &mut self,
        eta: f64,
        grad: &[f64],
        projection: Option<&ProjectionSet>,
        iteration: u64,
    ) -> Result<()> {
        if grad.len() != self.x.len() {
            return Err(Error::Dimension { expected: self.x.len(), got: grad.len() });
        }
        for (z, g) in self.z.iter_mut().zip(grad) {
            *z -= eta * g;
        }
        if let Some(set) = projection {
            set.project(&mut self.z);
        }
        let keep = self.lambda / (self.lambda + 1.0);
        let take = 1.0 / (self.lambda + 1.0);
        let mut finite = true;
        for (x, z) in self.x.iter_mut().zip(&self.z) {
            *x = keep * *x + take * z;
            finite &= x.is_finite();
        }
        if finite {
            Ok(())
        } else {
            Err(Error::Diverged { iteration })
        }
    }
}

/// `z⁺ = z − η g`, `x⁺ = λ/(λ+1)·x + 1/(λ+1)·z⁺`.
pub fn ima_step(state: &ImaState, eta: f64, grad: &[f64], iteration: u64) -> Result<ImaState> {
    let mut next = state.clone();
    next.advance(eta, grad, None, iteration)?;
    Ok(next)
}

/// As [`ima_step`] with `z⁺` projected onto `set`.
pub fn projected_ima_step(
    state: &ImaState,
    eta: f64,
    grad: &[f64],
    set: &ProjectionSet,
    iteration: u64,
) -> Result<ImaState> {
    let mut next = state.clone();
    next.advance(eta, grad, Some(set), iteration)?;
    Ok(next)
}

/// A compact convex set with a cheap Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionSet {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl ProjectionSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::param("radius", "must be positive and finite"));
        }
        Ok(ProjectionSet::Ball { center, radius })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::param("box", "needs finite lower <= upper in every coordinate"));
        }
        Ok(ProjectionSet::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            ProjectionSet::Ball { center, .. } => center.len(),
            ProjectionSet::Box { lower, .. } => lower.len(),
        }
    }

    pub fn project(&self, v: &mut [f64]) {
        match self {
            ProjectionSet::Ball { center, radius } => {
                let r = sqrt(dist_sq(v, center));
                if r > *radius {
                    let s = radius / r;
                    for (x, c) in v.iter_mut().zip(center) {
                        *x = c + s * (*x - c);
                    }
                }
            }
            ProjectionSet::Box { lower, upper } => {
                for ((x, l), u) in v.iter_mut().zip(lower).zip(upper) {
                    *x = x.clamp(*l, *u);
                }
            }
        }
    }

    /// Euclidean distance from `v` to the set.
    pub fn distance(&self, v: &[f64]) -> f64 {
        let mut p = v.to_vec();
        self.project(&mut p);
        sqrt(dist_sq(v, &p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: OptimizerKind,
    pub policy: StepSizeState,
    pub beta: f64,
    pub iterations: u64,
    pub batch_size: usize,
    pub seed: u64,
    /// ChaCha stream of the batch sampler.
    pub stream: u64,
    pub run_id: u64,
    pub projection: Option<ProjectionSet>,
    /// Defaults to the origin.
    pub x0: Option<Vec<f64>>,
    /// Log `f(x^t)` every this many iterations; see [`default_log_every`].
    pub log_every: Option<u64>,
    /// Cesàro checkpoints in addition to the powers of two and `T`.
    pub extra_checkpoints: Vec<u64>,
}

impl RunConfig {
    pub fn new(policy: StepSizeState, beta: f64, iterations: u64, batch_size: usize, seed: u64) -> Self {
        RunConfig {
            kind: OptimizerKind::Shb,
            policy,
            beta,
            iterations,
            batch_size,
            seed,
            stream: 0,
            run_id: 0,
            projection: None,
            x0: None,
            log_every: None,
            extra_checkpoints: Vec::new(),
        }
    }

    pub fn with_kind(mut self, kind: OptimizerKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_projection(mut self, set: ProjectionSet) -> Self {
        self.kind = OptimizerKind::ProjectedIma;
        self.projection = Some(set);
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn with_log_every(mut self, every: u64) -> Self {
        self.log_every = Some(every);
        self
    }

    pub fn with_run_id(mut self, run_id: u64) -> Self {
        self.run_id = run_id;
        self
    }

    pub fn with_checkpoints(mut self, extra: Vec<u64>) -> Self {
        self.extra_checkpoints = extra;
        self
    }

    /// Sorted Cesàro checkpoints: powers of two up to `T`, `T` itself and
    /// any extras in `[1, T]`.
    pub fn checkpoints(&self) -> Vec<u64> {
        let t_max = self.iterations;
        let mut out: Vec<u64> = (0..64).map(|k| 1u64 << k).take_while(|&t| t <= t_max).collect();
        out.push(t_max);
        out.extend(self.extra_checkpoints.iter().copied().filter(|&t| t >= 1 && t <= t_max));
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Every iteration for `T ≤ 10⁴`, else every `⌈T/10⁴⌉`.
pub fn default_log_every(iterations: u64) -> u64 {
    if iterations <= DEFAULT_LOG_LIMIT {
        1
    } else {
        iterations.div_ceil(DEFAULT_LOG_LIMIT)
    }
}

/// One logged iterate. `subopt` and `dist_sq` are NaN without metadata;
/// `gamma` is NaN on the final row, where no step is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: u64,
    pub f: f64,
    pub subopt: f64,
    pub dist_sq: f64,
    pub gamma: f64,
}

/// `f(x̄^t)` with `x̄^t = (1/t) Σ_{s<t} x^s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CesaroPoint {
    pub t: u64,
    pub f: f64,
    pub subopt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: u64,
    pub seed: u64,
    pub rows: Vec<TrajectoryRow>,
    pub cesaro: Vec<CesaroPoint>,
    /// `f(x̄^T)`; NaN if the run diverged.
    pub f_cesaro: f64,
    pub f0: f64,
    pub f_star: Option<f64>,
    /// `max_t ‖x^t − x*‖²` over every iterate; NaN without metadata.
    pub d2: f64,
    pub diverged: bool,
    pub diverged_at: Option<u64>,
    /// Filled in by callers that can read a clock.
    pub wallclock: Option<f64>,
    pub x_final: Vec<f64>,
}

impl RunRecord {
    pub fn subopt_cesaro(&self) -> f64 {
        match self.f_star {
            Some(fs) => self.f_cesaro - fs,
            None => f64::NAN,
        }
    }

    /// Objective at the last logged iterate.
    pub fn last_f(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.f)
    }

    pub fn gammas(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.gamma).filter(|g| !g.is_nan())
    }
}

enum Engine {
    Shb(ShbState),
    Ima(ImaState),
}

impl Engine {
    fn x(&self) -> &[f64] {
        match self {
            Engine::Shb(s) => &s.x,
            Engine::Ima(s) => &s.x,
        }
    }
}

fn check_run(problem: &FiniteSumProblem, config: &RunConfig) -> Result<()> {
    config.policy.validate()?;
    if !(0.0..1.0).contains(&config.beta) {
        return Err(Error::param("beta", "beta must lie in [0,1)"));
    }
    if config.iterations < 1 {
        return Err(Error::param("T", "must be at least 1"));
    }
    if config.policy.rule.is_momentum_corrected() && config.policy.beta != config.beta {
        return Err(Error::param("beta", "policy correction factor differs from the momentum"));
    }
    if config.policy.rule.is_deterministic() {
        if config.batch_size != problem.n() {
            return Err(Error::param("batch_size", "deterministic rules need the full batch"));
        }
        if problem.metadata().is_none() {
            return Err(Error::MissingMetadata("deterministic Polyak steps"));
        }
    }
    if config.log_every == Some(0) {
        return Err(Error::param("log_every", "must be positive"));
    }
    Ok(())
}

/// Executes one run: sample a batch, evaluate, query the policy, step.
///
/// Divergence ends the run early with `diverged = true`; it is not an error.
pub fn run(problem: &FiniteSumProblem, config: &RunConfig) -> Result<RunRecord> {
    check_run(problem, config)?;
    let d = problem.dim();
    let x0 = config.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    problem.check_dim(x0.len())?;
    let meta = problem.metadata();
    let f_star = meta.map(|m| m.f_star);
    let x_star = meta.map(|m| m.x_star.as_slice());

    let mut engine = match config.kind {
        OptimizerKind::Shb => Engine::Shb(ShbState::new(x0.clone())),
        OptimizerKind::Ima | OptimizerKind::ProjectedIma => {
            let (_, lambda) = ima_equivalent_eta(1.0, config.beta);
            Engine::Ima(ImaState::new(x0.clone(), lambda))
        }
    };
    let projection = match config.kind {
        OptimizerKind::ProjectedIma => {
            let set = config
                .projection
                .as_ref()
                .ok_or_else(|| Error::param("projection", "projected IMA needs a projection set"))?;
            if set.dim() != d {
                return Err(Error::Dimension { expected: d, got: set.dim() });
            }
            let distance = set.distance(&x0);
            if distance > 1e-12 {
                return Err(Error::InfeasibleStart { distance });
            }
            Some(set)
        }
        _ => None,
    };

    let f0 = problem.full_objective(&x0)?;
    let limit = DIVERGENCE_FACTOR * f0.max(1.0);
    let every = config.log_every.unwrap_or_else(|| default_log_every(config.iterations));
    let checkpoints = config.checkpoints();
    let mut next_checkpoint = 0usize;
    let subopt = |f: f64| f_star.map_or(f64::NAN, |fs| f - fs);

    let mut sampler = BatchSampler::new(problem.n(), config.batch_size, config.seed, config.stream)?;
    let mut policy = config.policy;
    let mut grad = vec![0.0; d];
    let mut sum = vec![0.0; d];
    let mut avg = vec![0.0; d];
    let mut record = RunRecord {
        run_id: config.run_id,
        seed: config.seed,
        rows: Vec::new(),
        cesaro: Vec::new(),
        f_cesaro: f64::NAN,
        f0,
        f_star,
        d2: if x_star.is_some() { 0.0 } else { f64::NAN },
        diverged: false,
        diverged_at: None,
        wallclock: None,
        x_final: Vec::new(),
    };

    let mut diverged_at = None;
    for t in 0..config.iterations {
        let x = engine.x();
        sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
        let dist = x_star.map_or(f64::NAN, |xs| dist_sq(x, xs));
        if dist > record.d2 {
            record.d2 = dist;
        }

        let batch = sampler.next_batch();
        let eval = match problem.evaluate_batch_into(&batch, x, &mut grad) {
            Ok(e) => e,
            Err(Error::NonFinite { .. }) => {
                diverged_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        };
        let gap = match (policy.rule.is_deterministic(), f_star) {
            (true, Some(fs)) => (eval.value - fs).max(0.0),
            _ => eval.gap(),
        };
        let decision = policy.step(gap, norm_sq(&grad));
        policy = decision.next;
        let gamma = decision.gamma;

        if t % every == 0 {
            let f = problem.full_objective(x).unwrap_or(f64::INFINITY);
            if !(f <= limit) {
                if f.is_finite() {
                    record.rows.push(TrajectoryRow { t, f, subopt: subopt(f), dist_sq: dist, gamma });
                }
                diverged_at = Some(t);
                break;
            }
            record.rows.push(TrajectoryRow { t, f, subopt: subopt(f), dist_sq: dist, gamma });
        }

        let stepped = match &mut engine {
            Engine::Shb(s) => s.advance(gamma, config.beta, &grad, t),
            Engine::Ima(s) => {
                let (eta, _) = ima_equivalent_eta(gamma, config.beta);
                s.advance(eta, &grad, projection, t)
            }
        };
        if stepped.is_err() {
            diverged_at = Some(t + 1);
            break;
        }

        let done = t + 1;
        if checkpoints.get(next_checkpoint) == Some(&done) {
            next_checkpoint += 1;
            let inv = 1.0 / done as f64;
            avg.iter_mut().zip(&sum).for_each(|(a, s)| *a = s * inv);
            let f = problem.full_objective(&avg).unwrap_or(f64::INFINITY);
            record.cesaro.push(CesaroPoint { t: done, f, subopt: subopt(f) });
            if done == config.iterations {
                record.f_cesaro = f;
            }
        }
    }

    let x = engine.x();
    if diverged_at.is_none() {
        let t = config.iterations;
        let dist = x_star.map_or(f64::NAN, |xs| dist_sq(x, xs));
        if dist > record.d2 {
            record.d2 = dist;
        }
        let f = problem.full_objective(x).unwrap_or(f64::INFINITY);
        if f <= limit {
            record.rows.push(TrajectoryRow { t, f, subopt: subopt(f), dist_sq: dist, gamma: f64::NAN });
        } else {
            diverged_at = Some(t);
        }
    }
    if diverged_at.is_some() {
        record.diverged = true;
        record.diverged_at = diverged_at;
        record.f_cesaro = f64::NAN;
    }
    record.x_final = x.to_vec();
    Ok(record)
}

/// Runs SHB with `γ_t` and IMA with `η_t = γ_t/(1−β)`, `λ = β/(1−β)` in
/// lock step on one batch stream and returns `max_t ‖x_t^SHB − x_t^IMA‖`.
///
/// Each engine queries its own copy of the policy at its own iterate.
pub fn run_equivalence_pair(
    problem: &FiniteSumProblem,
    policy: &StepSizeState,
    beta: f64,
    iterations: u64,
    batch_size: usize,
    seed: u64,
    x0: &[f64],
) -> Result<f64> {
    let config = RunConfig::new(*policy, beta, iterations, batch_size, seed);
    check_run(problem, &config)?;
    problem.check_dim(x0.len())?;
    let f_star = problem.metadata().map(|m| m.f_star);
    let (_, lambda) = ima_equivalent_eta(1.0, beta);
    let mut shb = ShbState::new(x0.to_vec());
    let mut ima = ImaState::new(x0.to_vec(), lambda);
    let mut shb_policy = *policy;
    let mut ima_policy = *policy;
    let mut sampler = BatchSampler::new(problem.n(), batch_size, seed, 0)?;
    let mut grad = vec![0.0; problem.dim()];
    let mut worst: f64 = 0.0;

    let gap_of = |rule_det: bool, value: f64, lb: f64| match (rule_det, f_star) {
        (true, Some(fs)) => (value - fs).max(0.0),
        _ => (value - lb).max(0.0),
    };
    for t in 0..iterations {
        let batch = sampler.next_batch();
        let e = problem.evaluate_batch_into(&batch, &shb.x, &mut grad)?;
        let d = shb_policy.step(gap_of(policy.rule.is_deterministic(), e.value, e.lower_bound), norm_sq(&grad));
        shb_policy = d.next;
        shb.advance(d.gamma, beta, &grad, t)?;

        let e = problem.evaluate_batch_into(&batch, &ima.x, &mut grad)?;
        let d = ima_policy.step(gap_of(policy.rule.is_deterministic(), e.value, e.lower_bound), norm_sq(&grad));
        ima_policy = d.next;
        let (eta, _) = ima_equivalent_eta(d.gamma, beta);
        ima.advance(eta, &grad, None, t)?;

        worst = worst.max(sqrt(dist_sq(&shb.x, &ima.x)));
    }
    Ok(worst)
}
