//! Polyak-type step-size policies.
//!
//! A [`StepSizeState`] is a value type. Each call to [`StepSizeState::step`]
//! consumes the batch gap `f_S(x) − ℓ_S*` and the squared gradient norm
//! `‖∇f_S(x)‖²` and returns the emitted step together with the successor
//! state; the receiver is never mutated.
//!
//! The momentum-corrected rules are what an IMA step-size becomes after the
//! change of variables `γ_t = (1 − β) η_t`:
//!
//! | rule           | `γ_t`                                                        |
//! |----------------|--------------------------------------------------------------|
//! | `mom_sps_max`  | `(1−β) · min{gap / (c g2), γ_b}`                             |
//! | `mom_decsps`   | `min{(1−β) gap / (c_t g2), γ_{t−1} c_{t−1} / c_t}`           |
//! | `mom_adasps`   | `min{(1−β) gap / (c g2 √Σ_{s≤t} gap_s), γ_{t−1}}`            |
//!
//! With `β = 0` each of them runs through exactly the same floating point
//! operations as its uncorrected ancestor, so trajectories agree bit for bit.

use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{powf, sqrt};

/// Squared gradient norms at or below this are treated as a stationary batch.
pub const ZERO_GRAD_EPS: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    Constant,
    ConstantLiu,
    SpsMax,
    DecSps,
    AdaSps,
    MomSpsMax,
    MomDecSps,
    MomAdaSps,
    AltMomDecSps,
    AltMomAdaSps,
    PolyakDeterministic,
    MomPsMax,
}

impl Rule {
    pub const ALL: [Rule; 12] = [
        Rule::Constant,
        Rule::ConstantLiu,
        Rule::SpsMax,
        Rule::DecSps,
        Rule::AdaSps,
        Rule::MomSpsMax,
        Rule::MomDecSps,
        Rule::MomAdaSps,
        Rule::AltMomDecSps,
        Rule::AltMomAdaSps,
        Rule::PolyakDeterministic,
        Rule::MomPsMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Constant => "constant",
            Rule::ConstantLiu => "constant_liu",
            Rule::SpsMax => "sps_max",
            Rule::DecSps => "decsps",
            Rule::AdaSps => "adasps",
            Rule::MomSpsMax => "mom_sps_max",
            Rule::MomDecSps => "mom_decsps",
            Rule::MomAdaSps => "mom_adasps",
            Rule::AltMomDecSps => "alt_mom_decsps",
            Rule::AltMomAdaSps => "alt_mom_adasps",
            Rule::PolyakDeterministic => "polyak_deterministic",
            Rule::MomPsMax => "mom_ps_max",
        }
    }

    /// Rules whose formula carries the `(1 − β)` correction.
    pub fn is_momentum_corrected(self) -> bool {
        matches!(
            self,
            Rule::MomSpsMax
                | Rule::MomDecSps
                | Rule::MomAdaSps
                | Rule::AltMomDecSps
                | Rule::AltMomAdaSps
                | Rule::MomPsMax
        )
    }

    /// Rules that need the true `f*` and a full batch.
    pub fn is_deterministic(self) -> bool {
        matches!(self, Rule::PolyakDeterministic | Rule::MomPsMax)
    }

    /// Rules guaranteed to emit a nonincreasing sequence.
    pub fn is_decreasing(self) -> bool {
        matches!(
            self,
            Rule::DecSps | Rule::AdaSps | Rule::MomDecSps | Rule::MomAdaSps | Rule::AltMomDecSps | Rule::AltMomAdaSps
        )
    }

    pub fn is_constant(self) -> bool {
        matches!(self, Rule::Constant | Rule::ConstantLiu)
    }

    fn has_gamma_b_arm(self) -> bool {
        matches!(self, Rule::SpsMax | Rule::MomSpsMax | Rule::MomPsMax | Rule::PolyakDeterministic)
    }

    fn is_dec_family(self) -> bool {
        matches!(self, Rule::DecSps | Rule::MomDecSps | Rule::AltMomDecSps)
    }

    fn is_ada_family(self) -> bool {
        matches!(self, Rule::AdaSps | Rule::MomAdaSps | Rule::AltMomAdaSps)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::param("rule", alloc::format!("unknown rule `{s}`")))
    }
}

/// A step-size bound that may be absent. Used instead of `f64::INFINITY`
/// so that no infinity ever enters the arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    pub fn finite(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Unbounded => None,
        }
    }

    /// `min{value, self}` and whether the bound was the smaller arm.
    #[inline]
    fn min_with(self, value: f64) -> (f64, bool) {
        match self {
            Bound::Finite(b) if b < value => (b, true),
            _ => (value, false),
        }
    }
}

/// `γ_b^t = τ^{B/n} γ_{t−1}` replaces the static cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub tau: f64,
    /// Batch size over number of components.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizeState {
    pub rule: Rule,
    /// Momentum coefficient used in the `(1 − β)` correction.
    pub beta: f64,
    pub c: f64,
    /// Set `c = 1/√gap_0` on the first call (AdaSPS family only).
    pub c_from_first_gap: bool,
    pub gamma_b: Bound,
    /// Previous step. For the SPS_max family this is the uncorrected IMA
    /// step `η_{t−1}`, which feeds the smoothing recursion; for the other
    /// rules it is the emitted `γ_{t−1}`.
    pub gamma_prev: Bound,
    /// `c_{t−1}` of the DecSPS schedule.
    pub c_prev: f64,
    /// `Σ_{s≤t} gap_s` (AdaSPS family).
    pub gap_sum: f64,
    pub t: u64,
    pub smoothing: Option<Smoothing>,
    /// Fixed value emitted by the constant rules.
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecision {
    pub gamma: f64,
    /// The cap arm of the minimum was selected.
    pub capped: bool,
    pub next: StepSizeState,
}

impl StepSizeState {
    /// A rule with `c = 1`, no cap and no momentum. Use the `with_*` builders
    /// to set parameters and [`validate`](Self::validate) before running.
    pub fn new(rule: Rule) -> Self {
        StepSizeState {
            rule,
            beta: 0.0,
            c: 1.0,
            c_from_first_gap: false,
            gamma_b: Bound::Unbounded,
            gamma_prev: Bound::Unbounded,
            c_prev: 1.0,
            gap_sum: 0.0,
            t: 0,
            smoothing: None,
            constant: 0.0,
        }
        .reset()
    }

    pub fn constant(gamma: f64) -> Self {
        StepSizeState { constant: gamma, ..StepSizeState::new(Rule::Constant) }
    }

    /// Constant step from [`constant_liu`].
    pub fn constant_liu_preset(beta: f64, l: f64) -> Self {
        StepSizeState { constant: constant_liu(beta, l), beta, ..StepSizeState::new(Rule::ConstantLiu) }
    }

    pub fn sps_max(c: f64, gamma_b: Bound) -> Self {
        StepSizeState::new(Rule::SpsMax).with_c(c).with_gamma_b(gamma_b)
    }

    pub fn mom_sps_max(beta: f64, c: f64, gamma_b: Bound) -> Self {
        StepSizeState::new(Rule::MomSpsMax).with_beta(beta).with_c(c).with_gamma_b(gamma_b)
    }

    pub fn decsps(c: f64, gamma_b: f64) -> Self {
        StepSizeState::new(Rule::DecSps).with_c(c).with_gamma_b(Bound::Finite(gamma_b))
    }

    pub fn mom_decsps(beta: f64, c: f64, gamma_b: f64) -> Self {
        StepSizeState::new(Rule::MomDecSps).with_beta(beta).with_c(c).with_gamma_b(Bound::Finite(gamma_b))
    }

    pub fn adasps(c: f64) -> Self {
        StepSizeState::new(Rule::AdaSps).with_c(c)
    }

    pub fn mom_adasps(beta: f64, c: f64) -> Self {
        StepSizeState::new(Rule::MomAdaSps).with_beta(beta).with_c(c)
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self.reset()
    }

    pub fn with_c_from_first_gap(mut self) -> Self {
        self.c_from_first_gap = true;
        self
    }

    pub fn with_gamma_b(mut self, gamma_b: Bound) -> Self {
        self.gamma_b = gamma_b;
        self.reset()
    }

    pub fn with_constant(mut self, gamma: f64) -> Self {
        self.constant = gamma;
        self
    }

    /// Enables `γ_b` smoothing with factor `tau` and batch ratio `B/n`.
    pub fn with_smoothing(mut self, tau: f64, ratio: f64) -> Self {
        self.smoothing = Some(Smoothing { tau, ratio });
        self
    }

    /// Restores the initial recursion values (`t = 0`, `γ_{−1}`, `c_{−1}`,
    /// empty gap sum).
    pub fn reset(mut self) -> Self {
        self.t = 0;
        self.gap_sum = 0.0;
        self.c_prev = self.c;
        self.gamma_prev = if self.rule.is_ada_family() { Bound::Unbounded } else { self.gamma_b };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::param("beta", "beta must lie in [0,1)"));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::param("c", "must be positive and finite"));
        }
        if let Bound::Finite(b) = self.gamma_b {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::param("gamma_b", "must be positive"));
            }
        }
        if self.rule.is_dec_family() && self.gamma_b == Bound::Unbounded {
            return Err(Error::param("gamma_b", "DecSPS rules need a finite gamma_b as gamma_{-1}"));
        }
        if self.rule.is_constant() && !(self.constant > 0.0 && self.constant.is_finite()) {
            return Err(Error::param("gamma", "constant step must be positive"));
        }
        if let Some(s) = self.smoothing {
            if !self.rule.has_gamma_b_arm() {
                return Err(Error::param("smoothing", alloc::format!("not available for rule {}", self.rule)));
            }
            if self.gamma_b == Bound::Unbounded {
                return Err(Error::param("smoothing", "needs a finite gamma_b to seed gamma_{-1}"));
            }
            if !(s.tau >= 1.0) || !(s.ratio > 0.0 && s.ratio <= 1.0) {
                return Err(Error::param("smoothing", "needs tau >= 1 and 0 < B/n <= 1"));
            }
        }
        Ok(())
    }

    /// Emits `γ_t` for the current iteration.
    pub fn step(&self, gap: f64, g2: f64) -> StepDecision {
        let gap = if gap > 0.0 { gap } else { 0.0 };
        let mut next = *self;
        next.t = self.t + 1;
        let stationary = !(g2 > ZERO_GRAD_EPS);

        let (gamma, capped) = match self.rule {
            Rule::Constant | Rule::ConstantLiu => (self.constant, false),

            Rule::SpsMax | Rule::MomSpsMax | Rule::PolyakDeterministic | Rule::MomPsMax => {
                if stationary {
                    (0.0, false)
                } else {
                    let c = if self.rule.is_deterministic() { 1.0 } else { self.c };
                    let cap = match self.smoothing {
                        Some(_) => Bound::Finite(smoothed_gamma_b(self).unwrap_or(0.0)),
                        None => self.gamma_b,
                    };
                    let (eta, capped) = cap.min_with(gap / (c * g2));
                    next.gamma_prev = Bound::Finite(eta);
                    let gamma = if self.rule.is_momentum_corrected() { (1.0 - self.beta) * eta } else { eta };
                    (gamma, capped)
                }
            }

            Rule::DecSps | Rule::MomDecSps | Rule::AltMomDecSps => {
                if stationary {
                    (0.0, false)
                } else {
                    let beta = if self.rule == Rule::DecSps { 0.0 } else { self.beta };
                    let c_t = self.c * sqrt((self.t + 1) as f64);
                    // γ_{t−1}c_{t−1} never exceeds γ_b·c_{−1}; clamping stops ulp drift
                    // from pushing γ_t past γ_b·c_0/c_t.
                    let envelope = self.gamma_b.finite().unwrap_or(f64::INFINITY) * self.c;
                    let prev = (self.gamma_prev.finite().unwrap_or(0.0) * self.c_prev).min(envelope);
                    let (gamma, capped) = if self.rule == Rule::AltMomDecSps {
                        let (m, capped) = Bound::Finite(prev).min_with(gap / g2);
                        ((1.0 - beta) * (m / c_t), capped)
                    } else {
                        let (m, capped) = Bound::Finite(prev).min_with((1.0 - beta) * (gap / g2));
                        (m / c_t, capped)
                    };
                    next.gamma_prev = Bound::Finite(gamma);
                    next.c_prev = c_t;
                    (gamma, capped)
                }
            }

            Rule::AdaSps | Rule::MomAdaSps | Rule::AltMomAdaSps => {
                next.gap_sum = self.gap_sum + gap;
                if self.t == 0 && self.c_from_first_gap && gap > 0.0 {
                    next.c = 1.0 / sqrt(gap);
                }
                if stationary || !(next.gap_sum > 0.0) {
                    (0.0, false)
                } else {
                    let beta = if self.rule == Rule::AdaSps { 0.0 } else { self.beta };
                    let denom = next.c * g2 * sqrt(next.gap_sum);
                    let (gamma, capped) = if self.rule == Rule::AltMomAdaSps {
                        let (m, capped) = self.gamma_prev.min_with(gap / denom);
                        ((1.0 - beta) * m, capped)
                    } else {
                        self.gamma_prev.min_with((1.0 - beta) * gap / denom)
                    };
                    next.gamma_prev = Bound::Finite(gamma);
                    (gamma, capped)
                }
            }
        };
        StepDecision { gamma, capped, next }
    }
}

/// SPS_max on a state whose rule is [`Rule::SpsMax`].
pub fn sps_max(state: &StepSizeState, gap: f64, g2: f64) -> StepDecision {
    debug_assert_eq!(state.rule, Rule::SpsMax);
    state.step(gap, g2)
}

pub fn mom_sps_max(state: &StepSizeState, gap: f64, g2: f64) -> StepDecision {
    debug_assert_eq!(state.rule, Rule::MomSpsMax);
    state.step(gap, g2)
}

pub fn decsps(state: &StepSizeState, gap: f64, g2: f64) -> StepDecision {
    debug_assert_eq!(state.rule, Rule::DecSps);
    state.step(gap, g2)
}

pub fn mom_decsps(state: &StepSizeState, gap: f64, g2: f64) -> StepDecision {
    debug_assert_eq!(state.rule, Rule::MomDecSps);
    state.step(gap, g2)
}

pub fn adasps(state: &StepSizeState, gap: f64, g2: f64) -> StepDecision {
    debug_assert_eq!(state.rule, Rule::AdaSps);
    state.step(gap, g2)
}

pub fn mom_adasps(state: &StepSizeState, gap: f64, g2: f64) -> StepDecision {
    debug_assert_eq!(state.rule, Rule::MomAdaSps);
    state.step(gap, g2)
}

/// Variants with the `(1 − β)` factor outside the minimum.
pub fn alt_variants(state: &StepSizeState, gap: f64, g2: f64) -> StepDecision {
    debug_assert!(matches!(state.rule, Rule::AltMomDecSps | Rule::AltMomAdaSps));
    state.step(gap, g2)
}

/// Polyak step `gap/g2` (optionally capped) or its momentum-corrected
/// `mom_ps_max` form; `gap` must use the true `f*`.
pub fn polyak_deterministic(state: &StepSizeState, gap: f64, g2: f64) -> StepDecision {
    debug_assert!(state.rule.is_deterministic());
    state.step(gap, g2)
}

/// Constant SHB step `(1−β)²/L · min{1/(4−β+β²), 1/(2√(2β+2β²))}`.
///
/// The second arm is `+∞` at `β = 0`.
pub fn constant_liu(beta: f64, l: f64) -> f64 {
    let first = 1.0 / (4.0 - beta + beta * beta);
    let s = 2.0 * beta + 2.0 * beta * beta;
    let arm = if s > 0.0 { first.min(1.0 / (2.0 * sqrt(s))) } else { first };
    (1.0 - beta) * (1.0 - beta) / l * arm
}

/// Constant SHB step `(1 − β)/(2 L_max)` admitted by the constant-step
/// corollary of the MomSPS_max analysis.
pub fn constant_momentum_preset(beta: f64, l_max: f64) -> f64 {
    (1.0 - beta) / (2.0 * l_max)
}

/// `τ^{B/n} γ_{t−1}` for a smoothed state, `None` otherwise.
pub fn smoothed_gamma_b(state: &StepSizeState) -> Option<f64> {
    let s = state.smoothing?;
    let prev = state.gamma_prev.finite()?;
    Some(powf(s.tau, s.ratio) * prev)
}

/// IMA parameters equivalent to SHB with step `γ_t` and momentum `β`:
/// `(η_t, λ) = (γ_t/(1−β), β/(1−β))`.
pub fn ima_equivalent_eta(gamma: f64, beta: f64) -> (f64, f64) {
    (gamma / (1.0 - beta), beta / (1.0 - beta))
}
