//! Property tests over generated problems and whole runs.

use momsps_core::bounds::{check_bound, dyadic_mean_subopt, finite_diff_check, thm31_bound, BoundSpec, BOUND_SLACK};
use momsps_core::optimizers::{run, RunConfig, RunRecord};
use momsps_core::problems::{
    estimate_sigma2, generate_least_squares, generate_logistic, BatchSampler, FiniteSumProblem, Minibatch,
};
use momsps_core::stepsizes::{Bound, Rule, StepSizeState};
use proptest::prelude::*;

fn least_squares(n: usize, d: usize, cond: f64, consistent: bool, seed: u64) -> FiniteSumProblem {
    generate_least_squares(n, d, cond, consistent, seed).unwrap()
}

/// Feeds `(gap, g2)` of real batches at points of a short SGD path into `policy`.
fn batch_stream(p: &FiniteSumProblem, batch: usize, steps: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut sampler = BatchSampler::new(p.n(), batch, seed, 0).unwrap();
    let mut x = vec![0.0; p.dim()];
    let step = 0.5 / p.l_max();
    (0..steps)
        .map(|_| {
            let (v, g, lower) = p.evaluate_batch(&sampler.next_batch(), &x).unwrap();
            let g2: f64 = g.iter().map(|v| v * v).sum();
            x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= step * gi);
            (v - lower, g2)
        })
        .collect()
}

fn emitted(policy: StepSizeState, stream: &[(f64, f64)]) -> Vec<(f64, StepSizeState)> {
    let mut s = policy;
    stream
        .iter()
        .map(|&(gap, g2)| {
            let d = s.step(gap, g2);
            s = d.next;
            (d.gamma, d.next)
        })
        .collect()
}

fn any_rule() -> impl Strategy<Value = Rule> {
    prop::sample::select(Rule::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradients_match_finite_differences(
        n in 5usize..40, d in 1usize..12, cond in 1.0f64..1e4, seed in 0u64..1000, logistic in any::<bool>()
    ) {
        let p = if logistic {
            generate_logistic(n, d, seed % 2 == 0, seed).unwrap()
        } else {
            least_squares(n.max(d), d, cond, seed % 2 == 0, seed)
        };
        let err = finite_diff_check(&p, 100, seed).unwrap();
        prop_assert!(err <= 1e-5, "relative error {err:e}");
    }

    #[test]
    fn full_batch_equals_full_objective(n in 2usize..50, d in 1usize..10, seed in 0u64..1000) {
        let p = generate_logistic(n, d, false, seed).unwrap();
        let x: Vec<f64> = (0..d).map(|j| (j as f64 - 1.5) * 0.3).collect();
        let (v, g, _) = p.evaluate_batch(&Minibatch::full(n), &x).unwrap();
        prop_assert_eq!(v.to_bits(), p.full_objective(&x).unwrap().to_bits());
        prop_assert_eq!(g, p.full_gradient(&x).unwrap());
    }

    #[test]
    fn consistent_least_squares_interpolates(n in 10usize..40, d in 2usize..10, cond in 1.0f64..1e3, seed in 0u64..1000) {
        let p = least_squares(n, d, cond, true, seed);
        let m = p.metadata().unwrap();
        prop_assert!(m.interpolated);
        prop_assert!(p.full_objective(&m.x_star).unwrap() <= 1e-20);
        for b in [1, 2, n / 2, n] {
            let s = estimate_sigma2(&p, m, b, 500, seed).unwrap();
            prop_assert!(s.value <= 1e-12, "B = {b}: sigma2 {:e}", s.value);
        }
    }

    #[test]
    fn mom_sps_max_stays_in_its_envelope(
        beta in 0.0f64..0.95, gb_scale in 0.05f64..20.0, batch in 1usize..6, seed in 0u64..1000
    ) {
        let p = least_squares(40, 6, 100.0, false, seed);
        let l = p.l_max();
        let gb = gb_scale / l;
        let stream = batch_stream(&p, batch, 200, seed);
        // With B = 1 a squared residual has gap/g2 = 1/(2L_i) exactly, so the
        // lower end is attained and only holds up to a few ulps.
        let lo = (1.0 - beta) * (1.0 / (2.0 * l)).min(gb) * (1.0 - 8.0 * f64::EPSILON);
        let hi = (1.0 - beta) * gb;
        for ((gamma, _), &(gap, g2)) in emitted(StepSizeState::mom_sps_max(beta, 1.0, Bound::Finite(gb)), &stream).iter().zip(&stream) {
            prop_assert!(lo <= *gamma && *gamma <= hi, "{gamma:e} outside [{lo:e}, {hi:e}]");
            prop_assert!(gamma * gamma * g2 <= gamma * gap * (1.0 - beta) * (1.0 + 1e-15));
        }
    }

    #[test]
    fn adasps_lower_envelope(c in 0.1f64..4.0, batch in 1usize..6, seed in 0u64..1000) {
        let p = least_squares(40, 6, 100.0, false, seed);
        let l = p.l_max();
        let stream = batch_stream(&p, batch, 200, seed);
        for (gamma, next) in emitted(StepSizeState::adasps(c), &stream) {
            let floor = 1.0 / (2.0 * c * l * next.gap_sum.sqrt());
            prop_assert!(gamma >= floor * (1.0 - 1e-12), "{gamma:e} < {floor:e}");
        }
    }

    #[test]
    fn every_rule_emits_finite_nonnegative_steps(
        rule in any_rule(),
        stream in prop::collection::vec((-1e-3f64..1e3, 0.0f64..1e3), 1..80),
        beta in 0.0f64..0.99
    ) {
        let policy = StepSizeState::new(rule)
            .with_beta(beta)
            .with_gamma_b(Bound::Finite(1.0))
            .with_constant(0.1);
        for (gamma, _) in emitted(policy, &stream) {
            prop_assert!(gamma.is_finite() && gamma >= 0.0, "{rule}: {gamma}");
        }
    }

    #[test]
    fn runs_are_deterministic_and_rows_well_formed(rule in any_rule(), beta in 0.0f64..0.9, seed in 0u64..1000) {
        let p = least_squares(30, 5, 50.0, false, 4);
        let batch = if rule.is_deterministic() { p.n() } else { 3 };
        let policy = StepSizeState::new(rule)
            .with_beta(beta)
            .with_gamma_b(Bound::Finite(1.0 / p.l_max()))
            .with_constant((1.0 - beta) / (2.0 * p.l_max()));
        let cfg = RunConfig::new(policy, beta, 150, batch, seed);
        let (a, b) = (run(&p, &cfg).unwrap(), run(&p, &cfg).unwrap());
        // The final row carries a NaN step, so compare the exact rendering.
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        prop_assert!(a.rows.windows(2).all(|w| w[0].t < w[1].t));
        prop_assert!(a.rows.iter().all(|r| r.subopt >= -1e-10));
        prop_assert!(a.cesaro.windows(2).all(|w| w[0].t < w[1].t));
    }

    // The rate is a statement about the expectation: a single run can move
    // uphill on one minibatch, so the check uses the mean over seeds.
    #[test]
    fn interpolated_cesaro_gap_decreases_under_the_bound(
        beta in 0.0f64..0.33, seed in 0u64..1000, batch in 1usize..6
    ) {
        let p = least_squares(60, 8, 100.0, true, seed);
        let l = p.l_max();
        let gb = 1.0 / l;
        let recs: Vec<RunRecord> = (0..16)
            .map(|s| {
                let policy = StepSizeState::mom_sps_max(beta, 1.0, Bound::Finite(gb));
                run(&p, &RunConfig::new(policy, beta, 1024, batch, seed * 16 + s)).unwrap()
            })
            .collect();
        let d0 = recs[0].rows[0].dist_sq;
        let curve = dyadic_mean_subopt(&recs);
        prop_assert!(curve.len() >= 10);
        for w in curve.windows(2) {
            prop_assert!(w[1].1 <= w[0].1, "t {} -> {}: {:e} > {:e}", w[0].0, w[1].0, w[1].1, w[0].1);
        }
        for &(t, gap) in &curve {
            let rhs = thm31_bound(d0, t, beta, gb, l, 0.0).unwrap().rhs;
            prop_assert!(gap <= rhs, "t {t}: {gap:e} > {rhs:e}");
        }
    }

    #[test]
    fn reports_follow_their_slack(scale in 0.01f64..100.0, seed in 0u64..1000) {
        let p = least_squares(40, 5, 50.0, false, seed);
        let l = p.l_max();
        let recs: Vec<RunRecord> = (0..3)
            .map(|s| {
                let cfg = RunConfig::new(StepSizeState::mom_sps_max(0.3, 1.0, Bound::Finite(scale / l)), 0.3, 64, 4, s);
                run(&p, &cfg).unwrap()
            })
            .collect();
        match check_bound(&recs, &BoundSpec::Thm31 { beta: 0.3, gamma_b: scale / l, l_max: l, sigma2: 0.5 }) {
            Ok(r) => {
                prop_assert!(r.rhs.is_finite());
                prop_assert_eq!(r.satisfied, r.lhs <= r.rhs * (1.0 + BOUND_SLACK));
                prop_assert_eq!(r.slack, BOUND_SLACK);
            }
            Err(_) => prop_assert!(scale > 1.0, "only an out-of-range beta may be refused"),
        }
    }
}
