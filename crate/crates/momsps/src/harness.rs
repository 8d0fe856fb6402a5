//! Multi-seed execution and bound evaluation.
//!
//! Runs share the immutable problem and nothing else; each worker thread owns
//! its sampler and iterate. Results are collected after the scope joins, so
//! bound checks and CSV output always see the complete record set.

use std::thread;
use std::time::Instant;

use momsps_core::bounds::{check_bound, BoundReport, BoundSpec, TheoremId};
use momsps_core::optimizers::{run, RunConfig, RunRecord};
use momsps_core::problems::{estimate_sigma2, FiniteSumProblem};
use momsps_core::stepsizes::Rule;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

/// One configuration per seed. Run `i` gets `run_id = first_id + i` and
/// batch stream `i`, so the same seed index sees the same batches across
/// rules.
pub fn seed_configs(base: &RunConfig, seeds: &[u64], first_id: u64) -> Vec<RunConfig> {
    seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut c = base.clone();
            c.seed = s;
            c.stream = i as u64;
            c.run_id = first_id + i as u64;
            c
        })
        .collect()
}

fn workers(jobs: usize) -> usize {
    thread::available_parallelism().map_or(1, |n| n.get()).min(jobs).max(1)
}

/// Executes every configuration, in parallel, and returns the records in
/// input order with wallclock seconds filled in.
pub fn run_all(problem: &FiniteSumProblem, configs: &[RunConfig]) -> Result<Vec<RunRecord>> {
    let k = workers(configs.len());
    let mut slots: Vec<Option<Result<RunRecord>>> = (0..configs.len()).map(|_| None).collect();
    thread::scope(|scope| {
        let handles: Vec<_> = (0..k)
            .map(|w| {
                scope.spawn(move || {
                    (w..configs.len())
                        .step_by(k)
                        .map(|i| {
                            let start = Instant::now();
                            let rec = run(problem, &configs[i]).map(|mut r| {
                                r.wallclock = Some(start.elapsed().as_secs_f64());
                                r
                            });
                            (i, rec.map_err(Error::from))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("run thread panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

pub fn run_seeds(problem: &FiniteSumProblem, base: &RunConfig, seeds: &[u64]) -> Result<Vec<RunRecord>> {
    run_all(problem, &seed_configs(base, seeds, 0))
}

/// `σ²` at the given batch size; exact when enumeration is cheap.
pub fn sigma2_at(problem: &FiniteSumProblem, batch_size: usize, samples: usize) -> Result<f64> {
    let meta = problem.metadata().ok_or(momsps_core::Error::MissingMetadata("sigma2"))?;
    if meta.interpolated {
        return Ok(0.0);
    }
    Ok(estimate_sigma2(problem, meta, batch_size, samples, 0)?.value)
}

/// Bound for theorem `id` with the parameters of `cfg`'s step rule.
pub fn bound_spec(id: TheoremId, cfg: &RunConfig, problem: &FiniteSumProblem, sigma2: f64) -> Result<BoundSpec> {
    let l_max = problem.l_max();
    let beta = cfg.beta;
    let p = &cfg.policy;
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::Core(momsps_core::Error::Precondition(format!("{} {what}", id.name()))))
        }
    };
    let gamma_b = p.gamma_b.finite();
    Ok(match id {
        TheoremId::Thm31 => {
            need(
                p.rule == Rule::MomSpsMax && p.c == 1.0 && gamma_b.is_some(),
                "needs mom_sps_max with c = 1 and finite gamma_b",
            )?;
            BoundSpec::Thm31 { beta, gamma_b: gamma_b.unwrap(), l_max, sigma2 }
        }
        TheoremId::Cor34 => {
            need(p.rule == Rule::Constant, "needs the constant rule")?;
            BoundSpec::Cor34 { gamma: p.constant, beta, l_max, sigma2 }
        }
        TheoremId::Thm35 => {
            need(
                p.rule == Rule::MomDecSps && p.c == 1.0 && gamma_b.is_some(),
                "needs mom_decsps with c = 1 and finite gamma_b",
            )?;
            BoundSpec::Thm35 { beta, gamma_b: gamma_b.unwrap(), l_max, sigma2 }
        }
        TheoremId::Thm36 => {
            need(p.rule == Rule::MomAdaSps, "needs mom_adasps")?;
            BoundSpec::Thm36 { beta, c: p.c, l_max, sigma2 }
        }
    })
}

/// Evaluates the bound checks requested by `exp` on records of one rule.
pub fn evaluate_checks(
    problem: &FiniteSumProblem,
    exp: &ExperimentConfig,
    base: &RunConfig,
    records: &[RunRecord],
) -> Result<Vec<BoundReport>> {
    if exp.checks.is_empty() {
        return Ok(Vec::new());
    }
    let sigma2 = sigma2_at(problem, base.batch_size, exp.sigma2_samples)?;
    exp.checks.iter().map(|&id| Ok(check_bound(records, &bound_spec(id, base, problem, sigma2)?)?)).collect()
}

/// Mean of `f` at the last logged row, over records.
pub fn mean_final_loss(records: &[RunRecord]) -> f64 {
    records.iter().map(RunRecord::last_f).sum::<f64>() / records.len() as f64
}
