//! Desk-scale replications of the convex experiments.
//!
//! Every preset returns plot-ready tables in memory; the CLI writes them.
//! Sizes are chosen so each preset finishes in seconds.

use std::fmt::Write as _;

use momsps_core::bounds::thm31_constants;
use momsps_core::optimizers::{RunConfig, RunRecord};
use momsps_core::problems::{optimal_hb_params, FiniteSumProblem, GammaForm, LeastSquaresSpec, LogisticSpec, Planted};
use momsps_core::stepsizes::{constant_liu, constant_momentum_preset, Bound, Rule, StepSizeState};

use crate::error::Result;
use crate::harness::{mean_final_loss, run_all, run_seeds, seed_configs};
use crate::num::fmt_f64;
use crate::records::to_tables;

pub const PRESETS: [&str; 6] = ["fig1", "fig2", "f2const", "f3alt", "f4gammab", "f5consts"];

pub fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

#[derive(Debug, Clone, Default)]
pub struct PresetOutput {
    pub name: String,
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
    /// Key-value facts written to `<name>_info.txt`.
    pub info: Vec<(String, String)>,
}

impl PresetOutput {
    fn new(name: &str) -> Self {
        PresetOutput { name: name.into(), ..Default::default() }
    }

    fn records(&mut self, label: &str, records: &[RunRecord]) {
        let t = to_tables(records);
        let stem = format!("{}_{label}", self.name);
        self.files.push((format!("{stem}_trajectory.csv"), t.trajectory));
        self.files.push((format!("{stem}_cesaro.csv"), t.cesaro));
        self.files.push((format!("{stem}_summary.csv"), t.summary));
    }

    fn fact(&mut self, key: &str, value: impl ToString) {
        self.info.push((key.into(), value.to_string()));
    }

    pub fn info_text(&self) -> String {
        self.info.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn run_preset(name: &str, seeds: &[u64]) -> Result<PresetOutput> {
    match name {
        "fig1" => Ok(fig1(seeds)?.output()),
        "fig2" => Ok(fig2()?.output()),
        "f2const" => f2const(seeds),
        "f3alt" => f3alt(seeds),
        "f4gammab" => f4gammab(seeds),
        "f5consts" => Ok(f5consts()),
        _ => Err(crate::Error::Config(vec![crate::config::ConfigError {
            path: "preset".into(),
            message: format!("unknown preset `{name}` (expected one of {})", PRESETS.join(", ")),
        }])),
    }
}

// bound checks ----------------------------------------------------------

pub const BOUND_BATCH: usize = 10;

/// Least squares for the bound and rate checks: `n = 200`, `d = 20`,
/// `cond(AᵀA) = 10⁴`, unit noise orthogonal to the range of `A` (so the
/// planted point stays the minimizer) and a planted point with equal weight
/// on every singular direction.
pub fn bound_problem(consistent: bool) -> Result<FiniteSumProblem> {
    Ok(LeastSquaresSpec::new(200, 20, 1e4, consistent, 1)
        .with_planted(Planted::SpectralFlat)
        .with_orthogonal_noise(true)
        .with_noise(1.0)
        .generate()?)
}

// fig1 ------------------------------------------------------------------

pub const FIG1_BATCH: usize = 5;
pub const FIG1_GAMMA_B: f64 = 100.0;
pub const FIG1_ITERATIONS: u64 = 2000;

/// Non-separable synthetic logistic regression, `n = 200`, `d = 20`.
pub fn fig1_problem() -> Result<FiniteSumProblem> {
    let mut spec = LogisticSpec::new(200, 20, false, 7);
    spec.signal = 5.0;
    Ok(spec.generate()?)
}

fn fig1_config(policy: StepSizeState, beta: f64, iterations: u64) -> RunConfig {
    RunConfig::new(policy, beta, iterations, FIG1_BATCH, 0)
}

#[derive(Debug, Clone)]
pub struct Fig1Panel {
    pub beta: f64,
    /// SPS_max used unchanged inside SHB.
    pub naive: Vec<RunRecord>,
    pub mom: Vec<RunRecord>,
}

impl Fig1Panel {
    pub fn initial_loss(&self) -> f64 {
        self.mom[0].f0
    }

    /// Diverged, or the seed-mean final loss is not below the start.
    pub fn naive_fails(&self) -> bool {
        self.naive.iter().any(|r| r.diverged) || mean_final_loss(&self.naive) >= self.initial_loss()
    }
}

#[derive(Debug, Clone)]
pub struct Fig1 {
    pub panels: Vec<Fig1Panel>,
}

pub fn fig1_panel(problem: &FiniteSumProblem, beta: f64, seeds: &[u64]) -> Result<Fig1Panel> {
    let gb = Bound::Finite(FIG1_GAMMA_B);
    let naive = fig1_config(StepSizeState::sps_max(1.0, gb), beta, FIG1_ITERATIONS);
    let mom = fig1_config(StepSizeState::mom_sps_max(beta, 1.0, gb), beta, FIG1_ITERATIONS);
    let k = seeds.len() as u64;
    let mut configs = seed_configs(&naive, seeds, 0);
    configs.extend(seed_configs(&mom, seeds, k));
    let mut all = run_all(problem, &configs)?;
    let mom = all.split_off(seeds.len());
    Ok(Fig1Panel { beta, naive: all, mom })
}

pub fn fig1(seeds: &[u64]) -> Result<Fig1> {
    let problem = fig1_problem()?;
    let panels = [0.2, 0.5].iter().map(|&b| fig1_panel(&problem, b, seeds)).collect::<Result<_>>()?;
    Ok(Fig1 { panels })
}

impl Fig1 {
    pub fn output(&self) -> PresetOutput {
        let mut out = PresetOutput::new("fig1");
        out.fact("problem", "logistic n=200 d=20 non-separable seed=7 signal=5");
        out.fact("batch_size", FIG1_BATCH);
        out.fact("gamma_b", FIG1_GAMMA_B);
        out.fact("T", FIG1_ITERATIONS);
        for p in &self.panels {
            let b = fmt_f64(p.beta);
            out.records(&format!("beta{b}_naive"), &p.naive);
            out.records(&format!("beta{b}_mom"), &p.mom);
            out.fact(&format!("beta{b}.initial_loss"), fmt_f64(p.initial_loss()));
            out.fact(&format!("beta{b}.naive_final_loss"), fmt_f64(mean_final_loss(&p.naive)));
            out.fact(&format!("beta{b}.naive_diverged"), p.naive.iter().filter(|r| r.diverged).count());
            out.fact(&format!("beta{b}.naive_fails"), p.naive_fails());
            out.fact(&format!("beta{b}.mom_final_loss"), fmt_f64(mean_final_loss(&p.mom)));
        }
        out
    }
}

// fig2 ------------------------------------------------------------------

pub const FIG2_SIZE: usize = 200;
pub const FIG2_GAMMA_B: f64 = 100.0;
pub const FIG2_ITERATIONS: u64 = 2000;

/// Consistent least squares, `n = d = 200`, `cond(AᵀA) = 10⁴`.
pub fn fig2_problem() -> Result<FiniteSumProblem> {
    Ok(LeastSquaresSpec::new(FIG2_SIZE, FIG2_SIZE, 1e4, true, 1).generate()?)
}

#[derive(Debug, Clone)]
pub struct Fig2 {
    pub beta_star: f64,
    pub gamma_star: f64,
    pub f_star: f64,
    /// `(label, record)` for mom_ps_max, polyak GD and tuned heavy ball.
    pub runs: Vec<(&'static str, RunRecord)>,
}

/// `(f − f*)/(f⁰ − f*)` per logged row.
pub fn relative_errors(record: &RunRecord, f_star: f64) -> Vec<(u64, f64)> {
    let span = record.f0 - f_star;
    record.rows.iter().map(|r| (r.t, (r.f - f_star) / span)).collect()
}

/// First logged iteration with relative error at most `tol`.
pub fn iterations_to(record: &RunRecord, f_star: f64, tol: f64) -> Option<u64> {
    relative_errors(record, f_star).into_iter().find(|&(_, e)| e <= tol).map(|(t, _)| t)
}

pub fn fig2() -> Result<Fig2> {
    let problem = fig2_problem()?;
    let meta = problem.metadata().expect("generated problems carry metadata");
    let l = meta.l_f.unwrap_or(meta.l_max);
    let mu = meta.mu.expect("square full-rank design is strongly convex");
    let hb = optimal_hb_params(l, mu, GammaForm::Squared)?;
    let n = problem.n();
    let mk = |policy: StepSizeState, beta: f64| RunConfig::new(policy, beta, FIG2_ITERATIONS, n, 0).with_log_every(1);
    let configs = [
        mk(StepSizeState::new(Rule::MomPsMax).with_beta(hb.beta).with_gamma_b(Bound::Finite(FIG2_GAMMA_B)), hb.beta),
        mk(StepSizeState::new(Rule::PolyakDeterministic), 0.0),
        mk(StepSizeState::constant(hb.gamma), hb.beta),
    ];
    let records = run_all(&problem, &configs)?;
    let runs = ["mom_ps_max", "polyak_gd", "heavy_ball"].into_iter().zip(records).collect();
    Ok(Fig2 { beta_star: hb.beta, gamma_star: hb.gamma, f_star: meta.f_star, runs })
}

impl Fig2 {
    pub fn record(&self, label: &str) -> &RunRecord {
        &self.runs.iter().find(|(l, _)| *l == label).expect("known label").1
    }

    pub fn output(&self) -> PresetOutput {
        let mut out = PresetOutput::new("fig2");
        out.fact("desk_scale", "n=d=200 instead of n=d=1000, same cond(AtA)=1e4");
        out.fact("beta_star", fmt_f64(self.beta_star));
        out.fact("gamma_star", fmt_f64(self.gamma_star));
        out.fact("gamma_b", FIG2_GAMMA_B);
        let mut csv = String::from("method,t,rel_error,gamma\n");
        for (label, rec) in &self.runs {
            for (row, (_, e)) in rec.rows.iter().zip(relative_errors(rec, self.f_star)) {
                let _ = writeln!(csv, "{label},{},{},{}", row.t, fmt_f64(e), fmt_f64(row.gamma));
            }
            let hit = iterations_to(rec, self.f_star, 1e-6).map_or("none".to_string(), |t| t.to_string());
            out.fact(&format!("{label}.iterations_to_1e-6"), hit);
        }
        out.files.push(("fig2_rel_error.csv".into(), csv));
        out
    }
}

// ablations ---------------------------------------------------------------

/// Constant steps `(1−β)/(2L_max)` against the earlier constant-step
/// analysis, on the fig1 problem.
pub fn f2const(seeds: &[u64]) -> Result<PresetOutput> {
    let problem = fig1_problem()?;
    let l = problem.l_max();
    let mut out = PresetOutput::new("f2const");
    for beta in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let ours = constant_momentum_preset(beta, l);
        let liu = constant_liu(beta, l);
        let b = fmt_f64(beta);
        out.fact(&format!("beta{b}.gamma_ours"), fmt_f64(ours));
        out.fact(&format!("beta{b}.gamma_liu"), fmt_f64(liu));
        let a = run_seeds(&problem, &fig1_config(StepSizeState::constant(ours), beta, FIG1_ITERATIONS), seeds)?;
        let c = run_seeds(
            &problem,
            &fig1_config(StepSizeState::constant_liu_preset(beta, l), beta, FIG1_ITERATIONS),
            seeds,
        )?;
        out.records(&format!("beta{b}_ours"), &a);
        out.records(&format!("beta{b}_liu"), &c);
    }
    Ok(out)
}

/// Naive momentum across β, and the alternative placements of `(1 − β)`
/// at β = 0.9, on the fig1 problem.
pub fn f3alt(seeds: &[u64]) -> Result<PresetOutput> {
    let problem = fig1_problem()?;
    let mut out = PresetOutput::new("f3alt");
    let gb = Bound::Finite(FIG1_GAMMA_B);
    for k in 0..10 {
        let beta = k as f64 / 10.0;
        let b = fmt_f64(beta);
        let naive = run_seeds(&problem, &fig1_config(StepSizeState::sps_max(1.0, gb), beta, FIG1_ITERATIONS), seeds)?;
        let mom =
            run_seeds(&problem, &fig1_config(StepSizeState::mom_sps_max(beta, 1.0, gb), beta, FIG1_ITERATIONS), seeds)?;
        out.fact(&format!("beta{b}.naive_diverged"), naive.iter().filter(|r| r.diverged).count());
        out.records(&format!("beta{b}_naive"), &naive);
        out.records(&format!("beta{b}_mom"), &mom);
    }
    let beta = 0.9;
    let variants = [
        ("mom_decsps", StepSizeState::mom_decsps(beta, 1.0, FIG1_GAMMA_B)),
        ("alt_mom_decsps", StepSizeState::new(Rule::AltMomDecSps).with_beta(beta).with_gamma_b(gb)),
        ("mom_adasps", StepSizeState::mom_adasps(beta, 1.0)),
        ("alt_mom_adasps", StepSizeState::new(Rule::AltMomAdaSps).with_beta(beta)),
    ];
    for (label, policy) in variants {
        let recs = run_seeds(&problem, &fig1_config(policy.reset(), beta, FIG1_ITERATIONS), seeds)?;
        out.fact(&format!("{label}.final_loss"), fmt_f64(mean_final_loss(&recs)));
        out.records(label, &recs);
    }
    Ok(out)
}

/// Sensitivity to `γ_b`: deterministic least squares (β = 0.97) and
/// logistic regression (β = 0.3) with and without the `(1 − β)` factor,
/// plus stochastic MomSPS_max with and without smoothing.
pub fn f4gammab(seeds: &[u64]) -> Result<PresetOutput> {
    let mut out = PresetOutput::new("f4gammab");
    let caps = [Bound::Finite(0.1), Bound::Finite(1.0), Bound::Finite(10.0), Bound::Finite(100.0), Bound::Unbounded];
    let cap_label = |b: Bound| b.finite().map_or("inf".to_string(), fmt_f64);
    let t = 1000;
    for (name, problem, beta) in [("ls", fig2_problem()?, 0.97), ("logistic", fig1_problem()?, 0.3)] {
        let n = problem.n();
        for cap in caps {
            for (label, rule) in [("mom", Rule::MomPsMax), ("alt", Rule::PolyakDeterministic)] {
                let policy = StepSizeState::new(rule).with_beta(beta).with_gamma_b(cap).reset();
                let rc = RunConfig::new(policy, beta, t, n, 0).with_log_every(1);
                let recs = run_seeds(&problem, &rc, &[0])?;
                out.records(&format!("{name}_gb{}_{label}", cap_label(cap)), &recs);
            }
        }
    }
    let problem = fig1_problem()?;
    let ratio = FIG1_BATCH as f64 / problem.n() as f64;
    for gb in [1.0, 10.0, 100.0] {
        let base = StepSizeState::mom_sps_max(0.9, 1.0, Bound::Finite(gb));
        let plain = run_seeds(&problem, &fig1_config(base, 0.9, FIG1_ITERATIONS), seeds)?;
        let smooth =
            run_seeds(&problem, &fig1_config(base.with_smoothing(2.0, ratio).reset(), 0.9, FIG1_ITERATIONS), seeds)?;
        out.records(&format!("stoch_gb{}_plain", fmt_f64(gb)), &plain);
        out.records(&format!("stoch_gb{}_smooth", fmt_f64(gb)), &smooth);
    }
    Ok(out)
}

/// `C1(β)`, `C2(β)` for `γ_b = 2`, `α = 1` on `β ∈ [0, 1/3)`.
pub fn f5consts() -> PresetOutput {
    let mut out = PresetOutput::new("f5consts");
    let mut csv = String::from("beta,C1,C2\n");
    for k in 0..34 {
        let beta = k as f64 / 100.0;
        if let Ok((c1, c2)) = thm31_constants(1.0, 2.0, beta) {
            let _ = writeln!(csv, "{},{},{}", fmt_f64(beta), fmt_f64(c1), fmt_f64(c2));
        }
    }
    out.fact("gamma_b", 2);
    out.fact("alpha", 1);
    out.fact("beta_max", fmt_f64(1.0 / 3.0));
    out.files.push(("f5consts.csv".into(), csv));
    out
}
