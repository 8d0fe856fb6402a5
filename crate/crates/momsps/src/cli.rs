//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or malformed input, 2 configuration error,
//! 3 a run diverged, 4 a requested bound check failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use momsps_core::bounds::BoundReport;
use momsps_core::optimizers::RunRecord;

use crate::config::{load_config, parse_seeds, seeds_for_checks, ConfigError, ExperimentConfig};
use crate::error::{Error, Result};
use crate::harness::{evaluate_checks, run_all, seed_configs};
use crate::num::fmt_f64;
use crate::presets::{default_seeds, run_preset, PRESETS};
use crate::problem_file::write_problem;
use crate::records::{self, write_file};
use crate::report::write_report;

pub const OUT_DIR_ENV: &str = "MOMSPS_OUT_DIR";
const DEFAULT_OUT: &str = "momsps-out";

#[derive(Debug, Parser)]
#[command(name = "momsps", version, about = "Stochastic heavy ball with momentum-corrected Polyak step-sizes")]
pub struct Cli {
    /// Output directory [env: MOMSPS_OUT_DIR; else the config's `out`; else ./momsps-out]
    #[arg(long, global = true, env = OUT_DIR_ENV, hide_env = true)]
    pub out: Option<PathBuf>,

    /// Comma-separated run seeds (`0,1,2` or `0..5`), overriding the config
    #[arg(long, global = true)]
    pub seeds: Option<String>,

    /// Only report errors
    #[arg(long, global = true)]
    pub quiet: bool,

    /// Also write wallclock times to timing.csv (not reproducible)
    #[arg(long, global = true)]
    pub timings: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the configured problem and write it as a problem file
    Generate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured rule over all seeds and write CSVs
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every rule in `[compare] rules` on one problem
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the configured bound checks on stored records
    CheckBounds {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding trajectory/cesaro/summary CSVs [default: output directory]
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Replicate an experiment at desk scale
    Replicate {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        preset: String,
    },
}

struct Ctx {
    out: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    quiet: bool,
    timings: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn out_dir(&self, cfg: Option<&ExperimentConfig>) -> PathBuf {
        self.out.clone().or_else(|| cfg.and_then(|c| c.out.clone())).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    fn config(&self, path: &Path) -> Result<ExperimentConfig> {
        let mut cfg = load_config(path)?;
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
            if let Some(message) = seeds_for_checks(&cfg.checks, &cfg.seeds) {
                return Err(Error::Config(vec![ConfigError { path: "--seeds".into(), message }]));
            }
        }
        Ok(cfg)
    }
}

pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let seeds = cli.seeds.as_deref().map(parse_seeds).transpose()?;
    let ctx = Ctx { out: cli.out, seeds, quiet: cli.quiet, timings: cli.timings };
    match cli.command {
        Command::Generate { config } => generate(&ctx, &config),
        Command::Run { config } => run_rules(&ctx, &config, false),
        Command::Compare { config } => run_rules(&ctx, &config, true),
        Command::CheckBounds { config, records } => check_bounds(&ctx, &config, records),
        Command::Replicate { preset } => replicate(&ctx, &preset),
    }
}

fn generate(ctx: &Ctx, path: &Path) -> Result<()> {
    let cfg = ctx.config(path)?;
    let problem = cfg.build_problem()?;
    let dest = ctx.out_dir(Some(&cfg)).join("problem.txt");
    write_file(&dest, &write_problem(&problem))?;
    ctx.say(format!("wrote {} (n = {}, d = {})", dest.display(), problem.n(), problem.dim()));
    Ok(())
}

fn write_reports(ctx: &Ctx, dir: &Path, prefix: &str, reports: &[BoundReport]) -> Result<usize> {
    let mut violated = 0;
    for r in reports {
        write_file(&dir.join(format!("{prefix}bounds_{}.txt", r.theorem.name())), &write_report(r))?;
        if !r.satisfied {
            violated += 1;
        }
        ctx.say(format!(
            "{}: lhs {} ± {} vs rhs {} -> {}",
            r.theorem.name(),
            fmt_f64(r.lhs),
            fmt_f64(r.lhs_stderr),
            fmt_f64(r.rhs),
            if r.diverged {
                "diverged"
            } else if r.satisfied {
                "satisfied"
            } else {
                "VIOLATED"
            }
        ));
    }
    Ok(violated)
}

fn summarize(ctx: &Ctx, label: &str, records: &[RunRecord]) {
    for r in records {
        let status = match r.diverged_at {
            Some(t) if r.diverged => format!("diverged at t = {t}"),
            _ if r.diverged => "diverged".to_string(),
            _ => format!("f(x_avg) - f* = {}", fmt_f64(r.subopt_cesaro())),
        };
        ctx.say(format!("{label} run {} seed {}: {status}", r.run_id, r.seed));
    }
}

fn run_rules(ctx: &Ctx, path: &Path, compare: bool) -> Result<()> {
    let cfg = ctx.config(path)?;
    let problem = cfg.build_problem()?;
    let dir = ctx.out_dir(Some(&cfg));
    let rules = if compare { cfg.rules_to_compare() } else { vec![cfg.step.rule] };

    let mut bases = Vec::new();
    let mut configs = Vec::new();
    for (k, &rule) in rules.iter().enumerate() {
        let base = cfg.run_config(rule, &problem)?;
        configs.extend(seed_configs(&base, &cfg.seeds, (k * cfg.seeds.len()) as u64));
        bases.push(base);
    }
    let all = run_all(&problem, &configs)?;

    let mut violated = 0;
    let mut index = String::from("run_id,seed,rule\n");
    for (k, (rule, base)) in rules.iter().zip(&bases).enumerate() {
        let recs = &all[k * cfg.seeds.len()..(k + 1) * cfg.seeds.len()];
        summarize(ctx, rule.name(), recs);
        for r in recs {
            index.push_str(&format!("{},{},{}\n", r.run_id, r.seed, rule.name()));
        }
        let prefix = if compare { format!("{}_", rule.name()) } else { String::new() };
        let reports = evaluate_checks(&problem, &cfg, base, recs)?;
        violated += write_reports(ctx, &dir, &prefix, &reports)?;
    }
    records::emit(&all, &dir, "", ctx.timings)?;
    if compare {
        write_file(&dir.join("runs.csv"), &index)?;
    }
    ctx.say(format!("wrote {}", dir.display()));

    let diverged = all.iter().filter(|r| r.diverged).count();
    if diverged > 0 {
        return Err(Error::Diverged(diverged));
    }
    if violated > 0 {
        return Err(Error::BoundViolated(violated));
    }
    Ok(())
}

fn check_bounds(ctx: &Ctx, path: &Path, records_dir: Option<PathBuf>) -> Result<()> {
    let cfg = ctx.config(path)?;
    let problem = cfg.build_problem()?;
    let out = ctx.out_dir(Some(&cfg));
    let src = records_dir.unwrap_or_else(|| out.clone());
    let recs = records::load(&src, "")?;
    let base = cfg.run_config(cfg.step.rule, &problem)?;
    let reports = evaluate_checks(&problem, &cfg, &base, &recs)?;
    let violated = write_reports(ctx, &out, "", &reports)?;
    if reports.iter().any(|r| r.diverged) {
        return Err(Error::Diverged(recs.iter().filter(|r| r.diverged).count()));
    }
    if violated > 0 {
        return Err(Error::BoundViolated(violated));
    }
    Ok(())
}

fn replicate(ctx: &Ctx, preset: &str) -> Result<()> {
    let seeds = ctx.seeds.clone().unwrap_or_else(default_seeds);
    let out = run_preset(preset, &seeds)?;
    let dir = ctx.out_dir(None);
    for (name, contents) in &out.files {
        write_file(&dir.join(name), contents)?;
    }
    write_file(&dir.join(format!("{}_info.txt", out.name)), &out.info_text())?;
    for (k, v) in &out.info {
        ctx.say(format!("{k} = {v}"));
    }
    ctx.say(format!("wrote {} files to {}", out.files.len() + 1, dir.display()));
    Ok(())
}
