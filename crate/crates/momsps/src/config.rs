//! Experiment configuration: `key = value` pairs grouped by `[section]`
//! headers, `#` comments, several pairs per line allowed.
//!
//! ```text
//! version = 1
//! [problem]
//! kind = least_squares  n = 200  d = 20  cond = 1e4  consistent = false  seed = 1
//! [step]
//! rule = mom_sps_max  beta = 0.9  c = 1  gamma_b = 10
//! [run]
//! T = 10000  batch_size = 10  seeds = 0,1,2,3,4
//! [bounds]
//! checks = thm31
//! ```
//!
//! Key names are unique across sections, so a key may also appear before
//! any header (`rule=mom_sps_max beta=0.9`). Lists are comma separated;
//! vector-valued keys take either one number (broadcast) or `d` numbers.
//! Every problem is reported at once, each with its `section.key` path.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use momsps_core::bounds::TheoremId;
use momsps_core::optimizers::{OptimizerKind, ProjectionSet, RunConfig};
use momsps_core::problems::{FiniteSumProblem, LeastSquaresSpec, LogisticSpec, Planted};
use momsps_core::stepsizes::{Bound, Rule, StepSizeState};

use crate::error::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

/// `(section, key)`; the empty section holds top-level keys.
const SCHEMA: &[(&str, &str)] = &[
    ("", "version"),
    ("problem", "kind"),
    ("problem", "n"),
    ("problem", "d"),
    ("problem", "cond"),
    ("problem", "consistent"),
    ("problem", "noise"),
    ("problem", "planted"),
    ("problem", "orthogonal_noise"),
    ("problem", "separable"),
    ("problem", "margin"),
    ("problem", "signal"),
    ("problem", "seed"),
    ("problem", "path"),
    ("optimizer", "optimizer"),
    ("optimizer", "projection"),
    ("optimizer", "center"),
    ("optimizer", "radius"),
    ("optimizer", "lower"),
    ("optimizer", "upper"),
    ("optimizer", "x0"),
    ("step", "rule"),
    ("step", "beta"),
    ("step", "c"),
    ("step", "gamma_b"),
    ("step", "gamma"),
    ("step", "c_from_first_gap"),
    ("step", "smoothing_tau"),
    ("compare", "rules"),
    ("run", "T"),
    ("run", "batch_size"),
    ("run", "seeds"),
    ("run", "log_every"),
    ("run", "checkpoints"),
    ("run", "out"),
    ("bounds", "checks"),
    ("bounds", "sigma2_samples"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// `section.key`, or `line N` for syntax errors.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl ConfigError {
    pub(crate) fn join(errors: &[ConfigError]) -> String {
        errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
    }
}

/// One number broadcast to every coordinate, or an explicit vector.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorSpec {
    Scalar(f64),
    List(Vec<f64>),
}

impl VectorSpec {
    pub fn resolve(&self, d: usize) -> std::result::Result<Vec<f64>, String> {
        match self {
            VectorSpec::Scalar(v) => Ok(vec![*v; d]),
            VectorSpec::List(v) if v.len() == d => Ok(v.clone()),
            VectorSpec::List(v) => Err(format!("has {} entries, the problem dimension is {d}", v.len())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionSpec {
    Ball { center: VectorSpec, radius: f64 },
    Box { lower: VectorSpec, upper: VectorSpec },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    LeastSquares(LeastSquaresSpec),
    Logistic(LogisticSpec),
    /// LIBSVM file, read as binary logistic regression.
    Libsvm(PathBuf),
    /// Problem file written by `generate`.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSpec {
    pub rule: Rule,
    pub beta: f64,
    pub c: f64,
    pub gamma_b: Bound,
    /// Step of the `constant` rule; defaults to `(1 − β)/(2 L_max)`.
    pub gamma: Option<f64>,
    pub c_from_first_gap: bool,
    pub smoothing_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub version: u32,
    pub problem: ProblemSpec,
    pub optimizer: OptimizerKind,
    pub projection: Option<ProjectionSpec>,
    pub x0: Option<VectorSpec>,
    pub step: StepSpec,
    /// Rules run side by side by `compare`; the step parameters are shared.
    pub compare_rules: Vec<Rule>,
    pub iterations: u64,
    /// `None` means 1, or `n` for the deterministic rules.
    pub batch_size: Option<usize>,
    pub seeds: Vec<u64>,
    pub log_every: Option<u64>,
    pub checkpoints: Vec<u64>,
    pub out: Option<PathBuf>,
    pub checks: Vec<TheoremId>,
    pub sigma2_samples: usize,
}

struct Entry {
    line: usize,
    value: String,
}

/// Splits one line into `key=value` pairs. A token without `=` extends the
/// previous value, so `seeds = 0, 1, 2` and `a=1 b=2` both parse.
fn split_pairs(line: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut pending_key: Option<String> = None;
    let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i];
        if let Some((k, v)) = tok.split_once('=') {
            let key = if k.is_empty() {
                pending_key.take().ok_or_else(|| format!("`=` without a key near `{tok}`"))?
            } else {
                if let Some(p) = pending_key.take() {
                    return Err(format!("`{p}` has no `=`"));
                }
                k.to_string()
            };
            pairs.push((key, v.to_string()));
        } else if tokens.get(i + 1).is_some_and(|n| n.starts_with('=')) {
            if let Some(p) = pending_key.replace(tok.to_string()) {
                return Err(format!("`{p}` has no `=`"));
            }
        } else {
            match pairs.last_mut() {
                Some((_, v)) => {
                    if !v.is_empty() {
                        v.push(' ');
                    }
                    v.push_str(tok);
                }
                None => return Err(format!("expected `key = value`, found `{tok}`")),
            }
        }
        i += 1;
    }
    if let Some(p) = pending_key {
        return Err(format!("`{p}` has no `=`"));
    }
    Ok(pairs)
}

struct Parser {
    entries: BTreeMap<String, Entry>,
    errors: Vec<ConfigError>,
}

impl Parser {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ConfigError { path: path.into(), message: message.into() });
    }

    fn path(key: &str) -> String {
        match SCHEMA.iter().find(|(_, k)| *k == key) {
            Some(("", k)) => (*k).to_string(),
            Some((s, k)) => format!("{s}.{k}"),
            None => key.to_string(),
        }
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key).map(|e| (e.line, e.value))
    }

    fn parsed<T>(&mut self, key: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Option<T> {
        let (_, v) = self.take(key)?;
        match f(&v) {
            Ok(t) => Some(t),
            Err(m) => {
                self.err(Self::path(key), m);
                None
            }
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        self.parsed(key, |v| {
            match v.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => return Ok(f64::INFINITY),
                _ => {}
            }
            v.parse::<f64>().ok().filter(|x| !x.is_nan()).ok_or_else(|| format!("expected a number, found `{v}`"))
        })
    }

    fn int<T: std::str::FromStr>(&mut self, key: &str) -> Option<T> {
        self.parsed(key, |v| {
            // accept `1e4` style integers
            v.parse::<T>().or_else(|_| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.fract() == 0.0 && *x >= 0.0 && *x < 9.0e15)
                    .and_then(|x| (x as u64).to_string().parse::<T>().ok())
                    .ok_or_else(|| format!("expected a non-negative integer, found `{v}`"))
            })
        })
    }

    fn flag(&mut self, key: &str) -> Option<bool> {
        self.parsed(key, |v| v.parse::<bool>().map_err(|_| format!("expected true or false, found `{v}`")))
    }

    fn list<T>(&mut self, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Option<Vec<T>> {
        self.parsed(key, |v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(&f).collect())
    }

    fn vector(&mut self, key: &str) -> Option<VectorSpec> {
        let v = self.list(key, |s| s.parse::<f64>().map_err(|_| format!("expected numbers, found `{s}`")))?;
        Some(if v.len() == 1 { VectorSpec::Scalar(v[0]) } else { VectorSpec::List(v) })
    }
}

fn parse_seed_list(v: &str) -> std::result::Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        // `a..b` is a half-open range
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
            let b: u64 = b.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?);
        }
    }
    if out.is_empty() {
        return Err("at least one seed is required".into());
    }
    Ok(out)
}

/// Bound checks report a standard error, so they need two or more runs.
pub fn seeds_for_checks(checks: &[TheoremId], seeds: &[u64]) -> Option<String> {
    (!checks.is_empty() && seeds.len() < 2).then(|| "bound checks need at least two seeds".to_string())
}

/// Parses `a,b,c` (or `a..b`) seed lists as used by `--seeds`.
pub fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    parse_seed_list(v).map_err(|m| Error::Config(vec![ConfigError { path: "seeds".into(), message: m }]))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut p = Parser { entries: BTreeMap::new(), errors: Vec::new() };
    let mut section = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if SCHEMA.iter().any(|(s, _)| *s == name && !name.is_empty()) {
                section = name.to_string();
            } else {
                p.err(format!("line {line_no}"), format!("unknown section `[{name}]`"));
                section = format!("?{name}");
            }
            continue;
        }
        let pairs = match split_pairs(line) {
            Ok(pairs) => pairs,
            Err(m) => {
                p.err(format!("line {line_no}"), m);
                continue;
            }
        };
        for (key, value) in pairs {
            let key = key.trim().to_string();
            let shown = if section.is_empty() { key.clone() } else { format!("{section}.{key}") };
            match SCHEMA.iter().find(|(_, k)| *k == key) {
                None => p.err(shown, "unknown key"),
                Some((s, _)) if !section.is_empty() && *s != section => {
                    p.err(shown, format!("unknown key; `{key}` belongs to [{s}]"))
                }
                Some(_) if value.trim().is_empty() => p.err(shown, "missing value"),
                Some(_) if p.entries.contains_key(&key) => {
                    let first = p.entries[&key].line;
                    p.err(shown, format!("duplicate key (first set on line {first})"))
                }
                Some(_) => {
                    p.entries.insert(key, Entry { line: line_no, value: value.trim().to_string() });
                }
            }
        }
    }
    build(p)
}

fn build(mut p: Parser) -> Result<ExperimentConfig> {
    let version = p.int::<u32>("version").unwrap_or(CONFIG_VERSION);
    if version != CONFIG_VERSION {
        p.err("version", format!("unsupported version {version} (expected {CONFIG_VERSION})"));
    }

    // problem
    let kind = p.take("kind").map(|(_, v)| v).unwrap_or_else(|| "least_squares".into());
    let n = p.int::<usize>("n").unwrap_or(200);
    let d = p.int::<usize>("d").unwrap_or(20);
    let seed = p.int::<u64>("seed").unwrap_or(0);
    let cond = p.float("cond");
    let consistent = p.flag("consistent");
    let noise = p.float("noise");
    let planted = p.parsed("planted", |v| match v {
        "gaussian" => Ok(Planted::Gaussian),
        "spectral_flat" => Ok(Planted::SpectralFlat),
        _ => Err(format!("expected gaussian or spectral_flat, found `{v}`")),
    });
    let orthogonal_noise = p.flag("orthogonal_noise");
    let separable = p.flag("separable");
    let margin = p.float("margin");
    let signal = p.float("signal");
    let path = p.take("path").map(|(_, v)| PathBuf::from(v));
    if n == 0 {
        p.err("problem.n", "n must be at least 1");
    }
    if d == 0 {
        p.err("problem.d", "d must be at least 1");
    }
    let problem = match kind.as_str() {
        "least_squares" => {
            let mut s = LeastSquaresSpec::new(n, d, cond.unwrap_or(1e4), consistent.unwrap_or(false), seed);
            if let Some(v) = noise {
                s = s.with_noise(v);
            }
            if let Some(v) = planted {
                s = s.with_planted(v);
            }
            if let Some(v) = orthogonal_noise {
                s = s.with_orthogonal_noise(v);
            }
            if s.cond_ata.is_nan() || s.cond_ata < 1.0 {
                p.err("problem.cond", "cond must be at least 1");
            }
            Some(ProblemSpec::LeastSquares(s))
        }
        "logistic" => {
            let mut s = LogisticSpec::new(n, d, separable.unwrap_or(false), seed);
            if let Some(v) = margin {
                s.margin = v;
            }
            if let Some(v) = signal {
                s.signal = v;
            }
            Some(ProblemSpec::Logistic(s))
        }
        "libsvm" | "file" => match path {
            Some(path) if kind == "libsvm" => Some(ProblemSpec::Libsvm(path)),
            Some(path) => Some(ProblemSpec::File(path)),
            None => {
                p.err("problem.path", format!("missing required key for kind = {kind}"));
                None
            }
        },
        other => {
            p.err("problem.kind", format!("unknown problem kind `{other}`"));
            None
        }
    };

    // optimizer
    let mut optimizer =
        p.parsed("optimizer", |v| v.parse::<OptimizerKind>().map_err(|e| e.to_string())).unwrap_or(OptimizerKind::Shb);
    let center = p.vector("center");
    let radius = p.float("radius");
    let lower = p.vector("lower");
    let upper = p.vector("upper");
    let projection = match p.take("projection").map(|(_, v)| v).as_deref() {
        None | Some("none") => None,
        Some("ball") => match radius {
            Some(r) if r > 0.0 => {
                Some(ProjectionSpec::Ball { center: center.unwrap_or(VectorSpec::Scalar(0.0)), radius: r })
            }
            _ => {
                p.err("optimizer.radius", "a ball projection needs a positive radius");
                None
            }
        },
        Some("box") => match (lower, upper) {
            (Some(lower), Some(upper)) => Some(ProjectionSpec::Box { lower, upper }),
            _ => {
                p.err("optimizer.lower", "a box projection needs both lower and upper");
                None
            }
        },
        Some(other) => {
            p.err("optimizer.projection", format!("expected none, ball or box, found `{other}`"));
            None
        }
    };
    if projection.is_some() {
        optimizer = OptimizerKind::ProjectedIma;
    } else if optimizer == OptimizerKind::ProjectedIma {
        p.err("optimizer.projection", "projected_ima needs a projection");
    }
    let x0 = p.vector("x0");

    // step
    let rule = match p.take("rule") {
        Some((_, v)) => match v.parse::<Rule>() {
            Ok(r) => Some(r),
            Err(_) => {
                p.err("step.rule", format!("unknown rule `{v}`"));
                None
            }
        },
        None => {
            p.err("step.rule", "missing required key");
            None
        }
    };
    let beta = p.float("beta").unwrap_or(0.0);
    if !(0.0..1.0).contains(&beta) {
        p.err("step.beta", "beta must lie in [0,1)");
    }
    let c = p.float("c").unwrap_or(1.0);
    if !(c > 0.0 && c.is_finite()) {
        p.err("step.c", "c must be positive");
    }
    let gamma_b = match p.float("gamma_b") {
        None => Bound::Unbounded,
        Some(v) if v == f64::INFINITY => Bound::Unbounded,
        Some(v) if v > 0.0 => Bound::Finite(v),
        Some(_) => {
            p.err("step.gamma_b", "gamma_b must be positive");
            Bound::Unbounded
        }
    };
    let gamma = p.float("gamma");
    if gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
        p.err("step.gamma", "gamma must be positive");
    }
    let c_from_first_gap = p.flag("c_from_first_gap").unwrap_or(false);
    let smoothing_tau = p.float("smoothing_tau");
    if smoothing_tau.is_some_and(|t| !(t >= 1.0 && t.is_finite())) {
        p.err("step.smoothing_tau", "smoothing_tau must be at least 1");
    }
    let compare_rules =
        p.list("rules", |s| s.parse::<Rule>().map_err(|_| format!("unknown rule `{s}`"))).unwrap_or_default();

    // run
    let iterations = match p.int::<u64>("T") {
        Some(0) => {
            p.err("run.T", "T must be at least 1");
            None
        }
        Some(t) => Some(t),
        None if p.errors.iter().any(|e| e.path == "run.T") => None,
        None => {
            p.err("run.T", "missing required key");
            None
        }
    };
    let batch_size = p.int::<usize>("batch_size");
    if batch_size == Some(0) {
        p.err("run.batch_size", "batch_size must be at least 1");
    }
    let seeds = p.parsed("seeds", parse_seed_list).unwrap_or_else(|| (0..5).collect());
    let log_every = p.int::<u64>("log_every");
    if log_every == Some(0) {
        p.err("run.log_every", "log_every must be at least 1");
    }
    let checkpoints =
        p.list("checkpoints", |s| s.parse::<u64>().map_err(|_| format!("bad checkpoint `{s}`"))).unwrap_or_default();
    let out = p.take("out").map(|(_, v)| PathBuf::from(v));

    // bounds
    let checks =
        p.list("checks", |s| s.parse::<TheoremId>().map_err(|_| format!("unknown bound `{s}`"))).unwrap_or_default();
    let sigma2_samples = p.int::<usize>("sigma2_samples").unwrap_or(10_000);

    let n_known = match &problem {
        Some(ProblemSpec::LeastSquares(s)) => Some(s.n),
        Some(ProblemSpec::Logistic(s)) => Some(s.n),
        _ => None,
    };
    if let (Some(b), Some(n)) = (batch_size, n_known) {
        if rule.is_some_and(Rule::is_deterministic) && b != n {
            p.err("run.batch_size", format!("deterministic rules need batch_size = n = {n}"));
        } else if b > n {
            p.err("run.batch_size", format!("batch_size exceeds n = {n}"));
        }
    }
    for id in &checks {
        let need_cap = matches!(id, TheoremId::Thm31 | TheoremId::Thm35);
        if need_cap && gamma_b == Bound::Unbounded {
            p.err("bounds.checks", format!("{} needs a finite gamma_b", id.name()));
        }
    }
    if let Some(m) = seeds_for_checks(&checks, &seeds) {
        p.err("run.seeds", m);
    }

    if !p.errors.is_empty() {
        return Err(Error::Config(p.errors));
    }
    Ok(ExperimentConfig {
        version,
        problem: problem.expect("checked above"),
        optimizer,
        projection,
        x0,
        step: StepSpec { rule: rule.expect("checked above"), beta, c, gamma_b, gamma, c_from_first_gap, smoothing_tau },
        compare_rules,
        iterations: iterations.expect("checked above"),
        batch_size,
        seeds,
        log_every,
        checkpoints,
        out,
        checks,
        sigma2_samples,
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    // relative data paths are taken from the config file's directory
    let base = path.parent().unwrap_or(Path::new(""));
    match &mut cfg.problem {
        ProblemSpec::Libsvm(p) | ProblemSpec::File(p) if p.is_relative() => *p = base.join(&*p),
        _ => {}
    }
    Ok(cfg)
}

impl ExperimentConfig {
    /// Builds the problem; files without metadata get a reference solve.
    pub fn build_problem(&self) -> Result<FiniteSumProblem> {
        let mut problem = match &self.problem {
            ProblemSpec::LeastSquares(s) => s.generate()?,
            ProblemSpec::Logistic(s) => s.generate()?,
            ProblemSpec::Libsvm(path) => {
                let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                crate::libsvm::parse_libsvm(std::io::BufReader::new(f))?.to_logistic_problem()?
            }
            ProblemSpec::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                crate::problem_file::parse_problem(&text)?
            }
        };
        if problem.metadata().is_none() {
            let m = momsps_core::problems::solve_reference(&problem)?;
            problem.set_metadata(Some(m));
        }
        Ok(problem)
    }

    pub fn batch_size_for(&self, rule: Rule, n: usize) -> usize {
        if rule.is_deterministic() {
            n
        } else {
            self.batch_size.unwrap_or(1)
        }
    }

    /// Step-size state for `rule` with the configured parameters.
    pub fn policy(&self, rule: Rule, problem: &FiniteSumProblem) -> StepSizeState {
        let s = &self.step;
        let mut st = StepSizeState::new(rule).with_beta(s.beta).with_c(s.c).with_gamma_b(s.gamma_b);
        if s.c_from_first_gap {
            st = st.with_c_from_first_gap();
        }
        match rule {
            Rule::Constant => {
                let g = s
                    .gamma
                    .unwrap_or_else(|| momsps_core::stepsizes::constant_momentum_preset(s.beta, problem.l_max()));
                st = st.with_constant(g);
            }
            Rule::ConstantLiu => {
                st = StepSizeState::constant_liu_preset(s.beta, problem.l_max());
            }
            _ => {}
        }
        if let Some(tau) = s.smoothing_tau {
            let ratio = self.batch_size_for(rule, problem.n()) as f64 / problem.n() as f64;
            st = st.with_smoothing(tau, ratio);
        }
        st.reset()
    }

    /// Base run configuration for `rule`; the harness fills in seeds.
    pub fn run_config(&self, rule: Rule, problem: &FiniteSumProblem) -> Result<RunConfig> {
        let d = problem.dim();
        let wrap = |path: &str, m: String| Error::Config(vec![ConfigError { path: path.into(), message: m }]);
        let mut rc = RunConfig::new(
            self.policy(rule, problem),
            self.step.beta,
            self.iterations,
            self.batch_size_for(rule, problem.n()),
            0,
        )
        .with_kind(self.optimizer)
        .with_checkpoints(self.checkpoints.clone());
        if rc.batch_size > problem.n() {
            return Err(wrap("run.batch_size", format!("batch_size exceeds n = {}", problem.n())));
        }
        if let Some(every) = self.log_every {
            rc = rc.with_log_every(every);
        }
        if let Some(x0) = &self.x0 {
            rc = rc.with_x0(x0.resolve(d).map_err(|m| wrap("optimizer.x0", m))?);
        }
        if let Some(proj) = &self.projection {
            let set = match proj {
                ProjectionSpec::Ball { center, radius } => {
                    ProjectionSet::ball(center.resolve(d).map_err(|m| wrap("optimizer.center", m))?, *radius)?
                }
                ProjectionSpec::Box { lower, upper } => ProjectionSet::boxed(
                    lower.resolve(d).map_err(|m| wrap("optimizer.lower", m))?,
                    upper.resolve(d).map_err(|m| wrap("optimizer.upper", m))?,
                )?,
            };
            rc = rc.with_projection(set);
        }
        Ok(rc)
    }

    pub fn rules_to_compare(&self) -> Vec<Rule> {
        if self.compare_rules.is_empty() {
            vec![self.step.rule]
        } else {
            self.compare_rules.clone()
        }
    }
}
