//! Plain-text problem files.
//!
//! ```text
//! momsps-problem 1
//! n = 3
//! d = 2
//!
//! [metadata]
//! f_star = 0
//! l_max = 2
//! interpolated = true
//! x_star = 1 -1
//!
//! [components]
//! squared_residual 2 0.5 0 | 1 0
//! logistic -1 0 | 0.5 2
//! quadratic 1 0 | 3 4
//! ```
//!
//! Each component line is `<kind> <params> <lower_bound> | <vector>`, where
//! the params are `weight target` for `squared_residual`, `label` for
//! `logistic` and `curvature` for `quadratic`. Optional metadata keys
//! (`l_f`, `mu`, `sigma2`, `approximate`) are omitted when absent.

use std::fmt::Write as _;

use momsps_core::problems::{Component, FiniteSumProblem, Loss, ProblemMetadata};

use crate::error::{Error, Result};
use crate::num::{fmt_f64, parse_f64};

pub const MAGIC: &str = "momsps-problem";
pub const VERSION: u32 = 1;

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

pub fn write_problem(problem: &FiniteSumProblem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "n = {}", problem.n());
    let _ = writeln!(s, "d = {}", problem.dim());
    if let Some(m) = problem.metadata() {
        let _ = writeln!(s, "\n[metadata]");
        let _ = writeln!(s, "f_star = {}", fmt_f64(m.f_star));
        let _ = writeln!(s, "l_max = {}", fmt_f64(m.l_max));
        let opt = [("l_f", m.l_f), ("mu", m.mu), ("sigma2", m.sigma2), ("approximate", m.approximate)];
        for (k, v) in opt {
            if let Some(v) = v {
                let _ = writeln!(s, "{k} = {}", fmt_f64(v));
            }
        }
        let _ = writeln!(s, "interpolated = {}", m.interpolated);
        let _ = writeln!(s, "x_star = {}", join(&m.x_star));
    }
    let _ = writeln!(s, "\n[components]");
    for c in problem.components() {
        let lb = fmt_f64(c.lower_bound);
        let _ = match &c.loss {
            Loss::SquaredResidual { row, target, weight } => {
                writeln!(s, "squared_residual {} {} {lb} | {}", fmt_f64(*weight), fmt_f64(*target), join(row))
            }
            Loss::Logistic { row, label } => {
                writeln!(s, "logistic {} {lb} | {}", fmt_f64(*label), join(row))
            }
            Loss::Quadratic { center, curvature } => {
                writeln!(s, "quadratic {} {lb} | {}", fmt_f64(*curvature), join(center))
            }
        };
    }
    s
}

fn floats(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split_ascii_whitespace()
        .map(|t| parse_f64(t).ok_or_else(|| Error::parse("problem", line, format!("malformed number `{t}`"))))
        .collect()
}

pub fn parse_problem(text: &str) -> Result<FiniteSumProblem> {
    #[derive(PartialEq)]
    enum Section {
        Header,
        Metadata,
        Components,
    }
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    match lines.next() {
        Some((_, first)) if first == format!("{MAGIC} {VERSION}") => {}
        Some((_, first)) if first.starts_with(MAGIC) => {
            return Err(Error::parse("problem", 1, format!("unsupported version in `{first}`")))
        }
        _ => return Err(Error::parse("problem", 1, format!("expected `{MAGIC} {VERSION}`"))),
    }

    let mut section = Section::Header;
    let (mut n, mut d) = (None, None);
    let mut meta: Vec<(usize, String, String)> = Vec::new();
    let mut components = Vec::new();
    for (ln, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line {
            "[metadata]" => {
                section = Section::Metadata;
                continue;
            }
            "[components]" => {
                section = Section::Components;
                continue;
            }
            _ => {}
        }
        if section == Section::Components {
            components.push(parse_component(line, ln, d)?);
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::parse("problem", ln, "expected `key = value`"))?;
        let (k, v) = (k.trim(), v.trim());
        let count = |v: &str| v.parse::<usize>().map_err(|_| Error::parse("problem", ln, format!("bad count `{v}`")));
        match (&section, k) {
            (Section::Header, "n") => n = Some(count(v)?),
            (Section::Header, "d") => d = Some(count(v)?),
            (Section::Metadata, _) => meta.push((ln, k.to_string(), v.to_string())),
            _ => return Err(Error::parse("problem", ln, format!("unknown key `{k}`"))),
        }
    }

    let n = n.ok_or_else(|| Error::parse("problem", 1, "missing `n`"))?;
    if components.len() != n {
        return Err(Error::parse("problem", 1, format!("header says n = {n}, found {} components", components.len())));
    }
    let mut problem = FiniteSumProblem::new(components)?;
    if !meta.is_empty() {
        problem.set_metadata(Some(parse_metadata(&meta, problem.dim())?));
    }
    Ok(problem)
}

fn parse_component(line: &str, ln: usize, d: Option<usize>) -> Result<Component> {
    let (head, vector) = line.split_once('|').ok_or_else(|| Error::parse("problem", ln, "component line lacks `|`"))?;
    let mut head = head.split_ascii_whitespace();
    let kind = head.next().unwrap_or("");
    let params = floats(&head.collect::<Vec<_>>().join(" "), ln)?;
    let vector = floats(vector, ln)?;
    if let Some(d) = d {
        if vector.len() != d {
            return Err(Error::parse("problem", ln, format!("expected {d} entries, found {}", vector.len())));
        }
    }
    let arity = |k: usize| {
        if params.len() == k {
            Ok(())
        } else {
            Err(Error::parse("problem", ln, format!("`{kind}` takes {k} numbers before `|`")))
        }
    };
    let c = match kind {
        "squared_residual" => {
            arity(3)?;
            Component::squared_residual(vector, params[1], params[0])
        }
        "logistic" => {
            arity(2)?;
            Component::logistic(vector, params[0])
        }
        "quadratic" => {
            arity(2)?;
            Component::quadratic(vector, params[0])
        }
        _ => return Err(Error::parse("problem", ln, format!("unknown component kind `{kind}`"))),
    };
    Ok(c.with_lower_bound(*params.last().unwrap()))
}

fn parse_metadata(entries: &[(usize, String, String)], dim: usize) -> Result<ProblemMetadata> {
    let mut m = ProblemMetadata {
        x_star: Vec::new(),
        f_star: f64::NAN,
        l_max: f64::NAN,
        l_f: None,
        mu: None,
        sigma2: None,
        interpolated: false,
        approximate: None,
    };
    let mut seen = Vec::new();
    for (ln, k, v) in entries {
        let num = || parse_f64(v).ok_or_else(|| Error::parse("problem", *ln, format!("malformed number `{v}`")));
        match k.as_str() {
            "f_star" => m.f_star = num()?,
            "l_max" => m.l_max = num()?,
            "l_f" => m.l_f = Some(num()?),
            "mu" => m.mu = Some(num()?),
            "sigma2" => m.sigma2 = Some(num()?),
            "approximate" => m.approximate = Some(num()?),
            "interpolated" => {
                m.interpolated =
                    v.parse().map_err(|_| Error::parse("problem", *ln, format!("expected true or false, got `{v}`")))?
            }
            "x_star" => {
                m.x_star = floats(v, *ln)?;
                if m.x_star.len() != dim {
                    return Err(Error::parse(
                        "problem",
                        *ln,
                        format!("x_star has {} entries, d = {dim}", m.x_star.len()),
                    ));
                }
            }
            _ => return Err(Error::parse("problem", *ln, format!("unknown metadata key `{k}`"))),
        }
        seen.push(k.as_str());
    }
    for required in ["f_star", "l_max", "x_star"] {
        if !seen.contains(&required) {
            return Err(Error::parse("problem", entries[0].0, format!("metadata lacks `{required}`")));
        }
    }
    Ok(m)
}
