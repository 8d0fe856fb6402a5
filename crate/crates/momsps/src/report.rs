//! Bound reports as `key = value` text, one pair per line. Named inputs are
//! written as `input.<name>`.

use std::fmt::Write as _;

use momsps_core::bounds::{BoundReport, TheoremId};

use crate::error::{Error, Result};
use crate::num::{fmt_f64, parse_f64};

pub fn write_report(r: &BoundReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "theorem = {}", r.theorem.name());
    let _ = writeln!(s, "lhs = {}", fmt_f64(r.lhs));
    let _ = writeln!(s, "lhs_stderr = {}", fmt_f64(r.lhs_stderr));
    let _ = writeln!(s, "rhs = {}", fmt_f64(r.rhs));
    let _ = writeln!(s, "slack = {}", fmt_f64(r.slack));
    let _ = writeln!(s, "satisfied = {}", r.satisfied);
    let _ = writeln!(s, "diverged = {}", r.diverged);
    let _ = writeln!(s, "seeds = {}", r.seeds);
    let _ = writeln!(s, "iterations = {}", r.iterations);
    for (k, v) in &r.inputs {
        let _ = writeln!(s, "input.{k} = {}", fmt_f64(*v));
    }
    s
}

pub fn parse_report(text: &str) -> Result<BoundReport> {
    let mut r = BoundReport {
        theorem: TheoremId::Thm31,
        lhs: f64::NAN,
        lhs_stderr: f64::NAN,
        rhs: f64::NAN,
        slack: f64::NAN,
        satisfied: false,
        diverged: false,
        seeds: 0,
        iterations: 0,
        inputs: Vec::new(),
    };
    let mut have_theorem = false;
    for (k, line) in text.lines().enumerate() {
        let ln = k + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| Error::parse("report", ln, m);
        let (key, val) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
        let (key, val) = (key.trim(), val.trim());
        let num = || parse_f64(val).ok_or_else(|| err(format!("malformed number `{val}`")));
        let flag = || val.parse::<bool>().map_err(|_| err(format!("malformed flag `{val}`")));
        let int = || val.parse::<u64>().map_err(|_| err(format!("malformed integer `{val}`")));
        match key {
            "theorem" => {
                r.theorem = val.parse().map_err(|_| err(format!("unknown theorem `{val}`")))?;
                have_theorem = true;
            }
            "lhs" => r.lhs = num()?,
            "lhs_stderr" => r.lhs_stderr = num()?,
            "rhs" => r.rhs = num()?,
            "slack" => r.slack = num()?,
            "satisfied" => r.satisfied = flag()?,
            "diverged" => r.diverged = flag()?,
            "seeds" => r.seeds = int()? as usize,
            "iterations" => r.iterations = int()?,
            _ => match key.strip_prefix("input.") {
                Some(name) => r.inputs.push((name.to_string(), num()?)),
                None => return Err(err(format!("unknown key `{key}`"))),
            },
        }
    }
    if !have_theorem {
        return Err(Error::parse("report", 1, "missing `theorem`"));
    }
    Ok(r)
}
