//! CSV encoding of run records.
//!
//! A set of records is stored as three tables that share `run_id,seed`:
//! `trajectory.csv` (logged iterates), `cesaro.csv` (averaged iterates at the
//! checkpoints) and `summary.csv` (per-run scalars and the final iterate).
//! Wallclock times go to an optional `timing.csv` because they are the only
//! output that differs between identical invocations.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use momsps_core::optimizers::{CesaroPoint, RunRecord, TrajectoryRow};

use crate::error::{Error, Result};
use crate::num::{fmt_f64, parse_f64};

pub const TRAJECTORY_HEADER: [&str; 7] = ["run_id", "seed", "t", "f", "subopt", "dist_sq", "gamma"];
pub const CESARO_HEADER: [&str; 5] = ["run_id", "seed", "t", "f", "subopt"];
pub const SUMMARY_HEADER: [&str; 9] =
    ["run_id", "seed", "f0", "f_star", "f_cesaro", "d2", "diverged", "diverged_at", "x_final"];
pub const TIMING_HEADER: [&str; 3] = ["run_id", "seed", "wallclock"];

fn sorted(records: &[RunRecord]) -> Vec<&RunRecord> {
    let mut v: Vec<&RunRecord> = records.iter().collect();
    v.sort_by_key(|r| r.run_id);
    v
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_trajectory<W: Write>(records: &[RunRecord], w: W) -> csv::Result<()> {
    let mut w = writer(w);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in sorted(records) {
        for row in &r.rows {
            w.write_record([
                r.run_id.to_string(),
                r.seed.to_string(),
                row.t.to_string(),
                fmt_f64(row.f),
                fmt_f64(row.subopt),
                fmt_f64(row.dist_sq),
                fmt_f64(row.gamma),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_cesaro<W: Write>(records: &[RunRecord], w: W) -> csv::Result<()> {
    let mut w = writer(w);
    w.write_record(CESARO_HEADER)?;
    for r in sorted(records) {
        for p in &r.cesaro {
            w.write_record([
                r.run_id.to_string(),
                r.seed.to_string(),
                p.t.to_string(),
                fmt_f64(p.f),
                fmt_f64(p.subopt),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(records: &[RunRecord], w: W) -> csv::Result<()> {
    let mut w = writer(w);
    w.write_record(SUMMARY_HEADER)?;
    for r in sorted(records) {
        let x: Vec<String> = r.x_final.iter().map(|v| fmt_f64(*v)).collect();
        w.write_record([
            r.run_id.to_string(),
            r.seed.to_string(),
            fmt_f64(r.f0),
            opt(r.f_star),
            fmt_f64(r.f_cesaro),
            fmt_f64(r.d2),
            r.diverged.to_string(),
            r.diverged_at.map(|t| t.to_string()).unwrap_or_default(),
            x.join(" "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing<W: Write>(records: &[RunRecord], w: W) -> csv::Result<()> {
    let mut w = writer(w);
    w.write_record(TIMING_HEADER)?;
    for r in sorted(records) {
        w.write_record([r.run_id.to_string(), r.seed.to_string(), opt(r.wallclock)])?;
    }
    w.flush()?;
    Ok(())
}

/// In-memory text of the three deterministic tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTables {
    pub trajectory: String,
    pub cesaro: String,
    pub summary: String,
}

fn to_string(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn to_tables(records: &[RunRecord]) -> CsvTables {
    CsvTables {
        trajectory: to_string(|b| write_trajectory(records, b)),
        cesaro: to_string(|b| write_cesaro(records, b)),
        summary: to_string(|b| write_summary(records, b)),
    }
}

struct Table {
    what: &'static str,
    rows: Vec<(usize, csv::StringRecord)>,
}

fn read_table<R: Read>(what: &'static str, header: &[&str], r: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let got = rdr.headers().map_err(|e| Error::parse(what, 1, e.to_string()))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::parse(what, 1, format!("expected header `{}`", header.join(","))));
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(what, line, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(Error::parse(what, line, format!("expected {} fields", header.len())));
        }
        rows.push((line, rec));
    }
    Ok(Table { what, rows })
}

impl Table {
    fn float(&self, line: usize, s: &str) -> Result<f64> {
        parse_f64(s).ok_or_else(|| Error::parse(self.what, line, format!("malformed number `{s}`")))
    }

    fn int(&self, line: usize, s: &str) -> Result<u64> {
        s.parse().map_err(|_| Error::parse(self.what, line, format!("malformed integer `{s}`")))
    }
}

fn find<'a>(records: &'a mut [RunRecord], what: &'static str, line: usize, run_id: u64) -> Result<&'a mut RunRecord> {
    records
        .iter_mut()
        .find(|r| r.run_id == run_id)
        .ok_or_else(|| Error::parse(what, line, format!("run_id {run_id} missing from summary")))
}

/// Rebuilds records from the three tables. `wallclock` is left `None`.
pub fn from_readers<A: Read, B: Read, C: Read>(trajectory: A, cesaro: B, summary: C) -> Result<Vec<RunRecord>> {
    let summary = read_table("summary.csv", &SUMMARY_HEADER, summary)?;
    let mut records = Vec::new();
    for (line, rec) in &summary.rows {
        let line = *line;
        let f_star = match &rec[3] {
            "" => None,
            s => Some(summary.float(line, s)?),
        };
        let diverged =
            rec[6].parse().map_err(|_| Error::parse("summary.csv", line, format!("malformed flag `{}`", &rec[6])))?;
        let diverged_at = match &rec[7] {
            "" => None,
            s => Some(summary.int(line, s)?),
        };
        let x_final = rec[8].split_ascii_whitespace().map(|s| summary.float(line, s)).collect::<Result<_>>()?;
        records.push(RunRecord {
            run_id: summary.int(line, &rec[0])?,
            seed: summary.int(line, &rec[1])?,
            rows: Vec::new(),
            cesaro: Vec::new(),
            f_cesaro: summary.float(line, &rec[4])?,
            f0: summary.float(line, &rec[2])?,
            f_star,
            d2: summary.float(line, &rec[5])?,
            diverged,
            diverged_at,
            wallclock: None,
            x_final,
        });
    }

    let traj = read_table("trajectory.csv", &TRAJECTORY_HEADER, trajectory)?;
    for (line, rec) in &traj.rows {
        let line = *line;
        let row = TrajectoryRow {
            t: traj.int(line, &rec[2])?,
            f: traj.float(line, &rec[3])?,
            subopt: traj.float(line, &rec[4])?,
            dist_sq: traj.float(line, &rec[5])?,
            gamma: traj.float(line, &rec[6])?,
        };
        let r = find(&mut records, traj.what, line, traj.int(line, &rec[0])?)?;
        if r.rows.last().is_some_and(|p| p.t >= row.t) {
            return Err(Error::parse(traj.what, line, "t is not strictly increasing within the run"));
        }
        r.rows.push(row);
    }

    let ces = read_table("cesaro.csv", &CESARO_HEADER, cesaro)?;
    for (line, rec) in &ces.rows {
        let line = *line;
        let p =
            CesaroPoint { t: ces.int(line, &rec[2])?, f: ces.float(line, &rec[3])?, subopt: ces.float(line, &rec[4])? };
        find(&mut records, ces.what, line, ces.int(line, &rec[0])?)?.cesaro.push(p);
    }
    Ok(records)
}

pub fn from_tables(tables: &CsvTables) -> Result<Vec<RunRecord>> {
    from_readers(tables.trajectory.as_bytes(), tables.cesaro.as_bytes(), tables.summary.as_bytes())
}

/// Output file names for a record set; `prefix` may be empty.
pub fn paths(dir: &Path, prefix: &str) -> [PathBuf; 4] {
    ["trajectory", "cesaro", "summary", "timing"].map(|n| dir.join(format!("{prefix}{n}.csv")))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the record tables into `dir`. Timing is opt-in.
pub fn emit(records: &[RunRecord], dir: &Path, prefix: &str, timing: bool) -> Result<()> {
    let [tp, cp, sp, wp] = paths(dir, prefix);
    let t = to_tables(records);
    write_file(&tp, &t.trajectory)?;
    write_file(&cp, &t.cesaro)?;
    write_file(&sp, &t.summary)?;
    if timing {
        write_file(&wp, &to_string(|b| write_timing(records, b)))?;
    }
    Ok(())
}

pub fn load(dir: &Path, prefix: &str) -> Result<Vec<RunRecord>> {
    let [tp, cp, sp, _] = paths(dir, prefix);
    let open = |p: &Path| fs::File::open(p).map_err(|e| Error::io(p, e));
    from_readers(open(&tp)?, open(&cp)?, open(&sp)?)
}
