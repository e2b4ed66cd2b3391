//! Flat text outputs: key-value records for one solve and CSV tables for
//! sweeps and simulations.
//!
//! Every table may carry `# ` comment lines before the header and after the
//! last row. Floats are written in shortest round-trip form so a table read
//! back reproduces the numbers exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::replica::{ReplicaProblem, ReplicaSolution, Sweep};

/// A CSV table with comment lines around it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub preamble: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub trailer: Vec<String>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Dimension {
                expected: self.header.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column parsed as `f64`; empty or unparsable cells become NaN.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::Format(format!("no column `{name}`")))?;
        Ok(self
            .rows
            .iter()
            .map(|r| r[i].parse().unwrap_or(f64::NAN))
            .collect())
    }

    pub fn column_str(&self, name: &str) -> Result<Vec<&str>> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::Format(format!("no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// Value of a `# key=value` comment, searched in preamble then trailer.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.preamble
            .iter()
            .chain(&self.trailer)
            .find_map(|c| c.strip_prefix(key)?.strip_prefix('='))
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for c in &self.preamble {
            let _ = writeln!(out, "# {c}");
        }
        // Quoting a leading `#` keeps data rows apart from comment lines.
        let mut body = csv::WriterBuilder::new()
            .comment(Some(b'#'))
            .from_writer(Vec::new());
        let records = std::iter::once(&self.header).chain(&self.rows);
        for r in records {
            body.write_record(r).expect("writing to memory");
        }
        let body = body.into_inner().expect("flushing to memory");
        out.push_str(std::str::from_utf8(&body).expect("fields are UTF-8"));
        for c in &self.trailer {
            let _ = writeln!(out, "# {c}");
        }
        out
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut table = Table::default();
        let mut body = String::new();
        for line in r.lines() {
            let line = line?;
            if let Some(c) = line.strip_prefix('#') {
                let c = c.strip_prefix(' ').unwrap_or(c).to_string();
                if body.is_empty() {
                    table.preamble.push(c);
                } else {
                    table.trailer.push(c);
                }
            } else if !line.is_empty() {
                if !table.trailer.is_empty() {
                    return Err(Error::Format("row after trailing comments".into()));
                }
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(body.as_bytes());
        let mut records = reader.records();
        let header = records
            .next()
            .ok_or_else(|| Error::Format("table has no header".into()))?
            .map_err(|e| Error::Format(e.to_string()))?;
        table.header = header.iter().map(str::to_string).collect();
        for rec in records {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            table.push_row(rec.iter().map(str::to_string).collect())?;
        }
        Ok(table)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read_csv(text.as_bytes())
    }
}

/// Shortest round-trip text of a float.
pub fn fmt_num<T: Real>(x: T) -> String {
    let x = x.to_f64_lossy();
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Header of the solution schema for `k` blocks.
pub fn solution_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["c", "sigma2", "spectrum_id", "prior_id"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=k).map(|i| format!("r2_{i}")));
    h.extend((1..=k).map(|i| format!("r1_{i}")));
    h.extend(
        [
            "i_rs",
            "mmse_total",
            "ymmse",
            "branch",
            "converged",
            "iterations",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

/// One row of the solution schema.
pub fn solution_row<T: Real>(
    problem: &ReplicaProblem<T>,
    solution: &ReplicaSolution<T>,
    ymmse: T,
    branch: &str,
) -> Vec<String> {
    let mut row = vec![
        fmt_num(problem.c),
        fmt_num(problem.sigma2),
        problem.spectrum.to_string(),
        problem.prior.id(),
    ];
    row.extend(solution.r2.iter().map(|&v| fmt_num(v)));
    row.extend(solution.r1.iter().map(|&v| fmt_num(v)));
    row.extend([
        fmt_num(solution.i_rs),
        fmt_num(solution.mmse_total()),
        fmt_num(ymmse),
        branch.to_string(),
        solution.converged.to_string(),
        solution.iterations.to_string(),
    ]);
    row
}

/// One solve as `key = value` lines, solution fields first.
pub fn solution_record<T: Real>(
    problem: &ReplicaProblem<T>,
    solution: &ReplicaSolution<T>,
    ymmse: T,
    branch: &str,
) -> String {
    let header = solution_header(solution.r2.len());
    let row = solution_row(problem, solution, ymmse, branch);
    let mut out = String::new();
    for (k, v) in header.iter().zip(&row) {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Sweep as a table: the swept `value` (axis named in the `axis=` comment),
/// the solution schema and a `status` column holding the error text of
/// failed points.
pub fn sweep_table<T: Real>(sweep: &Sweep<T>, k: usize) -> Table {
    let mut header = vec!["value".to_string()];
    header.extend(solution_header(k));
    header.push("status".into());
    let mut table = Table::new(header);
    table.preamble.push(format!("axis={}", sweep.axis.name()));
    for pt in &sweep.points {
        let mut row = vec![fmt_num(pt.value)];
        match (&pt.outcome, &pt.prediction) {
            (Ok(o), Some(pred)) if o.global.r2.len() == k => {
                row.extend(solution_row(
                    &pt.problem,
                    &o.global,
                    pred.ymmse,
                    &o.branch().to_string(),
                ));
                row.push("ok".into());
            }
            (outcome, _) => {
                let msg = match outcome {
                    Ok(_) => "prediction unavailable".to_string(),
                    Err(e) => e.clone(),
                };
                row.extend([
                    fmt_num(pt.problem.c),
                    fmt_num(pt.problem.sigma2),
                    pt.problem.spectrum.to_string(),
                    pt.problem.prior.id(),
                ]);
                row.extend(std::iter::repeat_n(String::new(), 2 * k + 3));
                row.extend(["failed".into(), "false".into(), String::new()]);
                row.push(msg);
            }
        }
        table.rows.push(row);
    }
    for t in &sweep.transitions {
        table.trailer.push(format!("transition={}", fmt_num(*t)));
    }
    table
}
