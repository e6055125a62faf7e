//! Output writers: CSV tables, metrics JSON, manifests.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::analysis::MetricsReport;
use crate::dsr::Trajectory;

/// Formats `v` with 9 significant digits, in the spirit of C's `%.9g`.
pub fn format_sig(v: f64) -> String {
    const DIGITS: i32 = 9;
    if v == 0.0 {
        return "0".into();
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes a table with a header line and one line per row.
pub fn write_table_csv<P: AsRef<Path>>(
    path: P,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_sig(*v));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

/// `t,agent_0,...,agent_{N-1}`, one row per recorded step.
pub fn write_trajectory_csv<P: AsRef<Path>>(path: P, traj: &Trajectory<f64>) -> io::Result<()> {
    write_table_csv(
        path,
        &agent_header(traj.n_agents()),
        (0..traj.n_rows()).map(|r| {
            let mut row = Vec::with_capacity(traj.n_agents() + 1);
            row.push(traj.time(r));
            row.extend_from_slice(traj.row(r));
            row
        }),
    )
}

pub fn agent_header(n_agents: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((0..n_agents).map(|i| format!("agent_{i}")))
        .collect()
}

/// Reads back a file written by [`write_trajectory_csv`] into `(times, rows)`.
pub fn read_trajectory_csv<P: AsRef<Path>>(path: P) -> io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty file"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
                })
                .collect()
        })
        .collect::<io::Result<_>>()?;
    Ok((header, rows))
}

pub fn write_metrics_json<P: AsRef<Path>>(path: P, report: &MetricsReport) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}
