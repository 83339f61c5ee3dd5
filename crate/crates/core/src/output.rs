//! Report and CSV writers.
//!
//! Numbers are written in the shortest decimal form that reads back to the
//! same `f64`, so identical runs give byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::field::ScalarField;
use crate::game::McEstimate;
use crate::operators::ViscosityVerdict;
use crate::verification::{DoublingReport, SlopeReport};

/// Shortest round-trip decimal form of `v`.
pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}

fn csv_writer(path: &Path) -> io::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> io::Result<()> {
    w.flush()?;
    w.into_inner()
        .map_err(|e| io::Error::other(e.to_string()))?
        .flush()
}

/// Columns `x[,y],value[,mask]`; `mask` is written as 1 or 0.
pub fn write_field_csv(path: &Path, field: &ScalarField, mask: Option<&[bool]>) -> io::Result<()> {
    let grid = field.grid();
    let dim = grid.dim();
    let mut w = csv_writer(path)?;
    let mut header = vec!["x"];
    if dim == 2 {
        header.push("y");
    }
    header.push("value");
    if mask.is_some() {
        header.push("mask");
    }
    w.write_record(&header)?;
    for node in 0..grid.len() {
        let p = grid.coords(node);
        let mut row: Vec<String> = p[..dim].iter().map(|&c| format_number(c)).collect();
        row.push(format_number(field.get(node)));
        if let Some(m) = mask {
            row.push(if m[node] { "1" } else { "0" }.to_string());
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// Verdict nodes as `x[,y],value,mask` with the residual as value and
/// the pass flag as mask.
pub fn write_verdict_csv(path: &Path, dim: usize, verdict: &ViscosityVerdict) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["x"];
    if dim == 2 {
        header.push("y");
    }
    header.extend(["value", "mask"]);
    w.write_record(&header)?;
    for n in &verdict.nodes {
        let mut row: Vec<String> = n.point.iter().map(|&c| format_number(c)).collect();
        row.push(format_number(n.residual));
        row.push(if n.pass { "1" } else { "0" }.to_string());
        w.write_record(&row)?;
    }
    finish(w)
}

/// Columns `r,slope`.
pub fn write_slope_csv(path: &Path, report: &SlopeReport) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["r", "slope"])?;
    for (r, s) in report.radii.iter().zip(&report.slopes) {
        w.write_record([format_number(*r), format_number(*s)])?;
    }
    finish(w)
}

/// Columns `eps,gap,wmax`, one row per report.
pub fn write_doubling_csv(path: &Path, reports: &[DoublingReport]) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["eps", "gap", "wmax"])?;
    for r in reports {
        w.write_record([format_number(r.epsilon), format_number(r.gap), format_number(r.w_max)])?;
    }
    finish(w)
}

/// Columns `sample,payoff,steps,terminated`.
pub fn write_playouts_csv(path: &Path, est: &McEstimate) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["sample", "payoff", "steps", "terminated"])?;
    for (i, p) in est.playouts.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format_number(p.payoff),
            p.steps.to_string(),
            u8::from(p.terminated).to_string(),
        ])?;
    }
    finish(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NotConverged,
    Error,
}

/// The self-describing document written for every run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub status: Status,
    pub exit_code: i32,
    pub seed: u64,
    /// Effective configuration after overrides.
    pub config: serde_json::Value,
    /// Every tolerance and threshold the run used.
    pub tolerances: BTreeMap<String, f64>,
    pub result: serde_json::Value,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    pub artifacts: Vec<String>,
}

pub fn write_report(path: &Path, report: &Report) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::grid::Grid;

    #[test]
    fn field_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let g = Arc::new(Grid::new(&[0.0, 0.0], &[0.5, 0.5], 0.5).unwrap());
        let f = ScalarField::from_fn(g, |p| p[0] + 0.1 * p[1]);
        write_field_csv(&path, &f, Some(&[true, false, false, true])).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "x,y,value,mask\n0.0,0.0,0.0,1\n0.5,0.0,0.5,0\n0.0,0.5,0.05,0\n0.5,0.5,0.55,1\n");
    }

    #[test]
    fn one_dimensional_field_has_no_y_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let g = Arc::new(Grid::new(&[0.0], &[1.0], 0.5).unwrap());
        write_field_csv(&path, &ScalarField::from_fn(g, |p| 1e-20 * p[0]), None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "x,value\n0.0,0.0\n0.5,5e-21\n1.0,1e-20\n");
    }

    proptest! {
        #[test]
        fn numbers_round_trip(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
            let back: f64 = format_number(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
