use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportMeta {
    /// Hex SHA-256 of the canonical JSON form of the effective config.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub kind: String,
    pub trace_events: usize,
}

/// Results of one policy at one DRAM rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRow {
    pub policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mtps: Option<u32>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub histogram: BTreeMap<String, u64>,
}

impl ReportRow {
    pub fn new(policy: &str, mtps: Option<u32>) -> Self {
        ReportRow {
            policy: policy.to_string(),
            mtps,
            metrics: BTreeMap::new(),
            histogram: BTreeMap::new(),
        }
    }

    pub fn label(&self) -> String {
        match self.mtps {
            Some(m) => format!("{}@{m}", self.policy),
            None => self.policy.clone(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub meta: ReportMeta,
    pub rows: Vec<ReportRow>,
}

impl MetricsReport {
    pub fn row(&self, policy: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.policy == policy)
    }

    /// Metric names over all rows, sorted.
    pub fn metric_names(&self) -> Vec<String> {
        let names: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.metrics.keys()).collect();
        names.into_iter().cloned().collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Table,
    Structured,
    Plotdata,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Table => "txt",
            Format::Structured => "json",
            Format::Plotdata => "csv",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Format::Table),
            "structured" => Ok(Format::Structured),
            "plotdata" => Ok(Format::Plotdata),
            _ => Err(config_err(format!("unknown format `{s}`"))),
        }
    }
}

/// Shortest round-tripping decimal form, so equal values print equally.
fn num(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(String::len)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                if i == 0 {
                    format!("{cell:<w$}", w = widths[i])
                } else {
                    format!("{cell:>w$}", w = widths[i])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn table(report: &MetricsReport) -> String {
    let names = report.metric_names();
    let hist: BTreeSet<&String> = report
        .rows
        .iter()
        .flat_map(|r| r.histogram.keys())
        .collect();
    let mut rows = vec![];
    let mut header = vec!["policy".to_string()];
    header.extend(names.iter().cloned());
    rows.push(header);
    for r in &report.rows {
        let mut line = vec![r.label()];
        for n in &names {
            line.push(r.metric(n).map_or("-".into(), |v| {
                if v == v.trunc() && v.abs() < 1e15 {
                    num(v)
                } else {
                    format!("{v:.4}")
                }
            }));
        }
        rows.push(line);
    }
    let m = &report.meta;
    let mut out = format!(
        "# {} experiment, seed {}, {} events, config {}\n",
        m.kind,
        m.seed,
        m.trace_events,
        &m.config_hash[..m.config_hash.len().min(16)]
    );
    out.push_str(&aligned(&rows));
    if !hist.is_empty() {
        out.push('\n');
        let mut rows = vec![];
        let mut header = vec!["histogram".to_string()];
        header.extend(hist.iter().map(|h| h.to_string()));
        rows.push(header);
        for r in report.rows.iter().filter(|r| !r.histogram.is_empty()) {
            let mut line = vec![r.label()];
            for h in &hist {
                line.push(r.histogram.get(*h).map_or("-".into(), |c| c.to_string()));
            }
            rows.push(line);
        }
        out.push_str(&aligned(&rows));
    }
    out
}

/// One series per metric: a `metric` column, then one column per row label
/// in report order.
fn plotdata(report: &MetricsReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    let mut header = vec!["metric".to_string()];
    header.extend(report.rows.iter().map(ReportRow::label));
    w.write_record(&header).map_err(csv_err)?;
    for name in report.metric_names() {
        let mut rec = vec![name.clone()];
        rec.extend(
            report
                .rows
                .iter()
                .map(|r| r.metric(&name).map_or(String::new(), num)),
        );
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| config_err(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Render `report` in `format`.
pub fn render(report: &MetricsReport, format: Format) -> Result<String> {
    match format {
        Format::Table => Ok(table(report)),
        Format::Structured => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        Format::Plotdata => plotdata(report),
    }
}

/// Write `report.<ext>` into `dir`, creating it if needed.
pub fn emit(report: &MetricsReport, format: Format, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("report.{}", format.extension()));
    std::fs::write(&path, render(report, format)?)?;
    Ok(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Ratio(f64),
    /// The metric is absent from the row or from its baseline.
    Missing,
    /// Nonzero value over a zero baseline.
    DivZero,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Ratio(r) => write!(f, "{r:.4}"),
            Cell::Missing => f.write_str("missing"),
            Cell::DivZero => f.write_str("div0"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub report: usize,
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub baseline: String,
    pub metrics: Vec<String>,
    pub rows: Vec<CompareRow>,
}

impl fmt::Display for CompareTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut rows = vec![];
        let mut header = vec!["report".to_string(), "policy".to_string()];
        header.extend(self.metrics.iter().cloned());
        rows.push(header);
        for r in &self.rows {
            let mut line = vec![r.report.to_string(), r.label.clone()];
            line.extend(r.cells.iter().map(Cell::to_string));
            rows.push(line);
        }
        let mut out = String::new();
        let _ = writeln!(out, "# ratios against {}", self.baseline);
        out.push_str(&aligned(&rows));
        f.write_str(&out)
    }
}

fn ratio(value: Option<f64>, base: Option<f64>) -> Cell {
    match (value, base) {
        (Some(v), Some(b)) if b == 0.0 => {
            if v == 0.0 {
                Cell::Ratio(1.0)
            } else {
                Cell::DivZero
            }
        }
        (Some(v), Some(b)) => Cell::Ratio(v / b),
        _ => Cell::Missing,
    }
}

/// Ratio of every metric of every row to the `baseline` policy's row at the
/// same DRAM rate, taken from the same report when it has one and otherwise
/// from the first report that does.
pub fn compare(reports: &[MetricsReport], baseline: &str) -> Result<CompareTable> {
    fn find<'r>(r: &'r MetricsReport, baseline: &str, mtps: Option<u32>) -> Option<&'r ReportRow> {
        r.rows
            .iter()
            .find(|row| row.policy == baseline && row.mtps == mtps)
            .or_else(|| r.rows.iter().find(|row| row.policy == baseline))
    }
    if !reports.iter().any(|r| r.row(baseline).is_some()) {
        return Err(Error::MissingBaseline(baseline.to_string()));
    }
    let metrics: Vec<String> = reports
        .iter()
        .flat_map(|r| r.metric_names())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rows = vec![];
    for (i, report) in reports.iter().enumerate() {
        for row in &report.rows {
            let base = find(report, baseline, row.mtps)
                .or_else(|| reports.iter().find_map(|r| find(r, baseline, row.mtps)))
                .expect("baseline present in some report");
            let cells = metrics
                .iter()
                .map(|m| ratio(row.metric(m), base.metric(m)))
                .collect();
            rows.push(CompareRow {
                report: i,
                label: row.label(),
                cells,
            });
        }
    }
    Ok(CompareTable {
        baseline: baseline.to_string(),
        metrics,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(rows: Vec<ReportRow>) -> MetricsReport {
        MetricsReport {
            meta: ReportMeta {
                config_hash: "ab".repeat(32),
                seed: 1,
                version: "0".into(),
                kind: "hss".into(),
                trace_events: 10,
            },
            rows,
        }
    }

    fn row(policy: &str, metrics: &[(&str, f64)]) -> ReportRow {
        let mut r = ReportRow::new(policy, None);
        for (k, v) in metrics {
            r.metrics.insert(k.to_string(), *v);
        }
        r
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = report(vec![]);
        assert_eq!(render(&r, Format::Plotdata).unwrap(), "metric\n");
        let t = render(&r, Format::Table).unwrap();
        assert_eq!(t.lines().count(), 2);
        assert_eq!(t.lines().nth(1), Some("policy"));
    }

    #[test]
    fn plotdata_columns_follow_row_order() {
        let r = report(vec![
            row("slow_only", &[("a", 2.0)]),
            row("fast_only", &[("a", 1.0)]),
        ]);
        let text = render(&r, Format::Plotdata).unwrap();
        assert_eq!(text.lines().next(), Some("metric,slow_only,fast_only"));
        assert_eq!(text.lines().nth(1), Some("a,2,1"));
    }

    #[test]
    fn structured_round_trips() {
        let mut r = report(vec![row("sibyl", &[("x", 0.125), ("y", 3.0)])]);
        r.rows[0].histogram.insert("fast".into(), 4);
        let text = render(&r, Format::Structured).unwrap();
        let generic: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(generic["rows"][0]["metrics"]["x"], 0.125);
        assert_eq!(MetricsReport::from_json(&text).unwrap(), r);
    }

    #[test]
    fn self_comparison_is_all_ones() {
        let r = report(vec![
            row("a", &[("m", 2.0), ("z", 0.0)]),
            row("b", &[("m", 2.0), ("z", 0.0)]),
        ]);
        let t = compare(&[r.clone(), r], "a").unwrap();
        for row in &t.rows {
            assert!(row.cells.iter().all(|c| *c == Cell::Ratio(1.0)));
        }
    }

    #[test]
    fn missing_metric_is_flagged() {
        let r = report(vec![
            row("a", &[("m", 2.0), ("n", 1.0)]),
            row("b", &[("m", 4.0)]),
        ]);
        let t = compare(&[r], "a").unwrap();
        assert_eq!(t.metrics, ["m", "n"]);
        assert_eq!(t.rows[1].cells, [Cell::Ratio(2.0), Cell::Missing]);
    }

    #[test]
    fn zero_baseline_is_flagged() {
        let r = report(vec![row("a", &[("m", 0.0)]), row("b", &[("m", 1.0)])]);
        let t = compare(&[r], "a").unwrap();
        assert_eq!(t.rows[1].cells, [Cell::DivZero]);
    }

    #[test]
    fn absent_baseline_is_an_error() {
        let r = report(vec![row("a", &[("m", 1.0)])]);
        assert!(matches!(
            compare(&[r], "oracle"),
            Err(Error::MissingBaseline(_))
        ));
    }

    #[test]
    fn baseline_from_another_report() {
        let base = report(vec![row("a", &[("m", 2.0)])]);
        let other = report(vec![row("b", &[("m", 3.0)])]);
        let t = compare(&[base, other], "a").unwrap();
        assert_eq!(t.rows[1].cells, [Cell::Ratio(1.5)]);
    }
}
