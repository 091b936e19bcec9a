//! Report rows and their Markdown, CSV and JSON renderings.

use std::fmt::Write as _;

use serde::Serialize;

use crate::float::Precision;
use crate::pipeline::{BoundReport, Method};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Md,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "md" => Ok(Format::Md),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}`")),
        }
    }
}

/// One `(program, method, k)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    /// Benchmark id or input file name.
    pub program: String,
    pub method: Method,
    pub k: u32,
    pub precision: Precision,
    /// Single precision is emulated by rounding each double result.
    pub emulated: bool,
    pub n: usize,
    pub m: usize,
    pub flops: Option<u128>,
    /// `None` when the cell failed; `error` then says why.
    pub bound: Option<BoundReport>,
    pub error: Option<String>,
    pub reference: Option<f64>,
    pub upper_fixture: Option<f64>,
}

impl Row {
    pub fn final_bound(&self) -> Option<f64> {
        self.bound.as_ref().map(|b| b.final_bound)
    }

    pub fn certified(&self) -> bool {
        self.bound.as_ref().is_some_and(|b| b.certified)
    }

    pub fn seconds(&self) -> Option<f64> {
        self.bound.as_ref().map(|b| b.timings.total)
    }

    fn status(&self) -> &str {
        match (&self.bound, &self.error) {
            (_, Some(e)) => e,
            (Some(b), None) if b.certified => "ok",
            (Some(_), None) => "uncertified",
            (None, None) => "skipped",
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: u32,
    rows: &'a [Row],
}

fn sci(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into())
}

/// Sorts by program, method and order so output does not depend on scheduling.
pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| {
        a.program
            .cmp(&b.program)
            .then(a.method.cmp(&b.method))
            .then(a.k.cmp(&b.k))
    });
}

pub fn render(rows: &[Row], format: Format) -> String {
    match format {
        Format::Md => render_md(rows),
        Format::Csv => render_csv(rows),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&JsonReport {
                schema: SCHEMA_VERSION,
                rows,
            })
            .expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn render_md(rows: &[Row]) -> String {
    let mut out = String::new();
    out.push_str("| program | method | k | prec | n | m | final | l_k | h_bar | reference | upper | flops | seconds | status |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let b = r.bound.as_ref();
        let prec = if r.emulated {
            format!("{} (emulated)", r.precision)
        } else {
            r.precision.to_string()
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.program,
            r.method,
            r.k,
            prec,
            r.n,
            r.m,
            sci(r.final_bound()),
            sci(b.map(|b| b.l_k)),
            sci(b.map(|b| b.h_bar)),
            sci(r.reference),
            sci(r.upper_fixture),
            r.flops
                .map(|f| format!("{:.2e}", f as f64))
                .unwrap_or_else(|| "-".into()),
            r.seconds()
                .map(|s| format!("{s:.2}"))
                .unwrap_or_else(|| "-".into()),
            r.status().replace('|', "/"),
        );
    }
    out
}

fn render_csv(rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "program",
        "method",
        "k",
        "precision",
        "emulated",
        "n",
        "m",
        "final",
        "l_upper",
        "l_lower",
        "l_k",
        "h_bar",
        "certified",
        "reference",
        "upper_fixture",
        "flops",
        "seconds",
        "status",
    ])
    .expect("in-memory write");
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for r in rows {
        let b = r.bound.as_ref();
        w.write_record([
            r.program.clone(),
            r.method.to_string(),
            r.k.to_string(),
            r.precision.to_string(),
            r.emulated.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            opt(r.final_bound()),
            opt(b.map(|b| b.l_upper)),
            opt(b.map(|b| b.l_lower)),
            opt(b.map(|b| b.l_k)),
            opt(b.map(|b| b.h_bar)),
            r.certified().to_string(),
            opt(r.reference),
            opt(r.upper_fixture),
            r.flops.map(|f| f.to_string()).unwrap_or_default(),
            r.seconds().map(|s| format!("{s:.3}")).unwrap_or_default(),
            r.status().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(program: &str, method: Method, k: u32) -> Row {
        Row {
            program: program.into(),
            method,
            k,
            precision: Precision::Double,
            emulated: false,
            n: 1,
            m: 2,
            flops: Some(8),
            bound: None,
            error: Some("budget | exceeded".into()),
            reference: None,
            upper_fixture: Some(1e-15),
        }
    }

    #[test]
    fn sorting_is_deterministic() {
        let mut rows = vec![
            row("b", Method::Geneig, 1),
            row("a", Method::Robsdp, 2),
            row("a", Method::Robsdp, 1),
            row("a", Method::Geneig, 3),
        ];
        sort_rows(&mut rows);
        let keys: Vec<_> = rows
            .iter()
            .map(|r| (r.program.as_str(), r.method, r.k))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("a", Method::Geneig, 3),
                ("a", Method::Robsdp, 1),
                ("a", Method::Robsdp, 2),
                ("b", Method::Geneig, 1)
            ]
        );
    }

    #[test]
    fn formats_have_one_line_per_row() {
        let rows = vec![row("a", Method::Geneig, 1), row("a", Method::Mvbeta, 1)];
        assert_eq!(render(&rows, Format::Md).lines().count(), 4);
        assert_eq!(render(&rows, Format::Csv).lines().count(), 3);
        let v: serde_json::Value = serde_json::from_str(&render(&rows, Format::Json)).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["rows"].as_array().unwrap().len(), 2);
        assert_eq!(v["rows"][1]["method"], "mvbeta");
    }
}
