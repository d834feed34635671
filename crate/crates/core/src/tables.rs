//! Recomputes the published summary tables from raw project records and
//! diffs every cell against the printed figure.
//!
//! Cells are rounded half-up to the precision of the printed value before
//! comparison. Disagreements are listed as errata with both values; nothing
//! is silently corrected.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dataset::{Phase, ProjectDataset, Severity, SizeCategory};
use crate::error::{Error, Result};
use crate::metrics::{pattern_summary, project_metrics, PhaseMetrics, ProjectMetrics};
use crate::report::{Cell, Report, Row, Section};
use crate::rounding::{decimals_of, format_fixed};

const PUBLISHED_JSON: &str = include_str!("../data/published_tables.json");

/// Ids of the tables that can be reproduced.
pub const TABLE_IDS: [u8; 6] = [2, 3, 4, 5, 6, 7];

#[derive(Debug, Clone, Deserialize)]
pub struct PublishedTable {
    pub id: u8,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<PublishedRow>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PublishedRow {
    pub label: String,
    pub cells: Vec<String>,
}

impl PublishedTable {
    pub fn cell(&self, row: &str, column: &str) -> Option<&str> {
        let c = self.columns.iter().position(|x| x == column)?;
        let r = self.rows.iter().find(|r| r.label == row)?;
        r.cells.get(c).map(String::as_str)
    }
}

#[derive(Deserialize)]
struct PublishedFile {
    tables: Vec<PublishedTable>,
}

pub fn published_tables() -> &'static [PublishedTable] {
    static TABLES: OnceLock<Vec<PublishedTable>> = OnceLock::new();
    TABLES.get_or_init(|| {
        serde_json::from_str::<PublishedFile>(PUBLISHED_JSON)
            .expect("embedded published tables parse")
            .tables
    })
}

pub fn published_table(id: u8) -> Option<&'static PublishedTable> {
    published_tables().iter().find(|t| t.id == id)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproducedCell {
    pub column: String,
    pub published: Option<String>,
    pub computed: String,
    #[serde(rename = "match")]
    pub matched: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproducedRow {
    pub label: String,
    pub cells: Vec<ReproducedCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Erratum {
    pub table: u8,
    pub row: String,
    pub column: String,
    pub published: String,
    pub computed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReproduction {
    pub table: u8,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReproducedRow>,
    pub compared: usize,
    pub matched: usize,
    pub errata: Vec<Erratum>,
}

impl TableReproduction {
    pub fn row(&self, label: &str) -> Option<&ReproducedRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<&ReproducedCell> {
        self.row(row)?.cells.iter().find(|c| c.column == column)
    }

    pub fn to_report(&self) -> Report {
        let mut section = Section::new(
            self.title.clone(),
            std::iter::once("row".to_string()).chain(self.columns.iter().cloned()),
        );
        for row in &self.rows {
            section.push(Row::new(
                row.label.clone(),
                row.cells
                    .iter()
                    .map(|c| Cell::Compared {
                        published: c.published.clone(),
                        computed: c.computed.clone(),
                        matched: c.matched,
                    })
                    .collect(),
            ));
        }
        let mut report = Report::new(format!("Table {} reproduction", self.table))
            .section(section)
            .note(format!("{}/{} cells match", self.matched, self.compared));
        if !self.errata.is_empty() {
            let mut errata = Section::new("Errata", ["row", "column", "published", "computed"]);
            for e in &self.errata {
                errata.push(Row::new(
                    e.row.clone(),
                    vec![
                        Cell::text(e.column.clone()),
                        Cell::text(e.published.clone()),
                        Cell::text(e.computed.clone()),
                    ],
                ));
            }
            report.sections.push(errata);
        }
        report
    }
}

/// Recomputes table `table_id` from `ds`. Cells for projects or rows absent
/// from the published table are emitted without a comparison.
pub fn reproduce_table(ds: &ProjectDataset, table_id: u8) -> Result<TableReproduction> {
    let published = published_table(table_id).ok_or_else(|| {
        Error::Argument(format!(
            "unknown table {table_id} (expected one of 2, 3, 4, 5, 6, 7)"
        ))
    })?;
    let mut builder = Builder {
        published,
        rows: Vec::new(),
    };
    match table_id {
        2 => phase_breakdown(&mut builder, ds, Phase::Requirements)?,
        3 => phase_breakdown(&mut builder, ds, Phase::Design)?,
        4 => phase_breakdown(&mut builder, ds, Phase::Implementation)?,
        5 => severity_spans(&mut builder, ds)?,
        6 => depth_table(&mut builder, ds)?,
        7 => performance_table(&mut builder, ds)?,
        _ => unreachable!("published table ids are checked above"),
    }
    Ok(builder.finish(ds))
}

struct Builder {
    published: &'static PublishedTable,
    rows: Vec<ReproducedRow>,
}

impl Builder {
    fn numeric_row<'a>(
        &mut self,
        label: &str,
        values: impl IntoIterator<Item = (&'a str, f64)>,
        default_decimals: u32,
    ) {
        let cells = values
            .into_iter()
            .map(|(column, value)| {
                let published = self.published.cell(label, column);
                let decimals = published.map_or(default_decimals, decimals_of);
                let computed = format_fixed(value, decimals);
                ReproducedCell {
                    column: column.to_string(),
                    matched: published.map(|p| p.trim() == computed),
                    published: published.map(str::to_string),
                    computed,
                }
            })
            .collect();
        self.rows.push(ReproducedRow {
            label: label.to_string(),
            cells,
        });
    }

    fn finish(self, ds: &ProjectDataset) -> TableReproduction {
        let mut errata = Vec::new();
        let mut compared = 0;
        let mut matched = 0;
        for row in &self.rows {
            for cell in &row.cells {
                match cell.matched {
                    Some(true) => {
                        compared += 1;
                        matched += 1;
                    }
                    Some(false) => {
                        compared += 1;
                        errata.push(Erratum {
                            table: self.published.id,
                            row: row.label.clone(),
                            column: cell.column.clone(),
                            published: cell.published.clone().unwrap_or_default(),
                            computed: cell.computed.clone(),
                        });
                    }
                    None => {}
                }
            }
        }
        let columns = if self.published.id == 5 {
            SizeCategory::ALL.iter().map(|s| s.code().to_string()).collect()
        } else {
            ds.iter().map(|p| p.id.clone()).collect()
        };
        TableReproduction {
            table: self.published.id,
            title: self.published.title.clone(),
            columns,
            rows: self.rows,
            compared,
            matched,
            errata,
        }
    }
}

fn all_metrics(ds: &ProjectDataset) -> Result<Vec<ProjectMetrics>> {
    ds.iter().map(project_metrics).collect()
}

type MetricRow = (&'static str, fn(&PhaseMetrics) -> f64);

fn phase_breakdown(b: &mut Builder, ds: &ProjectDataset, phase: Phase) -> Result<()> {
    let metrics = all_metrics(ds)?;
    let rows: [MetricRow; 5] = [
        ("inspection_time", |m| m.inspection_pct),
        ("testing_time", |m| m.testing_pct),
        ("prep_time", |m| m.prep_pct),
        ("ni", |m| m.ni_pct),
        ("nt", |m| m.nt_pct),
    ];
    for (label, value) in rows {
        b.numeric_row(
            label,
            metrics.iter().map(|m| (m.id.as_str(), value(m.phase(phase)))),
            2,
        );
    }
    for severity in Severity::ALL {
        b.numeric_row(
            severity.code(),
            metrics
                .iter()
                .map(|m| (m.id.as_str(), m.phase(phase).severity_pct.get(severity))),
            2,
        );
    }
    Ok(())
}

fn depth_table(b: &mut Builder, ds: &ProjectDataset) -> Result<()> {
    let metrics = all_metrics(ds)?;
    b.numeric_row(
        "total_hours",
        metrics.iter().map(|m| (m.id.as_str(), m.total_hours)),
        0,
    );
    for phase in Phase::ALL {
        b.numeric_row(
            &format!("di.{}", phase.code()),
            metrics.iter().map(|m| (m.id.as_str(), m.phase(phase).di)),
            2,
        );
    }
    totals_rows(b, &metrics);
    Ok(())
}

fn performance_table(b: &mut Builder, ds: &ProjectDataset) -> Result<()> {
    let metrics = all_metrics(ds)?;
    for phase in Phase::ALL {
        b.numeric_row(
            &format!("{}.di", phase.code()),
            metrics.iter().map(|m| (m.id.as_str(), m.phase(phase).di)),
            2,
        );
        b.numeric_row(
            &format!("{}.ipm", phase.code()),
            metrics.iter().map(|m| (m.id.as_str(), m.phase(phase).ipm)),
            2,
        );
        b.numeric_row(
            &format!("{}.experience", phase.code()),
            ds.iter()
                .map(|p| (p.id.as_str(), p.phase(phase).experience_years)),
            0,
        );
    }
    totals_rows(b, &metrics);
    Ok(())
}

fn totals_rows(b: &mut Builder, metrics: &[ProjectMetrics]) {
    b.numeric_row("td", metrics.iter().map(|m| (m.id.as_str(), f64::from(m.td))), 0);
    b.numeric_row("tc", metrics.iter().map(|m| (m.id.as_str(), m.tc as f64)), 0);
    b.numeric_row("tc_pct", metrics.iter().map(|m| (m.id.as_str(), m.tc_pct)), 2);
}

/// The severity span table prints ranges such as "10% to 20%". A
/// recomputed span matches when it lies inside the printed one.
fn severity_spans(b: &mut Builder, ds: &ProjectDataset) -> Result<()> {
    let pattern = pattern_summary(ds)?;
    for phase in Phase::ALL {
        for severity in Severity::ALL {
            let label = format!("{}.{}", phase.code(), severity.code());
            let cells = SizeCategory::ALL
                .iter()
                .map(|&size| {
                    let published = b.published.cell(&label, size.code());
                    let span = pattern.get(phase, size, severity);
                    let computed = span.map_or(String::new(), |s| {
                        format!(
                            "{}% to {}%",
                            format_fixed(s.min_pct, 2),
                            format_fixed(s.max_pct, 2)
                        )
                    });
                    let matched = match (published.and_then(parse_span), span) {
                        (Some((lo, hi)), Some(s)) => Some(
                            lo <= crate::rounding::round_half_up(s.min_pct, 2)
                                && crate::rounding::round_half_up(s.max_pct, 2) <= hi,
                        ),
                        _ => None,
                    };
                    ReproducedCell {
                        column: size.code().to_string(),
                        published: published.map(str::to_string),
                        computed,
                        matched,
                    }
                })
                .collect();
            b.rows.push(ReproducedRow { label, cells });
        }
    }
    Ok(())
}

fn parse_span(s: &str) -> Option<(f64, f64)> {
    let (lo, hi) = s.split_once(" to ")?;
    let num = |x: &str| x.trim().trim_end_matches('%').trim().parse::<f64>().ok();
    Some((num(lo)?, num(hi)?))
}
