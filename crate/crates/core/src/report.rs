//! Tabular reports rendered as aligned text, CSV, or structured JSON.
//!
//! Every report is a list of sections, each a small table with a label
//! column. Rendering is deterministic: the same report always renders to the
//! same bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rounding::{format_fixed, round_half_up};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Csv,
    Structured,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(OutputFormat::Text),
            "csv" => Ok(OutputFormat::Csv),
            "structured" | "json" => Ok(OutputFormat::Structured),
            other => Err(Error::Argument(format!(
                "unknown output format `{other}` (expected text, csv or structured)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Text(String),
    Number { value: f64, decimals: u32 },
    /// A recomputed value next to the figure it is checked against.
    Compared {
        published: Option<String>,
        computed: String,
        matched: Option<bool>,
    },
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn num(value: f64, decimals: u32) -> Self {
        Cell::Number { value, decimals }
    }

    pub fn int(value: impl Into<u64>) -> Self {
        Cell::Number {
            value: value.into() as f64,
            decimals: 0,
        }
    }

    pub fn opt(value: Option<f64>, decimals: u32) -> Self {
        value.map_or(Cell::Empty, |v| Cell::num(v, decimals))
    }

    fn display(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Text(s) => s.clone(),
            Cell::Number { value, decimals } => format_fixed(*value, *decimals),
            Cell::Compared {
                computed, matched, ..
            } => {
                if *matched == Some(false) {
                    format!("{computed}*")
                } else {
                    computed.clone()
                }
            }
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Empty => serializer.serialize_none(),
            Cell::Text(s) => serializer.serialize_str(s),
            Cell::Number { value, decimals } => {
                let v = round_half_up(*value, *decimals);
                if *decimals == 0 && v.abs() < 9.0e15 {
                    serializer.serialize_i64(v as i64)
                } else {
                    serializer.serialize_f64(v)
                }
            }
            Cell::Compared {
                published,
                computed,
                matched,
            } => {
                let mut map = serializer.serialize_map(Some(3))?;
                map.serialize_entry("published", published)?;
                map.serialize_entry("computed", computed)?;
                map.serialize_entry("match", matched)?;
                map.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub label: String,
    pub cells: Vec<Cell>,
}

impl Row {
    pub fn new(label: impl Into<String>, cells: Vec<Cell>) -> Self {
        Row {
            label: label.into(),
            cells,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    pub title: String,
    /// Header of the label column followed by one header per cell.
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Section {
    pub fn new(title: impl Into<String>, columns: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Section {
            title: title.into(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub title: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub sections: Vec<Section>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report {
            title: title.into(),
            ..Report::default()
        }
    }

    pub fn section(mut self, section: Section) -> Self {
        self.sections.push(section);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Text => self.render_text(),
            OutputFormat::Csv => self.render_csv(),
            OutputFormat::Structured => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
        }
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        if let Some(at) = &self.generated_at {
            let _ = writeln!(out, "generated at {at}");
        }
        for section in &self.sections {
            out.push('\n');
            if !section.title.is_empty() {
                let _ = writeln!(out, "## {}", section.title);
            }
            let mut grid: Vec<Vec<String>> = vec![section.columns.clone()];
            for row in &section.rows {
                let mut line = vec![row.label.clone()];
                line.extend(row.cells.iter().map(Cell::display));
                grid.push(line);
            }
            let ncols = grid.iter().map(Vec::len).max().unwrap_or(0);
            let widths: Vec<usize> = (0..ncols)
                .map(|c| {
                    grid.iter()
                        .filter_map(|r| r.get(c))
                        .map(|s| s.chars().count())
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            for line in &grid {
                let mut text = String::new();
                for (c, cell) in line.iter().enumerate() {
                    if c == 0 {
                        let _ = write!(text, "{:<w$}", cell, w = widths[0]);
                    } else {
                        let _ = write!(text, "  {:>w$}", cell, w = widths[c]);
                    }
                }
                let _ = writeln!(out, "{}", text.trim_end());
            }
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for note in &self.notes {
                let _ = writeln!(out, "note: {note}");
            }
        }
        out
    }

    /// Long format: one line per cell, so every section fits one header.
    fn render_csv(&self) -> String {
        let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
        wtr.write_record(["section", "row", "column", "value", "published", "match"])
            .expect("in-memory write");
        for section in &self.sections {
            for row in &section.rows {
                for (i, cell) in row.cells.iter().enumerate() {
                    let column = section.columns.get(i + 1).map_or("", String::as_str);
                    let (value, published, matched) = match cell {
                        Cell::Compared {
                            published,
                            computed,
                            matched,
                        } => (
                            computed.clone(),
                            published.clone().unwrap_or_default(),
                            matched.map_or(String::new(), |m| m.to_string()),
                        ),
                        other => (other.display(), String::new(), String::new()),
                    };
                    wtr.write_record([
                        section.title.as_str(),
                        row.label.as_str(),
                        column,
                        &value,
                        &published,
                        &matched,
                    ])
                    .expect("in-memory write");
                }
            }
        }
        for note in &self.notes {
            wtr.write_record(["note", "", "", note.as_str(), "", ""])
                .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut s = Section::new("DI", ["project", "req", "des"]);
        s.push(Row::new("P1", vec![Cell::num(16.0 / 30.0, 2), Cell::num(0.5, 2)]));
        s.push(Row::new(
            "P2",
            vec![
                Cell::Compared {
                    published: Some("57.14".into()),
                    computed: "37.50".into(),
                    matched: Some(false),
                },
                Cell::Empty,
            ],
        ));
        Report::new("sample").section(s).note("one mismatch")
    }

    #[test]
    fn text_is_aligned() {
        let text = sample().render(OutputFormat::Text);
        assert_eq!(
            text,
            "sample\n\n## DI\nproject     req   des\nP1         0.53  0.50\nP2       37.50*\n\nnote: one mismatch\n"
        );
    }

    #[test]
    fn csv_is_long_format() {
        let csv = sample().render(OutputFormat::Csv);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "section,row,column,value,published,match");
        assert_eq!(lines[1], "DI,P1,req,0.53,,");
        assert_eq!(lines[3], "DI,P2,req,37.50,57.14,false");
        assert_eq!(lines.last().unwrap(), &"note,,,one mismatch,,");
    }

    #[test]
    fn structured_carries_triples() {
        let json: serde_json::Value =
            serde_json::from_str(&sample().render(OutputFormat::Structured)).unwrap();
        let cell = &json["sections"][0]["rows"][1]["cells"][0];
        assert_eq!(cell["published"], "57.14");
        assert_eq!(cell["computed"], "37.50");
        assert_eq!(cell["match"], false);
        assert_eq!(json["sections"][0]["rows"][0]["cells"][0], 0.53);
        assert!(json.get("generated_at").is_none());
    }

    #[test]
    fn format_names() {
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Structured);
        assert_eq!("CSV".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
