//! Benchmarking against recommended parameter ranges.
//!
//! The embedded [`DesiredRangeTable`] holds one set of ranges per
//! (phase, size) pair. [`check_compliance`] compares a project against the
//! ranges for its size and raises two project-level flags: a capture rate
//! below 90% and phases where inspection found under 30% of the defects.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dataset::{Phase, ProjectDataset, ProjectRecord, SizeCategory};
use crate::error::{Error, Result};
use crate::metrics::project_metrics;
use crate::report::{Cell, Report, Row, Section};

const EMBEDDED: &str = include_str!("../data/desired_ranges.json");

/// Capture rates below this are flagged.
pub const CAPTURE_THRESHOLD_PCT: f64 = 90.0;
/// Phases whose inspection share of captured defects is below this are flagged.
pub const LOW_INSPECTION_SHARE_PCT: f64 = 30.0;
/// Inspection time below this share of phase hours earns an informational note.
pub const LOW_INSPECTION_TIME_PCT: f64 = 10.0;

/// Inclusive bounds; either side may be open.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Below,
    Compliant,
    Above,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Below => "below",
            Verdict::Compliant => "compliant",
            Verdict::Above => "above",
        })
    }
}

impl RangeSpec {
    pub fn between(min: f64, max: f64) -> Self {
        RangeSpec {
            min: Some(min),
            max: Some(max),
        }
    }

    pub fn at_least(min: f64) -> Self {
        RangeSpec {
            min: Some(min),
            max: None,
        }
    }

    pub fn verdict(&self, observed: f64) -> Verdict {
        match (self.min, self.max) {
            (Some(lo), _) if observed < lo => Verdict::Below,
            (_, Some(hi)) if observed > hi => Verdict::Above,
            _ => Verdict::Compliant,
        }
    }

    fn check(&self) -> Result<()> {
        for v in [self.min, self.max].into_iter().flatten() {
            if !v.is_finite() {
                return Err(Error::Configuration("range bounds must be finite".into()));
            }
        }
        if let (Some(lo), Some(hi)) = (self.min, self.max) {
            if lo > hi {
                return Err(Error::Configuration(format!("range min {lo} exceeds max {hi}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for RangeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.min, self.max) {
            (Some(lo), Some(hi)) if lo == hi => write!(f, "{lo}"),
            (Some(lo), Some(hi)) => write!(f, "{lo}-{hi}"),
            (Some(lo), None) => write!(f, ">= {lo}"),
            (None, Some(hi)) => write!(f, "<= {hi}"),
            (None, None) => f.write_str("any"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMetric {
    Di,
    Ipm,
    InspectionTimePct,
    /// Preparation as a percentage of inspection time.
    PrepTimePct,
    NumInspectors,
    ExperienceYears,
    TestingTimePct,
}

impl RangeMetric {
    pub const ALL: [RangeMetric; 7] = [
        RangeMetric::Di,
        RangeMetric::Ipm,
        RangeMetric::InspectionTimePct,
        RangeMetric::PrepTimePct,
        RangeMetric::NumInspectors,
        RangeMetric::ExperienceYears,
        RangeMetric::TestingTimePct,
    ];

    pub fn key(self) -> &'static str {
        match self {
            RangeMetric::Di => "di",
            RangeMetric::Ipm => "ipm",
            RangeMetric::InspectionTimePct => "inspection_time_pct",
            RangeMetric::PrepTimePct => "prep_time_pct",
            RangeMetric::NumInspectors => "num_inspectors",
            RangeMetric::ExperienceYears => "experience_years",
            RangeMetric::TestingTimePct => "testing_time_pct",
        }
    }
}

impl fmt::Display for RangeMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseRanges {
    pub phase: Phase,
    pub size: SizeCategory,
    pub di: RangeSpec,
    pub ipm: RangeSpec,
    pub inspection_time_pct: RangeSpec,
    pub prep_time_pct: RangeSpec,
    pub num_inspectors: RangeSpec,
    pub experience_years: RangeSpec,
    pub testing_time_pct: RangeSpec,
}

impl PhaseRanges {
    pub fn get(&self, metric: RangeMetric) -> RangeSpec {
        match metric {
            RangeMetric::Di => self.di,
            RangeMetric::Ipm => self.ipm,
            RangeMetric::InspectionTimePct => self.inspection_time_pct,
            RangeMetric::PrepTimePct => self.prep_time_pct,
            RangeMetric::NumInspectors => self.num_inspectors,
            RangeMetric::ExperienceYears => self.experience_years,
            RangeMetric::TestingTimePct => self.testing_time_pct,
        }
    }
}

/// Ranges for every (phase, size) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct DesiredRangeTable {
    cells: Vec<PhaseRanges>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    cells: Vec<PhaseRanges>,
}

impl TryFrom<RawTable> for DesiredRangeTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        let mut cells = Vec::with_capacity(9);
        for phase in Phase::ALL {
            for size in SizeCategory::ALL {
                let mut matching = raw.cells.iter().filter(|c| c.phase == phase && c.size == size);
                let cell = matching.next().ok_or_else(|| {
                    Error::Configuration(format!("no ranges for {phase}/{size}"))
                })?;
                if matching.next().is_some() {
                    return Err(Error::Configuration(format!(
                        "ranges for {phase}/{size} given more than once"
                    )));
                }
                for m in RangeMetric::ALL {
                    cell.get(m).check().map_err(|e| {
                        Error::Configuration(format!("{phase}/{size} {m}: {e}"))
                    })?;
                }
                cells.push(cell.clone());
            }
        }
        Ok(DesiredRangeTable { cells })
    }
}

impl Default for DesiredRangeTable {
    fn default() -> Self {
        desired_ranges().clone()
    }
}

impl DesiredRangeTable {
    pub fn get(&self, phase: Phase, size: SizeCategory) -> &PhaseRanges {
        &self.cells[phase.index() * 3 + size_index(size)]
    }

    pub fn cells(&self) -> &[PhaseRanges] {
        &self.cells
    }

    pub fn from_json(source: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(source);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if inner.is_syntax() || inner.is_eof() {
                Error::Parse {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                }
            } else {
                Error::schema(path, inner)
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }
}

fn size_index(size: SizeCategory) -> usize {
    match size {
        SizeCategory::Small => 0,
        SizeCategory::Medium => 1,
        SizeCategory::Large => 2,
    }
}

/// The built-in recommended ranges.
pub fn desired_ranges() -> &'static DesiredRangeTable {
    static TABLE: OnceLock<DesiredRangeTable> = OnceLock::new();
    TABLE.get_or_init(|| DesiredRangeTable::from_json(EMBEDDED).expect("embedded ranges are valid"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCheck {
    pub phase: Phase,
    pub metric: RangeMetric,
    /// `None` when the metric cannot be computed for this phase.
    pub observed: Option<f64>,
    pub range: RangeSpec,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub project: String,
    pub size: SizeCategory,
    pub checks: Vec<MetricCheck>,
    pub tc_pct: f64,
    pub capture_below_90: bool,
    pub low_inspection_share_phases: Vec<Phase>,
    pub notes: Vec<String>,
}

impl ComplianceReport {
    pub fn check(&self, phase: Phase, metric: RangeMetric) -> &MetricCheck {
        self.checks
            .iter()
            .find(|c| c.phase == phase && c.metric == metric)
            .expect("every metric is checked in every phase")
    }

    /// Checks whose verdict is not compliant.
    pub fn violation_count(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| matches!(c.verdict, Some(Verdict::Below | Verdict::Above)))
            .count()
    }

    pub fn to_report(&self) -> Report {
        let mut section = Section::new(
            format!("{} ({})", self.project, self.size),
            ["phase", "metric", "observed", "range", "verdict"],
        );
        for c in &self.checks {
            let decimals = if c.metric == RangeMetric::NumInspectors { 0 } else { 2 };
            section.push(Row::new(
                c.phase.code(),
                vec![
                    Cell::text(c.metric.key()),
                    Cell::opt(c.observed, decimals),
                    Cell::text(c.range.to_string()),
                    Cell::text(c.verdict.map_or("n/a".to_string(), |v| v.to_string())),
                ],
            ));
        }
        let mut flags = Section::new("flags", ["flag", "value"]);
        flags.push(Row::new("tc_pct", vec![Cell::num(self.tc_pct, 2)]));
        flags.push(Row::new(
            "capture_below_90",
            vec![Cell::text(self.capture_below_90.to_string())],
        ));
        let phases: Vec<&str> = self.low_inspection_share_phases.iter().map(|p| p.code()).collect();
        flags.push(Row::new(
            "low_inspection_share_phases",
            vec![Cell::text(phases.join(" "))],
        ));
        let mut report = Report::new(format!("compliance of {}", self.project))
            .section(section)
            .section(flags);
        report.notes = self.notes.clone();
        report
    }
}

pub fn check_compliance(p: &ProjectRecord, table: &DesiredRangeTable) -> Result<ComplianceReport> {
    let pm = project_metrics(p)?;
    let mut checks = Vec::with_capacity(Phase::ALL.len() * RangeMetric::ALL.len());
    let mut low_share = Vec::new();
    let mut notes = Vec::new();
    for phase in Phase::ALL {
        let m = pm.phase(phase);
        let rec = p.phase(phase);
        let ranges = table.get(phase, pm.size);
        for metric in RangeMetric::ALL {
            let observed = match metric {
                RangeMetric::Di => Some(m.di),
                RangeMetric::Ipm => Some(m.ipm),
                RangeMetric::InspectionTimePct => Some(m.inspection_pct),
                RangeMetric::PrepTimePct => m.prep_ratio_pct,
                RangeMetric::NumInspectors => Some(f64::from(rec.num_inspectors)),
                RangeMetric::ExperienceYears => Some(rec.experience_years),
                RangeMetric::TestingTimePct => Some(m.testing_pct),
            };
            let range = ranges.get(metric);
            checks.push(MetricCheck {
                phase,
                metric,
                observed,
                range,
                verdict: observed.map(|v| range.verdict(v)),
            });
        }
        if m.ni_pct < LOW_INSPECTION_SHARE_PCT {
            low_share.push(phase);
        }
        if m.inspection_pct < LOW_INSPECTION_TIME_PCT {
            notes.push(format!(
                "{phase}: inspection took {:.2}% of phase hours, under {LOW_INSPECTION_TIME_PCT}%",
                m.inspection_pct
            ));
        }
    }
    Ok(ComplianceReport {
        project: p.id.clone(),
        size: pm.size,
        checks,
        tc_pct: pm.tc_pct,
        capture_below_90: pm.tc_pct < CAPTURE_THRESHOLD_PCT,
        low_inspection_share_phases: low_share,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkEntry {
    pub rank: usize,
    pub id: String,
    pub size: SizeCategory,
    pub tc_pct: f64,
    pub mean_di: f64,
    pub violations: usize,
}

/// Projects ordered by capture rate, best first; equal rates fall back to id.
pub fn benchmark(ds: &ProjectDataset, table: &DesiredRangeTable) -> Result<Vec<BenchmarkEntry>> {
    let mut entries = ds
        .iter()
        .map(|p| {
            let pm = project_metrics(p)?;
            let compliance = check_compliance(p, table)?;
            Ok(BenchmarkEntry {
                rank: 0,
                id: p.id.clone(),
                size: pm.size,
                tc_pct: pm.tc_pct,
                mean_di: pm.mean_di(),
                violations: compliance.violation_count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| b.tc_pct.total_cmp(&a.tc_pct).then_with(|| a.id.cmp(&b.id)));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(entries)
}

pub fn benchmark_report(entries: &[BenchmarkEntry]) -> Report {
    let mut section = Section::new("", ["rank", "project", "size", "tc_pct", "mean_di", "violations"]);
    for e in entries {
        section.push(Row::new(
            e.rank.to_string(),
            vec![
                Cell::text(e.id.clone()),
                Cell::text(e.size.code()),
                Cell::num(e.tc_pct, 2),
                Cell::num(e.mean_di, 2),
                Cell::int(e.violations as u64),
            ],
        ));
    }
    Report::new("benchmark").section(section)
}
