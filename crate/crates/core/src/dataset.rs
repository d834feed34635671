//! Project records, dataset parsing, and the arithmetic consistency checks
//! that a per-phase inspection/testing dataset must satisfy.
//!
//! Parsing and validation are deliberately separate passes. [`parse_dataset`]
//! only enforces field types and value ranges; [`validate`] then enumerates
//! every broken invariant so an imperfect dataset can be audited as a whole.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REFERENCE_JSON: &str = include_str!("../data/reference.json");

/// Pseudo-path under which the embedded reference dataset can be loaded.
pub const REFERENCE_PATH: &str = "@reference";

/// The three development phases tracked per project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "req")]
    Requirements,
    #[serde(rename = "des")]
    Design,
    #[serde(rename = "imp")]
    Implementation,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Requirements, Phase::Design, Phase::Implementation];

    /// Short code used in file formats (`req`, `des`, `imp`).
    pub fn code(self) -> &'static str {
        match self {
            Phase::Requirements => "req",
            Phase::Design => "des",
            Phase::Implementation => "imp",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Requirements => "Requirements",
            Phase::Design => "Design",
            Phase::Implementation => "Implementation",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "req" | "requirements" => Ok(Phase::Requirements),
            "des" | "design" => Ok(Phase::Design),
            "imp" | "implementation" => Ok(Phase::Implementation),
            other => Err(Error::Argument(format!(
                "unknown phase `{other}` (expected req, des or imp)"
            ))),
        }
    }
}

/// Project size bucket derived from total person-hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeCategory {
    Small,
    Medium,
    Large,
}

impl SizeCategory {
    pub const ALL: [SizeCategory; 3] = [SizeCategory::Small, SizeCategory::Medium, SizeCategory::Large];

    pub fn code(self) -> &'static str {
        match self {
            SizeCategory::Small => "small",
            SizeCategory::Medium => "medium",
            SizeCategory::Large => "large",
        }
    }
}

impl fmt::Display for SizeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SizeCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "small" => Ok(SizeCategory::Small),
            "medium" => Ok(SizeCategory::Medium),
            "large" => Ok(SizeCategory::Large),
            other => Err(Error::Argument(format!(
                "unknown size category `{other}` (expected small, medium or large)"
            ))),
        }
    }
}

/// Size category from total person-hours: Small below 1000, Medium from 1000
/// to 5000 inclusive, Large above 5000.
pub fn classify_size(total_hours: f64) -> Result<SizeCategory> {
    if !(total_hours.is_finite() && total_hours > 0.0) {
        return Err(Error::Argument(format!(
            "total hours must be positive, got {total_hours}"
        )));
    }
    Ok(if total_hours < 1000.0 {
        SizeCategory::Small
    } else if total_hours <= 5000.0 {
        SizeCategory::Medium
    } else {
        SizeCategory::Large
    })
}

/// The five defect severity classes, most severe first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Blocker,
    Critical,
    Major,
    Minor,
    Trivial,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Blocker,
        Severity::Critical,
        Severity::Major,
        Severity::Minor,
        Severity::Trivial,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Severity::Blocker => "blocker",
            Severity::Critical => "critical",
            Severity::Major => "major",
            Severity::Minor => "minor",
            Severity::Trivial => "trivial",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Severity::ALL
            .into_iter()
            .find(|sev| sev.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown severity class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeverityCounts {
    pub blocker: u32,
    pub critical: u32,
    pub major: u32,
    pub minor: u32,
    pub trivial: u32,
}

impl SeverityCounts {
    pub fn get(&self, severity: Severity) -> u32 {
        match severity {
            Severity::Blocker => self.blocker,
            Severity::Critical => self.critical,
            Severity::Major => self.major,
            Severity::Minor => self.minor,
            Severity::Trivial => self.trivial,
        }
    }

    pub fn get_mut(&mut self, severity: Severity) -> &mut u32 {
        match severity {
            Severity::Blocker => &mut self.blocker,
            Severity::Critical => &mut self.critical,
            Severity::Major => &mut self.major,
            Severity::Minor => &mut self.minor,
            Severity::Trivial => &mut self.trivial,
        }
    }

    pub fn sum(&self) -> u64 {
        Severity::ALL.iter().map(|&s| u64::from(self.get(s))).sum()
    }
}

/// Effort and defect figures for one phase of one project. Hours are
/// person-hours.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub phase: Phase,
    pub phase_hours: f64,
    pub inspection_hours: f64,
    pub testing_hours: f64,
    pub prep_hours: f64,
    pub num_inspectors: u32,
    /// Years spent working as an inspector.
    pub experience_years: f64,
    /// Defects captured by inspection.
    pub ni: u32,
    /// Defects captured by testing.
    pub nt: u32,
    pub severities: SeverityCounts,
}

impl PhaseRecord {
    /// Defects captured in this phase by inspection and testing together.
    pub fn captured_total(&self) -> u64 {
        u64::from(self.ni) + u64::from(self.nt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectRecord {
    pub id: String,
    pub total_hours: f64,
    /// Td: all defects in the product, including those that escaped to the field.
    pub total_defects: u32,
    /// One record per phase, ordered as [`Phase::ALL`].
    pub phases: [PhaseRecord; 3],
}

impl ProjectRecord {
    pub fn phase(&self, phase: Phase) -> &PhaseRecord {
        &self.phases[phase.index()]
    }

    pub fn phase_mut(&mut self, phase: Phase) -> &mut PhaseRecord {
        &mut self.phases[phase.index()]
    }

    /// Tc: defects captured before shipment across all phases.
    pub fn captured_total(&self) -> u64 {
        self.phases.iter().map(PhaseRecord::captured_total).sum()
    }

    pub fn size(&self) -> Result<SizeCategory> {
        classify_size(self.total_hours)
    }
}

/// An ordered, non-empty collection of projects with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectDataset {
    projects: Vec<ProjectRecord>,
}

impl ProjectDataset {
    pub fn new(projects: Vec<ProjectRecord>) -> Result<Self> {
        if projects.is_empty() {
            return Err(Error::schema("projects", "no projects"));
        }
        let mut seen = HashSet::new();
        for p in &projects {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::schema(&p.id, "duplicate project id"));
            }
        }
        Ok(ProjectDataset { projects })
    }

    /// The embedded fifteen-project reference dataset.
    pub fn reference() -> Self {
        parse_dataset(REFERENCE_JSON.as_bytes(), DatasetFormat::Json)
            .expect("embedded reference dataset parses")
    }

    pub fn projects(&self) -> &[ProjectRecord] {
        &self.projects
    }

    pub fn get(&self, id: &str) -> Option<&ProjectRecord> {
        self.projects.iter().find(|p| p.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ProjectRecord> {
        self.projects.iter()
    }

    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    /// Projects whose total hours fall in `size`.
    pub fn slice(&self, size: SizeCategory) -> impl Iterator<Item = &ProjectRecord> {
        self.projects
            .iter()
            .filter(move |p| p.size().ok() == Some(size))
    }

    /// Mutable access for building corrupted or derived datasets.
    pub fn projects_mut(&mut self) -> &mut [ProjectRecord] {
        &mut self.projects
    }

    pub fn to_canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("dataset serializes");
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
        wtr.write_record(CSV_COLUMNS).expect("in-memory write");
        for p in &self.projects {
            for ph in &p.phases {
                let s = &ph.severities;
                wtr.write_record([
                    p.id.clone(),
                    p.total_hours.to_string(),
                    p.total_defects.to_string(),
                    ph.phase.code().to_string(),
                    ph.phase_hours.to_string(),
                    ph.inspection_hours.to_string(),
                    ph.testing_hours.to_string(),
                    ph.prep_hours.to_string(),
                    ph.num_inspectors.to_string(),
                    ph.experience_years.to_string(),
                    ph.ni.to_string(),
                    ph.nt.to_string(),
                    s.blocker.to_string(),
                    s.critical.to_string(),
                    s.major.to_string(),
                    s.minor.to_string(),
                    s.trivial.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }
}

impl<'a> IntoIterator for &'a ProjectDataset {
    type Item = &'a ProjectRecord;
    type IntoIter = std::slice::Iter<'a, ProjectRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.projects.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Json,
    Csv,
}

impl DatasetFormat {
    /// `.csv` files are CSV; everything else is read as canonical JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Json,
        }
    }
}

/// Column order of the CSV format: one row per (project, phase).
pub const CSV_COLUMNS: [&str; 17] = [
    "id",
    "total_hours",
    "total_defects",
    "phase",
    "phase_hours",
    "inspection_hours",
    "testing_hours",
    "prep_hours",
    "num_inspectors",
    "experience_years",
    "ni",
    "nt",
    "blocker",
    "critical",
    "major",
    "minor",
    "trivial",
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    projects: Vec<RawProject>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProject {
    id: String,
    total_hours: f64,
    total_defects: u32,
    phases: Vec<RawPhase>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhase {
    phase: Phase,
    phase_hours: f64,
    inspection_hours: f64,
    testing_hours: f64,
    prep_hours: f64,
    num_inspectors: u32,
    experience_years: f64,
    ni: u32,
    nt: u32,
    severities: SeverityCounts,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    total_hours: f64,
    total_defects: u32,
    phase: Phase,
    phase_hours: f64,
    inspection_hours: f64,
    testing_hours: f64,
    prep_hours: f64,
    num_inspectors: u32,
    experience_years: f64,
    ni: u32,
    nt: u32,
    blocker: u32,
    critical: u32,
    major: u32,
    minor: u32,
    trivial: u32,
}

/// Parses a dataset. Only field types and value ranges are checked here; run
/// [`validate`] for the cross-field invariants.
pub fn parse_dataset(source: &[u8], format: DatasetFormat) -> Result<ProjectDataset> {
    if source.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no projects".into(),
        });
    }
    let raw = match format {
        DatasetFormat::Json => parse_json(source)?,
        DatasetFormat::Csv => parse_csv(source)?,
    };
    if raw.is_empty() {
        return Err(Error::schema("projects", "no projects"));
    }
    let projects = raw
        .into_iter()
        .map(convert_project)
        .collect::<Result<Vec<_>>>()?;
    ProjectDataset::new(projects)
}

/// Loads a dataset from a path, or the embedded one for [`REFERENCE_PATH`].
pub fn load_dataset(path: impl AsRef<Path>) -> Result<ProjectDataset> {
    let path = path.as_ref();
    if path.as_os_str() == REFERENCE_PATH {
        return Ok(ProjectDataset::reference());
    }
    let bytes = std::fs::read(path)?;
    parse_dataset(&bytes, DatasetFormat::from_path(path))
}

fn parse_json(source: &[u8]) -> Result<Vec<RawProject>> {
    let value: serde_json::Value = serde_json::from_slice(source).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let doc: RawDocument = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        // Prefix with the project id when the failure is inside a project.
        let location = project_index(&path)
            .and_then(|i| value["projects"][i]["id"].as_str())
            .map(|id| format!("{id}: {path}"))
            .unwrap_or(path);
        Error::schema(location, inner)
    })?;
    Ok(doc.projects)
}

fn project_index(path: &str) -> Option<usize> {
    let rest = path.strip_prefix("projects[")?;
    rest[..rest.find(']')?].parse().ok()
}

fn parse_csv(source: &[u8]) -> Result<Vec<RawProject>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::schema(
            "header",
            format!("expected columns {}", CSV_COLUMNS.join(",")),
        ));
    }

    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, (CsvRow, Vec<RawPhase>)> = BTreeMap::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(csv_error)?;
        let phase = RawPhase {
            phase: row.phase,
            phase_hours: row.phase_hours,
            inspection_hours: row.inspection_hours,
            testing_hours: row.testing_hours,
            prep_hours: row.prep_hours,
            num_inspectors: row.num_inspectors,
            experience_years: row.experience_years,
            ni: row.ni,
            nt: row.nt,
            severities: SeverityCounts {
                blocker: row.blocker,
                critical: row.critical,
                major: row.major,
                minor: row.minor,
                trivial: row.trivial,
            },
        };
        match grouped.get_mut(&row.id) {
            Some((first, phases)) => {
                if first.total_hours != row.total_hours {
                    return Err(Error::schema(
                        &row.id,
                        "total_hours differs across the project's phase rows",
                    ));
                }
                if first.total_defects != row.total_defects {
                    return Err(Error::schema(
                        &row.id,
                        "total_defects differs across the project's phase rows",
                    ));
                }
                phases.push(phase);
            }
            None => {
                order.push(row.id.clone());
                grouped.insert(row.id.clone(), (row, vec![phase]));
            }
        }
    }

    Ok(order
        .into_iter()
        .map(|id| {
            let (first, phases) = grouped.remove(&id).expect("grouped by id");
            RawProject {
                id,
                total_hours: first.total_hours,
                total_defects: first.total_defects,
                phases,
            }
        })
        .collect())
}

fn csv_error(e: csv::Error) -> Error {
    let (line, column) = match e.kind() {
        csv::ErrorKind::Deserialize { pos, err } => (
            pos.as_ref().map_or(0, |p| p.line() as usize),
            err.field().map_or(0, |f| f as usize + 1),
        ),
        _ => (e.position().map_or(0, |p| p.line() as usize), 0),
    };
    Error::Parse {
        line,
        column,
        message: e.to_string(),
    }
}

fn convert_project(raw: RawProject) -> Result<ProjectRecord> {
    let id = raw.id.trim().to_string();
    if id.is_empty() {
        return Err(Error::schema("id", "project id must not be empty"));
    }
    check_positive(&id, "total_hours", raw.total_hours)?;
    if raw.total_defects == 0 {
        return Err(Error::schema(
            format!("{id}/total_defects"),
            "must be a positive integer",
        ));
    }

    let mut slots: [Option<RawPhase>; 3] = [None, None, None];
    for ph in raw.phases {
        let slot = &mut slots[ph.phase.index()];
        if slot.is_some() {
            return Err(Error::schema(format!("{id}/{}", ph.phase), "duplicate phase"));
        }
        *slot = Some(ph);
    }
    let mut phases = Vec::with_capacity(3);
    for (phase, slot) in Phase::ALL.into_iter().zip(slots) {
        let ph = slot.ok_or_else(|| Error::schema(format!("{id}/{phase}"), "missing phase"))?;
        phases.push(convert_phase(&id, ph)?);
    }
    let phases: [PhaseRecord; 3] = phases.try_into().expect("three phases");

    Ok(ProjectRecord {
        id,
        total_hours: raw.total_hours,
        total_defects: raw.total_defects,
        phases,
    })
}

fn convert_phase(id: &str, raw: RawPhase) -> Result<PhaseRecord> {
    let loc = format!("{id}/{}", raw.phase);
    check_positive(&loc, "phase_hours", raw.phase_hours)?;
    check_non_negative(&loc, "inspection_hours", raw.inspection_hours)?;
    check_non_negative(&loc, "testing_hours", raw.testing_hours)?;
    check_non_negative(&loc, "prep_hours", raw.prep_hours)?;
    check_non_negative(&loc, "experience_years", raw.experience_years)?;
    if raw.num_inspectors == 0 {
        return Err(Error::schema(
            format!("{loc}/num_inspectors"),
            "must be at least 1",
        ));
    }
    Ok(PhaseRecord {
        phase: raw.phase,
        phase_hours: raw.phase_hours,
        inspection_hours: raw.inspection_hours,
        testing_hours: raw.testing_hours,
        prep_hours: raw.prep_hours,
        num_inspectors: raw.num_inspectors,
        experience_years: raw.experience_years,
        ni: raw.ni,
        nt: raw.nt,
        severities: raw.severities,
    })
}

fn check_positive(loc: &str, field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::schema(format!("{loc}/{field}"), format!("must be positive, got {v}")))
    }
}

fn check_non_negative(loc: &str, field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::schema(
            format!("{loc}/{field}"),
            format!("must be non-negative, got {v}"),
        ))
    }
}

/// Identifier of a dataset consistency rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Severity counts must add up to Ni + Nt.
    SeveritySum,
    /// Inspection, testing and preparation hours must fit in the phase hours.
    TimeBudget,
    /// Tc must not exceed Td.
    CapturedExceedsTotal,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::SeveritySum => "severity-sum",
            Rule::TimeBudget => "time-budget",
            Rule::CapturedExceedsTotal => "captured-exceeds-total",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub project: String,
    pub rule: Rule,
    pub location: String,
    pub observed: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn for_project<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Violation> + 'a {
        self.violations.iter().filter(move |v| v.project == id)
    }
}

/// Checks every cross-field invariant and reports all violations.
pub fn validate(ds: &ProjectDataset) -> ValidationReport {
    let mut violations = Vec::new();
    for p in ds {
        for ph in &p.phases {
            let location = format!("{}/{}", p.id, ph.phase);
            let severity_sum = ph.severities.sum();
            if severity_sum != ph.captured_total() {
                violations.push(Violation {
                    project: p.id.clone(),
                    rule: Rule::SeveritySum,
                    location: location.clone(),
                    observed: severity_sum as f64,
                    expected: ph.captured_total() as f64,
                });
            }
            let spent = ph.inspection_hours + ph.testing_hours + ph.prep_hours;
            if spent > ph.phase_hours {
                violations.push(Violation {
                    project: p.id.clone(),
                    rule: Rule::TimeBudget,
                    location,
                    observed: spent,
                    expected: ph.phase_hours,
                });
            }
        }
        let tc = p.captured_total();
        if tc > u64::from(p.total_defects) {
            violations.push(Violation {
                project: p.id.clone(),
                rule: Rule::CapturedExceedsTotal,
                location: p.id.clone(),
                observed: tc as f64,
                expected: f64::from(p.total_defects),
            });
        }
    }
    ValidationReport { violations }
}
