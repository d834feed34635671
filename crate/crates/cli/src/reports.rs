//! Report builders for results that have no report of their own in the core
//! crate.

use inspectkit_core::bbn::{CptModel, DiDistribution, Evidence, Recommendation};
use inspectkit_core::dataset::{Severity, SizeCategory, ValidationReport};
use inspectkit_core::metrics::{DiLevel, DiPoint, PatternTable, ProjectMetrics};
use inspectkit_core::report::{Cell, Report, Row, Section};

const PROB_DECIMALS: u32 = 4;

pub fn validation(source: &str, projects: usize, v: &ValidationReport) -> Report {
    let mut section = Section::new(
        "violations",
        ["location", "project", "rule", "observed", "expected"],
    );
    for violation in &v.violations {
        section.push(Row::new(
            violation.location.clone(),
            vec![
                Cell::text(violation.project.clone()),
                Cell::text(violation.rule.id()),
                Cell::num(violation.observed, 2),
                Cell::num(violation.expected, 2),
            ],
        ));
    }
    let summary = format!(
        "{projects} projects, {} violation(s)",
        v.violations.len()
    );
    Report::new(format!("validation of {source}"))
        .section(section)
        .note(summary)
}

pub fn metrics(projects: &[ProjectMetrics]) -> Report {
    let mut overview = Section::new(
        "projects",
        ["project", "total_hours", "size", "td", "tc", "tc_pct", "mean_di"],
    );
    let mut phases = Section::new(
        "phases",
        [
            "project/phase",
            "di",
            "di_level",
            "ipm",
            "inspection_pct",
            "testing_pct",
            "prep_pct",
            "prep_ratio_pct",
            "ni_pct",
            "nt_pct",
        ],
    );
    let mut severities = Section::new(
        "severity shares",
        std::iter::once("project/phase".to_string())
            .chain(Severity::ALL.iter().map(|s| s.code().to_string())),
    );
    for pm in projects {
        overview.push(Row::new(
            pm.id.clone(),
            vec![
                Cell::num(pm.total_hours, 2),
                Cell::text(pm.size.code()),
                Cell::int(pm.td),
                Cell::int(pm.tc),
                Cell::num(pm.tc_pct, 2),
                Cell::num(pm.mean_di(), 2),
            ],
        ));
        for m in &pm.phases {
            let label = format!("{}/{}", pm.id, m.phase.code());
            phases.push(Row::new(
                label.clone(),
                vec![
                    Cell::num(m.di, 2),
                    Cell::text(m.di_level.code()),
                    Cell::num(m.ipm, 2),
                    Cell::num(m.inspection_pct, 2),
                    Cell::num(m.testing_pct, 2),
                    Cell::num(m.prep_pct, 2),
                    Cell::opt(m.prep_ratio_pct, 2),
                    Cell::num(m.ni_pct, 2),
                    Cell::num(m.nt_pct, 2),
                ],
            ));
            severities.push(Row::new(
                label,
                Severity::ALL
                    .iter()
                    .map(|&s| Cell::num(m.severity_pct.get(s), 2))
                    .collect(),
            ));
        }
    }
    Report::new("inspection metrics")
        .section(overview)
        .section(phases)
        .section(severities)
}

pub fn pattern(t: &PatternTable) -> Report {
    let columns = std::iter::once("phase/severity".to_string()).chain(
        SizeCategory::ALL
            .iter()
            .flat_map(|s| [format!("{}_min", s.code()), format!("{}_max", s.code())]),
    );
    let mut section = Section::new("severity share spans (%)", columns);
    let mut label = None;
    let mut cells = Vec::new();
    for c in &t.cells {
        let key = format!("{}/{}", c.phase.code(), c.severity.code());
        if label.as_ref() != Some(&key) {
            if let Some(prev) = label.replace(key) {
                section.push(Row::new(prev, std::mem::take(&mut cells)));
            }
        }
        cells.push(Cell::opt(c.span.map(|s| s.min_pct), 2));
        cells.push(Cell::opt(c.span.map(|s| s.max_pct), 2));
    }
    if let Some(prev) = label {
        section.push(Row::new(prev, cells));
    }
    Report::new("defect severity pattern").section(section)
}

pub fn di_plot(points: &[DiPoint]) -> Report {
    let mut section = Section::new("di", ["project", "total_hours", "di_req", "di_des", "di_imp"]);
    for p in points {
        section.push(Row::new(
            p.id.clone(),
            vec![
                Cell::num(p.total_hours, 2),
                Cell::opt(p.di_req, 4),
                Cell::opt(p.di_des, 4),
                Cell::opt(p.di_imp, 4),
            ],
        ));
    }
    Report::new("DI against total project hours").section(section)
}

fn di_columns(first: &str) -> impl Iterator<Item = String> {
    std::iter::once(first.to_string()).chain(DiLevel::ALL.iter().map(|l| l.code().to_string()))
}

fn dist_cells(d: &DiDistribution) -> Vec<Cell> {
    d.to_array().iter().map(|&p| Cell::num(p, PROB_DECIMALS)).collect()
}

pub fn model(m: &CptModel, out: &str) -> Report {
    let mut prior = Section::new("prior", di_columns("quantity"));
    prior.push(Row::new("probability", dist_cells(&m.prior)));
    prior.push(Row::new(
        "count",
        m.prior_counts.iter().map(|&c| Cell::int(c)).collect(),
    ));
    let mut report = Report::new(format!(
        "naive-Bayes model for {}/{}",
        m.phase.code(),
        m.size.code()
    ))
    .section(prior);
    for node in &m.nodes {
        let mut section = Section::new(
            format!("P({} | DI)", node.node),
            di_columns("level"),
        );
        for (i, label) in node.levels.labels().iter().enumerate() {
            section.push(Row::new(
                label.clone(),
                node.rows
                    .iter()
                    .map(|r| Cell::num(r.probs[i], PROB_DECIMALS))
                    .collect(),
            ));
        }
        report = report.section(section);
    }
    report
        .note(format!(
            "{} projects, smoothing {}",
            m.sample_size, m.smoothing
        ))
        .note(format!("written to {out}"))
}

pub fn posterior(m: &CptModel, evidence: &Evidence, post: &DiDistribution) -> Report {
    let mut section = Section::new("posterior", ["di_level", "probability"]);
    for (level, p) in DiLevel::ALL.iter().zip(post.to_array()) {
        section.push(Row::new(level.code(), vec![Cell::num(p, PROB_DECIMALS)]));
    }
    Report::new(format!(
        "DI posterior for {}/{}",
        m.phase.code(),
        m.size.code()
    ))
    .section(section)
    .note(format!("evidence: {evidence}"))
}

pub fn ranking(m: &CptModel, target: &[DiLevel], recs: &[Recommendation]) -> Report {
    let mut section = Section::new("ranking", di_columns("evidence").chain(["mass".to_string()]));
    for r in recs {
        let mut cells = match &r.posterior {
            Some(p) => dist_cells(p),
            None => vec![Cell::Empty; 4],
        };
        cells.push(match r.mass {
            Some(mass) => Cell::num(mass, PROB_DECIMALS),
            None => Cell::text("impossible"),
        });
        section.push(Row::new(r.evidence.to_string(), cells));
    }
    let target: Vec<&str> = target.iter().map(|l| l.code()).collect();
    Report::new(format!(
        "recommendations for {}/{}",
        m.phase.code(),
        m.size.code()
    ))
    .section(section)
    .note(format!("target: {}", target.join(",")))
}
