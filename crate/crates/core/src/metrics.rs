//! Depth of Inspection, Inspection Performance, capture rates and the
//! per-phase percentage breakdowns built on them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Phase, PhaseRecord, ProjectDataset, ProjectRecord, Severity, SizeCategory};
use crate::error::{Error, Result};

/// Depth of Inspection: the share of a phase's captured defects that were
/// found by inspection rather than testing.
pub fn depth_of_inspection(ni: u64, phase_captured_total: u64) -> Result<f64> {
    if phase_captured_total == 0 {
        return Err(Error::UndefinedMetric(
            "depth of inspection needs at least one captured defect".into(),
        ));
    }
    if ni > phase_captured_total {
        return Err(Error::Argument(format!(
            "inspection defects ({ni}) exceed the phase total ({phase_captured_total})"
        )));
    }
    Ok(ni as f64 / phase_captured_total as f64)
}

/// Inspection Performance Metric: inspection defects per inspector-hour,
/// where each inspector is charged inspection plus preparation time.
pub fn inspection_performance(
    ni: u64,
    num_inspectors: u32,
    inspection_hours: f64,
    prep_hours: f64,
) -> Result<f64> {
    if num_inspectors == 0 {
        return Err(Error::Argument("at least one inspector is required".into()));
    }
    if !(inspection_hours >= 0.0 && prep_hours >= 0.0) {
        return Err(Error::Argument("inspection and preparation hours must be non-negative".into()));
    }
    let time = inspection_hours + prep_hours;
    if time <= 0.0 || !time.is_finite() {
        return Err(Error::UndefinedMetric(
            "inspection performance needs positive inspection plus preparation time".into(),
        ));
    }
    Ok(ni as f64 / (f64::from(num_inspectors) * time))
}

/// Percentage of all defects that were captured before shipment.
pub fn capture_rate(tc: u64, td: u64) -> Result<f64> {
    if td == 0 {
        return Err(Error::Argument("total defects must be positive".into()));
    }
    if tc > td {
        return Err(Error::Argument(format!(
            "captured defects ({tc}) exceed total defects ({td})"
        )));
    }
    Ok(100.0 * tc as f64 / td as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiLevel {
    Poor,
    Moderate,
    Desirable,
    Excellent,
}

impl DiLevel {
    pub const ALL: [DiLevel; 4] = [
        DiLevel::Poor,
        DiLevel::Moderate,
        DiLevel::Desirable,
        DiLevel::Excellent,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            DiLevel::Poor => "poor",
            DiLevel::Moderate => "moderate",
            DiLevel::Desirable => "desirable",
            DiLevel::Excellent => "excellent",
        }
    }
}

impl fmt::Display for DiLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for DiLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poor" | "p" => Ok(DiLevel::Poor),
            "moderate" | "m" => Ok(DiLevel::Moderate),
            "desirable" | "d" => Ok(DiLevel::Desirable),
            "excellent" | "e" => Ok(DiLevel::Excellent),
            other => Err(Error::Argument(format!("unknown DI level `{other}`"))),
        }
    }
}

/// Poor below 0.3, Moderate in [0.3, 0.4), Desirable in [0.4, 0.7],
/// Excellent above 0.7.
pub fn classify_di(di: f64) -> Result<DiLevel> {
    if !(0.0..=1.0).contains(&di) {
        return Err(Error::Argument(format!("DI must lie in [0, 1], got {di}")));
    }
    Ok(if di < 0.3 {
        DiLevel::Poor
    } else if di < 0.4 {
        DiLevel::Moderate
    } else if di <= 0.7 {
        DiLevel::Desirable
    } else {
        DiLevel::Excellent
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperienceLevel {
    Novice,
    Average,
    Large,
}

/// Novice up to 2 years, Average above 2 and up to 4, Large above 4.
pub fn classify_experience(years: f64) -> Result<ExperienceLevel> {
    if !(years.is_finite() && years >= 0.0) {
        return Err(Error::Argument(format!(
            "experience must be non-negative, got {years}"
        )));
    }
    Ok(if years <= 2.0 {
        ExperienceLevel::Novice
    } else if years <= 4.0 {
        ExperienceLevel::Average
    } else {
        ExperienceLevel::Large
    })
}

/// One value per severity class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SeverityShares {
    pub blocker: f64,
    pub critical: f64,
    pub major: f64,
    pub minor: f64,
    pub trivial: f64,
}

impl SeverityShares {
    pub fn get(&self, severity: Severity) -> f64 {
        match severity {
            Severity::Blocker => self.blocker,
            Severity::Critical => self.critical,
            Severity::Major => self.major,
            Severity::Minor => self.minor,
            Severity::Trivial => self.trivial,
        }
    }

    fn set(&mut self, severity: Severity, v: f64) {
        match severity {
            Severity::Blocker => self.blocker = v,
            Severity::Critical => self.critical = v,
            Severity::Major => self.major = v,
            Severity::Minor => self.minor = v,
            Severity::Trivial => self.trivial = v,
        }
    }

    pub fn sum(&self) -> f64 {
        Severity::ALL.iter().map(|&s| self.get(s)).sum()
    }
}

/// Percentages and ratios for one phase. Time shares are relative to the
/// phase hours; defect shares are relative to the phase's captured total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMetrics {
    pub phase: Phase,
    pub di: f64,
    pub di_level: DiLevel,
    pub ipm: f64,
    pub inspection_pct: f64,
    pub testing_pct: f64,
    pub prep_pct: f64,
    /// Preparation time as a percentage of inspection time; absent when no
    /// inspection time was booked.
    pub prep_ratio_pct: Option<f64>,
    pub ni_pct: f64,
    pub nt_pct: f64,
    pub severity_pct: SeverityShares,
}

pub fn phase_metrics(pr: &PhaseRecord) -> Result<PhaseMetrics> {
    let total = pr.captured_total();
    let di = depth_of_inspection(u64::from(pr.ni), total)?;
    let ipm = inspection_performance(
        u64::from(pr.ni),
        pr.num_inspectors,
        pr.inspection_hours,
        pr.prep_hours,
    )?;
    if pr.phase_hours <= 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "{} phase has no hours to take shares of",
            pr.phase
        )));
    }
    let of_hours = |h: f64| 100.0 * h / pr.phase_hours;
    let of_defects = |n: u64| 100.0 * n as f64 / total as f64;

    let mut severity_pct = SeverityShares::default();
    for s in Severity::ALL {
        severity_pct.set(s, of_defects(u64::from(pr.severities.get(s))));
    }

    Ok(PhaseMetrics {
        phase: pr.phase,
        di,
        di_level: classify_di(di)?,
        ipm,
        inspection_pct: of_hours(pr.inspection_hours),
        testing_pct: of_hours(pr.testing_hours),
        prep_pct: of_hours(pr.prep_hours),
        prep_ratio_pct: prep_ratio_pct(pr),
        ni_pct: of_defects(u64::from(pr.ni)),
        nt_pct: of_defects(u64::from(pr.nt)),
        severity_pct,
    })
}

/// Preparation hours as a percentage of inspection hours.
pub fn prep_ratio_pct(pr: &PhaseRecord) -> Option<f64> {
    (pr.inspection_hours > 0.0).then(|| 100.0 * pr.prep_hours / pr.inspection_hours)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectMetrics {
    pub id: String,
    pub total_hours: f64,
    pub size: SizeCategory,
    pub phases: Vec<PhaseMetrics>,
    pub td: u32,
    pub tc: u64,
    pub tc_pct: f64,
}

impl ProjectMetrics {
    pub fn phase(&self, phase: Phase) -> &PhaseMetrics {
        &self.phases[phase.index()]
    }

    pub fn mean_di(&self) -> f64 {
        self.phases.iter().map(|m| m.di).sum::<f64>() / self.phases.len() as f64
    }
}

pub fn project_metrics(p: &ProjectRecord) -> Result<ProjectMetrics> {
    let phases = p
        .phases
        .iter()
        .map(phase_metrics)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| match e {
            Error::UndefinedMetric(m) => Error::UndefinedMetric(format!("{}: {m}", p.id)),
            other => other,
        })?;
    let tc = p.captured_total();
    Ok(ProjectMetrics {
        id: p.id.clone(),
        total_hours: p.total_hours,
        size: p.size()?,
        phases,
        td: p.total_defects,
        tc,
        tc_pct: capture_rate(tc, u64::from(p.total_defects))?,
    })
}

/// Observed min/max of a percentage across a group of projects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PctSpan {
    pub min_pct: f64,
    pub max_pct: f64,
    pub projects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternCell {
    pub phase: Phase,
    pub size: SizeCategory,
    pub severity: Severity,
    /// `None` when no project of this size contributes to the cell.
    pub span: Option<PctSpan>,
}

/// Severity share spans per (phase, size, severity class).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternTable {
    pub cells: Vec<PatternCell>,
}

impl PatternTable {
    pub fn get(&self, phase: Phase, size: SizeCategory, severity: Severity) -> Option<PctSpan> {
        self.cells
            .iter()
            .find(|c| c.phase == phase && c.size == size && c.severity == severity)
            .and_then(|c| c.span)
    }
}

/// Min and max of each severity share across projects of the same size.
/// Phases without captured defects contribute nothing.
pub fn pattern_summary(ds: &ProjectDataset) -> Result<PatternTable> {
    let mut cells = Vec::with_capacity(45);
    for phase in Phase::ALL {
        for severity in Severity::ALL {
            for size in SizeCategory::ALL {
                let mut span: Option<PctSpan> = None;
                for p in ds.slice(size) {
                    let ph = p.phase(phase);
                    let total = ph.captured_total();
                    if total == 0 {
                        continue;
                    }
                    let pct = 100.0 * f64::from(ph.severities.get(severity)) / total as f64;
                    span = Some(match span {
                        None => PctSpan {
                            min_pct: pct,
                            max_pct: pct,
                            projects: 1,
                        },
                        Some(s) => PctSpan {
                            min_pct: s.min_pct.min(pct),
                            max_pct: s.max_pct.max(pct),
                            projects: s.projects + 1,
                        },
                    });
                }
                cells.push(PatternCell {
                    phase,
                    size,
                    severity,
                    span,
                });
            }
        }
    }
    Ok(PatternTable { cells })
}

/// One point of the DI-versus-effort series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiPoint {
    pub id: String,
    pub total_hours: f64,
    pub di_req: Option<f64>,
    pub di_des: Option<f64>,
    pub di_imp: Option<f64>,
}

/// DI per phase against total project hours, ordered by hours then id.
/// Phases with no captured defects yield `None`.
pub fn di_series(ds: &ProjectDataset) -> Vec<DiPoint> {
    let di = |p: &ProjectRecord, phase| {
        let ph = p.phase(phase);
        depth_of_inspection(u64::from(ph.ni), ph.captured_total()).ok()
    };
    let mut points: Vec<DiPoint> = ds
        .iter()
        .map(|p| DiPoint {
            id: p.id.clone(),
            total_hours: p.total_hours,
            di_req: di(p, Phase::Requirements),
            di_des: di(p, Phase::Design),
            di_imp: di(p, Phase::Implementation),
        })
        .collect();
    points.sort_by(|a, b| {
        a.total_hours
            .total_cmp(&b.total_hours)
            .then_with(|| a.id.cmp(&b.id))
    });
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rounding::format_fixed;

    fn reference() -> ProjectDataset {
        ProjectDataset::reference()
    }

    #[test]
    fn di_examples() {
        assert_eq!(format_fixed(depth_of_inspection(16, 30).unwrap(), 2), "0.53");
        assert_eq!(depth_of_inspection(0, 10).unwrap(), 0.0);
        assert_eq!(format_fixed(depth_of_inspection(112, 254).unwrap(), 2), "0.44");
        assert!(matches!(depth_of_inspection(0, 0), Err(Error::UndefinedMetric(_))));
        assert!(depth_of_inspection(11, 10).is_err());
    }

    #[test]
    fn ipm_examples() {
        assert_eq!(format_fixed(inspection_performance(16, 3, 3.0, 0.5).unwrap(), 2), "1.52");
        assert_eq!(format_fixed(inspection_performance(28, 3, 16.0, 2.0).unwrap(), 2), "0.52");
        assert_eq!(inspection_performance(0, 3, 10.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            inspection_performance(4, 3, 0.0, 0.0),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(inspection_performance(4, 0, 1.0, 0.0).is_err());
    }

    #[test]
    fn capture_rate_examples() {
        assert_eq!(capture_rate(48, 50).unwrap(), 96.0);
        assert_eq!(format_fixed(capture_rate(134, 154).unwrap(), 2), "87.01");
        assert_eq!(capture_rate(77, 77).unwrap(), 100.0);
        assert!(capture_rate(51, 50).is_err());
        assert!(capture_rate(0, 0).is_err());
    }

    #[test]
    fn di_levels() {
        assert_eq!(classify_di(0.27).unwrap(), DiLevel::Poor);
        assert_eq!(classify_di(0.3).unwrap(), DiLevel::Moderate);
        assert_eq!(classify_di(0.33).unwrap(), DiLevel::Moderate);
        assert_eq!(classify_di(0.4).unwrap(), DiLevel::Desirable);
        assert_eq!(classify_di(0.70).unwrap(), DiLevel::Desirable);
        assert_eq!(classify_di(0.7000001).unwrap(), DiLevel::Excellent);
        assert!(classify_di(1.2).is_err());
        assert!(classify_di(-0.1).is_err());
    }

    #[test]
    fn experience_levels() {
        assert_eq!(classify_experience(1.0).unwrap(), ExperienceLevel::Novice);
        assert_eq!(classify_experience(2.0).unwrap(), ExperienceLevel::Novice);
        assert_eq!(classify_experience(3.0).unwrap(), ExperienceLevel::Average);
        assert_eq!(classify_experience(4.0).unwrap(), ExperienceLevel::Average);
        assert_eq!(classify_experience(5.0).unwrap(), ExperienceLevel::Large);
        assert!(classify_experience(-1.0).is_err());
    }

    #[test]
    fn p1_requirements_breakdown() {
        let ds = reference();
        let m = phase_metrics(ds.get("P1").unwrap().phase(Phase::Requirements)).unwrap();
        assert_eq!(format_fixed(m.inspection_pct, 2), "12.00");
        assert_eq!(format_fixed(m.prep_pct, 2), "2.00");
        assert_eq!(format_fixed(m.ni_pct, 2), "53.33");
        assert_eq!(format_fixed(m.severity_pct.blocker, 2), "10.00");

        let m = phase_metrics(ds.get("P7").unwrap().phase(Phase::Requirements)).unwrap();
        assert_eq!(format_fixed(m.inspection_pct, 2), "6.00");
        assert_eq!(format_fixed(m.prep_pct, 2), "0.88");
    }

    #[test]
    fn equal_split_is_fifty_fifty() {
        let ds = reference();
        let mut ph = ds.get("P1").unwrap().phase(Phase::Design).clone();
        assert_eq!(ph.ni, ph.nt);
        let m = phase_metrics(&ph).unwrap();
        assert_eq!(m.ni_pct, 50.0);
        assert_eq!(m.nt_pct, 50.0);
        ph.ni = 0;
        ph.nt = 0;
        assert!(matches!(phase_metrics(&ph), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn project_examples() {
        let ds = reference();
        let m = project_metrics(ds.get("P4").unwrap()).unwrap();
        let dis: Vec<_> = m.phases.iter().map(|p| format_fixed(p.di, 2)).collect();
        assert_eq!(dis, ["0.52", "0.54", "0.53"]);
        assert_eq!(format_fixed(m.tc_pct, 2), "96.00");

        let m = project_metrics(ds.get("P6").unwrap()).unwrap();
        assert_eq!(format_fixed(m.phase(Phase::Implementation).di, 2), "0.21");
        assert_eq!(format_fixed(m.tc_pct, 2), "87.01");
        assert_eq!(m.size, SizeCategory::Medium);
    }

    #[test]
    fn no_inspection_defects_gives_zero_di() {
        let mut p = reference().get("P3").unwrap().clone();
        for ph in p.phases.iter_mut() {
            ph.nt += ph.ni;
            ph.ni = 0;
        }
        let m = project_metrics(&p).unwrap();
        assert!(m.phases.iter().all(|ph| ph.di == 0.0 && ph.ipm == 0.0));
    }

    #[test]
    fn pattern_spans() {
        let table = pattern_summary(&reference()).unwrap();
        let span = table
            .get(Phase::Requirements, SizeCategory::Small, Severity::Blocker)
            .unwrap();
        assert_eq!(format_fixed(span.min_pct, 2), "3.45");
        assert_eq!(format_fixed(span.max_pct, 2), "11.43");
        let trivial = table
            .get(Phase::Requirements, SizeCategory::Small, Severity::Trivial)
            .unwrap();
        assert_eq!(format_fixed(trivial.max_pct, 2), "48.28");
        assert!(trivial.min_pct >= 30.0 && trivial.max_pct <= 50.0);
        assert_eq!(table.cells.len(), 45);
    }

    #[test]
    fn single_project_pattern_is_degenerate() {
        let one = ProjectDataset::new(vec![reference().get("P9").unwrap().clone()]).unwrap();
        let table = pattern_summary(&one).unwrap();
        for cell in &table.cells {
            match (cell.size, cell.span) {
                (SizeCategory::Medium, Some(s)) => assert_eq!(s.min_pct, s.max_pct),
                (SizeCategory::Medium, None) => panic!("populated cell missing"),
                (_, span) => assert!(span.is_none()),
            }
        }
    }

    #[test]
    fn di_series_sorted_by_hours() {
        let series = di_series(&reference());
        assert_eq!(series.len(), 15);
        assert!(series.windows(2).all(|w| w[0].total_hours <= w[1].total_hours));
        assert_eq!(series[0].id, "P1");
        assert_eq!(format_fixed(series[0].di_req.unwrap(), 2), "0.53");
    }
}
