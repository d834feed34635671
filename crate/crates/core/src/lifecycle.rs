//! Deliverable inspection workflow and its event log.
//!
//! A deliverable moves through a fixed sequence of reviews before final
//! inspection:
//!
//! ```text
//! drafted -> self_reviewed -> peer_reviewed -> externally_audited
//!         -> causal_analysis_done -> in_final_inspection -> accepted -> ncr_closed
//!                                        ^          |
//!                      rework_complete   |          | defects_found
//!                                        +-- reinspection_required
//! ```
//!
//! Each trip round the re-inspection loop increments `loop_count`; a
//! deliverable counts as efficiently inspected while that stays below two.
//! Workflows are rebuilt from an append-only JSON-lines log by [`replay`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{Phase, Severity};
use crate::error::{Error, Result};
use crate::report::{Cell, Report, Row, Section};

/// Re-inspection loops at or above this mark a deliverable as inefficient.
pub const MAX_EFFICIENT_LOOPS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowState {
    Drafted,
    SelfReviewed,
    PeerReviewed,
    ExternallyAudited,
    CausalAnalysisDone,
    InFinalInspection,
    ReinspectionRequired,
    Accepted,
    NcrClosed,
}

impl WorkflowState {
    pub const ALL: [WorkflowState; 9] = [
        WorkflowState::Drafted,
        WorkflowState::SelfReviewed,
        WorkflowState::PeerReviewed,
        WorkflowState::ExternallyAudited,
        WorkflowState::CausalAnalysisDone,
        WorkflowState::InFinalInspection,
        WorkflowState::ReinspectionRequired,
        WorkflowState::Accepted,
        WorkflowState::NcrClosed,
    ];

    pub fn code(self) -> &'static str {
        match self {
            WorkflowState::Drafted => "drafted",
            WorkflowState::SelfReviewed => "self_reviewed",
            WorkflowState::PeerReviewed => "peer_reviewed",
            WorkflowState::ExternallyAudited => "externally_audited",
            WorkflowState::CausalAnalysisDone => "causal_analysis_done",
            WorkflowState::InFinalInspection => "in_final_inspection",
            WorkflowState::ReinspectionRequired => "reinspection_required",
            WorkflowState::Accepted => "accepted",
            WorkflowState::NcrClosed => "ncr_closed",
        }
    }

    /// Successor under `event`, if the edge exists.
    pub fn next(self, event: EventKind) -> Option<WorkflowState> {
        use EventKind as E;
        use WorkflowState as S;
        Some(match (self, event) {
            (S::Drafted, E::SelfReview) => S::SelfReviewed,
            (S::SelfReviewed, E::PeerReview) => S::PeerReviewed,
            (S::PeerReviewed, E::ExternalAudit) => S::ExternallyAudited,
            (S::ExternallyAudited, E::CausalAnalysis) => S::CausalAnalysisDone,
            (S::CausalAnalysisDone, E::FinalInspectionStart) => S::InFinalInspection,
            (S::InFinalInspection, E::DefectsFound) => S::ReinspectionRequired,
            (S::ReinspectionRequired, E::ReworkComplete) => S::InFinalInspection,
            (S::InFinalInspection, E::Accept) => S::Accepted,
            (S::Accepted, E::CloseNcr) => S::NcrClosed,
            _ => return None,
        })
    }
}

impl fmt::Display for WorkflowState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    RequirementSpec,
    HighLevelDesign,
    LowLevelDesign,
    TestCase,
    SourceCode,
}

impl ArtifactKind {
    pub fn phase(self) -> Phase {
        match self {
            ArtifactKind::RequirementSpec => Phase::Requirements,
            ArtifactKind::HighLevelDesign | ArtifactKind::LowLevelDesign => Phase::Design,
            ArtifactKind::TestCase | ArtifactKind::SourceCode => Phase::Implementation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inspector {
    pub id: String,
    pub experience_years: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectTrailEntry {
    pub defect_type: Severity,
    pub count: u32,
    pub root_cause: String,
    #[serde(default)]
    pub action_items: Vec<String>,
    #[serde(default)]
    pub inspectors: Vec<Inspector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    SelfReview,
    PeerReview,
    ExternalAudit,
    CausalAnalysis,
    FinalInspectionStart,
    DefectsFound,
    ReworkComplete,
    Accept,
    CloseNcr,
}

impl EventKind {
    pub fn code(self) -> &'static str {
        match self {
            EventKind::SelfReview => "self_review",
            EventKind::PeerReview => "peer_review",
            EventKind::ExternalAudit => "external_audit",
            EventKind::CausalAnalysis => "causal_analysis",
            EventKind::FinalInspectionStart => "final_inspection_start",
            EventKind::DefectsFound => "defects_found",
            EventKind::ReworkComplete => "rework_complete",
            EventKind::Accept => "accept",
            EventKind::CloseNcr => "close_ncr",
        }
    }
}

/// Something that happened to a deliverable. Serialized as the `event`
/// and `payload` fields of a log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload", rename_all = "snake_case")]
pub enum Event {
    SelfReview,
    PeerReview,
    ExternalAudit,
    CausalAnalysis,
    FinalInspectionStart {
        inspector_ids: Vec<String>,
    },
    DefectsFound {
        entries: Vec<DefectTrailEntry>,
    },
    ReworkComplete,
    Accept,
    CloseNcr {
        report: String,
    },
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self {
            Event::SelfReview => EventKind::SelfReview,
            Event::PeerReview => EventKind::PeerReview,
            Event::ExternalAudit => EventKind::ExternalAudit,
            Event::CausalAnalysis => EventKind::CausalAnalysis,
            Event::FinalInspectionStart { .. } => EventKind::FinalInspectionStart,
            Event::DefectsFound { .. } => EventKind::DefectsFound,
            Event::ReworkComplete => EventKind::ReworkComplete,
            Event::Accept => EventKind::Accept,
            Event::CloseNcr { .. } => EventKind::CloseNcr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeliverableWorkflow {
    pub deliverable_id: String,
    pub phase: Phase,
    pub artifact_kind: ArtifactKind,
    pub state: WorkflowState,
    pub loop_count: u32,
    pub trail: Vec<DefectTrailEntry>,
    pub ncr_closed: bool,
    pub ncr_report: Option<String>,
    pub author_ids: BTreeSet<String>,
    pub final_inspector_ids: BTreeSet<String>,
    /// Sequence number of the last log record applied.
    pub last_seq: Option<u64>,
}

impl DeliverableWorkflow {
    pub fn new(
        deliverable_id: impl Into<String>,
        phase: Phase,
        artifact_kind: ArtifactKind,
        author_ids: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self> {
        if artifact_kind.phase() != phase {
            return Err(Error::Argument(format!(
                "a {artifact_kind:?} belongs to the {} phase, not {phase}",
                artifact_kind.phase()
            )));
        }
        Ok(DeliverableWorkflow {
            deliverable_id: deliverable_id.into(),
            phase,
            artifact_kind,
            state: WorkflowState::Drafted,
            loop_count: 0,
            trail: Vec::new(),
            ncr_closed: false,
            ncr_report: None,
            author_ids: author_ids.into_iter().map(Into::into).collect(),
            final_inspector_ids: BTreeSet::new(),
            last_seq: None,
        })
    }

    pub fn efficient(&self) -> bool {
        self.loop_count < MAX_EFFICIENT_LOOPS
    }

    /// Applies one event. On error the workflow is left unchanged.
    pub fn apply(&mut self, event: &Event) -> Result<()> {
        let kind = event.kind();
        let next = self.state.next(kind).ok_or_else(|| Error::State {
            state: self.state.to_string(),
            event: kind.code().to_string(),
        })?;
        match event {
            Event::FinalInspectionStart { inspector_ids } => {
                if inspector_ids.is_empty() {
                    return Err(Error::Argument("final inspection needs an inspector".into()));
                }
                self.check_not_author(inspector_ids.iter())?;
                self.final_inspector_ids.extend(inspector_ids.iter().cloned());
            }
            Event::DefectsFound { entries } => {
                if entries.is_empty() {
                    return Err(Error::Argument("defects_found needs at least one trail entry".into()));
                }
                if let Some(e) = entries.iter().find(|e| e.count == 0) {
                    return Err(Error::Argument(format!(
                        "trail entry for {} defects has count 0",
                        e.defect_type
                    )));
                }
                self.check_not_author(entries.iter().flat_map(|e| &e.inspectors).map(|i| &i.id))?;
                self.trail.extend(entries.iter().cloned());
                self.loop_count += 1;
            }
            Event::CloseNcr { report } => {
                self.ncr_closed = true;
                self.ncr_report = Some(report.clone());
            }
            _ => {}
        }
        self.state = next;
        Ok(())
    }

    fn check_not_author<'a>(&self, mut ids: impl Iterator<Item = &'a String>) -> Result<()> {
        match ids.find(|id| self.author_ids.contains(*id)) {
            Some(id) => Err(Error::Policy(format!(
                "{id} authored {} and cannot inspect it in final inspection",
                self.deliverable_id
            ))),
            None => Ok(()),
        }
    }
}

pub fn new_workflow(
    deliverable_id: &str,
    phase: Phase,
    artifact_kind: ArtifactKind,
    author_ids: &[&str],
) -> Result<DeliverableWorkflow> {
    DeliverableWorkflow::new(deliverable_id, phase, artifact_kind, author_ids.iter().copied())
}

/// Functional form of [`DeliverableWorkflow::apply`].
pub fn record_event(wf: &DeliverableWorkflow, event: &Event) -> Result<DeliverableWorkflow> {
    let mut next = wf.clone();
    next.apply(event)?;
    Ok(next)
}

/// One line of an event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRecord {
    pub seq: u64,
    pub deliverable_id: String,
    pub event: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub payload: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreatePayload {
    phase: Phase,
    artifact_kind: ArtifactKind,
    #[serde(default)]
    author_ids: Vec<String>,
}

impl LogRecord {
    pub fn create(seq: u64, wf: &DeliverableWorkflow) -> Self {
        LogRecord {
            seq,
            deliverable_id: wf.deliverable_id.clone(),
            event: "create".into(),
            payload: serde_json::json!({
                "phase": wf.phase,
                "artifact_kind": wf.artifact_kind,
                "author_ids": wf.author_ids,
            }),
        }
    }

    pub fn event(seq: u64, deliverable_id: &str, event: &Event) -> Self {
        let mut v = serde_json::to_value(event).expect("event serializes");
        let payload = v.get_mut("payload").map(Value::take).unwrap_or(Value::Null);
        LogRecord {
            seq,
            deliverable_id: deliverable_id.into(),
            event: event.kind().code().into(),
            payload,
        }
    }

    fn to_event(&self) -> Result<Event> {
        let mut v = serde_json::json!({ "event": self.event });
        if !self.payload.is_null() {
            v["payload"] = self.payload.clone();
        }
        serde_json::from_value(v)
            .map_err(|e| Error::Argument(format!("bad `{}` record: {e}", self.event)))
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Parses a JSON-lines event log. Blank lines are skipped.
pub fn parse_log(source: &str) -> Result<Vec<LogRecord>> {
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                column: e.column(),
                message: e.to_string(),
            })
        })
        .collect()
}

fn at(index: usize, source: Error) -> Error {
    Error::Replay {
        index,
        source: Box::new(source),
    }
}

fn step(wf: &mut DeliverableWorkflow, index: usize, record: &LogRecord) -> Result<()> {
    if record.deliverable_id != wf.deliverable_id {
        return Err(at(
            index,
            Error::Argument(format!(
                "record for {} in the log of {}",
                record.deliverable_id, wf.deliverable_id
            )),
        ));
    }
    if wf.last_seq.is_some_and(|s| record.seq <= s) {
        return Err(at(
            index,
            Error::Argument(format!("sequence number {} does not increase", record.seq)),
        ));
    }
    if record.event == "create" {
        return Err(at(
            index,
            Error::Argument(format!("{} is created twice", wf.deliverable_id)),
        ));
    }
    let event = record.to_event().map_err(|e| at(index, e))?;
    wf.apply(&event).map_err(|e| at(index, e))?;
    wf.last_seq = Some(record.seq);
    Ok(())
}

/// Rebuilds one workflow from its log, which must start with a `create`
/// record. Errors carry the zero-based index of the offending record.
pub fn replay(records: &[LogRecord]) -> Result<DeliverableWorkflow> {
    let first = records
        .first()
        .ok_or_else(|| at(0, Error::Argument("empty event log".into())))?;
    if first.event != "create" {
        return Err(at(
            0,
            Error::Argument(format!("log starts with `{}`, not create", first.event)),
        ));
    }
    let p: CreatePayload = serde_json::from_value(first.payload.clone())
        .map_err(|e| at(0, Error::Argument(format!("bad create record: {e}"))))?;
    let mut wf = DeliverableWorkflow::new(&first.deliverable_id, p.phase, p.artifact_kind, p.author_ids)
        .map_err(|e| at(0, e))?;
    wf.last_seq = Some(first.seq);
    for (i, r) in records.iter().enumerate().skip(1) {
        step(&mut wf, i, r)?;
    }
    Ok(wf)
}

/// Continues an existing workflow with further records. Indices in errors
/// are relative to `records`.
pub fn resume(mut wf: DeliverableWorkflow, records: &[LogRecord]) -> Result<DeliverableWorkflow> {
    for (i, r) in records.iter().enumerate() {
        step(&mut wf, i, r)?;
    }
    Ok(wf)
}

/// Replays a log that interleaves several deliverables. Workflows come back
/// in order of their create records; error indices refer to the whole log.
pub fn replay_all(records: &[LogRecord]) -> Result<Vec<DeliverableWorkflow>> {
    let mut workflows: Vec<DeliverableWorkflow> = Vec::new();
    let mut last_seq: Option<u64> = None;
    for (i, r) in records.iter().enumerate() {
        if last_seq.is_some_and(|s| r.seq <= s) {
            return Err(at(
                i,
                Error::Argument(format!("sequence number {} does not increase", r.seq)),
            ));
        }
        last_seq = Some(r.seq);
        match workflows.iter_mut().find(|w| w.deliverable_id == r.deliverable_id) {
            Some(wf) => step(wf, i, r)?,
            None => {
                let wf = replay(std::slice::from_ref(r)).map_err(|e| match e {
                    Error::Replay { source, .. } => at(i, *source),
                    other => other,
                })?;
                workflows.push(wf);
            }
        }
    }
    Ok(workflows)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub phase: Option<Phase>,
    pub workflows: usize,
    pub trail_entries: usize,
    pub defects: u64,
    pub ncr_closed: usize,
    pub open: usize,
    pub inefficient: usize,
    pub preventive_actions: Vec<String>,
}

impl PhaseSummary {
    fn add(&mut self, wf: &DeliverableWorkflow) {
        self.workflows += 1;
        self.trail_entries += wf.trail.len();
        self.defects += wf.trail.iter().map(|e| u64::from(e.count)).sum::<u64>();
        if wf.ncr_closed {
            self.ncr_closed += 1;
        } else {
            self.open += 1;
        }
        if !wf.efficient() {
            self.inefficient += 1;
        }
        self.preventive_actions
            .extend(wf.trail.iter().flat_map(|e| e.action_items.iter().cloned()));
    }
}

/// Trail and closure totals per phase, plus a grand total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpCentreSummary {
    pub phases: Vec<PhaseSummary>,
    pub total: PhaseSummary,
}

impl DpCentreSummary {
    pub fn phase(&self, phase: Phase) -> &PhaseSummary {
        &self.phases[phase.index()]
    }

    pub fn to_report(&self, workflows: &[DeliverableWorkflow]) -> Report {
        let mut wfs = Section::new(
            "deliverables",
            ["deliverable", "phase", "state", "loops", "efficient", "trail", "ncr_closed"],
        );
        for wf in workflows {
            wfs.push(Row::new(
                wf.deliverable_id.clone(),
                vec![
                    Cell::text(wf.phase.code()),
                    Cell::text(wf.state.code()),
                    Cell::int(wf.loop_count),
                    Cell::text(wf.efficient().to_string()),
                    Cell::int(wf.trail.len() as u64),
                    Cell::text(wf.ncr_closed.to_string()),
                ],
            ));
        }
        let mut summary = Section::new(
            "defect prevention summary",
            ["phase", "workflows", "trail_entries", "defects", "ncr_closed", "open", "inefficient"],
        );
        for s in self.phases.iter().chain(std::iter::once(&self.total)) {
            summary.push(Row::new(
                s.phase.map_or("total", |p| p.code()),
                vec![
                    Cell::int(s.workflows as u64),
                    Cell::int(s.trail_entries as u64),
                    Cell::int(s.defects),
                    Cell::int(s.ncr_closed as u64),
                    Cell::int(s.open as u64),
                    Cell::int(s.inefficient as u64),
                ],
            ));
        }
        let mut report = Report::new("inspection lifecycle").section(wfs).section(summary);
        for a in &self.total.preventive_actions {
            report = report.note(format!("action: {a}"));
        }
        report
    }
}

pub fn dp_centre_summary<'a>(
    workflows: impl IntoIterator<Item = &'a DeliverableWorkflow>,
) -> DpCentreSummary {
    let mut phases: Vec<PhaseSummary> = Phase::ALL
        .iter()
        .map(|&p| PhaseSummary {
            phase: Some(p),
            ..PhaseSummary::default()
        })
        .collect();
    let mut total = PhaseSummary::default();
    for wf in workflows {
        phases[wf.phase.index()].add(wf);
        total.add(wf);
    }
    DpCentreSummary { phases, total }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(n: u32) -> DefectTrailEntry {
        DefectTrailEntry {
            defect_type: Severity::Major,
            count: n,
            root_cause: "ambiguous requirement".into(),
            action_items: vec!["add glossary".into()],
            inspectors: vec![],
        }
    }

    fn at_final() -> DeliverableWorkflow {
        let mut wf = new_workflow("REQ-1", Phase::Requirements, ArtifactKind::RequirementSpec, &["a1"]).unwrap();
        for e in [Event::SelfReview, Event::PeerReview, Event::ExternalAudit, Event::CausalAnalysis] {
            wf.apply(&e).unwrap();
        }
        wf.apply(&Event::FinalInspectionStart {
            inspector_ids: vec!["q1".into()],
        })
        .unwrap();
        wf
    }

    #[test]
    fn constructor_checks_kind_against_phase() {
        let wf = new_workflow("HLD-1", Phase::Design, ArtifactKind::HighLevelDesign, &["a1"]).unwrap();
        assert_eq!(wf.state, WorkflowState::Drafted);
        assert_eq!(wf.loop_count, 0);
        assert!(new_workflow("SRC-1", Phase::Requirements, ArtifactKind::SourceCode, &["a1"]).is_err());
    }

    #[test]
    fn two_rework_cycles_are_inefficient() {
        let mut wf = at_final();
        for _ in 0..2 {
            wf.apply(&Event::DefectsFound { entries: vec![entry(1)] }).unwrap();
            wf.apply(&Event::ReworkComplete).unwrap();
        }
        assert_eq!(wf.loop_count, 2);
        assert!(!wf.efficient());
        wf.apply(&Event::Accept).unwrap();
        wf.apply(&Event::CloseNcr { report: "NCR-7".into() }).unwrap();
        assert_eq!(wf.state, WorkflowState::NcrClosed);
        assert!(wf.ncr_closed);
    }

    #[test]
    fn illegal_event_names_state_and_event() {
        let mut wf = new_workflow("REQ-1", Phase::Requirements, ArtifactKind::RequirementSpec, &["a1"]).unwrap();
        let before = wf.clone();
        let err = wf.apply(&Event::PeerReview).unwrap_err();
        assert_eq!(err.to_string(), "illegal transition: event `peer_review` is not allowed in state drafted");
        assert_eq!(wf, before);
    }

    #[test]
    fn author_cannot_inspect() {
        let mut wf = new_workflow("REQ-1", Phase::Requirements, ArtifactKind::RequirementSpec, &["a1"]).unwrap();
        for e in [Event::SelfReview, Event::PeerReview, Event::ExternalAudit, Event::CausalAnalysis] {
            wf.apply(&e).unwrap();
        }
        let err = wf
            .apply(&Event::FinalInspectionStart {
                inspector_ids: vec!["q1".into(), "a1".into()],
            })
            .unwrap_err();
        assert!(matches!(err, Error::Policy(_)));
        assert_eq!(wf.state, WorkflowState::CausalAnalysisDone);
    }

    #[test]
    fn zero_count_entries_are_rejected() {
        let mut wf = at_final();
        assert!(wf.apply(&Event::DefectsFound { entries: vec![entry(0)] }).is_err());
        assert_eq!(wf.loop_count, 0);
    }

    #[test]
    fn log_records_round_trip_events() {
        let e = Event::DefectsFound { entries: vec![entry(2)] };
        let r = LogRecord::event(3, "REQ-1", &e);
        assert_eq!(r.event, "defects_found");
        assert_eq!(r.to_event().unwrap(), e);
        let plain = LogRecord::event(4, "REQ-1", &Event::Accept);
        assert_eq!(plain.to_line(), r#"{"seq":4,"deliverable_id":"REQ-1","event":"accept"}"#);
        assert_eq!(parse_log(&format!("{}\n\n", plain.to_line())).unwrap(), vec![plain]);
    }

    #[test]
    fn summary_partitions_by_phase() {
        let mut a = at_final();
        a.apply(&Event::DefectsFound { entries: vec![entry(1), entry(2), entry(3)] }).unwrap();
        let mut b = new_workflow("SRC-1", Phase::Implementation, ArtifactKind::SourceCode, &["a2"]).unwrap();
        b.trail = vec![entry(4), entry(5)];
        let s = dp_centre_summary([&a, &b]);
        assert_eq!(s.total.trail_entries, 5);
        assert_eq!(s.total.defects, 15);
        assert_eq!(s.phase(Phase::Requirements).trail_entries, 3);
        assert_eq!(s.phase(Phase::Implementation).trail_entries, 2);
        assert_eq!(s.phase(Phase::Design).workflows, 0);
        let empty = dp_centre_summary(&[]);
        assert_eq!(empty.total, PhaseSummary::default());
    }
}
