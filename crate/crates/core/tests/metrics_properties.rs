use inspectkit_core::dataset::{Phase, PhaseRecord, ProjectDataset};
use inspectkit_core::metrics::{
    capture_rate, classify_di, depth_of_inspection, inspection_performance, pattern_summary,
    phase_metrics, project_metrics, DiLevel,
};
use inspectkit_core::report::OutputFormat;
use inspectkit_core::tables::{reproduce_table, TABLE_IDS};
use inspectkit_core::dataset::{Severity, SizeCategory};
use proptest::prelude::*;

#[test]
fn defect_shares_are_complementary_on_reference_phases() {
    for p in ProjectDataset::reference().iter() {
        for rec in &p.phases {
            let m = phase_metrics(rec).unwrap();
            assert!((m.ni_pct + m.nt_pct - 100.0).abs() <= 1e-9);
            assert!((m.severity_pct.sum() - 100.0).abs() <= 1e-9);
            assert!((m.di - m.ni_pct / 100.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn only_two_phases_are_poor() {
    let mut poor = Vec::new();
    for p in ProjectDataset::reference().iter() {
        for rec in &p.phases {
            let di = depth_of_inspection(u64::from(rec.ni), rec.captured_total()).unwrap();
            if classify_di(di).unwrap() == DiLevel::Poor {
                poor.push(format!("{}/{}", p.id, rec.phase.code()));
            }
        }
    }
    assert_eq!(poor, ["P6/imp", "P10/req"]);
}

#[test]
fn low_capture_projects_and_their_inspection_shares() {
    let mut low = Vec::new();
    for p in ProjectDataset::reference().iter() {
        let m = project_metrics(p).unwrap();
        if m.tc_pct < 90.0 {
            let weakest = m.phases.iter().map(|ph| ph.ni_pct).fold(f64::INFINITY, f64::min);
            low.push((p.id.clone(), weakest < 30.0));
        }
    }
    // P5 captures 115 of 128 (89.84%) yet inspection finds at least 32.76%
    // of defects in every phase.
    let expected = [("P5", false), ("P6", true), ("P10", true)].map(|(id, f)| (id.to_string(), f));
    assert_eq!(low, expected);
}

#[test]
fn small_requirements_blocker_span() {
    let t = pattern_summary(&ProjectDataset::reference()).unwrap();
    let span = t
        .get(Phase::Requirements, SizeCategory::Small, Severity::Blocker)
        .unwrap();
    // P5: 1 of 29, P2: 4 of 35
    assert!((span.min_pct - 100.0 / 29.0).abs() < 1e-9);
    assert!((span.max_pct - 400.0 / 35.0).abs() < 1e-9);
    let trivial = t
        .get(Phase::Requirements, SizeCategory::Small, Severity::Trivial)
        .unwrap();
    assert!(trivial.min_pct <= 48.28 && 48.28 <= trivial.max_pct + 0.005);
}

#[test]
fn single_project_spans_are_points() {
    let p1 = ProjectDataset::reference().get("P1").unwrap().clone();
    let t = pattern_summary(&ProjectDataset::new(vec![p1]).unwrap()).unwrap();
    for phase in Phase::ALL {
        for s in Severity::ALL {
            let span = t.get(phase, SizeCategory::Small, s).unwrap();
            assert_eq!(span.min_pct, span.max_pct);
            assert!(t.get(phase, SizeCategory::Large, s).is_none());
        }
    }
}

#[test]
fn table_reproduction_is_deterministic() {
    let ds = ProjectDataset::reference();
    for id in TABLE_IDS {
        for format in [OutputFormat::Text, OutputFormat::Csv, OutputFormat::Structured] {
            let a = reproduce_table(&ds, id).unwrap().to_report().render(format);
            let b = reproduce_table(&ds, id).unwrap().to_report().render(format);
            assert_eq!(a, b);
        }
    }
}

#[test]
fn capture_rate_edges() {
    assert_eq!(capture_rate(7, 7).unwrap(), 100.0);
    assert!(capture_rate(8, 7).is_err());
    assert!(capture_rate(0, 0).is_err());
}

proptest! {
    #[test]
    fn di_is_scale_free(ni in 0u64..500, nt in 0u64..500, k in 1u64..50) {
        prop_assume!(ni + nt > 0);
        let a = depth_of_inspection(ni, ni + nt).unwrap();
        let b = depth_of_inspection(k * ni, k * (ni + nt)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn ipm_scales_inversely_with_time(
        ni in 0u64..500,
        n in 1u32..10,
        it in 0.1f64..100.0,
        pt in 0.0f64..50.0,
        k in 1.0f64..20.0,
    ) {
        let a = inspection_performance(ni, n, it, pt).unwrap();
        let b = inspection_performance(ni, n, k * it, k * pt).unwrap();
        prop_assert!((a / k - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn phase_shares_sum_to_one_hundred(
        sev in prop::array::uniform5(0u32..300),
        split in 0.0f64..=1.0,
    ) {
        let total: u32 = sev.iter().sum();
        prop_assume!(total > 0);
        let ni = (f64::from(total) * split).floor() as u32;
        let mut rec = ProjectDataset::reference().get("P1").unwrap().phase(Phase::Design).clone();
        rec.ni = ni;
        rec.nt = total - ni;
        rec.severities.blocker = sev[0];
        rec.severities.critical = sev[1];
        rec.severities.major = sev[2];
        rec.severities.minor = sev[3];
        rec.severities.trivial = sev[4];
        let m = phase_metrics(&rec).unwrap();
        prop_assert!((m.ni_pct + m.nt_pct - 100.0).abs() <= 1e-9);
        prop_assert!((m.severity_pct.sum() - 100.0).abs() <= 1e-9);
    }
}

#[test]
fn zero_defect_phase_is_undefined() {
    let mut rec: PhaseRecord = ProjectDataset::reference().get("P1").unwrap().phase(Phase::Design).clone();
    rec.ni = 0;
    rec.nt = 0;
    rec.severities = Default::default();
    assert_eq!(phase_metrics(&rec).unwrap_err().code(), "undefined-metric");
}
