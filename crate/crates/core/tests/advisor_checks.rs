use inspectkit_core::advisor::{
    benchmark, check_compliance, desired_ranges, RangeMetric, RangeSpec, Verdict,
};
use inspectkit_core::dataset::{Phase, ProjectDataset};
use proptest::prelude::*;

fn compliance(id: &str) -> inspectkit_core::advisor::ComplianceReport {
    let ds = ProjectDataset::reference();
    check_compliance(ds.get(id).unwrap(), desired_ranges()).unwrap()
}

#[test]
fn p10_requirements_is_under_inspected() {
    let r = compliance("P10");
    let insp = r.check(Phase::Requirements, RangeMetric::InspectionTimePct);
    assert_eq!(format!("{:.2}", insp.observed.unwrap()), "6.45");
    assert_eq!(insp.verdict, Some(Verdict::Below));
    assert!(r.capture_below_90);
    assert_eq!(format!("{:.2}", r.tc_pct), "88.35");
    assert_eq!(r.low_inspection_share_phases, [Phase::Requirements]);
    assert!(r.notes.iter().any(|n| n.starts_with("Requirements")));
}

#[test]
fn p6_implementation_is_under_inspected() {
    let r = compliance("P6");
    assert!(r.capture_below_90);
    assert_eq!(format!("{:.2}", r.tc_pct), "87.01");
    assert_eq!(r.low_inspection_share_phases, [Phase::Implementation]);
}

#[test]
fn prep_ratio_is_defined_for_every_reference_phase() {
    for p in ProjectDataset::reference().iter() {
        let r = check_compliance(p, desired_ranges()).unwrap();
        for phase in Phase::ALL {
            let v = r.check(phase, RangeMetric::PrepTimePct).observed.unwrap();
            assert!(v.is_finite() && v > 0.0, "{} {phase}", p.id);
        }
    }
}

#[test]
fn benchmark_order() {
    let ranked = benchmark(&ProjectDataset::reference(), desired_ranges()).unwrap();
    assert_eq!(ranked.len(), 15);
    assert_eq!(ranked[0].id, "P11");
    assert_eq!(format!("{:.2}", ranked[0].tc_pct), "96.92");
    assert_eq!(ranked.last().unwrap().id, "P6");
    assert!(ranked.windows(2).all(|w| w[0].tc_pct >= w[1].tc_pct));
    assert_eq!(
        benchmark(&ProjectDataset::reference(), desired_ranges()).unwrap(),
        ranked
    );

    let single = ProjectDataset::new(vec![ProjectDataset::reference().get("P3").unwrap().clone()]).unwrap();
    let ranked = benchmark(&single, desired_ranges()).unwrap();
    assert_eq!(ranked.len(), 1);
    assert_eq!(ranked[0].rank, 1);
}

proptest! {
    #[test]
    fn verdict_matches_direct_comparison(
        lo in prop::option::of(-100.0f64..100.0),
        width in 0.0f64..100.0,
        has_hi in any::<bool>(),
        x in -300.0f64..300.0,
    ) {
        let hi = if has_hi { Some(lo.unwrap_or(0.0) + width) } else { None };
        let r = RangeSpec { min: lo, max: hi };
        let expected = if lo.is_some_and(|l| x < l) {
            Verdict::Below
        } else if hi.is_some_and(|h| x > h) {
            Verdict::Above
        } else {
            Verdict::Compliant
        };
        prop_assert_eq!(r.verdict(x), expected);
    }
}
