use std::collections::BTreeSet;

use inspectkit_core::dataset::{
    classify_size, load_dataset, parse_dataset, validate, DatasetFormat, Phase, PhaseRecord,
    ProjectDataset, ProjectRecord, Rule, Severity, SeverityCounts, SizeCategory,
};
use proptest::prelude::*;

fn data_file(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn shipped_data_files_match_the_embedded_dataset() {
    let embedded = ProjectDataset::reference();
    assert_eq!(load_dataset(data_file("reference.json")).unwrap(), embedded);
    assert_eq!(load_dataset(data_file("reference.csv")).unwrap(), embedded);
    assert_eq!(load_dataset("@reference").unwrap(), embedded);
}

#[test]
fn canonical_serialisations_are_fixed_points() {
    let ds = ProjectDataset::reference();
    let json = ds.to_canonical_json();
    assert_eq!(
        parse_dataset(json.as_bytes(), DatasetFormat::Json).unwrap().to_canonical_json(),
        json
    );
    let csv = ds.to_csv();
    assert_eq!(parse_dataset(csv.as_bytes(), DatasetFormat::Csv).unwrap().to_csv(), csv);
}

#[test]
fn reference_is_clean() {
    assert!(validate(&ProjectDataset::reference()).is_clean());
}

type Found = BTreeSet<(String, &'static str)>;

fn found(ds: &ProjectDataset) -> Found {
    validate(ds)
        .violations
        .into_iter()
        .map(|v| (v.location, v.rule.id()))
        .collect()
}

/// Every +1 mutation of a count or an hour figure yields exactly the
/// violations that the arithmetic predicts.
#[test]
fn single_increments_produce_exactly_the_predicted_violations() {
    let reference = ProjectDataset::reference();
    for (pi, p) in reference.iter().enumerate() {
        let tc = p.captured_total();
        let td = u64::from(p.total_defects);
        for phase in Phase::ALL {
            let loc = format!("{}/{}", p.id, phase);
            let rec = p.phase(phase);
            let spent = rec.inspection_hours + rec.testing_hours + rec.prep_hours;

            type Mutation = fn(&mut PhaseRecord);
            let count_mutations: [(&str, Mutation); 2] = [
                ("ni", |r| r.ni += 1),
                ("nt", |r| r.nt += 1),
            ];
            for (name, mutate) in count_mutations {
                let mut ds = reference.clone();
                mutate(ds.projects_mut()[pi].phase_mut(phase));
                let mut want: Found = [(loc.clone(), "severity-sum")].into();
                if tc + 1 > td {
                    want.insert((p.id.clone(), "captured-exceeds-total"));
                }
                assert_eq!(found(&ds), want, "{loc} {name}+1");
            }

            for s in Severity::ALL {
                let mut ds = reference.clone();
                *ds.projects_mut()[pi].phase_mut(phase).severities.get_mut(s) += 1;
                assert_eq!(found(&ds), [(loc.clone(), "severity-sum")].into(), "{loc} {s}+1");
            }

            let hour_mutations: [Mutation; 3] = [
                |r| r.inspection_hours += 1.0,
                |r| r.testing_hours += 1.0,
                |r| r.prep_hours += 1.0,
            ];
            for mutate in hour_mutations {
                let mut ds = reference.clone();
                mutate(ds.projects_mut()[pi].phase_mut(phase));
                let want: Found = if spent + 1.0 > rec.phase_hours {
                    [(loc.clone(), "time-budget")].into()
                } else {
                    Found::new()
                };
                assert_eq!(found(&ds), want, "{loc} hours+1");
            }
        }
    }
}

#[test]
fn seeded_corruptions() {
    let mut ds = ProjectDataset::reference();
    ds.projects_mut()[0].phase_mut(Phase::Design).severities.trivial -= 1;
    let v = validate(&ds).violations;
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].rule, Rule::SeveritySum);
    assert_eq!(v[0].location, "P1/Design");

    let mut ds = ProjectDataset::reference();
    ds.projects_mut()[2].total_defects = 1;
    let v = validate(&ds).violations;
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].rule, Rule::CapturedExceedsTotal);
}

fn arb_phase(phase: Phase) -> impl Strategy<Value = PhaseRecord> {
    (
        1.0f64..10_000.0,
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        1u32..12,
        0.0f64..20.0,
        prop::array::uniform5(0u32..200),
        0u32..200,
    )
        .prop_map(move |(hours, (i, t, p), n, exp, sev, ni_raw)| {
            let sevs = SeverityCounts {
                blocker: sev[0],
                critical: sev[1],
                major: sev[2],
                minor: sev[3],
                trivial: sev[4],
            };
            let total = sev.iter().sum::<u32>();
            let ni = ni_raw.min(total);
            PhaseRecord {
                phase,
                phase_hours: hours,
                inspection_hours: hours * i / 3.0,
                testing_hours: hours * t / 3.0,
                prep_hours: hours * p / 3.0,
                num_inspectors: n,
                experience_years: exp,
                ni,
                nt: total - ni,
                severities: sevs,
            }
        })
}

fn arb_project() -> impl Strategy<Value = ProjectRecord> {
    (
        1.0f64..50_000.0,
        0u32..100,
        arb_phase(Phase::Requirements),
        arb_phase(Phase::Design),
        arb_phase(Phase::Implementation),
    )
        .prop_map(|(total_hours, residual, r, d, i)| {
            let tc = (r.ni + r.nt + d.ni + d.nt + i.ni + i.nt).max(1);
            ProjectRecord {
                id: String::new(),
                total_hours,
                total_defects: tc + residual,
                phases: [r, d, i],
            }
        })
}

fn arb_dataset() -> impl Strategy<Value = ProjectDataset> {
    prop::collection::vec(arb_project(), 1..8).prop_map(|ps| {
        let ps = ps
            .into_iter()
            .enumerate()
            .map(|(i, mut p)| {
                p.id = format!("Q{i}");
                p
            })
            .collect();
        ProjectDataset::new(ps).unwrap()
    })
}

proptest! {
    #[test]
    fn json_round_trip(ds in arb_dataset()) {
        let back = parse_dataset(ds.to_canonical_json().as_bytes(), DatasetFormat::Json).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn csv_round_trip(ds in arb_dataset()) {
        let back = parse_dataset(ds.to_csv().as_bytes(), DatasetFormat::Csv).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn generated_datasets_validate(ds in arb_dataset()) {
        prop_assert!(validate(&ds).is_clean());
    }

    #[test]
    fn size_classes_are_monotone(a in 0.001f64..1e7, b in 0.001f64..1e7) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let rank = |s: SizeCategory| SizeCategory::ALL.iter().position(|&x| x == s).unwrap();
        prop_assert!(rank(classify_size(lo).unwrap()) <= rank(classify_size(hi).unwrap()));
    }
}

#[test]
fn size_boundaries() {
    assert_eq!(classify_size(999.999).unwrap(), SizeCategory::Small);
    assert_eq!(classify_size(1000.0).unwrap(), SizeCategory::Medium);
    assert_eq!(classify_size(5000.0).unwrap(), SizeCategory::Medium);
    assert_eq!(classify_size(5000.001).unwrap(), SizeCategory::Large);
    assert!(classify_size(0.0).is_err());
    assert!(classify_size(-3.0).is_err());
}
