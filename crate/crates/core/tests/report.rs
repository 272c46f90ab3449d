use std::fs;

use infant_motion::classify::ClassifierConfig;
use infant_motion::data::{Sensor, SensorSet};
use infant_motion::dataset::{Dataset, SynthConfig};
use infant_motion::eval::{ablate, loso_run, LosoConfig, TrackSelection};
use infant_motion::report::{read_bundle, table1_markdown, write_bundle, Bundle, METRICS_FILE};
use infant_motion::synth::Scenario;

fn bundle() -> Bundle {
    let ds = Dataset::synthetic(&SynthConfig {
        scenario: Scenario {
            duration_s: 120.0,
            ..Scenario::default()
        },
        subjects: 3,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = LosoConfig {
        classifier: ClassifierConfig::default(),
        tracks: TrackSelection::Both,
        iar: None,
    };
    let configs = [
        SensorSet::from_sensors(&[Sensor::LeftArm]).unwrap(),
        SensorSet::from_sensors(&Sensor::ALL).unwrap(),
    ];
    let mut b = Bundle::new(serde_json::json!({ "seed": 0 }));
    b.loso = Some(loso_run(&ds, &cfg).unwrap());
    b.ablation = Some(ablate(&ds, &configs, &cfg).unwrap());
    b
}

#[test]
fn bundle_renders_and_round_trips() {
    let b = bundle();
    let dir = tempfile::tempdir().unwrap();
    let written = write_bundle(dir.path(), &b).unwrap();
    assert_eq!(read_bundle(dir.path()).unwrap(), b);

    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
    for expected in [
        METRICS_FILE,
        "table1.md",
        "confusion_posture.md",
        "confusion_movement_all_frames.csv",
        "per_class_f_posture.svg",
        "profiles_movement.svg",
        "ablation.md",
        "ablation_posture.svg",
    ] {
        assert!(names.iter().any(|n| n == expected), "{expected} missing in {names:?}");
    }

    let svgs: Vec<_> = written.iter().filter(|p| p.extension().is_some_and(|e| e == "svg")).collect();
    assert_eq!(svgs.len(), 6);
    for p in svgs {
        let text = fs::read_to_string(p).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
    }

    let csv = fs::read_to_string(dir.path().join("confusion_posture_all_frames.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.split(',').count() == 6));

    let ablation = fs::read_to_string(dir.path().join("ablation.md")).unwrap();
    assert!(ablation.contains("(baseline)"));
    assert!(ablation.contains("| 84 |") && ablation.contains("| 336 |"));
}

#[test]
fn table_layout() {
    let b = bundle();
    let table = table1_markdown(b.loso.as_ref().unwrap());
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 7);
    assert!(rows[0].starts_with("| **Full agreement frames** | **ACC** | **UAR** | **UAP** | **UAF** |"));
    assert!(rows[4].starts_with("| **All frames**"));
    for i in [2, 3, 5, 6] {
        let cells: Vec<&str> = rows[i].split('|').map(str::trim).filter(|c| !c.is_empty()).collect();
        assert_eq!(cells.len(), 5);
        assert!(cells[0].ends_with("track"));
        for c in &cells[1..] {
            let v: f64 = c.trim_end_matches('%').parse().unwrap();
            assert!((0.0..=100.0).contains(&v));
        }
    }
}

#[test]
fn rejects_foreign_bundles() {
    let dir = tempfile::tempdir().unwrap();
    assert!(read_bundle(dir.path()).is_err());
    let mut b = Bundle::new(serde_json::Value::Null);
    fs::write(dir.path().join(METRICS_FILE), serde_json::to_string(&b).unwrap()).unwrap();
    assert!(read_bundle(dir.path()).is_err(), "empty bundle");
    b.format = "something-else".into();
    fs::write(dir.path().join(METRICS_FILE), serde_json::to_string(&b).unwrap()).unwrap();
    assert!(read_bundle(dir.path()).is_err());
}
