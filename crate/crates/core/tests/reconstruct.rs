use railalign::alignment::{assemble, to_geojson, to_ifc_minimal, Alignment};
use railalign::evaluation::{evaluate, PairingMode};
use railalign::geom::Point2;
use railalign::pcd_io::{read_las, write_las, DEFAULT_EPSG};
use railalign::pipeline::{reconstruct, PipelineConfig, PipelineError};
use railalign::synthetic::{ribbon_cloud, transition_curve, CurveSpec, RibbonSpec};

fn curve(spec: &CurveSpec) -> Alignment {
    assemble(&transition_curve(spec), None, DEFAULT_EPSG, "truth").unwrap()
}

fn kinds(a: &Alignment) -> Vec<&'static str> {
    a.horizontal.iter().map(|h| h.kind.ifc_name()).collect()
}

fn truth_vertices(a: &Alignment) -> Vec<Point2> {
    (0..=a.total_length() as usize).map(|s| a.point_at_station(s as f64).0).collect()
}

const EXPECTED: [&str; 5] = ["LINE", "CLOTHOID", "CIRCULARARC", "CLOTHOID", "LINE"];

#[test]
fn transition_curve_survives_las_and_reconstruction() {
    let truth = curve(&CurveSpec::default());
    let cloud = ribbon_cloud(&truth, &RibbonSpec::default()).unwrap();
    let cloud = read_las(&write_las(&cloud).unwrap(), DEFAULT_EPSG).unwrap();
    let rec = reconstruct(&cloud, &PipelineConfig::default(), "recovered").unwrap();
    let a = &rec.alignment;
    assert_eq!(kinds(a), EXPECTED);
    // The chain may run in either direction, which flips the turn sign.
    assert!((a.horizontal[2].start_radius.abs() - 800.0).abs() <= 5.0, "{}", a.horizontal[2].start_radius);
    let (gap, kink) = a.join_errors();
    assert!(gap < 1e-6 && kink < 1e-6, "{gap} {kink}");
    let report = evaluate(a, &truth_vertices(&truth), PairingMode::NearestPoint).unwrap();
    assert!(report.rmsd < 1.0, "{}", report.rmsd);

    let profile = rec.profile.as_ref().expect("heights along the track");
    let spec = RibbonSpec::default();
    for s in [100.0, 800.0, 1500.0] {
        let (p, _) = a.point_at_station(s);
        let station = (0..=1640)
            .map(|k| k as f64)
            .min_by(|x, y| truth.point_at_station(*x).0.distance(p).total_cmp(&truth.point_at_station(*y).0.distance(p)))
            .unwrap();
        let expected = spec.base_height_m + spec.grade * station;
        assert!((profile.height_at(s) - expected).abs() < 0.5, "{s}: {} vs {expected}", profile.height_at(s));
    }
}

#[test]
fn right_hand_curve_with_other_radius() {
    let spec = CurveSpec {
        heading: -1.2,
        radius_m: -1200.0,
        arc_m: 500.0,
        transition_m: 100.0,
        ..CurveSpec::default()
    };
    let truth = curve(&spec);
    let cloud = ribbon_cloud(&truth, &RibbonSpec { seed: 11, ..RibbonSpec::default() }).unwrap();
    let a = reconstruct(&cloud, &PipelineConfig::default(), "recovered").unwrap().alignment;
    assert_eq!(kinds(&a), EXPECTED);
    let r = a.horizontal[2].start_radius;
    assert!((r.abs() - 1200.0).abs() <= 5.0, "{r}");
    let report = evaluate(&a, &truth_vertices(&truth), PairingMode::NearestPoint).unwrap();
    assert!(report.rmsd < 1.0, "{}", report.rmsd);
}

#[test]
fn arcs_under_twenty_degrees_become_clothoids() {
    let spec = CurveSpec {
        radius_m: 1200.0,
        arc_m: 300.0,
        transition_m: 100.0,
        ..CurveSpec::default()
    };
    let truth = curve(&spec);
    let cloud = ribbon_cloud(&truth, &RibbonSpec::default()).unwrap();
    let a = reconstruct(&cloud, &PipelineConfig::default(), "recovered").unwrap().alignment;
    let k = kinds(&a);
    assert!(!k.contains(&"CIRCULARARC"), "{k:?}");
    assert_eq!((k[0], k[k.len() - 1]), ("LINE", "LINE"));
    let report = evaluate(&a, &truth_vertices(&truth), PairingMode::NearestPoint).unwrap();
    assert!(report.rmsd < 1.0, "{}", report.rmsd);
}

#[test]
fn reconstruction_is_deterministic() {
    let truth = curve(&CurveSpec::default());
    let cloud = ribbon_cloud(&truth, &RibbonSpec { seed: 3, ..RibbonSpec::default() }).unwrap();
    let cfg = PipelineConfig::default();
    let a = reconstruct(&cloud, &cfg, "x").unwrap().alignment;
    let b = reconstruct(&cloud, &cfg, "x").unwrap().alignment;
    assert_eq!(to_ifc_minimal(&a), to_ifc_minimal(&b));
    assert_eq!(to_geojson(&a, 2.0), to_geojson(&b, 2.0));
}

#[test]
fn unmatched_classes_are_reported() {
    let truth = curve(&CurveSpec::default());
    let cloud = ribbon_cloud(&truth, &RibbonSpec::default()).unwrap();
    let cfg = PipelineConfig {
        classes: vec![9],
        ..PipelineConfig::default()
    };
    assert!(matches!(reconstruct(&cloud, &cfg, "x"), Err(PipelineError::EmptyClass(c)) if c == vec![9]));
}
