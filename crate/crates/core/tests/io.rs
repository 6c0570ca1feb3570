use std::fs;

use mvgehd::graph::{read_matrix_csv, write_matrix_csv};
use mvgehd::synth::{load_cohort, save_cohort};
use mvgehd::*;
use ndarray::array;

#[test]
fn manifest_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PlantedSpec { n: 25, clusters: 3, hubs: 2, views: 3, seed: 4, ..PlantedSpec::default() };
    let (g, _) = generate_multiview::<f64>(&spec).unwrap();
    let path = save_multiview(&g, dir.path()).unwrap();
    let back: MultiViewGraph64 = load_multiview(&path).unwrap();
    assert_eq!(back, g);
}

#[test]
fn generated_files_are_byte_identical() {
    let spec = PlantedSpec { n: 20, clusters: 2, hubs: 2, views: 2, seed: 7, ..PlantedSpec::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_multiview(&generate_multiview::<f64>(&spec).unwrap().0, a.path()).unwrap();
    save_multiview(&generate_multiview::<f64>(&spec).unwrap().0, b.path()).unwrap();
    for name in ["graph.json", "view_0.csv", "view_1.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn manifest_transform_and_names() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "0, -0.5\n-0.5, 0\n").unwrap();
    fs::write(
        dir.path().join("g.json"),
        r#"{"views": ["a.csv"], "transform": "abs", "node_names": ["x", "y"]}"#,
    )
    .unwrap();
    let g: MultiViewGraph64 = load_multiview(&dir.path().join("g.json")).unwrap();
    assert_eq!(g.views()[0].as_array(), &array![[0.0, 0.5], [0.5, 0.0]]);
    assert_eq!(g.node_names().unwrap(), ["x".to_string(), "y".to_string()]);

    fs::write(dir.path().join("r.json"), r#"{"views": ["a.csv"]}"#).unwrap();
    let err = load_multiview::<f64>(&dir.path().join("r.json")).unwrap_err();
    assert!(matches!(err, Error::NegativeEntry { .. }));
}

#[test]
fn bad_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    fs::write(&p, "0,1\n1\n").unwrap();
    assert!(matches!(read_matrix_csv::<f64>(&p), Err(Error::Parse { .. })));
    fs::write(&p, "0,x\nx,0\n").unwrap();
    assert!(matches!(read_matrix_csv::<f64>(&p), Err(Error::Parse { .. })));
    assert!(matches!(read_matrix_csv::<f64>(&dir.path().join("missing.csv")), Err(Error::Io { .. })));

    fs::write(&p, "0,1\n2,0\n").unwrap();
    fs::write(dir.path().join("g.json"), r#"{"views": ["m.csv"]}"#).unwrap();
    assert!(matches!(load_multiview::<f64>(&dir.path().join("g.json")), Err(Error::Asymmetric { .. })));
    fs::write(dir.path().join("g.json"), "not json").unwrap();
    assert!(matches!(load_multiview::<f64>(&dir.path().join("g.json")), Err(Error::Parse { .. })));
}

#[test]
fn csv_round_trips_every_bit() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    let m = array![[0.1 + 0.2, 1e-300], [std::f64::consts::PI, 0.0]];
    write_matrix_csv(&p, m.view()).unwrap();
    assert_eq!(read_matrix_csv::<f64>(&p).unwrap(), m);
}

#[test]
fn cohort_files_reload() {
    let dir = tempfile::tempdir().unwrap();
    let a = PlantedSpec { n: 16, clusters: 2, hubs: 1, seed: 1, ..PlantedSpec::default() };
    let b = PlantedSpec { seed: 2, ..a.clone() };
    let (graphs, labels) = generate_cohort::<f64>(&a, &b, 2, 2).unwrap();
    let path = save_cohort(&graphs, Some(&labels), dir.path()).unwrap();
    let (back, back_labels) = load_cohort::<f64>(&path).unwrap();
    assert_eq!(back, graphs);
    assert_eq!(back_labels.unwrap(), vec![0, 0, 1, 1]);
}

#[test]
fn spec_and_truth_serialize() {
    let spec: PlantedSpec = serde_json::from_str(r#"{"n": 30, "seed": 5}"#).unwrap();
    assert_eq!(spec.clusters, PlantedSpec::default().clusters);
    let (_, truth) = generate_multiview::<f64>(&spec).unwrap();
    let json = serde_json::to_value(&truth).unwrap();
    assert_eq!(json["hub_set"].as_array().unwrap().len(), spec.hubs);
    assert_eq!(json["labels"].as_array().unwrap().len(), 30);
}
