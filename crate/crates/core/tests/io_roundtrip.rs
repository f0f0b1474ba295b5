use std::path::Path;

use verity_core::alignment::{load_metrics_csv, load_mos_csv, Dimension};
use verity_core::features::{load_features, load_probs, FeatureMatrix, ProbMatrix};
use verity_core::ibs::{default_tables, load_ibs_tables, DEFAULT_TABLES_TOML};
use verity_core::raster::load_image;
use verity_core::Error;

#[test]
fn feature_text_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f = FeatureMatrix::from_rows(&[vec![1.5, -2.0, 0.25], vec![0.0, 1e-9, 3.0]], "clip-vit").unwrap();
    let path = dir.path().join("f.txt");
    std::fs::write(&path, f.to_text()).unwrap();
    let back = load_features(&path).unwrap();
    assert_eq!(back.values(), f.values());
    assert_eq!(back.source(), "clip-vit");

    let p = ProbMatrix::from_rows(&[vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
    let path = dir.path().join("p.txt");
    std::fs::write(&path, p.to_text()).unwrap();
    assert_eq!(load_probs(&path).unwrap(), p);
}

#[test]
fn malformed_feature_files_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "#features 2 2 x\n1 2\n3 oops\n").unwrap();
    match load_features(&path) {
        Err(Error::Ingest { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    std::fs::write(&path, "#probs 1 2\n0.5 0.6\n").unwrap();
    assert!(load_probs(&path).is_err());
}

#[test]
fn shipped_tables_reload_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tables.toml");
    std::fs::write(&path, DEFAULT_TABLES_TOML).unwrap();
    let tables = load_ibs_tables(&path).unwrap();
    assert_eq!(tables.len(), 6);
    assert_eq!(tables.names().collect::<Vec<_>>(), default_tables().names().collect::<Vec<_>>());
    assert!(load_ibs_tables(dir.path().join("nope.toml")).is_err());
}

#[test]
fn shipped_mos_and_metric_csv() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let mos = load_mos_csv(root.join("data/human_mos.csv")).unwrap();
    let camera: Vec<f64> = mos
        .iter()
        .filter(|r| r.model == "Camera")
        .map(|r| r.mean_score)
        .collect();
    assert_eq!(camera.len(), 3);
    assert!(mos.iter().any(|r| r.dimension == Dimension::TextImageAlignment));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(&path, "model,metric,raw\nGLIDE,fid,21.28\n").unwrap();
    assert_eq!(load_metrics_csv(&path).unwrap()[0].raw, 21.28);
}

#[test]
fn undecodable_image_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.png");
    std::fs::write(&path, b"not an image").unwrap();
    let err = load_image(&path).unwrap_err().to_string();
    assert!(err.contains("junk.png"), "{err}");
}
