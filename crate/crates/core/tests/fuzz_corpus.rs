//! Replays the fuzz corpus seeds through the parser entry points.

use std::fs;
use std::path::PathBuf;

use impact_parity::ingest::{load_from_reader, read_dataset_csv, write_dataset_csv, DatasetSchema};
use impact_parity::model::LogisticModel;
use impact_parity::records::{read_fliplog, read_predictions, write_predictions};
use impact_parity::ParityConstraint;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn dataset_csv_seeds() {
    let mut parsed = 0;
    for (name, bytes) in seeds("dataset_csv") {
        if let Ok(ds) = read_dataset_csv(bytes.as_slice()) {
            parsed += 1;
            let mut out = Vec::new();
            write_dataset_csv(&ds, &mut out).unwrap();
            let again = read_dataset_csv(out.as_slice()).unwrap();
            assert_eq!(again.labels(), ds.labels(), "{name}");
        }
    }
    assert!(parsed >= 1);
}

#[test]
fn schema_json_seeds() {
    let results: Vec<(String, bool)> = seeds("schema_json")
        .into_iter()
        .map(|(name, bytes)| {
            let ok = DatasetSchema::from_json(&String::from_utf8_lossy(&bytes)).is_ok_and(|s| s.validate().is_ok());
            (name, ok)
        })
        .collect();
    assert!(results.iter().any(|(n, ok)| n == "income.json" && *ok));
    assert!(results.iter().any(|(n, ok)| n == "bad_version.json" && !*ok));
}

#[test]
fn model_json_seeds() {
    for (name, bytes) in seeds("model_json") {
        let text = String::from_utf8_lossy(&bytes);
        match LogisticModel::from_json(&text) {
            Ok(m) => {
                let again = LogisticModel::from_json(&m.to_json().unwrap()).unwrap();
                assert_eq!(again, m, "{name}");
            }
            Err(_) => assert_eq!(name, "mismatch.json"),
        }
    }
}

#[test]
fn predictions_and_fliplog_seeds() {
    for (name, bytes) in seeds("predictions_csv") {
        match read_predictions(bytes.as_slice()) {
            Ok(p) => {
                let mut out = Vec::new();
                write_predictions(&p, &mut out).unwrap();
                assert_eq!(read_predictions(out.as_slice()).unwrap(), p);
            }
            Err(_) => assert!(name.starts_with("bad"), "{name}"),
        }
    }
    for (name, bytes) in seeds("fliplog_csv") {
        assert_eq!(read_fliplog(bytes.as_slice()).is_ok(), !name.starts_with("bad"), "{name}");
    }
}

#[test]
fn target_spec_seeds() {
    for (name, bytes) in seeds("target_spec") {
        let text = String::from_utf8_lossy(&bytes);
        match text.parse::<ParityConstraint>() {
            Ok(t) => assert_eq!(t.to_string().parse::<ParityConstraint>().unwrap(), t, "{name}"),
            Err(_) => assert!(name == "cv_2" || name == "p-percent_abc", "{name}"),
        }
    }
}

#[test]
fn load_csv_seeds() {
    let schema = DatasetSchema::from_json(
        r#"{"version": 1, "path": "fuzz.csv",
            "label": {"column": "y", "positive": ["yes", "1"]},
            "group": {"column": "sex", "protected": "F"},
            "features": [{"name": "age", "kind": "numeric"}, {"name": "job", "kind": "categorical"}],
            "missing": {"policy": "mean_impute"}}"#,
    )
    .unwrap();
    for (name, bytes) in seeds("load_csv") {
        let res = load_from_reader(&schema, bytes.as_slice());
        assert_eq!(res.is_ok(), name == "mixed.csv", "{name}: {res:?}");
        if let Ok(l) = res {
            assert_eq!(l.dataset.len(), 3);
            assert_eq!(l.dataset.n_features(), l.encoding.width());
        }
    }
}
