#![no_main]
use std::sync::OnceLock;

use impact_parity::ingest::{load_from_reader, DatasetSchema};
use libfuzzer_sys::fuzz_target;

const SCHEMA: &str = r#"{
  "version": 1,
  "path": "fuzz.csv",
  "label": {"column": "y", "positive": ["yes", "1"]},
  "group": {"column": "sex", "protected": "F"},
  "features": [
    {"name": "age", "kind": "numeric"},
    {"name": "job", "kind": "categorical"}
  ],
  "missing": {"policy": "mean_impute"}
}"#;

fn schema() -> &'static DatasetSchema {
    static S: OnceLock<DatasetSchema> = OnceLock::new();
    S.get_or_init(|| DatasetSchema::from_json(SCHEMA).expect("fixed schema"))
}

fuzz_target!(|data: &[u8]| {
    if let Ok(loaded) = load_from_reader(schema(), data) {
        assert_eq!(loaded.dataset.n_features(), loaded.encoding.width());
    }
});
