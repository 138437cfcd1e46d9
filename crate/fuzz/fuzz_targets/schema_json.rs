#![no_main]
use impact_parity::ingest::DatasetSchema;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(schema) = DatasetSchema::from_json(text) {
        let _ = schema.validate();
        let _ = schema.data_path();
    }
});
