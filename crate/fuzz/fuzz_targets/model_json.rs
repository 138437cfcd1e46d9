#![no_main]
use impact_parity::model::LogisticModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(model) = LogisticModel::from_json(text) {
        let json = model.to_json().expect("serialise parsed model");
        let _ = LogisticModel::from_json(&json).expect("reparse serialised model");
    }
});
