#![no_main]
use impact_parity::records::{read_predictions, write_predictions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(preds) = read_predictions(data) {
        let mut out = Vec::new();
        write_predictions(&preds, &mut out).expect("write parsed predictions");
        assert_eq!(read_predictions(out.as_slice()).expect("reparse"), preds);
    }
});
