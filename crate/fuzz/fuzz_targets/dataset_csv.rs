#![no_main]
use impact_parity::ingest::{read_dataset_csv, write_dataset_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = read_dataset_csv(data) {
        let mut out = Vec::new();
        write_dataset_csv(&ds, &mut out).expect("write parsed dataset");
        let again = read_dataset_csv(out.as_slice()).expect("reparse written dataset");
        assert_eq!(again.labels(), ds.labels());
        assert_eq!(again.groups(), ds.groups());
    }
});
