#![no_main]
use impact_parity::records::read_fliplog;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_fliplog(data);
});
