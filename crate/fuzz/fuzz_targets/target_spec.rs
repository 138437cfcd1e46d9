#![no_main]
use impact_parity::ParityConstraint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(target) = text.parse::<ParityConstraint>() {
        let back: ParityConstraint = target.to_string().parse().expect("display round-trips");
        assert_eq!(back.kind, target.kind);
        assert_eq!(back.do_no_harm, target.do_no_harm);
    }
});
