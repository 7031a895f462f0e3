//! Fuzzes the exact-rational string parser used for table weights.

#![no_main]

use libfuzzer_sys::fuzz_target;
use market_core::prob::{format_rational, parse_rational};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = parse_rational(text) {
        // Round trip: formatting a parsed value must parse back equal.
        let again = parse_rational(&format_rational(&r)).expect("format output parses");
        assert_eq!(r, again);
    }
});
