//! Fuzzes the CSV dataset reader that builds a Gaussian model from raw
//! records, covering header handling, the missing-value sentinel, and
//! column selection.

#![no_main]

use libfuzzer_sys::fuzz_target;
use market_core::gaussian::{load_dispersion_from_reader, CsvOptions};

fuzz_target!(|data: &[u8]| {
    for has_header in [false, true] {
        let opts = CsvOptions {
            has_header,
            missing_sentinel: Some("*".into()),
            expected_rows: None,
        };
        let _ = load_dispersion_from_reader(data, &[1, 3], &[2], 4, &opts);
        let _ = load_dispersion_from_reader(data, &[2], &[4, 5], 1, &opts);
    }
    let no_sentinel = CsvOptions {
        has_header: false,
        missing_sentinel: None,
        expected_rows: Some(3),
    };
    let _ = load_dispersion_from_reader(data, &[1], &[2], 3, &no_sentinel);
});
