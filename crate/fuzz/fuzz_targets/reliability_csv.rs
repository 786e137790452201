#![no_main]

use libfuzzer_sys::fuzz_target;
use mipl_cdl::calibration::{parse_reliability_csv, reliability_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(report) = parse_reliability_csv(text) {
        assert!((0.0..=1.0).contains(&report.ece));
        let again = parse_reliability_csv(&reliability_csv(&report)).expect("written table parses");
        assert_eq!(again, report);
    }
});
