#![no_main]

use libfuzzer_sys::fuzz_target;
use mipl_cdl::data::{parse_dataset, write_dataset};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ds) = parse_dataset(text) {
        let written = write_dataset(&ds);
        let again = parse_dataset(&written).expect("written dataset parses");
        assert_eq!(again, ds);
    }
});
