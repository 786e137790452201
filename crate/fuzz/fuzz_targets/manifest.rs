#![no_main]

use libfuzzer_sys::fuzz_target;
use mipl_cdl::cli::Manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(manifest) = Manifest::parse(text) {
        let written = serde_json::to_string(&manifest).expect("manifest serializes");
        let again = Manifest::parse(&written).expect("written manifest parses");
        assert_eq!(again, manifest);
    }
});
