#![no_main]

use libfuzzer_sys::fuzz_target;
use mipl_cdl::config::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = Config::from_toml_str(text) {
        let resolved = cfg.resolved();
        let again = Config::from_toml_str(&resolved.to_toml()).expect("resolved config parses");
        assert_eq!(again, resolved);
    }
});
