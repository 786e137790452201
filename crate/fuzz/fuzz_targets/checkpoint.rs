#![no_main]

use libfuzzer_sys::fuzz_target;
use mipl_cdl::model::MiplModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = MiplModel::from_checkpoint(text) {
        let written = model.to_checkpoint();
        let again = MiplModel::from_checkpoint(&written).expect("written checkpoint loads");
        assert_eq!(again.to_checkpoint(), written);
    }
});
