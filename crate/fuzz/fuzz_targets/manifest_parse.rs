#![no_main]

use libfuzzer_sys::fuzz_target;
use phi4lab::io::ExperimentManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = ExperimentManifest::parse(text) {
        let again = ExperimentManifest::parse(&m.to_text()).expect("printed manifest parses");
        assert_eq!(again.to_text(), m.to_text());
    }
});
