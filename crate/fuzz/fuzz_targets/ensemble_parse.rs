#![no_main]

use libfuzzer_sys::fuzz_target;
use phi4lab::io::EnsembleRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = EnsembleRecord::parse_all(text) {
        let echo = EnsembleRecord::write_all(&records);
        let again = EnsembleRecord::parse_all(&echo).expect("printed records parse");
        assert_eq!(EnsembleRecord::write_all(&again), echo);
    }
});
