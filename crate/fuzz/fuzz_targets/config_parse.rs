#![no_main]

use libfuzzer_sys::fuzz_target;
use phi4lab::io::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let schema = phi4lab_cli::schema();
    if let Ok(cfg) = Config::parse(text, &schema) {
        let echo = cfg.to_text();
        let again = Config::parse(&echo, &schema).expect("printed config parses");
        assert_eq!(again.to_text(), echo);
    }
});
