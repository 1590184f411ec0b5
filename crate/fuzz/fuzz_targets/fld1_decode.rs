#![no_main]

use libfuzzer_sys::fuzz_target;
use phi4lab::io::{decode_fld1, encode_fld1};

fuzz_target!(|data: &[u8]| {
    if let Ok(field) = decode_fld1(data) {
        assert!(field.is_finite());
        let bytes = encode_fld1(&field);
        assert_eq!(&bytes[..], data, "accepted input must re-encode to itself");
    }
});
