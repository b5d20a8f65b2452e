#![no_main]

use libfuzzer_sys::fuzz_target;
use photon_packets::io::{parse_protocol, write_protocol};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse_protocol(text) {
        let again = parse_protocol(&write_protocol(&p)).expect("written protocol parses");
        assert_eq!(p, again);
    }
});
