#![no_main]

use libfuzzer_sys::fuzz_target;
use photon_packets::io::read_series;

fuzz_target!(|data: &[u8]| {
    if let Ok((t, x)) = read_series(data, "mean_n") {
        assert_eq!(t.len(), x.len());
    }
});
