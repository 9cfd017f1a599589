#![no_main]

use libfuzzer_sys::fuzz_target;
use snn_nlm::noise::RgbSigma;

fuzz_target!(|text: &str| {
    if let Ok(s) = text.parse::<RgbSigma>() {
        // Display output parses back to the same values.
        let again: RgbSigma = s.to_string().parse().expect("own output parses");
        assert_eq!(s, again);
    }
});
