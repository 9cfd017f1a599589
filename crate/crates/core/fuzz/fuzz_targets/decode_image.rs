#![no_main]

use libfuzzer_sys::fuzz_target;
use snn_nlm::io::{decode_image, encode_image, FileFormat};

fuzz_target!(|data: &[u8]| {
    let Ok(img) = decode_image(data) else {
        return;
    };
    assert!(img.channels() == 1 || img.channels() == 3);
    assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));

    // Anything we decode must survive an 8-bit round trip unchanged in shape.
    if let Ok(bytes) = encode_image(&img, FileFormat::Pnm) {
        let back = decode_image(&bytes).expect("re-decode own output");
        assert_eq!((back.width(), back.height(), back.channels()), (img.width(), img.height(), img.channels()));
    }
});
