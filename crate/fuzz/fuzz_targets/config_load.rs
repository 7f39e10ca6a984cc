#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // any input must parse or come back as a config error, never panic
    if let Err(e) = hilbert_bundle::scenario::parse_config(data) {
        let _ = e.to_string();
    }
});
