#![no_main]
use hilbert_bundle::scenario::{parse_config, run_scenario};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(cfg) = parse_config(data) else { return };
    // keep each execution cheap
    if cfg.dim > 4 || cfg.method.steps > 2_000 || cfg.path.grid().len() > 256 {
        return;
    }
    if let Ok(trace) = run_scenario(&cfg) {
        assert_eq!(trace.len(), cfg.path.grid().len());
    }
});
