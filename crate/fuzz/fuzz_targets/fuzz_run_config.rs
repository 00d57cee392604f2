#![no_main]

use libfuzzer_sys::fuzz_target;

// The run-config parser must reject arbitrary input with an error, never a
// panic: strict key checking, per-model parameter validation and all the
// positivity constraints run on whatever bytes arrive here.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = hydrolab::config::RunConfig::from_json_str(text);
    }
});
