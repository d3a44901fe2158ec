#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // must never panic; errors are the expected outcome for junk
        let _ = icbf_cli::config::parse_config_str(text);
    }
});
