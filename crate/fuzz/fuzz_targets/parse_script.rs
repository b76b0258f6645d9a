#![no_main]

use iseq_core::script::{parse_script, script_to_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(script) = parse_script(data) {
        let text = script_to_string(&script);
        let back = parse_script(text.as_bytes()).expect("serialized script parses");
        assert_eq!(back, script);
        assert_eq!(script_to_string(&back), text);
    }
});
