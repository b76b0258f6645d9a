#![no_main]

use iseq_core::dimacs::{parse_qdimacs, to_qdimacs_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = parse_qdimacs(data) {
        let text = to_qdimacs_string(&parsed.formula);
        let back = parse_qdimacs(text.as_bytes()).expect("written formula parses");
        assert_eq!(back.formula, parsed.formula);
    }
});
