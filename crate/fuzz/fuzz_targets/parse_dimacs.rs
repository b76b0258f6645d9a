#![no_main]

use iseq_core::dimacs::{parse_dimacs, to_qdimacs_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = parse_dimacs(data) {
        // whatever parses must survive a write/parse cycle unchanged
        let text = to_qdimacs_string(&parsed.formula);
        let back = parse_dimacs(text.as_bytes()).expect("written formula parses");
        assert_eq!(back.formula, parsed.formula);
    }
});
