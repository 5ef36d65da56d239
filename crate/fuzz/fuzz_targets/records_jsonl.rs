#![no_main]

use bodyschema::experiment::{parse_jsonl, summarize, write_csv, write_jsonl, Thresholds};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(records) = parse_jsonl(text) else { return };
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &records).expect("writing to memory");
    let back = parse_jsonl(std::str::from_utf8(&buf).unwrap()).expect("written records parse");
    assert_eq!(back.len(), records.len());
    write_csv(&mut Vec::new(), &records).expect("writing to memory");
    let _ = summarize(&records, &Thresholds::default());
});
