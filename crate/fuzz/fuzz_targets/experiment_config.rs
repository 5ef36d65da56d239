#![no_main]

use bodyschema::experiment::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

// Lines before the first blank line are `key=value` overrides; the rest is the TOML document.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (head, body) = text.split_once("\n\n").unwrap_or(("", text));
    let overrides: Vec<String> = head.lines().map(str::to_string).collect();
    let _ = ExperimentConfig::parse(body);
    if let Ok(cfg) = ExperimentConfig::parse_with_overrides(body, &overrides) {
        let back = ExperimentConfig::parse(&cfg.to_toml()).expect("serialized config parses");
        assert_eq!(back.seeds, cfg.seeds);
    }
});
