#![no_main]

use bodyschema::EstimatorState;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(state) = EstimatorState::from_json(text) {
        let back = EstimatorState::from_json(&state.to_json()).expect("snapshot roundtrips");
        assert_eq!(back, state);
    }
});
