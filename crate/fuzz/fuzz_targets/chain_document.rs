#![no_main]

use bodyschema::schema::ChainDocument;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(doc) = ChainDocument::parse(text) else { return };
    // a parsed document must survive its own serialization
    let again = ChainDocument::parse(&doc.to_toml()).expect("serialized document parses");
    assert_eq!(again.twists.len(), doc.twists.len());
    if let Ok(gt) = doc.ground_truth(1e-4) {
        let _ = gt.true_position(&bodyschema::JointConfig::zeros(gt.joints()));
    }
});
