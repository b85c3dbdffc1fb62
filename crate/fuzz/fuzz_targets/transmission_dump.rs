#![no_main]

use libfuzzer_sys::fuzz_target;
use rscache::codec::{parse_dump, PayloadBlock};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(dump) = parse_dump(text) else { return };
    if let Ok(block) = PayloadBlock::from_dump(&dump, 4, 8) {
        assert_eq!(block.len(), 4);
        for t in &dump {
            assert_eq!(block.get(t.matching_index), t.payload.as_slice());
        }
    }
});
