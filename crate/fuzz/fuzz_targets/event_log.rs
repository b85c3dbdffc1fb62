#![no_main]

use libfuzzer_sys::fuzz_target;
use rscache::decentral::{parse_event_log, replay};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(events) = parse_event_log(text) else {
        return;
    };
    if events.len() > 4096 {
        return;
    }
    if let Ok(audit) = replay(&events, 4, 1024) {
        assert_eq!(audit.bits_total, audit.bits_per_join * audit.joins);
        if audit.ok {
            assert_eq!(
                audit.final_loads.iter().map(|&l| l as usize).sum::<usize>(),
                audit.population
            );
        }
    }
});
