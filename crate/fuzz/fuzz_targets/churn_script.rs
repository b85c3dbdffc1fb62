#![no_main]

use libfuzzer_sys::fuzz_target;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rscache::ballsbins::{run_dynamic, ChurnScript};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(script) = ChurnScript::from_json(text) else {
        return;
    };
    if script.population_cap() + script.churn_steps() > 1 << 14 {
        return;
    }
    let run =
        run_dynamic(&script, 4, &mut ChaCha8Rng::seed_from_u64(0)).expect("valid script runs");
    assert_eq!(run.height_violations, 0);
    assert_eq!(run.state.population(), script.population_cap());
});
