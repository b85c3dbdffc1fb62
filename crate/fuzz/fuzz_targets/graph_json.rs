#![no_main]

use libfuzzer_sys::fuzz_target;
use rscache::rsgraph::{scheme_params, validate_rs, RsGraph};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(graph) = RsGraph::from_json(text) else {
        return;
    };
    if graph.num_edge_slots() > 1 << 16 {
        return;
    }
    let report = validate_rs(&graph);
    assert_eq!(report.valid, scheme_params(&graph).is_ok());
    let again = RsGraph::from_json(&graph.to_json()).expect("serialized graph reparses");
    assert_eq!(again, graph);
});
