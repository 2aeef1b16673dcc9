#![no_main]

use libfuzzer_sys::fuzz_target;
use vnf_harness::report::RunSummary;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(summary) = RunSummary::from_json_str(text) {
        let _ = summary.csv_row();
        let again = serde_json::to_string(&summary).unwrap();
        let _ = RunSummary::from_json_str(&again);
    }
});
