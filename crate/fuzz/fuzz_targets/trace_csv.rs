#![no_main]

use libfuzzer_sys::fuzz_target;
use vnf_harness::TraceSeries;

fuzz_target!(|data: &[u8]| {
    let Some((&chains, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let chains = usize::from(chains % 4) + 1;
    if let Ok(trace) = TraceSeries::parse_csv(text, chains) {
        assert_eq!(trace.num_chains(), chains);
        let again = TraceSeries::parse_csv(&trace.to_csv(), chains).unwrap();
        assert_eq!(again, trace);
        let _ = trace.normalize_peak(400_000.0);
        let _ = trace.pmr_rescale(4.27);
    }
});
