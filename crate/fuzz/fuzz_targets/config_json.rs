#![no_main]

use libfuzzer_sys::fuzz_target;
use vnf_core::SystemConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sys) = SystemConfig::from_json_str(text) {
        // A validated config must survive a round trip and answer demand queries.
        let again = serde_json::to_string(&sys.to_config_file()).unwrap();
        SystemConfig::from_json_str(&again).unwrap();
        let _ = sys.demand(&vec![1000.0; sys.chains.len()]);
    }
});
