#![no_main]

use libfuzzer_sys::fuzz_target;
use vnf_core::preplan::PrePlan;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(plan) = PrePlan::from_json_str(text) {
        let again = PrePlan::from_json_str(&plan.to_json().unwrap()).unwrap();
        assert_eq!(again, plan);
        let mut sets = plan.multisets.clone();
        for m in &mut sets {
            let k = m.len().min(3);
            let ids = m.eject(k).unwrap();
            m.insert(&ids).unwrap();
        }
    }
});
