//! Bundled configurations: 16-core servers with firewall (4 cores,
//! 900 Mbps), IDS (8 cores, 600 Mbps), load balancer and NAT (2 cores,
//! 900 Mbps each). Operational cost equals the core count; deployment cost
//! starts equal to it and is usually overridden with a deploy/op ratio.

use crate::error::Result;
use vnf_core::SystemConfig;

pub const SINGLE_CHAIN_JSON: &str = include_str!("../configs/single_chain.json");
pub const THREE_CHAIN_JSON: &str = include_str!("../configs/three_chain.json");

/// Chain firewall -> IDS -> load balancer on 1000 servers.
pub fn single_chain() -> Result<SystemConfig> {
    Ok(SystemConfig::from_json_str(SINGLE_CHAIN_JSON)?)
}

/// Chains firewall -> NAT, firewall -> IDS and firewall -> IDS -> load
/// balancer on 1000 servers.
pub fn three_chain() -> Result<SystemConfig> {
    Ok(SystemConfig::from_json_str(THREE_CHAIN_JSON)?)
}
