//! JSON configuration file.
//!
//! ```json
//! {
//!   "vnf_types": [{"id": 1, "name": "firewall", "demand": [4], "capacity_mbps": 900,
//!                  "op_cost": 4, "deploy_cost": 8}],
//!   "chains": [{"id": 1, "stages": [1], "gains": [0.9]}],
//!   "cluster": {"num_servers": 1000, "capacity": [16]}
//! }
//! ```
//!
//! Unknown top-level keys are ignored so that tools can keep their own
//! sections (e.g. synthetic trace parameters) in the same file.

use super::{Cluster, SystemConfig, VnfType};
use crate::error::{Error, Result};
use crate::exact;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VnfTypeSpec {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    pub demand: Vec<f64>,
    pub capacity_mbps: f64,
    pub op_cost: f64,
    pub deploy_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub id: u32,
    pub stages: Vec<u32>,
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub num_servers: usize,
    pub capacity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub vnf_types: Vec<VnfTypeSpec>,
    pub chains: Vec<ChainSpec>,
    pub cluster: ClusterSpec,
}

impl ConfigFile {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn build(&self) -> Result<SystemConfig> {
        let types = self
            .vnf_types
            .iter()
            .map(|t| {
                let op_cost =
                    exact::cost(t.op_cost).ok_or_else(|| Error::Config(format!("type {}: bad op_cost", t.id)))?;
                let deploy_cost = exact::cost(t.deploy_cost)
                    .ok_or_else(|| Error::Config(format!("type {}: bad deploy_cost", t.id)))?;
                Ok(VnfType {
                    id: t.id,
                    name: if t.name.is_empty() {
                        format!("vnf{}", t.id)
                    } else {
                        t.name.clone()
                    },
                    demand: t.demand.clone(),
                    capacity_mbps: t.capacity_mbps,
                    op_cost,
                    deploy_cost,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let chains = self
            .chains
            .iter()
            .map(|c| (c.id, c.stages.clone(), c.gains.clone()))
            .collect();
        SystemConfig::new(
            types,
            chains,
            Cluster {
                num_servers: self.cluster.num_servers,
                capacity: self.cluster.capacity.clone(),
            },
        )
    }
}

impl SystemConfig {
    /// Parses and validates a JSON configuration.
    pub fn from_json_str(s: &str) -> Result<SystemConfig> {
        ConfigFile::from_json_str(s)?.build()
    }

    pub fn to_config_file(&self) -> ConfigFile {
        ConfigFile {
            vnf_types: self
                .types
                .iter()
                .map(|t| VnfTypeSpec {
                    id: t.id,
                    name: t.name.clone(),
                    demand: t.demand.clone(),
                    capacity_mbps: t.capacity_mbps,
                    op_cost: exact::cost_to_f64(&t.op_cost),
                    deploy_cost: exact::cost_to_f64(&t.deploy_cost),
                })
                .collect(),
            chains: self
                .chains
                .iter()
                .map(|c| ChainSpec {
                    id: c.id,
                    stages: c.stages.iter().map(|&i| i as u32 + 1).collect(),
                    gains: c.gains.clone(),
                })
                .collect(),
            cluster: ClusterSpec {
                num_servers: self.cluster.num_servers,
                capacity: self.cluster.capacity.clone(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "vnf_types": [
            {"id": 2, "name": "ids", "demand": [8], "capacity_mbps": 600, "op_cost": 8, "deploy_cost": 16},
            {"id": 1, "name": "firewall", "demand": [4], "capacity_mbps": 900, "op_cost": 4, "deploy_cost": 8}
        ],
        "chains": [{"id": 1, "stages": [1, 2], "gains": [0.9, 0.8]}],
        "cluster": {"num_servers": 10, "capacity": [16]},
        "synthetic": {"anything": true}
    }"#;

    #[test]
    fn parses_and_sorts_types() {
        let sys = SystemConfig::from_json_str(SAMPLE).unwrap();
        assert_eq!(sys.types[0].name, "firewall");
        assert_eq!(sys.types[1].id, 2);
        assert_eq!(sys.chains[0].stages, vec![0, 1]);
        assert_eq!(sys.num_servers(), 10);
    }

    #[test]
    fn round_trips_through_file_form() {
        let sys = SystemConfig::from_json_str(SAMPLE).unwrap();
        let again = sys.to_config_file().build().unwrap();
        assert_eq!(again.types, sys.types);
        assert_eq!(again.chains, sys.chains);
    }

    #[test]
    fn rejects_unknown_type_fields_and_garbage() {
        let bad = SAMPLE.replace("\"op_cost\": 8,", "\"op_cost\": 8, \"colour\": 1,");
        assert!(SystemConfig::from_json_str(&bad).is_err());
        assert!(SystemConfig::from_json_str("{").is_err());
        assert!(SystemConfig::from_json_str("[]").is_err());
    }
}
