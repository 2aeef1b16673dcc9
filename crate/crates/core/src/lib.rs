//! Online scaling and placement of virtualized network function (VNF)
//! service chains on capacity-constrained servers.
//!
//! * [`model`]: types, per-slot instance demand, cost accounting, constraint checks.
//! * [`binpack`]: pattern enumeration and exact minimum-server covering.
//! * [`preplan`]: maximum supportable rate and the per-type server multisets.
//! * [`online_ssc`]: randomized ski-rental scaling for a single chain.
//! * [`online_msc`]: repack-and-match scaling for multiple chains.
//! * [`matching`]: Kuhn-Munkres minimum-cost assignment.
//! * [`offline`]: offline schedules, lower bounds, exhaustive optimum and routing.

pub mod binpack;
pub mod error;
pub mod exact;
pub mod matching;
pub mod model;
pub mod offline;
pub mod online_msc;
pub mod online_ssc;
pub mod preplan;

pub use error::{Error, Result};
pub use exact::Cost;
pub use model::{
    check_capacity, check_coverage, cumulative_gains, slot_cost, Cluster, CostReport, DemandVector, Placement,
    ServiceChain, SystemConfig, VnfType,
};
