//! System model: VNF types, service chains, the cluster, per-slot placements
//! and the cost of moving between them.

mod config;
mod cost;
mod demand;
mod placement;

pub use config::{ChainSpec, ClusterSpec, ConfigFile, VnfTypeSpec};
pub use cost::{objective, slot_cost, CostReport, SlotCost};
pub use demand::DemandVector;
pub use placement::{aggregate_deployment_equal, check_capacity, check_coverage, is_migration_free, Placement};

use crate::error::{Error, Result};
use crate::exact::{self, Cost};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// One VNF class. `id` is 1-based; the type's index in [`SystemConfig::types`]
/// is `id - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VnfType {
    pub id: u32,
    pub name: String,
    /// Units of each resource one instance consumes.
    pub demand: Vec<f64>,
    /// Highest rate one instance processes.
    pub capacity_mbps: f64,
    /// Cost of keeping one instance on a server for one slot.
    pub op_cost: Cost,
    /// Cost of launching one new instance.
    pub deploy_cost: Cost,
}

impl VnfType {
    /// Ski-rental break-even horizon `max(1, floor(deploy_cost / op_cost))`.
    pub fn delta(&self) -> u32 {
        let d = exact::floor_ratio(&self.deploy_cost, &self.op_cost);
        d.clamp(1, u32::MAX as i128) as u32
    }

    pub fn index(&self) -> usize {
        self.id as usize - 1
    }
}

/// An ordered sequence of VNF types. `stages` holds type indices (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceChain {
    pub id: u32,
    pub stages: Vec<usize>,
    pub gains: Vec<f64>,
    /// Rate multiplier in front of each stage: 1 for the first, then the
    /// running product of upstream gains.
    pub cum_gains: Vec<f64>,
    cum_gains_exact: Vec<BigRational>,
}

impl ServiceChain {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn contains_type(&self, type_index: usize) -> bool {
        self.stages.contains(&type_index)
    }
}

/// Prefix products of a chain's gain factors, first entry 1.
pub fn cumulative_gains(chain: &ServiceChain) -> Vec<f64> {
    chain.cum_gains.clone()
}

fn exact_prefix_products(gains: &[f64]) -> Option<Vec<BigRational>> {
    let mut acc = BigRational::one();
    let mut out = Vec::with_capacity(gains.len());
    for &g in gains {
        out.push(acc.clone());
        acc *= exact::big_rational(g)?;
    }
    Some(out)
}

/// Homogeneous servers.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub num_servers: usize,
    pub capacity: Vec<f64>,
}

/// Resource demands and capacities rescaled to exact integers, one scale per
/// resource dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceUnits {
    /// `per_type[i][r]`
    pub per_type: Vec<Vec<u64>>,
    pub capacity: Vec<u64>,
}

impl ResourceUnits {
    pub fn num_resources(&self) -> usize {
        self.capacity.len()
    }

    /// Whether `counts` instances fit on one server.
    pub fn fits(&self, counts: &[u32]) -> bool {
        self.capacity.iter().enumerate().all(|(r, &cap)| {
            let mut load: u128 = 0;
            for (i, &c) in counts.iter().enumerate() {
                load += c as u128 * self.per_type[i][r] as u128;
            }
            load <= cap as u128
        })
    }

    pub fn load(&self, counts: &[u32]) -> Vec<u128> {
        (0..self.capacity.len())
            .map(|r| {
                counts
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| c as u128 * self.per_type[i][r] as u128)
                    .sum()
            })
            .collect()
    }
}

/// A validated system: types, chains and cluster, plus the exact derived data
/// every algorithm needs.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub types: Vec<VnfType>,
    pub chains: Vec<ServiceChain>,
    pub cluster: Cluster,
    units: ResourceUnits,
    /// For each type, `(chain index, cum_gain / capacity)` for every chain stage
    /// of that type.
    demand_terms: Vec<Vec<(usize, BigRational)>>,
}

impl SystemConfig {
    /// Builds and validates a system. `chains` are given as
    /// `(id, stage type ids, gains)` with 1-based type ids.
    pub fn new(types: Vec<VnfType>, chains: Vec<(u32, Vec<u32>, Vec<f64>)>, cluster: Cluster) -> Result<Self> {
        let mut types = types;
        types.sort_by_key(|t| t.id);
        for (k, t) in types.iter().enumerate() {
            if t.id as usize != k + 1 {
                return Err(Error::Config(format!(
                    "VNF type ids must be exactly 1..={}, found id {}",
                    types.len(),
                    t.id
                )));
            }
        }
        let r = cluster.capacity.len();
        if r == 0 {
            return Err(Error::Config("cluster has no resource dimensions".into()));
        }
        if cluster.capacity.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Config("cluster capacities must be positive".into()));
        }
        for t in &types {
            if t.demand.len() != r {
                return Err(Error::Config(format!(
                    "type {} has {} demand components, cluster has {} resources",
                    t.id,
                    t.demand.len(),
                    r
                )));
            }
            if t.demand.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                return Err(Error::Config(format!("type {} has a negative demand", t.id)));
            }
            if t.demand.iter().all(|d| *d == 0.0) {
                return Err(Error::Config(format!("type {} demands no resources", t.id)));
            }
            if !(t.capacity_mbps.is_finite() && t.capacity_mbps > 0.0) {
                return Err(Error::Config(format!("type {} capacity must be positive", t.id)));
            }
            if t.op_cost <= Cost::zero() {
                return Err(Error::Config(format!("type {} op_cost must be positive", t.id)));
            }
            if t.deploy_cost < Cost::zero() {
                return Err(Error::Config(format!("type {} deploy_cost must be nonnegative", t.id)));
            }
        }

        let units = Self::scale_resources(&types, &cluster)?;
        for (i, t) in types.iter().enumerate() {
            let mut one = vec![0u32; types.len()];
            one[i] = 1;
            if !units.fits(&one) {
                return Err(Error::Config(format!("type {} does not fit on an empty server", t.id)));
            }
        }

        let mut built = Vec::with_capacity(chains.len());
        let mut seen_ids = std::collections::BTreeSet::new();
        for (id, stage_ids, gains) in chains {
            if !seen_ids.insert(id) {
                return Err(Error::Config(format!("duplicate chain id {id}")));
            }
            if stage_ids.is_empty() {
                return Err(Error::Config(format!("chain {id} has no stages")));
            }
            if gains.len() != stage_ids.len() {
                return Err(Error::Config(format!(
                    "chain {id} has {} stages but {} gains",
                    stage_ids.len(),
                    gains.len()
                )));
            }
            if gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
                return Err(Error::Config(format!("chain {id} has a non-positive gain")));
            }
            let mut stages = Vec::with_capacity(stage_ids.len());
            for &sid in &stage_ids {
                if sid == 0 || sid as usize > types.len() {
                    return Err(Error::Config(format!("chain {id} references unknown type {sid}")));
                }
                let idx = sid as usize - 1;
                if stages.contains(&idx) {
                    return Err(Error::Config(format!("chain {id} repeats type {sid}")));
                }
                stages.push(idx);
            }
            let exact = exact_prefix_products(&gains)
                .ok_or_else(|| Error::Config(format!("chain {id} has an unrepresentable gain")))?;
            let cum_gains = exact.iter().map(|g| g.to_f64().unwrap_or(f64::NAN)).collect();
            built.push(ServiceChain {
                id,
                stages,
                gains,
                cum_gains,
                cum_gains_exact: exact,
            });
        }
        built.sort_by_key(|c| c.id);
        for (k, c) in built.iter().enumerate() {
            if c.id as usize != k + 1 {
                return Err(Error::Config(format!(
                    "chain ids must be exactly 1..={}, found id {}",
                    built.len(),
                    c.id
                )));
            }
        }

        let mut demand_terms = vec![Vec::new(); types.len()];
        for (s, chain) in built.iter().enumerate() {
            for (k, &i) in chain.stages.iter().enumerate() {
                let b = exact::big_rational(types[i].capacity_mbps)
                    .ok_or_else(|| Error::Config("unrepresentable capacity".into()))?;
                demand_terms[i].push((s, chain.cum_gains_exact[k].clone() / b));
            }
        }

        Ok(SystemConfig {
            types,
            chains: built,
            cluster,
            units,
            demand_terms,
        })
    }

    fn scale_resources(types: &[VnfType], cluster: &Cluster) -> Result<ResourceUnits> {
        let r = cluster.capacity.len();
        let mut per_type = vec![vec![0u64; r]; types.len()];
        let mut capacity = vec![0u64; r];
        for dim in 0..r {
            let mut values: Vec<f64> = types.iter().map(|t| t.demand[dim]).collect();
            values.push(cluster.capacity[dim]);
            let scaled = exact::common_integer_scale(&values)
                .ok_or_else(|| Error::Config(format!("resource {dim} cannot be represented exactly")))?;
            for (i, v) in scaled[..types.len()].iter().enumerate() {
                per_type[i][dim] = *v;
            }
            capacity[dim] = scaled[types.len()];
        }
        Ok(ResourceUnits { per_type, capacity })
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn num_servers(&self) -> usize {
        self.cluster.num_servers
    }

    pub fn units(&self) -> &ResourceUnits {
        &self.units
    }

    pub fn chain(&self, id: u32) -> Option<&ServiceChain> {
        self.chains.iter().find(|c| c.id == id)
    }

    /// Same system with a different server count.
    pub fn with_servers(&self, num_servers: usize) -> SystemConfig {
        let mut out = self.clone();
        out.cluster.num_servers = num_servers;
        out
    }

    /// Same system with every deployment cost set to `ratio * op_cost`.
    pub fn with_deploy_ratio(&self, ratio: f64) -> Result<SystemConfig> {
        let ratio = exact::cost(ratio)
            .filter(|r| *r >= Cost::zero())
            .ok_or_else(|| Error::Config(format!("bad deploy/op ratio {ratio}")))?;
        let mut out = self.clone();
        for t in &mut out.types {
            t.deploy_cost = t.op_cost * ratio;
        }
        Ok(out)
    }

    /// Restricts the system to a single chain (keeps all types).
    pub fn single_chain(&self, id: u32) -> Result<SystemConfig> {
        let pos = self
            .chains
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::Config(format!("no chain with id {id}")))?;
        let mut out = self.clone();
        out.chains = vec![self.chains[pos].clone()];
        out.demand_terms = self
            .demand_terms
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .filter(|(s, _)| *s == pos)
                    .map(|(_, k)| (0, k.clone()))
                    .collect()
            })
            .collect();
        Ok(out)
    }

    /// Largest ratio `deploy_cost / op_cost` over all types.
    pub fn max_deploy_op_ratio(&self) -> Cost {
        self.types
            .iter()
            .map(|t| t.deploy_cost / t.op_cost)
            .max()
            .unwrap_or_else(Cost::zero)
    }

    /// Minimal instance counts for one slot: for each type,
    /// `ceil(sum over chain stages of cum_gain * rate / capacity)`.
    pub fn demand(&self, rates: &[f64]) -> Result<DemandVector> {
        if rates.len() != self.chains.len() {
            return Err(Error::Dimension {
                what: "chain rates",
                expected: self.chains.len(),
                found: rates.len(),
            });
        }
        let exact_rates = rates
            .iter()
            .map(|&a| {
                if a.is_finite() && a >= 0.0 {
                    exact::big_rational(a)
                } else {
                    None
                }
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Input(format!("rates must be finite and nonnegative: {rates:?}")))?;
        self.demand_exact(&exact_rates)
    }

    pub(crate) fn demand_exact(&self, rates: &[BigRational]) -> Result<DemandVector> {
        let mut counts = Vec::with_capacity(self.types.len());
        for terms in &self.demand_terms {
            let mut total = BigRational::zero();
            for (s, k) in terms {
                total += k * &rates[*s];
            }
            let n = exact::ceil_u64(&total)
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| Error::Input("instance demand overflows u32".into()))?;
            counts.push(n);
        }
        Ok(DemandVector(counts))
    }
}
