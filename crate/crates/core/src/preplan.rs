//! Pre-planning for a single chain: the largest input rate the cluster can
//! serve, a placement that serves it, and for every type the multiset of
//! server ids that placement uses.
//!
//! Online placement only ever takes server ids out of these multisets and
//! puts them back, so every placement it produces is componentwise below the
//! maximal one. That gives capacity feasibility for free and rules out
//! migration (a type can only grow on some servers or shrink on some servers
//! within one slot, never both).

use crate::binpack::{self, PackOptions, PackOutcome, Packing};
use crate::error::{Error, Result};
use crate::model::{check_capacity, check_coverage, DemandVector, Placement, SystemConfig};
use serde::{Deserialize, Serialize};

/// Multiset of server ids for one type, with LIFO eject/insert.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerMultiset {
    initial: Vec<u32>,
    current: Vec<u32>,
    stack: Vec<u32>,
}

impl ServerMultiset {
    /// Builds the multiset holding server `u` with multiplicity `counts[u]`.
    /// The first ejections return the lowest server ids.
    pub fn from_counts(counts: &[u32]) -> Self {
        let mut stack = Vec::with_capacity(counts.iter().map(|&c| c as usize).sum());
        for (u, &c) in counts.iter().enumerate().rev() {
            for _ in 0..c {
                stack.push(u as u32);
            }
        }
        ServerMultiset {
            initial: counts.to_vec(),
            current: counts.to_vec(),
            stack,
        }
    }

    pub fn len(&self) -> usize {
        self.stack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stack.is_empty()
    }

    /// Multiplicity of each server id right now.
    pub fn counts(&self) -> &[u32] {
        &self.current
    }

    pub fn initial_counts(&self) -> &[u32] {
        &self.initial
    }

    /// Stack contents, bottom first.
    pub fn ids(&self) -> &[u32] {
        &self.stack
    }

    /// Pops `k` server ids.
    pub fn eject(&mut self, k: usize) -> Result<Vec<u32>> {
        if k > self.stack.len() {
            return Err(Error::Input(format!(
                "cannot eject {k} server ids from a multiset of {}",
                self.stack.len()
            )));
        }
        let ids = self.stack.split_off(self.stack.len() - k);
        let ids: Vec<u32> = ids.into_iter().rev().collect();
        for &u in &ids {
            self.current[u as usize] -= 1;
        }
        Ok(ids)
    }

    /// Pushes server ids back. Refuses ids that would exceed their initial
    /// multiplicity.
    pub fn insert(&mut self, ids: &[u32]) -> Result<()> {
        for (k, &u) in ids.iter().enumerate() {
            let ok = self
                .initial
                .get(u as usize)
                .is_some_and(|&init| self.current[u as usize] < init);
            if !ok {
                // Undo the part already applied so the multiset stays valid.
                for &v in ids[..k].iter().rev() {
                    self.stack.pop();
                    self.current[v as usize] -= 1;
                }
                return Err(Error::Input(format!(
                    "server {u} is not free in the pre-planned multiset"
                )));
            }
            self.current[u as usize] += 1;
            self.stack.push(u);
        }
        Ok(())
    }
}

/// Result of pre-planning one chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrePlan {
    pub chain_id: u32,
    /// Largest supportable rate, in Mbps (a multiple of `rate_step`).
    pub alpha_max: u64,
    pub rate_step: u64,
    /// The search bound itself was feasible; the true maximum may be higher.
    pub saturated: bool,
    pub max_placement: Placement,
    /// One multiset per type index (empty for types outside the chain).
    pub multisets: Vec<ServerMultiset>,
}

#[derive(Debug, Clone, Copy)]
pub struct PreplanOptions {
    /// Upper end of the search range in Mbps; a heuristic bound when `None`.
    pub max_rate_bound: Option<u64>,
    /// Rate resolution of the search in Mbps.
    pub rate_step: u64,
    pub pack: PackOptions,
}

impl Default for PreplanOptions {
    fn default() -> Self {
        PreplanOptions {
            max_rate_bound: None,
            rate_step: 1,
            pack: PackOptions::default(),
        }
    }
}

/// `10 * sum_i (U * instances of i per empty server) * max_i b_i` over the
/// chain's types: comfortably above anything the cluster can carry.
pub fn default_max_rate_bound(sys: &SystemConfig, chain_id: u32) -> Result<u64> {
    let chain = sys
        .chain(chain_id)
        .ok_or_else(|| Error::Config(format!("no chain with id {chain_id}")))?;
    let units = sys.units();
    let mut instances: u128 = 0;
    let mut b_max: f64 = 0.0;
    for &i in &chain.stages {
        let per_server = (0..units.num_resources())
            .filter(|&r| units.per_type[i][r] > 0)
            .map(|r| units.capacity[r] / units.per_type[i][r])
            .min()
            .unwrap_or(0) as u128;
        instances += per_server * sys.num_servers() as u128;
        b_max = b_max.max(sys.types[i].capacity_mbps);
    }
    let bound = 10.0 * instances as f64 * b_max.ceil();
    Ok(bound.min(u64::MAX as f64 / 4.0).max(1.0) as u64)
}

/// Bisection over integer rates for the largest rate whose demand packs into
/// the cluster.
pub fn preplan(sys: &SystemConfig, chain_id: u32, opts: &PreplanOptions) -> Result<PrePlan> {
    if opts.rate_step == 0 {
        return Err(Error::Input("rate_step must be at least 1".into()));
    }
    let single = sys.single_chain(chain_id)?;
    let bound = match opts.max_rate_bound {
        Some(b) => b,
        None => default_max_rate_bound(sys, chain_id)?,
    };
    if bound < 1 {
        return Err(Error::Input("max_rate_bound must be at least 1".into()));
    }
    let step = opts.rate_step;
    let try_rate = |units: u64| -> Result<Option<(DemandVector, Packing)>> {
        let n = single.demand(&[(units * step) as f64])?;
        Ok(match binpack::pack(&n, &single, &opts.pack)? {
            PackOutcome::Feasible(p) => Some((n, p)),
            PackOutcome::Infeasible => None,
        })
    };

    let mut hi = bound / step;
    let mut lo = 0u64;
    let mut best = try_rate(0)?.expect("zero demand always packs");
    let saturated = match try_rate(hi)? {
        Some(found) => {
            lo = hi;
            best = found;
            true
        }
        None => false,
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match try_rate(mid)? {
            Some(found) => {
                lo = mid;
                best = found;
            }
            None => hi = mid,
        }
    }

    let (n, packing) = best;
    let packing = packing.trimmed(&n);
    let max_placement = packing.to_placement(sys.num_servers(), sys.num_types())?;
    Ok(PrePlan::from_placement(
        chain_id,
        lo * step,
        step,
        saturated,
        max_placement,
    ))
}

impl PrePlan {
    fn from_placement(chain_id: u32, alpha_max: u64, rate_step: u64, saturated: bool, x: Placement) -> Self {
        let multisets = (0..x.num_types())
            .map(|i| {
                let counts: Vec<u32> = (0..x.num_servers()).map(|u| x.get(u, i)).collect();
                ServerMultiset::from_counts(&counts)
            })
            .collect();
        PrePlan {
            chain_id,
            alpha_max,
            rate_step,
            saturated,
            max_placement: x,
            multisets,
        }
    }

    /// Demand at `alpha_max`.
    pub fn max_demand(&self, sys: &SystemConfig) -> Result<DemandVector> {
        sys.single_chain(self.chain_id)?.demand(&[self.alpha_max as f64])
    }

    /// Checks a (possibly deserialized) pre-plan against a system.
    pub fn validate(&self, sys: &SystemConfig) -> Result<()> {
        let x = &self.max_placement;
        if x.num_servers() != sys.num_servers() || x.num_types() != sys.num_types() {
            return Err(Error::Input(format!(
                "pre-plan placement is {}x{}, system is {}x{}",
                x.num_servers(),
                x.num_types(),
                sys.num_servers(),
                sys.num_types()
            )));
        }
        if self.multisets.len() != sys.num_types() {
            return Err(Error::Dimension {
                what: "pre-plan multisets",
                expected: sys.num_types(),
                found: self.multisets.len(),
            });
        }
        if !check_capacity(x, sys) {
            return Err(Error::Input("pre-plan placement exceeds server capacity".into()));
        }
        if !check_coverage(x, &self.max_demand(sys)?) {
            return Err(Error::Input(
                "pre-plan placement does not cover its maximum demand".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PrePlanFile::from(self))?)
    }

    /// Parses the JSON form. The multisets come back in their initial
    /// state, rebuilt from the placement.
    pub fn from_json_str(s: &str) -> Result<PrePlan> {
        let file: PrePlanFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

/// On-disk form of a [`PrePlan`].
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrePlanFile {
    chain_id: u32,
    alpha_max: u64,
    rate_step: u64,
    saturated: bool,
    placement: Placement,
    /// Per type, the server ids (0-based) in stack order, bottom first.
    multisets: Vec<Vec<u32>>,
}

impl From<&PrePlan> for PrePlanFile {
    fn from(p: &PrePlan) -> Self {
        PrePlanFile {
            chain_id: p.chain_id,
            alpha_max: p.alpha_max,
            rate_step: p.rate_step,
            saturated: p.saturated,
            placement: p.max_placement.clone(),
            multisets: p.multisets.iter().map(|m| m.ids().to_vec()).collect(),
        }
    }
}

impl TryFrom<PrePlanFile> for PrePlan {
    type Error = Error;

    fn try_from(f: PrePlanFile) -> Result<PrePlan> {
        if f.rate_step == 0 {
            return Err(Error::Input("rate_step must be at least 1".into()));
        }
        let x = &f.placement;
        if f.multisets.len() != x.num_types() {
            return Err(Error::Dimension {
                what: "pre-plan multisets",
                expected: x.num_types(),
                found: f.multisets.len(),
            });
        }
        // Compare against the listed ids before building anything, so the
        // work stays proportional to the input size.
        for (i, ids) in f.multisets.iter().enumerate() {
            let mut counts = vec![0u32; x.num_servers()];
            for &u in ids {
                let slot = counts
                    .get_mut(u as usize)
                    .ok_or_else(|| Error::Input(format!("multiset {i} names unknown server {u}")))?;
                *slot += 1;
            }
            if (0..x.num_servers()).any(|u| counts[u] != x.get(u, i)) {
                return Err(Error::Input(format!(
                    "multiset {i} does not match the placement column"
                )));
            }
        }
        let plan = PrePlan::from_placement(f.chain_id, f.alpha_max, f.rate_step, f.saturated, f.placement);
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cluster, VnfType};
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn one_type(servers: usize) -> SystemConfig {
        SystemConfig::new(
            vec![VnfType {
                id: 1,
                name: "t".into(),
                demand: vec![2.0],
                capacity_mbps: 100.0,
                op_cost: Ratio::from_integer(1),
                deploy_cost: Ratio::from_integer(3),
            }],
            vec![(1, vec![1], vec![1.0])],
            Cluster {
                num_servers: servers,
                capacity: vec![4.0],
            },
        )
        .unwrap()
    }

    #[test]
    fn toy_bisection_matches_scan() {
        let sys = one_type(2);
        let opts = PreplanOptions {
            max_rate_bound: Some(500),
            ..Default::default()
        };
        let plan = preplan(&sys, 1, &opts).unwrap();
        // Linear scan oracle.
        let scan = (0..=500u64)
            .filter(|&m| {
                let n = sys.demand(&[m as f64]).unwrap();
                binpack::pack(&n, &sys, &PackOptions::default()).unwrap() != PackOutcome::Infeasible
            })
            .max()
            .unwrap();
        assert_eq!(scan, 400);
        assert_eq!(plan.alpha_max, 400);
        assert!(!plan.saturated);
        plan.validate(&sys).unwrap();
        assert_eq!(plan.multisets[0].len(), 4);
    }

    #[test]
    fn no_servers_means_zero_rate() {
        let sys = one_type(0);
        let plan = preplan(
            &sys,
            1,
            &PreplanOptions {
                max_rate_bound: Some(1000),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(plan.alpha_max, 0);
    }

    #[test]
    fn saturated_bound_is_flagged() {
        let sys = one_type(2);
        let plan = preplan(
            &sys,
            1,
            &PreplanOptions {
                max_rate_bound: Some(250),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(plan.saturated);
        assert_eq!(plan.alpha_max, 250);
    }

    #[test]
    fn published_multiset_example() {
        let mut s = ServerMultiset::from_counts(&[0, 2, 3, 1]);
        let before = s.counts().to_vec();
        let ids = s.eject(2).unwrap();
        assert_eq!(ids, vec![1, 1]);
        s.insert(&ids).unwrap();
        assert_eq!(s.counts(), &before[..]);
        assert!(s.eject(0).unwrap().is_empty());
        assert_eq!(s.counts(), &before[..]);
        assert!(s.eject(7).is_err());
        assert!(s.insert(&[3]).is_err());
        assert_eq!(s.counts(), &before[..]);
    }

    #[test]
    fn json_round_trip_and_rejects_tampering() {
        let sys = one_type(2);
        let plan = preplan(
            &sys,
            1,
            &PreplanOptions {
                max_rate_bound: Some(500),
                ..Default::default()
            },
        )
        .unwrap();
        let s = plan.to_json().unwrap();
        let back = PrePlan::from_json_str(&s).unwrap();
        assert_eq!(back, plan);
        let tampered = s.replacen(
            "\"multisets\": [\n    [\n      1",
            "\"multisets\": [\n    [\n      0",
            1,
        );
        assert!(PrePlan::from_json_str(&tampered).is_err());
        assert!(PrePlan::from_json_str("{}").is_err());
    }

    proptest! {
        #[test]
        fn eject_insert_stays_within_initial(ops in prop::collection::vec((any::<bool>(), 0usize..4), 1..60)) {
            let initial = vec![2u32, 0, 3, 1, 1];
            let mut s = ServerMultiset::from_counts(&initial);
            let mut out: Vec<u32> = Vec::new();
            // Reference multiset: plain counts.
            let mut reference = initial.clone();
            for (eject, k) in ops {
                if eject {
                    let k = k.min(s.len());
                    let ids = s.eject(k).unwrap();
                    for &u in &ids {
                        reference[u as usize] -= 1;
                    }
                    out.extend(ids);
                } else {
                    let k = k.min(out.len());
                    let ids: Vec<u32> = out.drain(out.len() - k..).collect();
                    s.insert(&ids).unwrap();
                    for &u in &ids {
                        reference[u as usize] += 1;
                    }
                }
                prop_assert_eq!(s.counts(), &reference[..]);
                for (c, init) in s.counts().iter().zip(&initial) {
                    prop_assert!(c <= init);
                }
            }
        }
    }
}
