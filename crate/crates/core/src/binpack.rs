//! High-multiplicity multidimensional bin packing.
//!
//! Instances of a few types (at most four per chain in practice) are packed
//! into homogeneous servers. The search space is the set of *maximal*
//! patterns: per-server count vectors that fit, and to which no further
//! instance of a participating type can be added. Any cover by feasible
//! patterns is dominated by a cover by maximal ones, so searching over those
//! loses nothing.
//!
//! [`pack`] finds the minimum number of servers by depth-first branch and
//! bound over pattern multiplicities with two combinatorial lower bounds
//! (per resource and per type). It stops as soon as it meets the root bound.

use crate::error::{Error, Result};
use crate::model::{DemandVector, Placement, ResourceUnits, SystemConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_PATTERN_LIMIT: usize = 100_000;
pub const DEFAULT_NODE_LIMIT: u64 = 20_000_000;

/// A feasible per-server instance vector, indexed by type index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pattern {
    pub counts: Vec<u32>,
}

impl Pattern {
    pub fn load(&self, units: &ResourceUnits) -> Vec<u128> {
        units.load(&self.counts)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }
}

/// Patterns with their multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Packing {
    pub assignments: Vec<(Pattern, u32)>,
}

impl Packing {
    pub fn servers(&self) -> u64 {
        self.assignments.iter().map(|(_, k)| *k as u64).sum()
    }

    /// Instances of each type across the packing.
    pub fn totals(&self, num_types: usize) -> Vec<u64> {
        let mut t = vec![0u64; num_types];
        for (p, k) in &self.assignments {
            for (i, &c) in p.counts.iter().enumerate() {
                t[i] += c as u64 * *k as u64;
            }
        }
        t
    }

    /// One row per used server, in assignment order.
    pub fn expand(&self) -> Vec<Vec<u32>> {
        let mut rows = Vec::with_capacity(self.servers() as usize);
        for (p, k) in &self.assignments {
            for _ in 0..*k {
                rows.push(p.counts.clone());
            }
        }
        rows
    }

    /// Removes surplus instances so that each type's total equals `n`
    /// exactly. Surplus is taken from the last servers first; emptied servers
    /// disappear. Sub-vectors of feasible patterns stay feasible.
    pub fn trimmed(&self, n: &DemandVector) -> Packing {
        let mut rows = self.expand();
        let totals = self.totals(n.len());
        for (i, &need) in n.iter().enumerate() {
            let mut surplus = totals[i].saturating_sub(need as u64);
            for row in rows.iter_mut().rev() {
                if surplus == 0 {
                    break;
                }
                let take = (row[i] as u64).min(surplus);
                row[i] -= take as u32;
                surplus -= take;
            }
        }
        let mut grouped: BTreeMap<std::cmp::Reverse<Vec<u32>>, u32> = BTreeMap::new();
        for row in rows {
            if row.iter().any(|&c| c > 0) {
                *grouped.entry(std::cmp::Reverse(row)).or_default() += 1;
            }
        }
        Packing {
            assignments: grouped
                .into_iter()
                .map(|(std::cmp::Reverse(counts), k)| (Pattern { counts }, k))
                .collect(),
        }
    }

    /// The packing laid out on servers `0..servers()`, remaining servers empty.
    pub fn to_placement(&self, num_servers: usize, num_types: usize) -> Result<Placement> {
        let mut rows = self.expand();
        if rows.len() > num_servers {
            return Err(Error::Dimension {
                what: "packing servers",
                expected: num_servers,
                found: rows.len(),
            });
        }
        rows.resize(num_servers, vec![0; num_types]);
        Placement::from_rows(&rows, num_types)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PackOutcome {
    Feasible(Packing),
    Infeasible,
}

impl PackOutcome {
    pub fn feasible(self) -> Option<Packing> {
        match self {
            PackOutcome::Feasible(p) => Some(p),
            PackOutcome::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PackOptions {
    pub pattern_limit: usize,
    pub node_limit: u64,
}

impl Default for PackOptions {
    fn default() -> Self {
        PackOptions {
            pattern_limit: DEFAULT_PATTERN_LIMIT,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

/// All maximal feasible patterns over the types in `restrict_to`, in
/// ascending lexicographic order of their count vectors.
pub fn enumerate_patterns(sys: &SystemConfig, restrict_to: &[usize], limit: usize) -> Result<Vec<Pattern>> {
    let mut restrict: Vec<usize> = restrict_to.to_vec();
    restrict.sort_unstable();
    restrict.dedup();
    if restrict.is_empty() {
        return Err(Error::Input("pattern enumeration needs at least one type".into()));
    }
    if let Some(&bad) = restrict.iter().find(|&&i| i >= sys.num_types()) {
        return Err(Error::Input(format!("unknown type index {bad}")));
    }
    let units = sys.units();
    let mut out = Vec::new();
    let mut counts = vec![0u32; sys.num_types()];
    let mut load = vec![0u128; units.num_resources()];
    let mut visited: u64 = 0;
    let visit_limit = (limit as u64).saturating_mul(1000);
    enumerate_rec(
        units,
        &restrict,
        0,
        &mut counts,
        &mut load,
        &mut out,
        limit,
        &mut visited,
        visit_limit,
    )?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_rec(
    units: &ResourceUnits,
    restrict: &[usize],
    depth: usize,
    counts: &mut Vec<u32>,
    load: &mut Vec<u128>,
    out: &mut Vec<Pattern>,
    limit: usize,
    visited: &mut u64,
    visit_limit: u64,
) -> Result<()> {
    *visited += 1;
    if *visited > visit_limit {
        return Err(Error::PatternLimit { limit });
    }
    if depth == restrict.len() {
        let maximal = restrict.iter().all(|&i| !fits_one_more(units, load, i));
        if maximal && counts.iter().any(|&c| c > 0) {
            if out.len() == limit {
                return Err(Error::PatternLimit { limit });
            }
            out.push(Pattern { counts: counts.clone() });
        }
        return Ok(());
    }
    let i = restrict[depth];
    let mut c = 0u32;
    loop {
        counts[i] = c;
        enumerate_rec(
            units,
            restrict,
            depth + 1,
            counts,
            load,
            out,
            limit,
            visited,
            visit_limit,
        )?;
        if !fits_one_more(units, load, i) {
            break;
        }
        for (r, l) in load.iter_mut().enumerate() {
            *l += units.per_type[i][r] as u128;
        }
        c += 1;
    }
    for (r, l) in load.iter_mut().enumerate() {
        *l -= c as u128 * units.per_type[i][r] as u128;
    }
    counts[i] = 0;
    Ok(())
}

fn fits_one_more(units: &ResourceUnits, load: &[u128], i: usize) -> bool {
    units
        .capacity
        .iter()
        .enumerate()
        .all(|(r, &cap)| load[r] + units.per_type[i][r] as u128 <= cap as u128)
}

/// Resource lower bound on servers: `max_r ceil(sum_i n_i c_ir / C_r)`.
pub fn resource_lower_bound(n: &DemandVector, sys: &SystemConfig) -> u64 {
    let units = sys.units();
    (0..units.num_resources())
        .map(|r| {
            let need: u128 = n
                .iter()
                .enumerate()
                .map(|(i, &c)| c as u128 * units.per_type[i][r] as u128)
                .sum();
            need.div_ceil(units.capacity[r] as u128) as u64
        })
        .max()
        .unwrap_or(0)
}

/// Packs `n` into at most `U` servers using the fewest servers possible.
///
/// Among minimum-server packings, the one returned has the lexicographically
/// greatest multiplicity vector when patterns are taken in descending
/// lexicographic order.
pub fn pack(n: &DemandVector, sys: &SystemConfig, opts: &PackOptions) -> Result<PackOutcome> {
    if n.len() != sys.num_types() {
        return Err(Error::Dimension {
            what: "demand vector",
            expected: sys.num_types(),
            found: n.len(),
        });
    }
    let active: Vec<usize> = (0..n.len()).filter(|&i| n[i] > 0).collect();
    if active.is_empty() {
        return Ok(PackOutcome::Feasible(Packing::default()));
    }
    let servers = sys.num_servers() as u64;
    let root_lb = resource_lower_bound(n, sys);
    if root_lb > servers {
        return Ok(PackOutcome::Infeasible);
    }

    let mut patterns = enumerate_patterns(sys, &active, opts.pattern_limit)?;
    patterns.reverse();
    let search = Search::new(sys.units(), &patterns, &active, opts.node_limit);
    let rem: Vec<i64> = n.iter().map(|&c| c as i64).collect();
    match search.run(rem, servers, root_lb)? {
        None => Ok(PackOutcome::Infeasible),
        Some(mults) => Ok(PackOutcome::Feasible(Packing {
            assignments: patterns.into_iter().zip(mults).filter(|(_, k)| *k > 0).collect(),
        })),
    }
}

struct Search<'a> {
    units: &'a ResourceUnits,
    patterns: &'a [Pattern],
    active: &'a [usize],
    /// `suffix_max_count[j][i]`: largest count of type `i` among patterns `j..`.
    suffix_max_count: Vec<Vec<u32>>,
    /// `suffix_max_load[j][r]`: largest load on resource `r` among patterns `j..`.
    suffix_max_load: Vec<Vec<u128>>,
    node_limit: u64,
}

struct SearchState {
    best: u64,
    best_mults: Option<Vec<u32>>,
    current: Vec<u32>,
    nodes: u64,
    target: u64,
    done: bool,
}

impl<'a> Search<'a> {
    fn new(units: &'a ResourceUnits, patterns: &'a [Pattern], active: &'a [usize], node_limit: u64) -> Self {
        let m = patterns.len();
        let types = units.per_type.len();
        let resources = units.num_resources();
        let mut suffix_max_count = vec![vec![0u32; types]; m + 1];
        let mut suffix_max_load = vec![vec![0u128; resources]; m + 1];
        for j in (0..m).rev() {
            let load = patterns[j].load(units);
            let (head, tail) = suffix_max_count.split_at_mut(j + 1);
            for ((cur, next), &c) in head[j].iter_mut().zip(&tail[0]).zip(&patterns[j].counts) {
                *cur = (*next).max(c);
            }
            for r in 0..resources {
                suffix_max_load[j][r] = suffix_max_load[j + 1][r].max(load[r]);
            }
        }
        Search {
            units,
            patterns,
            active,
            suffix_max_count,
            suffix_max_load,
            node_limit,
        }
    }

    fn run(&self, rem: Vec<i64>, servers: u64, root_lb: u64) -> Result<Option<Vec<u32>>> {
        let mut st = SearchState {
            best: servers + 1,
            best_mults: None,
            current: vec![0; self.patterns.len()],
            nodes: 0,
            target: root_lb,
            done: false,
        };
        let mut rem = rem;
        self.dfs(0, &mut rem, 0, &mut st)?;
        Ok(st.best_mults)
    }

    /// Lower bound on further servers needed to cover `rem` with patterns `j..`.
    /// `None` means impossible.
    fn bound(&self, j: usize, rem: &[i64]) -> Option<u64> {
        let mut lb = 0u64;
        for &i in self.active {
            if rem[i] > 0 {
                let cap = self.suffix_max_count[j][i] as u64;
                if cap == 0 {
                    return None;
                }
                lb = lb.max((rem[i] as u64).div_ceil(cap));
            }
        }
        for r in 0..self.units.num_resources() {
            let need: u128 = self
                .active
                .iter()
                .filter(|&&i| rem[i] > 0)
                .map(|&i| rem[i] as u128 * self.units.per_type[i][r] as u128)
                .sum();
            if need > 0 {
                let cap = self.suffix_max_load[j][r];
                if cap == 0 {
                    return None;
                }
                lb = lb.max(need.div_ceil(cap) as u64);
            }
        }
        Some(lb)
    }

    fn dfs(&self, j: usize, rem: &mut Vec<i64>, used: u64, st: &mut SearchState) -> Result<()> {
        if st.done {
            return Ok(());
        }
        st.nodes += 1;
        if st.nodes > self.node_limit {
            return Err(Error::SearchBudget { limit: self.node_limit });
        }
        if self.active.iter().all(|&i| rem[i] <= 0) {
            if used < st.best {
                st.best = used;
                st.best_mults = Some(st.current.clone());
                if used <= st.target {
                    st.done = true;
                }
            }
            return Ok(());
        }
        if j == self.patterns.len() {
            return Ok(());
        }
        let Some(lb) = self.bound(j, rem) else {
            return Ok(());
        };
        if used + lb >= st.best {
            return Ok(());
        }
        let pattern = &self.patterns[j].counts;
        let mut kmax: u64 = 0;
        for &i in self.active {
            if rem[i] > 0 && pattern[i] > 0 {
                kmax = kmax.max((rem[i] as u64).div_ceil(pattern[i] as u64));
            }
        }
        kmax = kmax.min(st.best - 1 - used);
        for k in (0..=kmax).rev() {
            for &i in self.active {
                rem[i] -= k as i64 * pattern[i] as i64;
            }
            st.current[j] = k as u32;
            let r = self.dfs(j + 1, rem, used + k, st);
            st.current[j] = 0;
            for &i in self.active {
                rem[i] += k as i64 * pattern[i] as i64;
            }
            r?;
            if st.done {
                break;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_capacity, check_coverage, Cluster, VnfType};
    use num_rational::Ratio;

    fn cores_system(cores: &[f64], capacity: f64, servers: usize) -> SystemConfig {
        let types = cores
            .iter()
            .enumerate()
            .map(|(i, &c)| VnfType {
                id: i as u32 + 1,
                name: String::new(),
                demand: vec![c],
                capacity_mbps: 100.0,
                op_cost: Ratio::from_integer(1),
                deploy_cost: Ratio::from_integer(1),
            })
            .collect();
        SystemConfig::new(
            types,
            vec![],
            Cluster {
                num_servers: servers,
                capacity: vec![capacity],
            },
        )
        .unwrap()
    }

    #[test]
    fn single_type_single_pattern() {
        let sys = cores_system(&[4.0], 16.0, 1);
        let ps = enumerate_patterns(&sys, &[0], 10).unwrap();
        assert_eq!(ps, vec![Pattern { counts: vec![4] }]);
    }

    #[test]
    fn firewall_ids_lb_patterns() {
        let sys = cores_system(&[4.0, 8.0, 2.0], 16.0, 1);
        let ps = enumerate_patterns(&sys, &[0, 1, 2], 100).unwrap();
        for want in [[4, 0, 0], [0, 2, 0], [0, 0, 8], [1, 1, 2]] {
            assert!(ps.iter().any(|p| p.counts == want), "missing {want:?}");
        }
        let mut sorted = ps.clone();
        sorted.sort();
        assert_eq!(sorted, ps);
        // Every pattern fills all 16 cores here.
        for p in &ps {
            assert_eq!(p.load(sys.units()), vec![16]);
        }
    }

    #[test]
    fn restriction_zeroes_other_types() {
        let sys = cores_system(&[4.0, 8.0, 2.0], 16.0, 1);
        let ps = enumerate_patterns(&sys, &[1], 100).unwrap();
        assert_eq!(ps, vec![Pattern { counts: vec![0, 2, 0] }]);
        assert!(enumerate_patterns(&sys, &[], 100).is_err());
    }

    #[test]
    fn pattern_guard_trips() {
        let sys = cores_system(&[1.0, 1.0, 1.0], 64.0, 1);
        assert!(matches!(
            enumerate_patterns(&sys, &[0, 1, 2], 10),
            Err(Error::PatternLimit { limit: 10 })
        ));
    }

    #[test]
    fn empty_demand_is_empty_packing() {
        let sys = cores_system(&[4.0, 8.0], 16.0, 3);
        let out = pack(&DemandVector(vec![0, 0]), &sys, &PackOptions::default()).unwrap();
        assert_eq!(out, PackOutcome::Feasible(Packing::default()));
    }

    #[test]
    fn zero_servers_is_infeasible() {
        let sys = cores_system(&[4.0], 16.0, 0);
        let out = pack(&DemandVector(vec![1]), &sys, &PackOptions::default()).unwrap();
        assert_eq!(out, PackOutcome::Infeasible);
    }

    #[test]
    fn published_maximum_fits_in_thousand_servers() {
        let sys = cores_system(&[4.0, 8.0, 2.0], 16.0, 1000);
        let n = DemandVector(vec![985, 1329, 709]);
        let packing = pack(&n, &sys, &PackOptions::default()).unwrap().feasible().unwrap();
        assert!(packing.servers() <= 1000);
        let x = packing.to_placement(1000, 3).unwrap();
        assert!(check_capacity(&x, &sys));
        assert!(check_coverage(&x, &n));
    }

    #[test]
    fn trimming_hits_demand_exactly() {
        let sys = cores_system(&[4.0, 8.0, 2.0], 16.0, 10);
        let n = DemandVector(vec![5, 1, 3]);
        let packing = pack(&n, &sys, &PackOptions::default()).unwrap().feasible().unwrap();
        let trimmed = packing.trimmed(&n);
        assert_eq!(trimmed.totals(3), vec![5, 1, 3]);
        assert!(trimmed.servers() <= packing.servers());
        let x = trimmed.to_placement(10, 3).unwrap();
        assert!(check_capacity(&x, &sys));
    }

    #[test]
    fn deterministic() {
        let sys = cores_system(&[3.0, 5.0, 2.0], 11.0, 40);
        let n = DemandVector(vec![17, 9, 23]);
        let a = pack(&n, &sys, &PackOptions::default()).unwrap();
        let b = pack(&n, &sys, &PackOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
