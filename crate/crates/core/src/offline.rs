//! Offline reference solutions: the per-type ski-rental optimum, a lower
//! bound on the joint problem, an exhaustive exact solver for toy instances,
//! and a routing reconstruction that turns any feasible placement into
//! explicit per-server traffic splits.

use crate::error::{Error, Result};
use crate::exact::{self, Cost};
use crate::model::{check_capacity, check_coverage, DemandVector, Placement, SystemConfig, VnfType};
use num_traits::Zero;
use std::collections::HashMap;

/// Optimal instance counts for one type when placement is ignored.
///
/// Every instance level `k` is needed in the slots where `n(t) >= k`. Across
/// an idle gap of `g` slots a level stays alive iff `g * op <= deploy`, so
/// `x(t)` is the largest `min(n(t1), n(t2))` over demand pairs `t1 < t < t2`
/// at most `floor(deploy / op) + 1` slots apart, or `n(t)` itself.
pub fn offline_type_schedule(series: &[u32], ty: &VnfType) -> (Vec<u32>, Cost) {
    let t_len = series.len();
    let keep = exact::floor_ratio(&ty.deploy_cost, &ty.op_cost).clamp(0, t_len as i128) as usize;
    let mut x = series.to_vec();
    let mut ahead = Vec::with_capacity(keep);
    for t in 0..t_len {
        // ahead[k - 1] = max n over t+1 ..= t+k
        ahead.clear();
        let mut m = 0;
        for k in 1..=keep {
            if let Some(&v) = series.get(t + k) {
                m = m.max(v);
            }
            ahead.push(m);
        }
        for d in 1..=keep.min(t) {
            // t1 = t - d; the gap from t1 to t2 is at most `keep` slots.
            let reach = keep + 1 - d;
            if reach == 0 {
                break;
            }
            let bridged = series[t - d].min(ahead[reach - 1]);
            x[t] = x[t].max(bridged);
        }
    }
    let cost = type_cost(&x, ty);
    (x, cost)
}

/// Aggregate cost of a per-type count series.
pub fn type_cost(x: &[u32], ty: &VnfType) -> Cost {
    let mut prev = 0u32;
    let mut held: i128 = 0;
    let mut launched: i128 = 0;
    for &v in x {
        held += i128::from(v);
        launched += i128::from(v.saturating_sub(prev));
        prev = v;
    }
    ty.op_cost * held + ty.deploy_cost * launched
}

/// Sum over types of the per-type optimum. Drops server capacities and
/// charges only aggregate launches, so it never exceeds the cost of any
/// feasible trajectory.
pub fn offline_lower_bound(series: &[DemandVector], types: &[VnfType]) -> Result<Cost> {
    let mut total = Cost::zero();
    for (i, ty) in types.iter().enumerate() {
        let column = series
            .iter()
            .map(|n| {
                n.get(i).copied().ok_or(Error::Dimension {
                    what: "demand vector",
                    expected: types.len(),
                    found: n.len(),
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        total += offline_type_schedule(&column, ty).1;
    }
    Ok(total)
}

pub const EXHAUSTIVE_MAX_SERVERS: usize = 3;
pub const EXHAUSTIVE_MAX_SLOTS: usize = 6;
pub const EXHAUSTIVE_MAX_INSTANCES: u64 = 6;

/// Exact optimum of the joint placement problem by shortest path over slots.
///
/// States are placements up to server permutation (rows sorted). No cell ever
/// needs more instances of a type than that type's peak demand: capping every
/// cell at the peak keeps coverage and never raises either cost term. The
/// returned trajectory is a concrete placement sequence achieving the cost.
pub fn exhaustive_offline(series: &[DemandVector], sys: &SystemConfig) -> Result<(Vec<Placement>, Cost)> {
    let servers = sys.num_servers();
    let types = sys.num_types();
    if servers > EXHAUSTIVE_MAX_SERVERS {
        return Err(Error::ScaleGuard(format!(
            "{servers} servers, at most {EXHAUSTIVE_MAX_SERVERS}"
        )));
    }
    if series.len() > EXHAUSTIVE_MAX_SLOTS {
        return Err(Error::ScaleGuard(format!(
            "{} slots, at most {EXHAUSTIVE_MAX_SLOTS}",
            series.len()
        )));
    }
    for n in series {
        if n.len() != types {
            return Err(Error::Dimension {
                what: "demand vector",
                expected: types,
                found: n.len(),
            });
        }
        if n.total() > EXHAUSTIVE_MAX_INSTANCES {
            return Err(Error::ScaleGuard(format!(
                "{} instances in one slot, at most {EXHAUSTIVE_MAX_INSTANCES}",
                n.total()
            )));
        }
    }
    if series.is_empty() {
        return Ok((Vec::new(), Cost::zero()));
    }

    let peak: Vec<u32> = (0..types)
        .map(|i| series.iter().map(|n| n[i]).max().unwrap_or(0))
        .collect();
    let rows = feasible_rows(&peak, sys);
    let states = row_multisets(&rows, servers);
    let deploy: Vec<Cost> = sys.types.iter().map(|t| t.deploy_cost).collect();
    let op: Vec<Cost> = sys.types.iter().map(|t| t.op_cost).collect();
    let op_cost = |s: &[Vec<u32>]| -> Cost {
        s.iter()
            .flat_map(|r| r.iter().zip(&op).map(|(&c, &w)| w * i128::from(c)))
            .sum()
    };

    let empty = vec![vec![0u32; types]; servers];
    // layers[t] = (state index, best cost, predecessor in layer t-1)
    let mut layers: Vec<Vec<(usize, Cost, usize)>> = Vec::with_capacity(series.len());
    for (t, n) in series.iter().enumerate() {
        let mut layer = Vec::new();
        for (s, state) in states.iter().enumerate() {
            let x = Placement::from_rows(state, types)?;
            if !check_coverage(&x, n) {
                continue;
            }
            let hold = op_cost(state);
            let best = if t == 0 {
                Some((min_launch_cost(&empty, state, &deploy), 0))
            } else {
                layers[t - 1]
                    .iter()
                    .enumerate()
                    .map(|(k, &(p, c, _))| (c + min_launch_cost(&states[p], state, &deploy), k))
                    .min_by(|a, b| a.0.cmp(&b.0))
            };
            if let Some((c, pred)) = best {
                layer.push((s, c + hold, pred));
            }
        }
        if layer.is_empty() {
            return Err(Error::Overloaded {
                demand: n.to_vec(),
                servers,
            });
        }
        layers.push(layer);
    }

    let last = layers.last().expect("nonempty series");
    let (mut k, _) = last
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.cmp(&b.1 .1))
        .expect("nonempty layer");
    let cost = last[k].1;
    let mut canonical = vec![Vec::new(); series.len()];
    for t in (0..series.len()).rev() {
        let (s, _, pred) = layers[t][k];
        canonical[t] = states[s].clone();
        k = pred;
    }

    // Lay each canonical state out against the actual previous placement.
    let mut trajectory = Vec::with_capacity(series.len());
    let mut prev = empty;
    for state in canonical {
        let order = best_permutation(&prev, &state, &deploy);
        let laid: Vec<Vec<u32>> = order.iter().map(|&j| state[j].clone()).collect();
        let x = Placement::from_rows(&laid, types)?;
        debug_assert!(check_capacity(&x, sys));
        trajectory.push(x);
        prev = laid;
    }
    Ok((trajectory, cost))
}

/// All single-server rows with `row[i] <= cap[i]` that fit the capacity.
fn feasible_rows(cap: &[u32], sys: &SystemConfig) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut row = vec![0u32; cap.len()];
    fn rec(i: usize, row: &mut Vec<u32>, cap: &[u32], sys: &SystemConfig, out: &mut Vec<Vec<u32>>) {
        if i == cap.len() {
            out.push(row.clone());
            return;
        }
        for c in 0..=cap[i] {
            row[i] = c;
            if !sys.units().fits(row) {
                break;
            }
            rec(i + 1, row, cap, sys, out);
        }
        row[i] = 0;
    }
    rec(0, &mut row, cap, sys, &mut out);
    out
}

/// Multisets of `k` rows, each listed in non-increasing row order.
fn row_multisets(rows: &[Vec<u32>], k: usize) -> Vec<Vec<Vec<u32>>> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| b.cmp(a));
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(k);
    fn rec(start: usize, k: usize, sorted: &[Vec<u32>], pick: &mut Vec<usize>, out: &mut Vec<Vec<Vec<u32>>>) {
        if pick.len() == k {
            out.push(pick.iter().map(|&j| sorted[j].clone()).collect());
            return;
        }
        for j in start..sorted.len() {
            pick.push(j);
            rec(j, k, sorted, pick, out);
            pick.pop();
        }
    }
    rec(0, k, &sorted, &mut pick, &mut out);
    out
}

fn launch_cost(prev: &[u32], cur: &[u32], deploy: &[Cost]) -> Cost {
    cur.iter()
        .zip(prev)
        .zip(deploy)
        .map(|((&c, &p), &w)| w * i128::from(c.saturating_sub(p)))
        .sum()
}

/// `order[u]` is the row of `cur` placed on server `u`.
fn best_permutation(prev: &[Vec<u32>], cur: &[Vec<u32>], deploy: &[Cost]) -> Vec<usize> {
    let n = cur.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost: Option<Cost> = None;
    loop {
        let c: Cost = (0..n).map(|u| launch_cost(&prev[u], &cur[perm[u]], deploy)).sum();
        if best_cost.is_none_or(|b| c < b) {
            best_cost = Some(c);
            best = perm.clone();
        }
        if !next_permutation(&mut perm) {
            return best;
        }
    }
}

fn min_launch_cost(prev: &[Vec<u32>], cur: &[Vec<u32>], deploy: &[Cost]) -> Cost {
    let order = best_permutation(prev, cur, deploy);
    (0..cur.len())
        .map(|u| launch_cost(&prev[u], &cur[order[u]], deploy))
        .sum()
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// One end of a routed flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    /// Traffic entering the chain.
    Source,
    Instance {
        server: usize,
        type_index: usize,
    },
    /// Traffic leaving the last stage.
    Sink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub chain_id: u32,
    pub from: Endpoint,
    pub to: Endpoint,
    pub rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Routing {
    pub flows: Vec<Flow>,
}

/// Largest relative violation of each routing constraint.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    /// Shortfall of traffic admitted at the source.
    pub input: f64,
    /// Mismatch between outflow and gain times inflow at an instance group.
    pub conservation: f64,
    /// Inflow beyond the processing capacity of the instances on a server.
    pub capacity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.input.max(self.conservation).max(self.capacity)
    }
}

/// Splits every chain's traffic across the servers hosting each stage in
/// proportion to their instance counts. Because each type's total inflow is
/// at most its instance count times its capacity, every server gets at most
/// its share of that bound.
pub fn proportional_routing(x: &Placement, sys: &SystemConfig, rates: &[f64]) -> Result<Routing> {
    if rates.len() != sys.chains.len() {
        return Err(Error::Dimension {
            what: "chain rates",
            expected: sys.chains.len(),
            found: rates.len(),
        });
    }
    if x.num_types() != sys.num_types() {
        return Err(Error::Dimension {
            what: "placement types",
            expected: sys.num_types(),
            found: x.num_types(),
        });
    }
    let totals = x.column_sums();
    let hosts = |i: usize| -> Vec<(usize, f64)> {
        (0..x.num_servers())
            .filter(|&u| x.get(u, i) > 0)
            .map(|u| (u, f64::from(x.get(u, i)) / totals[i] as f64))
            .collect()
    };
    let mut flows = Vec::new();
    for (chain, &alpha) in sys.chains.iter().zip(rates) {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Input(format!("bad rate {alpha} for chain {}", chain.id)));
        }
        if alpha == 0.0 {
            continue;
        }
        // Inflow of the current stage at each hosting server.
        let mut upstream: Vec<(Endpoint, f64)> = vec![(Endpoint::Source, alpha)];
        for (k, &i) in chain.stages.iter().enumerate() {
            let shares = hosts(i);
            if shares.is_empty() {
                return Err(Error::Unroutable {
                    chain_id: chain.id,
                    type_id: i as u32 + 1,
                });
            }
            let mut inflow = vec![0.0; shares.len()];
            for &(from, out) in &upstream {
                for (s, &(v, share)) in shares.iter().enumerate() {
                    let rate = out * share;
                    inflow[s] += rate;
                    flows.push(Flow {
                        chain_id: chain.id,
                        from,
                        to: Endpoint::Instance {
                            server: v,
                            type_index: i,
                        },
                        rate,
                    });
                }
            }
            let gain = chain.gains[k];
            upstream = shares
                .iter()
                .zip(inflow)
                .map(|(&(v, _), r)| {
                    (
                        Endpoint::Instance {
                            server: v,
                            type_index: i,
                        },
                        r * gain,
                    )
                })
                .collect();
        }
        for (from, out) in upstream {
            flows.push(Flow {
                chain_id: chain.id,
                from,
                to: Endpoint::Sink,
                rate: out,
            });
        }
    }
    Ok(Routing { flows })
}

impl Routing {
    /// Evaluates admission, conservation and capacity from the flows alone.
    pub fn residuals(&self, x: &Placement, sys: &SystemConfig, rates: &[f64]) -> Residuals {
        let mut admitted: HashMap<u32, f64> = HashMap::new();
        let mut into: HashMap<(u32, usize, usize), f64> = HashMap::new();
        let mut out_of: HashMap<(u32, usize, usize), f64> = HashMap::new();
        let mut load: HashMap<(usize, usize), f64> = HashMap::new();
        for f in &self.flows {
            if f.from == Endpoint::Source {
                *admitted.entry(f.chain_id).or_default() += f.rate;
            }
            if let Endpoint::Instance { server, type_index } = f.to {
                *into.entry((f.chain_id, server, type_index)).or_default() += f.rate;
                *load.entry((server, type_index)).or_default() += f.rate;
            }
            if let Endpoint::Instance { server, type_index } = f.from {
                *out_of.entry((f.chain_id, server, type_index)).or_default() += f.rate;
            }
        }
        let mut r = Residuals::default();
        for (chain, &alpha) in sys.chains.iter().zip(rates) {
            if alpha > 0.0 {
                let got = admitted.get(&chain.id).copied().unwrap_or(0.0);
                r.input = r.input.max((alpha - got).max(0.0) / alpha);
            }
        }
        for (&(chain_id, u, i), &inflow) in &into {
            let Some(chain) = sys.chain(chain_id) else {
                r.conservation = f64::INFINITY;
                continue;
            };
            let Some(k) = chain.stages.iter().position(|&s| s == i) else {
                r.conservation = f64::INFINITY;
                continue;
            };
            let expected = chain.gains[k] * inflow;
            let actual = out_of.get(&(chain_id, u, i)).copied().unwrap_or(0.0);
            let scale = expected.abs().max(actual.abs());
            if scale > 0.0 {
                r.conservation = r.conservation.max((actual - expected).abs() / scale);
            }
        }
        for (&(chain_id, u, i), &outflow) in &out_of {
            if outflow > 0.0 && !into.contains_key(&(chain_id, u, i)) {
                r.conservation = f64::INFINITY;
            }
        }
        for (&(u, i), &inflow) in &load {
            let cap = f64::from(x.get(u, i)) * sys.types[i].capacity_mbps;
            let excess = (inflow - cap).max(0.0);
            if excess > 0.0 {
                r.capacity = r.capacity.max(if cap > 0.0 { excess / cap } else { f64::INFINITY });
            }
        }
        r
    }
}
