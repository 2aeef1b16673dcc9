//! Online repacking for several service chains sharing the cluster.
//!
//! Each slot the minimal instance counts are packed into server patterns and
//! the patterns are assigned to physical servers by a minimum-weight perfect
//! matching. The weight of putting pattern `V` on server `u` is the cost of
//! the instances `V` adds on top of what `u` held in the previous slot.

use crate::binpack::{pack, PackOptions, PackOutcome, Pattern};
use crate::error::{Error, Result};
use crate::matching::min_cost_assignment;
use crate::model::{DemandVector, Placement, SystemConfig, VnfType};
use num_integer::Integer;
use std::collections::HashMap;

/// Deployment costs scaled to integers by their common denominator.
fn integer_weights(types: &[VnfType]) -> Result<Vec<i64>> {
    let lcm = types.iter().fold(1i128, |acc, t| acc.lcm(t.deploy_cost.denom()));
    types
        .iter()
        .map(|t| {
            let w = t.deploy_cost.numer() * (lcm / t.deploy_cost.denom());
            i64::try_from(w).map_err(|_| Error::ScaleGuard("deployment cost too large to scale".into()))
        })
        .collect()
}

fn launch_weight(pattern: &[u32], prev: &[u32], weights: &[i64]) -> Result<i64> {
    let mut total: i64 = 0;
    for ((&v, &x), &w) in pattern.iter().zip(prev).zip(weights) {
        let added = i64::from(v.saturating_sub(x));
        total = added
            .checked_mul(w)
            .and_then(|c| total.checked_add(c))
            .ok_or_else(|| Error::ScaleGuard("matching weight overflow".into()))?;
    }
    Ok(total)
}

/// Assigns one pattern to each server, minimising the deployment cost
/// against `prev`.
///
/// Patterns equal to some server's previous row are pinned to that server
/// (lowest index first). This never loses optimality because launch weights
/// satisfy the triangle inequality, and it shrinks the assignment problem to
/// the servers whose contents actually change. The rest is solved with
/// Kuhn-Munkres.
pub fn match_patterns(prev: &Placement, patterns: &[Pattern], types: &[VnfType]) -> Result<Placement> {
    let (servers, num_types) = (prev.num_servers(), prev.num_types());
    if patterns.len() != servers {
        return Err(Error::Dimension {
            what: "pattern list",
            expected: servers,
            found: patterns.len(),
        });
    }
    if types.len() != num_types {
        return Err(Error::Dimension {
            what: "type list",
            expected: num_types,
            found: types.len(),
        });
    }
    if let Some(p) = patterns.iter().find(|p| p.counts.len() != num_types) {
        return Err(Error::Dimension {
            what: "pattern",
            expected: num_types,
            found: p.counts.len(),
        });
    }

    let mut by_row: HashMap<&[u32], Vec<usize>> = HashMap::new();
    for u in (0..servers).rev() {
        by_row.entry(prev.row(u)).or_default().push(u);
    }
    let mut assigned: Vec<Option<usize>> = vec![None; servers];
    let mut server_taken = vec![false; servers];
    for (j, p) in patterns.iter().enumerate() {
        if let Some(u) = by_row.get_mut(p.counts.as_slice()).and_then(Vec::pop) {
            assigned[j] = Some(u);
            server_taken[u] = true;
        }
    }

    let open_patterns: Vec<usize> = (0..servers).filter(|&j| assigned[j].is_none()).collect();
    if !open_patterns.is_empty() {
        let open_servers: Vec<usize> = (0..servers).filter(|&u| !server_taken[u]).collect();
        let weights = integer_weights(types)?;
        let cost = open_patterns
            .iter()
            .map(|&j| {
                open_servers
                    .iter()
                    .map(|&u| launch_weight(&patterns[j].counts, prev.row(u), &weights))
                    .collect::<Result<Vec<i64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let (assignment, _) = min_cost_assignment(&cost);
        for (k, &j) in open_patterns.iter().enumerate() {
            assigned[j] = Some(open_servers[assignment[k]]);
        }
    }

    let mut out = Placement::zeros(servers, num_types);
    for (j, u) in assigned.into_iter().enumerate() {
        let u = u.expect("every pattern assigned");
        for (i, &c) in patterns[j].counts.iter().enumerate() {
            out.set(u, i, c);
        }
    }
    Ok(out)
}

/// One slot of the multi-chain algorithm: pack `n_t` with the fewest
/// servers, trim the packing to exactly `n_t`, pad with empty patterns and
/// match against `prev`.
pub fn step_msc(prev: &Placement, n_t: &DemandVector, sys: &SystemConfig, opts: &PackOptions) -> Result<Placement> {
    let servers = sys.num_servers();
    if prev.num_servers() != servers || prev.num_types() != sys.num_types() {
        return Err(Error::Dimension {
            what: "previous placement",
            expected: servers,
            found: prev.num_servers(),
        });
    }
    let packing = match pack(n_t, sys, opts)? {
        PackOutcome::Feasible(p) => p.trimmed(n_t),
        PackOutcome::Infeasible => {
            return Err(Error::Overloaded {
                demand: n_t.to_vec(),
                servers,
            })
        }
    };
    let mut patterns: Vec<Pattern> = packing.expand().into_iter().map(|counts| Pattern { counts }).collect();
    patterns.resize(
        servers,
        Pattern {
            counts: vec![0; sys.num_types()],
        },
    );
    match_patterns(prev, &patterns, &sys.types)
}
