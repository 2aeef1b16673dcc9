//! Static provisioning: one placement sized for the peak rate of every
//! chain, deployed in the first slot and kept for the whole run.

use crate::error::Result;
use crate::trace::TraceSeries;
use vnf_core::binpack::{pack, PackOptions, PackOutcome};
use vnf_core::{DemandVector, Error, Placement, SystemConfig};

/// Peak demand and the placement that serves it.
pub fn static_placement(
    trace: &TraceSeries,
    sys: &SystemConfig,
    opts: &PackOptions,
) -> Result<(DemandVector, Placement)> {
    let n = sys.demand(&trace.chain_peaks())?;
    match pack(&n, sys, opts)? {
        PackOutcome::Feasible(p) => {
            let x = p.trimmed(&n).to_placement(sys.num_servers(), sys.num_types())?;
            Ok((n, x))
        }
        PackOutcome::Infeasible => Err(Error::Overloaded {
            demand: n.to_vec(),
            servers: sys.num_servers(),
        }
        .into()),
    }
}

/// Cost of holding the static placement for every slot of the trace.
pub fn static_baseline(trace: &TraceSeries, sys: &SystemConfig, opts: &PackOptions) -> Result<vnf_core::CostReport> {
    let (_, x) = static_placement(trace, sys, opts)?;
    let trajectory = vec![x; trace.num_slots()];
    Ok(vnf_core::CostReport::from_trajectory(&trajectory, &sys.types)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use vnf_core::Cost;

    #[test]
    fn constant_trace_pays_one_deployment() {
        let sys = crate::scenarios::single_chain()
            .unwrap()
            .with_deploy_ratio(3.0)
            .unwrap();
        let trace = TraceSeries::new(vec![vec![90_000.0]; 5]).unwrap();
        let r = static_baseline(&trace, &sys, &PackOptions::default()).unwrap();
        let n = sys.demand(&[90_000.0]).unwrap();
        let per_slot: i128 = n
            .iter()
            .zip(&sys.types)
            .map(|(&c, t)| i128::from(c) * t.op_cost.to_integer())
            .sum();
        assert_eq!(r.operational, Cost::from_integer(5 * per_slot));
        assert_eq!(r.deployment, Cost::from_integer(3 * per_slot));
        assert!(r.per_slot[1..].iter().all(|c| c.deployment == Cost::from_integer(0)));
    }
}
