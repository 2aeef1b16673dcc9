use super::{Placement, VnfType};
use crate::error::{Error, Result};
use crate::exact::{self, Cost};
use num_traits::Zero;
use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotCost {
    pub operational: Cost,
    pub deployment: Cost,
}

impl SlotCost {
    pub fn total(&self) -> Cost {
        self.operational + self.deployment
    }
}

/// Cost of holding `x_t` for one slot after `x_prev`: every instance pays its
/// operational cost, and every per-server increase pays the deployment cost.
/// Removals are free.
pub fn slot_cost(x_t: &Placement, x_prev: &Placement, types: &[VnfType]) -> Result<SlotCost> {
    x_prev.check_shape(x_t)?;
    if x_t.num_types() != types.len() {
        return Err(Error::Dimension {
            what: "placement types",
            expected: types.len(),
            found: x_t.num_types(),
        });
    }
    // Count first, multiply once per type: keeps the sum exact and cheap.
    let mut held = vec![0i128; types.len()];
    let mut launched = vec![0i128; types.len()];
    for u in 0..x_t.num_servers() {
        let (now, before) = (x_t.row(u), x_prev.row(u));
        for i in 0..types.len() {
            held[i] += now[i] as i128;
            launched[i] += now[i].saturating_sub(before[i]) as i128;
        }
    }
    let mut operational = Cost::zero();
    let mut deployment = Cost::zero();
    for (i, t) in types.iter().enumerate() {
        operational += t.op_cost * held[i];
        deployment += t.deploy_cost * launched[i];
    }
    Ok(SlotCost {
        operational,
        deployment,
    })
}

/// Per-slot and cumulative cost of one run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CostReport {
    pub per_slot: Vec<SlotCost>,
    pub operational: Cost,
    pub deployment: Cost,
}

impl CostReport {
    pub fn push(&mut self, c: SlotCost) {
        self.operational += c.operational;
        self.deployment += c.deployment;
        self.per_slot.push(c);
    }

    pub fn total(&self) -> Cost {
        self.operational + self.deployment
    }

    /// Accounts a whole trajectory starting from the empty placement.
    pub fn from_trajectory(trajectory: &[Placement], types: &[VnfType]) -> Result<CostReport> {
        let mut report = CostReport::default();
        let Some(first) = trajectory.first() else {
            return Ok(report);
        };
        let mut prev = Placement::zeros(first.num_servers(), first.num_types());
        for x in trajectory {
            report.push(slot_cost(x, &prev, types)?);
            prev = x.clone();
        }
        Ok(report)
    }
}

impl Serialize for CostReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("CostReport", 4)?;
        let rows: Vec<[f64; 2]> = self
            .per_slot
            .iter()
            .map(|c| [exact::cost_to_f64(&c.operational), exact::cost_to_f64(&c.deployment)])
            .collect();
        st.serialize_field("per_slot", &rows)?;
        st.serialize_field("operational", &exact::cost_to_f64(&self.operational))?;
        st.serialize_field("deployment", &exact::cost_to_f64(&self.deployment))?;
        st.serialize_field("total", &exact::cost_to_f64(&self.total()))?;
        st.end()
    }
}

/// Objective value of a placement trajectory: total operational plus
/// deployment cost with the empty placement before the first slot.
pub fn objective(trajectory: &[Placement], types: &[VnfType]) -> Result<Cost> {
    let mut total = Cost::zero();
    let Some(first) = trajectory.first() else {
        return Ok(total);
    };
    let mut prev = Placement::zeros(first.num_servers(), first.num_types());
    for x in trajectory {
        total += slot_cost(x, &prev, types)?.total();
        prev = x.clone();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn types(deploy: &[i128]) -> Vec<VnfType> {
        deploy
            .iter()
            .enumerate()
            .map(|(i, &d)| VnfType {
                id: i as u32 + 1,
                name: String::new(),
                demand: vec![1.0],
                capacity_mbps: 1.0,
                op_cost: Ratio::from_integer(1),
                deploy_cost: Ratio::from_integer(d),
            })
            .collect()
    }

    fn p(rows: &[&[u32]]) -> Placement {
        let rows: Vec<Vec<u32>> = rows.iter().map(|r| r.to_vec()).collect();
        Placement::from_rows(&rows, rows[0].len()).unwrap()
    }

    #[test]
    fn unchanged_placement_pays_no_deployment() {
        let x = p(&[&[2, 1], &[0, 3]]);
        let c = slot_cost(&x, &x, &types(&[5, 5])).unwrap();
        assert_eq!(c.deployment, Cost::zero());
        assert_eq!(c.operational, Ratio::from_integer(6));
    }

    #[test]
    fn one_new_instance_on_second_server() {
        let prev = p(&[&[2, 0], &[0, 2]]);
        let cur = p(&[&[2, 0], &[0, 3]]);
        let c = slot_cost(&cur, &prev, &types(&[5, 5])).unwrap();
        assert_eq!(c.deployment, Ratio::from_integer(5));
    }

    #[test]
    fn migration_pays_even_when_totals_match() {
        let prev = p(&[&[1, 0], &[0, 0]]);
        let cur = p(&[&[0, 0], &[1, 0]]);
        let c = slot_cost(&cur, &prev, &types(&[5, 5])).unwrap();
        assert_eq!(c.deployment, Ratio::from_integer(5));
    }

    #[test]
    fn cold_start_pays_everything() {
        let x = p(&[&[2, 1]]);
        let r = CostReport::from_trajectory(&[x.clone(), x], &types(&[3, 7])).unwrap();
        assert_eq!(r.per_slot[0].deployment, Ratio::from_integer(13));
        assert_eq!(r.per_slot[1].deployment, Cost::zero());
        assert_eq!(r.total(), Ratio::from_integer(13 + 6));
    }

    #[test]
    fn dimension_mismatch() {
        let a = p(&[&[1, 0]]);
        let b = p(&[&[1, 0], &[0, 0]]);
        assert!(slot_cost(&a, &b, &types(&[1, 1])).is_err());
        assert!(slot_cost(&a, &a, &types(&[1])).is_err());
    }

    proptest! {
        #[test]
        fn deployment_dominates_aggregate_change(
            before in prop::collection::vec(0u32..4, 6),
            after in prop::collection::vec(0u32..4, 6),
        ) {
            let rows = |c: &[u32]| c.chunks(2).map(|r| r.to_vec()).collect::<Vec<_>>();
            let prev = Placement::from_rows(&rows(&before), 2).unwrap();
            let cur = Placement::from_rows(&rows(&after), 2).unwrap();
            let ts = types(&[3, 5]);
            let c = slot_cost(&cur, &prev, &ts).unwrap();
            let (s0, s1) = (prev.column_sums(), cur.column_sums());
            let mut aggregate = Cost::zero();
            for i in 0..2 {
                aggregate += ts[i].deploy_cost * (s1[i].saturating_sub(s0[i]) as i128);
            }
            prop_assert!(c.deployment >= aggregate);
            if super::super::is_migration_free(&prev, &cur) {
                prop_assert_eq!(c.deployment, aggregate);
            }
        }

        #[test]
        fn report_totals_equal_objective(cells in prop::collection::vec(0u32..3, 2 * 2 * 5)) {
            let traj: Vec<Placement> = cells
                .chunks(4)
                .map(|c| Placement::from_rows(&[c[..2].to_vec(), c[2..].to_vec()], 2).unwrap())
                .collect();
            let ts = types(&[2, 7]);
            let report = CostReport::from_trajectory(&traj, &ts).unwrap();
            let sum_ops: Cost = report.per_slot.iter().map(|c| c.operational).sum();
            let sum_dep: Cost = report.per_slot.iter().map(|c| c.deployment).sum();
            prop_assert_eq!(sum_ops, report.operational);
            prop_assert_eq!(sum_dep, report.deployment);
            prop_assert_eq!(report.total(), objective(&traj, &ts).unwrap());
        }
    }
}
