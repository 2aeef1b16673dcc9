//! Runs one algorithm over a trace, slot by slot, for a list of seeds.

use crate::baselines::static_placement;
use crate::error::{Error, Result};
use crate::trace::TraceSeries;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;
use vnf_core::binpack::PackOptions;
use vnf_core::model::{aggregate_deployment_equal, is_migration_free, slot_cost};
use vnf_core::offline::{exhaustive_offline, offline_type_schedule, type_cost};
use vnf_core::online_msc::step_msc;
use vnf_core::online_ssc::SscState;
use vnf_core::preplan::{preplan, PrePlan, PreplanOptions};
use vnf_core::{check_capacity, check_coverage, Cost, CostReport, DemandVector, Placement, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Randomized idle/deadline scaling on a pre-planned placement (one chain).
    SscOnline,
    /// Per-slot packing plus pattern-to-server matching.
    MscOnline,
    /// Constant placement sized for the peak.
    Static,
    /// Same mechanics as `MscOnline`, reported under its own name.
    Myopic,
    /// Per-type offline optimum without placement constraints.
    OfflineLb,
    /// Exact offline optimum; toy instances only.
    Exhaustive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::SscOnline,
        Algorithm::MscOnline,
        Algorithm::Static,
        Algorithm::Myopic,
        Algorithm::OfflineLb,
        Algorithm::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SscOnline => "ssc_online",
            Algorithm::MscOnline => "msc_online",
            Algorithm::Static => "static",
            Algorithm::Myopic => "myopic",
            Algorithm::OfflineLb => "offline_lb",
            Algorithm::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Spec(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Rate resolution of pre-planning, in Mbps.
    pub rate_step: u64,
    pub pack: PackOptions,
    /// Check coverage, capacity and the migration predicates every slot.
    pub check_invariants: bool,
    /// Keep every slot's placement in the result.
    pub keep_trajectory: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            rate_step: 1,
            pack: PackOptions::default(),
            check_invariants: true,
            keep_trajectory: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub trace: TraceSeries,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub options: RunOptions,
    /// Reused by `SscOnline` instead of planning again.
    pub preplan: Option<PrePlan>,
}

impl ExperimentSpec {
    pub fn new(system: SystemConfig, trace: TraceSeries, algorithm: Algorithm, seeds: Vec<u64>) -> Self {
        ExperimentSpec {
            system,
            trace,
            algorithm,
            seeds,
            options: RunOptions::default(),
            preplan: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trace.num_chains() != self.system.chains.len() {
            return Err(Error::Spec(format!(
                "trace has {} chains, configuration has {}",
                self.trace.num_chains(),
                self.system.chains.len()
            )));
        }
        if self.algorithm == Algorithm::SscOnline && self.system.chains.len() != 1 {
            return Err(Error::Spec("ssc_online needs exactly one chain".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Spec("no seeds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Coverage,
    Capacity,
    Migration,
    AggregateDeployment,
    /// The placement left the pre-planned maximum placement.
    OutsidePreplan,
    /// More instances than the minimal demand.
    Excess,
    DemandExceedsPreplan,
    Overloaded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Violation {
    /// 1-based slot.
    pub slot: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub cost: CostReport,
    pub demand: Vec<DemandVector>,
    /// Instances of each type per completed slot.
    pub instances: Vec<Vec<u64>>,
    /// Hex SHA-256 over the per-slot placements (instance counts for
    /// `OfflineLb`).
    pub digest: String,
    pub violations: Vec<Violation>,
    pub slot_nanos: Vec<u64>,
    /// False when a fault stopped the run early.
    pub completed: bool,
    pub trajectory: Option<Vec<Placement>>,
    pub alpha_max: Option<u64>,
}

impl RunResult {
    pub fn total(&self) -> Cost {
        self.cost.total()
    }

    pub fn total_f64(&self) -> f64 {
        vnf_core::exact::cost_to_f64(&self.total())
    }

    /// Violations other than the fault that ended an incomplete run.
    pub fn invariant_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| !matches!(v.kind, ViolationKind::DemandExceedsPreplan | ViolationKind::Overloaded))
    }
}

/// Minimal instance counts for every slot of the trace.
pub fn demand_series(sys: &SystemConfig, trace: &TraceSeries) -> Result<Vec<DemandVector>> {
    trace.rates.iter().map(|r| sys.demand(r).map_err(Error::from)).collect()
}

/// Runs the experiment for every seed, in parallel. Results keep seed order.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<RunResult>> {
    let prepared = Prepared::new(spec)?;
    spec.seeds.par_iter().map(|&s| prepared.run_seed(s)).collect()
}

/// Seed-independent work shared by all runs of one experiment.
pub struct Prepared<'a> {
    spec: &'a ExperimentSpec,
    demand: Vec<DemandVector>,
    preplan: Option<PrePlan>,
}

impl<'a> Prepared<'a> {
    pub fn new(spec: &'a ExperimentSpec) -> Result<Prepared<'a>> {
        spec.validate()?;
        let demand = demand_series(&spec.system, &spec.trace)?;
        let preplan = match (spec.algorithm, &spec.preplan) {
            (Algorithm::SscOnline, Some(p)) => {
                p.validate(&spec.system)?;
                Some(p.clone())
            }
            (Algorithm::SscOnline, None) => {
                let opts = PreplanOptions {
                    rate_step: spec.options.rate_step,
                    pack: spec.options.pack,
                    ..Default::default()
                };
                Some(preplan(&spec.system, spec.system.chains[0].id, &opts)?)
            }
            _ => None,
        };
        Ok(Prepared { spec, demand, preplan })
    }

    pub fn demand(&self) -> &[DemandVector] {
        &self.demand
    }

    pub fn preplan(&self) -> Option<&PrePlan> {
        self.preplan.as_ref()
    }

    pub fn run_seed(&self, seed: u64) -> Result<RunResult> {
        let spec = self.spec;
        let sys = &spec.system;
        if spec.algorithm == Algorithm::OfflineLb {
            return Ok(self.offline_bound(seed));
        }
        let mut stepper = match spec.algorithm {
            Algorithm::SscOnline => {
                let plan = self.preplan.as_ref().expect("prepared for ssc");
                Stepper::Ssc(Box::new(SscState::new(sys, plan, seed)?))
            }
            Algorithm::MscOnline | Algorithm::Myopic => Stepper::Msc,
            Algorithm::Static => match static_placement(&spec.trace, sys, &spec.options.pack) {
                Ok((_, x)) => Stepper::Static(x),
                Err(Error::Core(vnf_core::Error::Overloaded { demand, servers })) => {
                    return Ok(self.aborted(
                        seed,
                        ViolationKind::Overloaded,
                        format!("peak demand {demand:?} exceeds {servers} servers"),
                    ));
                }
                Err(e) => return Err(e),
            },
            Algorithm::Exhaustive => {
                let (traj, _) = exhaustive_offline(&self.demand, sys)?;
                Stepper::Replay(traj.into_iter())
            }
            Algorithm::OfflineLb => unreachable!(),
        };

        let mut out = self.empty_result(seed);
        out.alpha_max = self.preplan.as_ref().map(|p| p.alpha_max);
        let mut trajectory = spec.options.keep_trajectory.then(Vec::new);
        let mut prev = Placement::zeros(sys.num_servers(), sys.num_types());
        let mut hasher = Sha256::new();
        for (t, n) in self.demand.iter().enumerate() {
            let slot = t + 1;
            let start = Instant::now();
            let step = stepper.step(&prev, n, sys, &spec.options.pack);
            let elapsed = start.elapsed().as_nanos() as u64;
            let x = match step {
                Ok(x) => x,
                Err(vnf_core::Error::DemandExceedsPreplan {
                    type_id,
                    needed,
                    available,
                }) => {
                    out.violations.push(Violation {
                        slot,
                        kind: ViolationKind::DemandExceedsPreplan,
                        detail: format!("type {type_id}: need {needed} more, {available} left"),
                    });
                    out.completed = false;
                    break;
                }
                Err(vnf_core::Error::Overloaded { demand, servers }) => {
                    out.violations.push(Violation {
                        slot,
                        kind: ViolationKind::Overloaded,
                        detail: format!("demand {demand:?} exceeds {servers} servers"),
                    });
                    out.completed = false;
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            out.slot_nanos.push(elapsed);
            out.cost.push(slot_cost(&x, &prev, &sys.types)?);
            if spec.options.check_invariants {
                self.check_slot(slot, &x, &prev, n, &stepper, &mut out.violations);
            }
            for c in x.as_slice() {
                hasher.update(c.to_le_bytes());
            }
            out.instances.push(x.column_sums());
            if let Some(tr) = trajectory.as_mut() {
                tr.push(x.clone());
            }
            prev = x;
        }
        out.digest = hex::encode(hasher.finalize());
        out.trajectory = trajectory;
        Ok(out)
    }

    fn empty_result(&self, seed: u64) -> RunResult {
        RunResult {
            algorithm: self.spec.algorithm,
            seed,
            cost: CostReport::default(),
            demand: self.demand.clone(),
            instances: Vec::new(),
            digest: String::new(),
            violations: Vec::new(),
            slot_nanos: Vec::new(),
            completed: true,
            trajectory: None,
            alpha_max: None,
        }
    }

    fn aborted(&self, seed: u64, kind: ViolationKind, detail: String) -> RunResult {
        let mut out = self.empty_result(seed);
        out.completed = false;
        out.violations.push(Violation { slot: 1, kind, detail });
        out.digest = hex::encode(Sha256::digest([]));
        out
    }

    fn offline_bound(&self, seed: u64) -> RunResult {
        let types = &self.spec.system.types;
        let mut out = self.empty_result(seed);
        let schedules: Vec<Vec<u32>> = types
            .iter()
            .enumerate()
            .map(|(i, ty)| {
                let col: Vec<u32> = self.demand.iter().map(|n| n[i]).collect();
                offline_type_schedule(&col, ty).0
            })
            .collect();
        let mut hasher = Sha256::new();
        for t in 0..self.demand.len() {
            let mut op = Cost::from_integer(0);
            let mut dep = Cost::from_integer(0);
            let mut counts = Vec::with_capacity(types.len());
            for (i, ty) in types.iter().enumerate() {
                let now = schedules[i][t];
                let before = if t == 0 { 0 } else { schedules[i][t - 1] };
                op += ty.op_cost * i128::from(now);
                dep += ty.deploy_cost * i128::from(now.saturating_sub(before));
                hasher.update(now.to_le_bytes());
                counts.push(u64::from(now));
            }
            out.cost.push(vnf_core::model::SlotCost {
                operational: op,
                deployment: dep,
            });
            out.instances.push(counts);
        }
        debug_assert_eq!(
            out.cost.total(),
            types
                .iter()
                .enumerate()
                .map(|(i, ty)| type_cost(&schedules[i], ty))
                .sum::<Cost>()
        );
        out.digest = hex::encode(hasher.finalize());
        out
    }

    fn check_slot(
        &self,
        slot: usize,
        x: &Placement,
        prev: &Placement,
        n: &DemandVector,
        stepper: &Stepper,
        v: &mut Vec<Violation>,
    ) {
        let sys = &self.spec.system;
        let mut flag = |kind, detail: String| v.push(Violation { slot, kind, detail });
        if !check_coverage(x, n) {
            flag(
                ViolationKind::Coverage,
                format!("instances {:?} below demand {:?}", x.column_sums(), n.0),
            );
        }
        if !check_capacity(x, sys) {
            flag(ViolationKind::Capacity, "a server exceeds its capacity".into());
        }
        match stepper {
            Stepper::Ssc(state) => {
                if !is_migration_free(prev, x) {
                    flag(
                        ViolationKind::Migration,
                        "a type grew on one server and shrank on another".into(),
                    );
                }
                if !aggregate_deployment_equal(prev, x) {
                    flag(
                        ViolationKind::AggregateDeployment,
                        "per-server launches differ from the aggregate change".into(),
                    );
                }
                if !x.dominated_by(state.max_placement()) {
                    flag(
                        ViolationKind::OutsidePreplan,
                        "placement exceeds the pre-planned maximum".into(),
                    );
                }
            }
            Stepper::Msc => {
                let sums = x.column_sums();
                if sums.iter().zip(n.iter()).any(|(&have, &need)| have != u64::from(need)) {
                    flag(
                        ViolationKind::Excess,
                        format!("instances {sums:?} differ from demand {:?}", n.0),
                    );
                }
            }
            Stepper::Static(_) | Stepper::Replay(_) => {}
        }
    }
}

enum Stepper {
    Ssc(Box<SscState>),
    Msc,
    Static(Placement),
    Replay(std::vec::IntoIter<Placement>),
}

impl Stepper {
    fn step(
        &mut self,
        prev: &Placement,
        n: &DemandVector,
        sys: &SystemConfig,
        pack: &PackOptions,
    ) -> vnf_core::Result<Placement> {
        match self {
            Stepper::Ssc(state) => state.advance(n).cloned(),
            Stepper::Msc => step_msc(prev, n, sys, pack),
            Stepper::Static(x) => Ok(x.clone()),
            Stepper::Replay(it) => Ok(it.next().expect("one placement per slot")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;
    use crate::trace::SyntheticTrace;

    fn small_trace(chains: usize, slots: usize, peak: f64) -> TraceSeries {
        SyntheticTrace {
            slots,
            slots_per_day: 48,
            ..Default::default()
        }
        .build(chains, 4.27, peak)
        .unwrap()
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("rhc".parse::<Algorithm>().is_err());
    }

    #[test]
    fn ssc_needs_one_chain() {
        let sys = scenarios::three_chain().unwrap();
        let spec = ExperimentSpec::new(sys, small_trace(3, 10, 1000.0), Algorithm::SscOnline, vec![0]);
        assert!(matches!(run(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn costs_match_reaccumulation_and_bound() {
        let sys = scenarios::three_chain()
            .unwrap()
            .with_servers(50)
            .with_deploy_ratio(3.0)
            .unwrap();
        let trace = small_trace(3, 60, 12_000.0);
        let lb = {
            let spec = ExperimentSpec::new(sys.clone(), trace.clone(), Algorithm::OfflineLb, vec![0]);
            run(&spec).unwrap().remove(0).total()
        };
        for algo in [Algorithm::MscOnline, Algorithm::Static, Algorithm::Myopic] {
            let mut spec = ExperimentSpec::new(sys.clone(), trace.clone(), algo, vec![0, 1]);
            spec.options.keep_trajectory = true;
            for r in run(&spec).unwrap() {
                assert!(r.completed, "{algo}");
                assert!(r.violations.is_empty(), "{algo}: {:?}", r.violations);
                let traj = r.trajectory.as_ref().unwrap();
                assert_eq!(CostReport::from_trajectory(traj, &sys.types).unwrap(), r.cost);
                assert!(r.total() >= lb, "{algo}");
            }
        }
    }

    #[test]
    fn ssc_run_is_reproducible_and_clean() {
        let sys = scenarios::single_chain()
            .unwrap()
            .with_servers(40)
            .with_deploy_ratio(4.0)
            .unwrap();
        let trace = small_trace(1, 200, 30_000.0);
        let mut spec = ExperimentSpec::new(sys.clone(), trace, Algorithm::SscOnline, vec![7, 7, 8]);
        spec.options.rate_step = 100;
        let r = run(&spec).unwrap();
        assert!(r.iter().all(|x| x.completed && x.violations.is_empty()));
        assert_eq!(r[0].digest, r[1].digest);
        assert_eq!(r[0].total(), r[1].total());
        assert_ne!(r[0].digest, r[2].digest);
    }

    #[test]
    fn overload_stops_the_run() {
        let sys = scenarios::three_chain().unwrap().with_servers(2);
        let trace = small_trace(3, 10, 50_000.0);
        let r = run(&ExperimentSpec::new(sys, trace, Algorithm::MscOnline, vec![0])).unwrap();
        assert!(!r[0].completed);
        assert_eq!(r[0].violations[0].kind, ViolationKind::Overloaded);
    }
}
