//! Randomized online scaling for a single service chain.
//!
//! Each slot the running count of type `i` is set to its demand `n_i(t)`.
//! Surplus instances are not torn down right away: they go idle, keep their
//! server (and keep paying the operational cost), and get a random deadline.
//! An idle instance that is needed again returns to running for free; one
//! that stays idle until its deadline is removed and its server id goes back
//! into the type's multiset. New instances are always placed on server ids
//! taken from the pre-planned multisets.
//!
//! Deadline `j` means the instance may sit idle for `j - 1` slots; it is
//! removed at the point it would start its `j`-th idle slot. Keeping an idle
//! instance for a slot is the "rent", tearing it down and redeploying later is
//! the "buy", and the deadline distribution is the classic randomized
//! ski-rental one with break-even horizon `delta = max(1, floor(deploy/op))`.

use crate::error::{Error, Result};
use crate::model::{DemandVector, Placement, SystemConfig};
use crate::preplan::{PrePlan, ServerMultiset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probability that the deadline equals `j`, for `j = 1..=delta`:
/// `((delta-1)/delta)^(delta-j) / (delta * (1 - (1 - 1/delta)^delta))`.
pub fn deadline_pmf(delta: u32) -> Vec<f64> {
    assert!(delta >= 1, "delta must be at least 1");
    let d = delta as f64;
    let r = (d - 1.0) / d;
    let norm = d * (1.0 - r.powi(delta as i32));
    (1..=delta).map(|j| r.powi((delta - j) as i32) / norm).collect()
}

/// Inverse-CDF sampler over `1..=delta`.
#[derive(Debug, Clone)]
pub struct DeadlineSampler {
    cdf: Vec<f64>,
}

impl DeadlineSampler {
    pub fn new(delta: u32) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = deadline_pmf(delta)
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().expect("delta >= 1") = 1.0;
        DeadlineSampler { cdf }
    }

    pub fn delta(&self) -> u32 {
        self.cdf.len() as u32
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u) as u32 + 1
    }
}

pub fn sample_deadline<R: Rng + ?Sized>(delta: u32, rng: &mut R) -> u32 {
    DeadlineSampler::new(delta).sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceState {
    Running,
    /// `counter` is the number of slots already spent idle on the server.
    Idle {
        counter: u32,
        deadline: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceRecord {
    pub type_index: usize,
    pub server: u32,
    pub state: InstanceState,
    /// Increases every time an instance is deployed or switched back to running.
    pub activation_seq: u64,
}

#[derive(Debug, Clone)]
struct TypeState {
    /// Ordered by activation, most recent last.
    running: Vec<InstanceRecord>,
    /// Ordered by idling time, most recent last.
    idle: Vec<InstanceRecord>,
    n_prev: u32,
    sampler: DeadlineSampler,
    multiset: ServerMultiset,
}

impl TypeState {
    fn total(&self) -> u32 {
        (self.running.len() + self.idle.len()) as u32
    }
}

/// Running state of the single-chain algorithm for one simulation run.
#[derive(Debug, Clone)]
pub struct SscState {
    chain_id: u32,
    types: Vec<Option<TypeState>>,
    placement: Placement,
    max_placement: Placement,
    rng: ChaCha8Rng,
    next_seq: u64,
}

impl SscState {
    /// Starts from the empty placement. `seed` fully determines the run.
    pub fn new(sys: &SystemConfig, plan: &PrePlan, seed: u64) -> Result<SscState> {
        plan.validate(sys)?;
        let chain = sys
            .chain(plan.chain_id)
            .ok_or_else(|| Error::Config(format!("no chain with id {}", plan.chain_id)))?;
        let types = (0..sys.num_types())
            .map(|i| {
                chain.contains_type(i).then(|| TypeState {
                    running: Vec::new(),
                    idle: Vec::new(),
                    n_prev: 0,
                    sampler: DeadlineSampler::new(sys.types[i].delta()),
                    multiset: plan.multisets[i].clone(),
                })
            })
            .collect();
        Ok(SscState {
            chain_id: plan.chain_id,
            types,
            placement: Placement::zeros(sys.num_servers(), sys.num_types()),
            max_placement: plan.max_placement.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_seq: 0,
        })
    }

    pub fn chain_id(&self) -> u32 {
        self.chain_id
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    pub fn max_placement(&self) -> &Placement {
        &self.max_placement
    }

    pub fn running_count(&self, i: usize) -> u32 {
        self.types[i].as_ref().map_or(0, |t| t.running.len() as u32)
    }

    pub fn idle_count(&self, i: usize) -> u32 {
        self.types[i].as_ref().map_or(0, |t| t.idle.len() as u32)
    }

    /// Every instance currently on a server.
    pub fn instances(&self) -> impl Iterator<Item = &InstanceRecord> {
        self.types
            .iter()
            .flatten()
            .flat_map(|t| t.running.iter().chain(t.idle.iter()))
    }

    /// Server ids still available for type `i`.
    pub fn free_slots(&self, i: usize) -> usize {
        self.types[i].as_ref().map_or(0, |t| t.multiset.len())
    }

    /// Processes one slot's demand and returns the resulting placement.
    pub fn step(&mut self, n_t: &DemandVector) -> Result<Placement> {
        self.advance(n_t)?;
        Ok(self.placement.clone())
    }

    /// Like [`SscState::step`] but borrows the placement instead of cloning it.
    pub fn advance(&mut self, n_t: &DemandVector) -> Result<&Placement> {
        if n_t.len() != self.types.len() {
            return Err(Error::Dimension {
                what: "demand vector",
                expected: self.types.len(),
                found: n_t.len(),
            });
        }
        // Validate before mutating so a failed step leaves the state intact.
        for (i, ts) in self.types.iter().enumerate() {
            match ts {
                None if n_t[i] > 0 => {
                    return Err(Error::Input(format!(
                        "demand for type {} which is not in chain {}",
                        i + 1,
                        self.chain_id
                    )))
                }
                Some(ts) if n_t[i] > ts.total() => {
                    let needed = n_t[i] - ts.total();
                    if needed as usize > ts.multiset.len() {
                        return Err(Error::DemandExceedsPreplan {
                            type_id: i as u32 + 1,
                            needed,
                            available: ts.multiset.len(),
                        });
                    }
                }
                _ => {}
            }
        }
        for i in 0..self.types.len() {
            if self.types[i].is_some() {
                self.step_type(i, n_t[i])?;
            }
        }
        Ok(&self.placement)
    }

    fn step_type(&mut self, i: usize, n: u32) -> Result<()> {
        let ts = self.types[i].as_mut().expect("chain type");
        let x_prev = ts.total();
        if n >= x_prev {
            for mut inst in ts.idle.drain(..) {
                inst.state = InstanceState::Running;
                inst.activation_seq = self.next_seq;
                self.next_seq += 1;
                ts.running.push(inst);
            }
            let servers = ts.multiset.eject((n - x_prev) as usize)?;
            for server in servers {
                self.placement.add(server as usize, i, 1);
                ts.running.push(InstanceRecord {
                    type_index: i,
                    server,
                    state: InstanceState::Running,
                    activation_seq: self.next_seq,
                });
                self.next_seq += 1;
            }
        } else if n >= ts.n_prev {
            for _ in 0..(n - ts.n_prev) {
                let mut inst = ts.idle.pop().expect("idle instances cover the gap");
                inst.state = InstanceState::Running;
                inst.activation_seq = self.next_seq;
                self.next_seq += 1;
                ts.running.push(inst);
            }
        } else {
            for _ in 0..(ts.n_prev - n) {
                let mut inst = ts.running.pop().expect("running count equals previous demand");
                inst.state = InstanceState::Idle {
                    counter: 0,
                    deadline: ts.sampler.sample(&mut self.rng),
                };
                ts.idle.push(inst);
            }
        }
        ts.n_prev = n;

        let placement = &mut self.placement;
        let multiset = &mut ts.multiset;
        let mut result = Ok(());
        ts.idle.retain_mut(|inst| {
            let InstanceState::Idle { counter, deadline } = &mut inst.state else {
                unreachable!("idle list holds idle instances");
            };
            if *counter + 1 >= *deadline {
                placement.add(inst.server as usize, i, -1);
                if let Err(e) = multiset.insert(&[inst.server]) {
                    result = Err(e);
                }
                false
            } else {
                *counter += 1;
                true
            }
        });
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cluster, VnfType};
    use crate::preplan::{preplan, PreplanOptions};
    use num_rational::Ratio;

    fn system(deploy: i128) -> SystemConfig {
        SystemConfig::new(
            vec![VnfType {
                id: 1,
                name: "t".into(),
                demand: vec![1.0],
                capacity_mbps: 1.0,
                op_cost: Ratio::from_integer(1),
                deploy_cost: Ratio::from_integer(deploy),
            }],
            vec![(1, vec![1], vec![1.0])],
            Cluster {
                num_servers: 2,
                capacity: vec![4.0],
            },
        )
        .unwrap()
    }

    fn state(deploy: i128, seed: u64) -> (SystemConfig, SscState) {
        let sys = system(deploy);
        let plan = preplan(
            &sys,
            1,
            &PreplanOptions {
                max_rate_bound: Some(100),
                ..Default::default()
            },
        )
        .unwrap();
        let st = SscState::new(&sys, &plan, seed).unwrap();
        (sys, st)
    }

    #[test]
    fn pmf_small_cases() {
        assert_eq!(deadline_pmf(1), vec![1.0]);
        let p = deadline_pmf(2);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn delta_one_always_samples_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| sample_deadline(1, &mut rng) == 1));
    }

    #[test]
    fn samples_stay_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = DeadlineSampler::new(7);
        assert!((0..10_000).map(|_| s.sample(&mut rng)).all(|j| (1..=7).contains(&j)));
    }

    /// Finds a seed whose first sampled deadline is `want`.
    fn seed_with_first_deadline(delta: u32, want: u32) -> u64 {
        (0..10_000u64)
            .find(|&s| DeadlineSampler::new(delta).sample(&mut ChaCha8Rng::seed_from_u64(s)) == want)
            .unwrap()
    }

    #[test]
    fn idle_instance_reactivated_without_deployment() {
        // deploy 3, op 1: delta = 3.
        let seed = seed_with_first_deadline(3, 3);
        let (sys, mut st) = state(3, seed);
        let mut traj = Vec::new();
        for n in [1, 0, 0, 1] {
            traj.push(st.step(&DemandVector(vec![n])).unwrap());
            assert_eq!(st.running_count(0), n);
        }
        assert_eq!(traj[1].column_sums(), vec![1]);
        assert_eq!(traj[2].column_sums(), vec![1]);
        let report = crate::model::CostReport::from_trajectory(&traj, &sys.types).unwrap();
        let deploys: Vec<_> = report.per_slot.iter().map(|c| *c.deployment.numer()).collect();
        assert_eq!(deploys, vec![3, 0, 0, 0]);
    }

    #[test]
    fn idle_instance_removed_at_deadline() {
        for j in 1..=3u32 {
            let seed = seed_with_first_deadline(3, j);
            let (_, mut st) = state(3, seed);
            st.step(&DemandVector(vec![1])).unwrap();
            let mut present = 0;
            for _ in 0..5 {
                let x = st.step(&DemandVector(vec![0])).unwrap();
                present += x.column_sums()[0];
            }
            // Deadline j: j - 1 idle slots on the server.
            assert_eq!(present, (j - 1) as u64, "deadline {j}");
            assert_eq!(st.free_slots(0), 8);
        }
    }

    #[test]
    fn constant_demand_deploys_once() {
        let (sys, mut st) = state(5, 42);
        let traj: Vec<_> = (0..10).map(|_| st.step(&DemandVector(vec![3])).unwrap()).collect();
        let r = crate::model::CostReport::from_trajectory(&traj, &sys.types).unwrap();
        assert_eq!(r.total(), Ratio::from_integer(10 * 3 + 3 * 5));
    }

    #[test]
    fn demand_beyond_preplan_is_rejected_without_side_effects() {
        let (_, mut st) = state(5, 1);
        st.step(&DemandVector(vec![2])).unwrap();
        let before = st.placement().clone();
        let err = st.step(&DemandVector(vec![9])).unwrap_err();
        assert!(matches!(err, Error::DemandExceedsPreplan { type_id: 1, .. }));
        assert_eq!(st.placement(), &before);
        assert!(st.step(&DemandVector(vec![1, 1])).is_err());
    }

    #[test]
    fn lifo_reactivation_prefers_latest_idle() {
        let (_, mut st) = state(100, 3);
        st.step(&DemandVector(vec![4])).unwrap();
        st.step(&DemandVector(vec![1])).unwrap();
        let idle_before: Vec<_> = st.types[0].as_ref().unwrap().idle.clone();
        st.step(&DemandVector(vec![2])).unwrap();
        let running = &st.types[0].as_ref().unwrap().running;
        // Unless it already timed out, the last idled instance is the one reactivated.
        if let Some(last) = idle_before.last() {
            if running
                .iter()
                .any(|r| r.server == last.server && r.activation_seq > last.activation_seq)
            {
                assert_eq!(running.last().unwrap().server, last.server);
            }
        }
        assert_eq!(st.running_count(0), 2);
    }
    #[test]
    fn deadline_frequencies_pass_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        for delta in [2u32, 4, 10] {
            let s = DeadlineSampler::new(delta);
            let mut rng = ChaCha8Rng::seed_from_u64(u64::from(delta));
            let draws = 200_000usize;
            let mut hist = vec![0usize; delta as usize];
            for _ in 0..draws {
                hist[(s.sample(&mut rng) - 1) as usize] += 1;
            }
            // Expected probabilities recomputed from the geometric form.
            let r = 1.0 - 1.0 / delta as f64;
            let weights: Vec<f64> = (1..=delta).map(|j| r.powi((delta - j) as i32)).collect();
            let z: f64 = weights.iter().sum();
            let stat: f64 = hist
                .iter()
                .zip(&weights)
                .map(|(&o, w)| {
                    let e = draws as f64 * w / z;
                    (o as f64 - e).powi(2) / e
                })
                .sum();
            let p = 1.0 - ChiSquared::new(f64::from(delta - 1)).unwrap().cdf(stat);
            assert!(p > 1e-3, "delta {delta}: chi2 {stat}, p {p}");
        }
    }

    proptest::proptest! {
        #[test]
        fn invariants_hold_on_random_traces(
            seed in 0u64..1000,
            deploy in 1i128..12,
            demand in proptest::collection::vec(0u32..=8, 1..40),
        ) {
            let (_, mut st) = state(deploy, seed);
            let mut prev = Placement::zeros(2, 1);
            for &n in &demand {
                let x = st.step(&DemandVector(vec![n])).unwrap();
                proptest::prop_assert_eq!(st.running_count(0), n);
                proptest::prop_assert!(x.column_sums()[0] >= u64::from(n));
                proptest::prop_assert!(x.dominated_by(st.max_placement()));
                // Never adds and removes on different servers in the same slot.
                let sums = (prev.column_sums()[0], x.column_sums()[0]);
                if sums.1 > sums.0 {
                    proptest::prop_assert!(prev.dominated_by(&x));
                }
                prev = x;
            }
        }
    }
}
