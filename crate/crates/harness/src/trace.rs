//! Input rate traces: one rate per chain per slot, in Mbps.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    /// `rates[t][s]`: input rate of chain `s + 1` in slot `t + 1`.
    pub rates: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    slot: u64,
    chain_id: u32,
    rate: f64,
}

/// Fitted scaling `K * a^gamma` for one chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmrFit {
    pub gamma: f64,
    pub k: f64,
}

impl TraceSeries {
    pub fn new(rates: Vec<Vec<f64>>) -> Result<TraceSeries> {
        let width = rates.first().map_or(0, Vec::len);
        if width == 0 {
            return Err(Error::Trace("trace needs at least one slot and one chain".into()));
        }
        for (t, row) in rates.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Trace(format!(
                    "slot {} has {} chains, expected {width}",
                    t + 1,
                    row.len()
                )));
            }
            if let Some(r) = row.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
                return Err(Error::Trace(format!("slot {}: bad rate {r}", t + 1)));
            }
        }
        Ok(TraceSeries { rates })
    }

    /// Parses `slot,chain_id,rate` rows (header optional). Slots must run
    /// 1..=T without gaps and every slot needs exactly one row per chain.
    pub fn parse_csv(text: &str, num_chains: usize) -> Result<TraceSeries> {
        if num_chains == 0 {
            return Err(Error::Trace("at least one chain required".into()));
        }
        let has_header = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .is_some_and(|l| l.split(',').next().is_some_and(|f| f.trim().parse::<f64>().is_err()));
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let record = record?;
            if k == 0 && has_header {
                continue;
            }
            let row: TraceRow = record.deserialize(None)?;
            if row.slot == 0 {
                return Err(Error::Trace("slots are numbered from 1".into()));
            }
            if row.chain_id == 0 || row.chain_id as usize > num_chains {
                return Err(Error::Trace(format!("unknown chain id {}", row.chain_id)));
            }
            if !(row.rate.is_finite() && row.rate >= 0.0) {
                return Err(Error::Trace(format!("slot {}: bad rate {}", row.slot, row.rate)));
            }
            rows.push(row);
        }
        // A complete trace has exactly one row per (slot, chain).
        let slots = rows.len().div_ceil(num_chains);
        let mut rates: Vec<Vec<Option<f64>>> = vec![vec![None; num_chains]; slots];
        for row in rows {
            let t = usize::try_from(row.slot - 1)
                .ok()
                .filter(|&t| t < slots)
                .ok_or_else(|| Error::Trace(format!("slot {} leaves gaps before it", row.slot)))?;
            let cell = &mut rates[t][row.chain_id as usize - 1];
            if cell.is_some() {
                return Err(Error::Trace(format!(
                    "duplicate row for slot {} chain {}",
                    row.slot, row.chain_id
                )));
            }
            *cell = Some(row.rate);
        }
        let rates = rates
            .into_iter()
            .enumerate()
            .map(|(t, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(s, r)| r.ok_or_else(|| Error::Trace(format!("missing slot {} for chain {}", t + 1, s + 1))))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        TraceSeries::new(rates)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,chain_id,rate\n");
        for (t, row) in self.rates.iter().enumerate() {
            for (s, r) in row.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", t + 1, s + 1, r));
            }
        }
        out
    }

    pub fn num_slots(&self) -> usize {
        self.rates.len()
    }

    pub fn num_chains(&self) -> usize {
        self.rates.first().map_or(0, Vec::len)
    }

    pub fn chain_series(&self, s: usize) -> Vec<f64> {
        self.rates.iter().map(|r| r[s]).collect()
    }

    /// Largest rate over all slots and chains.
    pub fn peak(&self) -> f64 {
        self.rates.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Largest rate of each chain.
    pub fn chain_peaks(&self) -> Vec<f64> {
        (0..self.num_chains())
            .map(|s| self.rates.iter().map(|r| r[s]).fold(0.0, f64::max))
            .collect()
    }

    pub fn chain_means(&self) -> Vec<f64> {
        (0..self.num_chains())
            .map(|s| self.rates.iter().map(|r| r[s]).sum::<f64>() / self.num_slots() as f64)
            .collect()
    }

    /// Peak-to-mean ratio of each chain.
    pub fn pmr(&self) -> Vec<f64> {
        self.chain_peaks()
            .into_iter()
            .zip(self.chain_means())
            .map(|(p, m)| p / m)
            .collect()
    }

    /// Scales all rates by one factor so that the largest equals `peak_mbps`.
    pub fn normalize_peak(&self, peak_mbps: f64) -> Result<TraceSeries> {
        let peak = self.peak();
        if peak <= 0.0 {
            return Err(Error::Trace("cannot normalize an all-zero trace".into()));
        }
        if !(peak_mbps.is_finite() && peak_mbps > 0.0) {
            return Err(Error::Trace(format!("bad peak {peak_mbps}")));
        }
        let f = peak_mbps / peak;
        let mut rates: Vec<Vec<f64>> = self.rates.iter().map(|r| r.iter().map(|x| x * f).collect()).collect();
        // Pin the maximum so normalization is an exact fixpoint.
        for (row, orig) in rates.iter_mut().zip(&self.rates) {
            for (x, &o) in row.iter_mut().zip(orig) {
                if o == peak {
                    *x = peak_mbps;
                }
            }
        }
        TraceSeries::new(rates)
    }

    /// Scales every chain by its own factor so that its mean equals `mean_mbps`.
    pub fn scale_to_mean(&self, mean_mbps: f64) -> Result<TraceSeries> {
        let means = self.chain_means();
        if means.iter().any(|&m| m <= 0.0) {
            return Err(Error::Trace("cannot rescale a chain with zero mean".into()));
        }
        let rates = self
            .rates
            .iter()
            .map(|r| r.iter().zip(&means).map(|(x, m)| x * mean_mbps / m).collect())
            .collect();
        TraceSeries::new(rates)
    }

    /// Reshapes each chain as `K * a^gamma` so its peak-to-mean ratio equals
    /// `target` while its mean stays the same.
    pub fn pmr_rescale(&self, target: f64) -> Result<(TraceSeries, Vec<PmrFit>)> {
        let mut columns = Vec::with_capacity(self.num_chains());
        let mut fits = Vec::with_capacity(self.num_chains());
        for s in 0..self.num_chains() {
            let (col, fit) = rescale_series(&self.chain_series(s), target)?;
            columns.push(col);
            fits.push(fit);
        }
        let rates = (0..self.num_slots())
            .map(|t| columns.iter().map(|c| c[t]).collect())
            .collect();
        Ok((TraceSeries::new(rates)?, fits))
    }
}

/// Relative tolerance of the PMR root search.
pub const PMR_TOLERANCE: f64 = 1e-3;

fn powered_pmr(unit: &[f64], gamma: f64) -> f64 {
    // `unit` is scaled to peak 1, so the peak of unit^gamma is 1.
    let mean = unit
        .iter()
        .map(|&a| if a > 0.0 { a.powf(gamma) } else { 0.0 })
        .sum::<f64>()
        / unit.len() as f64;
    1.0 / mean
}

/// Rescales one series to the target peak-to-mean ratio, preserving its mean.
pub fn rescale_series(series: &[f64], target: f64) -> Result<(Vec<f64>, PmrFit)> {
    if !(target.is_finite() && target >= 1.0) {
        return Err(Error::Trace(format!("target PMR must be at least 1, got {target}")));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let peak = series.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::Trace("series has no positive rate".into()));
    }
    let current = peak / mean;
    if (current - target).abs() <= 1e-12 * target {
        return Ok((series.to_vec(), PmrFit { gamma: 1.0, k: 1.0 }));
    }
    if target == 1.0 {
        return Ok((vec![mean; series.len()], PmrFit { gamma: 0.0, k: mean }));
    }
    let unit: Vec<f64> = series.iter().map(|a| a / peak).collect();
    // PMR(gamma) is nondecreasing; its infimum over gamma > 0 is
    // n / #positive and it grows without bound unless the series is flat.
    let mut lo = 1e-9;
    if powered_pmr(&unit, lo) > target * (1.0 + PMR_TOLERANCE) {
        return Err(Error::Trace(format!(
            "PMR {target} is below what this series can reach"
        )));
    }
    let mut hi = 1.0;
    while powered_pmr(&unit, hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Trace(format!("PMR {target} is unreachable for this series")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if powered_pmr(&unit, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let gamma = 0.5 * (lo + hi);
    let powered: Vec<f64> = unit
        .iter()
        .map(|&a| if a > 0.0 { a.powf(gamma) } else { 0.0 })
        .collect();
    let k_unit = mean / (powered.iter().sum::<f64>() / n);
    let out: Vec<f64> = powered.iter().map(|p| p * k_unit).collect();
    let achieved = out.iter().copied().fold(0.0, f64::max) / mean;
    if (achieved - target).abs() > PMR_TOLERANCE * target {
        return Err(Error::Trace(format!("PMR search reached {achieved}, wanted {target}")));
    }
    // K for the original units: K * a^gamma = k_unit * (a / peak)^gamma.
    let k = k_unit / peak.powf(gamma);
    Ok((out, PmrFit { gamma, k }))
}

/// Reads a CSV trace and scales it to the given peak.
pub fn load_trace(path: &Path, peak_mbps: f64, num_chains: usize) -> Result<TraceSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TraceSeries::parse_csv(&text, num_chains)?.normalize_peak(peak_mbps)
}

/// Seeded synthetic workload: a daily sinusoid times a weekly modulation
/// times lognormal noise, one independent phase and noise stream per chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTrace {
    pub slots: usize,
    pub slots_per_day: usize,
    pub diurnal_amplitude: f64,
    pub weekly_amplitude: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticTrace {
    /// One week of 5-minute slots.
    fn default() -> Self {
        SyntheticTrace {
            slots: 7 * 288,
            slots_per_day: 288,
            diurnal_amplitude: 0.6,
            weekly_amplitude: 0.25,
            noise_sigma: 0.2,
            seed: 0,
        }
    }
}

impl SyntheticTrace {
    /// Raw positive series with arbitrary scale.
    pub fn generate(&self, num_chains: usize) -> Result<TraceSeries> {
        if self.slots == 0 || self.slots_per_day == 0 || num_chains == 0 {
            return Err(Error::Trace(
                "synthetic trace needs slots, slots_per_day and chains".into(),
            ));
        }
        for (name, a) in [("diurnal", self.diurnal_amplitude), ("weekly", self.weekly_amplitude)] {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::Trace(format!("{name} amplitude must lie in [0, 1)")));
            }
        }
        let noise = LogNormal::new(0.0, self.noise_sigma).map_err(|e| Error::Trace(format!("noise sigma: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let tau = std::f64::consts::TAU;
        let day = self.slots_per_day as f64;
        let phases: Vec<f64> = (0..num_chains)
            .map(|_| rand::Rng::random::<f64>(&mut rng) * tau)
            .collect();
        let rates = (0..self.slots)
            .map(|t| {
                let t = t as f64;
                phases
                    .iter()
                    .map(|&ph| {
                        let daily = 1.0 + self.diurnal_amplitude * (tau * t / day + ph).sin();
                        let weekly = 1.0 + self.weekly_amplitude * (tau * t / (7.0 * day)).sin();
                        daily * weekly * noise.sample(&mut rng)
                    })
                    .collect()
            })
            .collect();
        TraceSeries::new(rates)
    }

    /// Generated trace reshaped to `pmr` and scaled to the given peak.
    pub fn build(&self, num_chains: usize, pmr: f64, peak_mbps: f64) -> Result<TraceSeries> {
        let (t, _) = self.generate(num_chains)?.pmr_rescale(pmr)?;
        t.normalize_peak(peak_mbps)
    }

    /// Generated trace reshaped to `pmr` with every chain's mean set to `mean_mbps`.
    pub fn build_with_mean(&self, num_chains: usize, pmr: f64, mean_mbps: f64) -> Result<TraceSeries> {
        let (t, _) = self.generate(num_chains)?.pmr_rescale(pmr)?;
        t.scale_to_mean(mean_mbps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_rescale_to_peak() {
        let t = TraceSeries::parse_csv("slot,chain_id,rate\n1,1,50\n2,1,100\n3,1,25\n", 1).unwrap();
        let n = t.normalize_peak(400_000.0).unwrap();
        assert_eq!(n.chain_series(0), vec![200_000.0, 400_000.0, 100_000.0]);
        assert_eq!(n.peak(), 400_000.0);
    }

    #[test]
    fn parse_errors() {
        assert!(TraceSeries::parse_csv("1,1,5\n3,1,5\n", 1).is_err());
        assert!(TraceSeries::parse_csv("1,1,-5\n", 1).is_err());
        assert!(TraceSeries::parse_csv("1,2,5\n", 1).is_err());
        assert!(TraceSeries::parse_csv("1,1,5\n1,1,6\n", 1).is_err());
        assert!(TraceSeries::parse_csv("1,1,5\n", 2).is_err());
        assert!(TraceSeries::parse_csv("0,1,5\n", 1).is_err());
        assert!(TraceSeries::parse_csv("", 1).is_err());
        let t = TraceSeries::parse_csv("2,2,4\n1,1,1\n2,1,3\n1,2,2\n", 2).unwrap();
        assert_eq!(t.rates, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn csv_round_trip() {
        let t = TraceSeries::new(vec![vec![1.5, 2.0], vec![0.0, 7.25]]).unwrap();
        assert_eq!(TraceSeries::parse_csv(&t.to_csv(), 2).unwrap(), t);
    }

    #[test]
    fn own_pmr_is_identity() {
        let s = [1.0, 4.0, 2.0, 3.0];
        let target = 4.0 / 2.5;
        let (out, fit) = rescale_series(&s, target).unwrap();
        assert_eq!(out, s.to_vec());
        assert_eq!(fit, PmrFit { gamma: 1.0, k: 1.0 });
    }

    #[test]
    fn pmr_one_flattens() {
        let (out, _) = rescale_series(&[1.0, 4.0, 2.0, 3.0], 1.0).unwrap();
        assert_eq!(out, vec![2.5; 4]);
    }

    #[test]
    fn flat_series_cannot_gain_pmr() {
        assert!(rescale_series(&[3.0; 10], 2.0).is_err());
        assert!(rescale_series(&[0.0; 10], 2.0).is_err());
        assert!(rescale_series(&[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn fit_reproduces_output() {
        let s = SyntheticTrace::default().generate(1).unwrap().chain_series(0);
        let (out, fit) = rescale_series(&s, 6.0).unwrap();
        for (a, o) in s.iter().zip(&out) {
            let v = fit.k * a.powf(fit.gamma);
            assert!((v - o).abs() <= 1e-9 * o.max(1.0));
        }
    }

    #[test]
    fn mean_preserved_across_targets() {
        let t = SyntheticTrace::default().generate(2).unwrap();
        let means = t.chain_means();
        for target in [2.0, 4.0, 6.0, 8.0, 10.0] {
            let (r, _) = t.pmr_rescale(target).unwrap();
            for (m0, m1) in means.iter().zip(r.chain_means()) {
                assert!((m1 - m0).abs() <= 1e-6 * m0, "target {target}");
            }
            for p in r.pmr() {
                assert!((p - target).abs() <= PMR_TOLERANCE * target);
            }
        }
    }

    #[test]
    fn synthetic_is_seeded() {
        let a = SyntheticTrace::default().generate(3).unwrap();
        let b = SyntheticTrace::default().generate(3).unwrap();
        let c = SyntheticTrace {
            seed: 1,
            ..Default::default()
        }
        .generate(3)
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let built = SyntheticTrace::default().build(1, 4.27, 400_000.0).unwrap();
        assert_eq!(built.peak(), 400_000.0);
        assert!((built.pmr()[0] - 4.27).abs() <= PMR_TOLERANCE * 4.27);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(rates in prop::collection::vec(0.0f64..1e6, 1..50), peak in 1.0f64..1e6) {
            prop_assume!(rates.iter().any(|&r| r > 0.0));
            let t = TraceSeries::new(rates.into_iter().map(|r| vec![r]).collect()).unwrap();
            let once = t.normalize_peak(peak).unwrap();
            let twice = once.normalize_peak(peak).unwrap();
            prop_assert_eq!(once.peak(), peak);
            prop_assert_eq!(once, twice);
        }
    }
}
