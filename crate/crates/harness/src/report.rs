//! Output files. Each run writes `<algorithm>_seed<seed>.json` (a
//! [`RunSummary`]) and `<algorithm>_seed<seed>.csv` with one row per slot:
//! `slot,op_cost,deploy_cost,total,n_1..n_I,x_1..x_I`.

use crate::error::{Error, Result};
use crate::runner::{Algorithm, RunResult, Violation};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use vnf_core::exact::cost_to_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub slots: usize,
    pub completed: bool,
    pub operational: f64,
    pub deployment: f64,
    pub total: f64,
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<u64>,
    pub violations: Vec<Violation>,
    pub mean_slot_micros: f64,
    pub max_slot_micros: f64,
}

impl RunSummary {
    pub fn from_result(r: &RunResult) -> RunSummary {
        let micros: Vec<f64> = r.slot_nanos.iter().map(|&n| n as f64 / 1000.0).collect();
        let mean = if micros.is_empty() {
            0.0
        } else {
            micros.iter().sum::<f64>() / micros.len() as f64
        };
        RunSummary {
            algorithm: r.algorithm,
            seed: r.seed,
            slots: r.instances.len(),
            completed: r.completed,
            operational: cost_to_f64(&r.cost.operational),
            deployment: cost_to_f64(&r.cost.deployment),
            total: cost_to_f64(&r.total()),
            digest: r.digest.clone(),
            alpha_max: r.alpha_max,
            violations: r.violations.clone(),
            mean_slot_micros: mean,
            max_slot_micros: micros.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn from_json_str(s: &str) -> Result<RunSummary> {
        let summary: RunSummary = serde_json::from_str(s)?;
        if summary.digest.len() != 64 || !summary.digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::Spec("digest must be 64 hex characters".into()));
        }
        Ok(summary)
    }

    pub const CSV_HEADER: &'static str =
        "algorithm,seed,slots,completed,operational,deployment,total,digest,violations,mean_slot_micros";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.seed,
            self.slots,
            self.completed,
            self.operational,
            self.deployment,
            self.total,
            self.digest,
            self.violations.len(),
            self.mean_slot_micros
        )
    }
}

/// The per-slot series as CSV text.
pub fn per_slot_csv(r: &RunResult) -> String {
    let types = r.demand.first().map_or(0, |n| n.len());
    let mut out = String::from("slot,op_cost,deploy_cost,total");
    for i in 1..=types {
        out.push_str(&format!(",n_{i}"));
    }
    for i in 1..=types {
        out.push_str(&format!(",x_{i}"));
    }
    out.push('\n');
    for (t, (c, x)) in r.cost.per_slot.iter().zip(&r.instances).enumerate() {
        out.push_str(&format!(
            "{},{},{},{}",
            t + 1,
            cost_to_f64(&c.operational),
            cost_to_f64(&c.deployment),
            cost_to_f64(&c.total())
        ));
        for n in r.demand[t].iter() {
            out.push_str(&format!(",{n}"));
        }
        for v in x {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the JSON summary and per-slot CSV of every result into `dir`.
pub fn write_results(dir: &Path, results: &[RunResult]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for r in results {
        let stem = format!("{}_seed{}", r.algorithm, r.seed);
        let json = dir.join(format!("{stem}.json"));
        write(&json, &serde_json::to_string_pretty(&RunSummary::from_result(r))?)?;
        let csv = dir.join(format!("{stem}.csv"));
        write(&csv, &per_slot_csv(r))?;
        written.push(json);
        written.push(csv);
    }
    Ok(written)
}

/// Reads every run summary in `dir`, sorted by algorithm then seed.
pub fn collect(dir: &Path) -> Result<Vec<RunSummary>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            out.push(RunSummary::from_json_str(&text)?);
        }
    }
    out.sort_by(|a, b| (a.algorithm.name(), a.seed).cmp(&(b.algorithm.name(), b.seed)));
    Ok(out)
}

pub fn summaries_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::from(RunSummary::CSV_HEADER);
    out.push('\n');
    for s in summaries {
        out.push_str(&s.csv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::{run, ExperimentSpec};
    use crate::trace::TraceSeries;

    fn sample() -> RunResult {
        let sys = crate::scenarios::single_chain().unwrap().with_servers(10);
        let trace = TraceSeries::new(vec![vec![2000.0], vec![4000.0], vec![1000.0]]).unwrap();
        run(&ExperimentSpec::new(sys, trace, Algorithm::Static, vec![3]))
            .unwrap()
            .remove(0)
    }

    #[test]
    fn summary_json_round_trips() {
        let s = RunSummary::from_result(&sample());
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(RunSummary::from_json_str(&text).unwrap(), s);
        assert!(RunSummary::from_json_str(&text.replace("\"seed\"", "\"sead\"")).is_err());
    }

    #[test]
    fn csv_has_one_row_per_slot() {
        let csv = per_slot_csv(&sample());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "slot,op_cost,deploy_cost,total,n_1,n_2,n_3,x_1,x_2,x_3");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("2,"));
    }

    #[test]
    fn write_and_collect() {
        let dir = std::env::temp_dir().join(format!("vnfsim-report-{}", std::process::id()));
        let r = sample();
        write_results(&dir, std::slice::from_ref(&r)).unwrap();
        let got = collect(&dir).unwrap();
        assert_eq!(got, vec![RunSummary::from_result(&r)]);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
