use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vnf_core::preplan::{preplan, PreplanOptions};
use vnf_core::SystemConfig;
use vnf_harness::report::{collect, summaries_csv, write_results, RunSummary};
use vnf_harness::trace::{load_trace, SyntheticTrace};
use vnf_harness::{run, Algorithm, Error, ExperimentSpec, Result};

#[derive(Parser)]
#[command(name = "vnfsim", version, about = "Trace-driven simulation of online VNF scaling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm over a trace for a range of seeds.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// CSV file with `slot,chain_id,rate` rows, or `synthetic`.
        #[arg(long)]
        trace: String,
        #[arg(long, value_parser = parse_algorithm)]
        algo: Algorithm,
        /// `a..b` (exclusive), `a..=b`, or a comma-separated list.
        #[arg(long, default_value = "0", value_parser = parse_seeds)]
        seeds: Seeds,
        /// Reshape every chain to this peak-to-mean ratio (mean preserved).
        #[arg(long)]
        pmr: Option<f64>,
        /// Set every deployment cost to this multiple of the operational cost.
        #[arg(long)]
        deploy_op_ratio: Option<f64>,
        /// Largest rate in the trace after normalization, in Mbps.
        #[arg(long, default_value_t = 400_000.0)]
        peak_mbps: f64,
        /// Length of a synthetic trace.
        #[arg(long, default_value_t = 2016)]
        slots: usize,
        /// Seed of the synthetic trace generator.
        #[arg(long, default_value_t = 0)]
        trace_seed: u64,
        /// Rate resolution of pre-planning, in Mbps.
        #[arg(long, default_value_t = 1)]
        rate_step: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the largest supportable rate and the maximum placement of a chain.
    Preplan {
        #[arg(long)]
        config: PathBuf,
        /// Chain to plan; defaults to the first.
        #[arg(long)]
        chain: Option<u32>,
        #[arg(long, default_value_t = 1)]
        rate_step: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize the run files in a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Emit::Csv)]
        emit: Emit,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Csv,
    Json,
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    let num = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("bad seed {x:?}: {e}"));
    let seeds = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("seed range {s:?} is empty"));
    }
    Ok(Seeds(seeds))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn simulate(cmd: Command) -> Result<()> {
    let Command::Simulate {
        config,
        trace,
        algo,
        seeds,
        pmr,
        deploy_op_ratio,
        peak_mbps,
        slots,
        trace_seed,
        rate_step,
        out,
    } = cmd
    else {
        unreachable!()
    };
    let mut system = SystemConfig::from_json_str(&read(&config)?)?;
    if let Some(r) = deploy_op_ratio {
        system = system.with_deploy_ratio(r)?;
    }
    let chains = system.chains.len();
    let mut series = if trace == "synthetic" {
        SyntheticTrace {
            slots,
            seed: trace_seed,
            ..Default::default()
        }
        .generate(chains)?
    } else {
        load_trace(Path::new(&trace), peak_mbps, chains)?
    };
    if let Some(p) = pmr {
        series = series.pmr_rescale(p)?.0;
    }
    series = series.normalize_peak(peak_mbps)?;
    let mut spec = ExperimentSpec::new(system, series, algo, seeds.0);
    spec.options.rate_step = rate_step;
    let results = run(&spec)?;
    write_results(&out, &results)?;
    println!("{}", RunSummary::CSV_HEADER);
    for r in &results {
        println!("{}", RunSummary::from_result(r).csv_row());
    }
    Ok(())
}

fn main_inner() -> Result<()> {
    match Cli::parse().command {
        cmd @ Command::Simulate { .. } => simulate(cmd),
        Command::Preplan {
            config,
            chain,
            rate_step,
            out,
        } => {
            let system = SystemConfig::from_json_str(&read(&config)?)?;
            let chain = chain.unwrap_or(system.chains[0].id);
            let opts = PreplanOptions {
                rate_step,
                ..Default::default()
            };
            let plan = preplan(&system, chain, &opts)?;
            std::fs::write(&out, plan.to_json()?).map_err(|source| Error::Io {
                path: out.display().to_string(),
                source,
            })?;
            let n = plan.max_demand(&system)?;
            println!("chain {chain}: alpha_max {} Mbps, demand {:?}", plan.alpha_max, n.0);
            Ok(())
        }
        Command::Report { input, emit } => {
            let summaries = collect(&input)?;
            match emit {
                Emit::Csv => print!("{}", summaries_csv(&summaries)),
                Emit::Json => println!("{}", serde_json::to_string_pretty(&summaries)?),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("0..3").unwrap().0, vec![0, 1, 2]);
        assert_eq!(parse_seeds("2..=3").unwrap().0, vec![2, 3]);
        assert_eq!(parse_seeds("5,1").unwrap().0, vec![5, 1]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
