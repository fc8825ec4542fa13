use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use manet_sim::protocol::Protocol;
use manet_sim::runner::{
    batch_hash, derive_outputs, output_root, read_results_csv, run_points, scenario_point, suite_points, write_bundle,
    aggregate_rows, AggregateRow, RunPoint, SuiteOptions,
};
use manet_sim::scenario::{build_suite, Axis, Scenario};

#[derive(Parser)]
#[command(name = "manetsim", version, about = "Packet-level DSR / MEA-DSR simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file for each of its seeds.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Skip writing per-run trace files.
        #[arg(long)]
        no_traces: bool,
    },
    /// Run a sweep suite: mobility, density, rate or sessions.
    Suite {
        axis: String,
        #[arg(long, default_value_t = 0.5)]
        scale: f64,
        /// Scenario file whose values fill everything the axis does not set.
        #[arg(long)]
        base: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Write per-run trace files.
        #[arg(long)]
        traces: bool,
    },
    /// Regenerate aggregate tables and charts from a results directory.
    Plot { dir: PathBuf },
    /// Check a scenario file and print it with all defaults filled in.
    Validate { scenario: PathBuf },
}

#[derive(Args)]
struct Common {
    /// Number of seeds (1..=N); defaults to the scenario's seed list.
    #[arg(long)]
    seeds: Option<u64>,
    /// Comma-separated protocol list.
    #[arg(long, value_delimiter = ',')]
    protocols: Option<Vec<String>>,
    /// Output root; defaults to $MANETSIM_OUT or ./results.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn protocols(&self, default: &[Protocol]) -> Result<Vec<Protocol>> {
        match &self.protocols {
            None => Ok(default.to_vec()),
            Some(list) => list
                .iter()
                .map(|p| Protocol::parse(p.trim()).with_context(|| format!("unknown protocol `{p}` (expected dsr or mea-dsr)")))
                .collect(),
        }
    }

    fn seeds(&self, default: &[u64]) -> Result<Vec<u64>> {
        match self.seeds {
            Some(0) => bail!("--seeds must be at least 1"),
            Some(n) => Ok((1..=n).collect()),
            None => Ok(default.to_vec()),
        }
    }

    fn root(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(output_root)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, common, no_traces } => {
            let s = Scenario::load(&scenario)?;
            let protocols = common.protocols(&[s.protocol])?;
            let seeds = common.seeds(&s.seeds)?;
            let points = vec![scenario_point(&s)];
            let dir = common.root().join(format!("{}-{}", s.name, batch_hash(&points, &protocols, &seeds)));
            execute(&points, &protocols, &seeds, &dir, !no_traces)
        }
        Command::Suite { axis, scale, base, common, traces } => {
            let Some(axis) = Axis::parse(&axis) else {
                bail!("unknown axis `{axis}` (expected mobility, density, rate or sessions)");
            };
            if !(scale > 0.0 && scale.is_finite()) {
                bail!("--scale must be positive");
            }
            let base = match &base {
                Some(p) => Scenario::load(p)?,
                None => Scenario::default(),
            };
            let protocols = common.protocols(&[Protocol::Dsr, Protocol::MeaDsr])?;
            let seeds = common.seeds(&base.seeds)?;
            let points = suite_points(&build_suite(axis, &base, scale));
            let dir = common.root().join(format!("{axis}-{}", batch_hash(&points, &protocols, &seeds)));
            execute(&points, &protocols, &seeds, &dir, traces)
        }
        Command::Plot { dir } => {
            let written = derive_outputs(&dir)?;
            println!("wrote {} files under {}", written.len(), dir.display());
            Ok(())
        }
        Command::Validate { scenario } => {
            let s = Scenario::load(&scenario)?;
            println!("# {} ok, config hash {}", scenario.display(), s.config_hash());
            print!("{}", s.to_toml());
            Ok(())
        }
    }
}

fn execute(points: &[RunPoint], protocols: &[Protocol], seeds: &[u64], dir: &Path, traces: bool) -> Result<()> {
    let opts = SuiteOptions { trace_dir: traces.then(|| dir.to_path_buf()) };
    eprintln!(
        "running {} point(s) x {} protocol(s) x {} seed(s) into {}",
        points.len(),
        protocols.len(),
        seeds.len(),
        dir.display()
    );
    let rows = run_points(points, protocols, seeds, &opts)?;
    write_bundle(dir, &rows)?;
    let rows = read_results_csv(&dir.join("results.csv"))?;
    let agg: Vec<AggregateRow> = aggregate_rows(&rows)?;
    print_summary(&agg);
    println!("results: {}", dir.display());
    Ok(())
}

fn print_summary(agg: &[AggregateRow]) {
    println!("{:<10} {:>8} {:<8} {:>8} {:>8} {:>10} {:>10} {:>8}", "series", "x", "protocol", "nro", "pdf", "cep", "sdcen", "mrer");
    let mut i = 0;
    while i < agg.len() {
        let head = &agg[i];
        let group: Vec<&AggregateRow> = agg[i..]
            .iter()
            .take_while(|a| a.axis == head.axis && a.series == head.series && a.x == head.x && a.protocol == head.protocol)
            .collect();
        let get = |m: &str| {
            group.iter().find(|a| a.metric == m).and_then(|a| a.mean).map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
        };
        println!(
            "{:<10} {:>8} {:<8} {:>8} {:>8} {:>10} {:>10} {:>8}",
            head.series,
            head.x,
            head.protocol,
            get("nro"),
            get("pdf"),
            get("cep"),
            get("sdcen"),
            get("mrer")
        );
        i += group.len();
    }
}
