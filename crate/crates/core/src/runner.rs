//! Multi-seed orchestration and the CSV result bundle.
//!
//! `results.csv` holds one row per (point, protocol, seed) and is the only
//! input the aggregate tables and charts are built from.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::RunnerError;
use crate::metrics::{summarize, Metric, Summary};
use crate::protocol::Protocol;
use crate::scenario::{Scenario, SweepSuite};
use crate::sim::{run, RunOptions, RunOutput};

/// Overrides the default `results` output root.
pub const OUTPUT_ENV: &str = "MANETSIM_OUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scenario: String,
    pub axis: String,
    pub series: String,
    pub x: f64,
    pub protocol: String,
    pub seed: u64,
    pub config_hash: String,
    pub nro: Option<f64>,
    pub pdf: f64,
    pub cep: Option<f64>,
    pub sdcen: f64,
    pub mrer: f64,
    pub control_tx: u64,
    pub data_generated: u64,
    pub data_received: u64,
    pub total_energy_j: f64,
}

impl RunRow {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Nro => self.nro,
            Metric::Pdf => Some(self.pdf),
            Metric::Cep => self.cep,
            Metric::Sdcen => Some(self.sdcen),
            Metric::Mrer => Some(self.mrer),
        }
    }
}

/// One point of a sweep, or a standalone scenario (`axis` = "scenario").
#[derive(Debug, Clone)]
pub struct RunPoint {
    pub axis: String,
    pub series: String,
    pub x: f64,
    pub scenario: Scenario,
}

pub fn suite_points(suite: &SweepSuite) -> Vec<RunPoint> {
    suite
        .points
        .iter()
        .map(|p| RunPoint { axis: suite.axis.as_str().to_string(), series: p.series.clone(), x: p.x, scenario: p.scenario.clone() })
        .collect()
}

pub fn scenario_point(scenario: &Scenario) -> RunPoint {
    RunPoint { axis: "scenario".into(), series: scenario.name.clone(), x: 0.0, scenario: scenario.clone() }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Directory for `trace-<hash>-<seed>.log` files; no traces when `None`.
    pub trace_dir: Option<PathBuf>,
}

pub fn trace_file_name(config_hash: &str, seed: u64) -> String {
    format!("trace-{config_hash}-{seed}.log")
}

/// Runs every (point, protocol, seed) tuple on the rayon pool. Rows come back
/// in input order regardless of scheduling.
pub fn run_points(
    points: &[RunPoint],
    protocols: &[Protocol],
    seeds: &[u64],
    opts: &SuiteOptions,
) -> Result<Vec<RunRow>, RunnerError> {
    if seeds.is_empty() || protocols.is_empty() || points.is_empty() {
        return Err(RunnerError::Empty);
    }
    let jobs: Vec<(&RunPoint, Scenario, u64)> = points
        .iter()
        .flat_map(|p| protocols.iter().map(move |&proto| (p, p.scenario.with_protocol(proto))))
        .flat_map(|(p, s)| seeds.iter().map(move |&seed| (p, s.clone(), seed)))
        .collect();
    if let Some(dir) = &opts.trace_dir {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    jobs.par_iter()
        .map(|(point, scenario, seed)| {
            let out = run(scenario, *seed, RunOptions { trace: opts.trace_dir.is_some() }).map_err(|source| {
                RunnerError::RunAborted {
                    scenario: scenario.name.clone(),
                    protocol: scenario.protocol.to_string(),
                    seed: *seed,
                    source,
                }
            })?;
            let hash = scenario.config_hash();
            if let (Some(dir), Some(trace)) = (&opts.trace_dir, &out.trace) {
                let path = dir.join(trace_file_name(&hash, *seed));
                fs::write(&path, trace.render()).map_err(|e| io_err(&path, e))?;
            }
            Ok(row(point, scenario, hash, &out))
        })
        .collect()
}

pub fn run_suite(
    suite: &SweepSuite,
    protocols: &[Protocol],
    seeds: &[u64],
    opts: &SuiteOptions,
) -> Result<Vec<RunRow>, RunnerError> {
    run_points(&suite_points(suite), protocols, seeds, opts)
}

fn row(point: &RunPoint, scenario: &Scenario, config_hash: String, out: &RunOutput) -> RunRow {
    let r = &out.report;
    RunRow {
        scenario: scenario.name.clone(),
        axis: point.axis.clone(),
        series: point.series.clone(),
        x: point.x,
        protocol: out.protocol.to_string(),
        seed: out.seed,
        config_hash,
        nro: r.nro,
        pdf: r.pdf,
        cep: r.cep,
        sdcen: r.sdcen,
        mrer: r.mrer,
        control_tx: r.control_tx,
        data_generated: r.data_generated,
        data_received: r.data_received,
        total_energy_j: r.total_energy,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> RunnerError {
    RunnerError::Io { path: path.to_path_buf(), source }
}

/// Short digest naming the output directory of a batch.
pub fn batch_hash(points: &[RunPoint], protocols: &[Protocol], seeds: &[u64]) -> String {
    let mut h = Sha256::new();
    for p in points {
        h.update(p.scenario.config_hash().as_bytes());
        h.update(b";");
    }
    for p in protocols {
        h.update(p.as_str().as_bytes());
        h.update(b",");
    }
    for s in seeds {
        h.update(s.to_le_bytes());
    }
    h.finalize().iter().take(4).map(|b| format!("{b:02x}")).collect()
}

pub fn write_results_csv(path: &Path, rows: &[RunRow]) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<RunRow>, RunnerError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<RunRow>, _>>()?;
    if rows.is_empty() {
        return Err(RunnerError::Empty);
    }
    Ok(rows)
}

/// Key of one curve point: (axis, series, x bits, protocol).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct PointKey {
    axis: String,
    series: String,
    x: OrderedX,
    protocol: String,
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct OrderedX(f64);

impl Eq for OrderedX {}

impl Ord for OrderedX {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub axis: String,
    pub series: String,
    pub x: f64,
    pub protocol: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub n: usize,
    pub undefined: usize,
}

/// Mean/std/min/max per (axis, series, x, protocol, metric), sorted.
pub fn aggregate_rows(rows: &[RunRow]) -> Result<Vec<AggregateRow>, RunnerError> {
    let mut groups: BTreeMap<PointKey, Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        let key = PointKey { axis: r.axis.clone(), series: r.series.clone(), x: OrderedX(r.x), protocol: r.protocol.clone() };
        groups.entry(key).or_default().push(r);
    }
    let mut out = Vec::new();
    for (key, members) in groups {
        for m in Metric::ALL {
            let values: Vec<Option<f64>> = members.iter().map(|r| r.metric(m)).collect();
            let s: Summary = summarize(&values).map_err(|_| RunnerError::Empty)?;
            out.push(AggregateRow {
                axis: key.axis.clone(),
                series: key.series.clone(),
                x: key.x.0,
                protocol: key.protocol.clone(),
                metric: m.as_str().to_string(),
                mean: s.mean,
                std: s.std,
                min: s.min,
                max: s.max,
                n: s.count,
                undefined: s.undefined,
            });
        }
    }
    Ok(out)
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// One chart's worth of data: a metric along one axis for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub axis: String,
    pub series: String,
    pub metric: Metric,
    /// protocol → points sorted by x
    pub curves: BTreeMap<String, Vec<CurvePoint>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Figure {
    /// `<metric>-<axis>` plus `-<series>` when the axis has several panels.
    pub fn stem(&self, multi_series: bool) -> String {
        if multi_series {
            format!("{}-{}-{}", self.metric.as_str(), self.axis, self.series)
        } else {
            format!("{}-{}", self.metric.as_str(), self.axis)
        }
    }
}

pub fn figures(agg: &[AggregateRow]) -> Vec<Figure> {
    let mut map: BTreeMap<(String, String, String), Figure> = BTreeMap::new();
    for r in agg {
        let Some(metric) = Metric::ALL.into_iter().find(|m| m.as_str() == r.metric) else { continue };
        let Some(mean) = r.mean else { continue };
        let fig = map.entry((r.axis.clone(), r.series.clone(), r.metric.clone())).or_insert_with(|| Figure {
            axis: r.axis.clone(),
            series: r.series.clone(),
            metric,
            curves: BTreeMap::new(),
        });
        fig.curves.entry(r.protocol.clone()).or_default().push(CurvePoint {
            x: r.x,
            mean,
            std: r.std.unwrap_or(0.0),
            n: r.n,
        });
    }
    let mut out: Vec<Figure> = map.into_values().collect();
    for f in &mut out {
        for c in f.curves.values_mut() {
            c.sort_by(|a, b| a.x.total_cmp(&b.x));
        }
    }
    out.sort_by(|a, b| (&a.axis, &a.series, a.metric).cmp(&(&b.axis, &b.series, b.metric)));
    out
}

pub(crate) fn multi_series(figs: &[Figure], axis: &str) -> bool {
    let mut series = figs.iter().filter(|f| f.axis == axis).map(|f| f.series.as_str());
    let first = series.next();
    series.any(|s| Some(s) != first)
}

/// Writes `figures/<stem>.csv`: x, then mean and std columns per protocol.
pub fn write_figure_csvs(dir: &Path, figs: &[Figure]) -> Result<Vec<PathBuf>, RunnerError> {
    let fig_dir = dir.join("figures");
    fs::create_dir_all(&fig_dir).map_err(|e| io_err(&fig_dir, e))?;
    let mut written = Vec::new();
    for f in figs {
        let path = fig_dir.join(format!("{}.csv", f.stem(multi_series(figs, &f.axis))));
        let mut w = csv::Writer::from_path(&path)?;
        let protocols: Vec<&String> = f.curves.keys().collect();
        let mut header = vec!["x".to_string()];
        for p in &protocols {
            header.push(format!("{p}_mean"));
            header.push(format!("{p}_std"));
        }
        w.write_record(&header)?;
        let mut xs: Vec<f64> = f.curves.values().flatten().map(|c| c.x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for x in xs {
            let mut rec = vec![x.to_string()];
            for p in &protocols {
                match f.curves[*p].iter().find(|c| c.x == x) {
                    Some(c) => {
                        rec.push(c.mean.to_string());
                        rec.push(c.std.to_string());
                    }
                    None => rec.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Aggregate table, per-figure CSVs and charts, all derived from
/// `<dir>/results.csv`.
pub fn derive_outputs(dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    let rows = read_results_csv(&dir.join("results.csv"))?;
    let agg = aggregate_rows(&rows)?;
    let agg_path = dir.join("aggregate.csv");
    write_aggregate_csv(&agg_path, &agg)?;
    let figs = figures(&agg);
    let mut written = vec![agg_path];
    written.extend(write_figure_csvs(dir, &figs)?);
    written.extend(crate::plot::write_charts(dir, &figs)?);
    Ok(written)
}

/// Writes `results.csv` and everything derived from it.
pub fn write_bundle(dir: &Path, rows: &[RunRow]) -> Result<Vec<PathBuf>, RunnerError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("results.csv");
    write_results_csv(&path, rows)?;
    let mut written = vec![path];
    written.extend(derive_outputs(dir)?);
    Ok(written)
}
