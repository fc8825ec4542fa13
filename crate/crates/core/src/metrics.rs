//! The five per-run metrics, trace replay, and cross-seed aggregation.

use serde::Serialize;

use crate::energy::{residual_ratio, Energy, PICOJOULES_PER_JOULE};
use crate::trace::{Record, Trace};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunCounters {
    /// First transmission attempt of every RREQ/RREP/RERR frame, per hop.
    pub control_tx: u64,
    pub data_generated: u64,
    pub data_received: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    /// `None` when nothing was delivered.
    pub nro: Option<f64>,
    pub pdf: f64,
    /// joules per delivered packet
    pub cep: Option<f64>,
    /// joules
    pub sdcen: f64,
    pub mrer: f64,
    pub control_tx: u64,
    pub data_generated: u64,
    pub data_received: u64,
    /// joules
    pub total_energy: f64,
}

/// Population standard deviation of per-node consumption, in joules.
pub fn sdcen(consumed: &[Energy]) -> f64 {
    if consumed.is_empty() {
        return 0.0;
    }
    let n = consumed.len() as u128;
    let sum: u128 = consumed.iter().map(|e| e.0 as u128).sum();
    let sum_sq: u128 = consumed.iter().map(|e| e.0 as u128 * e.0 as u128).sum();
    // n^2 * variance, exact
    let scaled = n * sum_sq - sum * sum;
    (scaled as f64).sqrt() / n as f64 / PICOJOULES_PER_JOULE as f64
}

pub fn compute_metrics(counters: RunCounters, consumed: &[Energy], initial: &[Energy]) -> MetricsReport {
    let total: u128 = consumed.iter().map(|e| e.0 as u128).sum();
    let total_energy = total as f64 / PICOJOULES_PER_JOULE as f64;
    let received = counters.data_received;
    let mrer = consumed
        .iter()
        .zip(initial)
        .map(|(&c, &i)| residual_ratio(i - c, i))
        .fold(f64::INFINITY, f64::min);
    MetricsReport {
        nro: (received > 0).then(|| counters.control_tx as f64 / received as f64),
        pdf: if counters.data_generated == 0 { 0.0 } else { received as f64 / counters.data_generated as f64 },
        cep: (received > 0).then(|| total_energy / received as f64),
        sdcen: sdcen(consumed),
        mrer: if mrer.is_finite() { mrer } else { 1.0 },
        control_tx: counters.control_tx,
        data_generated: counters.data_generated,
        data_received: received,
        total_energy,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayError {
    UnknownNode(u32),
    NoNodes,
}

impl std::fmt::Display for ReplayError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReplayError::UnknownNode(n) => write!(f, "trace charges node {n} without an init line"),
            ReplayError::NoNodes => f.write_str("trace has no init lines"),
        }
    }
}

impl std::error::Error for ReplayError {}

/// Recomputes the report from trace records alone.
pub fn replay(trace: &Trace) -> Result<MetricsReport, ReplayError> {
    let mut initial = Vec::new();
    let mut consumed: Vec<Energy> = Vec::new();
    let mut counters = RunCounters::default();
    for r in &trace.records {
        match r {
            Record::Init { node, initial: e } => {
                let i = *node as usize;
                if initial.len() <= i {
                    initial.resize(i + 1, Energy::ZERO);
                    consumed.resize(i + 1, Energy::ZERO);
                }
                initial[i] = *e;
            }
            Record::Gen { .. } => counters.data_generated += 1,
            Record::Deliver { .. } => counters.data_received += 1,
            Record::Tx { kind, attempt: 1, .. } if kind.is_control() => counters.control_tx += 1,
            Record::Charge { node, amount, .. } => {
                let slot = consumed.get_mut(*node as usize).ok_or(ReplayError::UnknownNode(*node))?;
                *slot += *amount;
            }
            _ => {}
        }
    }
    if initial.is_empty() {
        return Err(ReplayError::NoNodes);
    }
    Ok(compute_metrics(counters, &consumed, &initial))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// values that went into the statistics
    pub count: usize,
    pub undefined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyInput;

impl std::fmt::Display for EmptyInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("cannot aggregate an empty list")
    }
}

impl std::error::Error for EmptyInput {}

/// Mean, population standard deviation, min and max of the defined values.
pub fn summarize(values: &[Option<f64>]) -> Result<Summary, EmptyInput> {
    if values.is_empty() {
        return Err(EmptyInput);
    }
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let undefined = values.len() - defined.len();
    if defined.is_empty() {
        return Ok(Summary { mean: None, std: None, min: None, max: None, count: 0, undefined });
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let var = defined.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(Summary {
        mean: Some(mean),
        std: Some(var.sqrt()),
        min: defined.iter().copied().reduce(f64::min),
        max: defined.iter().copied().reduce(f64::max),
        count: defined.len(),
        undefined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateReport {
    pub nro: Summary,
    pub pdf: Summary,
    pub cep: Summary,
    pub sdcen: Summary,
    pub mrer: Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Nro,
    Pdf,
    Cep,
    Sdcen,
    Mrer,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Nro, Metric::Pdf, Metric::Cep, Metric::Sdcen, Metric::Mrer];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Nro => "nro",
            Metric::Pdf => "pdf",
            Metric::Cep => "cep",
            Metric::Sdcen => "sdcen",
            Metric::Mrer => "mrer",
        }
    }

    pub fn of(self, r: &MetricsReport) -> Option<f64> {
        match self {
            Metric::Nro => r.nro,
            Metric::Pdf => Some(r.pdf),
            Metric::Cep => r.cep,
            Metric::Sdcen => Some(r.sdcen),
            Metric::Mrer => Some(r.mrer),
        }
    }
}

impl AggregateReport {
    pub fn get(&self, m: Metric) -> &Summary {
        match m {
            Metric::Nro => &self.nro,
            Metric::Pdf => &self.pdf,
            Metric::Cep => &self.cep,
            Metric::Sdcen => &self.sdcen,
            Metric::Mrer => &self.mrer,
        }
    }
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<AggregateReport, EmptyInput> {
    let col = |m: Metric| summarize(&reports.iter().map(|r| m.of(r)).collect::<Vec<_>>());
    Ok(AggregateReport {
        nro: col(Metric::Nro)?,
        pdf: col(Metric::Pdf)?,
        cep: col(Metric::Cep)?,
        sdcen: col(Metric::Sdcen)?,
        mrer: col(Metric::Mrer)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn j(v: f64) -> Energy {
        Energy::from_joules(v)
    }

    #[test]
    fn nro_and_undefined_sentinels() {
        let c = RunCounters { control_tx: 10, data_generated: 8, data_received: 5 };
        let r = compute_metrics(c, &[j(1.0), j(1.0)], &[j(100.0), j(100.0)]);
        assert_eq!(r.nro, Some(2.0));
        assert_eq!(r.pdf, 5.0 / 8.0);
        assert_eq!(r.cep, Some(2.0 / 5.0));
        let z = compute_metrics(RunCounters { control_tx: 3, data_generated: 4, data_received: 0 }, &[j(1.0)], &[j(2.0)]);
        assert_eq!((z.nro, z.cep, z.pdf), (None, None, 0.0));
    }

    #[test]
    fn sdcen_values() {
        assert_eq!(sdcen(&[j(3.0); 4]), 0.0);
        assert_eq!(sdcen(&[j(0.0), j(2.0)]), 1.0);
    }

    #[test]
    fn mrer_is_worst_node() {
        let r = compute_metrics(RunCounters::default(), &[j(46.3), j(10.0)], &[j(100.0), j(100.0)]);
        assert!((r.mrer - 0.537).abs() < 1e-12);
        let r = compute_metrics(RunCounters::default(), &[j(0.0)], &[j(100.0)]);
        assert_eq!(r.mrer, 1.0);
    }

    #[test]
    fn summaries() {
        let s = summarize(&[Some(0.4), Some(0.6)]).unwrap();
        assert!((s.mean.unwrap() - 0.5).abs() < 1e-15);
        assert!((s.std.unwrap() - 0.1).abs() < 1e-12);
        let mut v = vec![Some(1.0); 9];
        v.push(None);
        let s = summarize(&v).unwrap();
        assert_eq!((s.mean, s.count, s.undefined), (Some(1.0), 9, 1));
        assert_eq!(summarize(&[]), Err(EmptyInput));
        let one = summarize(&[Some(3.5)]).unwrap();
        assert_eq!((one.mean, one.std), (Some(3.5), Some(0.0)));
    }

    fn naive_sdcen(v: &[u64]) -> f64 {
        let x: Vec<f64> = v.iter().map(|&p| p as f64 / 1e12).collect();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        (x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
    }

    proptest! {
        #[test]
        fn sdcen_matches_float_definition(v in prop::collection::vec(0u64..100_000_000_000_000, 1..60)) {
            let e: Vec<Energy> = v.iter().copied().map(Energy).collect();
            let got = sdcen(&e);
            let want = naive_sdcen(&v);
            prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
        }

        #[test]
        fn sdcen_detects_a_single_shift(n in 2usize..50, level in 0u64..1_000_000_000, c in 1u64..1_000_000_000, k in 0usize..50) {
            let mut e = vec![Energy(level); n];
            prop_assert_eq!(sdcen(&e), 0.0);
            e[k % n] = Energy(level + c);
            prop_assert!(sdcen(&e) > 0.0);
        }
    }
}
