//! Batch experiments: outage sweeps, capacity sweeps, scheme comparison and
//! validation of the SNR recursion against the baseband chain.
//!
//! A run produces a CSV table and a JSON manifest echoing the resolved
//! configuration. Both are pure functions of the configuration, including the
//! seed; the worker count does not change a byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseband::{lemma1_gap_report_at, GapReport};
use crate::closedform::fit_diversity_order;
use crate::error::{Error, Result};
use crate::model::{random_topology, Link, NetworkTopology, Scheme};
use crate::montecarlo::{
    resolved_tail, sweep_m, sweep_snr, top_decade, with_workers, CapacityPoint, SweepPoint,
};

/// Fixed header of outage tables.
pub const OUTAGE_HEADER: [&str; 10] = [
    "scheme",
    "K",
    "M",
    "R",
    "snr_db",
    "p_out_mc",
    "ci_lo",
    "ci_hi",
    "p_out_theorem1",
    "n_trials",
];

/// Relative CI width below which a Monte Carlo point counts as resolved for
/// slope fitting.
pub const RESOLVED_REL_CI_WIDTH: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    OutageSweep,
    CapacitySweep,
    ValidateLemma1,
    CompareSchemes,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::OutageSweep => "outage-sweep",
            ExperimentKind::CapacitySweep => "capacity-sweep",
            ExperimentKind::ValidateLemma1 => "validate-lemma1",
            ExperimentKind::CompareSchemes => "compare-schemes",
        }
    }
}

/// Where link variances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSource {
    /// Independent uniform draws on `[lo, hi]`, seeded by the run seed.
    Range { lo: f64, hi: f64 },
    /// Explicit table keyed like `"s->1"`, `"1->2"`, `"2->d"`.
    Table(BTreeMap<String, f64>),
}

/// Partially specified configuration, as read from a JSON file or
/// collected from command-line flags. [`ConfigPatch::merge`] lets flags
/// override file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub experiment: Option<ExperimentKind>,
    pub relays: Option<Vec<usize>>,
    pub symbols: Option<Vec<usize>>,
    pub rate: Option<f64>,
    pub snr_db: Option<Vec<f64>>,
    pub schemes: Option<Vec<Scheme>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub variance_range: Option<(f64, f64)>,
    pub variances: Option<BTreeMap<String, f64>>,
    pub n0: Option<f64>,
    pub noise_traces: Option<u64>,
    pub channels: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ConfigPatch {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: ConfigPatch) -> ConfigPatch {
        ConfigPatch {
            experiment: over.experiment.or(self.experiment),
            relays: over.relays.or(self.relays),
            symbols: over.symbols.or(self.symbols),
            rate: over.rate.or(self.rate),
            snr_db: over.snr_db.or(self.snr_db),
            schemes: over.schemes.or(self.schemes),
            trials: over.trials.or(self.trials),
            seed: over.seed.or(self.seed),
            variance_range: over.variance_range.or(self.variance_range),
            variances: over.variances.or(self.variances),
            n0: over.n0.or(self.n0),
            noise_traces: over.noise_traces.or(self.noise_traces),
            channels: over.channels.or(self.channels),
            workers: over.workers.or(self.workers),
            out: over.out.or(self.out),
        }
    }

    /// Fills defaults and validates.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let kind = self
            .experiment
            .ok_or_else(|| Error::invalid("experiment", "no experiment kind given"))?;
        let variances = match (self.variances, self.variance_range) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "variances",
                    "give either an explicit table or --variance-range, not both",
                ))
            }
            (Some(t), None) => VarianceSource::Table(t),
            (None, Some((lo, hi))) => VarianceSource::Range { lo, hi },
            (None, None) => VarianceSource::Range { lo: 0.1, hi: 25.0 },
        };
        let relays = match (&variances, self.relays) {
            (_, Some(r)) => r,
            (VarianceSource::Table(t), None) => vec![relays_in_table(t)?],
            (VarianceSource::Range { .. }, None) => match kind {
                ExperimentKind::CapacitySweep => vec![2, 3],
                _ => vec![2],
            },
        };
        let symbols = self.symbols.unwrap_or_else(|| match kind {
            ExperimentKind::CapacitySweep => (1..=10).collect(),
            _ => vec![2],
        });
        let snr_db = self.snr_db.unwrap_or_else(|| match kind {
            ExperimentKind::CapacitySweep => vec![25.0],
            ExperimentKind::ValidateLemma1 => vec![0.0, 10.0, 20.0, 30.0],
            _ => (0..=6).map(|i| 5.0 * i as f64).collect(),
        });
        let schemes = self.schemes.unwrap_or_else(|| match kind {
            ExperimentKind::OutageSweep | ExperimentKind::ValidateLemma1 => vec![Scheme::StncOhaf],
            ExperimentKind::CapacitySweep => vec![Scheme::StncOhaf, Scheme::StncAf],
            ExperimentKind::CompareSchemes => Scheme::ALL.to_vec(),
        });
        let config = ExperimentConfig {
            kind,
            relays,
            symbols,
            rate: self.rate.unwrap_or(1.0),
            snr_db,
            schemes,
            n_trials: self.trials.unwrap_or(1_000_000),
            seed: self.seed.unwrap_or(1),
            variances,
            n0: self.n0.unwrap_or(1.0),
            noise_traces: self.noise_traces.unwrap_or(10_000),
            channels: self.channels.unwrap_or(100),
            workers: self.workers,
            out: self.out,
        };
        config.validate()?;
        Ok(config)
    }
}

fn relays_in_table(table: &BTreeMap<String, f64>) -> Result<usize> {
    let mut k = 0;
    for key in table.keys() {
        let link: Link = key.parse()?;
        for node in [link.from, link.to] {
            if let crate::Node::Relay(r) = node {
                k = k.max(r);
            }
        }
    }
    Ok(k)
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub relays: Vec<usize>,
    pub symbols: Vec<usize>,
    pub rate: f64,
    pub snr_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub n_trials: u64,
    pub seed: u64,
    pub variances: VarianceSource,
    pub n0: f64,
    pub noise_traces: u64,
    pub channels: u64,
    /// Not part of the result: any worker count gives identical output.
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn strictly_increasing<T: PartialOrd>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.relays.is_empty() || !strictly_increasing(&self.relays) {
            return Err(Error::invalid(
                "relays",
                "need a non-empty increasing list of K",
            ));
        }
        if self.symbols.is_empty() || self.symbols[0] < 1 || !strictly_increasing(&self.symbols) {
            return Err(Error::invalid(
                "symbols",
                "need a non-empty increasing list of M >= 1",
            ));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::invalid(
                "rate",
                format!("must be positive, got {}", self.rate),
            ));
        }
        if self.snr_db.is_empty()
            || self.snr_db.iter().any(|x| !x.is_finite())
            || !strictly_increasing(&self.snr_db)
        {
            return Err(Error::invalid("snr-db", "need a non-empty increasing grid"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("scheme", "need at least one scheme"));
        }
        if self.n_trials < 1 {
            return Err(Error::invalid("trials", "need at least one trial"));
        }
        if !(self.n0.is_finite() && self.n0 > 0.0) {
            return Err(Error::invalid("n0", "noise power must be positive"));
        }
        if self.kind == ExperimentKind::ValidateLemma1 {
            if self.channels < 10 {
                return Err(Error::invalid("channels", "need at least 10 channel draws"));
            }
            if self.noise_traces < 1000 {
                return Err(Error::invalid(
                    "noise-traces",
                    "need at least 1000 noise traces",
                ));
            }
        }
        match &self.variances {
            VarianceSource::Range { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo <= hi) {
                    return Err(Error::invalid(
                        "variance-range",
                        format!("need 0 < lo <= hi, got {lo},{hi}"),
                    ));
                }
            }
            VarianceSource::Table(_) => {
                if self.relays.len() != 1 {
                    return Err(Error::invalid(
                        "relays",
                        "an explicit variance table fixes a single K",
                    ));
                }
            }
        }
        // Building every topology catches malformed tables up front.
        for &k in &self.relays {
            self.topology(k, self.symbols[0])?;
        }
        Ok(())
    }

    /// The topology used for `K` relays; identical for every scheme and SNR.
    pub fn topology(&self, k: usize, m: usize) -> Result<NetworkTopology> {
        match &self.variances {
            VarianceSource::Range { lo, hi } => random_topology(k, m, (*lo, *hi), self.seed),
            VarianceSource::Table(t) => {
                let table = t
                    .iter()
                    .map(|(key, &v)| Ok((key.parse::<Link>()?, v)))
                    .collect::<Result<Vec<_>>>()?;
                NetworkTopology::from_links(k, m, table)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct OutageRow {
    scheme: Scheme,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "R")]
    rate: f64,
    snr_db: f64,
    p_out_mc: f64,
    ci_lo: f64,
    ci_hi: f64,
    p_out_theorem1: Option<f64>,
    n_trials: u64,
}

impl From<&SweepPoint> for OutageRow {
    fn from(p: &SweepPoint) -> Self {
        Self {
            scheme: p.scheme,
            k: p.k,
            m: p.m,
            rate: p.rate,
            snr_db: p.snr_db,
            p_out_mc: p.estimate.p_hat,
            ci_lo: p.estimate.ci95.0,
            ci_hi: p.estimate.ci95.1,
            p_out_theorem1: p.theorem1.map(|t| t.raw),
            n_trials: p.estimate.n_trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CapacityRow {
    scheme: Scheme,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "R")]
    rate: f64,
    snr_db: f64,
    p_out_mc: f64,
    ci_lo: f64,
    ci_hi: f64,
    p_out_theorem1: Option<f64>,
    n_trials: u64,
    c_soc: f64,
    c_soc_lo: f64,
    c_soc_hi: f64,
}

impl From<&CapacityPoint> for CapacityRow {
    fn from(p: &CapacityPoint) -> Self {
        Self {
            scheme: p.scheme,
            k: p.k,
            m: p.m,
            rate: p.rate,
            snr_db: p.snr_db,
            p_out_mc: p.estimate.p_hat,
            ci_lo: p.estimate.ci95.0,
            ci_hi: p.estimate.ci95.1,
            p_out_theorem1: p.theorem1.map(|t| t.raw),
            n_trials: p.estimate.n_trials,
            c_soc: p.c_soc,
            c_soc_lo: p.c_soc_ci.0,
            c_soc_hi: p.c_soc_ci.1,
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    pub manifest: serde_json::Value,
    pub outage: Vec<SweepPoint>,
    pub capacity: Vec<CapacityPoint>,
    pub lemma1: Vec<GapReport>,
}

impl RunOutput {
    /// Writes the CSV to `path` and the manifest next to it as
    /// `<stem>.manifest.json`.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, &self.csv)?;
        let manifest_path = manifest_path(path);
        let mut json = serde_json::to_string_pretty(&self.manifest)?;
        json.push('\n');
        std::fs::write(&manifest_path, json)?;
        Ok(manifest_path)
    }
}

pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    csv_path.with_file_name(format!("{stem}.manifest.json"))
}

fn to_csv<T: Serialize>(rows: &[T], header: Option<&[&str]>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    match config.workers {
        Some(w) => with_workers(w, || run_inner(config))?,
        None => run_inner(config),
    }
}

fn run_inner(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut outage = Vec::new();
    let mut capacity = Vec::new();
    let mut lemma1 = Vec::new();
    let mut summary = serde_json::Map::new();

    let csv = match config.kind {
        ExperimentKind::OutageSweep | ExperimentKind::CompareSchemes => {
            let mut comparisons = Vec::new();
            for &k in &config.relays {
                for &m in &config.symbols {
                    let topo = config.topology(k, m)?;
                    let pts = sweep_snr(
                        &topo,
                        &config.schemes,
                        config.rate,
                        &config.snr_db,
                        config.n_trials,
                        config.seed,
                        config.n0,
                    )?;
                    if config.kind == ExperimentKind::CompareSchemes {
                        comparisons.push(compare_summary(k, m, &config.schemes, &pts));
                    }
                    outage.extend(pts);
                }
            }
            if config.kind == ExperimentKind::CompareSchemes {
                summary.insert("comparisons".into(), serde_json::Value::Array(comparisons));
            }
            let rows: Vec<OutageRow> = outage.iter().map(OutageRow::from).collect();
            to_csv(&rows, Some(&OUTAGE_HEADER))?
        }
        ExperimentKind::CapacitySweep => {
            let mut optima = Vec::new();
            for &k in &config.relays {
                let topo = config.topology(k, config.symbols[0])?;
                for &snr in &config.snr_db {
                    let pts = sweep_m(
                        &topo,
                        &config.schemes,
                        config.rate,
                        &config.symbols,
                        snr,
                        config.n_trials,
                        config.seed,
                        config.n0,
                    )?;
                    for &s in &config.schemes {
                        if let Some(best) = pts
                            .iter()
                            .filter(|p| p.scheme == s)
                            .max_by(|a, b| a.c_soc.total_cmp(&b.c_soc))
                        {
                            optima.push(serde_json::json!({
                                "scheme": s, "K": k, "snr_db": snr,
                                "best_M": best.m, "c_soc": best.c_soc,
                            }));
                        }
                    }
                    capacity.extend(pts);
                }
            }
            summary.insert("optimal_M".into(), serde_json::Value::Array(optima));
            let rows: Vec<CapacityRow> = capacity.iter().map(CapacityRow::from).collect();
            to_csv(&rows, None)?
        }
        ExperimentKind::ValidateLemma1 => {
            for &k in &config.relays {
                for &m in &config.symbols {
                    for &snr in &config.snr_db {
                        lemma1.push(lemma1_gap_report_at(
                            k,
                            m,
                            snr,
                            config.channels,
                            config.noise_traces,
                            config.seed,
                        )?);
                    }
                }
            }
            summary.insert("reports".into(), serde_json::to_value(&lemma1)?);
            to_csv(&lemma1, None)?
        }
    };

    let rows = csv.lines().count().saturating_sub(1);
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.kind.name(),
        "config": config,
        "rows": rows,
        "summary": summary,
    });
    Ok(RunOutput {
        csv,
        manifest,
        outage,
        capacity,
        lemma1,
    })
}

fn compare_summary(
    k: usize,
    m: usize,
    schemes: &[Scheme],
    pts: &[SweepPoint],
) -> serde_json::Value {
    let mut lowest = Vec::new();
    let snrs: Vec<f64> = {
        let mut v: Vec<f64> = pts.iter().map(|p| p.snr_db).collect();
        v.dedup();
        v
    };
    for snr in &snrs {
        let best = pts
            .iter()
            .filter(|p| p.snr_db == *snr)
            .min_by(|a, b| a.estimate.p_hat.total_cmp(&b.estimate.p_hat))
            .map(|p| p.scheme);
        lowest.push(serde_json::json!({ "snr_db": snr, "lowest": best }));
    }
    let diversity: BTreeMap<String, Option<f64>> = schemes
        .iter()
        .map(|&s| {
            let tail = top_decade(&resolved_tail(pts, s, RESOLVED_REL_CI_WIDTH));
            (s.name().to_string(), fit_diversity_order(&tail).ok())
        })
        .collect();
    serde_json::json!({ "K": k, "M": m, "lowest_outage": lowest, "diversity_order": diversity })
}
