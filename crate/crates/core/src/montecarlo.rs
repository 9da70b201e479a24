//! Monte Carlo outage estimation.
//!
//! Trial `t` draws its channel from `TrialStream::new(seed, t)` only, so the
//! outage count is a pure function of `(seed, n_trials, configuration)`.
//! Blocks of trials are farmed out with rayon and the per-block counts are
//! summed as integers, which makes the result independent of the worker count.
//!
//! Every scheme and every SNR point of a sweep sees the same channel draws
//! (common random numbers), so scheme comparisons are pathwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform::{sum_outage_capacity, theorem1_outage, OutageCurvePoint, Theorem1Value};
use crate::error::{Error, Result};
use crate::fading::fill_link_snrs;
use crate::model::{mean_link_snrs, outage_threshold, NetworkTopology, PowerAllocation, Scheme};
use crate::snr::evaluate_into;
use crate::stream::TrialStream;

const BLOCK: u64 = 1 << 14;

/// Normal quantile for a two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

/// Below this many outages (or non-outages) the Wilson score interval
/// replaces the normal approximation.
pub const SMALL_COUNT: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub outages: u64,
    pub n_trials: u64,
    pub std_err: f64,
    pub ci95: (f64, f64),
}

impl OutageEstimate {
    pub fn from_counts(outages: u64, n_trials: u64) -> Self {
        assert!(n_trials > 0 && outages <= n_trials);
        let n = n_trials as f64;
        let p = outages as f64 / n;
        let std_err = (p * (1.0 - p) / n).sqrt();
        let ci95 = if outages < SMALL_COUNT || n_trials - outages < SMALL_COUNT {
            wilson_interval(outages, n_trials, Z95)
        } else {
            ((p - Z95 * std_err).max(0.0), (p + Z95 * std_err).min(1.0))
        };
        Self {
            p_hat: p,
            outages,
            n_trials,
            std_err,
            ci95,
        }
    }

    /// `(hi - lo) / p_hat`, infinite when no outage was seen.
    pub fn relative_ci_width(&self) -> f64 {
        if self.outages == 0 {
            f64::INFINITY
        } else {
            (self.ci95.1 - self.ci95.0) / self.p_hat
        }
    }
}

fn wilson_interval(x: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = x as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Guard the rounding at the ends so that lo <= p <= hi always holds.
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

/// Runs `f` on a dedicated rayon pool with `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    Ok(pool.install(f))
}

/// Outage estimates for several schemes from one pass over the trials.
pub fn estimate_outage_multi(
    topo: &NetworkTopology,
    power: &PowerAllocation,
    schemes: &[Scheme],
    rate: f64,
    n_trials: u64,
    seed: u64,
) -> Result<Vec<OutageEstimate>> {
    if n_trials < 1 {
        return Err(Error::invalid("n_trials", "need at least one trial"));
    }
    let (k, m) = (topo.n_relays(), topo.n_symbols());
    let means = mean_link_snrs(topo, power)?;
    let thresholds = schemes
        .iter()
        .map(|&s| outage_threshold(s, m, k, rate))
        .collect::<Result<Vec<_>>>()?;
    let layout = topo.layout();

    let n_blocks = n_trials.div_ceil(BLOCK);
    let counts = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut snr = vec![0.0; means.len()];
            let mut a = Vec::with_capacity(k);
            let mut counts = vec![0u64; schemes.len()];
            for t in b * BLOCK..((b + 1) * BLOCK).min(n_trials) {
                fill_link_snrs(&means, TrialStream::new(seed, t), &mut snr);
                for ((&s, &th), c) in schemes.iter().zip(&thresholds).zip(counts.iter_mut()) {
                    // Strict comparison: a tie is not an outage.
                    if evaluate_into(layout, &snr, m, s, &mut a) < th {
                        *c += 1;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; schemes.len()],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                x
            },
        );
    Ok(counts
        .into_iter()
        .map(|c| OutageEstimate::from_counts(c, n_trials))
        .collect())
}

pub fn estimate_outage(
    topo: &NetworkTopology,
    power: &PowerAllocation,
    scheme: Scheme,
    rate: f64,
    n_trials: u64,
    seed: u64,
) -> Result<OutageEstimate> {
    Ok(estimate_outage_multi(topo, power, &[scheme], rate, n_trials, seed)?[0])
}

/// One scheme at one system SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scheme: Scheme,
    pub k: usize,
    pub m: usize,
    pub rate: f64,
    pub snr_db: f64,
    pub estimate: OutageEstimate,
    /// Closed-form overlay; present for STNC-OHAF with at least one relay.
    pub theorem1: Option<Theorem1Value>,
}

fn check_grid(field: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(field, "grid is empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            field,
            "grid must be finite and strictly increasing",
        ));
    }
    Ok(())
}

/// Outage versus system SNR (`P_tot / N0` in dB, split equally over the
/// `K + M` transmissions). Rows are ordered by SNR, then by `schemes`.
pub fn sweep_snr(
    topo: &NetworkTopology,
    schemes: &[Scheme],
    rate: f64,
    snr_db_grid: &[f64],
    n_trials: u64,
    seed: u64,
    n0: f64,
) -> Result<Vec<SweepPoint>> {
    check_grid("snr_db", snr_db_grid)?;
    let (k, m) = (topo.n_relays(), topo.n_symbols());
    let mut out = Vec::with_capacity(snr_db_grid.len() * schemes.len());
    for &snr_db in snr_db_grid {
        let power = PowerAllocation::from_system_snr_db(snr_db, k, m, n0)?;
        let estimates = estimate_outage_multi(topo, &power, schemes, rate, n_trials, seed)?;
        for (&scheme, estimate) in schemes.iter().zip(estimates) {
            let theorem1 = match (scheme, k) {
                (Scheme::StncOhaf, 1..) => Some(theorem1_outage(topo, &power, rate)?),
                _ => None,
            };
            out.push(SweepPoint {
                scheme,
                k,
                m,
                rate,
                snr_db,
                estimate,
                theorem1,
            });
        }
    }
    Ok(out)
}

/// Sum outage capacity for one scheme and one `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityPoint {
    pub scheme: Scheme,
    pub k: usize,
    pub m: usize,
    pub rate: f64,
    pub snr_db: f64,
    pub estimate: OutageEstimate,
    pub theorem1: Option<Theorem1Value>,
    pub c_soc: f64,
    pub c_soc_ci: (f64, f64),
}

/// Sum outage capacity versus the number of symbols per period, with unit
/// bandwidth. Threshold and power split are rebuilt for every `M`; the link
/// variances of `topo` are kept.
#[allow(clippy::too_many_arguments)]
pub fn sweep_m(
    topo: &NetworkTopology,
    schemes: &[Scheme],
    rate: f64,
    m_grid: &[usize],
    snr_db: f64,
    n_trials: u64,
    seed: u64,
    n0: f64,
) -> Result<Vec<CapacityPoint>> {
    if m_grid.is_empty() || m_grid.contains(&0) || m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "M",
            "grid must be non-empty, positive and increasing",
        ));
    }
    let k = topo.n_relays();
    let mut out = Vec::with_capacity(m_grid.len() * schemes.len());
    for &m in m_grid {
        let topo = topo.with_symbols(m)?;
        let power = PowerAllocation::from_system_snr_db(snr_db, k, m, n0)?;
        let estimates = estimate_outage_multi(&topo, &power, schemes, rate, n_trials, seed)?;
        for (&scheme, estimate) in schemes.iter().zip(estimates) {
            let theorem1 = match (scheme, k) {
                (Scheme::StncOhaf, 1..) => Some(theorem1_outage(&topo, &power, rate)?),
                _ => None,
            };
            let cap = |p| sum_outage_capacity(p, m, 1.0, rate);
            out.push(CapacityPoint {
                scheme,
                k,
                m,
                rate,
                snr_db,
                estimate,
                theorem1,
                c_soc: cap(estimate.p_hat),
                c_soc_ci: (cap(estimate.ci95.1), cap(estimate.ci95.0)),
            });
        }
    }
    Ok(out)
}

/// The highest-SNR contiguous run of points of `scheme` whose relative CI
/// width is below `max_rel_ci_width`, in increasing SNR order.
pub fn resolved_tail(
    points: &[SweepPoint],
    scheme: Scheme,
    max_rel_ci_width: f64,
) -> Vec<OutageCurvePoint> {
    let mut curve: Vec<&SweepPoint> = points.iter().filter(|p| p.scheme == scheme).collect();
    curve.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
    let resolved = |p: &&SweepPoint| p.estimate.relative_ci_width() < max_rel_ci_width;
    let Some(top) = curve.iter().rposition(resolved) else {
        return Vec::new();
    };
    let start = curve[..=top]
        .iter()
        .rposition(|p| !resolved(p))
        .map_or(0, |i| i + 1);
    curve[start..=top]
        .iter()
        .map(|p| OutageCurvePoint {
            snr_db: p.snr_db,
            p_out: p.estimate.p_hat,
        })
        .collect()
}

/// Points within one decade of SNR (10 dB) of the highest point.
pub fn top_decade(curve: &[OutageCurvePoint]) -> Vec<OutageCurvePoint> {
    let Some(max) = curve.iter().map(|p| p.snr_db).reduce(f64::max) else {
        return Vec::new();
    };
    curve
        .iter()
        .copied()
        .filter(|p| p.snr_db >= max - 10.0 - 1e-9)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::exact_direct_outage;

    fn direct_only(mean: f64) -> (NetworkTopology, PowerAllocation) {
        (
            NetworkTopology::uniform(0, 1, mean).unwrap(),
            PowerAllocation::new(1.0, vec![], 1.0).unwrap(),
        )
    }

    #[test]
    fn direct_link_matches_exponential_cdf() {
        let (topo, power) = direct_only(10.0);
        let est = estimate_outage(&topo, &power, Scheme::StncOhaf, 1.0, 1_000_000, 42).unwrap();
        let exact = exact_direct_outage(0.1, 1.0);
        assert!((exact - 0.09516).abs() < 1e-5);
        assert!(
            (est.p_hat - exact).abs() < 4.0 * est.std_err,
            "{est:?} vs {exact}"
        );
    }

    #[test]
    fn tiny_rate_gives_no_outage() {
        let (topo, power) = direct_only(10.0);
        let est = estimate_outage(&topo, &power, Scheme::StncOhaf, 1e-9, 100_000, 1).unwrap();
        assert_eq!(est.outages, 0);
        assert_eq!(est.ci95.0, 0.0);
        assert!(est.ci95.1 > 0.0 && est.ci95.1 < 1e-4);
    }

    #[test]
    fn worker_count_does_not_change_counts() {
        let topo = NetworkTopology::uniform(2, 2, 1.0).unwrap();
        let power = PowerAllocation::equal_split(100.0, 2, 2, 1.0).unwrap();
        let run = |w| {
            with_workers(w, || {
                estimate_outage_multi(&topo, &power, &Scheme::ALL, 1.0, 100_003, 9).unwrap()
            })
            .unwrap()
        };
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn interval_invariants() {
        for (x, n) in [(0, 10), (3, 10), (10, 10), (9, 1000), (500, 1000), (1, 1)] {
            let e = OutageEstimate::from_counts(x, n);
            assert!(
                0.0 <= e.ci95.0 && e.ci95.0 <= e.p_hat && e.p_hat <= e.ci95.1 && e.ci95.1 <= 1.0,
                "{e:?}"
            );
            let p = x as f64 / n as f64;
            assert_eq!(e.std_err, (p * (1.0 - p) / n as f64).sqrt());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (topo, power) = direct_only(1.0);
        assert!(estimate_outage(&topo, &power, Scheme::StncAf, 1.0, 0, 1).is_err());
        assert!(sweep_snr(&topo, &[Scheme::StncAf], 1.0, &[5.0, 5.0], 10, 1, 1.0).is_err());
        assert!(sweep_snr(&topo, &[Scheme::StncAf], 1.0, &[], 10, 1, 1.0).is_err());
        assert!(sweep_m(&topo, &[Scheme::StncAf], 1.0, &[0, 1], 10.0, 10, 1, 1.0).is_err());
    }

    #[test]
    fn capacity_at_single_symbol_is_success_probability() {
        let topo = NetworkTopology::uniform(1, 1, 1.0).unwrap();
        let pts = sweep_m(&topo, &[Scheme::StncOhaf], 1.0, &[1], 15.0, 20_000, 3, 1.0).unwrap();
        assert_eq!(pts[0].c_soc, 1.0 - pts[0].estimate.p_hat);
    }

    #[test]
    fn resolved_tail_picks_top_contiguous_run() {
        let mk = |db: f64, x: u64| SweepPoint {
            scheme: Scheme::StncOhaf,
            k: 1,
            m: 1,
            rate: 1.0,
            snr_db: db,
            estimate: OutageEstimate::from_counts(x, 1_000_000),
            theorem1: None,
        };
        // 50 events is under-resolved (~55% width), 1000 events is fine.
        let pts = vec![
            mk(0.0, 9000),
            mk(5.0, 50),
            mk(10.0, 5000),
            mk(15.0, 1000),
            mk(20.0, 3),
        ];
        let tail = resolved_tail(&pts, Scheme::StncOhaf, 0.3);
        let dbs: Vec<f64> = tail.iter().map(|p| p.snr_db).collect();
        assert_eq!(dbs, vec![10.0, 15.0]);
        assert!(resolved_tail(&pts, Scheme::StncAf, 0.3).is_empty());
    }
}
