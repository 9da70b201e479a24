//! Signal-level model of the overhearing amplify-and-forward chain.
//!
//! Spreading codes are ideal and orthonormal, so the matched-filter output of
//! symbol `x_m` is computed directly and the chain is simulated for one symbol
//! with `x_m = 1`.
//!
//! [`build_chain`] computes the amplifier factors, MRC coefficients and the
//! noise powers `chi` with every noise term treated as uncorrelated. The
//! destination's combined signal coefficient `A_d` is then the end-to-end SNR
//! that this algebra predicts.
//!
//! The actual forwarded noise is correlated: the noise relay 1 forwards reaches
//! the destination directly and again inside every later relay's signal.
//! [`measure_empirical_sinr`] propagates sampled noise through the chain and
//! [`exact_sinr`] propagates the noise coefficients of every independent
//! source, so both see these correlations. Comparing either with `A_d`
//! measures the error of the uncorrelated approximation.
//!
//! A relay's coded signal sums `M` symbols whose noise comes from `M`
//! different slots. Its noise power is therefore `M` times one symbol's, and
//! it is represented as one symbol's noise scaled by `sqrt(M)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::{draw_complex_gains, ComplexGains};
use crate::model::{
    linear_to_db, mean_link_snrs, LinkLayout, NetworkTopology, PowerAllocation, Scheme,
};
use crate::snr::end_to_end_snr;
use crate::stream::{Domain, TrialStream};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    layout: LinkLayout,
    m: usize,
    n0: f64,
    /// Relay powers `P_1..P_K`.
    p_relay: Vec<f64>,
    /// Channel gain per link.
    h: Vec<Complex64>,
    /// `A_1..A_K`.
    pub a: Vec<f64>,
    /// `alpha_1..alpha_K`.
    pub alpha: Vec<f64>,
    /// MRC coefficient per link: received signal coefficient over `chi`.
    pub phi: Vec<Complex64>,
    /// Modelled noise power per link.
    pub chi: Vec<f64>,
    pub a_d: f64,
}

impl ChainState {
    pub fn layout(&self) -> LinkLayout {
        self.layout
    }

    pub fn n_symbols(&self) -> usize {
        self.m
    }

    /// Noise power in relay `r`'s combined signal for one symbol, summed
    /// from its MRC branches.
    pub fn combined_noise_power(&self, r: usize) -> f64 {
        let l = self.layout;
        self.phi[l.source_relay(r)].norm_sqr() * self.chi[l.source_relay(r)]
            + (1..r)
                .map(|i| {
                    let idx = l.relay_relay(i, r);
                    self.phi[idx].norm_sqr() * self.chi[idx]
                })
                .sum::<f64>()
    }

    /// Average transmit power of relay `r`: `alpha^2 sum_m (A^2 + noise)`.
    pub fn average_transmit_power(&self, r: usize) -> f64 {
        let a = self.a[r - 1];
        self.alpha[r - 1].powi(2) * self.m as f64 * (a * a + self.combined_noise_power(r))
    }

    pub fn relay_power(&self, r: usize) -> f64 {
        self.p_relay[r - 1]
    }
}

/// Computes the chain in relay order.
///
/// A relay that receives no signal (`A_r = 0`) stays silent (`alpha_r = 0`).
pub fn build_chain(gains: &ComplexGains, power: &PowerAllocation, m: usize) -> Result<ChainState> {
    if m < 1 {
        return Err(Error::invalid("M", "need at least one symbol"));
    }
    let layout = gains.layout();
    let k = layout.n_relays();
    if power.p_relay().len() != k {
        return Err(Error::invalid(
            "P_r",
            format!("{} relay powers for {k} relays", power.p_relay().len()),
        ));
    }
    let n0 = power.n0();
    let h = gains.gains().to_vec();
    let mut phi = vec![Complex64::new(0.0, 0.0); layout.len()];
    let mut chi = vec![n0; layout.len()];

    let sqrt_ps = power.p_source().sqrt();
    for v in (1..=k)
        .map(|r| layout.source_relay(r))
        .chain([layout.source_destination()])
    {
        phi[v] = h[v] * sqrt_ps / n0;
    }

    let mut a = Vec::with_capacity(k);
    let mut alpha = Vec::with_capacity(k);
    for r in 1..=k {
        let ar = n0 * phi[layout.source_relay(r)].norm_sqr()
            + (1..r)
                .map(|i| {
                    let idx = layout.relay_relay(i, r);
                    chi[idx] * phi[idx].norm_sqr()
                })
                .sum::<f64>();
        let pr = power.p_relay()[r - 1];
        let alpha_r = if ar > 0.0 {
            (pr / (m as f64 * (ar * ar + ar))).sqrt()
        } else {
            0.0
        };
        let outgoing = (r + 1..=k)
            .map(|j| layout.relay_relay(r, j))
            .chain([layout.relay_destination(r)]);
        for idx in outgoing {
            let signal = h[idx] * alpha_r * ar;
            chi[idx] = n0 + m as f64 * h[idx].norm_sqr() * alpha_r * alpha_r * ar;
            phi[idx] = signal / chi[idx];
        }
        a.push(ar);
        alpha.push(alpha_r);
    }

    let sd = layout.source_destination();
    let a_d = n0 * phi[sd].norm_sqr()
        + (1..=k)
            .map(|r| {
                let idx = layout.relay_destination(r);
                chi[idx] * phi[idx].norm_sqr()
            })
            .sum::<f64>();

    Ok(ChainState {
        layout,
        m,
        n0,
        p_relay: power.p_relay().to_vec(),
        h,
        a,
        alpha,
        phi,
        chi,
        a_d,
    })
}

/// Pushes the physical noise sources through the chain and returns the
/// destination's combined noise `eta_d`.
///
/// `source(i)` is the noise entering link `i`. Shared ancestors stay shared:
/// relay `r`'s combined noise `w_r` is reused for every link leaving `r`.
fn propagate_noise<V: Clone>(
    chain: &ChainState,
    mut source: impl FnMut(usize) -> V,
    zero: impl Fn() -> V,
    axpy: impl Fn(&mut V, Complex64, &V),
) -> V {
    let l = chain.layout;
    let k = l.n_relays();
    let sqrt_m = (chain.m as f64).sqrt();
    let mut eta: Vec<Option<V>> = vec![None; l.len()];

    for r in 1..=k {
        let mut w = zero();
        let sr = l.source_relay(r);
        axpy(&mut w, chain.phi[sr].conj(), &source(sr));
        for i in 1..r {
            let idx = l.relay_relay(i, r);
            let e = eta[idx].as_ref().expect("earlier relay processed");
            axpy(&mut w, chain.phi[idx].conj(), e);
        }
        let outgoing = (r + 1..=k)
            .map(|j| l.relay_relay(r, j))
            .chain([l.relay_destination(r)]);
        for idx in outgoing {
            let mut e = source(idx);
            axpy(&mut e, chain.h[idx] * chain.alpha[r - 1] * sqrt_m, &w);
            eta[idx] = Some(e);
        }
    }

    let sd = l.source_destination();
    let mut eta_d = zero();
    axpy(&mut eta_d, chain.phi[sd].conj(), &source(sd));
    for r in 1..=k {
        let idx = l.relay_destination(r);
        let e = eta[idx].as_ref().expect("relay processed");
        axpy(&mut eta_d, chain.phi[idx].conj(), e);
    }
    eta_d
}

/// SINR of the destination's combined signal with the true noise
/// covariance: `A_d^2 / E|eta_d|^2`, where the expectation is evaluated
/// exactly from the coefficient of every independent noise source.
pub fn exact_sinr(chain: &ChainState) -> f64 {
    let n = chain.layout.len();
    let coeffs = propagate_noise(
        chain,
        |i| {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            v[i] = Complex64::new(1.0, 0.0);
            v
        },
        || vec![Complex64::new(0.0, 0.0); n],
        |acc, c, x| acc.iter_mut().zip(x).for_each(|(a, b)| *a += c * b),
    );
    let noise = chain.n0 * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
    chain.a_d * chain.a_d / noise
}

/// `A_d^2 / mean |eta_d|^2` over `n_noise` sampled noise traces.
///
/// Trace `j` draws its `CN(0, N0)` samples from slot `(Noise, j)` of `stream`.
pub fn measure_empirical_sinr(
    chain: &ChainState,
    n_noise: u64,
    stream: TrialStream,
) -> Result<f64> {
    if n_noise < 1 {
        return Err(Error::invalid("n_noise", "need at least one noise trace"));
    }
    let n_links = chain.layout.len();
    let scale = (chain.n0 / 2.0).sqrt();
    let mut trace = vec![Complex64::new(0.0, 0.0); n_links];
    let mut total = 0.0;
    for j in 0..n_noise {
        let mut rng = stream.rng(Domain::Noise, j);
        for n in trace.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *n = Complex64::new(re, im) * scale;
        }
        let eta_d = propagate_noise(
            chain,
            |i| trace[i],
            || Complex64::new(0.0, 0.0),
            |acc, c, x| *acc += c * x,
        );
        total += eta_d.norm_sqr();
    }
    Ok(chain.a_d * chain.a_d / (total / n_noise as f64))
}

/// Relative error of the uncorrelated-noise SNR against measured SINR over
/// many channel draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Mean link SNR in dB, averaged over links in linear scale.
    pub snr_db: f64,
    /// `|Gamma / SINR_mc - 1|` statistics, SINR from sampled noise.
    pub median_rel_err: f64,
    pub p95_rel_err: f64,
    pub n_channels: u64,
    pub n_noise: u64,
    /// Same statistics against the exact-covariance SINR.
    pub exact_median_rel_err: f64,
    pub exact_p95_rel_err: f64,
    /// Largest `|A_d / Gamma - 1|` between the chain and the SNR recursion.
    pub max_chain_deviation: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Nearest-rank percentile.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn lemma1_gap_report(
    topo: &NetworkTopology,
    power: &PowerAllocation,
    n_channels: u64,
    n_noise: u64,
    seed: u64,
) -> Result<GapReport> {
    if n_channels < 10 {
        return Err(Error::invalid(
            "n_channels",
            "need at least 10 channel draws",
        ));
    }
    if n_noise < 1000 {
        return Err(Error::invalid("n_noise", "need at least 1000 noise traces"));
    }
    let m = topo.n_symbols();
    let means = mean_link_snrs(topo, power)?;
    let snr_db = linear_to_db(means.iter().sum::<f64>() / means.len() as f64);

    let rows = (0..n_channels)
        .into_par_iter()
        .map(|c| {
            let stream = TrialStream::new(seed, c);
            let gains = draw_complex_gains(topo, stream);
            let chain = build_chain(&gains, power, m)?;
            let gamma = end_to_end_snr(&gains.to_realization(power)?, m, Scheme::StncOhaf);
            let mc = measure_empirical_sinr(&chain, n_noise, stream)?;
            let exact = exact_sinr(&chain);
            Ok((
                (gamma / mc - 1.0).abs(),
                (gamma / exact - 1.0).abs(),
                (chain.a_d / gamma - 1.0).abs(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mc: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut exact: Vec<f64> = rows.iter().map(|r| r.1).collect();
    mc.sort_by(f64::total_cmp);
    exact.sort_by(f64::total_cmp);
    let max_chain_deviation = rows.iter().map(|r| r.2).fold(0.0, f64::max);

    Ok(GapReport {
        k: topo.n_relays(),
        m,
        snr_db,
        median_rel_err: median(&mc),
        p95_rel_err: percentile(&mc, 0.95),
        n_channels,
        n_noise,
        exact_median_rel_err: median(&exact),
        exact_p95_rel_err: percentile(&exact, 0.95),
        max_chain_deviation,
    })
}

/// Gap report with unit link variances and every node transmitting at
/// `link_snr_db` (so every link has that mean SNR).
pub fn lemma1_gap_report_at(
    k: usize,
    m: usize,
    link_snr_db: f64,
    n_channels: u64,
    n_noise: u64,
    seed: u64,
) -> Result<GapReport> {
    let topo = NetworkTopology::uniform(k, m, 1.0)?;
    let p = crate::model::db_to_linear(link_snr_db);
    let power = PowerAllocation::new(p, vec![p; k], 1.0)?;
    lemma1_gap_report(&topo, &power, n_channels, n_noise, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_topology;

    fn setup(k: usize, m: usize, seed: u64) -> (ComplexGains, PowerAllocation, ChainState) {
        let topo = random_topology(k, m, (0.1, 25.0), seed).unwrap();
        let power = PowerAllocation::equal_split(200.0, k, m, 1.0).unwrap();
        let gains = draw_complex_gains(&topo, TrialStream::new(seed, 0));
        let chain = build_chain(&gains, &power, m).unwrap();
        (gains, power, chain)
    }

    #[test]
    fn single_relay_chain_matches_recursion_exactly() {
        for m in 1..6 {
            let (gains, power, chain) = setup(1, m, m as u64);
            let real = gains.to_realization(&power).unwrap();
            let l = real.layout();
            let (a1, g1d) = (chain.a[0], real.link_snr()[l.relay_destination(1)]);
            let relayed = chain.a_d - real.link_snr()[l.source_destination()];
            let expected = a1 * g1d / (a1 + g1d + 1.0) / m as f64;
            assert!((relayed / expected - 1.0).abs() < 1e-12);
            assert!((exact_sinr(&chain) / chain.a_d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_agrees_with_recursion_for_more_relays() {
        for seed in 0..20 {
            let (gains, power, chain) = setup(3, 2, seed);
            let gamma = end_to_end_snr(&gains.to_realization(&power).unwrap(), 2, Scheme::StncOhaf);
            assert!(
                (chain.a_d / gamma - 1.0).abs() < 1e-12,
                "{} vs {gamma}",
                chain.a_d
            );
        }
    }

    #[test]
    fn silent_relays_leave_direct_link() {
        let topo = NetworkTopology::uniform(2, 2, 1.0).unwrap();
        let power = PowerAllocation::equal_split(50.0, 2, 2, 1.0).unwrap();
        let mut g = draw_complex_gains(&topo, TrialStream::new(1, 1))
            .gains()
            .to_vec();
        let l = topo.layout();
        let h_sd = g[l.source_destination()];
        for (i, h) in g.iter_mut().enumerate() {
            if i != l.source_destination() {
                *h = Complex64::new(0.0, 0.0);
            }
        }
        let gains = ComplexGains::new(l, g).unwrap();
        let chain = build_chain(&gains, &power, 2).unwrap();
        let expected = power.p_source() * h_sd.norm_sqr() / power.n0();
        assert!((chain.a_d - expected).abs() < 1e-12 * expected);
        assert!(chain.a_d.is_finite() && exact_sinr(&chain).is_finite());
    }

    #[test]
    fn chain_invariants() {
        for seed in 0..50 {
            let (_, power, chain) = setup(3, 3, seed);
            assert!(chain.alpha.iter().all(|a| *a > 0.0));
            assert!(chain.chi.iter().all(|c| *c >= power.n0()));
            for r in 1..=3 {
                let p = chain.average_transmit_power(r);
                assert!((p / chain.relay_power(r) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn direct_only_empirical_sinr_is_unbiased() {
        let topo = NetworkTopology::uniform(0, 1, 1.0).unwrap();
        let power = PowerAllocation::new(10.0, vec![], 1.0).unwrap();
        let gains = draw_complex_gains(&topo, TrialStream::new(3, 0));
        let chain = build_chain(&gains, &power, 1).unwrap();
        let gamma = power.p_source() * gains.gains()[0].norm_sqr();
        assert!((chain.a_d / gamma - 1.0).abs() < 1e-12);
        let n = 200_000;
        let emp = measure_empirical_sinr(&chain, n, TrialStream::new(3, 0)).unwrap();
        // Mean of n exponentials has relative sd 1/sqrt(n).
        assert!((emp / gamma - 1.0).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn sampled_noise_converges_to_exact_covariance() {
        for seed in 0..5 {
            let (_, _, chain) = setup(3, 2, seed);
            let n = 100_000;
            let emp = measure_empirical_sinr(&chain, n, TrialStream::new(seed, 7)).unwrap();
            let exact = exact_sinr(&chain);
            assert!(
                (emp / exact - 1.0).abs() < 5.0 / (n as f64).sqrt(),
                "{emp} vs {exact}"
            );
        }
    }

    #[test]
    fn correlation_lowers_true_sinr() {
        // Shared ancestor noise adds coherently at the destination.
        let mut below = 0;
        for seed in 0..30 {
            let (_, _, chain) = setup(3, 2, seed);
            let exact = exact_sinr(&chain);
            assert!(exact.is_finite() && exact > 0.0);
            if exact < chain.a_d {
                below += 1;
            }
        }
        assert!(below > 0);
    }

    #[test]
    fn report_is_deterministic_and_validated() {
        let a = lemma1_gap_report_at(2, 2, 10.0, 10, 1000, 5).unwrap();
        let b = lemma1_gap_report_at(2, 2, 10.0, 10, 1000, 5).unwrap();
        assert_eq!(a, b);
        assert!((a.snr_db - 10.0).abs() < 1e-9);
        assert!(lemma1_gap_report_at(2, 2, 10.0, 9, 1000, 5).is_err());
        assert!(lemma1_gap_report_at(2, 2, 10.0, 10, 999, 5).is_err());
        let json = serde_json::to_value(&a).unwrap();
        for key in [
            "K",
            "M",
            "snr_db",
            "median_rel_err",
            "p95_rel_err",
            "n_channels",
            "n_noise",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn percentile_helpers() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(median(&v[..3]), 2.0);
        assert_eq!(percentile(&v, 0.95), 4.0);
        assert_eq!(percentile(&v, 0.5), 2.0);
    }
}
