//! Closed-form performance expressions: the high-SNR outage approximation,
//! the exact direct-link outage, sum outage capacity and diversity-order
//! fitting on outage curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    mean_link_snr, outage_threshold, Link, NetworkTopology, Node, PowerAllocation, Scheme,
};

/// One point of an outage-versus-SNR curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageCurvePoint {
    pub snr_db: f64,
    pub p_out: f64,
}

impl OutageCurvePoint {
    pub fn new(snr_db: f64, p_out: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_out) {
            return Err(Error::invalid(
                "p_out",
                format!("{p_out} is not a probability"),
            ));
        }
        if !snr_db.is_finite() {
            return Err(Error::invalid("snr_db", "must be finite"));
        }
        Ok(Self { snr_db, p_out })
    }
}

/// High-SNR outage approximation, raw and clamped to `[0, 1]`.
///
/// The raw value can exceed 1 at low SNR; ratio and slope checks should use
/// it rather than the clamped one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Value {
    pub raw: f64,
    pub clamped: f64,
}

/// Closed-form outage approximation of STNC-OHAF:
///
/// ```text
/// P_out ~ (2^((M+K)R) - 1)^(K+1) / (K+1)!
///         * z_{s,d} (z_{1,d} + z_{s,1}) * prod_{r=2..K} z_{r,d}
/// ```
///
/// with `z_{u,v} = 1 / mean_snr(u,v)`. Only relay 1 contributes its
/// source-link rate; later relays enter through their relay-destination link
/// alone.
///
/// The expression carries no factor for the `1/M` scaling of relay terms in
/// the end-to-end SNR. Simulated outage sits near `M^K` times this value at
/// high SNR.
pub fn theorem1_outage(
    topo: &NetworkTopology,
    power: &PowerAllocation,
    rate: f64,
) -> Result<Theorem1Value> {
    let k = topo.n_relays();
    if k == 0 {
        return Err(Error::NoRelays);
    }
    let m = topo.n_symbols();
    let zeta = |from: Node, to: Node| -> Result<f64> {
        Ok(1.0 / mean_link_snr(topo, power, Link::new(from, to))?)
    };
    let threshold = outage_threshold(Scheme::StncOhaf, m, k, rate)?;

    let mut raw = threshold.powi(k as i32 + 1) / factorial(k + 1);
    raw *= zeta(Node::Source, Node::Destination)?;
    raw *= zeta(Node::Relay(1), Node::Destination)? + zeta(Node::Source, Node::Relay(1))?;
    for r in 2..=k {
        raw *= zeta(Node::Relay(r), Node::Destination)?;
    }
    Ok(Theorem1Value {
        raw,
        clamped: raw.clamp(0.0, 1.0),
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Exact outage of a lone Rayleigh link: `1 - exp(-zeta * gamma_th)`.
pub fn exact_direct_outage(zeta_sd: f64, gamma_th: f64) -> f64 {
    -(-zeta_sd * gamma_th).exp_m1()
}

/// `M (1 - p_out) B R`: every symbol of the period is statistically identical.
pub fn sum_outage_capacity(p_out: f64, m: usize, bandwidth: f64, rate: f64) -> f64 {
    m as f64 * (1.0 - p_out) * bandwidth * rate
}

/// Negated least-squares slope of `log10(p_out)` against `log10(snr)`.
///
/// Points with `p_out = 0` are dropped. The SNR axis must be strictly
/// increasing.
pub fn fit_diversity_order(points: &[OutageCurvePoint]) -> Result<f64> {
    if points.windows(2).any(|w| w[1].snr_db <= w[0].snr_db) {
        return Err(Error::invalid(
            "points",
            "SNR grid must be strictly increasing",
        ));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.p_out > 0.0)
        .map(|p| (p.snr_db / 10.0, p.p_out.log10()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::TooFewPoints(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}
