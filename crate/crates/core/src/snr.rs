//! Effective SNRs of the overhearing amplify-and-forward cascade.
//!
//! Relay `r` combines the source copy with the copies forwarded by every
//! earlier relay. Its effective SNR is
//!
//! ```text
//! A_r = g_{s,r} + c * sum_{i<r} A_i g_{i,r} / (A_i + g_{i,r} + 1)
//! ```
//!
//! and the destination combines the direct copy with the relay copies the
//! same way. `c = 1/M` for the STNC schemes, where each relay slot carries the
//! M symbols at once, and `c = 1` for TDMA, where every forwarded slot carries
//! a single symbol at full relay power. STNC-AF drops the overheard terms.

use crate::fading::FadingRealization;
use crate::model::{LinkLayout, Scheme};

/// Two-hop amplify-and-forward SNR `a g / (a + g + 1)`.
///
/// Symmetric, non-decreasing in both arguments, and below `min(a, g)`.
#[inline]
pub fn af_combine(a: f64, g: f64) -> f64 {
    a * g / (a + g + 1.0)
}

/// Weight applied to every relayed term.
#[inline]
pub fn relay_term_scale(scheme: Scheme, m: usize) -> f64 {
    match scheme {
        Scheme::StncOhaf | Scheme::StncAf => 1.0 / m as f64,
        Scheme::TdmaOh => 1.0,
    }
}

/// Relay effective SNRs and the end-to-end SNR of one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSnrVector {
    pub a: Vec<f64>,
    pub gamma_e2e: f64,
}

/// Writes `A_1..A_K` into `a` (resized to `K`) and returns the end-to-end SNR.
///
/// `snr` holds the link SNRs in `layout` order. This is the allocation-free
/// path used inside the Monte Carlo loop.
#[inline]
pub fn evaluate_into(
    layout: LinkLayout,
    snr: &[f64],
    m: usize,
    scheme: Scheme,
    a: &mut Vec<f64>,
) -> f64 {
    let k = layout.n_relays();
    let c = relay_term_scale(scheme, m);
    a.clear();
    for r in 1..=k {
        let mut ar = snr[layout.source_relay(r)];
        if scheme.overhears() {
            let overheard: f64 = (1..r)
                .map(|i| af_combine(a[i - 1], snr[layout.relay_relay(i, r)]))
                .sum();
            ar += c * overheard;
        }
        a.push(ar);
    }
    let relayed: f64 = (1..=k)
        .map(|r| af_combine(a[r - 1], snr[layout.relay_destination(r)]))
        .sum();
    snr[layout.source_destination()] + c * relayed
}

pub fn evaluate(real: &FadingRealization, m: usize, scheme: Scheme) -> EffectiveSnrVector {
    let mut a = Vec::with_capacity(real.n_relays());
    let gamma_e2e = evaluate_into(real.layout(), real.link_snr(), m, scheme, &mut a);
    EffectiveSnrVector { a, gamma_e2e }
}

pub fn relay_effective_snrs(real: &FadingRealization, m: usize, scheme: Scheme) -> Vec<f64> {
    evaluate(real, m, scheme).a
}

pub fn end_to_end_snr(real: &FadingRealization, m: usize, scheme: Scheme) -> f64 {
    evaluate(real, m, scheme).gamma_e2e
}
