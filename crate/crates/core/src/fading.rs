//! Quasi-static Rayleigh fading: one channel draw per transmission period.
//!
//! Two views of the same channel are offered. [`draw_realization`] samples
//! instantaneous link SNRs directly (exponential with the link's mean SNR) and
//! is what the outage simulator uses. [`draw_complex_gains`] samples the
//! circularly symmetric complex gains consumed by the baseband chain.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use crate::error::Result;
use crate::model::{mean_link_snrs, Link, LinkLayout, NetworkTopology, PowerAllocation};
use crate::stream::{Domain, TrialStream};

/// Instantaneous SNR of every forward link, in [`LinkLayout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingRealization {
    layout: LinkLayout,
    link_snr: Vec<f64>,
}

impl FadingRealization {
    pub fn new(layout: LinkLayout, link_snr: Vec<f64>) -> Result<Self> {
        if link_snr.len() != layout.len() {
            return Err(crate::Error::invalid(
                "link_snr",
                format!("expected {} links, got {}", layout.len(), link_snr.len()),
            ));
        }
        if link_snr.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(crate::Error::invalid(
                "link_snr",
                "instantaneous SNRs must be finite and non-negative",
            ));
        }
        Ok(Self { layout, link_snr })
    }

    /// Builds a realization from `(link, snr)` pairs; links not listed are 0.
    pub fn from_links(k: usize, table: impl IntoIterator<Item = (Link, f64)>) -> Result<Self> {
        let layout = LinkLayout::new(k);
        let mut snr = vec![0.0; layout.len()];
        for (link, g) in table {
            let i = layout
                .index_of(link)
                .ok_or_else(|| crate::Error::UnknownLink(link.to_string()))?;
            snr[i] = g;
        }
        Self::new(layout, snr)
    }

    pub fn layout(&self) -> LinkLayout {
        self.layout
    }

    pub fn n_relays(&self) -> usize {
        self.layout.n_relays()
    }

    pub fn link_snr(&self) -> &[f64] {
        &self.link_snr
    }

    pub fn get(&self, link: Link) -> Option<f64> {
        self.layout.index_of(link).map(|i| self.link_snr[i])
    }

    /// Every link SNR multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            layout: self.layout,
            link_snr: self.link_snr.iter().map(|g| g * factor).collect(),
        }
    }
}

/// Exponential sample with the given mean via the inverse CDF,
/// `-mean * ln(U)` with `U` on the open unit interval.
#[inline]
fn exp_sample<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    -mean * u.ln()
}

/// Fills `out` with one draw of every link SNR. `means` are the mean link
/// SNRs in layout order. Link `i` uses only stream slot `(LinkSnr, i)`.
#[inline]
pub fn fill_link_snrs(means: &[f64], stream: TrialStream, out: &mut [f64]) {
    for (i, (o, &mean)) in out.iter_mut().zip(means).enumerate() {
        *o = exp_sample(&mut stream.rng(Domain::LinkSnr, i as u64), mean);
    }
}

pub fn draw_realization(
    topo: &NetworkTopology,
    power: &PowerAllocation,
    stream: TrialStream,
) -> Result<FadingRealization> {
    let means = mean_link_snrs(topo, power)?;
    let mut snr = vec![0.0; means.len()];
    fill_link_snrs(&means, stream, &mut snr);
    Ok(FadingRealization {
        layout: topo.layout(),
        link_snr: snr,
    })
}

/// Complex channel gain `h_{u,v}` of every forward link, in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGains {
    layout: LinkLayout,
    gain: Vec<Complex64>,
}

impl ComplexGains {
    pub fn new(layout: LinkLayout, gain: Vec<Complex64>) -> Result<Self> {
        if gain.len() != layout.len() {
            return Err(crate::Error::invalid(
                "gain",
                format!("expected {} links, got {}", layout.len(), gain.len()),
            ));
        }
        if gain.iter().any(|h| !h.is_finite()) {
            return Err(crate::Error::invalid("gain", "gains must be finite"));
        }
        Ok(Self { layout, gain })
    }

    pub fn layout(&self) -> LinkLayout {
        self.layout
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gain
    }

    pub fn get(&self, link: Link) -> Option<Complex64> {
        self.layout.index_of(link).map(|i| self.gain[i])
    }

    /// The link SNRs `P_u |h_{u,v}|^2 / N0` these gains induce.
    pub fn to_realization(&self, power: &PowerAllocation) -> Result<FadingRealization> {
        let snr = self
            .layout
            .links()
            .into_iter()
            .zip(&self.gain)
            .map(|(l, h)| Ok(power.power_of(l.from)? * h.norm_sqr() / power.n0()))
            .collect::<Result<Vec<_>>>()?;
        FadingRealization::new(self.layout, snr)
    }
}

/// `h = (a + ib) sigma / sqrt(2)` with `a, b` independent standard normals.
pub fn draw_complex_gains(topo: &NetworkTopology, stream: TrialStream) -> ComplexGains {
    let gain = topo
        .variances()
        .iter()
        .enumerate()
        .map(|(i, &var)| {
            let mut rng = stream.rng(Domain::ComplexGain, i as u64);
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(a, b) * (var / 2.0).sqrt()
        })
        .collect();
    ComplexGains {
        layout: topo.layout(),
        gain,
    }
}
