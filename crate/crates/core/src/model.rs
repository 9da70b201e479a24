//! Static description of a relaying experiment: topology, link statistics,
//! power allocation, slot accounting and outage thresholds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{Domain, TrialStream};

/// A terminal of the network. Relays are numbered `1..=K` in forwarding order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Source,
    Relay(usize),
    Destination,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Source => f.write_str("s"),
            Node::Relay(r) => write!(f, "{r}"),
            Node::Destination => f.write_str("d"),
        }
    }
}

impl FromStr for Node {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "s" | "S" => Ok(Node::Source),
            "d" | "D" => Ok(Node::Destination),
            other => other
                .parse::<usize>()
                .ok()
                .filter(|&r| r >= 1)
                .map(Node::Relay)
                .ok_or_else(|| Error::UnknownLink(s.to_string())),
        }
    }
}

/// A directed link `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub from: Node,
    pub to: Node,
}

impl Link {
    pub fn new(from: Node, to: Node) -> Self {
        Self { from, to }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (from, to) = s
            .split_once("->")
            .ok_or_else(|| Error::UnknownLink(s.to_string()))?;
        Ok(Link::new(from.parse()?, to.parse()?))
    }
}

/// Dense indexing of the forward links of a `K`-relay network.
///
/// Layout: `S->R_1 .. S->R_K`, `S->D`, then for each relay `i` in order its
/// links to `R_{i+1} .. R_K` followed by `R_i -> D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkLayout {
    k: usize,
}

impl LinkLayout {
    pub fn new(k: usize) -> Self {
        Self { k }
    }

    pub fn n_relays(&self) -> usize {
        self.k
    }

    /// `(K+1) + K(K+1)/2`
    pub fn len(&self) -> usize {
        (self.k + 1) + self.k * (self.k + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn source_relay(&self, r: usize) -> usize {
        debug_assert!(r >= 1 && r <= self.k);
        r - 1
    }

    #[inline]
    pub fn source_destination(&self) -> usize {
        self.k
    }

    #[inline]
    fn relay_block(&self, i: usize) -> usize {
        (self.k + 1) + (i - 1) * (self.k + 1) - (i - 1) * i / 2
    }

    #[inline]
    pub fn relay_relay(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i < j && j <= self.k);
        self.relay_block(i) + (j - i - 1)
    }

    #[inline]
    pub fn relay_destination(&self, i: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.k);
        self.relay_block(i) + (self.k - i)
    }

    pub fn index_of(&self, link: Link) -> Option<usize> {
        let k = self.k;
        match (link.from, link.to) {
            (Node::Source, Node::Relay(r)) if (1..=k).contains(&r) => Some(self.source_relay(r)),
            (Node::Source, Node::Destination) => Some(self.source_destination()),
            (Node::Relay(i), Node::Relay(j)) if i >= 1 && i < j && j <= k => {
                Some(self.relay_relay(i, j))
            }
            (Node::Relay(i), Node::Destination) if (1..=k).contains(&i) => {
                Some(self.relay_destination(i))
            }
            _ => None,
        }
    }

    /// All forward links in index order.
    pub fn links(&self) -> Vec<Link> {
        let k = self.k;
        let mut out = Vec::with_capacity(self.len());
        out.extend((1..=k).map(|r| Link::new(Node::Source, Node::Relay(r))));
        out.push(Link::new(Node::Source, Node::Destination));
        for i in 1..=k {
            out.extend((i + 1..=k).map(|j| Link::new(Node::Relay(i), Node::Relay(j))));
            out.push(Link::new(Node::Relay(i), Node::Destination));
        }
        out
    }
}

/// Relays, symbols per period, and the channel-gain variance of every
/// forward link.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    n_relays: usize,
    n_symbols: usize,
    variances: Vec<f64>,
}

impl NetworkTopology {
    /// `variances` is indexed by [`LinkLayout`].
    pub fn new(n_relays: usize, n_symbols: usize, variances: Vec<f64>) -> Result<Self> {
        if n_symbols < 1 {
            return Err(Error::invalid("M", "need at least one symbol"));
        }
        let layout = LinkLayout::new(n_relays);
        if variances.len() != layout.len() {
            return Err(Error::invalid(
                "variances",
                format!(
                    "expected {} links for K={n_relays}, got {}",
                    layout.len(),
                    variances.len()
                ),
            ));
        }
        if let Some((i, v)) = variances
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::invalid(
                "variances",
                format!(
                    "link {} has non-positive or non-finite variance {v}",
                    layout.links()[i]
                ),
            ));
        }
        Ok(Self {
            n_relays,
            n_symbols,
            variances,
        })
    }

    /// Builds a topology from an explicit link table. Every forward link must
    /// be present exactly once; backward links are rejected.
    pub fn from_links(
        n_relays: usize,
        n_symbols: usize,
        table: impl IntoIterator<Item = (Link, f64)>,
    ) -> Result<Self> {
        let layout = LinkLayout::new(n_relays);
        let mut variances = vec![f64::NAN; layout.len()];
        for (link, v) in table {
            let idx = layout
                .index_of(link)
                .ok_or_else(|| Error::UnknownLink(link.to_string()))?;
            if !variances[idx].is_nan() {
                return Err(Error::invalid(
                    "variances",
                    format!("duplicate link {link}"),
                ));
            }
            variances[idx] = v;
        }
        if let Some(i) = variances.iter().position(|v| v.is_nan()) {
            return Err(Error::invalid(
                "variances",
                format!("missing link {}", layout.links()[i]),
            ));
        }
        Self::new(n_relays, n_symbols, variances)
    }

    /// Every link with the same variance.
    pub fn uniform(n_relays: usize, n_symbols: usize, variance: f64) -> Result<Self> {
        Self::new(
            n_relays,
            n_symbols,
            vec![variance; LinkLayout::new(n_relays).len()],
        )
    }

    pub fn n_relays(&self) -> usize {
        self.n_relays
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn layout(&self) -> LinkLayout {
        LinkLayout::new(self.n_relays)
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn variance(&self, link: Link) -> Result<f64> {
        self.layout()
            .index_of(link)
            .map(|i| self.variances[i])
            .ok_or_else(|| Error::UnknownLink(link.to_string()))
    }

    /// Same link statistics, different number of symbols per period.
    pub fn with_symbols(&self, n_symbols: usize) -> Result<Self> {
        Self::new(self.n_relays, n_symbols, self.variances.clone())
    }

    pub fn link_table(&self) -> BTreeMap<String, f64> {
        self.layout()
            .links()
            .into_iter()
            .zip(&self.variances)
            .map(|(l, &v)| (l.to_string(), v))
            .collect()
    }
}

/// Draws every forward-link variance independently and uniformly on `[lo, hi]`.
pub fn random_topology(
    n_relays: usize,
    n_symbols: usize,
    variance_range: (f64, f64),
    seed: u64,
) -> Result<NetworkTopology> {
    let (lo, hi) = variance_range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::invalid(
            "variance_range",
            format!("need 0 < lo <= hi, got [{lo}, {hi}]"),
        ));
    }
    let stream = TrialStream::new(seed, 0);
    let variances = (0..LinkLayout::new(n_relays).len())
        .map(|i| {
            if lo == hi {
                lo
            } else {
                stream.rng(Domain::Topology, i as u64).random_range(lo..=hi)
            }
        })
        .collect();
    NetworkTopology::new(n_relays, n_symbols, variances)
}

/// Transmit powers and noise power, all linear.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    p_source: f64,
    p_relay: Vec<f64>,
    n0: f64,
}

impl PowerAllocation {
    pub fn new(p_source: f64, p_relay: Vec<f64>, n0: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(p_source) {
            return Err(Error::invalid(
                "P_s",
                format!("must be positive, got {p_source}"),
            ));
        }
        if let Some(p) = p_relay.iter().find(|p| !ok(**p)) {
            return Err(Error::invalid("P_r", format!("must be positive, got {p}")));
        }
        if !ok(n0) {
            return Err(Error::invalid("N0", format!("must be positive, got {n0}")));
        }
        Ok(Self {
            p_source,
            p_relay,
            n0,
        })
    }

    /// `P_s = P_1 = .. = P_K = P_tot / (K + M)`.
    pub fn equal_split(p_tot: f64, n_relays: usize, n_symbols: usize, n0: f64) -> Result<Self> {
        if n_symbols < 1 {
            return Err(Error::invalid("M", "need at least one symbol"));
        }
        let p = p_tot / (n_relays + n_symbols) as f64;
        Self::new(p, vec![p; n_relays], n0)
    }

    /// Equal split with the total power chosen so that `P_tot / N0` equals
    /// `snr_db`.
    pub fn from_system_snr_db(
        snr_db: f64,
        n_relays: usize,
        n_symbols: usize,
        n0: f64,
    ) -> Result<Self> {
        Self::equal_split(n0 * db_to_linear(snr_db), n_relays, n_symbols, n0)
    }

    pub fn p_source(&self) -> f64 {
        self.p_source
    }

    pub fn p_relay(&self) -> &[f64] {
        &self.p_relay
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn power_of(&self, node: Node) -> Result<f64> {
        match node {
            Node::Source => Ok(self.p_source),
            Node::Relay(r) if r >= 1 && r <= self.p_relay.len() => Ok(self.p_relay[r - 1]),
            other => Err(Error::invalid(
                "node",
                format!("{other} does not transmit in this allocation"),
            )),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "STNC-OHAF")]
    StncOhaf,
    #[serde(rename = "STNC-AF")]
    StncAf,
    #[serde(rename = "TDMA-OH")]
    TdmaOh,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::StncOhaf, Scheme::StncAf, Scheme::TdmaOh];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::StncOhaf => "STNC-OHAF",
            Scheme::StncAf => "STNC-AF",
            Scheme::TdmaOh => "TDMA-OH",
        }
    }

    /// Whether relays combine signals overheard from earlier relays.
    pub fn overhears(&self) -> bool {
        !matches!(self, Scheme::StncAf)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "STNCOHAF" | "OHAF" => Ok(Scheme::StncOhaf),
            "STNCAF" | "AF" => Ok(Scheme::StncAf),
            "TDMAOH" | "TDMA" => Ok(Scheme::TdmaOh),
            _ => Err(Error::UnknownScheme(s.to_string())),
        }
    }
}

/// Time slots per transmission period: `M + K` for the STNC schemes,
/// `M + M K` for TDMA.
pub fn slot_count(scheme: Scheme, m: usize, k: usize) -> Result<usize> {
    if m < 1 {
        return Err(Error::invalid("M", "need at least one symbol"));
    }
    Ok(match scheme {
        Scheme::StncOhaf | Scheme::StncAf => m + k,
        Scheme::TdmaOh => m + m * k,
    })
}

/// SNR below which a symbol is in outage: `2^(slots * R) - 1`.
pub fn outage_threshold(scheme: Scheme, m: usize, k: usize, rate: f64) -> Result<f64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::invalid(
            "R",
            format!("rate must be positive, got {rate}"),
        ));
    }
    let slots = slot_count(scheme, m, k)? as f64;
    Ok((slots * rate).exp2() - 1.0)
}

/// `P_u sigma^2_{u,v} / N0`; its reciprocal is the exponential rate of the
/// instantaneous link SNR.
pub fn mean_link_snr(topo: &NetworkTopology, power: &PowerAllocation, link: Link) -> Result<f64> {
    let variance = topo.variance(link)?;
    Ok(power.power_of(link.from)? * variance / power.n0())
}

/// Mean SNR of every link, in [`LinkLayout`] order.
pub fn mean_link_snrs(topo: &NetworkTopology, power: &PowerAllocation) -> Result<Vec<f64>> {
    if power.p_relay().len() != topo.n_relays() {
        return Err(Error::invalid(
            "P_r",
            format!(
                "{} relay powers for {} relays",
                power.p_relay().len(),
                topo.n_relays()
            ),
        ));
    }
    topo.layout()
        .links()
        .into_iter()
        .map(|l| mean_link_snr(topo, power, l))
        .collect()
}

/// JSON scenario document:
/// `{"K":2,"M":3,"variances":{"s->1":..},"P_tot":30,"N0":1,"R":1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub variances: BTreeMap<String, f64>,
    #[serde(rename = "P_tot")]
    pub p_tot: f64,
    #[serde(rename = "N0")]
    pub n0: f64,
    #[serde(rename = "R")]
    pub rate: f64,
}

/// A fully resolved experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: NetworkTopology,
    pub power: PowerAllocation,
    pub p_tot: f64,
    pub rate: f64,
}

impl Scenario {
    pub fn new(topology: NetworkTopology, p_tot: f64, n0: f64, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::invalid(
                "R",
                format!("rate must be positive, got {rate}"),
            ));
        }
        let power =
            PowerAllocation::equal_split(p_tot, topology.n_relays(), topology.n_symbols(), n0)?;
        Ok(Self {
            topology,
            power,
            p_tot,
            rate,
        })
    }

    pub fn from_doc(doc: &ScenarioDoc) -> Result<Self> {
        let table = doc
            .variances
            .iter()
            .map(|(k, &v)| Ok((k.parse::<Link>()?, v)))
            .collect::<Result<Vec<_>>>()?;
        let topology = NetworkTopology::from_links(doc.k, doc.m, table)?;
        Self::new(topology, doc.p_tot, doc.n0, doc.rate)
    }

    pub fn to_doc(&self) -> ScenarioDoc {
        ScenarioDoc {
            k: self.topology.n_relays(),
            m: self.topology.n_symbols(),
            variances: self.topology.link_table(),
            p_tot: self.p_tot,
            n0: self.power.n0(),
            rate: self.rate,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_doc(&serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slot_counts() {
        assert_eq!(slot_count(Scheme::StncOhaf, 3, 2).unwrap(), 5);
        assert_eq!(slot_count(Scheme::TdmaOh, 3, 2).unwrap(), 9);
        assert_eq!(slot_count(Scheme::StncAf, 1, 0).unwrap(), 1);
        assert!(slot_count(Scheme::StncAf, 0, 2).is_err());
    }

    #[test]
    fn thresholds() {
        assert_eq!(outage_threshold(Scheme::StncOhaf, 1, 1, 1.0).unwrap(), 3.0);
        assert_eq!(outage_threshold(Scheme::StncOhaf, 3, 2, 1.0).unwrap(), 31.0);
        assert_eq!(outage_threshold(Scheme::TdmaOh, 2, 2, 0.5).unwrap(), 7.0);
        assert!(outage_threshold(Scheme::StncOhaf, 1, 1, 0.0).is_err());
        assert!(outage_threshold(Scheme::StncOhaf, 1, 1, -1.0).is_err());
    }

    #[test]
    fn mean_snr_formula() {
        let topo = NetworkTopology::uniform(1, 1, 3.0).unwrap();
        let power = PowerAllocation::new(2.0, vec![1.0], 1.0).unwrap();
        let sd = Link::new(Node::Source, Node::Destination);
        assert_eq!(mean_link_snr(&topo, &power, sd).unwrap(), 6.0);

        let topo = NetworkTopology::uniform(1, 1, 1.0).unwrap();
        let power = PowerAllocation::new(1.0, vec![1.0], 1.0).unwrap();
        assert_eq!(mean_link_snr(&topo, &power, sd).unwrap(), 1.0);

        // P_tot = 30 split over K + M = 5 nodes.
        let topo = NetworkTopology::uniform(2, 3, 0.5).unwrap();
        let power = PowerAllocation::equal_split(30.0, 2, 3, 1.0).unwrap();
        assert_eq!(power.p_source(), 6.0);
        let r1d = Link::new(Node::Relay(1), Node::Destination);
        assert_eq!(mean_link_snr(&topo, &power, r1d).unwrap(), 3.0);

        let backward = Link::new(Node::Relay(2), Node::Relay(1));
        assert!(matches!(
            mean_link_snr(&topo, &power, backward),
            Err(Error::UnknownLink(_))
        ));
    }

    #[test]
    fn layout_matches_link_list() {
        for k in 0..6 {
            let layout = LinkLayout::new(k);
            let links = layout.links();
            assert_eq!(links.len(), layout.len());
            assert_eq!(layout.len(), (k + 1) + k * (k + 1) / 2);
            for (i, l) in links.iter().enumerate() {
                assert_eq!(layout.index_of(*l), Some(i), "{l}");
            }
        }
    }

    #[test]
    fn rejects_backward_and_source_bound_links() {
        let layout = LinkLayout::new(3);
        for bad in ["2->1", "1->1", "d->1", "1->s", "s->s", "s->4", "d->s"] {
            let link: Link = bad.parse().unwrap();
            assert_eq!(layout.index_of(link), None, "{bad}");
        }
    }

    #[test]
    fn random_topology_examples() {
        let t = random_topology(2, 2, (0.1, 25.0), 7).unwrap();
        assert_eq!(t.variances().len(), 6);
        assert!(t.variances().iter().all(|v| (0.1..=25.0).contains(v)));
        assert_eq!(t, random_topology(2, 2, (0.1, 25.0), 7).unwrap());
        assert_ne!(t, random_topology(2, 2, (0.1, 25.0), 8).unwrap());

        let t = random_topology(0, 1, (1.0, 1.0), 99).unwrap();
        assert_eq!(t.variances(), &[1.0]);

        assert!(random_topology(1, 1, (0.0, 1.0), 0).is_err());
        assert!(random_topology(1, 1, (2.0, 1.0), 0).is_err());
    }

    #[test]
    fn topology_validation() {
        assert!(NetworkTopology::uniform(1, 0, 1.0).is_err());
        assert!(NetworkTopology::uniform(1, 1, 0.0).is_err());
        assert!(NetworkTopology::new(1, 1, vec![1.0, 1.0]).is_err());
        let missing = [(Link::new(Node::Source, Node::Destination), 1.0)];
        assert!(NetworkTopology::from_links(1, 1, missing).is_err());
    }

    #[test]
    fn power_validation() {
        assert!(PowerAllocation::new(0.0, vec![], 1.0).is_err());
        assert!(PowerAllocation::new(1.0, vec![f64::INFINITY], 1.0).is_err());
        assert!(PowerAllocation::new(1.0, vec![], 0.0).is_err());
        // M source slots plus K relay slots share P_tot.
        let p = PowerAllocation::from_system_snr_db(20.0, 2, 2, 1.0).unwrap();
        assert!((p.p_source() - 25.0).abs() < 1e-12);
        assert!(p.p_relay().iter().all(|&x| (x - 25.0).abs() < 1e-12));
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!("ohaf".parse::<Scheme>().unwrap(), Scheme::StncOhaf);
        assert!("mimo".parse::<Scheme>().is_err());
    }

    #[test]
    fn scenario_json_document() {
        let json = r#"{"K":1,"M":2,"variances":{"s->1":2.0,"s->d":0.5,"1->d":4.0},
                       "P_tot":30,"N0":1,"R":1}"#;
        let sc = Scenario::from_json(json).unwrap();
        assert_eq!(sc.topology.n_relays(), 1);
        assert_eq!(sc.power.p_source(), 10.0);
        let back = Scenario::from_json(&sc.to_json().unwrap()).unwrap();
        assert_eq!(back, sc);

        let bad = r#"{"K":1,"M":2,"variances":{"s->1":2.0,"s->d":0.5},"P_tot":30,"N0":1,"R":1}"#;
        assert!(Scenario::from_json(bad).is_err());
    }

    proptest! {
        #[test]
        fn stnc_never_uses_more_slots_than_tdma(m in 1usize..50, k in 0usize..20) {
            let stnc = slot_count(Scheme::StncOhaf, m, k).unwrap();
            let tdma = slot_count(Scheme::TdmaOh, m, k).unwrap();
            prop_assert!(stnc <= tdma);
            // M = 1 also makes the two counts coincide.
            prop_assert_eq!(stnc == tdma, k == 0 || m == 1);
        }

        #[test]
        fn threshold_strictly_increasing(m in 1usize..6, k in 0usize..5, rate in 0.05f64..1.5) {
            let base = outage_threshold(Scheme::StncOhaf, m, k, rate).unwrap();
            prop_assert!(base > 0.0);
            prop_assert!(outage_threshold(Scheme::StncOhaf, m + 1, k, rate).unwrap() > base);
            prop_assert!(outage_threshold(Scheme::StncOhaf, m, k + 1, rate).unwrap() > base);
            prop_assert!(outage_threshold(Scheme::StncOhaf, m, k, rate * 1.01).unwrap() > base);
        }
    }
}
