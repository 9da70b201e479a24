//! Python module `ohaf`.
//!
//! Schemes are passed as strings (`"STNC-OHAF"`, `"STNC-AF"`, `"TDMA-OH"`;
//! short forms like `"ohaf"` work too). Link tables are dicts keyed like
//! `"s->1"`.

use std::collections::BTreeMap;

use ohaf_core::fading::FadingRealization;
use ohaf_core::{baseband, closedform, model, montecarlo, snr};
use ohaf_core::{Link, Scheme};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: ohaf_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(err)
}

fn links(table: BTreeMap<String, f64>) -> PyResult<Vec<(Link, f64)>> {
    table
        .into_iter()
        .map(|(k, v)| Ok((k.parse::<Link>().map_err(err)?, v)))
        .collect()
}

/// Link variances of a K-relay network transmitting M symbols per period.
#[pyclass(name = "Topology", module = "ohaf", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTopology(model::NetworkTopology);

#[pymethods]
impl PyTopology {
    #[new]
    fn new(k: usize, m: usize, variances: BTreeMap<String, f64>) -> PyResult<Self> {
        model::NetworkTopology::from_links(k, m, links(variances)?)
            .map(Self)
            .map_err(err)
    }

    /// Variances drawn uniformly from `[lo, hi]`.
    #[staticmethod]
    #[pyo3(signature = (k, m, seed, lo = 0.1, hi = 25.0))]
    fn random(k: usize, m: usize, seed: u64, lo: f64, hi: f64) -> PyResult<Self> {
        model::random_topology(k, m, (lo, hi), seed)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.n_relays()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.n_symbols()
    }

    fn variances(&self) -> BTreeMap<String, f64> {
        self.0.link_table()
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(k={}, m={})",
            self.0.n_relays(),
            self.0.n_symbols()
        )
    }
}

/// Per-node transmit powers and receiver noise power.
#[pyclass(name = "PowerAllocation", module = "ohaf", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPower(model::PowerAllocation);

#[pymethods]
impl PyPower {
    #[new]
    #[pyo3(signature = (p_source, p_relays, n0 = 1.0))]
    fn new(p_source: f64, p_relays: Vec<f64>, n0: f64) -> PyResult<Self> {
        model::PowerAllocation::new(p_source, p_relays, n0)
            .map(Self)
            .map_err(err)
    }

    /// `P_tot / (K + M)` at every node.
    #[staticmethod]
    #[pyo3(signature = (p_tot, k, m, n0 = 1.0))]
    fn equal_split(p_tot: f64, k: usize, m: usize, n0: f64) -> PyResult<Self> {
        model::PowerAllocation::equal_split(p_tot, k, m, n0)
            .map(Self)
            .map_err(err)
    }

    /// Equal split with `P_tot / N0` given in dB.
    #[staticmethod]
    #[pyo3(signature = (snr_db, k, m, n0 = 1.0))]
    fn from_system_snr_db(snr_db: f64, k: usize, m: usize, n0: f64) -> PyResult<Self> {
        model::PowerAllocation::from_system_snr_db(snr_db, k, m, n0)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn p_source(&self) -> f64 {
        self.0.p_source()
    }

    #[getter]
    fn p_relays(&self) -> Vec<f64> {
        self.0.p_relay().to_vec()
    }

    #[getter]
    fn n0(&self) -> f64 {
        self.0.n0()
    }
}

#[pyfunction]
fn af_combine(a: f64, g: f64) -> f64 {
    snr::af_combine(a, g)
}

#[pyfunction]
fn slot_count(scheme_name: &str, m: usize, k: usize) -> PyResult<usize> {
    model::slot_count(scheme(scheme_name)?, m, k).map_err(err)
}

#[pyfunction]
fn outage_threshold(scheme_name: &str, m: usize, k: usize, rate: f64) -> PyResult<f64> {
    model::outage_threshold(scheme(scheme_name)?, m, k, rate).map_err(err)
}

/// End-to-end SNR for one realization of instantaneous link SNRs.
/// Missing links count as zero.
#[pyfunction]
#[pyo3(signature = (k, m, link_snr, scheme_name = "STNC-OHAF"))]
fn end_to_end_snr(
    k: usize,
    m: usize,
    link_snr: BTreeMap<String, f64>,
    scheme_name: &str,
) -> PyResult<f64> {
    let real = FadingRealization::from_links(k, links(link_snr)?).map_err(err)?;
    Ok(snr::end_to_end_snr(&real, m, scheme(scheme_name)?))
}

/// Effective SNR at each relay, in relay order.
#[pyfunction]
#[pyo3(signature = (k, m, link_snr, scheme_name = "STNC-OHAF"))]
fn relay_effective_snrs(
    k: usize,
    m: usize,
    link_snr: BTreeMap<String, f64>,
    scheme_name: &str,
) -> PyResult<Vec<f64>> {
    let real = FadingRealization::from_links(k, links(link_snr)?).map_err(err)?;
    Ok(snr::relay_effective_snrs(&real, m, scheme(scheme_name)?))
}

/// Closed-form high-SNR outage; returns `(raw, clamped)`.
#[pyfunction]
fn theorem1_outage(topo: &PyTopology, power: &PyPower, rate: f64) -> PyResult<(f64, f64)> {
    let v = closedform::theorem1_outage(&topo.0, &power.0, rate).map_err(err)?;
    Ok((v.raw, v.clamped))
}

/// Monte Carlo outage estimate as a dict with `p_hat`, `outages`,
/// `n_trials`, `std_err` and `ci95`.
#[pyfunction]
#[pyo3(signature = (topo, power, rate, n_trials, seed, scheme_name = "STNC-OHAF"))]
fn estimate_outage<'py>(
    py: Python<'py>,
    topo: &PyTopology,
    power: &PyPower,
    rate: f64,
    n_trials: u64,
    seed: u64,
    scheme_name: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let s = scheme(scheme_name)?;
    let (t, p) = (topo.0.clone(), power.0.clone());
    let e = py
        .detach(move || montecarlo::estimate_outage(&t, &p, s, rate, n_trials, seed))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("p_hat", e.p_hat)?;
    d.set_item("outages", e.outages)?;
    d.set_item("n_trials", e.n_trials)?;
    d.set_item("std_err", e.std_err)?;
    d.set_item("ci95", e.ci95)?;
    Ok(d)
}

/// Gap between the SNR recursion and the simulated baseband chain.
#[pyfunction]
#[pyo3(signature = (topo, power, n_channels = 100, n_noise = 10_000, seed = 1))]
fn lemma1_gap_report<'py>(
    py: Python<'py>,
    topo: &PyTopology,
    power: &PyPower,
    n_channels: u64,
    n_noise: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (t, p) = (topo.0.clone(), power.0.clone());
    let r = py
        .detach(move || baseband::lemma1_gap_report(&t, &p, n_channels, n_noise, seed))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("K", r.k)?;
    d.set_item("M", r.m)?;
    d.set_item("snr_db", r.snr_db)?;
    d.set_item("median_rel_err", r.median_rel_err)?;
    d.set_item("p95_rel_err", r.p95_rel_err)?;
    d.set_item("n_channels", r.n_channels)?;
    d.set_item("n_noise", r.n_noise)?;
    d.set_item("exact_median_rel_err", r.exact_median_rel_err)?;
    d.set_item("exact_p95_rel_err", r.exact_p95_rel_err)?;
    Ok(d)
}

#[pymodule]
fn ohaf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTopology>()?;
    m.add_class::<PyPower>()?;
    m.add(
        "SCHEMES",
        Scheme::ALL.iter().map(|s| s.name()).collect::<Vec<_>>(),
    )?;
    m.add_function(wrap_pyfunction!(af_combine, m)?)?;
    m.add_function(wrap_pyfunction!(slot_count, m)?)?;
    m.add_function(wrap_pyfunction!(outage_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(end_to_end_snr, m)?)?;
    m.add_function(wrap_pyfunction!(relay_effective_snrs, m)?)?;
    m.add_function(wrap_pyfunction!(theorem1_outage, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_outage, m)?)?;
    m.add_function(wrap_pyfunction!(lemma1_gap_report, m)?)?;
    Ok(())
}
