//! Statistical consistency of the random draws and the outage estimator.

use ohaf_core::closedform::exact_direct_outage;
use ohaf_core::fading::{draw_complex_gains, draw_realization};
use ohaf_core::model::random_topology;
use ohaf_core::montecarlo::estimate_outage;
use ohaf_core::stream::TrialStream;
use ohaf_core::{NetworkTopology, PowerAllocation, Scheme};

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[test]
fn complex_gains_and_link_snrs_agree_in_distribution() {
    let n = 100_000u64;
    let topo = random_topology(2, 2, (0.1, 25.0), 11).unwrap();
    let power = PowerAllocation::from_system_snr_db(15.0, 2, 2, 1.0).unwrap();
    // 1% critical value for equal sample sizes.
    let critical = 1.628 * (2.0 / n as f64).sqrt();
    for link in topo.layout().links() {
        let mut from_gains = Vec::with_capacity(n as usize);
        let mut from_snrs = Vec::with_capacity(n as usize);
        for t in 0..n {
            let stream = TrialStream::new(5, t);
            let g = draw_complex_gains(&topo, stream)
                .to_realization(&power)
                .unwrap();
            from_gains.push(g.get(link).unwrap());
            from_snrs.push(
                draw_realization(&topo, &power, stream)
                    .unwrap()
                    .get(link)
                    .unwrap(),
            );
        }
        let d = ks_statistic(from_gains, from_snrs);
        assert!(d < critical, "{link}: D={d:.5} critical={critical:.5}");
    }
}

#[test]
fn ks_statistic_detects_a_scale_change() {
    let a: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
    let b: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
    assert!((ks_statistic(a.clone(), a.clone())).abs() < 1e-12);
    assert!((ks_statistic(a, b) - 0.5).abs() < 1e-2);
}

#[test]
fn confidence_interval_coverage_on_exact_case() {
    let topo = NetworkTopology::uniform(0, 1, 1.0).unwrap();
    let power = PowerAllocation::new(10.0, vec![], 1.0).unwrap();
    let exact = exact_direct_outage(0.1, 1.0);
    let covered = (0..200u64)
        .filter(|&seed| {
            let e = estimate_outage(&topo, &power, Scheme::StncOhaf, 1.0, 10_000, seed).unwrap();
            e.ci95.0 <= exact && exact <= e.ci95.1
        })
        .count();
    let coverage = covered as f64 / 200.0;
    assert!((coverage - 0.95).abs() <= 0.04, "coverage {coverage}");
}
