//! Pinned gaps between the SNR recursion and the baseband chain at 20 dB
//! mean link SNR, 100 channels x 10^4 noise traces, seed 20240601.
//!
//! With several relays the recursion ignores noise correlation through
//! shared upstream relays, so the gap does not vanish. These numbers record
//! its measured size; a change means the chain or the streams changed.

use ohaf_core::baseband::lemma1_gap_report_at;

// (K, M, median_rel_err, exact_median_rel_err)
const GOLDEN: [(usize, usize, f64, f64); 6] = [
    (2, 1, 0.0579405423737448, 0.05216045394735258),
    (2, 2, 0.030489246911865497, 0.028068120816583164),
    (2, 4, 0.01691209747461009, 0.012494103258673506),
    (3, 1, 0.11938728704480839, 0.11906017956884807),
    (3, 2, 0.07374835848363315, 0.08053607215708103),
    (3, 4, 0.0383092904448421, 0.036288103212983036),
];

#[test]
fn multi_relay_gap_matches_pinned_values() {
    for (k, m, mc, exact) in GOLDEN {
        let r = lemma1_gap_report_at(k, m, 20.0, 100, 10_000, 20_240_601).unwrap();
        assert!(
            (r.median_rel_err / mc - 1.0).abs() < 1e-9,
            "K={k} M={m}: {}",
            r.median_rel_err
        );
        assert!(
            (r.exact_median_rel_err / exact - 1.0).abs() < 1e-9,
            "K={k} M={m}: {}",
            r.exact_median_rel_err
        );
        assert!(r.max_chain_deviation < 1e-12);
    }
}

#[test]
fn single_relay_gap_is_zero_up_to_rounding() {
    for m in [1, 2, 4] {
        let r = lemma1_gap_report_at(1, m, 20.0, 100, 10_000, 20_240_601).unwrap();
        assert!(
            r.exact_median_rel_err < 1e-12,
            "M={m}: {}",
            r.exact_median_rel_err
        );
        assert!(r.exact_p95_rel_err < 1e-12);
        // Sample-variance noise of 10^4 complex traces.
        assert!(r.median_rel_err < 2e-2);
    }
}
