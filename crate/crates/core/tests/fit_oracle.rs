mod common;

use psdprobe::spectrum::{psd_rank_diagnostics, psd_rank_k_fit};

#[test]
fn solver_matches_brute_force_on_small_instances() {
    for seed in 1000..1012u64 {
        let (m1, m2, q, k) = common::small_fit_instance(seed);
        let fit = psd_rank_k_fit(&m1, &m2, &q, k).unwrap();
        let oracle = common::brute_force_fit(&m1, &m2, &q, k, 10_000, 5, seed);
        let rel = (fit.cost - oracle).abs() / oracle.max(1e-12);
        assert!(rel < 1e-4, "seed {seed}: solver {} oracle {oracle}", fit.cost);
        let (lmin, tail) = psd_rank_diagnostics(&fit.y, k).unwrap();
        assert!(lmin >= -1e-9 * fit.y.norm() && tail <= 1e-9);
    }
}
