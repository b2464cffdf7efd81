use aerolink_core::channel::{
    correlation_matrix, draw_rician, los_component, path_loss_db, received_power, AntennaConfig, ChannelStats,
    LinkEnds, LinkGeometry,
};
use aerolink_core::{linalg, CMat, C64};

fn stats(nt: usize, nr: usize, rho: f64, k: f64) -> ChannelStats {
    let c = AntennaConfig::new(nt, nr, rho).unwrap();
    ChannelStats::new(&c, k, los_component(&c, LinkEnds::new(3, 8)), 1.0).unwrap()
}

/// Row-major vectorisation `[h_00, h_01, .., h_10, ..]`.
fn vec_rows(h: &CMat) -> Vec<C64> {
    (0..h.nrows()).flat_map(|i| (0..h.ncols()).map(move |j| (i, j))).map(|(i, j)| h[(i, j)]).collect()
}

#[test]
fn scatter_covariance_matches_kronecker_model() {
    let s = stats(4, 2, 0.5, 1.0);
    let draws = 10_000;
    let dim = 8;
    let mut cov = CMat::zeros(dim, dim);
    for t in 0..draws {
        let r = draw_rician(&s, 1000 + t);
        let v = vec_rows(&(&r.h_scatter * C64::new(s.sigma_s, 0.0)));
        for a in 0..dim {
            for b in 0..dim {
                cov[(a, b)] += v[a] * v[b].conj();
            }
        }
    }
    cov /= C64::new(draws as f64, 0.0);
    // Row-major vec of G R^{1/2}: rows are independent, each with covariance
    // conj(R) = Rᵀ, so the oracle is I ⊗ Rᵀ with the scatter weight applied.
    let r = &s.r_tx;
    let s2 = s.sigma_s * s.sigma_s;
    let oracle =
        CMat::from_fn(dim, dim, |a, b| if a / 4 == b / 4 { r[(b % 4, a % 4)] * s2 } else { C64::new(0.0, 0.0) });
    let rel = (&cov - &oracle).norm() / oracle.norm();
    assert!(rel <= 0.05, "relative Frobenius error {rel}");
}

#[test]
fn empirical_mean_is_los_component() {
    let s = stats(4, 2, 0.3, 2.0);
    let draws = 10_000u64;
    let n = s.n_rx() * s.n_tx();
    let mut sum = vec![C64::new(0.0, 0.0); n];
    let mut sq = vec![(0.0, 0.0); n];
    for t in 0..draws {
        let h = vec_rows(&draw_rician(&s, t).h);
        for k in 0..n {
            sum[k] += h[k];
            sq[k].0 += h[k].re * h[k].re;
            sq[k].1 += h[k].im * h[k].im;
        }
    }
    let mean_los = vec_rows(&s.mean());
    let d = draws as f64;
    for k in 0..n {
        let m = sum[k] / d;
        let se_re = ((sq[k].0 / d - m.re * m.re) / d).sqrt();
        let se_im = ((sq[k].1 / d - m.im * m.im) / d).sqrt();
        assert!((m.re - mean_los[k].re).abs() <= 3.0 * se_re, "entry {k} re");
        assert!((m.im - mean_los[k].im).abs() <= 3.0 * se_im, "entry {k} im");
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let s = stats(8, 4, 0.1, 5.0);
    assert_eq!(draw_rician(&s, 42).h, draw_rician(&s, 42).h);
    assert_ne!(draw_rician(&s, 42).h, draw_rician(&s, 43).h);
}

#[test]
fn large_k_converges_to_los() {
    let mut last = f64::INFINITY;
    for k in [1.0, 10.0, 100.0, 1e4, 1e8] {
        let s = stats(8, 4, 0.1, k);
        let r = draw_rician(&s, 7);
        let dist = (&r.h - s.mean()).norm();
        assert!(dist <= s.sigma_s * r.h_scatter.norm() + 1e-12);
        assert!(s.sigma_s < last);
        last = s.sigma_s;
    }
    let s = stats(8, 4, 0.1, f64::INFINITY);
    assert_eq!(draw_rician(&s, 7).h, s.h_los);
}

#[test]
fn correlation_is_hermitian_with_unit_diagonal() {
    for rho in [0.0, 0.1, 0.5, 0.9] {
        let c = AntennaConfig::with_phase(8, 2, rho, C64::from_polar(1.0, 0.7)).unwrap();
        let r = correlation_matrix(&c).unwrap();
        assert!(linalg::max_abs_diff(&r, &r.adjoint()) <= 1e-15);
        for i in 0..8 {
            assert!((r[(i, i)] - C64::new(1.0, 0.0)).norm() <= 1e-15);
        }
        let (vals, _) = linalg::eigh(&r);
        assert!(vals.iter().all(|&l| l >= -1e-12), "{rho}: {vals:?}");
        if rho > 0.0 {
            assert!((r[(3, 2)].norm() - rho).abs() <= 1e-15);
        }
    }
    assert!(AntennaConfig::new(8, 2, 1.0).is_err());
}

#[test]
fn los_is_normalised_and_rank_one() {
    for (nt, nr) in [(1, 1), (4, 2), (32, 4), (64, 4)] {
        let c = AntennaConfig::new(nt, nr, 0.1).unwrap();
        let h = los_component(&c, LinkEnds::new(5, 6));
        let tr = linalg::trace(&(&h * h.adjoint())).re;
        assert!((tr - (nt * nr) as f64).abs() <= 1e-9);
        let sv = h.clone().singular_values();
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        if sv.len() > 1 {
            assert!(sv[1] < 1e-9 * sv[0]);
        }
    }
}

#[test]
fn path_loss_and_power_monotone() {
    let g = |f: f64, d: f64| LinkGeometry { carrier_hz: f, distance_m: d, tx_power_w: 1.0 };
    let mut prev = (f64::NEG_INFINITY, f64::INFINITY);
    for d in [1e3, 5e3, 1e4, 1e5, 7.4e5] {
        let l = path_loss_db(&g(5e9, d)).unwrap();
        let p = received_power(&g(5e9, d)).unwrap();
        assert!(l > prev.0 && p < prev.1);
        prev = (l, p);
    }
    assert!(path_loss_db(&g(6e9, 1e4)).unwrap() > path_loss_db(&g(5e9, 1e4)).unwrap());
    let p = received_power(&g(5e9, 1e4)).unwrap();
    assert!((p / 1.018e-12 - 1.0).abs() < 1e-3, "{p}");
}
