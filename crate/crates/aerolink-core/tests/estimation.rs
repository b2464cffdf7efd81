use std::time::Instant;

use aerolink_core::channel::{draw_rician, los_component, AntennaConfig, ChannelRealization, ChannelStats, LinkEnds};
use aerolink_core::estimation::{dft_pilot, estimation_stats, pilot_observation, EstimationStats, MmseEstimator};
use aerolink_core::precoding::optimal_xi;
use aerolink_core::{linalg, CMat, C64};

fn link(nt: usize, nr: usize, k: f64, p: f64, ends: LinkEnds) -> ChannelStats {
    let c = AntennaConfig::new(nt, nr, 0.3).unwrap();
    ChannelStats::new(&c, k, los_component(&c, ends), p).unwrap()
}

/// Column-major vec of the uplink matrix `Ĥᴴ`.
fn vec_uplink(h: &CMat) -> Vec<C64> {
    let up = h.adjoint();
    up.iter().copied().collect()
}

struct Setup {
    desired: ChannelStats,
    interferers: Vec<ChannelStats>,
    noise_w: f64,
}

impl Setup {
    fn new(nt: usize, nr: usize) -> Self {
        Self {
            desired: link(nt, nr, 2.0, 1.0, LinkEnds::new(0, 1)),
            interferers: vec![link(nt, nr, 2.0, 0.4, LinkEnds::new(2, 1)), link(nt, nr, 2.0, 0.2, LinkEnds::new(4, 1))],
            noise_w: 0.3,
        }
    }

    fn estimator(&self) -> MmseEstimator {
        MmseEstimator::new(&self.desired, &self.interferers, self.noise_w).unwrap()
    }

    /// One training round: `(truth, estimate)`.
    fn trial(&self, est: &MmseEstimator, seed: u64) -> (CMat, CMat) {
        let mut chans: Vec<ChannelRealization> = vec![draw_rician(&self.desired, seed)];
        for (a, s) in self.interferers.iter().enumerate() {
            chans.push(draw_rician(s, seed ^ (0x9e37_79b9 << (a + 1))));
        }
        let mut powers = vec![self.desired.rx_power_w];
        powers.extend(self.interferers.iter().map(|s| s.rx_power_w));
        let pilot = dft_pilot(self.desired.n_rx());
        let obs = pilot_observation(&chans, &powers, self.noise_w, &pilot, seed.wrapping_add(77)).unwrap();
        (chans[0].h.clone(), est.estimate(&obs).h_hat)
    }
}

#[test]
fn noise_only_observation_has_noise_variance() {
    let s = link(8, 4, 1.0, 1.0, LinkEnds::new(0, 1));
    let noise = 2.5e-3;
    let pilot = dft_pilot(4);
    let mut acc = 0.0;
    let mut count = 0usize;
    for t in 0..10_000 {
        let ch = draw_rician(&s, t);
        let obs = pilot_observation(&[ch], &[0.0], noise, &pilot, 50_000 + t).unwrap();
        acc += obs.y.norm_squared();
        count += obs.y.len();
    }
    let var = acc / count as f64;
    assert!((var / noise - 1.0).abs() <= 0.05, "{var}");
}

#[test]
fn noiseless_observation_superposes() {
    let s = link(4, 2, 1.0, 1.0, LinkEnds::new(0, 1));
    let ch = draw_rician(&s, 3);
    let eye = linalg::identity(2);
    let single = pilot_observation(std::slice::from_ref(&ch), &[2.0], 0.0, &eye, 1).unwrap();
    let oracle = ch.h.adjoint() * C64::new(2f64.sqrt(), 0.0);
    assert!(linalg::max_abs_diff(&single.y, &oracle) <= 1e-15);
    let double = pilot_observation(&[ch.clone(), ch], &[2.0, 2.0], 0.0, &eye, 1).unwrap();
    assert!(linalg::max_abs_diff(&double.y, &(&single.y * C64::new(2.0, 0.0))) <= 1e-14);
}

#[test]
fn estimate_covariance_matches_phi() {
    let setup = Setup::new(3, 2);
    let est = setup.estimator();
    let mean_up = vec_uplink(&setup.desired.mean());
    let dim = mean_up.len();
    let draws = 10_000;
    let mut cov = CMat::zeros(dim, dim);
    for t in 0..draws {
        let (_, h_hat) = setup.trial(&est, t);
        let v: Vec<C64> = vec_uplink(&h_hat).iter().zip(&mean_up).map(|(a, b)| a - b).collect();
        for a in 0..dim {
            for b in 0..dim {
                cov[(a, b)] += v[a] * v[b].conj();
            }
        }
    }
    cov /= C64::new(draws as f64, 0.0);
    // Uplink columns are independent with common covariance Φ.
    let nt = 3;
    let phi = est.phi_tx();
    let oracle =
        CMat::from_fn(dim, dim, |a, b| if a / nt == b / nt { phi[(a % nt, b % nt)] } else { C64::new(0.0, 0.0) });
    let rel = (&cov - &oracle).norm() / oracle.norm();
    assert!(rel <= 0.05, "relative Frobenius error {rel}");
}

#[test]
fn error_is_orthogonal_to_estimate() {
    let setup = Setup::new(3, 1);
    let est = setup.estimator();
    let draws = 20_000;
    let dim = 3;
    let mean_hat = vec_uplink(&setup.desired.mean());
    let mut samples: Vec<Vec<C64>> = Vec::with_capacity(draws);
    for t in 0..draws as u64 {
        let (h, h_hat) = setup.trial(&est, t);
        let err = vec_uplink(&(&h - &h_hat));
        let centred: Vec<C64> = vec_uplink(&h_hat).iter().zip(&mean_hat).map(|(a, b)| a - b).collect();
        let mut cross = Vec::with_capacity(dim * dim);
        for e in &err {
            for c in &centred {
                cross.push(e * c.conj());
            }
        }
        samples.push(cross);
    }
    let n = draws as f64;
    for k in 0..dim * dim {
        let m: C64 = samples.iter().map(|s| s[k]).sum::<C64>() / n;
        let vr: f64 = samples.iter().map(|s| (s[k].re - m.re).powi(2)).sum::<f64>() / (n - 1.0);
        let vi: f64 = samples.iter().map(|s| (s[k].im - m.im).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(m.re.abs() <= 3.0 * (vr / n).sqrt(), "entry {k}: {m}");
        assert!(m.im.abs() <= 3.0 * (vi / n).sqrt(), "entry {k}: {m}");
    }
}

#[test]
fn vanishing_noise_recovers_channel() {
    let setup = Setup { interferers: vec![], noise_w: 1e-20, ..Setup::new(8, 2) };
    let est = setup.estimator();
    for t in 0..5 {
        let (h, h_hat) = setup.trial(&est, t);
        assert!((&h - &h_hat).norm() <= 1e-7 * h.norm());
    }
}

#[test]
fn without_scattering_estimate_is_los() {
    let d = link(8, 2, f64::INFINITY, 1.0, LinkEnds::new(0, 1));
    let setup = Setup { desired: d.clone(), interferers: vec![], noise_w: 0.5 };
    let est = setup.estimator();
    let (_, h_hat) = setup.trial(&est, 1);
    assert!(linalg::max_abs_diff(&h_hat, &d.mean()) <= 1e-15);
    let st = estimation_stats(&d, &[], 0.5).unwrap();
    assert!(st.phi_tx.norm() == 0.0 && st.xi_blocks.iter().all(|b| b.norm() == 0.0));
}

fn scalar_stats(p: f64, noise: f64, k: f64) -> EstimationStats {
    let c = AntennaConfig::new(1, 1, 0.0).unwrap();
    let s = ChannelStats::new(&c, k, los_component(&c, LinkEnds::new(0, 1)), p).unwrap();
    estimation_stats(&s, &[], noise).unwrap()
}

#[test]
fn scalar_phi_by_hand() {
    let (p, noise, k) = (2.0, 0.5, 1.5);
    let s2 = 1.0 / (k + 1.0);
    let oracle = s2 * s2 / (noise / p + s2);
    let st = scalar_stats(p, noise, k);
    assert!((st.phi_tx[(0, 0)].re - oracle).abs() <= 1e-12 * oracle);
    assert!((st.xi_blocks[0][(0, 0)].re - (s2 - oracle)).abs() <= 1e-12);
}

#[test]
fn second_order_statistics_are_consistent() {
    let setup = Setup::new(8, 4);
    let st = estimation_stats(&setup.desired, &setup.interferers, setup.noise_w).unwrap();
    let s2 = setup.desired.sigma_s.powi(2);
    let nu2 = setup.desired.nu.powi(2);
    let full = &setup.desired.r_tx * C64::new(s2, 0.0);
    for n in 0..4 {
        let xi = &st.xi_blocks[n];
        assert!(linalg::max_abs_diff(&(xi + &st.phi_tx), &full) <= 1e-12);
        let (vals, _) = linalg::eigh(xi);
        assert!(vals.iter().all(|&l| l >= -1e-10));
        let th = &st.theta_blocks[n];
        assert!(linalg::max_abs_diff(th, &th.adjoint()) <= 1e-12);
        let row = setup.desired.h_los.row(n).adjoint();
        let m = &row * row.adjoint();
        assert!(linalg::max_abs_diff(&st.m_blocks[n * 4 + n], &m) <= 1e-12);
        assert!(linalg::max_abs_diff(&st.omega_blocks[n], &(&m * C64::new(nu2, 0.0) + &full)) <= 1e-12);
    }
    assert_eq!(st.phi_rx, linalg::identity(4));
}

#[test]
fn estimate_quality_degrades_with_noise_and_contamination() {
    let setup = Setup::new(8, 2);
    let tr = |ints: &[ChannelStats], noise: f64| {
        linalg::trace(&estimation_stats(&setup.desired, ints, noise).unwrap().phi_tx).re
    };
    let mut prev = f64::INFINITY;
    for noise in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let t = tr(&setup.interferers, noise);
        assert!(t <= prev);
        prev = t;
    }
    assert!(tr(&[], 0.3) >= tr(&setup.interferers[..1], 0.3));
    assert!(tr(&setup.interferers[..1], 0.3) >= tr(&setup.interferers, 0.3));
}

#[test]
fn optimal_xi_grows_with_noise() {
    let setup = Setup::new(16, 4);
    let mut prev = 0.0;
    for noise in [1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let x = optimal_xi(&estimation_stats(&setup.desired, &setup.interferers, noise).unwrap());
        assert!(x >= prev, "{noise}: {x} < {prev}");
        prev = x;
    }
}

fn time_estimator(nt: usize) -> f64 {
    let setup = Setup::new(nt, 4);
    let est = setup.estimator();
    let (_, _) = setup.trial(&est, 0);
    (0..7)
        .map(|_| {
            let t0 = Instant::now();
            for _ in 0..5 {
                std::hint::black_box(MmseEstimator::new(&setup.desired, &setup.interferers, setup.noise_w).unwrap());
            }
            t0.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn estimator_cost_is_cubic_in_n_tx() {
    let ratio = time_estimator(64) / time_estimator(32);
    assert!((4.0..=16.0).contains(&ratio), "timing ratio {ratio}");
}
