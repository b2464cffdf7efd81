use aerolink_core::channel::{
    los_component, received_power, AntennaConfig, ChannelStats, LinkEnds, LinkGeometry, NoiseModel,
};
use aerolink_core::detequiv::{LinkSystem, RateMode};
use aerolink_core::estimation::{EstimationStats, MmseEstimator};
use aerolink_core::montecarlo::{
    draw_interferer_distances, mse_curve, resolvent_check, simulate_link, Serial, TrialConfig, TrialRunner,
};
use aerolink_core::precoding::{optimal_xi, PrecoderKind};
use aerolink_core::scenario::{LinkModel, PreparedScenario, Scenario, DESIRED_RX, DESIRED_TX};
use aerolink_core::{CMat, Error};

fn defaults(distance_km: f64, interferers_km: &[f64]) -> Scenario {
    Scenario {
        antennas: AntennaConfig::new(32, 4, 0.1).unwrap(),
        k_rice: 5.0,
        carrier_hz: 5e9,
        tx_power_w: 1.0,
        noise: NoiseModel { noise_figure_db: 4.0, bandwidth_hz: 6e6 },
        distance_m: distance_km * 1e3,
        interferer_distances_m: interferers_km.iter().map(|d| d * 1e3).collect(),
    }
}

/// Runs trials on scoped threads in a scrambled order.
struct Threads(usize);

impl TrialRunner for Threads {
    fn run<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let mut out: Vec<Option<T>> = (0..count).map(|_| None).collect();
        let f = &f;
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..self.0)
                .map(|w| {
                    s.spawn(move || (0..count).rev().filter(|i| i % self.0 == w).map(|i| (i, f(i))).collect::<Vec<_>>())
                })
                .collect();
            for h in handles {
                for (i, v) in h.join().unwrap() {
                    out[i] = Some(v);
                }
            }
        });
        out.into_iter().map(Option::unwrap).collect()
    }
}

#[test]
fn eb_without_scattering_matches_hand_formula() {
    let s = Scenario { antennas: AntennaConfig::new(4, 1, 0.1).unwrap(), k_rice: f64::INFINITY, ..defaults(10.0, &[]) };
    let prepared = s.prepare().unwrap();
    let rep = simulate_link(&prepared, &TrialConfig::new(20, 3, PrecoderKind::Eb), &Serial).unwrap();
    let h = los_component(&s.antennas, LinkEnds::new(DESIRED_TX, DESIRED_RX));
    let norm2 = h.norm_squared();
    let p = received_power(&LinkGeometry { carrier_hz: 5e9, distance_m: 1e4, tx_power_w: 1.0 }).unwrap();
    let sigma2 = 1.380649e-23 * 290.0 * 6e6 * 10f64.powf(0.4);
    let oracle = p * norm2 * norm2 / sigma2;
    assert!((rep.per_antenna_sinr[0] / oracle - 1.0).abs() <= 1e-9, "{} vs {oracle}", rep.per_antenna_sinr[0]);
    assert_eq!(rep.self_var_w[0], 0.0);
}

#[test]
fn closed_form_tracks_simulation_at_defaults() {
    let ints = draw_interferer_distances(10.0, 740.0, 4, 99).unwrap();
    let prepared = defaults(10.0, &ints).prepare().unwrap();
    let theory = prepared.closed_form_rate(RateMode::Theoretical).unwrap().mean_bps_hz;
    let mc = simulate_link(&prepared, &TrialConfig::new(500, 1, PrecoderKind::Rzf), &Serial).unwrap();
    let rel = (theory - mc.mean_rate).abs() / mc.mean_rate;
    assert!(rel <= 0.05, "closed form {theory}, simulated {} (se {})", mc.mean_rate, mc.standard_errors.mean_rate);
}

#[test]
fn standard_error_shrinks_with_root_trials() {
    let prepared = defaults(10.0, &[100.0, 300.0]).prepare().unwrap();
    let se = |n| {
        simulate_link(&prepared, &TrialConfig::new(n, 5, PrecoderKind::Rzf), &Serial).unwrap().standard_errors.mean_rate
    };
    let ratio = se(500) / se(2000);
    assert!((2.0 / 1.5..=2.0 * 1.5).contains(&ratio), "{ratio}");
}

#[test]
fn results_do_not_depend_on_scheduling() {
    let prepared = defaults(20.0, &[50.0, 400.0]).prepare().unwrap();
    for kind in [PrecoderKind::Rzf, PrecoderKind::Eb] {
        let cfg = TrialConfig::new(37, 8, kind);
        let a = simulate_link(&prepared, &cfg, &Serial).unwrap();
        let b = simulate_link(&prepared, &cfg, &Threads(3)).unwrap();
        assert_eq!(a, b);
    }
    let grid = [0.01, 0.1];
    let cfg = TrialConfig::new(21, 8, PrecoderKind::Rzf);
    assert_eq!(
        mse_curve(&prepared, &grid, &cfg, &Serial).unwrap(),
        mse_curve(&prepared, &grid, &cfg, &Threads(4)).unwrap()
    );
}

#[test]
fn power_components_are_non_negative() {
    let prepared = defaults(10.0, &[30.0, 200.0, 700.0]).prepare().unwrap();
    for kind in [PrecoderKind::Rzf, PrecoderKind::Eb] {
        let r = simulate_link(&prepared, &TrialConfig::new(50, 2, kind), &Serial).unwrap();
        for v in [&r.signal_w, &r.self_var_w, &r.iai_w, &r.external_w] {
            assert!(v.iter().all(|&x| x >= 0.0));
        }
        let mean = r.per_antenna_rate.iter().sum::<f64>() / 4.0;
        assert!((mean - r.mean_rate).abs() <= 1e-12);
    }
}

/// A noiseless link without scattering: training is exact. The two rows
/// use different bearings so that the channel has full row rank.
fn perfect_link() -> PreparedScenario {
    let scenario =
        Scenario { antennas: AntennaConfig::new(8, 2, 0.1).unwrap(), k_rice: f64::INFINITY, ..defaults(10.0, &[]) };
    let row = AntennaConfig::new(8, 1, 0.1).unwrap();
    let (a, b) = (los_component(&row, LinkEnds::new(0, 1)), los_component(&row, LinkEnds::new(0, 2)));
    let h = CMat::from_fn(2, 8, |i, j| if i == 0 { a[(0, j)] } else { b[(0, j)] });
    let channel = ChannelStats::new(&scenario.antennas, f64::INFINITY, h, 1.0).unwrap();
    let estimator = MmseEstimator::new(&channel, &[], 0.0).unwrap();
    let stats = EstimationStats::from_estimator(&channel, &estimator);
    let system = LinkSystem::new(&channel, &stats).unwrap();
    let desired = LinkModel { xi_star: optimal_xi(&stats), channel, contaminators: vec![], estimator, stats, system };
    PreparedScenario { scenario, noise_w: 0.0, desired, interferers: vec![] }
}

#[test]
fn zero_forcing_limit_is_exact() {
    let grid = [1.0, 0.3, 0.1, 0.01, 1e-3, 1e-4, 1e-6];
    let curve = mse_curve(&perfect_link(), &grid, &TrialConfig::new(3, 1, PrecoderKind::Rzf), &Serial).unwrap();
    let j: Vec<f64> = curve.iter().map(|c| c.1).collect();
    assert!(j.windows(2).all(|w| w[1] < w[0]), "{j:?}");
    assert!(j[6] <= 1e-9);
}

#[test]
fn mse_never_drops_below_noise_floor() {
    let prepared = defaults(10.0, &[80.0, 500.0]).prepare().unwrap();
    let s = prepared.xi_star();
    let grid: Vec<f64> = [0.1, 0.5, 1.0, 2.0, 10.0].iter().map(|f| f * s).collect();
    let curve = mse_curve(&prepared, &grid, &TrialConfig::new(40, 4, PrecoderKind::Rzf), &Serial).unwrap();
    let p = prepared.desired.channel.rx_power_w;
    let floor = 4.0 * prepared.noise_w / (32.0 * 32.0 * p);
    assert!(curve.iter().all(|&(_, j)| j >= floor));
    assert!(mse_curve(&prepared, &[], &TrialConfig::new(4, 4, PrecoderKind::Rzf), &Serial).is_err());
    assert!(mse_curve(&prepared, &[0.0], &TrialConfig::new(4, 4, PrecoderKind::Rzf), &Serial).is_err());
}

#[test]
fn zero_trials_rejected() {
    let prepared = defaults(10.0, &[]).prepare().unwrap();
    let r = simulate_link(&prepared, &TrialConfig::new(0, 1, PrecoderKind::Rzf), &Serial);
    assert_eq!(r.unwrap_err(), Error::NoTrials);
}

#[test]
fn resolvent_matches_marchenko_pastur() {
    let (emp, det, gap) = resolvent_check(64, 0.0, 1.0, 100, 17).unwrap();
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    assert!((emp - golden).abs() <= 0.02, "{emp}");
    assert!((det - golden).abs() <= 1e-9, "{det}");
    assert!(gap <= 0.02);
    let (_, _, exact) = resolvent_check(16, 1.0, 0.5, 10, 17).unwrap();
    assert!(exact <= 1e-12, "{exact}");
    assert!(resolvent_check(1, 0.0, 1.0, 100, 1).is_err());
    assert!(resolvent_check(8, 0.0, 1.0, 5, 1).is_err());
}

#[test]
fn resolvent_gap_shrinks_with_size() {
    let avg = |n: usize| (0..20).map(|r| resolvent_check(n, 0.6, 0.5, 10, 1000 + r).unwrap().2).sum::<f64>() / 20.0;
    let (small, large) = (avg(32), avg(128));
    assert!(large <= small, "{large} > {small}");
}

#[test]
fn interferer_distances_are_uniform() {
    let d = draw_interferer_distances(10.0, 740.0, 100_000, 4).unwrap();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    assert!((mean / 375.0 - 1.0).abs() <= 0.01, "{mean}");
    assert!(d.iter().all(|&x| (10.0..=740.0).contains(&x)));
    assert_eq!(draw_interferer_distances(10.0, 740.0, 5, 4).unwrap(), d[..5]);
}
