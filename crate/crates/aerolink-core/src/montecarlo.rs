//! Monte-Carlo oracle for SINR, rate and detection MSE.
//!
//! Data symbols are integrated out analytically (unit-power i.i.d.), so a
//! trial only draws channels, pilots and noise. Trial `t` seeds its own
//! generator from `mix(master_seed, t)`; per-trial records are reduced by
//! pairwise summation in trial order, which keeps results independent of
//! how a [`TrialRunner`] schedules the work.

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{draw_rician_with, ChannelStats};
use crate::detequiv::DeProblem;
use crate::error::{Error, Result};
use crate::estimation::{dft_pilot, pilot_observation_with};
use crate::precoding::{precoder, PrecoderKind};
use crate::rng::{self, Rng};
use crate::scenario::{LinkModel, PreparedScenario};
use crate::{linalg, CMat, C64};

/// Executes independent trials and returns their results in index order.
pub trait TrialRunner {
    fn run<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl TrialRunner for Serial {
    fn run<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiPolicy {
    Optimal,
    /// Applies to the desired link; interferers keep their own optimum.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub trials: usize,
    pub master_seed: u64,
    pub precoder: PrecoderKind,
    pub xi: XiPolicy,
}

impl TrialConfig {
    pub fn new(trials: usize, master_seed: u64, precoder: PrecoderKind) -> Self {
        Self { trials, master_seed, precoder, xi: XiPolicy::Optimal }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardErrors {
    pub mean_rate: f64,
    pub per_antenna_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalReport {
    pub trials: usize,
    pub signal_w: Vec<f64>,
    pub self_var_w: Vec<f64>,
    pub iai_w: Vec<f64>,
    pub external_w: Vec<f64>,
    pub noise_w: f64,
    pub per_antenna_sinr: Vec<f64>,
    pub per_antenna_rate: Vec<f64>,
    pub mean_rate: f64,
    pub standard_errors: StandardErrors,
}

/// Pairwise (cascade) sum of equally sized records.
pub fn pairwise_sum(records: &[Vec<f64>]) -> Vec<f64> {
    match records.len() {
        0 => Vec::new(),
        1 => records[0].clone(),
        n => {
            let (l, r) = records.split_at(n / 2);
            let mut a = pairwise_sum(l);
            for (x, y) in a.iter_mut().zip(pairwise_sum(r)) {
                *x += y;
            }
            a
        }
    }
}

fn draw_all<'a>(links: impl Iterator<Item = &'a ChannelStats>, rng: &mut Rng) -> Vec<CMat> {
    links.map(|s| draw_rician_with(s, rng, 0).h).collect()
}

/// Runs training for `link` with a fresh draw of the true channel and of
/// every contaminating channel; returns `(true channel, estimate)`.
fn train(link: &LinkModel, pilot: &CMat, noise_w: f64, rng: &mut Rng) -> (CMat, CMat) {
    let truth = draw_rician_with(&link.channel, rng, 0);
    let contam: Vec<_> = link.contaminators.iter().map(|c| draw_rician_with(c, rng, 0)).collect();
    let mut chans = Vec::with_capacity(1 + contam.len());
    chans.push(truth.clone());
    chans.extend(contam);
    let mut powers = vec![link.channel.rx_power_w];
    powers.extend(link.contaminator_powers());
    let obs = pilot_observation_with(&chans, &powers, noise_w, pilot, rng).expect("consistent training inputs");
    (truth.h, link.estimator.estimate(&obs).h_hat)
}

fn xi_for(policy: XiPolicy, link: &LinkModel) -> f64 {
    match policy {
        XiPolicy::Optimal => link.xi_star,
        XiPolicy::Fixed(x) => x,
    }
}

/// Per-trial record layout, per receive antenna n (stride 5):
/// Re x_n, Im x_n, |x_n|², inter-antenna power, external power, with
/// `x_n = [H V]_{n,n}`.
fn link_trial(scn: &PreparedScenario, cfg: &TrialConfig, xi: f64, t: usize, pilot: &CMat) -> Vec<f64> {
    let mut rng = rng::rng(rng::mix(cfg.master_seed, t as u64));
    let nr = scn.n_rx();
    let (h, h_hat) = train(&scn.desired, pilot, scn.noise_w, &mut rng);
    let v = precoder(cfg.precoder, &h_hat, xi).expect("positive regularizer").v;
    let x = &h * &v;
    let mut rec = vec![0.0; 5 * nr];
    for n in 0..nr {
        let d = x[(n, n)];
        let row: f64 = x.row(n).iter().map(|z| z.norm_sqr()).sum();
        rec[5 * n] = d.re;
        rec[5 * n + 1] = d.im;
        rec[5 * n + 2] = d.norm_sqr();
        rec[5 * n + 3] = row - d.norm_sqr();
    }
    for i in &scn.interferers {
        let (_, hh) = train(&i.link, pilot, scn.noise_w, &mut rng);
        let va = precoder(cfg.precoder, &hh, i.link.xi_star).expect("positive regularizer").v;
        let hx = draw_all(core::iter::once(&i.cross), &mut rng).remove(0);
        let y = hx * va;
        for n in 0..nr {
            let row: f64 = y.row(n).iter().map(|z| z.norm_sqr()).sum();
            rec[5 * n + 4] += i.cross.rx_power_w * row;
        }
    }
    rec
}

struct Moments {
    signal: Vec<f64>,
    var: Vec<f64>,
    iai: Vec<f64>,
    ext: Vec<f64>,
    sinr: Vec<f64>,
    rate: Vec<f64>,
}

fn moments(sum: &[f64], count: f64, p: f64, noise_w: f64) -> Moments {
    let nr = sum.len() / 5;
    let mut m = Moments {
        signal: Vec::with_capacity(nr),
        var: Vec::with_capacity(nr),
        iai: Vec::with_capacity(nr),
        ext: Vec::with_capacity(nr),
        sinr: Vec::with_capacity(nr),
        rate: Vec::with_capacity(nr),
    };
    for n in 0..nr {
        let mean = C64::new(sum[5 * n], sum[5 * n + 1]) / count;
        let s = p * mean.norm_sqr();
        let var = (p * (sum[5 * n + 2] / count - mean.norm_sqr())).max(0.0);
        let iai = p * sum[5 * n + 3] / count;
        let ext = sum[5 * n + 4] / count;
        let g = s / (var + iai + ext + noise_w);
        m.signal.push(s);
        m.var.push(var);
        m.iai.push(iai);
        m.ext.push(ext);
        m.sinr.push(g);
        m.rate.push(libm::log2(1.0 + g));
    }
    m
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn simulate_link<R: TrialRunner>(scn: &PreparedScenario, cfg: &TrialConfig, runner: &R) -> Result<EmpiricalReport> {
    if cfg.trials == 0 {
        return Err(Error::NoTrials);
    }
    let xi = xi_for(cfg.xi, &scn.desired);
    if cfg.precoder == PrecoderKind::Rzf && !(xi > 0.0) {
        return Err(Error::Domain { name: "xi", value: xi });
    }
    let pilot = dft_pilot(scn.n_rx());
    let records = runner.run(cfg.trials, |t| link_trial(scn, cfg, xi, t, &pilot));
    let total = pairwise_sum(&records);
    let p = scn.desired.channel.rx_power_w;
    let count = cfg.trials as f64;
    let m = moments(&total, count, p, scn.noise_w);
    let nr = scn.n_rx();

    // Delete-one jackknife over trials.
    let (se_mean, se_per) = if cfg.trials > 1 {
        let mut loo_mean = Vec::with_capacity(cfg.trials);
        let mut loo_per: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.trials); nr];
        let mut reduced = total.clone();
        for r in &records {
            for ((dst, s), x) in reduced.iter_mut().zip(&total).zip(r) {
                *dst = s - x;
            }
            let mm = moments(&reduced, count - 1.0, p, scn.noise_w);
            loo_mean.push(mean(&mm.rate));
            for (n, col) in loo_per.iter_mut().enumerate() {
                col.push(mm.rate[n]);
            }
        }
        let jack = |xs: &[f64]| {
            let mu = mean(xs);
            let ss: f64 = xs.iter().map(|x| (x - mu) * (x - mu)).sum();
            libm::sqrt((count - 1.0) / count * ss)
        };
        (jack(&loo_mean), loo_per.iter().map(|c| jack(c)).collect())
    } else {
        (f64::NAN, vec![f64::NAN; nr])
    };

    Ok(EmpiricalReport {
        trials: cfg.trials,
        mean_rate: mean(&m.rate),
        signal_w: m.signal,
        self_var_w: m.var,
        iai_w: m.iai,
        external_w: m.ext,
        noise_w: scn.noise_w,
        per_antenna_sinr: m.sinr,
        per_antenna_rate: m.rate,
        standard_errors: StandardErrors { mean_rate: se_mean, per_antenna_rate: se_per },
    })
}

/// Monte-Carlo detection MSE
/// `J(xi) = E‖HV/N_t - I‖² + sum_a (P_a/P) E‖H_a V_a‖² / N_t² + N_r σ² / (N_t² P)`
/// for RZF at each regularizer on the grid. Interferers precode with their
/// own optimal regularizer throughout.
pub fn mse_curve<R: TrialRunner>(
    scn: &PreparedScenario,
    xi_grid: &[f64],
    cfg: &TrialConfig,
    runner: &R,
) -> Result<Vec<(f64, f64)>> {
    if xi_grid.is_empty() {
        return Err(Error::Empty("xi grid"));
    }
    if cfg.trials == 0 {
        return Err(Error::NoTrials);
    }
    if let Some(&bad) = xi_grid.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain { name: "xi", value: bad });
    }
    let pilot = dft_pilot(scn.n_rx());
    let nt = scn.n_tx() as f64;
    let nr = scn.n_rx();
    let p = scn.desired.channel.rx_power_w;
    let records = runner.run(cfg.trials, |t| {
        let mut rng = rng::rng(rng::mix(cfg.master_seed, t as u64));
        let (h, h_hat) = train(&scn.desired, &pilot, scn.noise_w, &mut rng);
        let mut interference = 0.0;
        for i in &scn.interferers {
            let (_, hh) = train(&i.link, &pilot, scn.noise_w, &mut rng);
            let va = precoder(PrecoderKind::Rzf, &hh, i.link.xi_star).expect("positive regularizer").v;
            let hx = draw_all(core::iter::once(&i.cross), &mut rng).remove(0);
            interference += i.cross.rx_power_w / p * (hx * va).norm_squared() / (nt * nt);
        }
        xi_grid
            .iter()
            .map(|&xi| {
                let v = precoder(PrecoderKind::Rzf, &h_hat, xi).expect("positive regularizer").v;
                let e = &h * v * C64::new(1.0 / nt, 0.0) - linalg::identity(nr);
                e.norm_squared() + interference
            })
            .collect::<Vec<f64>>()
    });
    let total = pairwise_sum(&records);
    let floor = nr as f64 * scn.noise_w / (nt * nt * p);
    Ok(xi_grid.iter().zip(total).map(|(&xi, s)| (xi, s / cfg.trials as f64 + floor)).collect())
}

/// Compares `(1/n) Tr Q(xi)` for `H = nu H̄ + sigma G / sqrt(n)` (square,
/// uncorrelated) with its deterministic equivalent. `H̄` is a fixed
/// rank-one unit-modulus matrix scaled to unit spectral norm.
/// Returns `(empirical, deterministic, gap)`.
pub fn resolvent_check(n: usize, nu: f64, xi: f64, draws: usize, seed: u64) -> Result<(f64, f64, f64)> {
    if n < 2 {
        return Err(Error::Domain { name: "n", value: n as f64 });
    }
    if draws < 10 {
        return Err(Error::Domain { name: "draws", value: draws as f64 });
    }
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::Domain { name: "nu", value: nu });
    }
    let sigma = libm::sqrt(1.0 - nu * nu);
    let h_bar = CMat::from_fn(n, n, |i, j| {
        C64::from_polar(1.0 / n as f64, core::f64::consts::PI * 0.37 * (i as f64 - 2.0 * j as f64))
    });
    let id = linalg::identity(n);
    let problem = DeProblem::from_theorem(&h_bar, &id, &id, nu, sigma)?;
    let d = crate::detequiv::solve_deltas(xi, &problem)?;
    let t = crate::detequiv::resolvent_approx(xi, &d, &problem)?;
    let det = linalg::trace(&t).re / n as f64;
    let mut rng = rng::rng(seed);
    let mut acc = 0.0;
    for _ in 0..draws {
        let g = rng::complex_normal_matrix(&mut rng, n, n);
        let h = &h_bar * C64::new(nu, 0.0) + g * C64::new(sigma / libm::sqrt(n as f64), 0.0);
        let q = linalg::inv_hpd(&(&h * h.adjoint() + &id * C64::new(xi, 0.0)), "resolvent")?;
        acc += linalg::trace(&q).re / n as f64;
    }
    let emp = acc / draws as f64;
    Ok((emp, det, (emp - det).abs()))
}

/// `count` i.i.d. uniform distances in `[d_desired, d_max]`. The i-th
/// sample is `d_desired + u_i (d_max - d_desired)` with `u_i` depending on
/// the seed and `i` only, so prefixes agree across counts and samples move
/// monotonically with `d_desired`.
pub fn draw_interferer_distances(d_desired: f64, d_max: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    if !(d_desired <= d_max) {
        return Err(Error::InvertedRange { lo: d_desired, hi: d_max });
    }
    let mut r = rng::rng(seed);
    Ok((0..count).map(|_| d_desired + rng::uniform(&mut r) * (d_max - d_desired)).collect())
}
