//! Sweeps, ACM design and MSE curves averaged over interferer placements.
//!
//! Placement `i` draws its interferer distances from a seed that depends on
//! the master seed and `i` only, and its Monte-Carlo trials from another.
//! The same placements are therefore reused at every grid point, which
//! keeps sweeps smooth and makes `num_interferers` sweeps nested.

use std::fmt;
use std::str::FromStr;

use aerolink_core::acm::{
    self, design_thresholds, mode_rates, volume_profile, AcmTable, DesignInputs, ThresholdDesign, VolumeProfile,
};
use aerolink_core::detequiv::RateMode;
use aerolink_core::montecarlo::{draw_interferer_distances, mse_curve, simulate_link, TrialRunner};
use aerolink_core::precoding::PrecoderKind;
use aerolink_core::rng::mix;
use aerolink_core::scenario::PreparedScenario;
use anyhow::{bail, Context, Result};

use crate::config::ScenarioConfig;
use crate::output::Table;

const PLACEMENT_STREAM: u64 = 0x706c_6163_656d_656e;

pub fn interferer_distances_km(cfg: &ScenarioConfig, distance_km: f64, placement: usize) -> Result<Vec<f64>> {
    let seed = mix(mix(cfg.master_seed, PLACEMENT_STREAM), placement as u64);
    Ok(draw_interferer_distances(distance_km, cfg.d_max_km, cfg.num_interferers, seed)?)
}

/// Seed of the Monte-Carlo trials of one placement.
pub fn trial_seed(cfg: &ScenarioConfig, placement: usize) -> u64 {
    mix(cfg.master_seed, placement as u64)
}

pub fn prepare(cfg: &ScenarioConfig, distance_km: f64, placement: usize) -> Result<PreparedScenario> {
    let d = interferer_distances_km(cfg, distance_km, placement)?;
    Ok(cfg.scenario(distance_km, &d)?.prepare()?)
}

fn average(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Placement-averaged closed-form mean rate per receive antenna.
pub fn closed_form_rate<R: TrialRunner>(
    cfg: &ScenarioConfig,
    distance_km: f64,
    mode: RateMode,
    runner: &R,
) -> Result<f64> {
    let rates = runner.run(cfg.placements, |i| -> Result<f64> {
        Ok(prepare(cfg, distance_km, i)?.closed_form_rate(mode)?.mean_bps_hz)
    });
    Ok(average(&rates.into_iter().collect::<Result<Vec<_>>>()?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: f64,
}

/// Placement-averaged Monte-Carlo mean rate per receive antenna.
pub fn simulated_rate<R: TrialRunner>(
    cfg: &ScenarioConfig,
    distance_km: f64,
    precoder: PrecoderKind,
    runner: &R,
) -> Result<Estimate> {
    let mut means = Vec::with_capacity(cfg.placements);
    let mut var = 0.0;
    for i in 0..cfg.placements {
        let prep = prepare(cfg, distance_km, i)?;
        let rep = simulate_link(&prep, &cfg.trial_config(precoder, trial_seed(cfg, i)), runner)?;
        means.push(rep.mean_rate);
        var += rep.standard_errors.mean_rate * rep.standard_errors.mean_rate;
    }
    let p = cfg.placements as f64;
    Ok(Estimate { mean: average(&means), standard_error: var.sqrt() / p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    Distance,
    NTx,
    NRx,
    NumInterferers,
    Rho,
    KRice,
}

impl SweepKey {
    pub const ALL: [SweepKey; 6] =
        [SweepKey::Distance, SweepKey::NTx, SweepKey::NRx, SweepKey::NumInterferers, SweepKey::Rho, SweepKey::KRice];

    pub fn name(self) -> &'static str {
        match self {
            SweepKey::Distance => "distance",
            SweepKey::NTx => "n_tx",
            SweepKey::NRx => "n_rx",
            SweepKey::NumInterferers => "num_interferers",
            SweepKey::Rho => "rho",
            SweepKey::KRice => "k_rice",
        }
    }

    fn config_key(self) -> &'static str {
        match self {
            SweepKey::Distance => "distance_km",
            k => k.name(),
        }
    }

    /// Copy of `cfg` with this key set to `value`.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = cfg.clone();
        let text = match self {
            SweepKey::NTx | SweepKey::NRx | SweepKey::NumInterferers => {
                if value < 0.0 || value.fract() != 0.0 {
                    bail!("{}: expected a non-negative integer, got {value}", self.name());
                }
                format!("{}", value as u64)
            }
            _ => format!("{value:?}"),
        };
        c.set(self.config_key(), &text).map_err(|m| anyhow::anyhow!("{}: {m}", self.name()))?;
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepKey {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let valid: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            anyhow::anyhow!("unknown sweep key `{s}`; valid keys: {}", valid.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub n_rx: usize,
    pub xi_star: f64,
    pub theoretical: f64,
    pub approximate: f64,
    pub mc_rzf: Estimate,
    pub mc_eb: Estimate,
}

pub fn evaluate<R: TrialRunner>(cfg: &ScenarioConfig, value: f64, runner: &R) -> Result<SweepRow> {
    let d = cfg.distance_km;
    let xi = runner.run(cfg.placements, |i| -> Result<f64> { Ok(prepare(cfg, d, i)?.xi_star()) });
    Ok(SweepRow {
        value,
        n_rx: cfg.n_rx,
        xi_star: average(&xi.into_iter().collect::<Result<Vec<_>>>()?),
        theoretical: closed_form_rate(cfg, d, RateMode::Theoretical, runner)?,
        approximate: closed_form_rate(cfg, d, RateMode::Approximate, runner)?,
        mc_rzf: simulated_rate(cfg, d, PrecoderKind::Rzf, runner)?,
        mc_eb: simulated_rate(cfg, d, PrecoderKind::Eb, runner)?,
    })
}

pub fn run_sweep<R: TrialRunner>(
    cfg: &ScenarioConfig,
    key: SweepKey,
    grid: &[f64],
    runner: &R,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        bail!("sweep grid is empty");
    }
    grid.iter()
        .map(|&v| {
            let c = key.apply(cfg, v)?;
            evaluate(&c, v, runner).with_context(|| format!("{key} = {v}"))
        })
        .collect()
}

pub fn sweep_table(key: SweepKey, rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&[
        key.name(),
        "n_rx",
        "xi_star",
        "theoretical_bps_hz",
        "approximate_bps_hz",
        "mc_rzf_bps_hz",
        "mc_rzf_se",
        "mc_eb_bps_hz",
        "mc_eb_se",
    ]);
    for r in rows {
        t.push(vec![
            r.value.into(),
            r.n_rx.into(),
            r.xi_star.into(),
            r.theoretical.into(),
            r.approximate.into(),
            r.mc_rzf.mean.into(),
            r.mc_rzf.standard_error.into(),
            r.mc_eb.mean.into(),
            r.mc_eb.standard_error.into(),
        ]);
    }
    t
}

/// (modulation order, code rate) pairs of the reference design matching
/// `n_tx` (64 antennas use the larger-array menu).
pub fn reference_menu(n_tx: usize) -> Vec<(u32, f64)> {
    if n_tx >= 64 {
        acm::REFERENCE_64X4.iter().map(|&(m, r, _)| (m, r)).collect()
    } else {
        acm::REFERENCE_32X4.iter().map(|&(m, r, _)| (m, r)).collect()
    }
}

pub struct AcmDesign {
    pub design: ThresholdDesign,
    pub profile: VolumeProfile,
}

pub fn run_acm_design<R: TrialRunner>(cfg: &ScenarioConfig, menu: &[(u32, f64)], runner: &R) -> Result<AcmDesign> {
    let inputs = DesignInputs {
        d_min_km: cfg.d_min_km,
        d_max_km: cfg.d_max_km,
        n_subcarriers: cfg.n_subcarriers,
        n_cp: cfg.n_cp,
        bandwidth_hz: cfg.bandwidth_hz,
        n_rx: cfg.n_rx,
    };
    let mut failure = None;
    let design = design_thresholds(
        |d| match closed_form_rate(cfg, d, cfg.mode, runner) {
            Ok(r) => r,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        menu,
        &inputs,
    );
    if let Some(e) = failure {
        return Err(e.context("evaluating the rate curve"));
    }
    let design = design?;
    let profile = volume_profile(&design.table, cfg.speed_kmh, 1.0)?;
    Ok(AcmDesign { design, profile })
}

pub fn mode_table(table: &AcmTable) -> Table {
    let mut t =
        Table::new(&["k", "modulation", "code_rate", "se", "threshold_km", "rate_pdra_mbps", "rate_total_mbps"]);
    for (i, m) in table.modes.iter().enumerate() {
        let (per, total) = mode_rates(m, table);
        t.push(vec![
            (i + 1).into(),
            m.modulation_order.into(),
            m.code_rate.into(),
            m.se_bps_hz.into(),
            m.threshold_km.into(),
            (per / 1e6).into(),
            (total / 1e6).into(),
        ]);
    }
    t
}

pub fn volume_table(p: &VolumeProfile) -> Table {
    let mut t = Table::new(&["distance_km", "volume_bytes", "volume_gb"]);
    for &(d, bytes) in &p.samples {
        t.push(vec![d.into(), bytes.into(), (bytes / 1e9).into()]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsePoint {
    /// Multiple of each placement's optimal regularizer.
    pub factor: f64,
    pub mean_xi: f64,
    pub mse: f64,
}

pub const MSE_FACTORS: [f64; 7] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

pub fn run_mse_curve<R: TrialRunner>(cfg: &ScenarioConfig, factors: &[f64], runner: &R) -> Result<Vec<MsePoint>> {
    if factors.is_empty() {
        bail!("regularizer grid is empty");
    }
    let mut acc = vec![(0.0, 0.0); factors.len()];
    for i in 0..cfg.placements {
        let prep = prepare(cfg, cfg.distance_km, i)?;
        let grid: Vec<f64> = factors.iter().map(|f| f * prep.xi_star()).collect();
        let curve = mse_curve(&prep, &grid, &cfg.trial_config(PrecoderKind::Rzf, trial_seed(cfg, i)), runner)?;
        for (a, (xi, j)) in acc.iter_mut().zip(curve) {
            a.0 += xi;
            a.1 += j;
        }
    }
    let p = cfg.placements as f64;
    Ok(factors.iter().zip(acc).map(|(&factor, (xi, j))| MsePoint { factor, mean_xi: xi / p, mse: j / p }).collect())
}

pub fn mse_table(points: &[MsePoint]) -> Table {
    let mut t = Table::new(&["xi_factor", "mean_xi", "mse"]);
    for p in points {
        t.push(vec![p.factor.into(), p.mean_xi.into(), p.mse.into()]);
    }
    t
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let grid = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("malformed grid value `{}`", s.trim())))
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        bail!("grid is empty");
    }
    Ok(grid)
}
