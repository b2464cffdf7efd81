//! `key = value` scenario configuration.

use std::fmt::Write as _;

use aerolink_core::channel::{AntennaConfig, NoiseModel};
use aerolink_core::detequiv::RateMode;
use aerolink_core::montecarlo::{TrialConfig, XiPolicy};
use aerolink_core::precoding::PrecoderKind;
use aerolink_core::scenario::Scenario;

use crate::output::fmt_float;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: `{key}`: {message}")]
    Line { line: usize, key: String, message: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_interferers: usize,
    pub n_rx: usize,
    pub n_tx: usize,
    /// Per transmit antenna.
    pub tx_power_w: f64,
    pub n_subcarriers: usize,
    pub n_cp: usize,
    pub k_rice: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub rho: f64,
    pub noise_figure_db: f64,
    pub distance_km: f64,
    pub d_min_km: f64,
    pub d_max_km: f64,
    pub master_seed: u64,
    pub trials: usize,
    pub precoder: PrecoderKind,
    pub xi: XiPolicy,
    pub mode: RateMode,
    /// Interferer placements averaged per grid point.
    pub placements: usize,
    /// Cruising speed of each aircraft for the data-volume profile.
    pub speed_kmh: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_interferers: 4,
            n_rx: 4,
            n_tx: 32,
            tx_power_w: 1.0,
            n_subcarriers: 512,
            n_cp: 32,
            k_rice: 5.0,
            bandwidth_hz: 6e6,
            carrier_hz: 5e9,
            rho: 0.1,
            noise_figure_db: 4.0,
            distance_km: 10.0,
            d_min_km: 5.56,
            d_max_km: 740.0,
            master_seed: 1,
            trials: 500,
            precoder: PrecoderKind::Rzf,
            xi: XiPolicy::Optimal,
            mode: RateMode::Theoretical,
            placements: 8,
            speed_kmh: 920.0,
        }
    }
}

pub const KEYS: [&str; 21] = [
    "num_interferers",
    "n_rx",
    "n_tx",
    "tx_power_w",
    "n_subcarriers",
    "n_cp",
    "k_rice",
    "bandwidth_hz",
    "carrier_hz",
    "rho",
    "noise_figure_db",
    "distance_km",
    "d_min_km",
    "d_max_km",
    "master_seed",
    "trials",
    "precoder",
    "xi",
    "mode",
    "placements",
    "speed_kmh",
];

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("malformed value `{v}`"))
}

fn finite(v: &str) -> Result<f64, String> {
    let x: f64 = num(v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("value `{v}` is not finite"))
    }
}

impl ScenarioConfig {
    /// Assigns one key from its textual value without cross-field checks.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "num_interferers" => self.num_interferers = num(v)?,
            "n_rx" => self.n_rx = num(v)?,
            "n_tx" => self.n_tx = num(v)?,
            "tx_power_w" => self.tx_power_w = finite(v)?,
            "n_subcarriers" => self.n_subcarriers = num(v)?,
            "n_cp" => self.n_cp = num(v)?,
            "k_rice" => self.k_rice = num(v)?,
            "bandwidth_hz" => self.bandwidth_hz = finite(v)?,
            "carrier_hz" => self.carrier_hz = finite(v)?,
            "rho" => self.rho = finite(v)?,
            "noise_figure_db" => self.noise_figure_db = finite(v)?,
            "distance_km" => self.distance_km = finite(v)?,
            "d_min_km" => self.d_min_km = finite(v)?,
            "d_max_km" => self.d_max_km = finite(v)?,
            "master_seed" => self.master_seed = num(v)?,
            "trials" => self.trials = num(v)?,
            "placements" => self.placements = num(v)?,
            "speed_kmh" => self.speed_kmh = finite(v)?,
            "precoder" => {
                self.precoder = match v {
                    "rzf" => PrecoderKind::Rzf,
                    "eb" => PrecoderKind::Eb,
                    _ => return Err(format!("expected `rzf` or `eb`, got `{v}`")),
                }
            }
            "xi" => {
                self.xi = match v {
                    "optimal" => XiPolicy::Optimal,
                    _ => XiPolicy::Fixed(finite(v).map_err(|_| format!("expected `optimal` or a number, got `{v}`"))?),
                }
            }
            "mode" => {
                self.mode = match v {
                    "theoretical" => RateMode::Theoretical,
                    "approximate" => RateMode::Approximate,
                    _ => return Err(format!("expected `theoretical` or `approximate`, got `{v}`")),
                }
            }
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// First violated invariant as `(key, message)`.
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        let fail = |k: &'static str, m: &str| Err((k, m.to_string()));
        if self.n_tx == 0 {
            return fail("n_tx", "must be at least 1");
        }
        if self.n_rx == 0 {
            return fail("n_rx", "must be at least 1");
        }
        if self.n_rx > self.n_tx {
            return fail("n_rx", "must not exceed n_tx");
        }
        if !(self.tx_power_w > 0.0) {
            return fail("tx_power_w", "must be positive");
        }
        if self.n_subcarriers == 0 {
            return fail("n_subcarriers", "must be at least 1");
        }
        if !(self.k_rice >= 0.0) || self.k_rice.is_nan() {
            return fail("k_rice", "must be non-negative");
        }
        if !(self.bandwidth_hz > 0.0) {
            return fail("bandwidth_hz", "must be positive");
        }
        if !(self.carrier_hz > 0.0) {
            return fail("carrier_hz", "must be positive");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return fail("rho", "must lie in [0, 1)");
        }
        if !(self.noise_figure_db >= 0.0) {
            return fail("noise_figure_db", "must be non-negative");
        }
        if !(self.d_min_km > 0.0) {
            return fail("d_min_km", "must be positive");
        }
        if !(self.d_max_km > self.d_min_km) {
            return fail("d_max_km", "must exceed d_min_km");
        }
        if !(self.distance_km >= self.d_min_km && self.distance_km <= self.d_max_km) {
            return fail("distance_km", "must lie in [d_min_km, d_max_km]");
        }
        if self.trials == 0 {
            return fail("trials", "must be at least 1");
        }
        if self.placements == 0 {
            return fail("placements", "must be at least 1");
        }
        if !(self.speed_kmh > 0.0) {
            return fail("speed_kmh", "must be positive");
        }
        if let XiPolicy::Fixed(x) = self.xi {
            if !(x > 0.0) {
                return fail("xi", "must be positive");
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.check().map_err(|(key, message)| ConfigError::Invalid { key: key.into(), message })
    }

    pub fn value_of(&self, key: &str) -> Option<String> {
        Some(match key {
            "num_interferers" => self.num_interferers.to_string(),
            "n_rx" => self.n_rx.to_string(),
            "n_tx" => self.n_tx.to_string(),
            "tx_power_w" => fmt_float(self.tx_power_w),
            "n_subcarriers" => self.n_subcarriers.to_string(),
            "n_cp" => self.n_cp.to_string(),
            "k_rice" => fmt_float(self.k_rice),
            "bandwidth_hz" => fmt_float(self.bandwidth_hz),
            "carrier_hz" => fmt_float(self.carrier_hz),
            "rho" => fmt_float(self.rho),
            "noise_figure_db" => fmt_float(self.noise_figure_db),
            "distance_km" => fmt_float(self.distance_km),
            "d_min_km" => fmt_float(self.d_min_km),
            "d_max_km" => fmt_float(self.d_max_km),
            "master_seed" => self.master_seed.to_string(),
            "trials" => self.trials.to_string(),
            "placements" => self.placements.to_string(),
            "speed_kmh" => fmt_float(self.speed_kmh),
            "precoder" => match self.precoder {
                PrecoderKind::Rzf => "rzf".into(),
                PrecoderKind::Eb => "eb".into(),
            },
            "xi" => match self.xi {
                XiPolicy::Optimal => "optimal".into(),
                XiPolicy::Fixed(x) => fmt_float(x),
            },
            "mode" => match self.mode {
                RateMode::Theoretical => "theoretical".into(),
                RateMode::Approximate => "approximate".into(),
            },
            _ => return None,
        })
    }

    /// Every key in canonical order; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{k} = {}", self.value_of(k).expect("known key"));
        }
        s
    }

    pub fn antennas(&self) -> aerolink_core::Result<AntennaConfig> {
        AntennaConfig::new(self.n_tx, self.n_rx, self.rho)
    }

    /// Scenario at `distance_km` with interferers at the given distances.
    pub fn scenario(&self, distance_km: f64, interferers_km: &[f64]) -> aerolink_core::Result<Scenario> {
        Ok(Scenario {
            antennas: self.antennas()?,
            k_rice: self.k_rice,
            carrier_hz: self.carrier_hz,
            tx_power_w: self.tx_power_w,
            noise: NoiseModel { noise_figure_db: self.noise_figure_db, bandwidth_hz: self.bandwidth_hz },
            distance_m: distance_km * 1e3,
            interferer_distances_m: interferers_km.iter().map(|d| d * 1e3).collect(),
        })
    }

    pub fn trial_config(&self, precoder: PrecoderKind, seed: u64) -> TrialConfig {
        TrialConfig { trials: self.trials, master_seed: seed, precoder, xi: self.xi }
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut lines_of = std::collections::HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if lines_of.insert(key.to_string(), line).is_some() {
            return Err(ConfigError::Line { line, key: key.into(), message: "duplicate key".into() });
        }
        cfg.set(key, value).map_err(|message| ConfigError::Line { line, key: key.into(), message })?;
    }
    cfg.check().map_err(|(key, message)| match lines_of.get(key) {
        Some(&line) => ConfigError::Line { line, key: key.into(), message },
        None => ConfigError::Invalid { key: key.into(), message },
    })?;
    Ok(cfg)
}
