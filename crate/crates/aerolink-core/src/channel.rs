//! Link budget, spatial correlation, LOS geometry and Rician channel draws.

use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::DMatrix;
use rand_core::RngCore;

use crate::error::{positive, Error, Result};
use crate::{linalg, rng, CMat, C64};

pub const BOLTZMANN: f64 = 1.380649e-23;
pub const REFERENCE_TEMPERATURE_K: f64 = 290.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub rho: f64,
    pub t_phase: C64,
}

impl AntennaConfig {
    /// Real correlation phase `t = 1`.
    pub fn new(n_tx: usize, n_rx: usize, rho: f64) -> Result<Self> {
        Self::with_phase(n_tx, n_rx, rho, C64::new(1.0, 0.0))
    }

    pub fn with_phase(n_tx: usize, n_rx: usize, rho: f64, t_phase: C64) -> Result<Self> {
        if n_tx == 0 {
            return Err(Error::Domain { name: "n_tx", value: 0.0 });
        }
        // Square arrays are allowed so that scalar links can be expressed.
        if n_rx == 0 || n_rx > n_tx {
            return Err(Error::Domain { name: "n_rx", value: n_rx as f64 });
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Domain { name: "rho", value: rho });
        }
        if (t_phase.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain { name: "t_phase", value: t_phase.norm() });
        }
        Ok(Self { n_tx, n_rx, rho, t_phase })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub carrier_hz: f64,
    pub distance_m: f64,
    pub tx_power_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
}

impl NoiseModel {
    pub fn noise_power_w(&self) -> Result<f64> {
        noise_power(self)
    }
}

pub fn path_loss_db(g: &LinkGeometry) -> Result<f64> {
    let f = positive("carrier_hz", g.carrier_hz)?;
    let d = positive("distance_m", g.distance_m)?;
    Ok(-154.06 + 20.0 * libm::log10(f) + 20.0 * libm::log10(d))
}

pub fn received_power(g: &LinkGeometry) -> Result<f64> {
    let pt = positive("tx_power_w", g.tx_power_w)?;
    Ok(pt * libm::pow(10.0, -0.1 * path_loss_db(g)?))
}

/// Thermal noise over the whole bandwidth at the reference temperature.
pub fn noise_power(m: &NoiseModel) -> Result<f64> {
    if !(m.noise_figure_db >= 0.0 && m.noise_figure_db.is_finite()) {
        return Err(Error::Domain { name: "noise_figure_db", value: m.noise_figure_db });
    }
    let b = positive("bandwidth_hz", m.bandwidth_hz)?;
    Ok(BOLTZMANN * REFERENCE_TEMPERATURE_K * b * libm::pow(10.0, m.noise_figure_db / 10.0))
}

/// Exponential transmit correlation: entry `(m, n)` is `(t rho)^(m-n)`
/// below the diagonal and the conjugate above it.
pub fn correlation_matrix(c: &AntennaConfig) -> Result<CMat> {
    if !(0.0..1.0).contains(&c.rho) {
        return Err(Error::Domain { name: "rho", value: c.rho });
    }
    let base = c.t_phase * c.rho;
    let mut powers = Vec::with_capacity(c.n_tx);
    let mut p = C64::new(1.0, 0.0);
    for _ in 0..c.n_tx {
        powers.push(p);
        p *= base;
    }
    Ok(DMatrix::from_fn(c.n_tx, c.n_tx, |m, n| if m >= n { powers[m - n] } else { powers[n - m].conj() }))
}

/// Node identifiers of a directed link; the LOS bearing is a hash of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkEnds {
    pub tx: u32,
    pub rx: u32,
}

impl LinkEnds {
    pub const fn new(tx: u32, rx: u32) -> Self {
        Self { tx, rx }
    }

    fn bearing(self, salt: u64) -> f64 {
        let key = ((self.tx as u64) << 32) | self.rx as u64;
        let h = rng::splitmix(rng::splitmix(key) ^ salt.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * PI
    }
}

/// Half-wavelength ULA response `exp(j pi k cos(theta))`, k = 0..n.
fn steering(n: usize, theta: f64) -> Vec<C64> {
    let phase = PI * libm::cos(theta);
    (0..n).map(|k| C64::from_polar(1.0, phase * k as f64)).collect()
}

/// Rank-one LOS matrix `a_r a_tᵀ` (N_r x N_t). Both steering vectors have
/// unit-modulus entries, so `Tr(H_d H_dᴴ) = N_t N_r` holds by construction.
pub fn los_component(c: &AntennaConfig, ends: LinkEnds) -> CMat {
    let at = steering(c.n_tx, ends.bearing(0));
    let ar = steering(c.n_rx, ends.bearing(1));
    DMatrix::from_fn(c.n_rx, c.n_tx, |i, j| ar[i] * at[j])
}

/// `(nu, sigma)` with `nu² + sigma² = 1`.
pub fn rician_weights(k_rice: f64) -> Result<(f64, f64)> {
    if k_rice.is_nan() || k_rice < 0.0 {
        return Err(Error::Domain { name: "k_rice", value: k_rice });
    }
    if k_rice.is_infinite() {
        return Ok((1.0, 0.0));
    }
    Ok((libm::sqrt(k_rice / (k_rice + 1.0)), libm::sqrt(1.0 / (k_rice + 1.0))))
}

/// PSD square root through the eigendecomposition, clamping negative
/// round-off eigenvalues at zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, u) = linalg::eigh(m);
    let roots: Vec<f64> = vals.iter().map(|&l| libm::sqrt(l.max(0.0))).collect();
    linalg::from_eig(&u, &roots)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub k_rice: f64,
    pub nu: f64,
    pub sigma_s: f64,
    pub h_los: CMat,
    pub r_tx: CMat,
    pub r_rx: CMat,
    pub rx_power_w: f64,
    r_tx_sqrt: CMat,
}

impl ChannelStats {
    pub fn new(config: &AntennaConfig, k_rice: f64, h_los: CMat, rx_power_w: f64) -> Result<Self> {
        if h_los.shape() != (config.n_rx, config.n_tx) {
            return Err(Error::Dimension("LOS matrix must be n_rx x n_tx"));
        }
        let (nu, sigma_s) = rician_weights(k_rice)?;
        let r_tx = correlation_matrix(config)?;
        let r_tx_sqrt = psd_sqrt(&r_tx);
        Ok(Self {
            k_rice,
            nu,
            sigma_s,
            h_los,
            r_tx,
            r_rx: linalg::identity(config.n_rx),
            rx_power_w: positive("rx_power_w", rx_power_w)?,
            r_tx_sqrt,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.h_los.ncols()
    }

    pub fn n_rx(&self) -> usize {
        self.h_los.nrows()
    }

    pub fn r_tx_sqrt(&self) -> &CMat {
        &self.r_tx_sqrt
    }

    /// Mean of the channel, `nu H_d`.
    pub fn mean(&self) -> CMat {
        &self.h_los * C64::new(self.nu, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMat,
    pub h_scatter: CMat,
    pub seed_tag: u64,
}

pub fn draw_rician(stats: &ChannelStats, seed: u64) -> ChannelRealization {
    draw_rician_with(stats, &mut rng::rng(seed), seed)
}

/// Draw from a caller-owned generator; `seed_tag` is recorded verbatim.
pub fn draw_rician_with<R: RngCore>(stats: &ChannelStats, rng: &mut R, seed_tag: u64) -> ChannelRealization {
    let g = rng::complex_normal_matrix(rng, stats.n_rx(), stats.n_tx());
    // The receive correlation is the identity, so only the transmit side
    // needs a square root.
    let h_scatter = g * &stats.r_tx_sqrt;
    let h = stats.mean() + &h_scatter * C64::new(stats.sigma_s, 0.0);
    ChannelRealization { h, h_scatter, seed_tag }
}
