//! Pilot training and MMSE channel estimation under pilot contamination.
//!
//! Training runs on the reverse link: the receiving aircraft sends an
//! `N_r`-symbol unitary pilot and the transmitter observes the uplink
//! channel `Hᴴ` (N_t x N_r). Every interferer reuses the same pilot. All
//! links share the transmit correlation `R`, so the estimator acts on each
//! uplink column with one N_t x N_t filter that is diagonal in the
//! eigenbasis of `R`.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use rand_core::RngCore;

use crate::channel::{ChannelRealization, ChannelStats};
use crate::error::{Error, Result};
use crate::{linalg, rng, CMat, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    /// Received pilots, N_t x N_r.
    pub y: CMat,
    /// Unitary N_r x N_r pilot matrix.
    pub pilot: CMat,
}

/// Normalized DFT matrix of size `n`, a convenient unitary pilot.
pub fn dft_pilot(n: usize) -> CMat {
    let scale = 1.0 / libm::sqrt(n as f64);
    DMatrix::from_fn(n, n, |i, j| {
        let ang = -2.0 * core::f64::consts::PI * (i * j) as f64 / n as f64;
        C64::from_polar(scale, ang)
    })
}

fn check_unitary(p: &CMat) -> Result<()> {
    if !p.is_square() {
        return Err(Error::Dimension("pilot must be square"));
    }
    let dev = linalg::max_abs_diff(&(p * p.adjoint()), &linalg::identity(p.nrows()));
    if dev > 1e-12 {
        return Err(Error::Domain { name: "pilot unitarity", value: dev });
    }
    Ok(())
}

/// `y = sum_l sqrt(P_l) H_lᴴ X + W` with `W` i.i.d. CN(0, noise_w).
pub fn pilot_observation(
    channels: &[ChannelRealization],
    powers_w: &[f64],
    noise_w: f64,
    pilot: &CMat,
    seed: u64,
) -> Result<PilotObservation> {
    pilot_observation_with(channels, powers_w, noise_w, pilot, &mut rng::rng(seed))
}

pub fn pilot_observation_with<R: RngCore>(
    channels: &[ChannelRealization],
    powers_w: &[f64],
    noise_w: f64,
    pilot: &CMat,
    rng: &mut R,
) -> Result<PilotObservation> {
    let first = channels.first().ok_or(Error::Empty("channels"))?;
    if channels.len() != powers_w.len() {
        return Err(Error::Dimension("one power per channel"));
    }
    let (n_rx, n_tx) = first.h.shape();
    if channels.iter().any(|c| c.h.shape() != (n_rx, n_tx)) {
        return Err(Error::Dimension("channels must share dimensions"));
    }
    if pilot.nrows() != n_rx {
        return Err(Error::Dimension("pilot must be n_rx x n_rx"));
    }
    check_unitary(pilot)?;
    if powers_w.iter().any(|&p| !(p >= 0.0)) || !(noise_w >= 0.0) {
        return Err(Error::Domain { name: "power", value: f64::NAN });
    }
    let mut uplink = CMat::zeros(n_tx, n_rx);
    for (c, &p) in channels.iter().zip(powers_w) {
        uplink += c.h.adjoint() * C64::new(libm::sqrt(p), 0.0);
    }
    let noise = rng::complex_normal_matrix(rng, n_tx, n_rx) * C64::new(libm::sqrt(noise_w), 0.0);
    Ok(PilotObservation { y: uplink * pilot + noise, pilot: pilot.clone() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// Downlink estimate, N_r x N_t.
    pub h_hat: CMat,
    /// `H - Ĥ`, known only in simulation.
    pub h_err: Option<CMat>,
}

impl ChannelEstimate {
    pub fn with_truth(mut self, h: &CMat) -> Self {
        self.h_err = Some(h - &self.h_hat);
        self
    }
}

/// MMSE estimator of one link's channel from contaminated pilots.
#[derive(Debug, Clone)]
pub struct MmseEstimator {
    sqrt_p: f64,
    /// Mean of the desired uplink channel, `nu H_dᴴ`.
    los_up: CMat,
    /// Mean of the whole normalized observation, interferer LOS included.
    obs_mean: CMat,
    filter: CMat,
    phi_tx: CMat,
    degenerate: bool,
}

impl MmseEstimator {
    /// `interferers` are the links whose pilots contaminate the training of
    /// `desired`; only their received power and LOS enter.
    pub fn new(desired: &ChannelStats, interferers: &[ChannelStats], noise_w: f64) -> Result<Self> {
        let (n_rx, n_tx) = desired.h_los.shape();
        for i in interferers {
            if i.h_los.shape() != (n_rx, n_tx) {
                return Err(Error::Dimension("interferer shape differs from desired link"));
            }
            if linalg::max_abs_diff(&i.r_tx, &desired.r_tx) > 1e-12 || i.sigma_s != desired.sigma_s {
                return Err(Error::CorrelationMismatch);
            }
        }
        if !(noise_w >= 0.0) {
            return Err(Error::Domain { name: "noise_w", value: noise_w });
        }
        let p = desired.rx_power_w;
        let los_up = desired.mean().adjoint();
        let mut obs_mean = los_up.clone();
        let mut load = 1.0;
        for i in interferers {
            let beta = i.rx_power_w / p;
            load += beta;
            obs_mean += i.mean().adjoint() * C64::new(libm::sqrt(beta), 0.0);
        }
        let s2 = desired.sigma_s * desired.sigma_s;
        if s2 == 0.0 {
            return Ok(Self {
                sqrt_p: libm::sqrt(p),
                los_up,
                obs_mean,
                filter: CMat::zeros(n_tx, n_tx),
                phi_tx: CMat::zeros(n_tx, n_tx),
                degenerate: true,
            });
        }
        let (lam, u) = linalg::eigh(&desired.r_tx);
        let floor = noise_w / p;
        let gain = |l: f64, num: f64| {
            let den = floor + load * s2 * l.max(0.0);
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        };
        let w: Vec<f64> = lam.iter().map(|&l| gain(l, s2 * l.max(0.0))).collect();
        let phi: Vec<f64> = lam.iter().map(|&l| gain(l, (s2 * l.max(0.0)) * (s2 * l.max(0.0)))).collect();
        Ok(Self {
            sqrt_p: libm::sqrt(p),
            los_up,
            obs_mean,
            filter: linalg::from_eig(&u, &w),
            phi_tx: linalg::hermitian_part(&linalg::from_eig(&u, &phi)),
            degenerate: false,
        })
    }

    pub fn estimate(&self, obs: &PilotObservation) -> ChannelEstimate {
        if self.degenerate {
            return ChannelEstimate { h_hat: self.los_up.adjoint(), h_err: None };
        }
        let z = &obs.y * obs.pilot.adjoint() * C64::new(1.0 / self.sqrt_p, 0.0);
        let up = &self.los_up + &self.filter * (z - &self.obs_mean);
        ChannelEstimate { h_hat: up.adjoint(), h_err: None }
    }

    /// Per-column covariance of the estimate around its mean.
    pub fn phi_tx(&self) -> &CMat {
        &self.phi_tx
    }

    pub fn filter(&self) -> &CMat {
        &self.filter
    }
}

pub fn mmse_estimate(obs: &PilotObservation, estimator: &MmseEstimator) -> ChannelEstimate {
    estimator.estimate(obs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationStats {
    pub phi_tx: CMat,
    pub phi_rx: CMat,
    /// One N_t x N_t error covariance block per receive antenna.
    pub xi_blocks: Vec<CMat>,
    /// `m_blocks[i * n_rx + j] = H_d[i,:]ᴴ H_d[j,:]`.
    pub m_blocks: Vec<CMat>,
    pub theta_blocks: Vec<CMat>,
    pub omega_blocks: Vec<CMat>,
    pub n_rx: usize,
}

impl EstimationStats {
    pub fn from_estimator(desired: &ChannelStats, est: &MmseEstimator) -> Self {
        let n_rx = desired.n_rx();
        let nu2 = C64::new(desired.nu * desired.nu, 0.0);
        let s2 = C64::new(desired.sigma_s * desired.sigma_s, 0.0);
        let phi = est.phi_tx().clone();
        let xi = &desired.r_tx * s2 - &phi;
        let mut m_blocks = Vec::with_capacity(n_rx * n_rx);
        for i in 0..n_rx {
            for j in 0..n_rx {
                m_blocks.push(linalg::row_cross(&desired.h_los, i, j));
            }
        }
        let theta_blocks = (0..n_rx).map(|n| &m_blocks[n * n_rx + n] * nu2 + &phi).collect();
        let omega_blocks = (0..n_rx).map(|n| &m_blocks[n * n_rx + n] * nu2 + &desired.r_tx * s2).collect();
        Self {
            phi_rx: linalg::identity(n_rx),
            xi_blocks: (0..n_rx).map(|_| xi.clone()).collect(),
            phi_tx: phi,
            m_blocks,
            theta_blocks,
            omega_blocks,
            n_rx,
        }
    }

    pub fn m_block(&self, i: usize, j: usize) -> &CMat {
        &self.m_blocks[i * self.n_rx + j]
    }

    pub fn n_tx(&self) -> usize {
        self.phi_tx.nrows()
    }
}

pub fn estimation_stats(desired: &ChannelStats, interferers: &[ChannelStats], noise_w: f64) -> Result<EstimationStats> {
    let est = MmseEstimator::new(desired, interferers, noise_w)?;
    Ok(EstimationStats::from_estimator(desired, &est))
}
