//! Assembly of a desired link and its co-channel interferers.
//!
//! Node numbering: the desired transmitter is 0 and its receiver 1;
//! interferer `a` transmits from `2 + 2a` to its own receiver `3 + 2a`.
//! Interferer `a` sits at distance `d_a` from the desired pair, which sets
//! both its data power at node 1 and the power of the pilot it leaks into
//! the training of node 0. Every interferer runs the same scheme as the
//! desired pair over the desired pair's distance, so its own estimation
//! statistics match the desired link's.

use alloc::vec::Vec;

use crate::channel::{los_component, received_power, AntennaConfig, ChannelStats, LinkEnds, LinkGeometry, NoiseModel};
use crate::detequiv::{
    closed_form_rate, closed_form_sinr, InterfererView, LinkSystem, LinkView, RateMode, RateReport, SinrBreakdown,
};
use crate::error::{positive, Result};
use crate::estimation::{EstimationStats, MmseEstimator};
use crate::precoding::optimal_xi;
use crate::{linalg, CMat, C64};

pub const DESIRED_TX: u32 = 0;
pub const DESIRED_RX: u32 = 1;

pub fn interferer_tx(a: usize) -> u32 {
    2 + 2 * a as u32
}

pub fn interferer_rx(a: usize) -> u32 {
    3 + 2 * a as u32
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub antennas: AntennaConfig,
    pub k_rice: f64,
    pub carrier_hz: f64,
    pub tx_power_w: f64,
    pub noise: NoiseModel,
    pub distance_m: f64,
    pub interferer_distances_m: Vec<f64>,
}

/// One link with its training model and closed-form statistics.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub channel: ChannelStats,
    /// Links whose pilots reach this link's transmitter during training.
    pub contaminators: Vec<ChannelStats>,
    pub estimator: MmseEstimator,
    pub stats: EstimationStats,
    pub xi_star: f64,
    pub system: LinkSystem,
}

impl LinkModel {
    fn new(channel: ChannelStats, contaminators: Vec<ChannelStats>, noise_w: f64) -> Result<Self> {
        let estimator = MmseEstimator::new(&channel, &contaminators, noise_w)?;
        let stats = EstimationStats::from_estimator(&channel, &estimator);
        let system = LinkSystem::new(&channel, &stats)?;
        Ok(Self { xi_star: optimal_xi(&stats), channel, contaminators, estimator, stats, system })
    }

    pub fn contaminator_powers(&self) -> Vec<f64> {
        self.contaminators.iter().map(|c| c.rx_power_w).collect()
    }
}

#[derive(Debug, Clone)]
pub struct InterfererModel {
    pub distance_m: f64,
    pub link: LinkModel,
    /// Channel from the interferer to the desired receiver.
    pub cross: ChannelStats,
    pub cross_omega: Vec<CMat>,
}

#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub noise_w: f64,
    pub desired: LinkModel,
    pub interferers: Vec<InterfererModel>,
}

impl Scenario {
    fn power_at(&self, distance_m: f64) -> Result<f64> {
        received_power(&LinkGeometry { carrier_hz: self.carrier_hz, distance_m, tx_power_w: self.tx_power_w })
    }

    fn stats(&self, ends: LinkEnds, power_w: f64) -> Result<ChannelStats> {
        ChannelStats::new(&self.antennas, self.k_rice, los_component(&self.antennas, ends), power_w)
    }

    pub fn prepare(&self) -> Result<PreparedScenario> {
        positive("distance_m", self.distance_m)?;
        let noise_w = self.noise.noise_power_w()?;
        let p = self.power_at(self.distance_m)?;
        let powers: Vec<f64> = self.interferer_distances_m.iter().map(|&d| self.power_at(d)).collect::<Result<_>>()?;

        let desired_contaminators = (0..powers.len())
            .map(|a| self.stats(LinkEnds::new(DESIRED_TX, interferer_rx(a)), powers[a]))
            .collect::<Result<Vec<_>>>()?;
        let desired =
            LinkModel::new(self.stats(LinkEnds::new(DESIRED_TX, DESIRED_RX), p)?, desired_contaminators, noise_w)?;

        let mut interferers = Vec::with_capacity(powers.len());
        for (a, &pa) in powers.iter().enumerate() {
            let tx = interferer_tx(a);
            // The desired receiver leaks into interferer a's training at the
            // same power as a leaks into the desired one; the other
            // interferers keep their own powers.
            let mut contaminators = Vec::with_capacity(powers.len());
            contaminators.push(self.stats(LinkEnds::new(tx, DESIRED_RX), pa)?);
            for (b, &pb) in powers.iter().enumerate().filter(|&(b, _)| b != a) {
                contaminators.push(self.stats(LinkEnds::new(tx, interferer_rx(b)), pb)?);
            }
            let link = LinkModel::new(self.stats(LinkEnds::new(tx, interferer_rx(a)), p)?, contaminators, noise_w)?;
            let cross = self.stats(LinkEnds::new(tx, DESIRED_RX), pa)?;
            let nu2 = C64::new(cross.nu * cross.nu, 0.0);
            let s2r = &cross.r_tx * C64::new(cross.sigma_s * cross.sigma_s, 0.0);
            let cross_omega = (0..cross.n_rx()).map(|n| linalg::row_gram(&cross.h_los, n) * nu2 + &s2r).collect();
            interferers.push(InterfererModel { distance_m: self.interferer_distances_m[a], link, cross, cross_omega });
        }
        Ok(PreparedScenario { scenario: self.clone(), noise_w, desired, interferers })
    }
}

impl PreparedScenario {
    pub fn n_tx(&self) -> usize {
        self.scenario.antennas.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.scenario.antennas.n_rx
    }

    pub fn xi_star(&self) -> f64 {
        self.desired.xi_star
    }

    pub fn view(&self) -> LinkView<'_> {
        LinkView {
            power_w: self.desired.channel.rx_power_w,
            noise_w: self.noise_w,
            system: &self.desired.system,
            interferers: self
                .interferers
                .iter()
                .map(|i| InterfererView {
                    power_w: i.cross.rx_power_w,
                    xi: i.link.xi_star,
                    system: &i.link.system,
                    cross_omega: &i.cross_omega,
                })
                .collect(),
        }
    }

    /// Closed-form SINR per receive antenna at the desired link's `xi_star`.
    pub fn closed_form_sinr(&self, mode: RateMode) -> Result<Vec<SinrBreakdown>> {
        closed_form_sinr(&self.view(), self.xi_star(), mode)
    }

    pub fn closed_form_rate(&self, mode: RateMode) -> Result<RateReport> {
        closed_form_rate(&self.closed_form_sinr(mode)?, mode)
    }
}
