//! Distance-based adaptive coding and modulation.
//!
//! Mode `k` (1-based, increasing spectral efficiency) is used for
//! `d_k <= d < d_{k-1}`, with `d_0 = D_max` and `d_K = D_min`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// (modulation order, code rate, switching threshold in km) of the
/// reference design for N_t = 32, N_r = 4.
pub const REFERENCE_32X4: [(u32, f64, f64); 8] = [
    (2, 0.488, 550.0),
    (4, 0.533, 450.0),
    (4, 0.706, 300.0),
    (8, 0.635, 210.0),
    (8, 0.780, 130.0),
    (16, 0.731, 90.0),
    (16, 0.853, 35.0),
    (32, 0.879, 5.56),
];

/// Reference design for N_t = 64, N_r = 4.
pub const REFERENCE_64X4: [(u32, f64, f64); 7] = [
    (4, 0.706, 500.0),
    (8, 0.642, 400.0),
    (8, 0.780, 300.0),
    (16, 0.708, 190.0),
    (16, 0.853, 90.0),
    (32, 0.831, 35.0),
    (64, 0.879, 5.56),
];

pub const D_MIN_KM: f64 = 5.56;
pub const D_MAX_KM: f64 = 740.0;

fn log2_order(m: u32) -> Result<f64> {
    match m {
        2 | 4 | 8 | 16 | 32 | 64 => Ok(m.trailing_zeros() as f64),
        _ => Err(Error::Modulation(m)),
    }
}

/// `r_c log2(M) N / (N + N_cp)`.
pub fn mode_se(modulation_order: u32, code_rate: f64, n: usize, n_cp: usize) -> Result<f64> {
    let bits = log2_order(modulation_order)?;
    if !(code_rate > 0.0 && code_rate <= 1.0) {
        return Err(Error::Domain { name: "code_rate", value: code_rate });
    }
    if n == 0 {
        return Err(Error::Domain { name: "n_subcarriers", value: 0.0 });
    }
    Ok(code_rate * bits * n as f64 / (n + n_cp) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcmMode {
    pub modulation_order: u32,
    pub code_rate: f64,
    pub se_bps_hz: f64,
    pub threshold_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcmTable {
    pub modes: Vec<AcmMode>,
    pub d0_km: f64,
    pub n_subcarriers: usize,
    pub n_cp: usize,
    pub bandwidth_hz: f64,
    pub n_rx: usize,
}

impl AcmTable {
    /// `menu` holds (modulation order, code rate, threshold km) sorted by
    /// increasing spectral efficiency.
    pub fn new(
        menu: &[(u32, f64, f64)],
        d0_km: f64,
        n_subcarriers: usize,
        n_cp: usize,
        bandwidth_hz: f64,
        n_rx: usize,
    ) -> Result<Self> {
        if menu.is_empty() {
            return Err(Error::EmptyTable);
        }
        let modes = menu
            .iter()
            .map(|&(m, rc, d)| {
                Ok(AcmMode {
                    modulation_order: m,
                    code_rate: rc,
                    se_bps_hz: mode_se(m, rc, n_subcarriers, n_cp)?,
                    threshold_km: d,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut prev_d = d0_km;
        let mut prev_se = 0.0;
        for m in &modes {
            if !(m.threshold_km < prev_d) {
                return Err(Error::Domain { name: "threshold_km", value: m.threshold_km });
            }
            if !(m.se_bps_hz > prev_se) {
                return Err(Error::Domain { name: "se_bps_hz", value: m.se_bps_hz });
            }
            prev_d = m.threshold_km;
            prev_se = m.se_bps_hz;
        }
        if !(bandwidth_hz > 0.0) || n_rx == 0 {
            return Err(Error::Domain { name: "bandwidth_hz", value: bandwidth_hz });
        }
        Ok(Self { modes, d0_km, n_subcarriers, n_cp, bandwidth_hz, n_rx })
    }

    /// Reference (32, 4) design over a 6 MHz, 512 + 32 subcarrier OFDM link.
    pub fn reference_32x4() -> Self {
        Self::new(&REFERENCE_32X4, D_MAX_KM, 512, 32, 6e6, 4).expect("valid reference table")
    }

    pub fn reference_64x4() -> Self {
        Self::new(&REFERENCE_64X4, D_MAX_KM, 512, 32, 6e6, 4).expect("valid reference table")
    }

    pub fn d_min_km(&self) -> f64 {
        self.modes.last().map_or(self.d0_km, |m| m.threshold_km)
    }

    /// Upper end of mode `k`'s interval (1-based).
    fn upper_km(&self, k: usize) -> f64 {
        if k == 1 {
            self.d0_km
        } else {
            self.modes[k - 2].threshold_km
        }
    }
}

/// (per-DRA, total) data rate in bit/s.
pub fn mode_rates(mode: &AcmMode, table: &AcmTable) -> (f64, f64) {
    let per = table.bandwidth_hz * mode.se_bps_hz;
    (per, per * table.n_rx as f64)
}

/// 1-based mode index for a distance in `[D_min, D_max)`.
pub fn select_mode(d_km: f64, table: &AcmTable) -> Result<usize> {
    let lo = table.d_min_km();
    if !(d_km >= lo && d_km < table.d0_km) {
        return Err(Error::OutOfRange { d_km, lo_km: lo, hi_km: table.d0_km });
    }
    Ok(table.modes.iter().position(|m| d_km >= m.threshold_km).expect("d >= d_K") + 1)
}

/// Bytes delivered while two aircraft separate head-on at closing speed
/// `2 v` from `D_min` to `d_km`, each distance segment carried at the total
/// rate of the mode selected there.
pub fn accumulated_volume(d_km: f64, table: &AcmTable, speed_kmh: f64) -> Result<f64> {
    let lo = table.d_min_km();
    if !(d_km >= lo && d_km <= table.d0_km) {
        return Err(Error::OutOfRange { d_km, lo_km: lo, hi_km: table.d0_km });
    }
    if !(speed_kmh > 0.0) {
        return Err(Error::Domain { name: "speed_kmh", value: speed_kmh });
    }
    let mut bits = 0.0;
    for (i, m) in table.modes.iter().enumerate() {
        let upper = table.upper_km(i + 1).min(d_km);
        if upper > m.threshold_km {
            let hours = (upper - m.threshold_km) / (2.0 * speed_kmh);
            bits += mode_rates(m, table).1 * hours * 3600.0;
        }
    }
    Ok(bits / 8.0)
}

/// Hours to separate from `D_min` to `D_max` at closing speed `2 v`.
pub fn traverse_time_h(table: &AcmTable, speed_kmh: f64) -> f64 {
    (table.d0_km - table.d_min_km()) / (2.0 * speed_kmh)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeProfile {
    pub speed_kmh: f64,
    /// (distance km, accumulated bytes).
    pub samples: Vec<(f64, f64)>,
}

/// Samples from `D_min` every `step_km`, always ending at `D_max`.
pub fn volume_profile(table: &AcmTable, speed_kmh: f64, step_km: f64) -> Result<VolumeProfile> {
    if !(step_km > 0.0) {
        return Err(Error::Domain { name: "step_km", value: step_km });
    }
    let lo = table.d_min_km();
    let mut samples = Vec::new();
    let mut i = 0usize;
    loop {
        let d = lo + i as f64 * step_km;
        if d >= table.d0_km {
            break;
        }
        samples.push((d, accumulated_volume(d, table, speed_kmh)?));
        i += 1;
    }
    samples.push((table.d0_km, accumulated_volume(table.d0_km, table, speed_kmh)?));
    Ok(VolumeProfile { speed_kmh, samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdDesign {
    pub table: AcmTable,
    /// Largest distance at which each kept mode is supported.
    pub reach_km: Vec<f64>,
    /// Menu entries that are never selected.
    pub dropped: Vec<(u32, f64)>,
    /// Whether the curve was non-increasing on the 64-point check grid.
    pub monotone: bool,
    /// Set when even the lowest kept mode fails beyond this distance.
    pub uncovered_beyond_km: Option<f64>,
}

pub struct DesignInputs {
    pub d_min_km: f64,
    pub d_max_km: f64,
    pub n_subcarriers: usize,
    pub n_cp: usize,
    pub bandwidth_hz: f64,
    pub n_rx: usize,
}

const GRID_POINTS: usize = 64;
const BISECTION_KM: f64 = 0.1;

/// Largest distance with `curve(d) >= se`, to within `BISECTION_KM`.
fn reach(curve: &mut impl FnMut(f64) -> f64, grid: &[(f64, f64)], se: f64) -> Option<f64> {
    let last = grid.len() - 1;
    if grid[last].1 >= se {
        return Some(grid[last].0);
    }
    let i = (0..last).rev().find(|&i| grid[i].1 >= se)?;
    let (mut lo, mut hi) = (grid[i].0, grid[i + 1].0);
    while hi - lo > BISECTION_KM {
        let mid = 0.5 * (lo + hi);
        if curve(mid) >= se {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Switching thresholds from a rate-versus-distance curve (bps/Hz per DRA
/// against km). `menu` lists (modulation order, code rate) by increasing
/// spectral efficiency.
pub fn design_thresholds(
    mut curve: impl FnMut(f64) -> f64,
    menu: &[(u32, f64)],
    inputs: &DesignInputs,
) -> Result<ThresholdDesign> {
    let (d_min, d_max) = (inputs.d_min_km, inputs.d_max_km);
    if !(d_min < d_max) {
        return Err(Error::InvertedRange { lo: d_min, hi: d_max });
    }
    let ses =
        menu.iter().map(|&(m, rc)| mode_se(m, rc, inputs.n_subcarriers, inputs.n_cp)).collect::<Result<Vec<_>>>()?;
    if ses.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain { name: "menu order", value: f64::NAN });
    }
    let grid: Vec<(f64, f64)> = (0..GRID_POINTS)
        .map(|i| {
            let d = d_min + (d_max - d_min) * i as f64 / (GRID_POINTS - 1) as f64;
            (d, curve(d))
        })
        .collect();
    let monotone = grid.windows(2).all(|w| w[1].1 <= w[0].1);

    let reaches: Vec<Option<f64>> = ses.iter().map(|&se| reach(&mut curve, &grid, se)).collect();

    // Walk from the most to the least efficient mode; a mode only survives
    // if it reaches farther than every more efficient survivor.
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    let mut frontier = d_min;
    for k in (0..menu.len()).rev() {
        match reaches[k] {
            Some(r) if r > frontier || (kept.is_empty() && r >= d_min) => {
                kept.push(k);
                frontier = r;
            }
            _ => dropped.push(menu[k]),
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyTable);
    }
    kept.reverse();
    dropped.reverse();
    let reach_km: Vec<f64> = kept.iter().map(|&k| reaches[k].expect("kept modes reach")).collect();
    let rows: Vec<(u32, f64, f64)> = kept
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let threshold = if i + 1 < kept.len() { reach_km[i + 1] } else { d_min };
            (menu[k].0, menu[k].1, threshold)
        })
        .collect();
    let uncovered_beyond_km = (reach_km[0] < d_max).then_some(reach_km[0]);
    let table = AcmTable::new(&rows, d_max, inputs.n_subcarriers, inputs.n_cp, inputs.bandwidth_hz, inputs.n_rx)?;
    Ok(ThresholdDesign { table, reach_km, dropped, monotone, uncovered_beyond_km })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> DesignInputs {
        DesignInputs {
            d_min_km: D_MIN_KM,
            d_max_km: D_MAX_KM,
            n_subcarriers: 512,
            n_cp: 32,
            bandwidth_hz: 6e6,
            n_rx: 4,
        }
    }

    #[test]
    fn se_examples() {
        assert!((mode_se(2, 0.488, 512, 32).unwrap() - 0.459).abs() < 5e-4);
        assert!((mode_se(64, 0.879, 512, 32).unwrap() - 4.964).abs() < 5e-4);
        assert_eq!(mode_se(2, 1.0, 512, 0).unwrap(), 1.0);
        assert!(mode_se(3, 0.5, 512, 32).is_err());
        assert!(mode_se(4, 0.0, 512, 32).is_err());
    }

    #[test]
    fn rate_examples() {
        let t = AcmTable::reference_32x4();
        let (per, total) = mode_rates(&t.modes[0], &t);
        assert!((per / 1e6 - 2.756).abs() < 5e-3);
        assert!((total / 1e6 - 11.023).abs() < 1e-2);
        let one = AcmTable::new(&[(2, 1.0, 1.0)], 2.0, 512, 0, 6e6, 1).unwrap();
        let (p, q) = mode_rates(&one.modes[0], &one);
        assert_eq!((p, q), (6e6, 6e6));
    }

    #[test]
    fn select_examples() {
        let t = AcmTable::reference_32x4();
        assert_eq!(select_mode(100.0, &t).unwrap(), 6);
        assert_eq!(select_mode(5.56, &t).unwrap(), 8);
        assert_eq!(select_mode(500.0, &t).unwrap(), 2);
        assert_eq!(select_mode(550.0, &t).unwrap(), 1);
        assert!(select_mode(800.0, &t).is_err());
        assert!(select_mode(740.0, &t).is_err());
        assert!(select_mode(5.0, &t).is_err());
    }

    #[test]
    fn invalid_tables_rejected() {
        assert!(AcmTable::new(&[], 740.0, 512, 32, 6e6, 4).is_err());
        assert!(AcmTable::new(&[(4, 0.5, 100.0), (2, 0.5, 50.0)], 740.0, 512, 32, 6e6, 4).is_err());
        assert!(AcmTable::new(&[(2, 0.5, 100.0), (4, 0.5, 200.0)], 740.0, 512, 32, 6e6, 4).is_err());
    }

    #[test]
    fn volume_zero_at_minimum_and_traverse_time() {
        let t = AcmTable::reference_64x4();
        assert_eq!(accumulated_volume(5.56, &t, 920.0).unwrap(), 0.0);
        assert!(accumulated_volume(5.0, &t, 920.0).is_err());
        let minutes = traverse_time_h(&t, 920.0) * 60.0;
        assert!((minutes - 24.0).abs() <= 0.2, "{minutes}");
    }

    #[test]
    fn constant_curve_keeps_only_supported_mode() {
        let menu = [(2, 1.0), (8, 1.0)];
        let inp = DesignInputs { n_cp: 0, ..inputs() };
        let d = design_thresholds(|_| 2.0, &menu, &inp).unwrap();
        assert_eq!(d.table.modes.len(), 1);
        assert_eq!(d.reach_km, [D_MAX_KM]);
        assert_eq!(d.dropped, [(8, 1.0)]);
        assert_eq!(d.table.modes[0].threshold_km, D_MIN_KM);
    }

    #[test]
    fn linear_curve_inverts() {
        let menu = [(8, 1.0)];
        let inp = DesignInputs { n_cp: 0, ..inputs() };
        let d = design_thresholds(|x| 5.0 - x / 100.0, &menu, &inp).unwrap();
        assert!((d.reach_km[0] - 200.0).abs() <= 0.1, "{:?}", d.reach_km);
        assert_eq!(d.uncovered_beyond_km, Some(d.reach_km[0]));
    }

    #[test]
    fn curve_below_every_mode_is_an_error() {
        let r = design_thresholds(|_| 0.1, &[(4, 0.9)], &inputs());
        assert_eq!(r, Err(Error::EmptyTable));
    }
}
