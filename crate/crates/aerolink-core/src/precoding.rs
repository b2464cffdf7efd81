//! RZF and eigen-beamforming precoders, and the MSE-optimal regularizer.

use crate::error::{Error, Result};
use crate::estimation::EstimationStats;
use crate::{linalg, CMat, C64};

/// Lower bound on the regularizer so that perfect CSI still gives an
/// invertible RZF matrix.
pub const XI_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecoderKind {
    Rzf,
    Eb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderMatrix {
    /// N_t x N_r.
    pub v: CMat,
    pub xi: Option<f64>,
    pub kind: PrecoderKind,
}

/// `V = (ĤᴴĤ/N_t + xi I)⁻¹ Ĥᴴ`, evaluated through the N_r x N_r form
/// `Ĥᴴ (ĤĤᴴ/N_t + xi I)⁻¹`.
pub fn rzf_matrix(h_hat: &CMat, xi: f64) -> Result<PrecoderMatrix> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::Domain { name: "xi", value: xi });
    }
    let n_tx = h_hat.ncols() as f64;
    let gram =
        h_hat * h_hat.adjoint() * C64::new(1.0 / n_tx, 0.0) + linalg::identity(h_hat.nrows()) * C64::new(xi, 0.0);
    let inv = linalg::inv_hpd(&gram, "RZF Gram matrix")?;
    Ok(PrecoderMatrix { v: h_hat.adjoint() * inv, xi: Some(xi), kind: PrecoderKind::Rzf })
}

pub fn eb_matrix(h_hat: &CMat) -> PrecoderMatrix {
    PrecoderMatrix { v: h_hat.adjoint(), xi: None, kind: PrecoderKind::Eb }
}

pub fn precoder(kind: PrecoderKind, h_hat: &CMat, xi: f64) -> Result<PrecoderMatrix> {
    match kind {
        PrecoderKind::Rzf => rzf_matrix(h_hat, xi),
        PrecoderKind::Eb => Ok(eb_matrix(h_hat)),
    }
}

/// MSE-minimizing regularizer: the summed error variance over all N_t N_r
/// channel entries, divided by N_t².
pub fn optimal_xi(stats: &EstimationStats) -> f64 {
    let n_tx = stats.n_tx() as f64;
    let total: f64 = stats.xi_blocks.iter().map(|b| linalg::trace(b).re).sum();
    (total / (n_tx * n_tx)).max(XI_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;

    #[test]
    fn scalar_rzf() {
        let h = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        let v = rzf_matrix(&h, 1.0).unwrap();
        assert!((v.v[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(rzf_matrix(&h, 0.0).is_err());
        assert!(rzf_matrix(&h, -1.0).is_err());
    }

    #[test]
    fn large_xi_approaches_scaled_eb() {
        let mut r = rng::rng(4);
        let h = rng::complex_normal_matrix(&mut r, 2, 8);
        let v = rzf_matrix(&h, 1e6).unwrap();
        let eb = eb_matrix(&h);
        let rel = (&v.v * C64::new(1e6, 0.0) - &eb.v).norm() / eb.v.norm();
        assert!(rel <= 1e-4, "{rel}");
    }

    #[test]
    fn eb_is_conjugate_transpose() {
        let h = CMat::from_element(1, 1, C64::new(1.0, 1.0));
        assert_eq!(eb_matrix(&h).v[(0, 0)], C64::new(1.0, -1.0));
        let mut r = rng::rng(5);
        let h = rng::complex_normal_matrix(&mut r, 3, 7);
        assert_eq!(eb_matrix(&h).v.shape(), (7, 3));
    }

    #[test]
    fn rzf_columns_follow_rank_one_update() {
        // Column n of V equals A_n⁻¹ ĥ_nᴴ / (1 + ĥ_n A_n⁻¹ ĥ_nᴴ / N_t), where
        // A_n leaves row n out of the regularized Gram matrix.
        let mut r = rng::rng(6);
        let (nt, nr, xi) = (8, 2, 0.3);
        let h = rng::complex_normal_matrix(&mut r, nr, nt);
        let v = rzf_matrix(&h, xi).unwrap().v;
        for n in 0..nr {
            let keep: vec::Vec<usize> = (0..nr).filter(|&k| k != n).collect();
            let hk = linalg::select_rows(&h, &keep);
            let a = hk.adjoint() * &hk * C64::new(1.0 / nt as f64, 0.0) + linalg::identity(nt) * C64::new(xi, 0.0);
            let ai = linalg::inv(&a, "test").unwrap();
            let x = h.row(n).adjoint();
            let ax = &ai * &x;
            let denom = C64::new(1.0, 0.0) + (x.adjoint() * &ax)[(0, 0)] / nt as f64;
            let col = ax / denom;
            let diff = (v.column(n) - col).norm();
            assert!(diff < 1e-10, "{diff}");
        }
    }

    fn stats_with_xi(xi: CMat, nr: usize) -> EstimationStats {
        let nt = xi.nrows();
        EstimationStats {
            phi_tx: CMat::zeros(nt, nt),
            phi_rx: linalg::identity(nr),
            xi_blocks: (0..nr).map(|_| xi.clone()).collect(),
            m_blocks: vec![],
            theta_blocks: vec![],
            omega_blocks: vec![],
            n_rx: nr,
        }
    }

    #[test]
    fn optimal_xi_limits() {
        assert_eq!(optimal_xi(&stats_with_xi(CMat::zeros(8, 8), 2)), XI_FLOOR);
        let s2 = 0.3;
        let st = stats_with_xi(linalg::identity(8) * C64::new(s2, 0.0), 2);
        assert!((optimal_xi(&st) - 2.0 * s2 / 8.0).abs() < 1e-15);
    }
}
