//! Deterministic equivalents of RZF resolvent functionals and the
//! closed-form SINR built on them.
//!
//! The fixed point is solved for `H = A + C^{1/2} G C̃^{1/2} / sqrt(N)` with
//! `A` (N x K) deterministic and the scattering covariances `C`, `C̃` already
//! carrying their power weights. In this form the resolvent approximation
//! reads
//!
//! ```text
//! T = (xi (I + δ̃ C) + A (I + δ C̃)⁻¹ Aᴴ)⁻¹,   δ = Tr(C T) / N,
//! T̃ = (xi (I + δ C̃) + Aᴴ (I + δ̃ C)⁻¹ A)⁻¹,   δ̃ = Tr(C̃ T̃) / N.
//! ```

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::channel::ChannelStats;
use crate::error::{positive, Error, Result};
use crate::estimation::EstimationStats;
use crate::{linalg, CMat, C64};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
/// Relative floor on the stopping rule, only active once |δ| exceeds 1000.
const RELATIVE_TOLERANCE: f64 = 1e-13;
const DAMPING_TRIGGER: usize = 10;

#[derive(Debug, Clone)]
pub struct DeProblem {
    a: CMat,
    c: CMat,
    c_tilde: CMat,
    n: f64,
    lam: Vec<f64>,
    u: CMat,
    /// `Uᴴ A` in the eigenbasis of `C`.
    a_u: CMat,
}

impl DeProblem {
    pub fn new(a: CMat, c: CMat, c_tilde: CMat) -> Result<Self> {
        let (n, k) = a.shape();
        if c.shape() != (n, n) || c_tilde.shape() != (k, k) {
            return Err(Error::Dimension("C must be N x N and C̃ must be K x K"));
        }
        let (lam, u) = linalg::eigh(&c);
        let a_u = u.adjoint() * &a;
        Ok(Self { a, c, c_tilde, n: n as f64, lam, u, a_u })
    }

    /// Separable-variance form: `H = nu H̄ + sigma R^{1/2} G R̃^{1/2} / sqrt(N)`. The
    /// variance profile is `sigma² r_i r̃_j`, so `sigma²` goes on one side.
    pub fn from_theorem(h_bar: &CMat, r: &CMat, r_tilde: &CMat, nu: f64, sigma: f64) -> Result<Self> {
        Self::new(h_bar * C64::new(nu, 0.0), r * C64::new(sigma * sigma, 0.0), r_tilde.clone())
    }

    /// Resolvent problem of an RZF link: the normalized uplink estimate
    /// `Ĥᴴ / sqrt(N_t)` has mean `nu H_dᴴ / sqrt(N_t)` and i.i.d. columns
    /// with covariance `Φ`.
    pub fn for_link(h_los: &CMat, nu: f64, phi_tx: &CMat) -> Result<Self> {
        let n_tx = h_los.ncols() as f64;
        let a = h_los.adjoint() * C64::new(nu / libm::sqrt(n_tx), 0.0);
        Self::new(a, phi_tx.clone(), linalg::identity(h_los.nrows()))
    }

    /// Drops the listed columns of `A` (receive antennas) and the matching
    /// rows and columns of `C̃`, keeping `N` and `C`.
    pub fn without_columns(&self, excluded: &[usize]) -> Self {
        let keep: Vec<usize> = (0..self.a.ncols()).filter(|j| !excluded.contains(j)).collect();
        let pick = |m: &CMat| DMatrix::from_fn(m.nrows(), keep.len(), |i, j| m[(i, keep[j])]);
        let c_tilde = DMatrix::from_fn(keep.len(), keep.len(), |i, j| self.c_tilde[(keep[i], keep[j])]);
        Self {
            a: pick(&self.a),
            c: self.c.clone(),
            c_tilde,
            n: self.n,
            lam: self.lam.clone(),
            u: self.u.clone(),
            a_u: pick(&self.a_u),
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn k(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn c(&self) -> &CMat {
        &self.c
    }

    pub fn c_tilde(&self) -> &CMat {
        &self.c_tilde
    }

    /// `Ãᴴ diag(w) Ã`.
    fn weighted_gram(&self, w: &[f64]) -> CMat {
        let mut scaled = self.a_u.clone();
        for (i, &wi) in w.iter().enumerate() {
            scaled.row_mut(i).scale_mut(wi);
        }
        self.a_u.adjoint() * scaled
    }

    fn k_identity(&self) -> CMat {
        linalg::identity(self.k())
    }

    /// `Tr(C T) / N` at `(δ, δ̃)`, via Woodbury in the eigenbasis of `C`.
    fn delta_update(&self, xi: f64, delta: f64, delta_t: f64) -> Result<f64> {
        let e: Vec<f64> = self.lam.iter().map(|&l| xi * (1.0 + delta_t * l)).collect();
        let e_inv: Vec<f64> = e.iter().map(|&x| 1.0 / x).collect();
        let mut tr: f64 = self.lam.iter().zip(&e_inv).map(|(l, ei)| l * ei).sum();
        if self.k() > 0 {
            let d = self.k_identity() + &self.c_tilde * C64::new(delta, 0.0);
            let m = d + self.weighted_gram(&e_inv);
            let m_inv = linalg::inv_hpd(&m, "fixed-point Woodbury core")?;
            let w2: Vec<f64> = self.lam.iter().zip(&e_inv).map(|(l, ei)| l * ei * ei).collect();
            tr -= linalg::tr_prod(&m_inv, &self.weighted_gram(&w2)).re;
        }
        Ok(tr / self.n)
    }

    /// `Tr(C̃ T̃) / N` at `(δ, δ̃)`.
    fn delta_tilde_update(&self, xi: f64, delta: f64, delta_t: f64) -> Result<f64> {
        if self.k() == 0 {
            return Ok(0.0);
        }
        let w: Vec<f64> = self.lam.iter().map(|&l| 1.0 / (1.0 + delta_t * l)).collect();
        let m = (self.k_identity() + &self.c_tilde * C64::new(delta, 0.0)) * C64::new(xi, 0.0) + self.weighted_gram(&w);
        let t_tilde = linalg::inv_hpd(&m, "co-resolvent")?;
        Ok(linalg::tr_prod(&self.c_tilde, &t_tilde).re / self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPair {
    pub delta: f64,
    pub delta_tilde: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

pub fn solve_deltas(xi: f64, p: &DeProblem) -> Result<DeltaPair> {
    solve_deltas_with(xi, p, SolverOptions::default())
}

/// Gauss-Seidel iteration from `δ = δ̃ = 1/xi`. Plain updates unless the
/// step grows for ten consecutive iterations, after which each update is
/// averaged with the previous iterate.
pub fn solve_deltas_with(xi: f64, p: &DeProblem, opts: SolverOptions) -> Result<DeltaPair> {
    positive("xi", xi)?;
    let (mut delta, mut delta_t) = (1.0 / xi, 1.0 / xi);
    let mut last = f64::INFINITY;
    let mut growing = 0;
    let mut damped = false;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let mut d_new = p.delta_update(xi, delta, delta_t)?;
        if damped {
            d_new = 0.5 * (d_new + delta);
        }
        let mut dt_new = p.delta_tilde_update(xi, d_new, delta_t)?;
        if damped {
            dt_new = 0.5 * (dt_new + delta_t);
        }
        residual = (d_new - delta).abs().max((dt_new - delta_t).abs());
        delta = d_new;
        delta_t = dt_new;
        let scale = delta.abs().max(delta_t.abs());
        if residual <= opts.tolerance.max(RELATIVE_TOLERANCE * scale) {
            return Ok(DeltaPair { delta, delta_tilde: delta_t, iterations: it, residual });
        }
        growing = if residual > last { growing + 1 } else { 0 };
        if growing >= DAMPING_TRIGGER {
            damped = true;
        }
        last = residual;
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual })
}

/// Largest deviation of `(δ, δ̃)` from one simultaneous application of the
/// two trace equations.
pub fn fixed_point_residual(xi: f64, d: &DeltaPair, p: &DeProblem) -> Result<f64> {
    let dn = p.delta_update(xi, d.delta, d.delta_tilde)?;
    let dtn = p.delta_tilde_update(xi, d.delta, d.delta_tilde)?;
    Ok((dn - d.delta).abs().max((dtn - d.delta_tilde).abs()))
}

/// `T⁻¹ = xi (I + δ̃ C) + A (I + δ C̃)⁻¹ Aᴴ`.
fn resolvent_inverse(xi: f64, d: &DeltaPair, p: &DeProblem) -> Result<CMat> {
    let n = p.n();
    let mut m = (linalg::identity(n) + &p.c * C64::new(d.delta_tilde, 0.0)) * C64::new(xi, 0.0);
    if p.k() > 0 {
        let dm = p.k_identity() + &p.c_tilde * C64::new(d.delta, 0.0);
        let d_inv = linalg::inv_hpd(&dm, "I + δ C̃")?;
        m += &p.a * d_inv * p.a.adjoint();
    }
    Ok(m)
}

pub fn resolvent_approx(xi: f64, d: &DeltaPair, p: &DeProblem) -> Result<CMat> {
    linalg::inv_hpd(&resolvent_inverse(xi, d, p)?, "resolvent")
}

/// Subtractive leave-out approximation: the resolvent with
/// `(1/N) sum_{n in excluded} blocks[n]` removed from its inverse.
pub fn leave_one_out(xi: f64, d: &DeltaPair, p: &DeProblem, blocks: &[CMat], excluded: &[usize]) -> Result<CMat> {
    if excluded.is_empty() {
        return resolvent_approx(xi, d, p);
    }
    let mut m = resolvent_inverse(xi, d, p)?;
    for &n in excluded {
        let b = blocks.get(n).ok_or(Error::Dimension("excluded index has no block"))?;
        m -= b * C64::new(1.0 / p.n, 0.0);
    }
    linalg::inv(&m, "leave-one-out resolvent")
}

/// Solved resolvent approximation together with the pieces needed for
/// second-order functionals.
#[derive(Debug, Clone)]
pub struct Resolvent {
    pub xi: f64,
    pub deltas: DeltaPair,
    t: CMat,
    c: CMat,
    n: f64,
    tct: CMat,
    /// `A D⁻¹ C̃ D⁻¹ Aᴴ`.
    g1: CMat,
    /// `Fᴴ C̃ F` with `F = T̃ Aᴴ E⁻¹` in unit-shift normalization.
    fcf: CMat,
    jac: [[f64; 2]; 2],
}

impl Resolvent {
    pub fn solve(xi: f64, p: &DeProblem) -> Result<Self> {
        let deltas = solve_deltas(xi, p)?;
        Self::at(xi, deltas, p)
    }

    pub fn at(xi: f64, deltas: DeltaPair, p: &DeProblem) -> Result<Self> {
        let n = p.n();
        let t = resolvent_approx(xi, &deltas, p)?;
        let tct = &t * &p.c * &t;
        let inv_n = 1.0 / p.n;
        let a2 = linalg::tr_prod(&tct, &p.c).re * inv_n;
        let (g1, fcf, a1, a3, a4) = if p.k() > 0 {
            let dm = p.k_identity() + &p.c_tilde * C64::new(deltas.delta, 0.0);
            let d_inv = linalg::inv_hpd(&dm, "I + δ C̃")?;
            let ad = &p.a * &d_inv;
            let g1 = &ad * &p.c_tilde * ad.adjoint();
            // E = xi (I + δ̃ C); in the eigenbasis of C it is diagonal.
            let e_inv: Vec<f64> = p.lam.iter().map(|&l| 1.0 / (xi * (1.0 + deltas.delta_tilde * l))).collect();
            let e_inv_m = linalg::from_eig(&p.u, &e_inv);
            let core = dm + p.weighted_gram(&e_inv);
            let t_tilde = linalg::inv_hpd(&core, "unit-shift co-resolvent")?;
            let f = &t_tilde * p.a.adjoint() * e_inv_m;
            let fcf = f.adjoint() * &p.c_tilde * &f;
            let a1 = linalg::tr_prod(&tct, &g1).re * inv_n;
            let ct_t = &p.c_tilde * &t_tilde;
            let a3 = linalg::tr_prod(&ct_t, &ct_t).re * inv_n;
            let a4 = linalg::tr_prod(&fcf, &p.c).re * inv_n;
            (g1, fcf, a1, a3, a4)
        } else {
            (CMat::zeros(n, n), CMat::zeros(n, n), 0.0, 0.0, 0.0)
        };
        Ok(Self { xi, deltas, t, c: p.c.clone(), n: p.n, tct, g1, fcf, jac: [[1.0 - a1, a2], [a3, 1.0 - a4]] })
    }

    pub fn matrix(&self) -> &CMat {
        &self.t
    }

    /// `Re Tr(M T)`.
    pub fn trace_with(&self, m: &CMat) -> f64 {
        linalg::tr_prod(m, &self.t).re
    }

    /// Deterministic equivalent of `Tr(B Y P Y)` for the random resolvent
    /// `Y`, obtained as `-d/dt Tr(B T(xi I + t P))` at `t = 0`. The shift
    /// derivative also moves `δ` and `δ̃`; their sensitivities come from
    /// the linearized fixed point.
    pub fn second_order(&self, p: &CMat, b: &CMat) -> f64 {
        let inv_n = 1.0 / self.n;
        let b1 = linalg::tr_prod(&self.tct, p).re * inv_n;
        let b2 = linalg::tr_prod(&self.fcf, p).re * inv_n;
        let [[j11, j12], [j21, j22]] = self.jac;
        let det = j11 * j22 - j12 * j21;
        let d_delta = (-b1 * j22 - j12 * b2) / det;
        let d_shift = (j11 * b2 + j21 * b1) / det;
        let tbt = &self.t * b * &self.t;
        linalg::tr_prod(&tbt, p).re + d_shift * linalg::tr_prod(&tbt, &self.c).re
            - d_delta * linalg::tr_prod(&tbt, &self.g1).re
    }
}

/// Statistics of one RZF link as seen by the closed form.
#[derive(Debug, Clone)]
pub struct LinkSystem {
    problem: DeProblem,
    pub n_tx: usize,
    pub theta: Vec<CMat>,
    pub omega: Vec<CMat>,
    pub xi_err: CMat,
}

impl LinkSystem {
    pub fn new(channel: &ChannelStats, stats: &EstimationStats) -> Result<Self> {
        Ok(Self {
            problem: DeProblem::for_link(&channel.h_los, channel.nu, &stats.phi_tx)?,
            n_tx: channel.n_tx(),
            theta: stats.theta_blocks.clone(),
            omega: stats.omega_blocks.clone(),
            xi_err: stats.xi_blocks[0].clone(),
        })
    }

    pub fn problem(&self) -> &DeProblem {
        &self.problem
    }

    pub fn n_rx(&self) -> usize {
        self.theta.len()
    }

    /// Resolvent with the listed receive antennas removed from the channel
    /// and the fixed point re-solved on the remaining rows.
    pub fn leave_out(&self, xi: f64, excluded: &[usize]) -> Result<Resolvent> {
        Resolvent::solve(xi, &self.problem.without_columns(excluded))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateMode {
    /// Interferer LOS blocks known exactly.
    Theoretical,
    /// Interferer LOS blocks replaced by the desired link's block.
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrBreakdown {
    pub signal_w: f64,
    pub self_var_w: f64,
    pub iai_w: f64,
    pub external_w: f64,
    pub noise_w: f64,
    pub sinr: f64,
    pub vartheta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_antenna_bps_hz: Vec<f64>,
    pub mean_bps_hz: f64,
    pub mode: RateMode,
}

/// External interferer as seen by the desired receiver.
pub struct InterfererView<'a> {
    /// Power received at the desired receiver.
    pub power_w: f64,
    pub xi: f64,
    /// The interferer's own link.
    pub system: &'a LinkSystem,
    /// `Ω` blocks of the interferer-to-desired-receiver channel.
    pub cross_omega: &'a [CMat],
}

pub struct LinkView<'a> {
    pub power_w: f64,
    pub noise_w: f64,
    pub system: &'a LinkSystem,
    pub interferers: Vec<InterfererView<'a>>,
}

fn pair_index(i: usize, j: usize, n: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    a * n + b
}

pub fn closed_form_sinr(view: &LinkView<'_>, xi: f64, mode: RateMode) -> Result<Vec<SinrBreakdown>> {
    positive("xi", xi)?;
    let sys = view.system;
    let nr = sys.n_rx();
    let nt = sys.n_tx as f64;
    let single: Vec<Resolvent> = (0..nr).map(|n| sys.leave_out(xi, &[n])).collect::<Result<_>>()?;
    let vt: Vec<f64> = (0..nr).map(|n| single[n].trace_with(&sys.theta[n])).collect();

    let mut pairs: Vec<Option<Resolvent>> = (0..nr * nr).map(|_| None).collect();
    for i in 0..nr {
        for j in (i + 1)..nr {
            pairs[pair_index(i, j, nr)] = Some(sys.leave_out(xi, &[i, j])?);
        }
    }
    let own: Vec<Vec<Resolvent>> = view
        .interferers
        .iter()
        .map(|a| (0..a.system.n_rx()).map(|n| a.system.leave_out(a.xi, &[n])).collect())
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(nr);
    for ns in 0..nr {
        let v = vt[ns];
        let g = 1.0 + v / nt;
        let signal = view.power_w * (v / g) * (v / g);
        let self_var = view.power_w * single[ns].second_order(&sys.theta[ns], &sys.xi_err) / (g * g);

        let mut iai = 0.0;
        for n in (0..nr).filter(|&n| n != ns) {
            let b = pairs[pair_index(n, ns, nr)].as_ref().expect("pair resolvent");
            let gn = 1.0 + vt[n] / nt;
            let w = b.trace_with(&sys.theta[ns]) / nt;
            let tr_omega = b.second_order(&sys.theta[n], &sys.omega[ns]);
            let tr_theta = b.second_order(&sys.theta[n], &sys.theta[ns]);
            iai += tr_omega / (gn * gn) - 2.0 * w * tr_theta / ((1.0 + w) * gn * gn)
                + w * w * tr_theta / ((1.0 + w) * (1.0 + w) * gn * gn);
        }
        iai *= view.power_w;

        let mut external = 0.0;
        for (a, res) in view.interferers.iter().zip(&own) {
            for (n, ua) in res.iter().enumerate() {
                let (theta, omega) = match mode {
                    RateMode::Theoretical => (&a.system.theta[n], &a.cross_omega[ns]),
                    RateMode::Approximate => (&sys.theta[ns], &sys.omega[ns]),
                };
                let ga = 1.0 + ua.trace_with(theta) / nt;
                external += a.power_w * ua.second_order(theta, omega) / (ga * ga);
            }
        }

        let denom = self_var + iai + external + view.noise_w;
        out.push(SinrBreakdown {
            signal_w: signal,
            self_var_w: self_var,
            iai_w: iai,
            external_w: external,
            noise_w: view.noise_w,
            sinr: signal / denom,
            vartheta: v,
        });
    }
    Ok(out)
}

pub fn closed_form_rate(sinrs: &[SinrBreakdown], mode: RateMode) -> Result<RateReport> {
    if sinrs.is_empty() {
        return Err(Error::Empty("SINR list"));
    }
    let per: Vec<f64> = sinrs.iter().map(|s| libm::log2(1.0 + s.sinr)).collect();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    Ok(RateReport { per_antenna_bps_hz: per, mean_bps_hz: mean, mode })
}
