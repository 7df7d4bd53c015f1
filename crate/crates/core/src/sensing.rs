//! Fisher information, CRLBs, radar echo synthesis and the angle MLE.
//!
//! With `R = c I + rho v v^H` (`c = xi_bf^T gamma`) the transmit covariance is
//! a scaled identity plus the sensing beam, so every FIM block reduces to
//! steering-vector identities and the inner products `v^H a`, `v^H da`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{LargeScaleSet, SystemConfig};
use crate::error::{Error, Result};
use crate::geometry::{array_identities, inner, steering, steering_derivative, Angles, ArrayIdentities, Wrt};
use crate::precoding::{comm_power_factor, xi_bf, PowerAllocation, PrecoderSet, Scheme};
use crate::rng::cn01;

/// Blocks of the Fisher information for `(theta, phi, Re alpha, Im alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherBlocks {
    pub j_tt: f64,
    pub j_pp: f64,
    pub j_tp: f64,
    /// `J_aa` is `j_aa * I_2`.
    pub j_aa: f64,
    pub j_pa: [f64; 2],
    /// Coupling of `theta` with the reflection coefficient. Not part of the
    /// reduced FIM below; zero when the sensing beam is aligned.
    pub j_ta: [f64; 2],
    /// `J_pp - j_pa J_aa^-1 j_pa^T`
    pub j_pa_tilde: f64,
}

impl FisherBlocks {
    /// Reduced 2x2 FIM `[[J_tt, J_tp], [J_tp, J_pa_tilde]]`.
    pub fn reduced(&self) -> [[f64; 2]; 2] {
        [[self.j_tt, self.j_tp], [self.j_tp, self.j_pa_tilde]]
    }
}

/// CRLBs of azimuth and elevation in rad^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbPair {
    pub crlb_theta: f64,
    pub crlb_phi: f64,
}

impl CrlbPair {
    pub fn theta_db(&self) -> f64 {
        crate::lin_to_db(self.crlb_theta)
    }

    pub fn phi_db(&self) -> f64 {
        crate::lin_to_db(self.crlb_phi)
    }
}

/// FIM blocks for communications power `c = xi_bf^T gamma` and sensing power `rho`.
pub fn fisher_blocks_from_powers(c: f64, rho: f64, cfg: &SystemConfig, v_angles: Angles) -> FisherBlocks {
    let (tx, rx, ang) = (cfg.tx, cfg.rx, cfg.target);
    let n_t = tx.len() as f64;
    let n_r = rx.len() as f64;
    let kappa = cfg.kappa();
    let g = kappa * cfg.alpha.norm_sqr();
    let ia = array_identities(tx, ang);
    let ib = array_identities(rx, ang);

    let a = steering(tx, ang);
    let da_t = steering_derivative(tx, ang, Wrt::Theta);
    let da_p = steering_derivative(tx, ang, Wrt::Phi);
    let v = steering(tx, v_angles);
    let va = inner(&v, &a);
    let vt = inner(&v, &da_t);
    let vp = inner(&v, &da_p);
    let va2 = va.norm_sqr();

    let j_tt = g * (c * (n_r * ia.norm_theta + n_t * ib.norm_theta) + rho * (va2 * ib.norm_theta + n_r * vt.norm_sqr()));
    let j_pp = g * (c * (n_r * ia.norm_phi + n_t * ib.norm_phi) + rho * (va2 * ib.norm_phi + n_r * vp.norm_sqr()));
    // da_t^H v v^H da_p
    let tvp = vt.conj() * vp;
    let j_tp = g * (c * (n_r * ia.cross + n_t * ib.cross) + rho * (va2 * ib.cross + n_r * tvp.re));
    let j_aa = kappa * (c * n_t * n_r + rho * n_r * va2);

    // kappa Re(alpha^* rho N_r a^H v v^H da [1, j]) = kappa rho N_r [Re z, -Im z]
    let coupling = |vd: Complex64| {
        let z = cfg.alpha.conj() * rho * n_r * va.conj() * vd;
        [kappa * z.re, -kappa * z.im]
    };
    let j_pa = coupling(vp);
    let j_ta = coupling(vt);
    let j_pa_tilde = if j_aa > 0.0 {
        j_pp - (j_pa[0] * j_pa[0] + j_pa[1] * j_pa[1]) / j_aa
    } else {
        j_pp
    };
    FisherBlocks { j_tt, j_pp, j_tp, j_aa, j_pa, j_ta, j_pa_tilde }
}

/// FIM blocks for an arbitrary sensing beam direction `v_angles`.
pub fn fisher_blocks_general(
    ls: &LargeScaleSet,
    scheme: Scheme,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    v_angles: Angles,
) -> Result<FisherBlocks> {
    let xb = xi_bf(ls, scheme, cfg.n_t())?;
    let c = comm_power_factor(&xb, &alloc.gamma);
    Ok(fisher_blocks_from_powers(c, alloc.rho, cfg, v_angles))
}

fn schur_pair(j_tt: f64, j_pp: f64, j_tp: f64) -> Result<CrlbPair> {
    let ok = j_tt > 0.0 && j_pp > 0.0 && j_tt.is_finite() && j_pp.is_finite();
    if !ok || j_tt * j_pp - j_tp * j_tp <= 1e-12 * j_tt * j_pp {
        return Err(Error::EstimationImpossible);
    }
    Ok(CrlbPair {
        crlb_theta: 1.0 / (j_tt - j_tp * j_tp / j_pp),
        crlb_phi: 1.0 / (j_pp - j_tp * j_tp / j_tt),
    })
}

/// Schur-complement CRLBs from the reduced FIM.
pub fn crlb_general(blocks: &FisherBlocks) -> Result<CrlbPair> {
    schur_pair(blocks.j_tt, blocks.j_pa_tilde, blocks.j_tp)
}

/// Aligned-beam (`v = a`) FIM terms, linear in `(c, rho)`.
///
/// `phi_theta = c t1 + rho t2`, `varpi_phi = c p1 + rho p2`, `chi = c x1 + rho x2`,
/// all to be multiplied by `kappa |alpha|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedFisher {
    pub gain: f64,
    pub theta: [f64; 2],
    pub phi: [f64; 2],
    pub cross: [f64; 2],
}

impl AlignedFisher {
    pub fn new(cfg: &SystemConfig) -> Self {
        let ia: ArrayIdentities = array_identities(cfg.tx, cfg.target);
        let ib: ArrayIdentities = array_identities(cfg.rx, cfg.target);
        let n_t = cfg.tx.len() as f64;
        let n_r = cfg.rx.len() as f64;
        let nt2 = n_t * n_t;
        Self {
            gain: cfg.kappa() * cfg.alpha.norm_sqr(),
            theta: [n_r * ia.norm_theta + n_t * ib.norm_theta, nt2 * ib.norm_theta],
            phi: [n_r * ia.norm_phi + n_t * ib.norm_phi, nt2 * ib.norm_phi],
            cross: [n_r * ia.cross + n_t * ib.cross, nt2 * ib.cross],
        }
    }

    /// `(phi_theta, varpi_phi, chi)` without the `kappa |alpha|^2` factor.
    pub fn terms(&self, c: f64, rho: f64) -> (f64, f64, f64) {
        (
            c * self.theta[0] + rho * self.theta[1],
            c * self.phi[0] + rho * self.phi[1],
            c * self.cross[0] + rho * self.cross[1],
        )
    }

    pub fn crlb(&self, c: f64, rho: f64) -> Result<CrlbPair> {
        let (t, p, x) = self.terms(c, rho);
        schur_pair(self.gain * t, self.gain * p, self.gain * x)
    }
}

/// Closed-form CRLBs for a sensing beam aligned with the target.
///
/// Depends on the allocation only through `xi_bf^T gamma` and `rho`.
pub fn crlb_simplified(
    ls: &LargeScaleSet,
    scheme: Scheme,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
) -> Result<CrlbPair> {
    let xb = xi_bf(ls, scheme, cfg.n_t())?;
    let c = comm_power_factor(&xb, &alloc.gamma);
    AlignedFisher::new(cfg).crlb(c, alloc.rho)
}

/// Received radar echo together with the transmitted symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarEcho {
    /// `N_r x L` echo `Y = alpha b a^H F S + N`.
    pub y: DMatrix<Complex64>,
    /// `K x L` unit-power symbols `S`.
    pub symbols: DMatrix<Complex64>,
}

/// Synthesizes one frame of the echo at the true target angles.
pub fn synthesize_echo<R: Rng + ?Sized>(precoders: &PrecoderSet, cfg: &SystemConfig, rng: &mut R) -> RadarEcho {
    let k = precoders.f.ncols();
    let l = cfg.l;
    let n_r = cfg.n_r();
    let symbols = DMatrix::from_fn(k, l, |_, _| cn01(rng));
    let x = &precoders.f * &symbols;
    let a = steering(cfg.tx, cfg.target);
    let b = steering(cfg.rx, cfg.target);
    // a^H x_l for every symbol
    let ax: Vec<Complex64> = (0..l).map(|c| inner(&a, x.column(c).as_slice())).collect();
    let sn = libm::sqrt(cfg.sigma_s2);
    let y = DMatrix::from_fn(n_r, l, |i, c| cfg.alpha * b[i] * ax[c] + cn01(rng) * sn);
    RadarEcho { y, symbols }
}

/// Grid and refinement settings for the MLE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub grid_step: f64,
    /// Half-width of the search window around the nominal target; `None` searches
    /// the full angle range.
    pub window: Option<f64>,
    /// Polish the grid minimizer with a local pattern search on the same likelihood.
    pub refine: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            grid_step: PI / 256.0,
            window: Some(10f64.to_radians()),
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleEstimate {
    pub angles: Angles,
    pub alpha: Complex64,
}

struct Likelihood {
    m: DMatrix<Complex64>,
    q: DMatrix<Complex64>,
    cfg_tx: crate::geometry::UpaSpec,
    cfg_rx: crate::geometry::UpaSpec,
}

impl Likelihood {
    /// `(|b^H M a|^2 / (a^H Q a), b^H M a, a^H Q a)`; larger is a better fit.
    fn eval(&self, ang: Angles) -> (f64, Complex64, f64) {
        let a = DVector::from_vec(steering(self.cfg_tx, ang).into_vec());
        let b = DVector::from_vec(steering(self.cfg_rx, ang).into_vec());
        let ma = &self.m * &a;
        let bma = b.dotc(&ma);
        let qa = &self.q * &a;
        let aqa = a.dotc(&qa).re;
        if aqa <= 0.0 {
            return (0.0, bma, aqa);
        }
        (bma.norm_sqr() / aqa, bma, aqa)
    }
}

fn axis_grid(center: f64, lo: f64, hi: f64, step: f64, window: Option<f64>) -> Vec<f64> {
    match window {
        Some(w) => {
            let n = libm::floor(w / step + 1e-9) as i64;
            (-n..=n)
                .map(|i| center + i as f64 * step)
                .filter(|x| (lo..=hi).contains(x))
                .collect()
        }
        None => {
            let n = libm::floor((hi - lo) / step + 1e-9) as i64;
            (0..=n).map(|i| lo + i as f64 * step).collect()
        }
    }
}

/// Least-squares angle estimate with the reflection coefficient profiled out.
///
/// For each candidate `(theta, phi)`, `alpha_hat = x_s^H y_s / ||x_s||^2`, so
/// minimizing the residual is maximizing `|b^H Y X^H a|^2 / (N_r a^H X X^H a)`.
pub fn mle_grid_search(
    echo: &RadarEcho,
    precoders: &PrecoderSet,
    cfg: &SystemConfig,
    opts: &MleOptions,
) -> Result<MleEstimate> {
    if !(opts.grid_step > 0.0) {
        return Err(Error::InvalidArgument("grid step must be positive".into()));
    }
    let x = &precoders.f * &echo.symbols;
    let lik = Likelihood {
        m: &echo.y * x.adjoint(),
        q: &x * x.adjoint(),
        cfg_tx: cfg.tx,
        cfg_rx: cfg.rx,
    };
    let thetas = axis_grid(cfg.target.theta, -PI, PI, opts.grid_step, opts.window);
    let phis = axis_grid(cfg.target.phi, -FRAC_PI_2, FRAC_PI_2, opts.grid_step, opts.window);
    let mut best = (f64::NEG_INFINITY, cfg.target);
    for &t in &thetas {
        for &p in &phis {
            let ang = Angles { theta: t, phi: p };
            let (f, _, _) = lik.eval(ang);
            if f > best.0 {
                best = (f, ang);
            }
        }
    }
    if opts.refine {
        best = pattern_search(&lik, best, opts.grid_step / 2.0);
    }
    let (_, bma, aqa) = lik.eval(best.1);
    let n_r = cfg.n_r() as f64;
    let alpha = if aqa > 0.0 { bma / (n_r * aqa) } else { Complex64::new(0.0, 0.0) };
    Ok(MleEstimate { angles: best.1, alpha })
}

fn pattern_search(lik: &Likelihood, start: (f64, Angles), mut h: f64) -> (f64, Angles) {
    let mut best = start;
    while h > 1e-11 {
        let c = best.1;
        let mut moved = false;
        for dt in [-1.0, 0.0, 1.0] {
            for dp in [-1.0, 0.0, 1.0] {
                if dt == 0.0 && dp == 0.0 {
                    continue;
                }
                let ang = Angles {
                    theta: (c.theta + dt * h).clamp(-PI, PI),
                    phi: (c.phi + dp * h).clamp(-FRAC_PI_2, FRAC_PI_2),
                };
                let (f, _, _) = lik.eval(ang);
                if f > best.0 {
                    best = (f, ang);
                    moved = true;
                }
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    best
}
