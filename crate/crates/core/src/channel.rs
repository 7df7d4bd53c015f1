//! Scenario constants, large-scale fading, MMSE estimate statistics and
//! small-scale Rayleigh draws.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{Angles, UpaSpec};
use crate::rng::cn01;

/// All constants of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub tx: UpaSpec,
    pub rx: UpaSpec,
    /// Number of users `K`.
    pub k: usize,
    /// Frame length `L` in symbols.
    pub l: usize,
    /// Coherence interval `tau_c` in symbols.
    pub tau_c: usize,
    /// Pilot length `tau_p` in symbols.
    pub tau_p: usize,
    /// Pilot symbol power (linear).
    pub p_p: f64,
    pub sigma_c2: f64,
    pub sigma_s2: f64,
    /// Transmit power budget `P_t` (linear).
    pub p_t: f64,
    /// Complex reflection coefficient of the target.
    pub alpha: Complex64,
    pub target: Angles,
    pub cell_radius_m: f64,
    pub r_h_m: f64,
    /// Path-loss exponent `nu`.
    pub nu: f64,
    pub sigma_shadow_db: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let a = libm::sqrt(1e-3) * FRAC_1_SQRT_2;
        Self {
            tx: UpaSpec { n_h: 15, n_v: 15 },
            rx: UpaSpec { n_h: 5, n_v: 5 },
            k: 12,
            l: 30,
            tau_c: 100,
            tau_p: 10,
            p_p: 1000.0,
            sigma_c2: 1.0,
            sigma_s2: 1.0,
            p_t: 10.0,
            alpha: Complex64::new(a, a),
            target: Angles { theta: PI / 8.0, phi: PI / 4.0 },
            cell_radius_m: 1000.0,
            r_h_m: 100.0,
            nu: 3.2,
            sigma_shadow_db: 7.0,
            seed: 0,
        }
    }
}

impl SystemConfig {
    pub fn n_t(&self) -> usize {
        self.tx.len()
    }

    pub fn n_r(&self) -> usize {
        self.rx.len()
    }

    /// Fraction of the coherence interval left for data, `(tau_c - tau_p) / tau_c`.
    pub fn tau_bar(&self) -> f64 {
        (self.tau_c - self.tau_p) as f64 / self.tau_c as f64
    }

    /// `kappa = 2 L / sigma_s^2`.
    pub fn kappa(&self) -> f64 {
        2.0 * self.l as f64 / self.sigma_s2
    }

    /// Sensing SNR `P_t L |alpha|^2 / sigma_s^2`.
    pub fn sensing_snr(&self) -> f64 {
        self.p_t * self.l as f64 * self.alpha.norm_sqr() / self.sigma_s2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        UpaSpec::new(self.tx.n_h, self.tx.n_v)?;
        UpaSpec::new(self.rx.n_h, self.rx.n_v)?;
        Angles::new(self.target.theta, self.target.phi)?;
        if self.k == 0 || self.l == 0 || self.tau_p == 0 {
            return bad(format!("K, L and tau_p must be positive (K = {}, L = {}, tau_p = {})", self.k, self.l, self.tau_p));
        }
        if self.tau_p >= self.tau_c {
            return bad(format!("tau_p = {} must be below tau_c = {}", self.tau_p, self.tau_c));
        }
        for (name, v) in [
            ("p_p", self.p_p),
            ("sigma_c2", self.sigma_c2),
            ("sigma_s2", self.sigma_s2),
            ("p_t", self.p_t),
            ("cell_radius_m", self.cell_radius_m),
            ("r_h_m", self.r_h_m),
            ("nu", self.nu),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.sigma_shadow_db >= 0.0) {
            return bad(format!("sigma_shadow_db must be nonnegative, got {}", self.sigma_shadow_db));
        }
        if self.r_h_m > self.cell_radius_m {
            return bad(format!(
                "minimum distance {} exceeds cell radius {}",
                self.r_h_m, self.cell_radius_m
            ));
        }
        if !(self.alpha.re.is_finite() && self.alpha.im.is_finite()) {
            return bad(format!("alpha must be finite, got {}", self.alpha));
        }
        Ok(())
    }
}

/// Per-user large-scale gains and MMSE estimate statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleSet {
    pub beta: Vec<f64>,
    /// Estimate variances `xi_k`.
    pub xi: Vec<f64>,
    /// Error variances `eps_k = beta_k - xi_k`.
    pub eps: Vec<f64>,
    /// Pilot index of each user, `0..tau_p` (round-robin).
    pub pilot_group: Vec<usize>,
}

impl LargeScaleSet {
    /// Builds estimate statistics from given gains with round-robin pilots.
    pub fn from_gains(beta: Vec<f64>, tau_p: usize, p_p: f64, sigma_c2: f64) -> Result<Self> {
        if beta.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidArgument("large-scale gains must be positive".into()));
        }
        if tau_p == 0 {
            return Err(Error::InvalidArgument("tau_p must be positive".into()));
        }
        let pilot_group: Vec<usize> = (0..beta.len()).map(|k| k % tau_p).collect();
        let tp = tau_p as f64 * p_p;
        let mut xi = Vec::with_capacity(beta.len());
        let mut eps = Vec::with_capacity(beta.len());
        for (k, &b) in beta.iter().enumerate() {
            let contaminated: f64 = beta
                .iter()
                .zip(&pilot_group)
                .filter(|(_, &g)| g == pilot_group[k])
                .map(|(&bj, _)| bj)
                .sum();
            let x = tp * b * b / (tp * contaminated + sigma_c2);
            xi.push(x);
            eps.push(b - x);
        }
        Ok(Self { beta, xi, eps, pilot_group })
    }

    pub fn k(&self) -> usize {
        self.beta.len()
    }
}

/// Draws user positions and shadowing, then the estimate statistics.
///
/// Distances are uniform in area over the annulus `[r_h, cell_radius]`;
/// shadowing is log-normal with `sigma_shadow_db`.
pub fn draw_large_scale<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<LargeScaleSet> {
    cfg.validate()?;
    let (rh, rc) = (cfg.r_h_m, cfg.cell_radius_m);
    let beta: Vec<f64> = (0..cfg.k)
        .map(|_| {
            let u: f64 = rng.random();
            let r = libm::sqrt(rh * rh + u * (rc * rc - rh * rh));
            let n: f64 = rng.sample(StandardNormal);
            let z = libm::pow(10.0, cfg.sigma_shadow_db * n / 10.0);
            z / libm::pow(r / rh, cfg.nu)
        })
        .collect();
    LargeScaleSet::from_gains(beta, cfg.tau_p, cfg.p_p, cfg.sigma_c2)
}

/// Channel estimates and estimation errors for one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `N_t x K` estimates.
    pub h_hat: DMatrix<Complex64>,
    /// `N_t x K` estimation errors.
    pub e: DMatrix<Complex64>,
}

impl ChannelRealization {
    /// True channel `h = h_hat + e`.
    pub fn channel(&self) -> DMatrix<Complex64> {
        &self.h_hat + &self.e
    }
}

/// Draws `h_hat_k ~ CN(0, xi_k I)` and independent `e_k ~ CN(0, eps_k I)`.
pub fn draw_small_scale<R: Rng + ?Sized>(n_t: usize, ls: &LargeScaleSet, rng: &mut R) -> ChannelRealization {
    let k = ls.k();
    let mut h_hat = DMatrix::zeros(n_t, k);
    let mut e = DMatrix::zeros(n_t, k);
    for j in 0..k {
        let sx = libm::sqrt(ls.xi[j]);
        let se = libm::sqrt(ls.eps[j]);
        for i in 0..n_t {
            h_hat[(i, j)] = cn01(rng) * sx;
        }
        for i in 0..n_t {
            e[(i, j)] = cn01(rng) * se;
        }
    }
    ChannelRealization { h_hat, e }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    #[test]
    fn distinct_pilots_formula() {
        let beta = vec![0.5, 2.0, 1e-3];
        let ls = LargeScaleSet::from_gains(beta.clone(), 10, 1000.0, 1.0).unwrap();
        for k in 0..3 {
            let want = 10.0 * 1000.0 * beta[k] * beta[k] / (10.0 * 1000.0 * beta[k] + 1.0);
            assert!((ls.xi[k] - want).abs() <= 1e-15 * want);
            assert!(ls.xi[k] > 0.0 && ls.xi[k] <= beta[k]);
            assert!((ls.xi[k] + ls.eps[k] - beta[k]).abs() <= 2.0 * f64::EPSILON * beta[k]);
        }
    }

    #[test]
    fn shared_pilot_formula() {
        // tau_p p_p = 10 with tau_p = 1, two users on the same pilot.
        let ls = LargeScaleSet::from_gains(vec![1.0, 1.0], 1, 10.0, 1.0).unwrap();
        assert_eq!(ls.pilot_group, vec![0, 0]);
        assert!((ls.xi[0] - 10.0 / 21.0).abs() < 1e-15);
        assert!((ls.xi[1] - 10.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_csi_limit() {
        let ls = LargeScaleSet::from_gains(vec![0.3, 0.01], 10, 1e15, 1.0).unwrap();
        for k in 0..2 {
            assert!((ls.xi[k] - ls.beta[k]).abs() < 1e-9 * ls.beta[k]);
            assert!(ls.eps[k] < 1e-9 * ls.beta[k]);
        }
    }

    #[test]
    fn estimate_quality_grows_with_pilot_power() {
        let beta = vec![0.2, 0.05, 1e-4];
        let mut prev: Option<LargeScaleSet> = None;
        for pp in [1.0, 10.0, 100.0, 1000.0] {
            let ls = LargeScaleSet::from_gains(beta.clone(), 2, pp, 1.0).unwrap();
            if let Some(p) = &prev {
                for k in 0..3 {
                    assert!(ls.xi[k] > p.xi[k]);
                    assert!(ls.eps[k] < p.eps[k]);
                }
            }
            prev = Some(ls);
        }
    }

    #[test]
    fn large_scale_is_deterministic_and_in_range() {
        let cfg = SystemConfig::default();
        let a = draw_large_scale(&cfg, &mut stream(3, Domain::LargeScale, 0)).unwrap();
        let b = draw_large_scale(&cfg, &mut stream(3, Domain::LargeScale, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pilot_group[10], 0);
        assert_eq!(a.pilot_group[11], 1);
        for k in 0..cfg.k {
            assert!(a.xi[k] > 0.0 && a.xi[k] <= a.beta[k]);
        }
    }

    #[test]
    fn zero_error_variance_gives_zero_error() {
        let ls = LargeScaleSet {
            beta: vec![1.0],
            xi: vec![1.0],
            eps: vec![0.0],
            pilot_group: vec![0],
        };
        let r = draw_small_scale(8, &ls, &mut stream(0, Domain::SmallScale, 0));
        assert!(r.e.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn small_scale_variances() {
        let ls = LargeScaleSet::from_gains(vec![2.0, 0.5], 10, 0.05, 1.0).unwrap();
        let mut rng = stream(11, Domain::SmallScale, 0);
        let draws = 100_000 / 4;
        let n_t = 4;
        let mut acc = [[0.0; 3]; 2];
        for _ in 0..draws {
            let r = draw_small_scale(n_t, &ls, &mut rng);
            let h = r.channel();
            for k in 0..2 {
                for i in 0..n_t {
                    acc[k][0] += r.h_hat[(i, k)].norm_sqr();
                    acc[k][1] += r.e[(i, k)].norm_sqr();
                    acc[k][2] += h[(i, k)].norm_sqr();
                }
            }
        }
        let n = (draws * n_t) as f64;
        for k in 0..2 {
            assert!((acc[k][0] / n / ls.xi[k] - 1.0).abs() < 0.02);
            assert!((acc[k][1] / n / ls.eps[k] - 1.0).abs() < 0.02);
            assert!((acc[k][2] / n / ls.beta[k] - 1.0).abs() < 0.02);
        }
    }
}
