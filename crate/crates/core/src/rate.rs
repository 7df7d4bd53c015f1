//! Achievable downlink rates: the closed form and its Monte-Carlo counterpart.
//!
//! The closed form reads
//! `SINR_k = lambda_k gamma_k / (N_t beta_k rho + N_t zeta_k^T gamma + sigma_c^2)`
//! with `lambda_k = N_t^2 xi_k^2`, `zeta_k = beta_k xi` for MRT and
//! `lambda_k = 1`, `zeta_k = eps_k / (N_t (N_t - K)) [1/xi_j]` for ZF.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{draw_small_scale, LargeScaleSet, SystemConfig};
use crate::error::{Error, Result};
use crate::precoding::{build_precoder, check_zf, equal_power_allocation, PowerAllocation, Scheme};
use crate::rng::{stream, Domain};
use crate::sum::{KahanComplex, KahanSum};

/// Per-user and total rates in bit/s/Hz, including the `tau_bar` prefactor.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub sinr: Vec<f64>,
}

impl RateReport {
    pub fn from_sinr(sinr: Vec<f64>, tau_bar: f64) -> Self {
        let per_user_rate: Vec<f64> = sinr.iter().map(|s| tau_bar * libm::log2(1.0 + s)).collect();
        let sum_rate = per_user_rate.iter().sum();
        Self { per_user_rate, sum_rate, sinr }
    }
}

/// Coefficients of the closed-form SINR for one large-scale set and scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    pub lambda: Vec<f64>,
    /// Row `k` holds `zeta_k`.
    pub zeta: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub n_t: f64,
    pub sigma_c2: f64,
    pub tau_bar: f64,
}

impl RateModel {
    pub fn new(ls: &LargeScaleSet, scheme: Scheme, cfg: &SystemConfig) -> Result<Self> {
        let n_t = cfg.n_t();
        let k = ls.k();
        check_zf(scheme, n_t, k)?;
        let n = n_t as f64;
        let (lambda, zeta) = match scheme {
            Scheme::Mrt => (
                ls.xi.iter().map(|x| n * n * x * x).collect(),
                ls.beta.iter().map(|b| ls.xi.iter().map(|x| b * x).collect()).collect(),
            ),
            Scheme::Zf => {
                let d = n * (n_t - k) as f64;
                (
                    vec![1.0; k],
                    ls.eps.iter().map(|e| ls.xi.iter().map(|x| e / (d * x)).collect()).collect(),
                )
            }
        };
        Ok(Self {
            lambda,
            zeta,
            beta: ls.beta.clone(),
            n_t: n,
            sigma_c2: cfg.sigma_c2,
            tau_bar: cfg.tau_bar(),
        })
    }

    pub fn k(&self) -> usize {
        self.lambda.len()
    }

    /// Interference-plus-noise term `N_t beta_k rho + N_t zeta_k^T gamma + sigma_c^2`.
    pub fn denominator(&self, k: usize, alloc: &PowerAllocation) -> f64 {
        let zg: f64 = self.zeta[k].iter().zip(&alloc.gamma).map(|(z, g)| z * g).sum();
        self.n_t * self.beta[k] * alloc.rho + self.n_t * zg + self.sigma_c2
    }

    pub fn sinr(&self, alloc: &PowerAllocation) -> Vec<f64> {
        (0..self.k())
            .map(|k| self.lambda[k] * alloc.gamma[k] / self.denominator(k, alloc))
            .collect()
    }

    pub fn report(&self, alloc: &PowerAllocation) -> RateReport {
        RateReport::from_sinr(self.sinr(alloc), self.tau_bar)
    }

    pub fn sum_rate(&self, alloc: &PowerAllocation) -> f64 {
        self.report(alloc).sum_rate
    }
}

fn check_alloc(ls: &LargeScaleSet, alloc: &PowerAllocation) -> Result<()> {
    if alloc.gamma.len() != ls.k() {
        return Err(Error::InvalidArgument(alloc::format!(
            "allocation has {} users, large-scale set has {}",
            alloc.gamma.len(),
            ls.k()
        )));
    }
    Ok(())
}

/// Closed-form achievable rate.
pub fn closed_form_rate(
    ls: &LargeScaleSet,
    scheme: Scheme,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
) -> Result<RateReport> {
    check_alloc(ls, alloc)?;
    Ok(RateModel::new(ls, scheme, cfg)?.report(alloc))
}

/// Rates at the equal split, from the dedicated equal-power expressions.
pub fn equal_power_rates(ls: &LargeScaleSet, scheme: Scheme, cfg: &SystemConfig) -> Result<RateReport> {
    let n_t = cfg.n_t();
    let k = ls.k();
    check_zf(scheme, n_t, k)?;
    let n = n_t as f64;
    let p = cfg.p_t;
    let s2 = cfg.sigma_c2;
    let sinr = match scheme {
        Scheme::Mrt => {
            let sx: f64 = ls.xi.iter().sum();
            (0..k)
                .map(|i| n * ls.xi[i] * ls.xi[i] * p / (2.0 * (ls.beta[i] * p + s2) * sx))
                .collect()
        }
        Scheme::Zf => {
            let sinv: f64 = ls.xi.iter().map(|x| 1.0 / x).sum();
            (0..k)
                .map(|i| (n - k as f64) * p / (((ls.beta[i] + ls.eps[i]) * p + 2.0 * s2) * sinv))
                .collect()
        }
    };
    Ok(RateReport::from_sinr(sinr, cfg.tau_bar()))
}

/// Allocation and closed-form rates of the equal split.
pub fn equal_power_point(ls: &LargeScaleSet, scheme: Scheme, cfg: &SystemConfig) -> Result<(PowerAllocation, RateReport)> {
    let a = equal_power_allocation(ls, scheme, cfg)?;
    let r = closed_form_rate(ls, scheme, &a, cfg)?;
    Ok((a, r))
}

/// Draws per Monte-Carlo batch; each batch owns one RNG stream.
pub const MC_BATCH: usize = 256;

/// Running sums of `h_k^H f_j` statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAccumulator {
    k: usize,
    n: u64,
    /// `sum h_k^H f_k`
    ds: Vec<KahanComplex>,
    /// `sum |h_k^H f_j|^2`, row-major `k * K + j`.
    power: Vec<KahanSum>,
}

impl RateAccumulator {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            n: 0,
            ds: vec![KahanComplex::default(); k],
            power: vec![KahanSum::default(); k * k],
        }
    }

    pub fn draws(&self) -> u64 {
        self.n
    }

    /// Adds one realization; `g[(k, j)] = h_k^H f_j`.
    pub fn push(&mut self, g: &nalgebra::DMatrix<Complex64>) {
        for k in 0..self.k {
            self.ds[k].add(g[(k, k)]);
            for j in 0..self.k {
                self.power[k * self.k + j].add(g[(k, j)].norm_sqr());
            }
        }
        self.n += 1;
    }

    pub fn merge(&mut self, other: &RateAccumulator) {
        for (a, b) in self.ds.iter_mut().zip(&other.ds) {
            a.merge(b);
        }
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            a.merge(b);
        }
        self.n += other.n;
    }

    /// SINR from sample moments: `|DS|^2 / (BU + sum_{j != k} UI + sigma_c^2)`.
    pub fn sinr(&self, sigma_c2: f64) -> Vec<f64> {
        let n = self.n as f64;
        (0..self.k)
            .map(|k| {
                let ds = self.ds[k].value() / n;
                let e0 = self.power[k * self.k + k].value() / n;
                let bu = (e0 - ds.norm_sqr()).max(0.0);
                let ui: f64 = (0..self.k)
                    .filter(|&j| j != k)
                    .map(|j| self.power[k * self.k + j].value() / n)
                    .sum();
                ds.norm_sqr() / (bu + ui + sigma_c2)
            })
            .collect()
    }
}

/// Accumulates `draws` realizations of batch `batch` (stream index) into a fresh accumulator.
pub fn monte_carlo_batch(
    ls: &LargeScaleSet,
    scheme: Scheme,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    seed: u64,
    batch: u64,
    draws: usize,
) -> Result<RateAccumulator> {
    let mut rng = stream(seed, Domain::SmallScale, batch);
    let mut acc = RateAccumulator::new(ls.k());
    for _ in 0..draws {
        accumulate_draw(ls, scheme, alloc, cfg, &mut rng, &mut acc)?;
    }
    Ok(acc)
}

fn accumulate_draw<R: Rng + ?Sized>(
    ls: &LargeScaleSet,
    scheme: Scheme,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    rng: &mut R,
    acc: &mut RateAccumulator,
) -> Result<()> {
    let real = draw_small_scale(cfg.n_t(), ls, rng);
    let pre = build_precoder(&real, scheme, alloc, cfg.tx, cfg.target)?;
    let g = real.channel().adjoint() * &pre.f;
    acc.push(&g);
    Ok(())
}

/// Splits `draws` into `(batch index, batch size)` pairs.
pub fn batches(draws: usize) -> Vec<(u64, usize)> {
    let mut out = Vec::new();
    let mut left = draws;
    let mut b = 0u64;
    while left > 0 {
        let n = left.min(MC_BATCH);
        out.push((b, n));
        left -= n;
        b += 1;
    }
    out
}

/// Monte-Carlo estimate of the achievable rate from the DS/BU/UI decomposition.
///
/// Realizations come from batch streams derived from `seed`, so the same seed
/// gives the same realization set for any allocation (common random numbers).
pub fn monte_carlo_rate(
    ls: &LargeScaleSet,
    scheme: Scheme,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    draws: usize,
    seed: u64,
) -> Result<RateReport> {
    if draws == 0 {
        return Err(Error::InvalidArgument("draws must be at least 1".into()));
    }
    check_alloc(ls, alloc)?;
    check_zf(scheme, cfg.n_t(), ls.k())?;
    let mut acc = RateAccumulator::new(ls.k());
    for (b, n) in batches(draws) {
        acc.merge(&monte_carlo_batch(ls, scheme, alloc, cfg, seed, b, n)?);
    }
    Ok(RateReport::from_sinr(acc.sinr(cfg.sigma_c2), cfg.tau_bar()))
}
