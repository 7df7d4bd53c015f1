//! MRT/ZF precoders, the sensing beam and transmit power accounting.
//!
//! The dual-function precoder is `F = W diag(sqrt(gamma)) + v eta^T`. Only
//! `rho = sum eta_k` enters the analysis; when an explicit `eta` is needed the
//! sensing power is split evenly, `eta_k = rho / K`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::{ChannelRealization, LargeScaleSet, SystemConfig};
use crate::error::{Error, Result};
use crate::geometry::{steering, Angles, UpaSpec};

/// Communications precoding scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Mrt,
    Zf,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Mrt => "mrt",
            Scheme::Zf => "zf",
        }
    }
}

/// Per-user communications power factors `gamma` and total sensing power `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub gamma: Vec<f64>,
    pub rho: f64,
}

impl PowerAllocation {
    pub fn new(gamma: Vec<f64>, rho: f64) -> Result<Self> {
        if gamma.iter().any(|&g| !(g >= 0.0 && g.is_finite())) || !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "power factors must be finite and nonnegative (rho = {rho})"
            )));
        }
        Ok(Self { gamma, rho })
    }

    /// Evenly split sensing amplitudes `sqrt(rho / K)`.
    pub fn eta_amplitudes(&self) -> Vec<f64> {
        let k = self.gamma.len().max(1) as f64;
        alloc::vec![libm::sqrt(self.rho / k); self.gamma.len()]
    }

    /// Multiplies every power factor by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            gamma: self.gamma.iter().map(|g| g * c).collect(),
            rho: self.rho * c,
        }
    }
}

/// The precoder matrices of one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub w: DMatrix<Complex64>,
    pub v: DVector<Complex64>,
    pub f: DMatrix<Complex64>,
    pub scheme: Scheme,
}

pub(crate) fn check_zf(scheme: Scheme, n_t: usize, k: usize) -> Result<()> {
    if scheme == Scheme::Zf && n_t <= k {
        return Err(Error::ZfDimension { n_t, k });
    }
    Ok(())
}

/// `Hhat (Hhat^H Hhat)^-1` via a Cholesky factorization of the Gram matrix.
pub fn zf_matrix(h_hat: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let gram = h_hat.adjoint() * h_hat;
    let chol = gram.cholesky().ok_or(Error::DegenerateChannel)?;
    let inv = chol.inverse();
    Ok(h_hat * inv)
}

/// Builds `W`, the sensing beam `v = a(v_angles)` and `F`.
pub fn build_precoder(
    real: &ChannelRealization,
    scheme: Scheme,
    alloc: &PowerAllocation,
    tx: UpaSpec,
    v_angles: Angles,
) -> Result<PrecoderSet> {
    let (n_t, k) = real.h_hat.shape();
    if tx.len() != n_t {
        return Err(Error::InvalidArgument(format!(
            "array has {} elements but channel has {n_t} rows",
            tx.len()
        )));
    }
    if alloc.gamma.len() != k {
        return Err(Error::InvalidArgument(format!(
            "allocation has {} users, channel has {k}",
            alloc.gamma.len()
        )));
    }
    check_zf(scheme, n_t, k)?;
    let w = match scheme {
        Scheme::Mrt => real.h_hat.clone(),
        Scheme::Zf => zf_matrix(&real.h_hat)?,
    };
    let v = DVector::from_vec(steering(tx, v_angles).into_vec());
    let eta = alloc.eta_amplitudes();
    let mut f = w.clone();
    for j in 0..k {
        let g = libm::sqrt(alloc.gamma[j]);
        for i in 0..n_t {
            f[(i, j)] = f[(i, j)] * g + v[i] * eta[j];
        }
    }
    Ok(PrecoderSet { w, v, f, scheme })
}

/// Effective per-user precoder power coefficients `xi_bf`.
///
/// MRT: `xi_k`; ZF: `1 / (N_t (N_t - K) xi_k)`.
pub fn xi_bf(ls: &LargeScaleSet, scheme: Scheme, n_t: usize) -> Result<Vec<f64>> {
    let k = ls.k();
    check_zf(scheme, n_t, k)?;
    Ok(match scheme {
        Scheme::Mrt => ls.xi.clone(),
        Scheme::Zf => {
            let d = (n_t * (n_t - k)) as f64;
            ls.xi.iter().map(|x| 1.0 / (d * x)).collect()
        }
    })
}

/// `xi_bf^T gamma`, the per-antenna communications power.
pub fn comm_power_factor(xi_bf: &[f64], gamma: &[f64]) -> f64 {
    xi_bf.iter().zip(gamma).map(|(x, g)| x * g).sum()
}

/// Expected transmit power `N_t xi_bf^T gamma + N_t rho`.
pub fn total_power(ls: &LargeScaleSet, scheme: Scheme, alloc: &PowerAllocation, n_t: usize) -> Result<f64> {
    let xb = xi_bf(ls, scheme, n_t)?;
    let n = n_t as f64;
    Ok(n * comm_power_factor(&xb, &alloc.gamma) + n * alloc.rho)
}

/// Equal split: half the budget to sensing, half shared equally among users.
pub fn equal_power_allocation(ls: &LargeScaleSet, scheme: Scheme, cfg: &SystemConfig) -> Result<PowerAllocation> {
    let n_t = cfg.n_t();
    let xb = xi_bf(ls, scheme, n_t)?;
    let n = n_t as f64;
    let s: f64 = xb.iter().sum();
    let g = cfg.p_t / (2.0 * n * s);
    PowerAllocation::new(alloc::vec![g; ls.k()], cfg.p_t / (2.0 * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_small_scale;
    use crate::rng::{stream, Domain};

    fn ls4() -> LargeScaleSet {
        LargeScaleSet::from_gains(vec![1.0, 0.4, 0.1, 0.02], 10, 100.0, 1.0).unwrap()
    }

    fn tx() -> UpaSpec {
        UpaSpec::new(4, 4).unwrap()
    }

    fn ang() -> Angles {
        Angles::new(0.4, 0.8).unwrap()
    }

    #[test]
    fn single_user_mrt_is_channel_estimate() {
        let ls = LargeScaleSet::from_gains(vec![0.5], 10, 100.0, 1.0).unwrap();
        let r = draw_small_scale(16, &ls, &mut stream(0, Domain::SmallScale, 0));
        let a = PowerAllocation::new(vec![1.0], 0.0).unwrap();
        let p = build_precoder(&r, Scheme::Mrt, &a, tx(), ang()).unwrap();
        assert_eq!(p.f, r.h_hat);
    }

    #[test]
    fn zf_inverts_estimates() {
        let ls = ls4();
        let r = draw_small_scale(16, &ls, &mut stream(1, Domain::SmallScale, 0));
        let a = PowerAllocation::new(vec![0.3, 1.0, 2.0, 0.5], 0.7).unwrap();
        let p = build_precoder(&r, Scheme::Zf, &a, tx(), ang()).unwrap();
        let hw = r.h_hat.adjoint() * &p.w;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((hw[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-8);
            }
        }
        let hf = r.h_hat.adjoint() * &p.f;
        let hv = r.h_hat.adjoint() * &p.v;
        let eta = libm::sqrt(0.7 / 4.0);
        for i in 0..4 {
            for j in 0..4 {
                let d = if i == j { libm::sqrt(a.gamma[i]) } else { 0.0 };
                let want = Complex64::new(d, 0.0) + hv[i] * eta;
                assert!((hf[(i, j)] - want).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn no_sensing_power_ignores_beam_direction() {
        let ls = ls4();
        let r = draw_small_scale(16, &ls, &mut stream(2, Domain::SmallScale, 0));
        let a = PowerAllocation::new(vec![1.0; 4], 0.0).unwrap();
        let p1 = build_precoder(&r, Scheme::Zf, &a, tx(), ang()).unwrap();
        let p2 = build_precoder(&r, Scheme::Zf, &a, tx(), Angles::new(-1.0, 0.1).unwrap()).unwrap();
        assert_eq!(p1.f, p2.f);
    }

    #[test]
    fn xi_bf_values() {
        let ls = ls4();
        assert_eq!(xi_bf(&ls, Scheme::Mrt, 16).unwrap(), ls.xi);
        let uniform = LargeScaleSet { beta: vec![1.0; 5], xi: vec![0.5; 5], eps: vec![0.5; 5], pilot_group: vec![0; 5] };
        for x in xi_bf(&uniform, Scheme::Zf, 25).unwrap() {
            assert!((x - 0.004).abs() < 1e-18);
        }
        assert_eq!(xi_bf(&ls, Scheme::Zf, 4), Err(Error::ZfDimension { n_t: 4, k: 4 }));
    }

    #[test]
    fn power_edge_cases() {
        let ls = ls4();
        let zero = PowerAllocation::new(vec![0.0; 4], 0.0).unwrap();
        assert_eq!(total_power(&ls, Scheme::Mrt, &zero, 16).unwrap(), 0.0);
        let p_t = 10.0;
        let sense = PowerAllocation::new(vec![0.0; 4], p_t / 16.0).unwrap();
        assert_eq!(total_power(&ls, Scheme::Zf, &sense, 16).unwrap(), p_t);
    }

    #[test]
    fn equal_split_uses_whole_budget() {
        let cfg = SystemConfig { tx: tx(), k: 4, p_t: 31.6, ..SystemConfig::default() };
        let ls = ls4();
        for s in [Scheme::Mrt, Scheme::Zf] {
            let a = equal_power_allocation(&ls, s, &cfg).unwrap();
            let p = total_power(&ls, s, &a, 16).unwrap();
            assert!((p - 31.6).abs() < 1e-12);
        }
    }
}
