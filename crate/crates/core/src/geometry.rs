//! Uniform planar array steering vectors and their angle derivatives.
//!
//! Elements sit on a half-wavelength grid with the array centre as phase
//! reference. For `N_x` elements along an axis the phase-slope vector is
//! `u_x = [-(N_x-1)/2, ..., (N_x-1)/2]` (half-integers when `N_x` is even).
//! The full response is `a = a_h ⊗ a_v`, horizontal-major: entry
//! `i * n_v + j` is `a_h[i] * a_v[j]`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Size of a uniform planar array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpaSpec {
    pub n_h: usize,
    pub n_v: usize,
}

impl UpaSpec {
    pub fn new(n_h: usize, n_v: usize) -> Result<Self> {
        if n_h == 0 || n_v == 0 {
            return Err(Error::InvalidConfig(format!(
                "array dimensions must be positive, got {n_h}x{n_v}"
            )));
        }
        Ok(Self { n_h, n_v })
    }

    /// Square `side x side` array.
    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, side)
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Azimuth `theta` and elevation `phi`, in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angles {
    pub theta: f64,
    pub phi: f64,
}

impl Angles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(-PI..=PI).contains(&theta) || !(-FRAC_PI_2..=FRAC_PI_2).contains(&phi) {
            return Err(Error::InvalidArgument(format!(
                "angles out of range: theta = {theta}, phi = {phi}"
            )));
        }
        Ok(Self { theta, phi })
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    /// Offsets both angles by the same amount, clamping into range.
    pub fn offset(&self, delta: f64) -> Self {
        Self {
            theta: (self.theta + delta).clamp(-PI, PI),
            phi: (self.phi + delta).clamp(-FRAC_PI_2, FRAC_PI_2),
        }
    }
}

/// Array response vector; every entry has unit modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(Vec<Complex64>);

impl SteeringVector {
    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl core::ops::Deref for SteeringVector {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

/// Derivative direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    Theta,
    Phi,
}

/// Centred phase-slope vector `u` for an axis with `n` elements.
pub fn phase_slopes(n: usize) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    (0..n).map(|m| m as f64 - c).collect()
}

/// `||u||^2 = n (n^2 - 1) / 12`.
pub fn phase_slope_energy(n: usize) -> f64 {
    let n = n as f64;
    n * (n * n - 1.0) / 12.0
}

fn axis_response(n: usize, spatial_freq: f64) -> Vec<Complex64> {
    phase_slopes(n)
        .into_iter()
        .map(|m| Complex64::cis(PI * m * spatial_freq))
        .collect()
}

fn kron(h: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(h.len() * v.len());
    for &x in h {
        for &y in v {
            out.push(x * y);
        }
    }
    out
}

fn horizontal_freq(ang: Angles) -> f64 {
    libm::sin(ang.theta) * libm::sin(ang.phi)
}

fn vertical_freq(ang: Angles) -> f64 {
    libm::cos(ang.phi)
}

/// Steering vector `a(theta, phi) = a_h ⊗ a_v`.
pub fn steering(spec: UpaSpec, ang: Angles) -> SteeringVector {
    let a_h = axis_response(spec.n_h, horizontal_freq(ang));
    let a_v = axis_response(spec.n_v, vertical_freq(ang));
    SteeringVector(kron(&a_h, &a_v))
}

/// Analytic derivative of the steering vector with respect to `wrt`.
pub fn steering_derivative(spec: UpaSpec, ang: Angles, wrt: Wrt) -> Vec<Complex64> {
    let a_h = axis_response(spec.n_h, horizontal_freq(ang));
    let a_v = axis_response(spec.n_v, vertical_freq(ang));
    let u_h = phase_slopes(spec.n_h);
    let u_v = phase_slopes(spec.n_v);
    let (st, ct) = (libm::sin(ang.theta), libm::cos(ang.theta));
    let (sp, cp) = (libm::sin(ang.phi), libm::cos(ang.phi));
    let j = Complex64::i();

    match wrt {
        Wrt::Theta => {
            let dh: Vec<Complex64> = a_h
                .iter()
                .zip(&u_h)
                .map(|(&x, &u)| j * (PI * ct * sp * u) * x)
                .collect();
            kron(&dh, &a_v)
        }
        Wrt::Phi => {
            let dh: Vec<Complex64> = a_h
                .iter()
                .zip(&u_h)
                .map(|(&x, &u)| j * (PI * st * cp * u) * x)
                .collect();
            let dv: Vec<Complex64> = a_v
                .iter()
                .zip(&u_v)
                .map(|(&x, &u)| -j * (PI * sp * u) * x)
                .collect();
            let mut out = kron(&dh, &a_v);
            for (o, t) in out.iter_mut().zip(kron(&a_h, &dv)) {
                *o += t;
            }
            out
        }
    }
}

/// Closed-form norms and cross term of one array's derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayIdentities {
    /// `||da/dtheta||^2`
    pub norm_theta: f64,
    /// `||da/dphi||^2`
    pub norm_phi: f64,
    /// `(da/dtheta)^H (da/dphi)`, which is real.
    pub cross: f64,
}

/// Derivative identities of a single array at `ang`.
///
/// The elevation norm carries `sin^2(phi)` on the vertical term, which is what
/// differentiating `exp(j pi m cos(phi))` produces.
pub fn array_identities(spec: UpaSpec, ang: Angles) -> ArrayIdentities {
    let n = spec.len() as f64;
    let (nh, nv) = (spec.n_h as f64, spec.n_v as f64);
    let gh = nh * nh - 1.0;
    let gv = nv * nv - 1.0;
    let (st, ct) = (libm::sin(ang.theta), libm::cos(ang.theta));
    let (sp, cp) = (libm::sin(ang.phi), libm::cos(ang.phi));
    let k = n * PI * PI / 12.0;
    ArrayIdentities {
        norm_theta: k * gh * ct * ct * sp * sp,
        norm_phi: k * (gh * st * st * cp * cp + gv * sp * sp),
        cross: k * gh * sp * st * cp * ct,
    }
}

/// The six derivative identities for the transmit (`a`) and receive (`b`) arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeIdentities {
    pub a: ArrayIdentities,
    pub b: ArrayIdentities,
}

pub fn derivative_identities(tx: UpaSpec, rx: UpaSpec, ang: Angles) -> DerivativeIdentities {
    DerivativeIdentities {
        a: array_identities(tx, ang),
        b: array_identities(rx, ang),
    }
}

/// `x^H y`.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// `||x||^2`.
pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_4;

    fn target() -> Angles {
        Angles::new(PI / 8.0, FRAC_PI_4).unwrap()
    }

    #[test]
    fn zero_phase_cases() {
        let a = steering(UpaSpec::new(2, 1).unwrap(), Angles::new(0.0, FRAC_PI_4).unwrap());
        assert_eq!(a.as_slice(), &[Complex64::new(1.0, 0.0); 2]);
        let a = steering(UpaSpec::new(1, 2).unwrap(), Angles::new(0.3, FRAC_PI_2).unwrap());
        for z in a.iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_direct_formula() {
        let spec = UpaSpec::square(5).unwrap();
        let ang = target();
        let a = steering(spec, ang);
        for ih in 0..5 {
            for iv in 0..5 {
                let mh = ih as f64 - 2.0;
                let mv = iv as f64 - 2.0;
                let phase = PI * mh * ang.theta.sin() * ang.phi.sin() + PI * mv * ang.phi.cos();
                let want = Complex64::new(phase.cos(), phase.sin());
                assert!((a[ih * 5 + iv] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn slope_energy() {
        assert_eq!(phase_slopes(3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(phase_slopes(2), vec![-0.5, 0.5]);
        let u = phase_slopes(3);
        assert_eq!(u.iter().map(|x| x * x).sum::<f64>(), 2.0);
        assert_eq!(phase_slope_energy(3), 2.0);
    }

    #[test]
    fn theta_derivative_vanishes_at_broadside_pole() {
        let spec = UpaSpec::new(4, 3).unwrap();
        let ang = Angles::new(FRAC_PI_2, 0.4).unwrap();
        let d = steering_derivative(spec, ang, Wrt::Theta);
        assert!(norm_sqr(&d) < 1e-28);
        let ids = array_identities(spec, ang);
        assert!(ids.norm_theta.abs() < 1e-28);
        assert!(ids.cross.abs() < 1e-12);
    }

    #[test]
    fn finite_differences() {
        let spec = UpaSpec::square(5).unwrap();
        let ang = target();
        let h = 1e-6;
        for wrt in [Wrt::Theta, Wrt::Phi] {
            let (p, m) = match wrt {
                Wrt::Theta => (
                    Angles { theta: ang.theta + h, ..ang },
                    Angles { theta: ang.theta - h, ..ang },
                ),
                Wrt::Phi => (Angles { phi: ang.phi + h, ..ang }, Angles { phi: ang.phi - h, ..ang }),
            };
            let ap = steering(spec, p);
            let am = steering(spec, m);
            let d = steering_derivative(spec, ang, wrt);
            let fd: Vec<Complex64> = ap.iter().zip(am.iter()).map(|(x, y)| (x - y) / (2.0 * h)).collect();
            let err: f64 = d.iter().zip(&fd).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            assert!(err / norm_sqr(&d).sqrt() < 1e-5, "{wrt:?} {err}");
        }
    }

    #[test]
    fn identities_match_explicit_vectors() {
        let spec = UpaSpec::new(5, 5).unwrap();
        let ang = target();
        let dt = steering_derivative(spec, ang, Wrt::Theta);
        let dp = steering_derivative(spec, ang, Wrt::Phi);
        let ids = array_identities(spec, ang);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        assert!(rel(ids.norm_theta, norm_sqr(&dt)) < 1e-10);
        assert!(rel(ids.norm_phi, norm_sqr(&dp)) < 1e-10);
        let c = inner(&dt, &dp);
        assert!(rel(ids.cross, c.re) < 1e-10);
        assert!(c.im.abs() < 1e-10 * ids.cross.abs());
        // Cross term written out by hand for a 5x5 array.
        let chain = 25.0 * 24.0 / 12.0 * PI * PI * ang.phi.sin() * ang.theta.sin() * ang.theta.cos() * ang.phi.cos();
        assert!(rel(ids.cross, chain) < 1e-12);
    }

    #[test]
    fn steering_orthogonal_to_derivatives() {
        let spec = UpaSpec::new(6, 4).unwrap();
        let ang = Angles::new(-1.1, 0.7).unwrap();
        let a = steering(spec, ang);
        for wrt in [Wrt::Theta, Wrt::Phi] {
            let d = steering_derivative(spec, ang, wrt);
            assert!(inner(&a, &d).norm() < 1e-10 * 24.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(UpaSpec::new(0, 3).is_err());
        assert!(Angles::new(4.0, 0.0).is_err());
        assert!(Angles::new(0.0, 1.7).is_err());
    }
}
