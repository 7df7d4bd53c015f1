use core::f64::consts::PI;

use mimo_isac_core::channel::{draw_small_scale, LargeScaleSet};
use mimo_isac_core::geometry::{
    array_identities, derivative_identities, inner, norm_sqr, steering, steering_derivative, Angles, UpaSpec, Wrt,
};
use mimo_isac_core::precoding::{build_precoder, total_power, PowerAllocation, Scheme};
use mimo_isac_core::rate::RateModel;
use mimo_isac_core::rng::{stream, Domain};
use mimo_isac_core::sca::{crlb_soc_constraints, surrogate_coefficients_for, surrogate_rates, CrlbLimits};
use mimo_isac_core::sensing::{crlb_simplified, synthesize_echo};
use mimo_isac_core::{Complex64, SystemConfig};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn spec() -> impl Strategy<Value = UpaSpec> {
    (1usize..=12, 1usize..=12).prop_map(|(h, v)| UpaSpec::new(h, v).unwrap())
}

// away from the poles phi = 0, +-pi/2 where derivative norms vanish
fn angles() -> impl Strategy<Value = Angles> {
    (-3.0f64..3.0, 0.1f64..1.45, any::<bool>())
        .prop_map(|(t, p, neg)| Angles::new(t, if neg { -p } else { p }).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn steering_has_unit_modulus_entries(s in spec(), a in angles()) {
        let v = steering(s, a);
        prop_assert_eq!(v.len(), s.len());
        for z in v.iter() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_central_differences(s in spec(), a in angles()) {
        let h = 1e-6;
        for wrt in [Wrt::Theta, Wrt::Phi] {
            let (lo, hi) = match wrt {
                Wrt::Theta => (Angles { theta: a.theta - h, ..a }, Angles { theta: a.theta + h, ..a }),
                Wrt::Phi => (Angles { phi: a.phi - h, ..a }, Angles { phi: a.phi + h, ..a }),
            };
            let d = steering_derivative(s, a, wrt);
            let (m, p) = (steering(s, lo), steering(s, hi));
            let fd: Vec<Complex64> = m.iter().zip(p.iter()).map(|(x, y)| (y - x) / (2.0 * h)).collect();
            let err: Vec<Complex64> = d.iter().zip(&fd).map(|(x, y)| x - y).collect();
            let scale = norm_sqr(&d).sqrt().max(1e-3);
            prop_assert!(norm_sqr(&err).sqrt() <= 1e-5 * scale, "{wrt:?}: {} vs {}", norm_sqr(&err).sqrt(), scale);
        }
    }

    #[test]
    fn identities_match_explicit_vectors(tx in spec(), rx in spec(), a in angles()) {
        let v = steering(tx, a);
        let dt = steering_derivative(tx, a, Wrt::Theta);
        let dp = steering_derivative(tx, a, Wrt::Phi);
        let id = array_identities(tx, a);
        let tol = |x: f64, y: f64| (x - y).abs() <= 1e-10 * y.abs().max(1.0);
        prop_assert!(tol(id.norm_theta, norm_sqr(&dt)));
        prop_assert!(tol(id.norm_phi, norm_sqr(&dp)));
        prop_assert!(tol(id.cross, inner(&dt, &dp).re));
        prop_assert!(inner(&v, &dt).norm() <= 1e-9 * (v.len() as f64));
        prop_assert!(inner(&v, &dp).norm() <= 1e-9 * (v.len() as f64));

        let both = derivative_identities(tx, rx, a);
        prop_assert_eq!(both.a, id);
        let bt = steering_derivative(rx, a, Wrt::Theta);
        let bp = steering_derivative(rx, a, Wrt::Phi);
        prop_assert!(tol(both.b.norm_theta, norm_sqr(&bt)));
        prop_assert!(tol(both.b.norm_phi, norm_sqr(&bp)));
        prop_assert!(tol(both.b.cross, inner(&bt, &bp).re));
        prop_assert!(inner(&bt, &bp).im.abs() <= 1e-9 * norm_sqr(&bt).max(1.0));
    }

    #[test]
    fn crlb_depends_only_on_comm_power_sum(
        m in proptest::collection::vec(1i32..8, 4),
        n in proptest::collection::vec(1u32..4000, 4),
        rho_n in 1u32..4000,
        d in 1u32..500,
        i in 0usize..4,
        j in 0usize..4,
    ) {
        prop_assume!(i != j);
        // dyadic xi and gamma keep every product and partial sum exact
        let xi: Vec<f64> = m.iter().map(|&e| 2f64.powi(-e)).collect();
        let ls = LargeScaleSet { beta: xi.clone(), xi: xi.clone(), eps: vec![0.0; 4], pilot_group: vec![0, 1, 2, 3] };
        let cfg = SystemConfig { tx: UpaSpec::square(4).unwrap(), rx: UpaSpec::square(3).unwrap(), k: 4, ..SystemConfig::default() };
        let gamma: Vec<f64> = n.iter().map(|&q| q as f64 * 2f64.powi(-20)).collect();
        let rho = rho_n as f64 * 2f64.powi(-20);
        let delta = d as f64 * 2f64.powi(-32);
        let mut moved = gamma.clone();
        moved[i] -= delta / xi[i];
        moved[j] += delta / xi[j];
        prop_assume!(moved[i] > 0.0);
        let c0 = crlb_simplified(&ls, Scheme::Mrt, &PowerAllocation::new(gamma, rho).unwrap(), &cfg).unwrap();
        let c1 = crlb_simplified(&ls, Scheme::Mrt, &PowerAllocation::new(moved, rho).unwrap(), &cfg).unwrap();
        prop_assert_eq!(c0.crlb_theta.to_bits(), c1.crlb_theta.to_bits());
        prop_assert_eq!(c0.crlb_phi.to_bits(), c1.crlb_phi.to_bits());
    }

    #[test]
    fn crlb_scales_inversely_with_power(s in 0.01f64..100.0, g in 0.01f64..5.0, rho in 0.01f64..5.0) {
        let cfg = SystemConfig { tx: UpaSpec::square(5).unwrap(), rx: UpaSpec::square(3).unwrap(), k: 3, ..SystemConfig::default() };
        let ls = LargeScaleSet::from_gains(vec![1e-3, 3e-4, 2e-3], 10, 1000.0, 1.0).unwrap();
        for scheme in [Scheme::Mrt, Scheme::Zf] {
            let base = PowerAllocation::new(vec![g, 2.0 * g, 0.5 * g], rho).unwrap();
            let c0 = crlb_simplified(&ls, scheme, &base, &cfg).unwrap();
            let c1 = crlb_simplified(&ls, scheme, &base.scaled(s), &cfg).unwrap();
            prop_assert!(rel(c1.crlb_theta * s, c0.crlb_theta) < 1e-12);
            prop_assert!(rel(c1.crlb_phi * s, c0.crlb_phi) < 1e-12);
        }
    }
}

fn sca_case() -> (SystemConfig, LargeScaleSet) {
    let cfg = SystemConfig { tx: UpaSpec::square(6).unwrap(), rx: UpaSpec::square(3).unwrap(), k: 5, ..SystemConfig::default() };
    let ls = LargeScaleSet::from_gains(vec![4e-3, 9e-4, 2e-4, 6e-5, 1.5e-3], 10, 1000.0, 1.0).unwrap();
    (cfg, ls)
}

#[test]
fn surrogate_lower_bounds_the_rate() {
    let (cfg, ls) = sca_case();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for scheme in [Scheme::Mrt, Scheme::Zf] {
        let model = RateModel::new(&ls, scheme, &cfg).unwrap();
        let point = PowerAllocation::new(vec![0.8, 2.0, 5.0, 9.0, 1.1], 0.05).unwrap();
        let q = surrogate_coefficients_for(&model, &point).unwrap();
        for _ in 0..1000 {
            let gamma: Vec<f64> = point.gamma.iter().map(|g| g * rng.random_range(0.2..5.0)).collect();
            let alloc = PowerAllocation::new(gamma, point.rho * rng.random_range(0.0..5.0)).unwrap();
            let sur = surrogate_rates(&model, &q, &alloc);
            let tru = model.report(&alloc).per_user_rate;
            for k in 0..cfg.k {
                assert!(sur[k] <= tru[k] + 1e-12 * tru[k].abs().max(1.0), "{scheme:?} user {k}: {} > {}", sur[k], tru[k]);
            }
        }
    }
}

#[test]
fn surrogate_gradient_matches_rate_gradient() {
    let (cfg, ls) = sca_case();
    for scheme in [Scheme::Mrt, Scheme::Zf] {
        let model = RateModel::new(&ls, scheme, &cfg).unwrap();
        let point = PowerAllocation::new(vec![0.8, 2.0, 5.0, 9.0, 1.1], 0.05).unwrap();
        let q = surrogate_coefficients_for(&model, &point).unwrap();
        let sur = |a: &PowerAllocation| surrogate_rates(&model, &q, a).iter().sum::<f64>();
        let tru = |a: &PowerAllocation| model.sum_rate(a);
        for var in 0..=cfg.k {
            let bump = |sgn: f64| {
                let mut a = point.clone();
                if var < cfg.k {
                    a.gamma[var] += sgn * 1e-6 * point.gamma[var];
                } else {
                    a.rho += sgn * 1e-6 * point.rho;
                }
                a
            };
            let (lo, hi) = (bump(-1.0), bump(1.0));
            let gs = sur(&hi) - sur(&lo);
            let gt = tru(&hi) - tru(&lo);
            assert!((gs - gt).abs() <= 1e-5 * gt.abs().max(1e-9), "{scheme:?} var {var}: {gs} vs {gt}");
        }
    }
}

#[test]
fn crlb_cones_agree_with_direct_evaluation() {
    let (cfg, ls) = sca_case();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for scheme in [Scheme::Mrt, Scheme::Zf] {
        // limits at a mid-range allocation split the samples roughly in half
        let mid = crlb_simplified(&ls, scheme, &PowerAllocation::new(vec![1.0; cfg.k], 1e-2).unwrap(), &cfg).unwrap();
        let limits = CrlbLimits { theta: mid.crlb_theta, phi: mid.crlb_phi };
        let cones = crlb_soc_constraints(&ls, scheme, &cfg, limits).unwrap();
        let mut hits = 0;
        for _ in 0..1000 {
            let gamma: Vec<f64> = (0..cfg.k).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
            let rho = 10f64.powf(rng.random_range(-4.0..0.0));
            let alloc = PowerAllocation::new(gamma.clone(), rho).unwrap();
            let mut x = DVector::from_vec(gamma);
            x = x.push(rho);
            let in_cones = cones.iter().all(|c| c.margin(&x) >= 0.0);
            let direct = limits.admits(&crlb_simplified(&ls, scheme, &alloc, &cfg).unwrap());
            assert_eq!(in_cones, direct);
            hits += direct as usize;
        }
        // both outcomes are exercised
        assert!(hits > 50 && hits < 950, "{scheme:?}: {hits}");
    }
}

#[test]
fn echo_noise_has_the_configured_variance() {
    let (cfg, ls) = sca_case();
    let cfg = SystemConfig { alpha: Complex64::new(0.0, 0.0), sigma_s2: 2.5, l: 400, ..cfg };
    let mut rng = stream(3, Domain::SmallScale, 0);
    let real = draw_small_scale(cfg.n_t(), &ls, &mut rng);
    let alloc = PowerAllocation::new(vec![1.0; cfg.k], 0.5).unwrap();
    let pre = build_precoder(&real, Scheme::Mrt, &alloc, cfg.tx, cfg.target).unwrap();
    let echo = synthesize_echo(&pre, &cfg, &mut stream(3, Domain::Echo, 0));
    let n = (echo.y.nrows() * echo.y.ncols()) as f64;
    let p = echo.y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    // 3600 samples: standard error of the mean power is about 1.7%
    assert!(rel(p, 2.5) < 0.06, "{p}");
    let s = echo.symbols.iter().map(|z| z.norm_sqr()).sum::<f64>() / (echo.symbols.len() as f64);
    assert!(rel(s, 1.0) < 0.1, "{s}");
}

#[test]
fn transmit_power_matches_expected_trace() {
    let (cfg, ls) = sca_case();
    let alloc = PowerAllocation::new(vec![0.7, 1.5, 3.0, 8.0, 1.0], 0.2).unwrap();
    for scheme in [Scheme::Mrt, Scheme::Zf] {
        let mut acc = 0.0;
        let draws = 4000;
        for d in 0..draws {
            let real = draw_small_scale(cfg.n_t(), &ls, &mut stream(11, Domain::SmallScale, d));
            let pre = build_precoder(&real, scheme, &alloc, cfg.tx, cfg.target).unwrap();
            acc += pre.f.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let mc = acc / draws as f64;
        let expect = total_power(&ls, scheme, &alloc, cfg.n_t()).unwrap();
        assert!(rel(mc, expect) < 0.02, "{scheme:?}: {mc} vs {expect}");
    }
}

#[test]
fn angle_strategy_stays_inside_the_valid_range() {
    assert!(Angles::new(3.0, 1.45).is_ok());
    assert!(Angles::new(PI + 0.1, 0.0).is_err());
}
