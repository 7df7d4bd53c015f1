//! Random SOCPs with a planted KKT point, plus a grid brute force in 2-D.

use mimo_isac_core::socp::{solve, LinearConstraint, SocConstraint, SocProgram, SolverOptions, Status};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Builds a program whose optimum is `x*` by choosing constraints active at
/// `x*` and an objective in the cone of their gradients.
fn planted(rng: &mut ChaCha8Rng, n: usize) -> (SocProgram, f64) {
    let xs = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let mut grads: Vec<DVector<f64>> = Vec::new();
    let mut cones = Vec::new();
    let mut linear = Vec::new();
    let n_cones = rng.random_range(1..=n.min(3));
    for _ in 0..n_cones {
        let m = rng.random_range(1..=3);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let c = DVector::from_fn(n, |_, _| rng.random_range(-0.3..0.3));
        let u = &a * &xs + &b;
        let d = u.norm() - c.dot(&xs);
        grads.push(a.transpose() * &u / u.norm() - &c);
        cones.push(SocConstraint { a, b, c, d });
    }
    let n_lin = rng.random_range(0..=(n - n_cones).min(2));
    for _ in 0..n_lin {
        let g = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let h = g.dot(&xs);
        grads.push(g.clone());
        linear.push(LinearConstraint { g, h });
    }
    let mut obj = DVector::zeros(n);
    for g in &grads {
        obj += g * rng.random_range(0.2..2.0);
    }
    // inactive box and an inactive ball keep the feasible set bounded
    for i in 0..n {
        let mut g = DVector::zeros(n);
        g[i] = 1.0;
        linear.push(LinearConstraint { g: g.clone(), h: 5.0 });
        linear.push(LinearConstraint { g: -g, h: 5.0 });
    }
    cones.push(SocConstraint {
        a: DMatrix::identity(n, n),
        b: DVector::zeros(n),
        c: DVector::zeros(n),
        d: 20.0,
    });
    let opt = obj.dot(&xs);
    let mut prog = SocProgram::new(obj);
    prog.cones = cones;
    prog.linear = linear;
    (prog, opt)
}

#[test]
fn planted_optima_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = SolverOptions::default();
    for trial in 0..50 {
        let n = rng.random_range(2..=10);
        let (prog, opt) = planted(&mut rng, n);
        let r = solve(&prog, &vec![0.0; n], &opts).unwrap();
        assert_eq!(r.status, Status::Optimal, "trial {trial}");
        assert!((r.obj - opt).abs() <= 1e-5 * opt.abs().max(1.0), "trial {trial}: {} vs {opt}", r.obj);
        assert!(r.kkt_residual <= 1e-7, "trial {trial}: kkt {}", r.kkt_residual);
        let x = DVector::from_vec(r.x_opt.clone());
        assert!(prog.min_margin(&x) >= -1e-8);
    }
}

#[test]
fn two_dimensional_grid_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(2, |_, _| rng.random_range(-0.5..0.5));
        let cone = SocConstraint { a, b, c: DVector::zeros(2), d: 1.0 };
        let obj = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let mut prog = SocProgram::new(obj.clone());
        prog.cones.push(cone.clone());
        for i in 0..2 {
            let mut g = DVector::zeros(2);
            g[i] = 1.0;
            prog.linear.push(LinearConstraint { g: g.clone(), h: 3.0 });
            prog.linear.push(LinearConstraint { g: -g, h: 3.0 });
        }
        let r = solve(&prog, &[0.0, 0.0], &SolverOptions::default()).unwrap();
        let mut best = f64::NEG_INFINITY;
        let steps = 1200;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = DVector::from_vec(vec![-3.0 + 6.0 * i as f64 / steps as f64, -3.0 + 6.0 * j as f64 / steps as f64]);
                if prog.min_margin(&x) >= 0.0 {
                    best = best.max(obj.dot(&x));
                }
            }
        }
        // The grid under-approximates the optimum by at most one cell of slope.
        assert!(r.obj >= best - 1e-9);
        assert!(r.obj - best <= 6.0 / steps as f64 * obj.amax() * 2.0 + 1e-9);
    }
}
