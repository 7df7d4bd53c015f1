//! Dense log-barrier solver for small second-order cone programs.
//!
//! Maximizes `f^T x` subject to
//!
//! * cones `||A_i x + b_i|| <= c_i^T x + d_i`,
//! * linear inequalities `g_j^T x <= h_j`,
//! * optional per-variable lower bounds.
//!
//! Each barrier stage minimizes `-f^T x + mu * phi(x)` with damped Newton steps
//! (Cholesky of the dense Hessian, backtracking line search) and then shrinks
//! `mu` by ten. A phase-I problem finds a strictly feasible point when the
//! supplied start is not one.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `||A x + b|| <= c^T x + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl SocConstraint {
    /// `(c^T x + d) - ||A x + b||`; nonnegative when satisfied.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(x) + self.d - (&self.a * x + &self.b).norm()
    }

    /// Multiplies both sides by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { a: &self.a * s, b: &self.b * s, c: &self.c * s, d: self.d * s }
    }
}

/// `g^T x <= h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub g: DVector<f64>,
    pub h: f64,
}

impl LinearConstraint {
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        self.h - self.g.dot(x)
    }
}

/// A maximization problem over `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SocProgram {
    pub objective: DVector<f64>,
    pub cones: Vec<SocConstraint>,
    pub linear: Vec<LinearConstraint>,
    pub lower_bounds: Vec<Option<f64>>,
}

impl SocProgram {
    pub fn new(objective: DVector<f64>) -> Self {
        let n = objective.len();
        Self { objective, cones: Vec::new(), linear: Vec::new(), lower_bounds: vec![None; n] }
    }

    pub fn n(&self) -> usize {
        self.objective.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.n();
        for c in &self.cones {
            if c.a.ncols() != n || c.c.len() != n || c.a.nrows() != c.b.len() || c.a.nrows() == 0 {
                return Err(Error::InvalidArgument("cone dimensions do not match the program".into()));
            }
        }
        if self.linear.iter().any(|l| l.g.len() != n) || self.lower_bounds.len() != n {
            return Err(Error::InvalidArgument("constraint dimensions do not match the program".into()));
        }
        Ok(())
    }

    /// Smallest constraint margin at `x` (negative when violated).
    pub fn min_margin(&self, x: &DVector<f64>) -> f64 {
        let mut m = f64::INFINITY;
        for c in &self.cones {
            m = m.min(c.margin(x));
        }
        for l in &self.linear {
            m = m.min(l.margin(x));
        }
        for (i, lb) in self.lower_bounds.iter().enumerate() {
            if let Some(lb) = lb {
                m = m.min(x[i] - lb);
            }
        }
        m
    }

    /// Barrier parameter: one per linear constraint and bound, two per cone.
    fn barrier_degree(&self) -> f64 {
        (self.linear.len() + self.lower_bounds.iter().flatten().count() + 2 * self.cones.len()) as f64
    }

    /// `phi(x) = -sum ln(slack)`, `None` outside the interior.
    fn barrier(&self, x: &DVector<f64>) -> Option<f64> {
        let mut v = 0.0;
        for c in &self.cones {
            let t = c.c.dot(x) + c.d;
            let u = &c.a * x + &c.b;
            let psi = t * t - u.norm_squared();
            if !(t > 0.0 && psi > 0.0) {
                return None;
            }
            v -= libm::log(psi);
        }
        for l in &self.linear {
            let s = l.margin(x);
            if !(s > 0.0) {
                return None;
            }
            v -= libm::log(s);
        }
        for (i, lb) in self.lower_bounds.iter().enumerate() {
            if let Some(lb) = lb {
                let s = x[i] - lb;
                if !(s > 0.0) {
                    return None;
                }
                v -= libm::log(s);
            }
        }
        Some(v)
    }

    /// Gradient and Hessian of the barrier at an interior point.
    fn barrier_derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for c in &self.cones {
            let t = c.c.dot(x) + c.d;
            let u = &c.a * x + &c.b;
            let psi = t * t - u.norm_squared();
            let dpsi = (&c.c * t - c.a.transpose() * &u) * 2.0;
            g -= &dpsi / psi;
            h += &dpsi * dpsi.transpose() / (psi * psi);
            h -= (&c.c * c.c.transpose() - c.a.transpose() * &c.a) * (2.0 / psi);
        }
        for l in &self.linear {
            let s = l.margin(x);
            g += &l.g / s;
            h += &l.g * l.g.transpose() / (s * s);
        }
        for (i, lb) in self.lower_bounds.iter().enumerate() {
            if let Some(lb) = lb {
                let s = x[i] - lb;
                g[i] -= 1.0 / s;
                h[(i, i)] += 1.0 / (s * s);
            }
        }
        (g, h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x_opt: Vec<f64>,
    pub obj: f64,
    pub status: Status,
    /// Duality-gap bound `m * mu` of the last centred barrier stage.
    pub gap: f64,
    /// Infinity norm of the Lagrangian gradient with barrier-implied multipliers.
    pub kkt_residual: f64,
    /// Newton steps taken, phase I included.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub mu0: f64,
    pub mu_factor: f64,
    pub max_iters: usize,
    /// Stationarity target for each centring stage, relative to `max(1, ||f||_inf)`.
    pub center_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-7, mu0: 1.0, mu_factor: 0.1, max_iters: 200, center_tol: 1e-9 }
    }
}

struct Barrier<'a> {
    prog: &'a SocProgram,
    iters: usize,
    max_iters: usize,
}

enum Centering {
    Done,
    OutOfIterations,
}

impl Barrier<'_> {
    fn value(&self, x: &DVector<f64>, mu: f64) -> Option<f64> {
        self.prog.barrier(x).map(|p| -self.prog.objective.dot(x) + mu * p)
    }

    fn stationarity(&self, x: &DVector<f64>, mu: f64) -> f64 {
        kkt_residual(self.prog, x, mu)
    }

    /// Newton iterations on `-f^T x + mu phi(x)` until centred.
    fn center(
        &mut self,
        x: &mut DVector<f64>,
        mu: f64,
        tol: f64,
        stop: &dyn Fn(&DVector<f64>) -> bool,
    ) -> Result<Centering> {
        let mut fx = self.value(x, mu).ok_or_else(|| Error::Numerical("centring started outside the interior".into()))?;
        loop {
            if stop(x) {
                return Ok(Centering::Done);
            }
            let (g, h) = self.prog.barrier_derivatives(x);
            let grad = g * mu - &self.prog.objective;
            if grad.amax() <= tol {
                return Ok(Centering::Done);
            }
            if self.iters >= self.max_iters {
                return Ok(Centering::OutOfIterations);
            }
            self.iters += 1;
            let step = newton_step(&(h * mu), &grad)?;
            let slope = grad.dot(&step);
            // A decrement this small means the gradient floor is rounding noise.
            if !(slope < 0.0) || -slope <= 1e-20 * (1.0 + self.prog.objective.dot(x).abs()) {
                return Ok(Centering::Done);
            }
            // Near the centre the barrier value stops resolving progress in
            // floating point, so the step is judged on the gradient norm instead.
            let local = -slope < 1e-6;
            let gnorm = grad.norm();
            let mut s = 1.0;
            let mut accepted = None;
            while s > 1e-14 {
                let xn = &*x + &step * s;
                if let Some(fnew) = self.value(&xn, mu) {
                    let ok = if local {
                        let (gn, _) = self.prog.barrier_derivatives(&xn);
                        let rn = (gn * mu - &self.prog.objective).norm();
                        rn <= (1.0 - 0.01 * s) * gnorm
                    } else {
                        fnew <= fx + 0.01 * s * slope
                    };
                    if ok {
                        accepted = Some((xn, fnew));
                        break;
                    }
                }
                s *= 0.5;
            }
            match accepted {
                Some((xn, fnew)) => {
                    *x = xn;
                    fx = fnew;
                }
                None => return Ok(Centering::Done),
            }
        }
    }
}

/// Constraints in `g_i(x) <= 0` form: `(gradient, slack -g_i(x))`.
fn constraint_geometry(prog: &SocProgram, x: &DVector<f64>) -> Vec<(DVector<f64>, f64)> {
    let n = prog.n();
    let mut out = Vec::new();
    for c in &prog.cones {
        let u = &c.a * x + &c.b;
        let nu = u.norm();
        let grad = if nu > 0.0 { c.a.transpose() * &u / nu - &c.c } else { -c.c.clone() };
        out.push((grad, c.c.dot(x) + c.d - nu));
    }
    for l in &prog.linear {
        out.push((l.g.clone(), l.margin(x)));
    }
    for (i, lb) in prog.lower_bounds.iter().enumerate() {
        if let Some(lb) = lb {
            let mut g = DVector::zeros(n);
            g[i] = -1.0;
            out.push((g, x[i] - lb));
        }
    }
    out
}

/// KKT residual `max(||f - sum z_i grad g_i||_inf, max z_i s_i)`.
///
/// Multipliers of the near-active constraints are re-estimated by least
/// squares (the barrier estimates `mu / s_i` lose accuracy as the slacks
/// approach rounding level); if that produces a negative multiplier the
/// barrier estimates are used for every constraint instead.
fn kkt_residual(prog: &SocProgram, x: &DVector<f64>, mu: f64) -> f64 {
    let geo = constraint_geometry(prog, x);
    let f = &prog.objective;
    let barrier_duals: Vec<f64> = geo.iter().map(|(_, s)| mu / s.max(1e-300)).collect();
    let residual = |z: &[f64], idx: &[usize]| {
        let mut r = f.clone();
        let mut comp: f64 = 0.0;
        for (&i, &zi) in idx.iter().zip(z) {
            r -= &geo[i].0 * zi;
            comp = comp.max(zi * geo[i].1.max(0.0));
        }
        r.amax().max(comp)
    };
    let all: Vec<usize> = (0..geo.len()).collect();
    let fallback = residual(&barrier_duals, &all);
    let zmax = barrier_duals.iter().cloned().fold(0.0, f64::max);
    let active: Vec<usize> = all.iter().copied().filter(|&i| barrier_duals[i] >= 1e-6 * zmax).collect();
    if active.is_empty() {
        return fallback;
    }
    let g = DMatrix::from_fn(f.len(), active.len(), |r, c| geo[active[c]].0[r]);
    let svd = g.svd(true, true);
    let z = match svd.solve(f, 1e-12) {
        Ok(z) => z,
        Err(_) => return fallback,
    };
    if z.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return fallback;
    }
    residual(z.as_slice(), &active).min(fallback)
}

fn newton_step(h: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut m = h.clone();
        for i in 0..n {
            m[(i, i)] += reg;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&(-grad));
            if d.iter().all(|v| v.is_finite()) {
                return Ok(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    Err(Error::Numerical("Newton system is not positive definite".into()))
}

/// Runs the barrier method from a strictly feasible `x`.
fn barrier_method(
    prog: &SocProgram,
    x0: DVector<f64>,
    opts: &SolverOptions,
    iters_used: usize,
    stop: &dyn Fn(&DVector<f64>) -> bool,
) -> Result<(DVector<f64>, f64, f64, Status, usize)> {
    let mut b = Barrier { prog, iters: iters_used, max_iters: opts.max_iters };
    let mut x = x0;
    let m = prog.barrier_degree();
    let tol = opts.center_tol * prog.objective.amax().max(1.0);
    let mut mu = opts.mu0;
    loop {
        match b.center(&mut x, mu, tol, stop)? {
            Centering::OutOfIterations => {
                let kkt = b.stationarity(&x, mu);
                return Ok((x, m * mu, kkt, Status::MaxIters, b.iters));
            }
            Centering::Done => {}
        }
        if stop(&x) || m * mu <= opts.gap_tol || m == 0.0 {
            let kkt = b.stationarity(&x, mu);
            return Ok((x, m * mu, kkt, Status::Optimal, b.iters));
        }
        mu *= opts.mu_factor;
    }
}

/// Phase I: maximize `-s` with every constraint relaxed by `s`.
fn phase_one(prog: &SocProgram, start: &DVector<f64>, opts: &SolverOptions) -> Result<(Option<DVector<f64>>, usize)> {
    let n = prog.n();
    let viol = -prog.min_margin(start);
    let s0 = viol.max(0.0) + 1.0;
    let mut obj = DVector::zeros(n + 1);
    obj[n] = -1.0;
    let mut aux = SocProgram::new(obj);
    let ext = |v: &DVector<f64>, last: f64| {
        let mut e = DVector::zeros(n + 1);
        e.rows_mut(0, n).copy_from(v);
        e[n] = last;
        e
    };
    for c in &prog.cones {
        let mut a = DMatrix::zeros(c.a.nrows(), n + 1);
        a.columns_mut(0, n).copy_from(&c.a);
        aux.cones.push(SocConstraint { a, b: c.b.clone(), c: ext(&c.c, 1.0), d: c.d });
    }
    for l in &prog.linear {
        aux.linear.push(LinearConstraint { g: ext(&l.g, -1.0), h: l.h });
    }
    for (i, lb) in prog.lower_bounds.iter().enumerate() {
        if let Some(lb) = lb {
            let mut g = DVector::zeros(n + 1);
            g[i] = -1.0;
            g[n] = -1.0;
            aux.linear.push(LinearConstraint { g, h: -lb });
        }
    }
    aux.lower_bounds[n] = Some(-1.0);
    // Unbounded directions would let the barrier run off, so phase I is
    // confined to a large ball around the start.
    let radius = 1e3 * (1.0 + start.amax());
    let mut a = DMatrix::zeros(n, n + 1);
    a.columns_mut(0, n).copy_from(&DMatrix::identity(n, n));
    aux.cones.push(SocConstraint { a, b: -start, c: DVector::zeros(n + 1), d: radius });
    let x0 = ext(start, s0);
    let margin = 1e-6 * (1.0 + start.amax());
    let stop = move |x: &DVector<f64>| x[n] < -margin;
    let (x, _, _, _, iters) = barrier_method(&aux, x0, opts, 0, &stop)?;
    if x[n] < 0.0 {
        Ok((Some(x.rows(0, n).into_owned()), iters))
    } else {
        Ok((None, iters))
    }
}

/// Solves `prog` starting from `start`, running phase I first if `start` is
/// not strictly feasible or lies within rounding distance of the boundary.
pub fn solve(prog: &SocProgram, start: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    prog.check()?;
    let n = prog.n();
    if start.len() != n {
        return Err(Error::InvalidArgument(format!("start has {} entries, program has {n}", start.len())));
    }
    let mut x0 = DVector::from_column_slice(start);
    let mut iters = 0;
    // A start within rounding distance of the boundary stalls Newton just as
    // badly as an infeasible one.
    let thin = prog.min_margin(&x0) < 1e-9 * (1.0 + x0.amax());
    if thin || prog.barrier(&x0).is_none() {
        let (found, used) = phase_one(prog, &x0, opts)?;
        iters = used;
        match found {
            Some(x) if prog.barrier(&x).is_some() => x0 = x,
            _ => {
                return Ok(SolveResult {
                    obj: prog.objective.dot(&x0),
                    x_opt: x0.as_slice().to_vec(),
                    status: Status::Infeasible,
                    gap: f64::INFINITY,
                    kkt_residual: f64::INFINITY,
                    iterations: iters,
                })
            }
        }
    }
    let (x, gap, kkt, status, iterations) = barrier_method(prog, x0, opts, iters, &|_| false)?;
    Ok(SolveResult {
        obj: prog.objective.dot(&x),
        x_opt: x.as_slice().to_vec(),
        status,
        gap,
        kkt_residual: kkt,
        iterations,
    })
}

/// SOC form of `t >= coeff / x` (with `x, t >= 0`):
/// `||[2 sqrt(coeff); x - t]|| <= x + t`.
pub fn reciprocal_cone(n: usize, x_idx: usize, t_idx: usize, coeff: f64) -> Result<SocConstraint> {
    if !(coeff >= 0.0 && coeff.is_finite()) {
        return Err(Error::InvalidArgument(format!("reciprocal coefficient must be nonnegative, got {coeff}")));
    }
    if x_idx >= n || t_idx >= n || x_idx == t_idx {
        return Err(Error::InvalidArgument("bad variable indices for reciprocal lift".into()));
    }
    let mut a = DMatrix::zeros(2, n);
    a[(1, x_idx)] = 1.0;
    a[(1, t_idx)] = -1.0;
    let b = DVector::from_vec(vec![2.0 * libm::sqrt(coeff), 0.0]);
    let mut c = DVector::zeros(n);
    c[x_idx] = 1.0;
    c[t_idx] = 1.0;
    Ok(SocConstraint { a, b, c, d: 0.0 })
}

/// Epigraph cones `t_k >= coeffs_k / x_k` for each pair of indices.
pub fn lift_reciprocal_terms(n: usize, x_idx: &[usize], t_idx: &[usize], coeffs: &[f64]) -> Result<Vec<SocConstraint>> {
    if x_idx.len() != coeffs.len() || t_idx.len() != coeffs.len() {
        return Err(Error::InvalidArgument("reciprocal lift needs one coefficient per variable".into()));
    }
    x_idx
        .iter()
        .zip(t_idx)
        .zip(coeffs)
        .map(|((&x, &t), &b)| reciprocal_cone(n, x, t, b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::SQRT_2;

    fn lin(g: &[f64], h: f64) -> LinearConstraint {
        LinearConstraint { g: DVector::from_column_slice(g), h }
    }

    #[test]
    fn linear_program() {
        let mut p = SocProgram::new(DVector::from_vec(vec![1.0]));
        p.linear.push(lin(&[1.0], 3.0));
        let r = solve(&p, &[0.0], &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x_opt[0] - 3.0).abs() < 1e-6);
        assert!(r.gap <= 1e-7);
    }

    #[test]
    fn unit_disc() {
        let mut p = SocProgram::new(DVector::from_vec(vec![1.0, 1.0]));
        p.cones.push(SocConstraint {
            a: DMatrix::identity(2, 2),
            b: DVector::zeros(2),
            c: DVector::zeros(2),
            d: 1.0,
        });
        let r = solve(&p, &[0.0, 0.0], &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.obj - SQRT_2).abs() < 1e-6, "{}", r.obj);
        assert!((r.x_opt[0] - SQRT_2 / 2.0).abs() < 1e-6);
        assert!(r.kkt_residual <= 1e-7);
    }

    #[test]
    fn phase_one_finds_interior() {
        // start outside: x = 10 while x <= 3
        let mut p = SocProgram::new(DVector::from_vec(vec![-1.0, 1.0]));
        p.linear.push(lin(&[1.0, 0.0], 3.0));
        p.linear.push(lin(&[0.0, 1.0], 2.0));
        p.lower_bounds = vec![Some(1.0), None];
        let r = solve(&p, &[10.0, 10.0], &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x_opt[0] - 1.0).abs() < 1e-6 && (r.x_opt[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn detects_infeasibility() {
        let mut p = SocProgram::new(DVector::from_vec(vec![1.0]));
        p.linear.push(lin(&[1.0], -1.0));
        p.lower_bounds = vec![Some(0.0)];
        let r = solve(&p, &[0.5], &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::Infeasible);
    }

    #[test]
    fn hyperbola_lift() {
        let c = reciprocal_cone(2, 0, 1, 1.0).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        assert!(c.margin(&x).abs() < 1e-15);
        assert_eq!((&c.a * &x + &c.b).norm(), 2.0);
        let z = reciprocal_cone(2, 0, 1, 0.0).unwrap();
        assert!(z.margin(&DVector::from_vec(vec![0.7, 0.0])) >= 0.0);
        assert!(z.margin(&DVector::from_vec(vec![0.7, -1e-3])) < 0.0);
        assert!(reciprocal_cone(2, 0, 1, -1.0).is_err());
    }

    #[test]
    fn minimize_reciprocal() {
        // max -t - x  s.t. t >= 4/x, x >= 0.1  -> x = t = 2
        let mut p = SocProgram::new(DVector::from_vec(vec![-1.0, -1.0]));
        p.cones.extend(lift_reciprocal_terms(2, &[0], &[1], &[4.0]).unwrap());
        p.lower_bounds[0] = Some(0.1);
        let r = solve(&p, &[1.0, 10.0], &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.obj + 4.0).abs() < 1e-6, "{}", r.obj);
    }
}
