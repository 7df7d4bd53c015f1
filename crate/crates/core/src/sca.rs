//! Successive convex approximation of the sum-rate problem under CRLB limits.
//!
//! Each iteration replaces every user rate by a concave lower bound that is
//! tight at the current point,
//! `R_k >= (tau_bar/ln2) [A_k - (B_k/lambda_k)/gamma_k - C_k (N_t beta_k rho + N_t zeta_k^T gamma + sigma_c^2)]`,
//! lifts the reciprocal terms into hyperbolic cones, writes both CRLB limits as
//! second-order cones and solves the resulting SOCP.
//!
//! Decision variables are power fractions: `z_g = N_t xi_bf,k gamma_k / P_t`
//! for each communications group `g` (one per user, or one shared by all users
//! for the equal-share benchmark) and `x_s = N_t rho / P_t`, so the budget is
//! `sum z + x_s <= 1`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::channel::{LargeScaleSet, SystemConfig};
use crate::error::{Error, Result};
use crate::precoding::{comm_power_factor, equal_power_allocation, xi_bf, PowerAllocation, Scheme};
use crate::rate::RateModel;
use crate::sensing::{AlignedFisher, CrlbPair};
use crate::socp::{lift_reciprocal_terms, solve, LinearConstraint, SocConstraint, SocProgram, SolverOptions, Status};

/// How the first SCA point splits the budget between sensing and communications.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    /// `p0 = 1/2`.
    HalfPower,
    /// Smallest sensing fraction `p0` meeting both CRLB limits (bisection to 1e-3).
    SmallestP0,
}

/// CRLB limits in rad^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbLimits {
    pub theta: f64,
    pub phi: f64,
}

impl CrlbLimits {
    pub fn from_db(theta_db: f64, phi_db: f64) -> Self {
        Self { theta: crate::db_to_lin(theta_db), phi: crate::db_to_lin(phi_db) }
    }

    pub fn admits(&self, c: &CrlbPair) -> bool {
        c.crlb_theta <= self.theta && c.crlb_phi <= self.phi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaConfig {
    pub max_iters: usize,
    pub rel_obj_tol: f64,
    pub crlb_theta_max: f64,
    pub crlb_phi_max: f64,
    pub init_policy: InitPolicy,
    pub solver: SolverOptions,
}

impl ScaConfig {
    pub fn new(limits: CrlbLimits, init_policy: InitPolicy) -> Self {
        Self {
            max_iters: 50,
            rel_obj_tol: 1e-4,
            crlb_theta_max: limits.theta,
            crlb_phi_max: limits.phi,
            init_policy,
            solver: SolverOptions::default(),
        }
    }

    pub fn limits(&self) -> CrlbLimits {
        CrlbLimits { theta: self.crlb_theta_max, phi: self.crlb_phi_max }
    }

    fn validate(&self) -> Result<()> {
        if !(self.crlb_theta_max > 0.0 && self.crlb_phi_max > 0.0 && self.rel_obj_tol > 0.0) {
            return Err(Error::InvalidConfig("CRLB limits and tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// One SCA point. Entry 0 of a trace is the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaIterate {
    /// True sum rate at this point.
    pub objective: f64,
    pub gamma: Vec<f64>,
    pub rho: f64,
    pub status: Status,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaTrace {
    pub iterates: Vec<ScaIterate>,
    pub final_allocation: PowerAllocation,
    pub converged: bool,
}

impl ScaTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.iterates.iter().map(|i| i.objective).collect()
    }

    /// Number of SOCP updates performed.
    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn final_objective(&self) -> f64 {
        self.iterates.last().map(|i| i.objective).unwrap_or(f64::NAN)
    }
}

/// Lower-bound coefficients `(A, B, C)` of one user at the expansion point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surrogate {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Surrogate coefficients of every user at `point`.
pub fn surrogate_coefficients_for(model: &RateModel, point: &PowerAllocation) -> Result<Vec<Surrogate>> {
    if point.gamma.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidArgument("surrogate needs every gamma_k > 0".into()));
    }
    Ok((0..model.k())
        .map(|k| {
            let x = model.lambda[k] * point.gamma[k];
            let d = model.denominator(k, point);
            Surrogate {
                a: libm::log1p(x / d) + 2.0 * x / (x + d),
                b: x * x / (x + d),
                c: x / ((x + d) * d),
            }
        })
        .collect())
}

pub fn surrogate_coefficients(
    ls: &LargeScaleSet,
    scheme: Scheme,
    cfg: &SystemConfig,
    point: &PowerAllocation,
) -> Result<Vec<Surrogate>> {
    surrogate_coefficients_for(&RateModel::new(ls, scheme, cfg)?, point)
}

/// Per-user surrogate rates at `alloc` (bit/s/Hz).
pub fn surrogate_rates(model: &RateModel, coeffs: &[Surrogate], alloc: &PowerAllocation) -> Vec<f64> {
    let s = model.tau_bar / core::f64::consts::LN_2;
    (0..model.k())
        .map(|k| {
            let q = coeffs[k];
            s * (q.a - q.b / (model.lambda[k] * alloc.gamma[k]) - q.c * model.denominator(k, alloc))
        })
        .collect()
}

/// The two CRLB cones over a decision vector where
/// `xi_bf^T gamma = comm^T x` and `rho = sens^T x`.
///
/// Each cone holds iff the matching CRLB is within its limit and the cone's
/// right-hand side is nonnegative. Both cones are divided by `scale > 0`.
pub fn crlb_cones(
    fisher: &AlignedFisher,
    comm: &DVector<f64>,
    sens: &DVector<f64>,
    limits: CrlbLimits,
    scale: f64,
) -> [SocConstraint; 2] {
    let lin = |w: [f64; 2]| comm * w[0] + sens * w[1];
    let ft = lin(fisher.theta);
    let fp = lin(fisher.phi);
    let fx = lin(fisher.cross);
    let n = comm.len();
    let build = |own: &DVector<f64>, other: &DVector<f64>, delta: f64| {
        // ||[chi; (other - own + delta)/2]|| <= (other + own - delta)/2
        let mut a = DMatrix::zeros(2, n);
        a.row_mut(0).copy_from(&fx.transpose());
        a.row_mut(1).copy_from(&((other - own) * 0.5).transpose());
        SocConstraint {
            a,
            b: DVector::from_vec(vec![0.0, 0.5 * delta]),
            c: (other + own) * 0.5,
            d: -0.5 * delta,
        }
        .scaled(1.0 / scale)
    };
    let dt = 1.0 / (fisher.gain * limits.theta);
    let dp = 1.0 / (fisher.gain * limits.phi);
    [build(&ft, &fp, dt), build(&fp, &ft, dp)]
}

/// CRLB cones over the raw vector `[gamma_1, ..., gamma_K, rho]`.
pub fn crlb_soc_constraints(
    ls: &LargeScaleSet,
    scheme: Scheme,
    cfg: &SystemConfig,
    limits: CrlbLimits,
) -> Result<[SocConstraint; 2]> {
    if !(limits.theta > 0.0 && limits.phi > 0.0) {
        return Err(Error::InvalidArgument("CRLB limits must be positive".into()));
    }
    let xb = xi_bf(ls, scheme, cfg.n_t())?;
    let k = ls.k();
    let mut comm = DVector::zeros(k + 1);
    comm.rows_mut(0, k).copy_from_slice(&xb);
    let mut sens = DVector::zeros(k + 1);
    sens[k] = 1.0;
    Ok(crlb_cones(&AlignedFisher::new(cfg), &comm, &sens, limits, 1.0))
}

/// Allocation with sensing fraction `p0` of the budget and the rest shared equally.
pub fn point_from_p0(ls: &LargeScaleSet, scheme: Scheme, cfg: &SystemConfig, p0: f64) -> Result<PowerAllocation> {
    let n = cfg.n_t() as f64;
    let xb = xi_bf(ls, scheme, cfg.n_t())?;
    let s: f64 = xb.iter().sum();
    PowerAllocation::new(vec![(1.0 - p0) * cfg.p_t / (n * s); ls.k()], p0 * cfg.p_t / n)
}

fn crlb_of_split(fisher: &AlignedFisher, cfg: &SystemConfig, p0: f64) -> Result<CrlbPair> {
    let n = cfg.n_t() as f64;
    fisher.crlb((1.0 - p0) * cfg.p_t / n, p0 * cfg.p_t / n)
}

/// First SCA point; satisfies the power budget with equality.
pub fn find_initial_point(
    ls: &LargeScaleSet,
    scheme: Scheme,
    cfg: &SystemConfig,
    policy: InitPolicy,
    limits: CrlbLimits,
) -> Result<PowerAllocation> {
    let fisher = AlignedFisher::new(cfg);
    let feasible = |p0: f64| crlb_of_split(&fisher, cfg, p0).map(|c| limits.admits(&c)).unwrap_or(false);
    let p0 = match policy {
        InitPolicy::HalfPower => {
            if !feasible(0.5) {
                return Err(Error::Infeasible("the equal split violates a CRLB limit".into()));
            }
            0.5
        }
        InitPolicy::SmallestP0 => {
            let (mut lo, mut hi) = (1e-3, 1.0 - 1e-3);
            if feasible(lo) {
                lo
            } else if !feasible(hi) {
                return Err(Error::Infeasible("no sensing fraction in (0, 1) meets the CRLB limits".into()));
            } else {
                while hi - lo > 1e-3 {
                    let mid = 0.5 * (lo + hi);
                    if feasible(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    };
    point_from_p0(ls, scheme, cfg, p0)
}

/// Maps power fractions to `(gamma, rho)` and back.
struct Layout {
    /// Group of each user.
    group: Vec<usize>,
    groups: usize,
    /// `gamma_k = scale_k z_{group(k)}`.
    scale: Vec<f64>,
    p_over_n: f64,
}

impl Layout {
    fn new(xb: &[f64], cfg: &SystemConfig, tied: bool) -> Self {
        let n = cfg.n_t() as f64;
        let p = cfg.p_t;
        let k = xb.len();
        if tied {
            let s: f64 = xb.iter().sum();
            Self { group: vec![0; k], groups: 1, scale: vec![p / (n * s); k], p_over_n: p / n }
        } else {
            Self { group: (0..k).collect(), groups: k, scale: xb.iter().map(|x| p / (n * x)).collect(), p_over_n: p / n }
        }
    }

    /// Variables: `z_0..z_{G-1}`, `x_s`, `t_0..t_{G-1}`.
    fn n_vars(&self) -> usize {
        2 * self.groups + 1
    }

    fn sens_idx(&self) -> usize {
        self.groups
    }

    fn t_idx(&self, g: usize) -> usize {
        self.groups + 1 + g
    }

    fn to_alloc(&self, x: &[f64]) -> Result<PowerAllocation> {
        let gamma = self.group.iter().zip(&self.scale).map(|(&g, &s)| s * x[g].max(0.0)).collect();
        PowerAllocation::new(gamma, self.p_over_n * x[self.sens_idx()].max(0.0))
    }

    fn group_value(&self, alloc: &PowerAllocation, g: usize) -> f64 {
        let k = self.group.iter().position(|&h| h == g).unwrap_or(0);
        alloc.gamma[k] / self.scale[k]
    }
}

fn build_subproblem(
    model: &RateModel,
    fisher: &AlignedFisher,
    layout: &Layout,
    point: &PowerAllocation,
    limits: CrlbLimits,
) -> Result<(SocProgram, Vec<f64>)> {
    let coeffs = surrogate_coefficients_for(model, point)?;
    let n = layout.n_vars();
    let sidx = layout.sens_idx();
    let mut obj = DVector::zeros(n);
    // -(B_k/lambda_k)/gamma_k summed per group: t_g >= B'_g / z_g
    let mut recip = vec![0.0; layout.groups];
    for (k, q) in coeffs.iter().enumerate() {
        let g = layout.group[k];
        recip[g] += q.b / (model.lambda[k] * layout.scale[k]);
        // -C_k (N_t beta_k rho + N_t zeta_k^T gamma)
        obj[sidx] -= q.c * model.n_t * model.beta[k] * layout.p_over_n;
        for j in 0..model.k() {
            obj[layout.group[j]] -= q.c * model.n_t * model.zeta[k][j] * layout.scale[j];
        }
    }
    for g in 0..layout.groups {
        obj[layout.t_idx(g)] = -1.0;
    }
    let mut prog = SocProgram::new(obj);
    let z_idx: Vec<usize> = (0..layout.groups).collect();
    let t_idx: Vec<usize> = (0..layout.groups).map(|g| layout.t_idx(g)).collect();
    prog.cones.extend(lift_reciprocal_terms(n, &z_idx, &t_idx, &recip)?);

    let mut budget = DVector::zeros(n);
    for g in 0..layout.groups {
        budget[g] = 1.0;
    }
    budget[sidx] = 1.0;
    prog.linear.push(LinearConstraint { g: budget.clone(), h: 1.0 });

    let mut comm = DVector::zeros(n);
    for g in 0..layout.groups {
        comm[g] = layout.p_over_n;
    }
    let mut sens = DVector::zeros(n);
    sens[sidx] = layout.p_over_n;
    let scale = layout.p_over_n
        * [fisher.theta, fisher.phi, fisher.cross]
            .iter()
            .flat_map(|w| w.iter().map(|v| v.abs()))
            .fold(0.0, f64::max);
    prog.cones.extend(crlb_cones(fisher, &comm, &sens, limits, scale.max(1e-300)));

    for g in 0..layout.groups {
        let k = layout.group.iter().position(|&h| h == g).unwrap_or(0);
        // gamma_k >= 1e-9 P_t / N_t keeps the reciprocal lift well posed
        prog.lower_bounds[g] = Some(1e-9 * layout.p_over_n / layout.scale[k]);
    }
    prog.lower_bounds[sidx] = Some(0.0);

    let mut start = vec![0.0; n];
    for g in 0..layout.groups {
        let z = layout.group_value(point, g);
        start[g] = z;
        start[layout.t_idx(g)] = 2.0 * recip[g] / z + 1e-12;
    }
    start[sidx] = point.rho / layout.p_over_n;
    Ok((prog, start))
}

/// Feasibility of an allocation: `(power excess over P_t, CRLBs)`.
pub fn check_allocation(
    ls: &LargeScaleSet,
    scheme: Scheme,
    cfg: &SystemConfig,
    alloc: &PowerAllocation,
) -> Result<(f64, CrlbPair)> {
    let xb = xi_bf(ls, scheme, cfg.n_t())?;
    let n = cfg.n_t() as f64;
    let c = comm_power_factor(&xb, &alloc.gamma);
    let excess = n * c + n * alloc.rho - cfg.p_t;
    Ok((excess, AlignedFisher::new(cfg).crlb(c, alloc.rho)?))
}

fn sca_from(
    ls: &LargeScaleSet,
    scheme: Scheme,
    cfg: &SystemConfig,
    sca: &ScaConfig,
    start: PowerAllocation,
    tied: bool,
) -> Result<ScaTrace> {
    sca.validate()?;
    let model = RateModel::new(ls, scheme, cfg)?;
    let fisher = AlignedFisher::new(cfg);
    let xb = xi_bf(ls, scheme, cfg.n_t())?;
    let layout = Layout::new(&xb, cfg, tied);
    let limits = sca.limits();

    let mut point = start;
    let mut obj = model.sum_rate(&point);
    let mut iterates = vec![ScaIterate {
        objective: obj,
        gamma: point.gamma.clone(),
        rho: point.rho,
        status: Status::Optimal,
        solver_iterations: 0,
    }];
    let mut converged = false;
    for it in 1..=sca.max_iters {
        let (prog, x0) = build_subproblem(&model, &fisher, &layout, &point, limits)?;
        let attempt = |opts: &SolverOptions| -> Result<(PowerAllocation, f64, Status, usize)> {
            let r = solve(&prog, &x0, opts)?;
            match r.status {
                Status::Optimal => {}
                Status::Infeasible => return Err(Error::Infeasible(format!("SCA subproblem {it} has no interior"))),
                Status::MaxIters => return Err(Error::Numerical(format!("SCA subproblem {it} hit the iteration cap"))),
            }
            let next = layout.to_alloc(&r.x_opt)?;
            let v = model.sum_rate(&next);
            Ok((next, v, r.status, r.iterations))
        };
        let mut res = attempt(&sca.solver)?;
        if res.1 < obj - 1e-9 {
            let tight = SolverOptions { gap_tol: sca.solver.gap_tol * 1e-4, max_iters: sca.solver.max_iters * 2, ..sca.solver };
            res = attempt(&tight)?;
            if res.1 < obj - 1e-9 {
                return Err(Error::NonMonotone { iteration: it, previous: obj, current: res.1 });
            }
        }
        let (next, v, status, iters) = res;
        iterates.push(ScaIterate { objective: v, gamma: next.gamma.clone(), rho: next.rho, status, solver_iterations: iters });
        let change = (v - obj).abs() / obj.abs().max(f64::MIN_POSITIVE);
        point = next;
        obj = v;
        if change < sca.rel_obj_tol {
            converged = true;
            break;
        }
    }
    Ok(ScaTrace { iterates, final_allocation: point, converged })
}

/// Runs the SCA from the point chosen by `sca.init_policy`.
pub fn run_sca(ls: &LargeScaleSet, scheme: Scheme, cfg: &SystemConfig, sca: &ScaConfig) -> Result<ScaTrace> {
    let start = find_initial_point(ls, scheme, cfg, sca.init_policy, sca.limits())?;
    sca_from(ls, scheme, cfg, sca, start, false)
}

/// Runs the SCA from each feasible sensing fraction in `p0s` and keeps the best.
pub fn run_sca_multistart(
    ls: &LargeScaleSet,
    scheme: Scheme,
    cfg: &SystemConfig,
    sca: &ScaConfig,
    p0s: &[f64],
) -> Result<ScaTrace> {
    let fisher = AlignedFisher::new(cfg);
    let limits = sca.limits();
    let mut best: Option<ScaTrace> = None;
    for &p0 in p0s {
        let ok = crlb_of_split(&fisher, cfg, p0).map(|c| limits.admits(&c)).unwrap_or(false);
        if !ok || !(p0 > 0.0 && p0 < 1.0) {
            continue;
        }
        let t = sca_from(ls, scheme, cfg, sca, point_from_p0(ls, scheme, cfg, p0)?, false)?;
        if best.as_ref().is_none_or(|b| t.final_objective() > b.final_objective()) {
            best = Some(t);
        }
    }
    best.ok_or_else(|| Error::Infeasible("no feasible multistart point".into()))
}

/// Allocation strategies compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// SCA with per-user powers.
    Proposed,
    /// SCA with `gamma_1 = ... = gamma_K`.
    EqualCom,
    /// Half the budget to sensing, the rest shared equally.
    EqualCs,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::EqualCom => "equal_com",
            Method::EqualCs => "equal_cs",
        }
    }
}

/// Benchmark allocations; `Proposed` is delegated to [`run_sca`].
pub fn benchmark_allocations(
    ls: &LargeScaleSet,
    scheme: Scheme,
    cfg: &SystemConfig,
    which: Method,
    sca: &ScaConfig,
) -> Result<(PowerAllocation, Option<ScaTrace>)> {
    match which {
        Method::EqualCs => Ok((equal_power_allocation(ls, scheme, cfg)?, None)),
        Method::EqualCom => {
            let start = find_initial_point(ls, scheme, cfg, sca.init_policy, sca.limits())?;
            let t = sca_from(ls, scheme, cfg, sca, start, true)?;
            Ok((t.final_allocation.clone(), Some(t)))
        }
        Method::Proposed => {
            let t = run_sca(ls, scheme, cfg, sca)?;
            Ok((t.final_allocation.clone(), Some(t)))
        }
    }
}
