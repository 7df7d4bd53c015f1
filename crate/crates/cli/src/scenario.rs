//! Runs a scenario: one row per (sweep point, large-scale set, scheme, method),
//! plus one aggregate row per (sweep point, scheme, method).

use std::time::Instant;

use mimo_isac_core::channel::draw_large_scale;
use mimo_isac_core::precoding::{comm_power_factor, xi_bf, PowerAllocation, Scheme};
use mimo_isac_core::rate::{batches, closed_form_rate, monte_carlo_batch, RateAccumulator};
use mimo_isac_core::rng::{derive_seed, stream, Domain};
use mimo_isac_core::sca::{benchmark_allocations, Method};
use mimo_isac_core::sensing::{crlb_general, fisher_blocks_general};
use mimo_isac_core::{lin_to_db, Error, LargeScaleSet, RateReport, SystemConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Scenario, SweepPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// CRLB limits cannot be met (or the SCA subproblem lost its interior).
    Infeasible,
    /// Solver breakdown or a non-monotone SCA step.
    NumericalError,
}

impl RowStatus {
    pub fn name(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Infeasible => "infeasible",
            RowStatus::NumericalError => "numerical_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    /// Large-scale set index; `None` on aggregate rows.
    pub set: Option<usize>,
    pub scheme: String,
    pub method: String,
    pub sweep_axis: String,
    pub sweep_value: f64,
    pub status: RowStatus,
    /// Sets contributing to the row (1 or 0 on per-set rows).
    pub feasible_sets: usize,
    /// Closed-form sum rate, bit/s/Hz.
    pub sum_rate: Option<f64>,
    /// Monte-Carlo sum rate over `small_scale_draws` realizations.
    pub sum_rate_mc: Option<f64>,
    pub per_user_rates: Vec<f64>,
    /// rad^2
    pub crlb_theta: Option<f64>,
    pub crlb_phi: Option<f64>,
    pub crlb_theta_db: Option<f64>,
    pub crlb_phi_db: Option<f64>,
    /// `N_t xi_bf^T gamma`
    pub comm_power: Option<f64>,
    /// `N_t rho`
    pub sensing_power: Option<f64>,
    /// SCA iterations; `None` for the fixed split.
    pub iterations: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<ResultRow>,
}

impl ResultTable {
    /// Per-set rows followed by aggregates, in job order.
    pub fn all(&self) -> Vec<ResultRow> {
        self.rows.iter().chain(&self.aggregates).cloned().collect()
    }

    pub fn count(&self, status: RowStatus) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    point: usize,
    set: usize,
    scheme: Scheme,
    method: Method,
}

/// Monte-Carlo rate with batches fanned out over the pool. Batches are merged
/// in index order, so the result does not depend on the thread count.
pub fn parallel_monte_carlo_rate(
    ls: &LargeScaleSet,
    scheme: Scheme,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    draws: usize,
    seed: u64,
) -> mimo_isac_core::Result<RateReport> {
    let parts: Vec<_> = batches(draws)
        .into_par_iter()
        .map(|(b, n)| monte_carlo_batch(ls, scheme, alloc, cfg, seed, b, n))
        .collect::<Result<_, _>>()?;
    let mut acc = RateAccumulator::new(ls.k());
    for p in &parts {
        acc.merge(p);
    }
    Ok(RateReport::from_sinr(acc.sinr(cfg.sigma_c2), cfg.tau_bar()))
}

struct Measured {
    rate: RateReport,
    rate_mc: f64,
    crlb: (f64, f64),
    comm: f64,
    sens: f64,
    iterations: Option<usize>,
}

fn evaluate(sc: &Scenario, pt: &SweepPoint, job: Job) -> Result<Measured, Error> {
    let cfg = &pt.system;
    let ls = draw_large_scale(cfg, &mut stream(cfg.seed, Domain::LargeScale, job.set as u64))?;
    let (alloc, trace) = benchmark_allocations(&ls, job.scheme, cfg, job.method, &pt.sca)?;
    let rate = closed_form_rate(&ls, job.scheme, &alloc, cfg)?;
    let mc_seed = derive_seed(cfg.seed, job.set as u64);
    let rate_mc = parallel_monte_carlo_rate(&ls, job.scheme, &alloc, cfg, sc.small_scale_draws, mc_seed)?.sum_rate;
    let blocks = fisher_blocks_general(&ls, job.scheme, &alloc, cfg, pt.v_angles)?;
    let c = crlb_general(&blocks)?;
    let n = cfg.n_t() as f64;
    let xb = xi_bf(&ls, job.scheme, cfg.n_t())?;
    Ok(Measured {
        rate,
        rate_mc,
        crlb: (c.crlb_theta, c.crlb_phi),
        comm: n * comm_power_factor(&xb, &alloc.gamma),
        sens: n * alloc.rho,
        iterations: trace.map(|t| t.iterations()),
    })
}

fn run_job(sc: &Scenario, points: &[SweepPoint], job: Job) -> ResultRow {
    let pt = &points[job.point];
    let t0 = Instant::now();
    let out = evaluate(sc, pt, job);
    let mut row = ResultRow {
        scenario: sc.id.clone(),
        set: Some(job.set),
        scheme: job.scheme.name().into(),
        method: job.method.name().into(),
        sweep_axis: sc.sweep.name().into(),
        sweep_value: pt.value,
        status: RowStatus::Ok,
        feasible_sets: 0,
        sum_rate: None,
        sum_rate_mc: None,
        per_user_rates: Vec::new(),
        crlb_theta: None,
        crlb_phi: None,
        crlb_theta_db: None,
        crlb_phi_db: None,
        comm_power: None,
        sensing_power: None,
        iterations: None,
        wall_time_s: 0.0,
    };
    match out {
        Ok(m) => {
            row.feasible_sets = 1;
            row.sum_rate = Some(m.rate.sum_rate);
            row.sum_rate_mc = Some(m.rate_mc);
            row.per_user_rates = m.rate.per_user_rate;
            row.crlb_theta = Some(m.crlb.0);
            row.crlb_phi = Some(m.crlb.1);
            row.crlb_theta_db = Some(lin_to_db(m.crlb.0));
            row.crlb_phi_db = Some(lin_to_db(m.crlb.1));
            row.comm_power = Some(m.comm);
            row.sensing_power = Some(m.sens);
            row.iterations = m.iterations.map(|i| i as f64);
        }
        Err(Error::Infeasible(_)) | Err(Error::EstimationImpossible) => row.status = RowStatus::Infeasible,
        Err(_) => row.status = RowStatus::NumericalError,
    }
    row.wall_time_s = t0.elapsed().as_secs_f64();
    row
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Mean over the rows with status `Ok`. The dB columns are recomputed from
/// the averaged rad^2 columns.
pub fn aggregate(rows: &[ResultRow]) -> ResultRow {
    let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.status == RowStatus::Ok).collect();
    let first = &rows[0];
    let avg = |f: &dyn Fn(&ResultRow) -> Option<f64>| mean(ok.iter().filter_map(|r| f(r)));
    let k = ok.first().map(|r| r.per_user_rates.len()).unwrap_or(0);
    let per_user = (0..k).map(|i| mean(ok.iter().map(|r| r.per_user_rates[i])).unwrap_or(f64::NAN)).collect();
    let crlb_theta = avg(&|r| r.crlb_theta);
    let crlb_phi = avg(&|r| r.crlb_phi);
    ResultRow {
        scenario: first.scenario.clone(),
        set: None,
        scheme: first.scheme.clone(),
        method: first.method.clone(),
        sweep_axis: first.sweep_axis.clone(),
        sweep_value: first.sweep_value,
        status: if ok.is_empty() { RowStatus::Infeasible } else { RowStatus::Ok },
        feasible_sets: ok.len(),
        sum_rate: avg(&|r| r.sum_rate),
        sum_rate_mc: avg(&|r| r.sum_rate_mc),
        per_user_rates: per_user,
        crlb_theta,
        crlb_phi,
        crlb_theta_db: crlb_theta.map(lin_to_db),
        crlb_phi_db: crlb_phi.map(lin_to_db),
        comm_power: avg(&|r| r.comm_power),
        sensing_power: avg(&|r| r.sensing_power),
        iterations: avg(&|r| r.iterations),
        wall_time_s: rows.iter().map(|r| r.wall_time_s).sum::<f64>() / rows.len() as f64,
    }
}

/// Runs every job of `sc` on the current rayon pool.
pub fn run_scenario(sc: &Scenario) -> mimo_isac_core::Result<ResultTable> {
    let points: Vec<SweepPoint> = sc.points().into_iter().map(|v| sc.at(v)).collect::<Result<_, _>>()?;
    let mut jobs = Vec::new();
    for point in 0..points.len() {
        for &scheme in &sc.schemes {
            for &method in &sc.methods {
                for set in 0..sc.large_scale_sets {
                    jobs.push(Job { point, set, scheme, method });
                }
            }
        }
    }
    let rows: Vec<ResultRow> = jobs.par_iter().map(|&j| run_job(sc, &points, j)).collect();
    let aggregates = rows.chunks(sc.large_scale_sets).map(aggregate).collect();
    Ok(ResultTable { rows, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_scenario;

    const SMALL: &str = r#"
id = "small"
n_t_h = 4
n_t_v = 4
n_r_h = 2
n_r_v = 2
k = 3
large_scale_sets = 3
small_scale_draws = 40
crlb_theta_db = -10.0
crlb_phi_db = -10.0
sweep = "snr"
sweep_values = [5.0, 15.0]
"#;

    #[test]
    fn one_row_per_job_and_aggregate_is_the_mean() {
        let sc = parse_scenario(SMALL, "t").unwrap();
        let t = run_scenario(&sc).unwrap();
        assert_eq!(t.rows.len(), 2 * 2 * 3 * 3);
        assert_eq!(t.aggregates.len(), 2 * 2 * 3);
        for (chunk, agg) in t.rows.chunks(3).zip(&t.aggregates) {
            let ok: Vec<_> = chunk.iter().filter(|r| r.status == RowStatus::Ok).collect();
            assert_eq!(agg.feasible_sets, ok.len());
            if ok.is_empty() {
                continue;
            }
            let m = ok.iter().map(|r| r.sum_rate.unwrap()).sum::<f64>() / ok.len() as f64;
            assert!((agg.sum_rate.unwrap() - m).abs() <= 1e-12 * m.abs());
            let c = ok.iter().map(|r| r.crlb_phi.unwrap()).sum::<f64>() / ok.len() as f64;
            assert!((agg.crlb_phi.unwrap() - c).abs() <= 1e-12 * c);
            assert!((agg.crlb_phi_db.unwrap() - 10.0 * c.log10()).abs() <= 1e-9);
        }
        let bad: Vec<_> = t.rows.iter().filter(|r| r.status != RowStatus::Ok).map(|r| (r.scheme.clone(), r.method.clone(), r.sweep_value, r.set, r.status)).collect();
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn results_do_not_depend_on_the_thread_count() {
        let sc = parse_scenario(SMALL, "t").unwrap();
        let run = |n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            let mut t = pool.install(|| run_scenario(&sc)).unwrap();
            for r in t.rows.iter_mut().chain(t.aggregates.iter_mut()) {
                r.wall_time_s = 0.0;
            }
            t
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn impossible_limits_are_flagged_not_fatal() {
        let src = format!("{SMALL}\nmethods = [\"proposed\"]\n").replace("-10.0", "-90.0");
        let sc = parse_scenario(&src, "t").unwrap();
        let t = run_scenario(&sc).unwrap();
        assert!(t.rows.iter().all(|r| r.status == RowStatus::Infeasible));
        assert!(t.aggregates.iter().all(|r| r.status == RowStatus::Infeasible && r.sum_rate.is_none()));
    }
}
