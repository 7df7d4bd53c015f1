//! Scenario files: flat TOML, one key per field.
//!
//! Every key is optional. Missing keys take the defaults listed in
//! `scenarios/README.md`; unknown keys are rejected with their line number.

use mimo_isac_core::geometry::{Angles, UpaSpec};
use mimo_isac_core::precoding::Scheme;
use mimo_isac_core::sca::{CrlbLimits, Method, ScaConfig};
use mimo_isac_core::{db_to_lin, Complex64, InitPolicy, SystemConfig};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{col}: {msg}")]
    Parse { path: String, line: usize, col: usize, msg: String },
    #[error("{path}:{line}: {key}: {msg}")]
    Invalid { path: String, line: usize, key: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    None,
    Snr,
    CrlbThreshold,
    NT,
    PointingError,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Snr => "snr",
            SweepAxis::CrlbThreshold => "crlb_threshold",
            SweepAxis::NT => "n_t",
            SweepAxis::PointingError => "pointing_error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SchemeKey {
    Mrt,
    Zf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MethodKey {
    Proposed,
    EqualCom,
    EqualCs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicyKey {
    HalfPower,
    SmallestP0,
}

/// The raw file contents.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawScenario {
    id: String,
    n_t_h: usize,
    n_t_v: usize,
    n_r_h: usize,
    n_r_v: usize,
    k: usize,
    l: usize,
    tau_c: usize,
    tau_p: usize,
    p_p: f64,
    sigma_c2: f64,
    sigma_s2: f64,
    snr_db: f64,
    alpha_re: f64,
    alpha_im: f64,
    target_theta_deg: f64,
    target_phi_deg: f64,
    pointing_error_deg: f64,
    cell_radius_m: f64,
    r_h_m: f64,
    nu: f64,
    sigma_shadow_db: f64,
    seed: u64,
    crlb_theta_db: f64,
    crlb_phi_db: f64,
    init_policy: PolicyKey,
    max_iters: usize,
    rel_obj_tol: f64,
    sweep: SweepAxis,
    sweep_values: Vec<f64>,
    schemes: Vec<SchemeKey>,
    methods: Vec<MethodKey>,
    large_scale_sets: usize,
    small_scale_draws: usize,
}

impl Default for RawScenario {
    fn default() -> Self {
        let d = SystemConfig::default();
        Self {
            id: "scenario".into(),
            n_t_h: d.tx.n_h,
            n_t_v: d.tx.n_v,
            n_r_h: d.rx.n_h,
            n_r_v: d.rx.n_v,
            k: d.k,
            l: d.l,
            tau_c: d.tau_c,
            tau_p: d.tau_p,
            p_p: d.p_p,
            sigma_c2: d.sigma_c2,
            sigma_s2: d.sigma_s2,
            snr_db: 10.0,
            alpha_re: d.alpha.re,
            alpha_im: d.alpha.im,
            target_theta_deg: 22.5,
            target_phi_deg: 45.0,
            pointing_error_deg: 0.0,
            cell_radius_m: d.cell_radius_m,
            r_h_m: d.r_h_m,
            nu: d.nu,
            sigma_shadow_db: d.sigma_shadow_db,
            seed: d.seed,
            crlb_theta_db: -35.0,
            crlb_phi_db: -35.0,
            init_policy: PolicyKey::SmallestP0,
            max_iters: 50,
            rel_obj_tol: 1e-4,
            sweep: SweepAxis::None,
            sweep_values: Vec::new(),
            schemes: vec![SchemeKey::Mrt, SchemeKey::Zf],
            methods: vec![MethodKey::Proposed, MethodKey::EqualCom, MethodKey::EqualCs],
            large_scale_sets: 10,
            small_scale_draws: 100,
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    /// System at the base point; sweeps override one field per point.
    pub system: SystemConfig,
    pub snr_db: f64,
    pub limits_db: (f64, f64),
    pub pointing_error_deg: f64,
    pub init_policy: InitPolicy,
    pub max_iters: usize,
    pub rel_obj_tol: f64,
    pub sweep: SweepAxis,
    /// Empty for `SweepAxis::None`.
    pub sweep_values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub methods: Vec<Method>,
    pub large_scale_sets: usize,
    pub small_scale_draws: usize,
}

/// Everything that varies along the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub system: SystemConfig,
    pub sca: ScaConfig,
    pub v_angles: Angles,
}

impl Scenario {
    /// The sweep values to run; a single NaN-free base point when not sweeping.
    pub fn points(&self) -> Vec<f64> {
        match self.sweep {
            SweepAxis::None => vec![0.0],
            _ => self.sweep_values.clone(),
        }
    }

    pub fn at(&self, value: f64) -> mimo_isac_core::Result<SweepPoint> {
        let mut system = self.system.clone();
        let mut snr = self.snr_db;
        let mut lim = self.limits_db;
        let mut pe = self.pointing_error_deg;
        match self.sweep {
            SweepAxis::None => {}
            SweepAxis::Snr => snr = value,
            SweepAxis::CrlbThreshold => lim = (value, value),
            SweepAxis::NT => {
                let side = value.sqrt().round() as usize;
                system.tx = UpaSpec::square(side)?;
            }
            SweepAxis::PointingError => pe = value,
        }
        system.p_t = system.sigma_c2 * db_to_lin(snr);
        let mut sca = ScaConfig::new(CrlbLimits::from_db(lim.0, lim.1), self.init_policy);
        sca.max_iters = self.max_iters;
        sca.rel_obj_tol = self.rel_obj_tol;
        let v_angles = system.target.offset(pe.to_radians());
        Ok(SweepPoint { value, system, sca, v_angles })
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, col)
}

/// Line of `key = ...` in the source, or 0 when the key was defaulted.
fn key_line(src: &str, key: &str) -> usize {
    src.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
        .unwrap_or(0)
}

/// Parses and validates scenario text. `path` is only used in diagnostics.
pub fn parse_scenario(src: &str, path: &str) -> Result<Scenario, ConfigError> {
    let raw: RawScenario = toml::from_str(src).map_err(|e| {
        let (line, col) = e.span().map(|s| line_col(src, s.start)).unwrap_or((0, 0));
        ConfigError::Parse { path: path.into(), line, col, msg: e.message().to_string() }
    })?;
    let invalid = |key: &str, msg: String| ConfigError::Invalid {
        path: path.into(),
        line: key_line(src, key),
        key: key.into(),
        msg,
    };

    let tx = UpaSpec::new(raw.n_t_h, raw.n_t_v).map_err(|e| invalid("n_t_h", e.to_string()))?;
    let rx = UpaSpec::new(raw.n_r_h, raw.n_r_v).map_err(|e| invalid("n_r_h", e.to_string()))?;
    let target =
        Angles::from_degrees(raw.target_theta_deg, raw.target_phi_deg).map_err(|e| invalid("target_theta_deg", e.to_string()))?;
    let system = SystemConfig {
        tx,
        rx,
        k: raw.k,
        l: raw.l,
        tau_c: raw.tau_c,
        tau_p: raw.tau_p,
        p_p: raw.p_p,
        sigma_c2: raw.sigma_c2,
        sigma_s2: raw.sigma_s2,
        p_t: raw.sigma_c2 * db_to_lin(raw.snr_db),
        alpha: Complex64::new(raw.alpha_re, raw.alpha_im),
        target,
        cell_radius_m: raw.cell_radius_m,
        r_h_m: raw.r_h_m,
        nu: raw.nu,
        sigma_shadow_db: raw.sigma_shadow_db,
        seed: raw.seed,
    };
    system.validate().map_err(|e| invalid(first_word_key(&e.to_string()), e.to_string()))?;

    if raw.id.is_empty() || raw.id.contains([',', '"', '\n']) {
        return Err(invalid("id", "must be nonempty without commas, quotes or newlines".into()));
    }
    if raw.large_scale_sets == 0 {
        return Err(invalid("large_scale_sets", "must be at least 1".into()));
    }
    if raw.small_scale_draws == 0 {
        return Err(invalid("small_scale_draws", "must be at least 1".into()));
    }
    if raw.schemes.is_empty() {
        return Err(invalid("schemes", "at least one scheme is required".into()));
    }
    if raw.methods.is_empty() {
        return Err(invalid("methods", "at least one method is required".into()));
    }
    if !(raw.rel_obj_tol > 0.0) || raw.max_iters == 0 {
        return Err(invalid("rel_obj_tol", "rel_obj_tol and max_iters must be positive".into()));
    }
    for (key, v) in [("snr_db", raw.snr_db), ("crlb_theta_db", raw.crlb_theta_db), ("crlb_phi_db", raw.crlb_phi_db)] {
        if !v.is_finite() {
            return Err(invalid(key, format!("must be finite, got {v}")));
        }
    }
    match raw.sweep {
        SweepAxis::None => {
            if !raw.sweep_values.is_empty() {
                return Err(invalid("sweep_values", "given without a sweep axis".into()));
            }
        }
        axis => {
            if raw.sweep_values.is_empty() {
                return Err(invalid("sweep_values", format!("sweep = \"{}\" needs values", axis.name())));
            }
            if raw.sweep_values.iter().any(|v| !v.is_finite()) || raw.sweep_values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("sweep_values", "must be finite and strictly increasing".into()));
            }
            if axis == SweepAxis::NT {
                for &v in &raw.sweep_values {
                    let side = v.sqrt().round();
                    if side < 1.0 || side * side != v {
                        return Err(invalid("sweep_values", format!("n_t sweep needs perfect squares, got {v}")));
                    }
                }
            }
        }
    }

    let mut schemes: Vec<Scheme> = raw
        .schemes
        .iter()
        .map(|s| match s {
            SchemeKey::Mrt => Scheme::Mrt,
            SchemeKey::Zf => Scheme::Zf,
        })
        .collect();
    schemes.dedup();
    let mut methods: Vec<Method> = raw
        .methods
        .iter()
        .map(|m| match m {
            MethodKey::Proposed => Method::Proposed,
            MethodKey::EqualCom => Method::EqualCom,
            MethodKey::EqualCs => Method::EqualCs,
        })
        .collect();
    methods.sort();
    methods.dedup();

    let sc = Scenario {
        id: raw.id,
        system,
        snr_db: raw.snr_db,
        limits_db: (raw.crlb_theta_db, raw.crlb_phi_db),
        pointing_error_deg: raw.pointing_error_deg,
        init_policy: match raw.init_policy {
            PolicyKey::HalfPower => InitPolicy::HalfPower,
            PolicyKey::SmallestP0 => InitPolicy::SmallestP0,
        },
        max_iters: raw.max_iters,
        rel_obj_tol: raw.rel_obj_tol,
        sweep: raw.sweep,
        sweep_values: raw.sweep_values,
        schemes,
        methods,
        large_scale_sets: raw.large_scale_sets,
        small_scale_draws: raw.small_scale_draws,
    };
    // every sweep point must produce a valid system
    for v in sc.points() {
        let p = sc.at(v).map_err(|e| invalid("sweep_values", e.to_string()))?;
        p.system.validate().map_err(|e| invalid("sweep_values", e.to_string()))?;
        if sc.schemes.contains(&Scheme::Zf) && p.system.n_t() <= p.system.k {
            return Err(invalid("k", format!("ZF needs N_t > K (N_t = {}, K = {})", p.system.n_t(), p.system.k)));
        }
    }
    Ok(sc)
}

/// Best-effort mapping from a validation message to the offending key.
fn first_word_key(msg: &str) -> &'static str {
    const KEYS: [&str; 12] =
        ["p_p", "sigma_c2", "sigma_s2", "p_t", "cell_radius_m", "r_h_m", "nu", "sigma_shadow_db", "tau_p", "alpha", "K", "minimum"];
    for k in KEYS {
        if msg.contains(k) {
            return match k {
                "p_t" => "snr_db",
                "alpha" => "alpha_re",
                "K" => "k",
                "minimum" => "r_h_m",
                other => other,
            };
        }
    }
    "id"
}

pub fn load_scenario(path: &std::path::Path) -> Result<Scenario, ConfigError> {
    let p = path.display().to_string();
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
    parse_scenario(&src, &p)
}
