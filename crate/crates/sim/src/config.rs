//! Experiment configuration files.
//!
//! A config is a flat list of `key = value` lines (TOML syntax). Every key
//! is optional; an empty file gives the Table I setup at full scale. Powers
//! are given in dBm or dBW, rates in b/s/Hz, and are converted to watts and
//! nats here.

use std::path::Path;
use std::str::FromStr;

use riscf_core::channel::{Dims, FadingParams};
use riscf_core::conic::SolverSettings;
use riscf_core::driver::{AlgoConfig, Scheme};
use riscf_core::model::SystemParams;
use riscf_core::scalar::{db_to_linear, dbm_to_watts};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {message}")]
    AtLine { line: usize, message: String },
    #[error("{0}")]
    General(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Convergence,
    EeVsPmax,
    EeVsBackhaul,
    Single,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Self::Convergence, Self::EeVsPmax, Self::EeVsBackhaul, Self::Single];

    pub fn name(self) -> &'static str {
        match self {
            Self::Convergence => "convergence",
            Self::EeVsPmax => "ee_vs_pmax",
            Self::EeVsBackhaul => "ee_vs_backhaul",
            Self::Single => "single",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}' (expected one of convergence, ee_vs_pmax, ee_vs_backhaul, single)"))
    }
}

/// Everything a run needs besides the system parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub pmax_sweep_dbm: Vec<f64>,
    pub cmax_sweep_bps_hz: Vec<f64>,
    /// Antenna counts compared by the convergence experiment.
    pub k_list: Vec<usize>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    /// Trial `t` uses instance seed `seed + t` for layout, fading and phases.
    pub seed: u64,
    pub radius_m: f64,
    pub shadow_std_db: f64,
    pub ref_dist_0_m: f64,
    pub ref_dist_1_m: f64,
    pub algo: AlgoConfig<f64>,
}

impl ExperimentSpec {
    pub fn fading(&self, seed: u64) -> riscf_core::Result<FadingParams<f64>> {
        FadingParams::new(self.shadow_std_db, self.ref_dist_0_m, self.ref_dist_1_m, seed)
    }

    pub fn instance_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub spec: ExperimentSpec,
    pub params: SystemParams<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Raw {
    experiment: String,
    aps: usize,
    surfaces: usize,
    users: usize,
    antennas: usize,
    elements: usize,
    radius_m: f64,
    bandwidth_mhz: f64,
    noise_dbm: f64,
    pmax_dbm: f64,
    xi: f64,
    p_ap_dbw: f64,
    p_ue_dbm: f64,
    p_ris_dbm: f64,
    p_bh_dbw: f64,
    cmax_bps_hz: f64,
    backhaul_scale: f64,
    rmin_bps_hz: f64,
    shadow_db: f64,
    d0_m: f64,
    d1_m: f64,
    penalty: f64,
    trials: usize,
    seed: u64,
    schemes: Vec<String>,
    pmax_sweep_dbm: Vec<f64>,
    cmax_sweep_bps_hz: Vec<f64>,
    k_list: Vec<usize>,
    max_outer_iters: usize,
    ee_rel_tol: f64,
    unit_modulus_tol: f64,
    solver_tol: f64,
    solver_max_iters: usize,
    feasibility_iters: usize,
}

impl Default for Raw {
    fn default() -> Self {
        let algo = AlgoConfig::<f64>::default();
        Self {
            experiment: "single".into(),
            aps: 4,
            surfaces: 4,
            users: 8,
            antennas: 8,
            elements: 8,
            radius_m: 1000.0,
            bandwidth_mhz: 20.0,
            noise_dbm: -104.0,
            pmax_dbm: 35.0,
            xi: 1.2,
            p_ap_dbw: 9.0,
            p_ue_dbm: 10.0,
            p_ris_dbm: 10.0,
            p_bh_dbw: 0.0,
            cmax_bps_hz: 500.0,
            backhaul_scale: 1.0,
            rmin_bps_hz: 0.5,
            shadow_db: 8.0,
            d0_m: 10.0,
            d1_m: 50.0,
            penalty: 1e3,
            trials: 50,
            seed: 0,
            schemes: Scheme::ALL.iter().map(|s| s.name().to_string()).collect(),
            pmax_sweep_dbm: vec![20.0, 25.0, 30.0, 35.0],
            cmax_sweep_bps_hz: vec![5.0, 10.0, 50.0, 500.0],
            k_list: vec![4, 8],
            max_outer_iters: algo.max_outer_iters,
            ee_rel_tol: algo.ee_rel_tol,
            unit_modulus_tol: algo.unit_modulus_tol,
            solver_tol: algo.solver.tol,
            solver_max_iters: algo.solver.max_iters,
            feasibility_iters: algo.feasibility_iters,
        }
    }
}

/// 1-based line on which `key` is assigned, if any.
fn line_of(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn line_at_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

struct Checker<'a> {
    src: &'a str,
}

impl Checker<'_> {
    fn fail(&self, key: &str, message: String) -> ConfigError {
        match line_of(self.src, key) {
            Some(line) => ConfigError::AtLine { line, message: format!("{key}: {message}") },
            None => ConfigError::General(format!("{key}: {message}")),
        }
    }

    fn require(&self, key: &str, ok: bool, what: &str) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(self.fail(key, what.to_string()))
        }
    }
}

pub fn parse_config(src: &str) -> Result<Config, ConfigError> {
    let raw: Raw = toml::from_str(src).map_err(|e| {
        let message = e.message().to_string();
        match e.span() {
            Some(span) => ConfigError::AtLine { line: line_at_offset(src, span.start), message },
            None => ConfigError::General(message),
        }
    })?;
    let c = Checker { src };

    let experiment = raw.experiment.parse::<Experiment>().map_err(|m| c.fail("experiment", m))?;
    for (key, v) in [
        ("aps", raw.aps),
        ("surfaces", raw.surfaces),
        ("users", raw.users),
        ("antennas", raw.antennas),
        ("elements", raw.elements),
        ("trials", raw.trials),
        ("max_outer_iters", raw.max_outer_iters),
        ("solver_max_iters", raw.solver_max_iters),
    ] {
        c.require(key, v >= 1, "must be at least 1")?;
    }
    let positive = [
        ("radius_m", raw.radius_m),
        ("bandwidth_mhz", raw.bandwidth_mhz),
        ("cmax_bps_hz", raw.cmax_bps_hz),
        ("d0_m", raw.d0_m),
        ("d1_m", raw.d1_m),
        ("penalty", raw.penalty),
        ("ee_rel_tol", raw.ee_rel_tol),
        ("unit_modulus_tol", raw.unit_modulus_tol),
        ("solver_tol", raw.solver_tol),
    ];
    for (key, v) in positive {
        c.require(key, v > 0.0 && v.is_finite(), "must be positive and finite")?;
    }
    let finite = [
        ("noise_dbm", raw.noise_dbm),
        ("pmax_dbm", raw.pmax_dbm),
        ("p_ap_dbw", raw.p_ap_dbw),
        ("p_ue_dbm", raw.p_ue_dbm),
        ("p_ris_dbm", raw.p_ris_dbm),
        ("p_bh_dbw", raw.p_bh_dbw),
    ];
    for (key, v) in finite {
        c.require(key, v.is_finite(), "must be finite")?;
    }
    c.require("xi", raw.xi >= 1.0 && raw.xi.is_finite(), "amplifier inefficiency must be at least 1")?;
    c.require("backhaul_scale", raw.backhaul_scale >= 1.0 && raw.backhaul_scale.is_finite(), "must be at least 1")?;
    c.require("rmin_bps_hz", raw.rmin_bps_hz >= 0.0 && raw.rmin_bps_hz.is_finite(), "must be nonnegative")?;
    c.require("shadow_db", raw.shadow_db >= 0.0 && raw.shadow_db.is_finite(), "must be nonnegative")?;
    c.require("d1_m", raw.d0_m < raw.d1_m, "must exceed d0_m")?;
    c.require("schemes", !raw.schemes.is_empty(), "must list at least one scheme")?;
    let schemes = raw
        .schemes
        .iter()
        .map(|s| Scheme::from_name(s).ok_or_else(|| c.fail("schemes", format!("unknown scheme '{s}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    let sweep_ok = |v: &[f64]| !v.is_empty() && v.iter().all(|x| x.is_finite());
    c.require("pmax_sweep_dbm", sweep_ok(&raw.pmax_sweep_dbm), "must be a nonempty list of numbers")?;
    c.require(
        "cmax_sweep_bps_hz",
        sweep_ok(&raw.cmax_sweep_bps_hz) && raw.cmax_sweep_bps_hz.iter().all(|&x| x > 0.0),
        "must be a nonempty list of positive numbers",
    )?;
    c.require("k_list", !raw.k_list.is_empty() && raw.k_list.iter().all(|&k| k >= 1), "must be a nonempty list of positive counts")?;

    let dims = Dims::new(raw.aps, raw.surfaces, raw.users, raw.antennas, raw.elements);
    let (m, l) = (raw.aps, raw.users);
    let ln2 = std::f64::consts::LN_2;
    let params = SystemParams {
        dims,
        bandwidth_hz: raw.bandwidth_mhz * 1e6,
        noise_power_w: dbm_to_watts(raw.noise_dbm),
        pmax_w: vec![dbm_to_watts(raw.pmax_dbm); m],
        pa_inefficiency: vec![raw.xi; m],
        p_ap_w: vec![db_to_linear(raw.p_ap_dbw); m],
        p_ue_w: vec![dbm_to_watts(raw.p_ue_dbm); l],
        p_ris_elem_w: dbm_to_watts(raw.p_ris_dbm),
        p_bh_w: db_to_linear(raw.p_bh_dbw),
        backhaul_cap_nats: vec![raw.cmax_bps_hz * ln2; m],
        backhaul_scale: vec![raw.backhaul_scale; m],
        rmin_nats: vec![raw.rmin_bps_hz * ln2; l],
        penalty: raw.penalty,
    };
    params.validate().map_err(|e| ConfigError::General(e.to_string()))?;

    let algo = AlgoConfig {
        max_outer_iters: raw.max_outer_iters,
        ee_rel_tol: raw.ee_rel_tol,
        unit_modulus_tol: raw.unit_modulus_tol,
        penalty: raw.penalty,
        solver: SolverSettings::new(raw.solver_tol, raw.solver_max_iters),
        seed: raw.seed,
        scheme: schemes[0],
        feasibility_iters: raw.feasibility_iters,
        ..AlgoConfig::default()
    };
    let spec = ExperimentSpec {
        experiment,
        pmax_sweep_dbm: raw.pmax_sweep_dbm,
        cmax_sweep_bps_hz: raw.cmax_sweep_bps_hz,
        k_list: raw.k_list,
        trials: raw.trials,
        schemes,
        seed: raw.seed,
        radius_m: raw.radius_m,
        shadow_std_db: raw.shadow_db,
        ref_dist_0_m: raw.d0_m,
        ref_dist_1_m: raw.d1_m,
        algo,
    };
    spec.fading(0).map_err(|e| ConfigError::General(e.to_string()))?;
    Ok(Config { spec, params })
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config(&src)
}
