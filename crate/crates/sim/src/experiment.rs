//! Seeded Monte-Carlo runs of the four experiments.
//!
//! Trials at the same index share one layout and fading realization across
//! schemes and sweep points, so comparisons between them are paired.

use rayon::prelude::*;
use riscf_core::channel::generate_layout;
use riscf_core::driver::{run_scheme, AlgoConfig, Scheme, Trace};
use riscf_core::model::{ResidualReport, SystemParams};
use riscf_core::scalar::dbm_to_watts;
use riscf_core::Error;

use crate::config::{Config, Experiment, ExperimentSpec};

/// Largest constraint violation accepted in a reported row.
pub const VIOLATION_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrialStatus {
    Ok,
    /// The initialization could not reach a feasible point.
    Infeasible,
    /// A solver or audit error ended the run.
    Failed,
    /// The output breaks a constraint by more than [`VIOLATION_TOL`].
    Violation,
    /// The closing projection moved EE by more than `10 · unit_modulus_tol`.
    Flagged,
}

impl TrialStatus {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Infeasible => "infeasible",
            Self::Failed => "failed",
            Self::Violation => "violation",
            Self::Flagged => "flagged",
        }
    }

    /// Whether the EE of this trial enters the averages.
    pub fn counts(self) -> bool {
        matches!(self, Self::Ok | Self::Flagged)
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    /// Sweep value: P^max in dBm, C^max in b/s/Hz, or K for convergence.
    pub x: f64,
    pub scheme: Scheme,
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    pub ee: Option<f64>,
    pub max_violation: Option<f64>,
    pub message: String,
    pub trace: Option<Trace<f64>>,
}

pub fn run_trial(spec: &ExperimentSpec, params: &SystemParams<f64>, scheme: Scheme, trial: usize, x: f64) -> TrialOutcome {
    let seed = spec.instance_seed(trial);
    let config = AlgoConfig { seed, scheme, ..spec.algo.clone() };
    let d = params.dims;
    let result = generate_layout(d.aps, d.surfaces, d.users, spec.radius_m, seed)
        .and_then(|layout| Ok((layout, spec.fading(seed)?)))
        .and_then(|(layout, fading)| run_scheme(&layout, &fading, params, &config));
    let mut out = TrialOutcome {
        x,
        scheme,
        trial,
        seed,
        status: TrialStatus::Ok,
        ee: None,
        max_violation: None,
        message: String::new(),
        trace: None,
    };
    match result {
        Ok((_, trace)) => {
            let viol = trace.final_residuals.max_violation();
            out.status = if viol > VIOLATION_TOL {
                TrialStatus::Violation
            } else if trace.projection_flagged {
                TrialStatus::Flagged
            } else {
                TrialStatus::Ok
            };
            out.ee = Some(trace.final_ee);
            out.max_violation = Some(viol);
            out.trace = Some(trace);
        }
        Err(e) => {
            out.status = match e {
                Error::InfeasibleInstance(_) => TrialStatus::Infeasible,
                _ => TrialStatus::Failed,
            };
            out.message = e.to_string();
        }
    }
    log::debug!("{} x={} trial {}: {} {}", scheme.name(), x, trial, out.status.name(), out.message);
    out
}

/// Mean and standard error; the error needs at least two samples.
pub fn mean_se(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (Some(mean), None);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

/// Trial counts by status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatusCounts {
    pub ok: usize,
    pub infeasible: usize,
    pub failed: usize,
    pub violation: usize,
    pub flagged: usize,
}

impl StatusCounts {
    pub fn of<'a>(trials: impl IntoIterator<Item = &'a TrialOutcome>) -> Self {
        let mut c = Self::default();
        for t in trials {
            match t.status {
                TrialStatus::Ok => c.ok += 1,
                TrialStatus::Infeasible => c.infeasible += 1,
                TrialStatus::Failed => c.failed += 1,
                TrialStatus::Violation => c.violation += 1,
                TrialStatus::Flagged => c.flagged += 1,
            }
        }
        c
    }

    /// `ok`, or the most serious problem among the trials.
    pub fn status(&self) -> &'static str {
        if self.violation > 0 {
            "violation"
        } else if self.failed > 0 {
            "failed"
        } else if self.infeasible > 0 {
            if self.ok + self.flagged > 0 {
                "partial"
            } else {
                "infeasible"
            }
        } else if self.flagged > 0 {
            "flagged"
        } else {
            "ok"
        }
    }

    pub fn tolerated(&self, allow_infeasible: bool, allow_failures: bool) -> bool {
        self.violation == 0
            && (self.infeasible == 0 || allow_infeasible)
            && (self.failed + self.flagged == 0 || allow_failures)
    }
}

/// Which trials a sweep row averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    /// Every trial that produced a usable result at this point.
    Feasible,
    /// Only trials usable at every point of the sweep for this scheme, so
    /// all points average the same instances.
    Paired,
    /// Every trial, with an infeasible instance counted as EE 0. Rows with
    /// failed or violating trials are reported but not averaged.
    Outage,
}

impl Aggregate {
    pub fn name(self) -> &'static str {
        match self {
            Self::Feasible => "feasible",
            Self::Paired => "paired",
            Self::Outage => "outage",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub scheme: Scheme,
    pub aggregate: Aggregate,
    pub trials: usize,
    /// Trials entering the mean.
    pub used: usize,
    pub counts: StatusCounts,
    pub ee_mean: Option<f64>,
    pub ee_se: Option<f64>,
    /// Largest violation over the trials entering the mean.
    pub max_violation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub k: usize,
    pub scheme: Scheme,
    pub iteration: usize,
    pub used: usize,
    pub ee_mean: Option<f64>,
    pub ee_se: Option<f64>,
    pub counts: StatusCounts,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub experiment: Experiment,
    pub trials: Vec<TrialOutcome>,
    pub sweep_rows: Vec<SweepRow>,
    pub convergence_rows: Vec<ConvergenceRow>,
    /// Final residuals of the single run.
    pub residuals: Option<ResidualReport<f64>>,
}

impl ExperimentOutput {
    /// Status counts of every row the output files carry.
    pub fn row_counts(&self) -> Vec<StatusCounts> {
        match self.experiment {
            Experiment::EeVsPmax | Experiment::EeVsBackhaul => self.sweep_rows.iter().map(|r| r.counts).collect(),
            Experiment::Convergence => self.convergence_rows.iter().map(|r| r.counts).collect(),
            Experiment::Single => vec![StatusCounts::of(&self.trials)],
        }
    }
}

fn with_pmax(params: &SystemParams<f64>, dbm: f64) -> SystemParams<f64> {
    let mut p = params.clone();
    p.pmax_w = vec![dbm_to_watts(dbm); p.dims.aps];
    p
}

fn with_cmax(params: &SystemParams<f64>, bps_hz: f64) -> SystemParams<f64> {
    let mut p = params.clone();
    p.backhaul_cap_nats = vec![bps_hz * std::f64::consts::LN_2; p.dims.aps];
    p
}

fn with_antennas(params: &SystemParams<f64>, k: usize) -> SystemParams<f64> {
    let mut p = params.clone();
    p.dims.antennas = k;
    p
}

/// Runs every `(point, scheme, trial)` in parallel; output order is
/// point-major, then scheme, then trial.
fn run_grid(cfg: &Config, points: &[(f64, SystemParams<f64>)]) -> Vec<TrialOutcome> {
    let spec = &cfg.spec;
    let tasks: Vec<(usize, Scheme, usize)> = (0..points.len())
        .flat_map(|i| spec.schemes.iter().flat_map(move |&s| (0..spec.trials).map(move |t| (i, s, t))))
        .collect();
    tasks
        .par_iter()
        .map(|&(i, s, t)| run_trial(spec, &points[i].1, s, t, points[i].0))
        .collect()
}

fn sweep_rows(spec: &ExperimentSpec, xs: &[f64], trials: &[TrialOutcome]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &scheme in &spec.schemes {
        let of_scheme: Vec<&TrialOutcome> = trials.iter().filter(|t| t.scheme == scheme).collect();
        let paired: Vec<usize> = (0..spec.trials)
            .filter(|&i| xs.iter().all(|&x| of_scheme.iter().any(|t| t.trial == i && t.x == x && t.status.counts())))
            .collect();
        for &x in xs {
            let here: Vec<&TrialOutcome> = of_scheme.iter().copied().filter(|t| t.x == x).collect();
            let counts = StatusCounts::of(here.iter().copied());
            for aggregate in [Aggregate::Feasible, Aggregate::Paired, Aggregate::Outage] {
                let used: Vec<&TrialOutcome> = here
                    .iter()
                    .copied()
                    .filter(|t| match aggregate {
                        Aggregate::Feasible => t.status.counts(),
                        Aggregate::Paired => t.status.counts() && paired.contains(&t.trial),
                        Aggregate::Outage => t.status.counts() || t.status == TrialStatus::Infeasible,
                    })
                    .collect();
                let ee: Vec<f64> = if aggregate == Aggregate::Outage && used.len() < here.len() {
                    Vec::new()
                } else {
                    used.iter().map(|t| t.ee.unwrap_or(0.0)).collect()
                };
                let (ee_mean, ee_se) = mean_se(&ee);
                let max_violation = used.iter().filter_map(|t| t.max_violation).reduce(f64::max);
                rows.push(SweepRow {
                    x,
                    scheme,
                    aggregate,
                    trials: here.len(),
                    used: used.len(),
                    counts,
                    ee_mean,
                    ee_se,
                    max_violation,
                });
            }
        }
    }
    rows.sort_by(|a, b| a.x.total_cmp(&b.x));
    rows
}

/// Per-iteration EE averaged over trials; a trial that stopped early keeps
/// contributing its final EE.
fn convergence_rows(spec: &ExperimentSpec, trials: &[TrialOutcome]) -> Vec<ConvergenceRow> {
    let mut rows = Vec::new();
    for &k in &spec.k_list {
        for &scheme in &spec.schemes {
            let group: Vec<&TrialOutcome> = trials.iter().filter(|t| t.x == k as f64 && t.scheme == scheme).collect();
            let counts = StatusCounts::of(group.iter().copied());
            let curves: Vec<Vec<f64>> = group
                .iter()
                .filter(|t| t.status.counts())
                .filter_map(|t| t.trace.as_ref())
                .map(|tr| tr.records.iter().map(|r| r.ee).collect())
                .collect();
            let len = curves.iter().map(Vec::len).max().unwrap_or(0);
            for iteration in 0..len {
                let at: Vec<f64> = curves.iter().map(|c| c[iteration.min(c.len() - 1)]).collect();
                let (ee_mean, ee_se) = mean_se(&at);
                rows.push(ConvergenceRow {
                    k,
                    scheme,
                    iteration,
                    used: at.len(),
                    ee_mean,
                    ee_se,
                    counts,
                });
            }
        }
    }
    rows
}

pub fn run_experiment(cfg: &Config) -> ExperimentOutput {
    let spec = &cfg.spec;
    let mut out = ExperimentOutput {
        experiment: spec.experiment,
        trials: Vec::new(),
        sweep_rows: Vec::new(),
        convergence_rows: Vec::new(),
        residuals: None,
    };
    match spec.experiment {
        Experiment::EeVsPmax | Experiment::EeVsBackhaul => {
            let xs = if spec.experiment == Experiment::EeVsPmax {
                &spec.pmax_sweep_dbm
            } else {
                &spec.cmax_sweep_bps_hz
            };
            let points: Vec<(f64, SystemParams<f64>)> = xs
                .iter()
                .map(|&x| {
                    let p = if spec.experiment == Experiment::EeVsPmax {
                        with_pmax(&cfg.params, x)
                    } else {
                        with_cmax(&cfg.params, x)
                    };
                    (x, p)
                })
                .collect();
            out.trials = run_grid(cfg, &points);
            out.sweep_rows = sweep_rows(spec, xs, &out.trials);
        }
        Experiment::Convergence => {
            let points: Vec<(f64, SystemParams<f64>)> =
                spec.k_list.iter().map(|&k| (k as f64, with_antennas(&cfg.params, k))).collect();
            out.trials = run_grid(cfg, &points);
            out.convergence_rows = convergence_rows(spec, &out.trials);
        }
        Experiment::Single => {
            let t = run_trial(spec, &cfg.params, spec.schemes[0], 0, 0.0);
            out.residuals = t.trace.as_ref().map(|tr| tr.final_residuals.clone());
            out.trials = vec![t];
        }
    }
    out
}
