//! CSV and trace files.
//!
//! Every experiment writes `trials.csv` (one row per trial) and
//! `traces.jsonl` (one JSON object per outer iteration of every completed
//! trial). Sweeps add `<experiment>.csv`, the convergence experiment adds
//! `convergence.csv` and the single run adds `residuals.csv`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::Experiment;
use crate::experiment::{ExperimentOutput, StatusCounts, TrialOutcome};

/// Shortest round-trip form, in exponent notation for very small or large
/// magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-3..1e15).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn num(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn counts_fields(c: &StatusCounts) -> [String; 5] {
    [c.ok, c.infeasible, c.failed, c.violation, c.flagged].map(|n| n.to_string())
}

pub const SWEEP_COLUMNS: [&str; 13] = [
    "scheme",
    "aggregate",
    "trials",
    "used",
    "ok",
    "infeasible",
    "failed",
    "violation",
    "flagged",
    "ee_mean",
    "ee_se",
    "max_violation",
    "status",
];

pub const CONVERGENCE_COLUMNS: [&str; 12] = [
    "k",
    "scheme",
    "iteration",
    "used",
    "ee_mean",
    "ee_se",
    "ok",
    "infeasible",
    "failed",
    "violation",
    "flagged",
    "status",
];

pub const TRIAL_COLUMNS: [&str; 13] = [
    "experiment",
    "x",
    "scheme",
    "trial",
    "seed",
    "status",
    "ee",
    "iterations",
    "iters_to_1pct",
    "feasibility_iters",
    "max_violation",
    "pre_projection_modulus_deviation",
    "message",
];

fn sweep_axis(e: Experiment) -> &'static str {
    match e {
        Experiment::EeVsPmax => "pmax_dbm",
        Experiment::EeVsBackhaul => "cmax_bps_hz",
        Experiment::Convergence => "k",
        Experiment::Single => "x",
    }
}

pub fn write_sweep_csv<W: Write>(out: &ExperimentOutput, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec![sweep_axis(out.experiment)];
    header.extend(SWEEP_COLUMNS);
    wr.write_record(&header)?;
    for r in &out.sweep_rows {
        let mut rec = vec![fmt_f64(r.x), r.scheme.name().into(), r.aggregate.name().into()];
        rec.push(r.trials.to_string());
        rec.push(r.used.to_string());
        rec.extend(counts_fields(&r.counts));
        rec.extend([num(r.ee_mean), num(r.ee_se), num(r.max_violation), r.counts.status().into()]);
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_convergence_csv<W: Write>(out: &ExperimentOutput, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CONVERGENCE_COLUMNS)?;
    for r in &out.convergence_rows {
        let mut rec = vec![
            r.k.to_string(),
            r.scheme.name().into(),
            r.iteration.to_string(),
            r.used.to_string(),
            num(r.ee_mean),
            num(r.ee_se),
        ];
        rec.extend(counts_fields(&r.counts));
        rec.push(r.counts.status().into());
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_trials_csv<W: Write>(out: &ExperimentOutput, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(TRIAL_COLUMNS)?;
    for t in &out.trials {
        let tr = t.trace.as_ref();
        wr.write_record([
            out.experiment.name().to_string(),
            fmt_f64(t.x),
            t.scheme.name().into(),
            t.trial.to_string(),
            t.seed.to_string(),
            t.status.name().into(),
            num(t.ee),
            tr.map(|tr| (tr.records.len() - 1).to_string()).unwrap_or_default(),
            tr.map(|tr| tr.iterations_to_within(0.01).to_string()).unwrap_or_default(),
            tr.map(|tr| tr.feasibility_iters.to_string()).unwrap_or_default(),
            num(t.max_violation),
            num(tr.map(|tr| tr.pre_projection_modulus_deviation)),
            t.message.clone(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// One line per outer iteration: iteration, EE, sum rate, power and
/// residuals, keyed by experiment point, scheme and trial.
pub fn write_traces<W: Write>(out: &ExperimentOutput, mut w: W) -> std::io::Result<()> {
    for t in &out.trials {
        let Some(tr) = &t.trace else { continue };
        for r in &tr.records {
            let line = json!({
                "experiment": out.experiment.name(),
                "x": t.x,
                "scheme": t.scheme.name(),
                "trial": t.trial,
                "seed": t.seed,
                "iteration": r.iteration,
                "ee": r.ee,
                "sum_rate_nats": r.sum_rate,
                "power_w": r.power,
                "max_violation": r.max_violation,
                "max_modulus_deviation": r.max_modulus_deviation,
                "ee_after_beamforming": r.ee_after_beamforming,
                "beamforming_status": r.beamforming_status.map(|s| format!("{s:?}")),
                "phase_status": r.phase_status.map(|s| format!("{s:?}")),
                "solver_iterations": r.solver_iterations,
                "beamforming_tightness": r.beamforming_tightness,
                "phase_tightness": r.phase_tightness,
                "wall_time_s": r.wall_time_s,
            });
            writeln!(w, "{line}")?;
        }
    }
    w.flush()
}

pub fn write_residuals_csv<W: Write>(out: &ExperimentOutput, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["family", "index", "margin"])?;
    if let Some(res) = &out.residuals {
        for (family, v) in [("power", &res.power), ("rate", &res.rate), ("backhaul", &res.backhaul), ("modulus", &res.modulus)] {
            for (i, m) in v.iter().enumerate() {
                wr.write_record([family.to_string(), i.to_string(), fmt_f64(*m)])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> std::io::Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    Ok((path, BufWriter::new(f)))
}

/// Writes every file of `out` into `dir` and returns their paths.
pub fn write_all(out: &ExperimentOutput, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let io = |e: csv::Error| std::io::Error::other(e.to_string());
    match out.experiment {
        Experiment::EeVsPmax | Experiment::EeVsBackhaul => {
            let (p, w) = create(dir, &format!("{}.csv", out.experiment.name()))?;
            write_sweep_csv(out, w).map_err(io)?;
            paths.push(p);
        }
        Experiment::Convergence => {
            let (p, w) = create(dir, "convergence.csv")?;
            write_convergence_csv(out, w).map_err(io)?;
            paths.push(p);
        }
        Experiment::Single => {
            let (p, w) = create(dir, "residuals.csv")?;
            write_residuals_csv(out, w).map_err(io)?;
            paths.push(p);
        }
    }
    let (p, w) = create(dir, "trials.csv")?;
    write_trials_csv(out, w).map_err(io)?;
    paths.push(p);
    let (p, w) = create(dir, "traces.jsonl")?;
    write_traces(out, w)?;
    paths.push(p);
    Ok(paths)
}

/// Trials that did not end `ok`, for the command-line summary.
pub fn problem_trials(out: &ExperimentOutput) -> impl Iterator<Item = &TrialOutcome> {
    out.trials.iter().filter(|t| t.status != crate::experiment::TrialStatus::Ok)
}
