//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails the
//! test target if a criterion outside [`KNOWN_FAILURES`] fails. A
//! statistical tie in the scheme ordering is reported as FLAG and does not
//! fail.

use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riscf_core::channel::{generate_channels, generate_layout, ChannelSet, Dims, FadingParams, Layout};
use riscf_core::conic::{solve, SolveStatus, SolverSettings};
use riscf_core::driver::{run, run_scheme, AlgoConfig, Scheme, Trace};
use riscf_core::model::{NetworkState, SystemParams};
use riscf_core::surrogate::rate_ratio_bound;
use riscf_core::Error;
use riscf_sim::experiment::{mean_se, TrialStatus};
use riscf_sim::{parse_config, run_experiment, Experiment, TrialOutcome};

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

/// Criteria that fail for a documented reason (see the README). They are
/// still evaluated and printed as FAIL.
const KNOWN_FAILURES: &[&str] = &["AC9"];

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Flag,
    Fail,
}

struct Report {
    lines: Vec<(String, Verdict, String)>,
}

impl Report {
    fn record(&mut self, id: &str, verdict: Verdict, detail: String) {
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Flag => "FLAG",
            Verdict::Fail => "FAIL",
        };
        println!("{id} {tag} {detail}");
        self.lines.push((id.to_string(), verdict, detail));
    }
}

fn desk_dims() -> Dims {
    Dims::new(2, 2, 3, 2, 4)
}

fn full_dims() -> Dims {
    Dims::new(4, 4, 8, 8, 8)
}

fn instance(d: Dims, seed: u64) -> (Layout<f64>, FadingParams<f64>) {
    let lay = generate_layout(d.aps, d.surfaces, d.users, 1000.0, seed).unwrap();
    (lay, FadingParams::new(8.0, 10.0, 50.0, seed).unwrap())
}

fn channels(d: Dims, seed: u64) -> ChannelSet<f64> {
    let (lay, fad) = instance(d, seed);
    generate_channels(&lay, &fad, d.antennas, d.elements).unwrap()
}

fn cfg(seed: u64, scheme: Scheme) -> AlgoConfig<f64> {
    AlgoConfig { seed, scheme, ..AlgoConfig::default() }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Constraint checks applied to every accepted output.
#[derive(Default)]
struct Ac5 {
    runs: usize,
    worst_violation: f64,
    worst_pre_projection: f64,
    worst_final_modulus: f64,
}

impl Ac5 {
    fn check(&mut self, state: &NetworkState<f64>, trace: &Trace<f64>) {
        self.runs += 1;
        self.worst_violation = self.worst_violation.max(trace.final_residuals.max_violation());
        self.worst_pre_projection = self.worst_pre_projection.max(trace.pre_projection_modulus_deviation);
        let after = if state.psi.is_empty() { 0.0 } else { state.psi.max_modulus_deviation() };
        self.worst_final_modulus = self.worst_final_modulus.max(after);
    }

    fn check_no_surfaces(&mut self, trace: &Trace<f64>) {
        self.runs += 1;
        self.worst_violation = self.worst_violation.max(trace.final_residuals.max_violation());
    }
}

fn log_uniform(rng: &mut ChaCha8Rng) -> f64 {
    let (lo, hi) = (0.01f64.ln(), 100f64.ln());
    (lo + rng.random::<f64>() * (hi - lo)).exp()
}

fn ac1(rep: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..100_000 {
        let v: [f64; 6] = std::array::from_fn(|_| log_uniform(&mut rng));
        let truth = (v[0] * v[0] / v[1]).ln_1p() / v[2];
        let bound = rate_ratio_bound(v[0], v[1], v[2], v[3], v[4], v[5]).unwrap();
        worst_excess = worst_excess.max(bound - truth);
        if bound > truth + 1e-10 {
            violations += 1;
        }
    }
    let mut worst_gap: f64 = 0.0;
    for _ in 0..1000 {
        let (x, y, z) = (log_uniform(&mut rng), log_uniform(&mut rng), log_uniform(&mut rng));
        let truth = (x * x / y).ln_1p() / z;
        let bound = rate_ratio_bound(x, y, z, x, y, z).unwrap();
        worst_gap = worst_gap.max((bound - truth).abs() / truth.max(1.0));
    }
    let t = secs(start);
    let ok = violations == 0 && worst_gap <= 1e-12 && t < 5.0;
    rep.record(
        "AC1",
        if ok { Verdict::Pass } else { Verdict::Fail },
        format!("bound: {violations} violations in 1e5 samples (max excess {worst_excess:.2e}), tightness gap {worst_gap:.2e} over 1e3 points, {t:.2} s"),
    );
}

fn ac2(rep: &mut Report, ac5: &mut Ac5) {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut iterations = 0;
    let mut errors = Vec::new();
    for seed in 0..3 {
        let cs = channels(desk_dims(), seed);
        let p = SystemParams::table_one(desk_dims());
        match run(&cs, &p, &cfg(seed, Scheme::RisCf)) {
            Ok((st, tr)) => {
                ac5.check(&st, &tr);
                for r in &tr.records[1..] {
                    iterations += 1;
                    worst = worst.max(r.beamforming_tightness.unwrap_or(f64::INFINITY));
                    worst = worst.max(r.phase_tightness.unwrap_or(f64::INFINITY));
                }
            }
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    let t = secs(start);
    let ok = errors.is_empty() && iterations > 0 && worst <= 1e-9 && t < 60.0;
    rep.record(
        "AC2",
        if ok { Verdict::Pass } else { Verdict::Fail },
        format!("surrogate tightness over {iterations} desk iterations: max relative gap {worst:.2e}, {t:.1} s {errors:?}"),
    );
}

fn ac3(rep: &mut Report, ac5: &mut Ac5) {
    let start = Instant::now();
    let p = SystemParams::table_one(desk_dims());
    let (mut runs, mut skipped, mut drops, mut hard) = (0, 0, 0, 0);
    let mut errors = Vec::new();
    let mut worst_drop: f64 = 0.0;
    let mut seed = 0;
    while runs < 20 && seed < 200 {
        let cs = channels(desk_dims(), seed);
        match run(&cs, &p, &cfg(seed, Scheme::RisCf)) {
            Ok((st, tr)) => {
                runs += 1;
                ac5.check(&st, &tr);
                for w in tr.records.windows(2) {
                    let (a, b) = (w[0].ee, w[1].ee);
                    worst_drop = worst_drop.max((a - b) / a.abs());
                    if b < a - 1e-6 * a.abs() {
                        drops += 1;
                    }
                }
                hard += tr.records.iter().filter(|r| r.max_violation > 1e-5).count();
            }
            Err(Error::InfeasibleInstance(_)) => skipped += 1,
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
        seed += 1;
    }
    let t = secs(start);
    let ok = runs == 20 && drops == 0 && hard == 0 && errors.is_empty() && t < 600.0;
    rep.record(
        "AC3",
        if ok { Verdict::Pass } else { Verdict::Fail },
        format!(
            "{runs} desk runs ({skipped} infeasible seeds skipped): {drops} EE drops beyond 1e-6 (largest relative drop {worst_drop:.2e}), {hard} iterates violating a constraint, {t:.1} s {errors:?}"
        ),
    );
}

fn ac4(rep: &mut Report, ac5: &mut Ac5) {
    let start = Instant::now();
    let d = full_dims();
    let p = SystemParams::table_one(d);
    let mut iters = Vec::new();
    let (mut skipped, mut errors) = (0, Vec::new());
    let mut seed = 0;
    while iters.len() < 10 && seed < 30 {
        let cs = channels(d, seed);
        match run(&cs, &p, &cfg(seed, Scheme::RisCf)) {
            Ok((st, tr)) => {
                ac5.check(&st, &tr);
                iters.push(tr.iterations_to_within(0.01));
            }
            Err(Error::InfeasibleInstance(_)) => skipped += 1,
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
        seed += 1;
    }
    let t = secs(start);
    let mut sorted = iters.clone();
    sorted.sort_unstable();
    let median = if sorted.len() == 10 { (sorted[4] + sorted[5]) as f64 / 2.0 } else { f64::INFINITY };
    let ok = sorted.len() == 10 && median <= 12.0 && errors.is_empty() && t < 1800.0;
    rep.record(
        "AC4",
        if ok { Verdict::Pass } else { Verdict::Fail },
        format!("full-scale iterations to within 1% of final EE {iters:?} ({skipped} infeasible seeds skipped): median {median}, {t:.1} s {errors:?}"),
    );
}

fn ac5(rep: &mut Report, a: &Ac5) {
    let ok = a.runs > 0 && a.worst_violation <= 1e-5 && a.worst_pre_projection <= 1e-3 && a.worst_final_modulus <= 1e-12;
    rep.record(
        "AC5",
        if ok { Verdict::Pass } else { Verdict::Fail },
        format!(
            "{} accepted outputs: worst constraint violation {:.2e}, worst | |psi| - 1 | {:.2e} before projection and {:.2e} after",
            a.runs, a.worst_violation, a.worst_pre_projection, a.worst_final_modulus
        ),
    );
}

/// Paired mean difference with its standard error.
fn paired(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (m, se) = mean_se(&d);
    (m.unwrap_or(0.0), se.unwrap_or(0.0))
}

fn ac6(rep: &mut Report, ac5: &mut Ac5) {
    let start = Instant::now();
    let d = desk_dims();
    let p = SystemParams::table_one(d);
    let schemes = [Scheme::RisCf, Scheme::CfNoRis, Scheme::CollocatedRis];
    let mut ee: [Vec<f64>; 3] = Default::default();
    let mut outage: [Vec<f64>; 3] = Default::default();
    let (mut used, mut errors) = (Vec::new(), Vec::new());
    let mut seed = 0;
    while used.len() < 10 && seed < 200 {
        let (lay, fad) = instance(d, seed);
        let mut vals = [None; 3];
        for (i, &s) in schemes.iter().enumerate() {
            match run_scheme(&lay, &fad, &p, &cfg(seed, s)) {
                Ok((st, tr)) => {
                    if s.uses_surfaces() {
                        ac5.check(&st, &tr);
                    } else {
                        ac5.check_no_surfaces(&tr);
                    }
                    vals[i] = Some(tr.final_ee);
                }
                Err(Error::InfeasibleInstance(_)) => {}
                Err(e) => errors.push(format!("seed {seed} {}: {e}", s.name())),
            }
        }
        if seed < 10 {
            for i in 0..3 {
                outage[i].push(vals[i].unwrap_or(0.0));
            }
        }
        if vals.iter().all(Option::is_some) {
            used.push(seed);
            for i in 0..3 {
                ee[i].push(vals[i].unwrap());
            }
        }
        seed += 1;
    }
    let t = secs(start);
    let mut verdict = if used.len() == 10 && errors.is_empty() { Verdict::Pass } else { Verdict::Fail };
    let mut parts = Vec::new();
    for (i, name) in [(1, "cf_no_ris"), (2, "collocated_ris")] {
        let (m, se) = paired(&ee[0], &ee[i]);
        let (om, ose) = paired(&outage[0], &outage[i]);
        let v = if m > 0.0 {
            "positive"
        } else if m >= -2.0 * se {
            "tie"
        } else {
            "negative"
        };
        match v {
            "tie" if verdict == Verdict::Pass => verdict = Verdict::Flag,
            "negative" => verdict = Verdict::Fail,
            _ => {}
        }
        parts.push(format!(
            "ris_cf - {name} = {m:.4e} (SE {se:.2e}, {v}; outage convention over seeds 0-9: {om:.3e}, SE {ose:.2e})"
        ));
    }
    rep.record("AC6", verdict, format!("paired seeds {used:?}: {}; {t:.1} s {errors:?}", parts.join("; ")));
}

fn desk_sweep(experiment: Experiment) -> Vec<TrialOutcome> {
    let src = format!(
        "experiment = \"{}\"\naps = 2\nsurfaces = 2\nusers = 3\nantennas = 2\nelements = 4\ntrials = 20\n",
        experiment.name()
    );
    run_experiment(&parse_config(&src).unwrap()).trials
}

/// Outage-convention paired trend check between consecutive sweep points.
fn trend(trials: &[TrialOutcome], xs: &[f64], scheme: Scheme, notes: &mut Vec<String>) -> bool {
    let mut ok = true;
    let at = |x: f64| -> Vec<&TrialOutcome> {
        let mut v: Vec<&TrialOutcome> = trials.iter().filter(|t| t.scheme == scheme && t.x == x).collect();
        v.sort_by_key(|t| t.trial);
        v
    };
    for w in xs.windows(2) {
        let (lo, hi) = (at(w[0]), at(w[1]));
        let bad = lo.iter().chain(&hi).filter(|t| !t.status.counts() && t.status != TrialStatus::Infeasible).count();
        if bad > 0 {
            notes.push(format!("{} {}->{}: {bad} failed trials", scheme.name(), w[0], w[1]));
            ok = false;
            continue;
        }
        let ee = |v: &[&TrialOutcome]| v.iter().map(|t| t.ee.unwrap_or(0.0)).collect::<Vec<_>>();
        let (m, se) = paired(&ee(&hi), &ee(&lo));
        let feasible: Vec<(f64, f64)> = lo
            .iter()
            .zip(&hi)
            .filter_map(|(a, b)| Some((b.ee?, a.ee?)))
            .collect();
        let (fb, fa): (Vec<f64>, Vec<f64>) = feasible.iter().copied().unzip();
        let (fm, fse) = paired(&fb, &fa);
        let pass = m >= -2.0 * se;
        ok &= pass;
        if !pass || fm < -2.0 * fse {
            notes.push(format!(
                "{} {}->{}: outage diff {m:.3e} (SE {se:.2e}){}, feasible-pair diff {fm:.3e} (SE {fse:.2e}, n={})",
                scheme.name(),
                w[0],
                w[1],
                if pass { "" } else { " FAIL" },
                feasible.len()
            ));
        }
    }
    ok
}

fn ac7(rep: &mut Report) {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for (experiment, xs) in [
        (Experiment::EeVsPmax, vec![20.0, 25.0, 30.0, 35.0]),
        (Experiment::EeVsBackhaul, vec![5.0, 10.0, 50.0, 500.0]),
    ] {
        let trials = desk_sweep(experiment);
        for s in Scheme::ALL {
            ok &= trend(&trials, &xs, s, &mut notes);
        }
    }
    let t = secs(start);
    let detail = if notes.is_empty() { "no notes".to_string() } else { notes.join("; ") };
    rep.record(
        "AC7",
        if ok { Verdict::Pass } else { Verdict::Fail },
        format!("P^max and C^max trends, 4 schemes, 20 desk trials, outage convention: {detail}; {t:.1} s"),
    );
}

fn ac8(rep: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = SolverSettings::default();
    let (mut worst_obj, mut worst_kkt) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for case in 0..100 {
        let (p, n, opt) = if case < 85 {
            let n = rng.random_range(2..=6);
            let (p, opt) = oracle::planted(&mut rng, n);
            (p, n, Some(opt))
        } else {
            let n = 2 + case % 2;
            (oracle::random_small(&mut rng, n), n, None)
        };
        let r = match solve(&p, &s) {
            Ok(r) if r.status == SolveStatus::Optimal => r,
            other => {
                failures.push(format!("case {case}: {other:?}"));
                continue;
            }
        };
        let target = opt.unwrap_or_else(|| oracle::grid_oracle(&p, n));
        worst_obj = worst_obj.max((r.objective_value - target).abs() / target.abs().max(1.0));
        worst_kkt = worst_kkt.max(r.primal_residual).max(r.dual_residual).max(r.duality_gap.abs());
    }
    let t = secs(start);
    let ok = failures.is_empty() && worst_obj <= 1e-4 && worst_kkt <= 1e-7 && t < 120.0;
    rep.record(
        "AC8",
        if ok { Verdict::Pass } else { Verdict::Fail },
        format!("100 random SOCPs (85 planted optima, 15 grid oracles): max objective error {worst_obj:.2e}, max KKT residual {worst_kkt:.2e}, {t:.1} s {failures:?}"),
    );
}

/// Exhaustive search over transmit power and phase for one AP, one antenna,
/// one surface element and one user. `None` when no grid point is feasible.
fn tiny_grid(hd: Complex<f64>, refl: Complex<f64>) -> Option<f64> {
    let bandwidth = 20e6;
    let noise = 10f64.powf(-10.4) * 1e-3;
    let pmax = 10f64.powf(3.5) * 1e-3;
    let xi = 1.2;
    let static_w = 10f64.powf(0.9) + 0.01 + 0.01 + 1.0;
    let rmin = 0.5 * std::f64::consts::LN_2;
    let cmax = 500.0 * std::f64::consts::LN_2;
    let mut best: Option<f64> = None;
    for k in 0..3600 {
        let theta = k as f64 * std::f64::consts::TAU / 3600.0;
        let gain = (hd + refl * Complex::from_polar(1.0, theta)).norm_sqr() / noise;
        for i in 1..=4000 {
            let pw = pmax * i as f64 / 4000.0;
            let rate = (pw * gain).ln_1p();
            if rate < rmin || rate > cmax {
                continue;
            }
            let ee = bandwidth * rate / std::f64::consts::LN_2 / (xi * pw + static_w);
            best = Some(best.map_or(ee, |b: f64| b.max(ee)));
        }
    }
    best
}

fn ac9(rep: &mut Report, ac5: &mut Ac5) {
    let start = Instant::now();
    let d = Dims::new(1, 1, 1, 1, 1);
    let p = SystemParams::table_one(d);
    let mut cases: Vec<(String, ChannelSet<f64>)> = (0..6).map(|seed| (format!("seed {seed}"), channels(d, seed))).collect();
    // a surface path stronger than the direct one, so the phase matters
    let mut strong = ChannelSet::zeros(d);
    strong.direct_mut(0, 0)[0] = Complex::from_polar(3e-7, 0.4);
    strong.ap_ris_mut(0, 0)[0] = Complex::from_polar(1e-3, 1.1);
    strong.ris_ue_mut(0, 0)[0] = Complex::from_polar(8e-4, -2.0);
    cases.push(("strong surface".into(), strong));

    let mut ok = true;
    let mut parts = Vec::new();
    for (name, cs) in &cases {
        let hd = cs.direct(0, 0)[0];
        let refl = cs.ap_ris(0, 0)[0] * cs.ris_ue(0, 0)[0];
        let grid = tiny_grid(hd, refl);
        let alg = run(cs, &p, &cfg(0, Scheme::RisCf));
        match (grid, alg) {
            (Some(g), Ok((st, tr))) => {
                ac5.check(&st, &tr);
                let rel = (tr.final_ee - g) / g;
                ok &= rel.abs() <= 0.02;
                parts.push(format!("{name}: {rel:+.2e}"));
            }
            (None, Err(Error::InfeasibleInstance(_))) => parts.push(format!("{name}: infeasible (agrees)")),
            (g, a) => {
                ok = false;
                parts.push(format!("{name}: grid {g:?} vs algorithm {:?}", a.map(|(_, tr)| tr.final_ee)));
            }
        }
    }
    // how often a random phase start misses on the strong-surface instance
    let (name, strong) = cases.last().unwrap();
    let hd = strong.direct(0, 0)[0];
    let g = tiny_grid(hd, strong.ap_ris(0, 0)[0] * strong.ris_ue(0, 0)[0]).unwrap();
    let misses = (0..100)
        .filter(|&seed| run(strong, &p, &cfg(seed, Scheme::RisCf)).map_or(true, |(_, tr)| tr.final_ee < 0.98 * g))
        .count();
    let t = secs(start);
    ok &= t < 60.0;
    rep.record(
        "AC9",
        if ok { Verdict::Pass } else { Verdict::Fail },
        format!(
            "M=N=K=R=L=1, relative EE gap to a 3600x4000 (phase, power) grid: {}; {name}: {misses} of 100 phase seeds miss by more than 2%; {t:.1} s",
            parts.join(", ")
        ),
    );
}

fn main() {
    // `cargo test -- --list` and filtered runs expect the usual harness behaviour
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut rep = Report { lines: Vec::new() };
    let mut checks = Ac5::default();
    ac1(&mut rep);
    ac2(&mut rep, &mut checks);
    ac3(&mut rep, &mut checks);
    ac4(&mut rep, &mut checks);
    ac6(&mut rep, &mut checks);
    ac7(&mut rep);
    ac8(&mut rep);
    ac9(&mut rep, &mut checks);
    ac5(&mut rep, &checks);
    rep.lines.sort_by(|a, b| a.0.cmp(&b.0));
    println!("summary: {}", rep.lines.iter().map(|l| format!("{}={}", l.0, match l.1 {
        Verdict::Pass => "PASS",
        Verdict::Flag => "FLAG",
        Verdict::Fail => "FAIL",
    })).collect::<Vec<_>>().join(" "));
    let failed: Vec<&str> = rep.lines.iter().filter(|l| l.1 == Verdict::Fail).map(|l| l.0.as_str()).collect();
    let unexpected: Vec<&str> = failed.iter().copied().filter(|id| !KNOWN_FAILURES.contains(id)).collect();
    if failed.is_empty() {
        println!("acceptance: all criteria met");
    } else {
        println!("acceptance: failed {failed:?} (known: {KNOWN_FAILURES:?})");
    }
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
