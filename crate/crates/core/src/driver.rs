//! The alternating beamforming/phase ascent and its baselines.

use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{generate_channels, ChannelSet, Dims, FadingParams, Layout};
use crate::conic::{solve, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{
    constraint_residuals, energy_efficiency, sum_rate_nats, total_power, Beamformers, NetworkState, PhaseVector,
    ResidualReport, SystemParams,
};
use crate::scalar::Scalar;
use crate::surrogate::{
    beamforming_surrogate_value, beamforming_true_value, build_beamforming_program, build_beamforming_subproblem,
    build_phase_subproblem, compute_coefficients, phase_surrogate_value, phase_true_value, rotate_beamformers,
    BeamformingMode, SubproblemKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Distributed APs with optimized surfaces.
    RisCf,
    /// Distributed APs, surfaces left unconfigured (`ψ = 0`).
    CfNoRis,
    /// One AP at the origin with all antennas, optimized surfaces.
    CollocatedRis,
    /// One AP at the origin with all antennas, `ψ = 0`.
    CollocatedNoRis,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::RisCf, Scheme::CfNoRis, Scheme::CollocatedRis, Scheme::CollocatedNoRis];

    pub fn uses_surfaces(self) -> bool {
        matches!(self, Scheme::RisCf | Scheme::CollocatedRis)
    }

    pub fn is_collocated(self) -> bool {
        matches!(self, Scheme::CollocatedRis | Scheme::CollocatedNoRis)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::RisCf => "ris_cf",
            Scheme::CfNoRis => "cf_no_ris",
            Scheme::CollocatedRis => "collocated_ris",
            Scheme::CollocatedNoRis => "collocated_no_ris",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig<T> {
    pub max_outer_iters: usize,
    /// Stop once one outer iteration improves EE by less than this fraction.
    pub ee_rel_tol: T,
    /// Allowed `||ψ| − 1|` before the closing projection.
    pub unit_modulus_tol: T,
    /// Unit-modulus penalty weight; replaces `SystemParams::penalty`.
    pub penalty: T,
    pub solver: SolverSettings<T>,
    /// Seed of the random initial phases.
    pub seed: u64,
    pub scheme: Scheme,
    /// Cap on restoration solves when the initial point is infeasible.
    pub feasibility_iters: usize,
    /// Relative EE decrease treated as a hard error.
    pub monotonicity_tol: T,
}

impl<T: Scalar> Default for AlgoConfig<T> {
    fn default() -> Self {
        Self {
            max_outer_iters: 50,
            ee_rel_tol: T::lit(1e-4),
            unit_modulus_tol: T::lit(1e-3),
            penalty: T::lit(1e3),
            solver: SolverSettings::default(),
            seed: 0,
            scheme: Scheme::RisCf,
            feasibility_iters: 30,
            monotonicity_tol: T::lit(1e-6),
        }
    }
}

impl<T: Scalar> AlgoConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        pos("ee_rel_tol", self.ee_rel_tol)?;
        pos("unit_modulus_tol", self.unit_modulus_tol)?;
        pos("penalty", self.penalty)?;
        pos("solver tol", self.solver.tol)?;
        pos("monotonicity_tol", self.monotonicity_tol)?;
        if self.max_outer_iters == 0 || self.solver.max_iters == 0 {
            return Err(Error::InvalidParameter("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Metrics of one outer iteration (iteration 0 is the initial point).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    /// Bits per joule.
    pub ee: T,
    /// Nats/s/Hz.
    pub sum_rate: T,
    /// Watts.
    pub power: T,
    /// Largest power/QoS/backhaul violation.
    pub max_violation: T,
    pub max_modulus_deviation: T,
    /// EE after the beamforming step, before the phase step.
    pub ee_after_beamforming: T,
    pub beamforming_status: Option<SolveStatus>,
    pub phase_status: Option<SolveStatus>,
    pub solver_iterations: [usize; 2],
    /// `|surrogate − true| / |true|` at the expansion point of each step.
    pub beamforming_tightness: Option<T>,
    pub phase_tightness: Option<T>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub converged: bool,
    /// Restoration solves spent reaching a feasible start.
    pub feasibility_iters: usize,
    /// Largest `||ψ| − 1|` just before the closing projection.
    pub pre_projection_modulus_deviation: T,
    /// Relative EE change caused by the closing projection.
    pub projection_ee_change: T,
    /// Projection moved EE by more than `10 · unit_modulus_tol` or broke a
    /// constraint by more than `1e-5`.
    pub projection_flagged: bool,
    pub final_residuals: ResidualReport<T>,
    pub final_ee: T,
}

impl<T: Scalar> Trace<T> {
    /// Iterations needed to come within `frac` (relative) of the final EE.
    pub fn iterations_to_within(&self, frac: T) -> usize {
        let last = self.final_ee;
        self.records
            .iter()
            .find(|r| (last - r.ee).abs() <= frac * last.abs())
            .map_or(self.records.len(), |r| r.iteration)
    }

    /// Equality up to wall-clock times.
    pub fn same_path(&self, other: &Self) -> bool {
        let strip = |t: &Self| {
            let mut t = t.clone();
            t.records.iter_mut().for_each(|r| r.wall_time_s = 0.0);
            t
        };
        strip(self) == strip(other)
    }
}

fn relative_gap<T: Scalar>(a: T, b: T) -> T {
    (a - b).abs() / b.abs().max(T::min_positive_value())
}

/// Matched-filter beamformers `w_{m,l} ∝ conj(ĥ_{m,l})` with each AP's
/// budget split equally over users.
pub fn matched_filter<T: Scalar>(cs: &ChannelSet<T>, params: &SystemParams<T>, psi: &PhaseVector<T>) -> Result<Beamformers<T>> {
    let d = cs.dims();
    let k = d.antennas;
    let share = T::from_usize(d.users).unwrap();
    let mut users = Vec::with_capacity(d.users);
    for l in 0..d.users {
        let h = crate::channel::equivalent_channel(cs, &psi.values, l)?;
        let mut w = vec![Complex::new(T::zero(), T::zero()); d.stacked_len()];
        for m in 0..d.aps {
            let blk = &h[m * k..(m + 1) * k];
            let norm = blk.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
            if norm > T::zero() {
                let amp = (params.pmax_w[m] / share).sqrt() / norm;
                for (i, c) in blk.iter().enumerate() {
                    w[m * k + i] = c.conj() * amp;
                }
            }
        }
        users.push(w);
    }
    Beamformers::from_users(d, users)
}

fn initial_phases<T: Scalar>(dims: Dims, config: &AlgoConfig<T>) -> PhaseVector<T> {
    if !config.scheme.uses_surfaces() {
        return PhaseVector::zeros(dims.phase_len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let phases: Vec<T> = (0..dims.phase_len())
        .map(|_| T::lit(rng.random::<f64>() * std::f64::consts::TAU))
        .collect();
    PhaseVector::from_phases(&phases)
}

/// Smallest QoS or backhaul margin, in nats.
fn service_margin<T: Scalar>(res: &ResidualReport<T>) -> T {
    res.rate.iter().chain(&res.backhaul).fold(T::infinity(), |m, v| m.min(*v))
}

/// Initial feasible point: random unit phases, matched-filter beamformers
/// and, if QoS or backhaul is violated, restoration solves that maximize
/// the smallest surrogate margin. Once started, restoration continues until
/// that margin reaches half the restoration cap or stops improving, so the
/// ascent does not begin on the edge of the feasible set. Returns the state
/// and the number of restoration solves used.
pub fn initialize<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    config: &AlgoConfig<T>,
) -> Result<(NetworkState<T>, usize)> {
    params.validate()?;
    config.validate()?;
    let cap = T::lit(0.05);
    let psi = initial_phases(cs.dims(), config);
    let w = matched_filter(cs, params, &psi)?;
    let mut state = NetworkState::tight(cs, params, w, psi)?;
    let mut margin = service_margin(&constraint_residuals(cs, params, &state)?);
    if margin >= T::zero() {
        return Ok((state, 0));
    }
    let mut used = 0;
    while used < config.feasibility_iters && margin < cap * T::half() {
        used += 1;
        state.w = rotate_beamformers(cs, &state)?;
        state = NetworkState::tight(cs, params, state.w, state.psi)?;
        let coeffs = compute_coefficients(cs, params, &state).map_err(|e| match e {
            Error::InvalidExpansionPoint { user, .. } => {
                Error::InfeasibleInstance(format!("user {user} receives no signal at the starting point"))
            }
            other => other,
        })?;
        let prog = build_beamforming_program(cs, params, &coeffs, BeamformingMode::Restoration { cap })?;
        let rep = solve(&prog.program, &config.solver)?;
        if rep.status != SolveStatus::Optimal {
            break;
        }
        let next = NetworkState::tight(cs, params, prog.beamformers(&rep.primal), state.psi.clone())?;
        let next_margin = service_margin(&constraint_residuals(cs, params, &next)?);
        // the surrogate margin is a minorant, so the true one cannot drop
        if next_margin <= margin + T::lit(1e-9) * margin.abs().max(T::one()) {
            break;
        }
        state = next;
        margin = next_margin;
    }
    if margin < T::zero() {
        return Err(Error::InfeasibleInstance(format!(
            "restoration stopped after {used} solves at smallest margin {margin}"
        )));
    }
    Ok((state, used))
}

struct Snapshot<T> {
    ee: T,
    sum_rate: T,
    power: T,
    max_violation: T,
    max_modulus_deviation: T,
}

fn snapshot<T: Scalar>(cs: &ChannelSet<T>, params: &SystemParams<T>, state: &NetworkState<T>) -> Result<Snapshot<T>> {
    let res = constraint_residuals(cs, params, state)?;
    Ok(Snapshot {
        ee: energy_efficiency(cs, params, state)?,
        sum_rate: sum_rate_nats(cs, params, state)?,
        power: total_power(params, &state.w),
        max_violation: res.max_violation(),
        max_modulus_deviation: res.max_modulus_deviation(),
    })
}

fn audit<T: Scalar>(config: &AlgoConfig<T>, iteration: usize, step: SubproblemKind, previous: T, current: T) -> Result<()> {
    if current < previous - config.monotonicity_tol * previous.abs() {
        return Err(Error::Monotonicity {
            iteration,
            step,
            previous: previous.as_f64(),
            current: current.as_f64(),
        });
    }
    Ok(())
}

/// Moves a phase-step solution radially toward unit modulus when that does
/// not lower the phase surrogate or break QoS/backhaul. The rate terms
/// dwarf the penalty in the program objective, so the interior-point
/// solution stops short of the circle by roughly the solver tolerance.
fn polish_phases<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    coeffs: &crate::surrogate::SurrogateCoefficients<T>,
    w: &Beamformers<T>,
    psi: PhaseVector<T>,
) -> Result<PhaseVector<T>> {
    let base = phase_surrogate_value(cs, params, coeffs, &psi)?;
    let margin = |p: &PhaseVector<T>| -> Result<T> {
        let st = NetworkState::tight(cs, params, w.clone(), p.clone())?;
        Ok(service_margin(&constraint_residuals(cs, params, &st)?))
    };
    let floor = margin(&psi)?.min(T::zero());
    let target = psi.project_unit_modulus();
    let mut theta = T::one();
    for _ in 0..4 {
        let cand = PhaseVector {
            values: psi.values.iter().zip(&target.values).map(|(a, b)| a + (b - a) * theta).collect(),
        };
        if phase_surrogate_value(cs, params, coeffs, &cand)? >= base && margin(&cand)? >= floor {
            return Ok(cand);
        }
        theta *= T::half();
    }
    Ok(psi)
}

/// Runs the alternating ascent on the given channels. For schemes without
/// surfaces the phase step is skipped and `ψ` stays zero.
pub fn run<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    config: &AlgoConfig<T>,
) -> Result<(NetworkState<T>, Trace<T>)> {
    let mut params = params.clone();
    params.penalty = config.penalty;
    let params = &params;
    let start = Instant::now();
    let (mut state, feasibility_iters) = initialize(cs, params, config)?;
    let use_phase = config.scheme.uses_surfaces() && cs.dims().phase_len() > 0;

    let snap = snapshot(cs, params, &state)?;
    let mut records = vec![IterationRecord {
        iteration: 0,
        ee: snap.ee,
        sum_rate: snap.sum_rate,
        power: snap.power,
        max_violation: snap.max_violation,
        max_modulus_deviation: snap.max_modulus_deviation,
        ee_after_beamforming: snap.ee,
        beamforming_status: None,
        phase_status: None,
        solver_iterations: [0, 0],
        beamforming_tightness: None,
        phase_tightness: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    }];
    let mut ee = snap.ee;
    let mut converged = false;

    for it in 1..=config.max_outer_iters {
        // beamforming step at fixed ψ
        state.w = rotate_beamformers(cs, &state)?;
        state = NetworkState::tight(cs, params, state.w, state.psi)?;
        let coeffs = compute_coefficients(cs, params, &state)?;
        let bf_tight = relative_gap(
            beamforming_surrogate_value(cs, params, &coeffs, &state.w, state.rho)?,
            beamforming_true_value(cs, params, &state.w, &state.psi, state.rho)?,
        );
        let prog = build_beamforming_subproblem(cs, params, &coeffs)?;
        let rep = solve(&prog.program, &config.solver)?;
        if rep.status != SolveStatus::Optimal {
            return Err(Error::Solver {
                iteration: it,
                step: SubproblemKind::BeamformingStep,
                status: rep.status,
            });
        }
        let bf_iters = rep.iterations;
        state = NetworkState::tight(cs, params, prog.beamformers(&rep.primal), state.psi)?;
        let ee_bf = energy_efficiency(cs, params, &state)?;
        audit(config, it, SubproblemKind::BeamformingStep, ee, ee_bf)?;

        // phase step at fixed w
        let mut phase_status = None;
        let mut phase_tight = None;
        let mut ph_iters = 0;
        let mut ee_new = ee_bf;
        if use_phase {
            state.w = rotate_beamformers(cs, &state)?;
            state = NetworkState::tight(cs, params, state.w, state.psi)?;
            let coeffs = compute_coefficients(cs, params, &state)?;
            phase_tight = Some(relative_gap(
                phase_surrogate_value(cs, params, &coeffs, &state.psi)?,
                phase_true_value(cs, params, &state.w, &state.psi)?,
            ));
            let prog = build_phase_subproblem(cs, params, &coeffs, &state.w)?;
            let rep = solve(&prog.program, &config.solver)?;
            if rep.status != SolveStatus::Optimal {
                return Err(Error::Solver {
                    iteration: it,
                    step: SubproblemKind::PhaseStep,
                    status: rep.status,
                });
            }
            phase_status = Some(rep.status);
            ph_iters = rep.iterations;
            let psi = polish_phases(cs, params, &coeffs, &state.w, prog.phases(&rep.primal).clamp_to_disk())?;
            state = NetworkState::tight(cs, params, state.w, psi)?;
            ee_new = energy_efficiency(cs, params, &state)?;
            audit(config, it, SubproblemKind::PhaseStep, ee_bf, ee_new)?;
        }

        let snap = snapshot(cs, params, &state)?;
        records.push(IterationRecord {
            iteration: it,
            ee: snap.ee,
            sum_rate: snap.sum_rate,
            power: snap.power,
            max_violation: snap.max_violation,
            max_modulus_deviation: snap.max_modulus_deviation,
            ee_after_beamforming: ee_bf,
            beamforming_status: Some(rep.status),
            phase_status,
            solver_iterations: [bf_iters, ph_iters],
            beamforming_tightness: Some(bf_tight),
            phase_tightness: phase_tight,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        let improvement = (ee_new - ee) / ee.abs().max(T::min_positive_value());
        ee = ee_new;
        if improvement < config.ee_rel_tol {
            converged = true;
            break;
        }
    }

    // closing projection onto exact unit modulus
    let pre_dev = state.psi.max_modulus_deviation();
    let mut projection_ee_change = T::zero();
    if use_phase {
        let projected = NetworkState::tight(cs, params, state.w.clone(), state.psi.project_unit_modulus())?;
        let ee_proj = energy_efficiency(cs, params, &projected)?;
        projection_ee_change = relative_gap(ee_proj, ee);
        state = projected;
        ee = ee_proj;
    }
    let final_residuals = constraint_residuals(cs, params, &state)?;
    let projection_flagged = use_phase
        && (projection_ee_change > T::lit(10.0) * config.unit_modulus_tol
            || final_residuals.max_violation() > T::lit(1e-5));
    Ok((
        state,
        Trace {
            records,
            converged,
            feasibility_iters,
            pre_projection_modulus_deviation: if use_phase { pre_dev } else { T::zero() },
            projection_ee_change,
            projection_flagged,
            final_residuals,
            final_ee: ee,
        },
    ))
}

/// System parameters of the collocated counterpart: one AP with all `MK`
/// antennas, the summed transmit budget and circuit power, and the
/// backhaul power of all `(AP, user)` pairs folded into one AP.
pub fn collocated_params<T: Scalar>(params: &SystemParams<T>) -> SystemParams<T> {
    let d = params.dims;
    let m = T::from_usize(d.aps).unwrap();
    let dims = Dims::new(1, d.surfaces, d.users, d.aps * d.antennas, d.elements);
    let mean = |v: &[T]| v.iter().copied().sum::<T>() / m;
    let budget = (0..d.aps).map(|i| params.backhaul_budget(i)).fold(T::infinity(), T::min);
    SystemParams {
        dims,
        bandwidth_hz: params.bandwidth_hz,
        noise_power_w: params.noise_power_w,
        pmax_w: vec![params.pmax_w.iter().copied().sum()],
        pa_inefficiency: vec![mean(&params.pa_inefficiency)],
        p_ap_w: vec![params.p_ap_w.iter().copied().sum()],
        p_ue_w: params.p_ue_w.clone(),
        p_ris_elem_w: params.p_ris_elem_w,
        p_bh_w: params.p_bh_w * m,
        backhaul_cap_nats: vec![budget],
        backhaul_scale: vec![T::one()],
        rmin_nats: params.rmin_nats.clone(),
        penalty: params.penalty,
    }
}

/// Runs `config.scheme` on a layout, regenerating channels for the
/// collocated schemes from the same fading seed.
pub fn run_scheme<T: Scalar>(
    layout: &Layout<T>,
    fading: &FadingParams<T>,
    params: &SystemParams<T>,
    config: &AlgoConfig<T>,
) -> Result<(NetworkState<T>, Trace<T>)> {
    let d = params.dims;
    if config.scheme.is_collocated() {
        let lay = layout.collocated();
        let cs = generate_channels(&lay, fading, d.aps * d.antennas, d.elements)?;
        run(&cs, &collocated_params(params), config)
    } else {
        let cs = generate_channels(layout, fading, d.antennas, d.elements)?;
        run(&cs, params, config)
    }
}

/// Baseline schemes only; see [`run_scheme`].
pub fn run_baseline<T: Scalar>(
    layout: &Layout<T>,
    fading: &FadingParams<T>,
    params: &SystemParams<T>,
    config: &AlgoConfig<T>,
) -> Result<(NetworkState<T>, Trace<T>)> {
    if config.scheme == Scheme::RisCf {
        return Err(Error::InvalidParameter("run_baseline expects a baseline scheme".into()));
    }
    run_scheme(layout, fading, params, config)
}
