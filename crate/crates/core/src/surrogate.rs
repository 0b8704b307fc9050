//! Concave minorants of the rate terms and the convex subproblems built
//! from them.
//!
//! Channels are divided by the noise amplitude `σ` before lowering, so
//! inside the cone programs the noise power is 1 and every interference
//! term is an SNR. Beamformers and phases keep their physical units.

use num_complex::Complex;

use crate::channel::{equivalent_channel, ChannelSet};
use crate::conic::{AffineExpr, ConeProgram};
use crate::error::{Error, Result};
use crate::model::{total_power, Beamformers, NetworkState, PhaseVector, SystemParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubproblemKind {
    BeamformingStep,
    PhaseStep,
}

/// Coefficients of `ln(1 + x²/y)/z >= a - b·y/x² - c·z`, tight at the
/// expansion point `(x0, y0, z0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCoefficients<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

fn check_positive<T: Scalar>(vals: &[T]) -> Result<()> {
    if vals.iter().all(|v| *v > T::zero() && v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter("bound arguments must be positive and finite".into()))
    }
}

pub fn rate_ratio_coefficients<T: Scalar>(x0: T, y0: T, z0: T) -> Result<BoundCoefficients<T>> {
    check_positive(&[x0, y0, z0])?;
    let g = x0 * x0 / y0;
    let lg = g.ln_1p();
    Ok(BoundCoefficients {
        a: T::two() * lg / z0 + g / (z0 * (T::one() + g)),
        b: g * g / (z0 * (T::one() + g)),
        c: lg / (z0 * z0),
    })
}

/// Lower bound on `ln(1 + x²/y)/z` from its expansion at `(x0, y0, z0)`.
pub fn rate_ratio_bound<T: Scalar>(x: T, y: T, z: T, x0: T, y0: T, z0: T) -> Result<T> {
    check_positive(&[x, y, z])?;
    let k = rate_ratio_coefficients(x0, y0, z0)?;
    Ok(k.a - k.b * y / (x * x) - k.c * z)
}

/// Expansion constants of one user for a given `Γ` and `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserCoefficients<T> {
    pub a_ee: T,
    pub b_ee: T,
    pub c_ee: T,
    pub a_bar: T,
    pub b_bar: T,
}

pub fn user_coefficients<T: Scalar>(gamma: T, rho: T) -> UserCoefficients<T> {
    let lg = gamma.ln_1p();
    let opg = T::one() + gamma;
    UserCoefficients {
        a_ee: T::two() * lg / rho + gamma / (rho * opg),
        b_ee: gamma * gamma / (rho * opg),
        c_ee: lg / (rho * rho),
        a_bar: lg + gamma / opg,
        b_bar: gamma * gamma / opg,
    }
}

/// Per-user expansion constants of one alternating step.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateCoefficients<T> {
    /// `Γ_l = (Re{ĥ_l^H w_l})² / φ_l(w)` at the expansion point.
    pub gamma: Vec<T>,
    pub a_ee: Vec<T>,
    pub b_ee: Vec<T>,
    pub c_ee: Vec<T>,
    pub a_bar: Vec<T>,
    pub b_bar: Vec<T>,
    /// `Re{ĥ_l^H w_l} / σ` at the expansion point.
    pub signal: Vec<T>,
    pub expansion: NetworkState<T>,
}

/// Noise-normalized equivalent channels `ĥ_l^H(ψ) / σ` for every user.
pub fn normalized_channels<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    psi: &PhaseVector<T>,
) -> Result<Vec<Vec<Complex<T>>>> {
    let inv = params.noise_power_w.sqrt().recip();
    (0..cs.dims().users)
        .map(|l| Ok(equivalent_channel(cs, &psi.values, l)?.into_iter().map(|c| c * inv).collect()))
        .collect()
}

fn cdot<T: Scalar>(h: &[Complex<T>], w: &[Complex<T>]) -> Complex<T> {
    h.iter().zip(w).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
}

/// Normalized interference-plus-noise `φ_l / σ²` of user `l`.
fn interference<T: Scalar>(h: &[Complex<T>], w: &Beamformers<T>, l: usize) -> T {
    (0..w.users())
        .filter(|&j| j != l)
        .fold(T::one(), |acc, j| acc + cdot(h, w.user(j)).norm_sqr())
}

pub fn compute_coefficients<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    expansion: &NetworkState<T>,
) -> Result<SurrogateCoefficients<T>> {
    let d = params.dims;
    if cs.dims() != d {
        return Err(Error::Dimension("channel set does not match system dims".into()));
    }
    let rho = expansion.rho;
    if !(rho > T::zero()) {
        return Err(Error::InvalidParameter("power slack rho must be positive".into()));
    }
    let hs = normalized_channels(cs, params, &expansion.psi)?;
    let mut out = SurrogateCoefficients {
        gamma: Vec::with_capacity(d.users),
        a_ee: Vec::with_capacity(d.users),
        b_ee: Vec::with_capacity(d.users),
        c_ee: Vec::with_capacity(d.users),
        a_bar: Vec::with_capacity(d.users),
        b_bar: Vec::with_capacity(d.users),
        signal: Vec::with_capacity(d.users),
        expansion: expansion.clone(),
    };
    for (l, h) in hs.iter().enumerate() {
        let s = cdot(h, expansion.w.user(l)).re;
        if !(s > T::zero()) {
            return Err(Error::InvalidExpansionPoint {
                user: l,
                reason: format!("Re{{h^H w}} = {s} is not positive"),
            });
        }
        let phi = interference(h, &expansion.w, l);
        let g = s * s / phi;
        let k = user_coefficients(g, rho);
        out.gamma.push(g);
        out.a_ee.push(k.a_ee);
        out.b_ee.push(k.b_ee);
        out.c_ee.push(k.c_ee);
        out.a_bar.push(k.a_bar);
        out.b_bar.push(k.b_bar);
        out.signal.push(s);
    }
    Ok(out)
}

/// Rotates every `w_l` so that `ĥ_l^H(ψ) w_l` is real and nonnegative.
pub fn rotate_beamformers<T: Scalar>(cs: &ChannelSet<T>, state: &NetworkState<T>) -> Result<Beamformers<T>> {
    let mut w = state.w.clone();
    for l in 0..cs.dims().users {
        let h = equivalent_channel(cs, &state.psi.values, l)?;
        let s = cdot(&h, w.user(l));
        let mag = s.norm();
        if mag > T::zero() {
            let rot = s.conj() / mag;
            w.user_mut(l).iter_mut().for_each(|c| *c *= rot);
        }
    }
    Ok(w)
}

/// `a_bar - b_bar · φ / Ω`, or `-∞` when `Ω <= 0`.
fn surrogate_rate<T: Scalar>(coeffs: &SurrogateCoefficients<T>, l: usize, h: &[Complex<T>], w: &Beamformers<T>) -> T {
    let s0 = coeffs.signal[l];
    let omega = T::two() * s0 * cdot(h, w.user(l)).re - s0 * s0;
    if !(omega > T::zero()) {
        return T::neg_infinity();
    }
    coeffs.a_bar[l] - coeffs.b_bar[l] * interference(h, w, l) / omega
}

/// Surrogate rates `Ā_l − B̄_l φ_l/Ω_l` at `(w, ψ)`; `-∞` where `Ω_l <= 0`.
pub fn surrogate_rates<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    coeffs: &SurrogateCoefficients<T>,
    w: &Beamformers<T>,
    psi: &PhaseVector<T>,
) -> Result<Vec<T>> {
    let hs = normalized_channels(cs, params, psi)?;
    Ok(hs.iter().enumerate().map(|(l, h)| surrogate_rate(coeffs, l, h, w)).collect())
}

/// Linearized interference `φ_l^(κ)(w, ψ) / σ²` around the expansion point,
/// with the expansion channels taken at `ψ^(κ)` and the new ones at `psi`.
pub fn linearized_interference<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    coeffs: &SurrogateCoefficients<T>,
    w: &Beamformers<T>,
    psi: &PhaseVector<T>,
    l: usize,
) -> Result<T> {
    let h0 = &normalized_channels(cs, params, &coeffs.expansion.psi)?[l];
    let h = &normalized_channels(cs, params, psi)?[l];
    let w0 = &coeffs.expansion.w;
    let mut acc = T::one();
    for j in (0..w.users()).filter(|&j| j != l) {
        let c0 = cdot(h0, w0.user(j));
        let c = cdot(h, w.user(j));
        acc += T::two() * (c0.conj() * c).re - c0.norm_sqr();
    }
    Ok(acc)
}

/// Value of the beamforming-step surrogate `B Σ_l F_l(w, ρ)`.
pub fn beamforming_surrogate_value<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    coeffs: &SurrogateCoefficients<T>,
    w: &Beamformers<T>,
    rho: T,
) -> Result<T> {
    let hs = normalized_channels(cs, params, &coeffs.expansion.psi)?;
    let mut acc = T::zero();
    for (l, h) in hs.iter().enumerate() {
        let s0 = coeffs.signal[l];
        let omega = T::two() * s0 * cdot(h, w.user(l)).re - s0 * s0;
        if !(omega > T::zero()) {
            return Ok(T::neg_infinity());
        }
        acc += coeffs.a_ee[l] - coeffs.b_ee[l] * interference(h, w, l) / omega - coeffs.c_ee[l] * rho;
    }
    Ok(params.bandwidth_hz * acc)
}

/// `B Σ_l R_l(w | ψ) / ρ`, the quantity the beamforming surrogate bounds.
pub fn beamforming_true_value<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    w: &Beamformers<T>,
    psi: &PhaseVector<T>,
    rho: T,
) -> Result<T> {
    let hs = normalized_channels(cs, params, psi)?;
    let sum: T = hs
        .iter()
        .enumerate()
        .map(|(l, h)| (cdot(h, w.user(l)).norm_sqr() / interference(h, w, l)).ln_1p())
        .sum();
    Ok(params.bandwidth_hz * sum / rho)
}

/// Value of the phase-step surrogate
/// `B Σ_l (Ā_l − B̄_l φ_l(ψ)/Ω_l(ψ)) + η (Σ (2 Re{ψ0* ψ} − |ψ0|²) − NR)`.
pub fn phase_surrogate_value<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    coeffs: &SurrogateCoefficients<T>,
    psi: &PhaseVector<T>,
) -> Result<T> {
    let w = &coeffs.expansion.w;
    let hs = normalized_channels(cs, params, psi)?;
    let mut rate = T::zero();
    for (l, h) in hs.iter().enumerate() {
        rate += surrogate_rate(coeffs, l, h, w);
    }
    let lin: T = coeffs
        .expansion
        .psi
        .values
        .iter()
        .zip(&psi.values)
        .map(|(p0, p)| T::two() * (p0.conj() * p).re - p0.norm_sqr())
        .sum();
    Ok(params.bandwidth_hz * rate + params.penalty * (lin - T::from_usize(psi.len()).unwrap()))
}

/// `B Σ_l R_l(ψ | w) + η (Σ |ψ|² − NR)`, the penalized phase objective.
pub fn phase_true_value<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    w: &Beamformers<T>,
    psi: &PhaseVector<T>,
) -> Result<T> {
    let hs = normalized_channels(cs, params, psi)?;
    let sum: T = hs
        .iter()
        .enumerate()
        .map(|(l, h)| (cdot(h, w.user(l)).norm_sqr() / interference(h, w, l)).ln_1p())
        .sum();
    let pen: T = psi.values.iter().map(|p| p.norm_sqr()).sum::<T>() - T::from_usize(psi.len()).unwrap();
    Ok(params.bandwidth_hz * sum + params.penalty * pen)
}

/// Real and imaginary parts of a complex affine form, as two real
/// affine expressions.
#[derive(Debug, Clone)]
struct ComplexAffine<T> {
    re: AffineExpr<T>,
    im: AffineExpr<T>,
}

impl<T: Scalar> ComplexAffine<T> {
    /// `Σ_i h_i v_i` with `v_i = x[base + 2i] + j x[base + 2i + 1]`.
    fn linear(h: &[Complex<T>], base: usize) -> Self {
        let mut re = AffineExpr::constant(T::zero());
        let mut im = AffineExpr::constant(T::zero());
        for (i, c) in h.iter().enumerate() {
            let (xr, xi) = (base + 2 * i, base + 2 * i + 1);
            re.terms.push((xr, c.re));
            re.terms.push((xi, -c.im));
            im.terms.push((xr, c.im));
            im.terms.push((xi, c.re));
        }
        Self { re, im }
    }

    fn plus(mut self, c: Complex<T>) -> Self {
        self.re.constant += c.re;
        self.im.constant += c.im;
        self
    }

    /// `2 Re{conj(c0) · self}`.
    fn twice_real_inner(&self, c0: Complex<T>) -> AffineExpr<T> {
        AffineExpr::constant(T::zero())
            .add_scaled(&self.re, T::two() * c0.re)
            .add_scaled(&self.im, T::two() * c0.im)
    }
}

/// Backhaul linearization `Σ_l [ln(1+r0) − r0/(1+r0) + r/(1+r0)]` as an
/// affine expression in the `r` variables.
fn linearized_backhaul<T: Scalar>(r0: &[T], r_base: usize) -> AffineExpr<T> {
    let mut e = AffineExpr::constant(T::zero());
    for (l, &r) in r0.iter().enumerate() {
        let r = r.max(T::zero());
        let inv = (T::one() + r).recip();
        e.constant += r.ln_1p() - r * inv;
        e.terms.push((r_base + l, inv));
    }
    e
}

/// `r_l <= 2 max(r0_l, ceiling) + 1` where `ceiling` bounds the
/// interference-free SINR over the whole feasible set. Without it `r_l` is
/// only limited by a usually slack backhaul row and interior-point iterates
/// drift far along it. The slack keeps an interior when `r0_l` already
/// attains the ceiling (one user, no reflections).
fn add_sinr_ceiling<T: Scalar>(p: &mut ConeProgram<T>, r: usize, r0: T, ceiling: T) {
    let cap = T::two() * r0.max(ceiling) + T::one();
    p.add_nonneg(AffineExpr::constant(cap).term(r, -T::one()));
}

/// Lower bound on `Ω_l`; the conic form cannot express `Ω_l > 0`.
fn omega_floor<T: Scalar>(signal: T) -> T {
    T::lit(1e-8) * (signal * signal).min(T::one())
}

/// Which program the beamforming builder emits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamformingMode<T> {
    /// Maximize the energy-efficiency surrogate.
    Efficiency,
    /// Maximize the smallest QoS/backhaul surrogate margin `s`, capped at
    /// `cap`; used to reach a feasible starting point.
    Restoration { cap: T },
}

/// A beamforming-step program plus its variable layout.
#[derive(Debug, Clone)]
pub struct BeamformingProgram<T> {
    pub program: ConeProgram<T>,
    pub w_base: usize,
    /// Absent in restoration mode.
    pub rho: Option<usize>,
    pub r_base: usize,
    pub t_base: usize,
    /// Margin variable, restoration mode only.
    pub margin: Option<usize>,
    dims: crate::channel::Dims,
}

impl<T: Scalar> BeamformingProgram<T> {
    pub fn beamformers(&self, x: &[T]) -> Beamformers<T> {
        let d = self.dims;
        let n = d.stacked_len();
        let users = (0..d.users)
            .map(|l| {
                (0..n)
                    .map(|i| {
                        let b = self.w_base + 2 * (l * n + i);
                        Complex::new(x[b], x[b + 1])
                    })
                    .collect()
            })
            .collect();
        Beamformers::from_users(d, users).expect("dims fixed at build time")
    }

    pub fn aux_rates(&self, x: &[T]) -> Vec<T> {
        x[self.r_base..self.r_base + self.dims.users].to_vec()
    }
}

pub fn build_beamforming_subproblem<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    coeffs: &SurrogateCoefficients<T>,
) -> Result<BeamformingProgram<T>> {
    build_beamforming_program(cs, params, coeffs, BeamformingMode::Efficiency)
}

pub fn build_beamforming_program<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    coeffs: &SurrogateCoefficients<T>,
    mode: BeamformingMode<T>,
) -> Result<BeamformingProgram<T>> {
    let d = params.dims;
    if cs.dims() != d || coeffs.gamma.len() != d.users || coeffs.expansion.w.stacked_len() != d.stacked_len() {
        return Err(Error::Dimension("beamforming subproblem inputs disagree on dims".into()));
    }
    let (mm, kk, ll) = (d.aps, d.antennas, d.users);
    let n = d.stacked_len();
    let hs = normalized_channels(cs, params, &coeffs.expansion.psi)?;
    let w0 = &coeffs.expansion.w;

    let mut p = ConeProgram::new();
    let w_base = p.num_vars();
    for l in 0..ll {
        for m in 0..mm {
            for k in 0..kk {
                p.add_var(format!("re w[{l}][{m}][{k}]"));
                p.add_var(format!("im w[{l}][{m}][{k}]"));
            }
        }
    }
    let wvar = |l: usize| w_base + 2 * l * n;
    let restoring = matches!(mode, BeamformingMode::Restoration { .. });
    let rho = (!restoring).then(|| p.add_var("rho"));
    let r_base = p.add_vars("r", ll);
    let t_base = p.add_vars("t", ll);
    let margin = match mode {
        BeamformingMode::Restoration { .. } => Some(p.add_var("margin")),
        BeamformingMode::Efficiency => None,
    };

    // objective
    match mode {
        BeamformingMode::Efficiency => {
            let b = params.bandwidth_hz;
            let rho = rho.unwrap();
            for l in 0..ll {
                p.objective_offset += b * coeffs.a_ee[l];
                p.add_objective(t_base + l, -b * coeffs.b_ee[l]);
                p.add_objective(rho, -b * coeffs.c_ee[l]);
            }
        }
        BeamformingMode::Restoration { cap } => {
            let s = margin.unwrap();
            p.add_objective(s, T::one());
            p.add_nonneg(AffineExpr::constant(cap).term(s, -T::one()));
        }
    }

    for (l, h) in hs.iter().enumerate().take(ll) {
        let s0 = coeffs.signal[l];
        let own = ComplexAffine::linear(h, wvar(l));
        // Ω_l(w) = 2 s0 Re{h w_l} − s0²
        let omega = AffineExpr::constant(-s0 * s0).add_scaled(&own.re, T::two() * s0);

        // φ_l(w) <= t_l Ω_l(w)
        let mut xs = Vec::with_capacity(2 * ll - 1);
        for j in (0..ll).filter(|&j| j != l) {
            let c = ComplexAffine::linear(h, wvar(j));
            xs.push(c.re);
            xs.push(c.im);
        }
        xs.push(AffineExpr::constant(T::one()));
        p.add_rotated(AffineExpr::var(t_base + l), omega.clone().scaled(T::half()), xs);

        // surrogate QoS
        let mut qos = AffineExpr::constant(coeffs.a_bar[l] - params.rmin_nats[l]).term(t_base + l, -coeffs.b_bar[l]);
        if let Some(s) = margin {
            qos = qos.term(s, -T::one());
        }
        p.add_nonneg(qos);

        // |h w_l|² <= r_l φ_l^(κ)(w)
        let mut phi_lin = AffineExpr::constant(T::one());
        for j in (0..ll).filter(|&j| j != l) {
            let c0 = cdot(h, w0.user(j));
            let c = ComplexAffine::linear(h, wvar(j));
            phi_lin = phi_lin.add_scaled(&c.twice_real_inner(c0), T::one()).plus(-c0.norm_sqr());
        }
        p.add_rotated(
            AffineExpr::var(r_base + l),
            phi_lin.scaled(T::half()),
            vec![own.re.clone(), own.im.clone()],
        );

        p.add_nonneg(own.re.clone());
        p.add_nonneg(omega.plus(-omega_floor(s0)));

        let amp: T = (0..mm)
            .map(|m| {
                let blk = &h[m * kk..(m + 1) * kk];
                blk.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt() * params.pmax_w[m].sqrt()
            })
            .sum();
        add_sinr_ceiling(&mut p, r_base + l, coeffs.expansion.r_aux[l], amp * amp);
    }

    // linearized backhaul, one row per AP
    let lin = linearized_backhaul(&coeffs.expansion.r_aux, r_base);
    for m in 0..mm {
        let mut row = AffineExpr::constant(params.backhaul_budget(m)).add_scaled(&lin, -T::one());
        if let Some(s) = margin {
            row = row.term(s, -T::one());
        }
        p.add_nonneg(row);
    }

    // per-AP power budgets
    for m in 0..mm {
        let mut xs = Vec::with_capacity(2 * kk * ll);
        for l in 0..ll {
            for k in 0..kk {
                let b = wvar(l) + 2 * (m * kk + k);
                xs.push(AffineExpr::var(b));
                xs.push(AffineExpr::var(b + 1));
            }
        }
        p.add_soc(AffineExpr::constant(params.pmax_w[m].sqrt()), xs);
    }

    // total power <= rho
    if let Some(rho) = rho {
        let mut xs = Vec::with_capacity(2 * n * ll);
        for l in 0..ll {
            for m in 0..mm {
                let f = params.pa_inefficiency[m].sqrt();
                for k in 0..kk {
                    let b = wvar(l) + 2 * (m * kk + k);
                    xs.push(AffineExpr::var(b).scaled(f));
                    xs.push(AffineExpr::var(b + 1).scaled(f));
                }
            }
        }
        p.add_rotated(
            AffineExpr::var(rho).plus(-params.static_power()),
            AffineExpr::constant(T::half()),
            xs,
        );
    }

    Ok(BeamformingProgram {
        program: p,
        w_base,
        rho,
        r_base,
        t_base,
        margin,
        dims: d,
    })
}

/// A phase-step program plus its variable layout.
#[derive(Debug, Clone)]
pub struct PhaseProgram<T> {
    pub program: ConeProgram<T>,
    pub psi_base: usize,
    pub r_base: usize,
    pub t_base: usize,
    len: usize,
    users: usize,
}

impl<T: Scalar> PhaseProgram<T> {
    pub fn phases(&self, x: &[T]) -> PhaseVector<T> {
        PhaseVector {
            values: (0..self.len)
                .map(|i| Complex::new(x[self.psi_base + 2 * i], x[self.psi_base + 2 * i + 1]))
                .collect(),
        }
    }

    pub fn aux_rates(&self, x: &[T]) -> Vec<T> {
        x[self.r_base..self.r_base + self.users].to_vec()
    }
}

/// Phase-step program at fixed beamformers `w_fixed`. The coefficients
/// must have been computed at `(w_fixed, ψ^(κ))` with `w_fixed` rotated.
pub fn build_phase_subproblem<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    coeffs: &SurrogateCoefficients<T>,
    w_fixed: &Beamformers<T>,
) -> Result<PhaseProgram<T>> {
    let d = params.dims;
    if cs.dims() != d || coeffs.gamma.len() != d.users || w_fixed.stacked_len() != d.stacked_len() {
        return Err(Error::Dimension("phase subproblem inputs disagree on dims".into()));
    }
    let nr = d.phase_len();
    let ll = d.users;
    let inv_sigma = params.noise_power_w.sqrt().recip();
    let psi0 = &coeffs.expansion.psi;

    let mut p = ConeProgram::new();
    let psi_base = p.num_vars();
    for n in 0..d.surfaces {
        for r in 0..d.elements {
            p.add_var(format!("re psi[{n}][{r}]"));
            p.add_var(format!("im psi[{n}][{r}]"));
        }
    }
    let r_base = p.add_vars("r", ll);
    let t_base = p.add_vars("t", ll);

    // B Σ (Ā − B̄ t_l) + η (Σ (2 Re{ψ0* ψ} − |ψ0|²) − NR)
    let b = params.bandwidth_hz;
    let eta = params.penalty;
    for l in 0..ll {
        p.objective_offset += b * coeffs.a_bar[l];
        p.add_objective(t_base + l, -b * coeffs.b_bar[l]);
    }
    for (i, c) in psi0.values.iter().enumerate() {
        p.add_objective(psi_base + 2 * i, T::two() * eta * c.re);
        p.add_objective(psi_base + 2 * i + 1, T::two() * eta * c.im);
        p.objective_offset -= eta * c.norm_sqr();
    }
    p.objective_offset -= eta * T::from_usize(nr).unwrap();

    // ĥ_l^H(ψ) w_j / σ as complex affine forms in ψ
    let affine = |l: usize, j: usize| {
        let (direct, coefs) = cs.reflection_map(l, w_fixed.user(j));
        let scaled: Vec<Complex<T>> = coefs.into_iter().map(|c| c * inv_sigma).collect();
        ComplexAffine::linear(&scaled, psi_base).plus(direct * inv_sigma)
    };
    let eval0 = |e: &ComplexAffine<T>| {
        let mut x = vec![T::zero(); 2 * nr];
        for (i, c) in psi0.values.iter().enumerate() {
            x[2 * i] = c.re;
            x[2 * i + 1] = c.im;
        }
        let shift = |a: &AffineExpr<T>| {
            a.terms.iter().fold(a.constant, |acc, &(v, k)| acc + k * x[v - psi_base])
        };
        Complex::new(shift(&e.re), shift(&e.im))
    };

    for l in 0..ll {
        let s0 = coeffs.signal[l];
        let own = affine(l, l);
        let others: Vec<ComplexAffine<T>> = (0..ll).filter(|&j| j != l).map(|j| affine(l, j)).collect();
        let omega = AffineExpr::constant(-s0 * s0).add_scaled(&own.re, T::two() * s0);

        let mut xs = Vec::with_capacity(2 * ll - 1);
        for c in &others {
            xs.push(c.re.clone());
            xs.push(c.im.clone());
        }
        xs.push(AffineExpr::constant(T::one()));
        p.add_rotated(AffineExpr::var(t_base + l), omega.clone().scaled(T::half()), xs);

        p.add_nonneg(
            AffineExpr::constant(coeffs.a_bar[l] - params.rmin_nats[l]).term(t_base + l, -coeffs.b_bar[l]),
        );

        let mut phi_lin = AffineExpr::constant(T::one());
        for c in &others {
            let c0 = eval0(c);
            phi_lin = phi_lin.add_scaled(&c.twice_real_inner(c0), T::one()).plus(-c0.norm_sqr());
        }
        p.add_rotated(
            AffineExpr::var(r_base + l),
            phi_lin.scaled(T::half()),
            vec![own.re.clone(), own.im.clone()],
        );

        p.add_nonneg(own.re.clone());
        p.add_nonneg(omega.plus(-omega_floor(s0)));

        let (direct, coefs) = cs.reflection_map(l, w_fixed.user(l));
        let amp = (direct.norm() + coefs.iter().map(|c| c.norm()).sum::<T>()) * inv_sigma;
        add_sinr_ceiling(&mut p, r_base + l, coeffs.expansion.r_aux[l], amp * amp);
    }

    let lin = linearized_backhaul(&coeffs.expansion.r_aux, r_base);
    for m in 0..d.aps {
        p.add_nonneg(AffineExpr::constant(params.backhaul_budget(m)).add_scaled(&lin, -T::one()));
    }

    for i in 0..nr {
        p.add_soc(
            AffineExpr::constant(T::one()),
            vec![AffineExpr::var(psi_base + 2 * i), AffineExpr::var(psi_base + 2 * i + 1)],
        );
    }

    Ok(PhaseProgram {
        program: p,
        psi_base,
        r_base,
        t_base,
        len: nr,
        users: ll,
    })
}

/// Primal point of a beamforming program corresponding to the expansion
/// state itself (tight epigraph and auxiliaries).
pub fn beamforming_expansion_point<T: Scalar>(
    prog: &BeamformingProgram<T>,
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    coeffs: &SurrogateCoefficients<T>,
) -> Result<Vec<T>> {
    let st = &coeffs.expansion;
    let mut x = vec![T::zero(); prog.program.num_vars()];
    for (l, wl) in (0..st.w.users()).map(|l| (l, st.w.user(l))) {
        for (i, c) in wl.iter().enumerate() {
            let b = prog.w_base + 2 * (l * st.w.stacked_len() + i);
            x[b] = c.re;
            x[b + 1] = c.im;
        }
    }
    if let Some(r) = prog.rho {
        x[r] = st.rho.max(total_power(params, &st.w));
    }
    let hs = normalized_channels(cs, params, &st.psi)?;
    for l in 0..st.w.users() {
        x[prog.r_base + l] = st.r_aux[l];
        let s0 = coeffs.signal[l];
        x[prog.t_base + l] = interference(&hs[l], &st.w, l) / (s0 * s0);
    }
    if let Some(s) = prog.margin {
        x[s] = T::zero();
    }
    Ok(x)
}
