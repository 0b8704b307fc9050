//! System parameters and evaluation of rates, power, energy efficiency and
//! constraint margins.

use num_complex::Complex;

use crate::channel::{equivalent_channel, ChannelSet, Dims};
use crate::error::{Error, Result};
use crate::scalar::{db_to_linear, dbm_to_watts, Scalar};

/// Linear-scale system parameters. Rates are in nats/s/Hz throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams<T> {
    pub dims: Dims,
    pub bandwidth_hz: T,
    pub noise_power_w: T,
    /// Per-AP transmit power budget.
    pub pmax_w: Vec<T>,
    /// Per-AP amplifier inefficiency (>= 1).
    pub pa_inefficiency: Vec<T>,
    /// Per-AP circuit power.
    pub p_ap_w: Vec<T>,
    /// Per-user circuit power.
    pub p_ue_w: Vec<T>,
    /// Power of one reflecting element.
    pub p_ris_elem_w: T,
    /// Backhaul power of one (AP, user) pair.
    pub p_bh_w: T,
    /// Per-AP backhaul capacity.
    pub backhaul_cap_nats: Vec<T>,
    /// Per-AP backhaul scaling factor (>= 1).
    pub backhaul_scale: Vec<T>,
    /// Per-user minimum rate.
    pub rmin_nats: Vec<T>,
    /// Unit-modulus penalty weight.
    pub penalty: T,
}

impl<T: Scalar> SystemParams<T> {
    /// Default simulation parameters for the given dimensions.
    pub fn table_one(dims: Dims) -> Self {
        let ln2 = T::LN_2();
        let m = dims.aps;
        let l = dims.users;
        Self {
            dims,
            bandwidth_hz: T::lit(20e6),
            noise_power_w: dbm_to_watts(T::lit(-104.0)),
            pmax_w: vec![dbm_to_watts(T::lit(35.0)); m],
            pa_inefficiency: vec![T::lit(1.2); m],
            p_ap_w: vec![db_to_linear(T::lit(9.0)); m],
            p_ue_w: vec![dbm_to_watts(T::lit(10.0)); l],
            p_ris_elem_w: dbm_to_watts(T::lit(10.0)),
            p_bh_w: db_to_linear(T::lit(0.0)),
            backhaul_cap_nats: vec![T::lit(500.0) * ln2; m],
            backhaul_scale: vec![T::one(); m],
            rmin_nats: vec![T::lit(0.5) * ln2; l],
            penalty: T::lit(1e3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let m = self.dims.aps;
        let l = self.dims.users;
        let check_len = |name: &str, len: usize, want: usize| {
            if len != want {
                Err(Error::Dimension(format!("{name} has length {len}, expected {want}")))
            } else {
                Ok(())
            }
        };
        check_len("pmax_w", self.pmax_w.len(), m)?;
        check_len("pa_inefficiency", self.pa_inefficiency.len(), m)?;
        check_len("p_ap_w", self.p_ap_w.len(), m)?;
        check_len("backhaul_cap_nats", self.backhaul_cap_nats.len(), m)?;
        check_len("backhaul_scale", self.backhaul_scale.len(), m)?;
        check_len("p_ue_w", self.p_ue_w.len(), l)?;
        check_len("rmin_nats", self.rmin_nats.len(), l)?;

        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("noise_power_w", self.noise_power_w)?;
        positive("p_ris_elem_w", self.p_ris_elem_w)?;
        positive("p_bh_w", self.p_bh_w)?;
        positive("penalty", self.penalty)?;
        for i in 0..m {
            positive("pmax_w", self.pmax_w[i])?;
            positive("p_ap_w", self.p_ap_w[i])?;
            positive("backhaul_cap_nats", self.backhaul_cap_nats[i])?;
            if !(self.pa_inefficiency[i] >= T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "pa_inefficiency[{i}] must be >= 1, got {}",
                    self.pa_inefficiency[i]
                )));
            }
            if !(self.backhaul_scale[i] >= T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "backhaul_scale[{i}] must be >= 1, got {}",
                    self.backhaul_scale[i]
                )));
            }
        }
        for j in 0..l {
            positive("p_ue_w", self.p_ue_w[j])?;
            if !(self.rmin_nats[j] >= T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "rmin_nats[{j}] must be >= 0, got {}",
                    self.rmin_nats[j]
                )));
            }
        }
        Ok(())
    }

    /// Power drawn independently of the beamformers.
    pub fn static_power(&self) -> T {
        let d = self.dims;
        self.p_ap_w.iter().copied().sum::<T>()
            + self.p_ue_w.iter().copied().sum::<T>()
            + self.p_ris_elem_w * T::from_usize(d.phase_len()).unwrap()
            + self.p_bh_w * T::from_usize(d.aps * d.users).unwrap()
    }

    /// Backhaul budget `C_m / ω_m` of AP `m`.
    pub fn backhaul_budget(&self, m: usize) -> T {
        self.backhaul_cap_nats[m] / self.backhaul_scale[m]
    }
}

/// Stacked beamformers `w_l` (length MK each) for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers<T> {
    aps: usize,
    antennas: usize,
    users: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> Beamformers<T> {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            aps: dims.aps,
            antennas: dims.antennas,
            users: dims.users,
            data: vec![Complex::new(T::zero(), T::zero()); dims.stacked_len() * dims.users],
        }
    }

    pub fn from_users(dims: Dims, users: Vec<Vec<Complex<T>>>) -> Result<Self> {
        if users.len() != dims.users || users.iter().any(|u| u.len() != dims.stacked_len()) {
            return Err(Error::Dimension("beamformer shapes do not match dims".into()));
        }
        Ok(Self {
            aps: dims.aps,
            antennas: dims.antennas,
            users: dims.users,
            data: users.into_iter().flatten().collect(),
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn stacked_len(&self) -> usize {
        self.aps * self.antennas
    }

    pub fn user(&self, l: usize) -> &[Complex<T>] {
        let n = self.stacked_len();
        &self.data[l * n..(l + 1) * n]
    }

    pub fn user_mut(&mut self, l: usize) -> &mut [Complex<T>] {
        let n = self.stacked_len();
        &mut self.data[l * n..(l + 1) * n]
    }

    /// Block `w_{m,l}`, length K.
    pub fn block(&self, m: usize, l: usize) -> &[Complex<T>] {
        let k = self.antennas;
        &self.user(l)[m * k..(m + 1) * k]
    }

    /// `Σ_l ||w_{m,l}||²`.
    pub fn ap_power(&self, m: usize) -> T {
        (0..self.users)
            .map(|l| self.block(m, l).iter().map(|c| c.norm_sqr()).sum::<T>())
            .sum()
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn scale(&mut self, factor: T) {
        self.data.iter_mut().for_each(|c| *c *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Reflecting coefficients of every element, surface-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector<T> {
    pub values: Vec<Complex<T>>,
}

impl<T: Scalar> PhaseVector<T> {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![Complex::new(T::zero(), T::zero()); len],
        }
    }

    pub fn from_phases(phases: &[T]) -> Self {
        Self {
            values: phases.iter().map(|&th| Complex::from_polar(T::one(), th)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn phases(&self) -> Vec<T> {
        self.values.iter().map(|c| c.arg()).collect()
    }

    /// Largest `| |ψ_i| - 1 |`.
    pub fn max_modulus_deviation(&self) -> T {
        self.values
            .iter()
            .map(|c| (c.norm() - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// Elementwise `ψ / |ψ|`; zero entries become 1.
    pub fn project_unit_modulus(&self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .map(|c| {
                    let r = c.norm();
                    if r > T::zero() {
                        c / r
                    } else {
                        Complex::new(T::one(), T::zero())
                    }
                })
                .collect(),
        }
    }

    /// Elementwise projection onto the closed unit disk.
    pub fn clamp_to_disk(&self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .map(|c| {
                    let r = c.norm();
                    if r > T::one() {
                        c / r
                    } else {
                        *c
                    }
                })
                .collect(),
        }
    }
}

/// One iterate of the alternating algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState<T> {
    pub w: Beamformers<T>,
    pub psi: PhaseVector<T>,
    /// Power slack, at least the consumed power.
    pub rho: T,
    /// Per-user SINR auxiliaries.
    pub r_aux: Vec<T>,
}

impl<T: Scalar> NetworkState<T> {
    /// State with `rho` and `r_aux` made tight at `(w, psi)`.
    pub fn tight(cs: &ChannelSet<T>, params: &SystemParams<T>, w: Beamformers<T>, psi: PhaseVector<T>) -> Result<Self> {
        let mut s = Self {
            w,
            psi,
            rho: T::zero(),
            r_aux: Vec::new(),
        };
        s.rho = total_power(params, &s.w);
        s.r_aux = sinrs(cs, params, &s)?;
        Ok(s)
    }
}

fn dot<T: Scalar>(h: &[Complex<T>], w: &[Complex<T>]) -> Complex<T> {
    h.iter().zip(w).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
}

fn check_state<T: Scalar>(cs: &ChannelSet<T>, state: &NetworkState<T>) -> Result<()> {
    let d = cs.dims();
    if state.w.users() != d.users || state.w.stacked_len() != d.stacked_len() {
        return Err(Error::Dimension("beamformers do not match channel dims".into()));
    }
    if state.psi.len() != d.phase_len() {
        return Err(Error::Dimension(format!(
            "phase vector has length {}, expected {}",
            state.psi.len(),
            d.phase_len()
        )));
    }
    Ok(())
}

/// Signal power `|ĥ_l^H w_l|²` and interference-plus-noise of user `ue`.
pub fn signal_and_interference<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    state: &NetworkState<T>,
    ue: usize,
) -> Result<(T, T)> {
    check_state(cs, state)?;
    let h = equivalent_channel(cs, &state.psi.values, ue)?;
    let signal = dot(&h, state.w.user(ue)).norm_sqr();
    let mut interference = params.noise_power_w;
    for j in 0..cs.dims().users {
        if j != ue {
            interference += dot(&h, state.w.user(j)).norm_sqr();
        }
    }
    Ok((signal, interference))
}

/// SINR of user `ue`.
pub fn sinr<T: Scalar>(cs: &ChannelSet<T>, params: &SystemParams<T>, state: &NetworkState<T>, ue: usize) -> Result<T> {
    let (s, i) = signal_and_interference(cs, params, state, ue)?;
    Ok(s / i)
}

pub fn sinrs<T: Scalar>(cs: &ChannelSet<T>, params: &SystemParams<T>, state: &NetworkState<T>) -> Result<Vec<T>> {
    (0..cs.dims().users).map(|l| sinr(cs, params, state, l)).collect()
}

/// Achievable rate of user `ue` in nats/s/Hz.
pub fn rate_nats<T: Scalar>(cs: &ChannelSet<T>, params: &SystemParams<T>, state: &NetworkState<T>, ue: usize) -> Result<T> {
    Ok(sinr(cs, params, state, ue)?.ln_1p())
}

pub fn rates_nats<T: Scalar>(cs: &ChannelSet<T>, params: &SystemParams<T>, state: &NetworkState<T>) -> Result<Vec<T>> {
    Ok(sinrs(cs, params, state)?.into_iter().map(|g| g.ln_1p()).collect())
}

pub fn sum_rate_nats<T: Scalar>(cs: &ChannelSet<T>, params: &SystemParams<T>, state: &NetworkState<T>) -> Result<T> {
    Ok(rates_nats(cs, params, state)?.into_iter().sum())
}

/// Total consumed power in watts.
pub fn total_power<T: Scalar>(params: &SystemParams<T>, w: &Beamformers<T>) -> T {
    let transmit: T = (0..params.dims.aps)
        .map(|m| params.pa_inefficiency[m] * w.ap_power(m))
        .sum();
    transmit + params.static_power()
}

/// Energy efficiency in bits/joule.
pub fn energy_efficiency<T: Scalar>(cs: &ChannelSet<T>, params: &SystemParams<T>, state: &NetworkState<T>) -> Result<T> {
    let sum_rate = sum_rate_nats(cs, params, state)?;
    Ok(params.bandwidth_hz * sum_rate / T::LN_2() / total_power(params, &state.w))
}

/// Signed margins of every constraint family; negative means violated.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport<T> {
    /// `P^max_m - Σ_l ||w_{m,l}||²`.
    pub power: Vec<T>,
    /// `R_l - R^min_l`.
    pub rate: Vec<T>,
    /// `C^max_m / ω_m - Σ_l R_l`.
    pub backhaul: Vec<T>,
    /// `|ψ_i| - 1`.
    pub modulus: Vec<T>,
}

impl<T: Scalar> ResidualReport<T> {
    /// Largest violation of the power, rate and backhaul families (0 if none).
    pub fn max_violation(&self) -> T {
        self.power
            .iter()
            .chain(&self.rate)
            .chain(&self.backhaul)
            .fold(T::zero(), |acc, &v| acc.max(-v))
    }

    /// Smallest margin over power, rate and backhaul.
    pub fn min_margin(&self) -> T {
        self.power
            .iter()
            .chain(&self.rate)
            .chain(&self.backhaul)
            .fold(T::infinity(), |acc, &v| acc.min(v))
    }

    pub fn max_modulus_deviation(&self) -> T {
        self.modulus.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn is_feasible(&self, tol: T) -> bool {
        self.max_violation() <= tol
    }
}

pub fn constraint_residuals<T: Scalar>(
    cs: &ChannelSet<T>,
    params: &SystemParams<T>,
    state: &NetworkState<T>,
) -> Result<ResidualReport<T>> {
    let d = params.dims;
    let rates = rates_nats(cs, params, state)?;
    let sum_rate: T = rates.iter().copied().sum();
    Ok(ResidualReport {
        power: (0..d.aps).map(|m| params.pmax_w[m] - state.w.ap_power(m)).collect(),
        rate: rates.iter().zip(&params.rmin_nats).map(|(r, rmin)| *r - *rmin).collect(),
        backhaul: (0..d.aps).map(|m| params.backhaul_budget(m) - sum_rate).collect(),
        modulus: state.psi.values.iter().map(|c| c.norm() - T::one()).collect(),
    })
}
