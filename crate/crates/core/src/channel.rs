//! Network geometry, large/small-scale fading and the RIS-composed
//! equivalent channel.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Problem dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    /// Number of access points (M).
    pub aps: usize,
    /// Number of reflecting surfaces (N).
    pub surfaces: usize,
    /// Number of single-antenna users (L).
    pub users: usize,
    /// Antennas per access point (K).
    pub antennas: usize,
    /// Reflecting elements per surface (R).
    pub elements: usize,
}

impl Dims {
    pub fn new(aps: usize, surfaces: usize, users: usize, antennas: usize, elements: usize) -> Self {
        Self {
            aps,
            surfaces,
            users,
            antennas,
            elements,
        }
    }

    /// Length of a stacked per-user beamformer / equivalent channel (MK).
    pub fn stacked_len(&self) -> usize {
        self.aps * self.antennas
    }

    /// Total number of reflecting elements (NR).
    pub fn phase_len(&self) -> usize {
        self.surfaces * self.elements
    }

    pub fn validate(&self) -> Result<()> {
        if self.aps == 0 || self.users == 0 || self.antennas == 0 {
            return Err(Error::Dimension(format!(
                "need at least one AP, user and antenna, got {self:?}"
            )));
        }
        if self.surfaces > 0 && self.elements == 0 {
            return Err(Error::Dimension("surfaces present but zero elements".into()));
        }
        Ok(())
    }
}

/// Planar node positions in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout<T> {
    pub ap_positions: Vec<[T; 2]>,
    pub ris_positions: Vec<[T; 2]>,
    pub ue_positions: Vec<[T; 2]>,
    pub region_radius: T,
}

impl<T: Scalar> Layout<T> {
    /// Same layout with every AP replaced by a single AP at the origin.
    pub fn collocated(&self) -> Self {
        Self {
            ap_positions: vec![[T::zero(), T::zero()]],
            ris_positions: self.ris_positions.clone(),
            ue_positions: self.ue_positions.clone(),
            region_radius: self.region_radius,
        }
    }
}

/// Large-scale fading parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams<T> {
    /// Shadowing standard deviation in dB.
    pub shadow_std_db: T,
    /// First breakpoint distance in meters.
    pub ref_dist_0: T,
    /// Second breakpoint distance in meters.
    pub ref_dist_1: T,
    pub seed: u64,
}

impl<T: Scalar> FadingParams<T> {
    pub fn new(shadow_std_db: T, ref_dist_0: T, ref_dist_1: T, seed: u64) -> Result<Self> {
        let p = Self {
            shadow_std_db,
            ref_dist_0,
            ref_dist_1,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ref_dist_0 > T::zero() && self.ref_dist_0 < self.ref_dist_1) {
            return Err(Error::InvalidParameter(format!(
                "reference distances must satisfy 0 < d0 < d1, got ({}, {})",
                self.ref_dist_0, self.ref_dist_1
            )));
        }
        if !(self.shadow_std_db >= T::zero()) {
            return Err(Error::InvalidParameter("shadowing std must be >= 0".into()));
        }
        Ok(())
    }
}

/// All channel coefficients of one realization.
///
/// Row vectors are stored already conjugated, i.e. `direct(m, l)` is the
/// 1xK row `h_{m,l}^H` and `ris_ue(n, l)` the 1xR row `g_{n,l}^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T> {
    dims: Dims,
    direct: Vec<Complex<T>>,
    ap_ris: Vec<Complex<T>>,
    ris_ue: Vec<Complex<T>>,
}

impl<T: Scalar> ChannelSet<T> {
    /// All-zero channel set.
    pub fn zeros(dims: Dims) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self {
            dims,
            direct: vec![z; dims.aps * dims.users * dims.antennas],
            ap_ris: vec![z; dims.aps * dims.surfaces * dims.elements * dims.antennas],
            ris_ue: vec![z; dims.surfaces * dims.users * dims.elements],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// `h_{m,l}^H`, length K.
    pub fn direct(&self, m: usize, l: usize) -> &[Complex<T>] {
        let k = self.dims.antennas;
        let off = (m * self.dims.users + l) * k;
        &self.direct[off..off + k]
    }

    pub fn direct_mut(&mut self, m: usize, l: usize) -> &mut [Complex<T>] {
        let k = self.dims.antennas;
        let off = (m * self.dims.users + l) * k;
        &mut self.direct[off..off + k]
    }

    /// `H_{m,n}` row-major R x K.
    pub fn ap_ris(&self, m: usize, n: usize) -> &[Complex<T>] {
        let len = self.dims.elements * self.dims.antennas;
        let off = (m * self.dims.surfaces + n) * len;
        &self.ap_ris[off..off + len]
    }

    pub fn ap_ris_mut(&mut self, m: usize, n: usize) -> &mut [Complex<T>] {
        let len = self.dims.elements * self.dims.antennas;
        let off = (m * self.dims.surfaces + n) * len;
        &mut self.ap_ris[off..off + len]
    }

    /// `g_{n,l}^H`, length R.
    pub fn ris_ue(&self, n: usize, l: usize) -> &[Complex<T>] {
        let r = self.dims.elements;
        let off = (n * self.dims.users + l) * r;
        &self.ris_ue[off..off + r]
    }

    pub fn ris_ue_mut(&mut self, n: usize, l: usize) -> &mut [Complex<T>] {
        let r = self.dims.elements;
        let off = (n * self.dims.users + l) * r;
        &mut self.ris_ue[off..off + r]
    }

    /// Copy with every reflected path removed.
    pub fn without_reflections(&self) -> Self {
        let mut out = self.clone();
        let z = Complex::new(T::zero(), T::zero());
        out.ap_ris.iter_mut().for_each(|c| *c = z);
        out.ris_ue.iter_mut().for_each(|c| *c = z);
        out
    }

    /// Multiplies every coefficient by `factor`; used to normalize by the noise amplitude.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.direct.iter_mut().for_each(|c| *c *= factor);
        // reflected paths are a product H * g, so only one factor is applied
        out.ris_ue.iter_mut().for_each(|c| *c *= factor);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.direct
            .iter()
            .chain(&self.ap_ris)
            .chain(&self.ris_ue)
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Coefficients of the reflected contribution to `ĥ_l^H(ψ) v` for a
    /// stacked vector `v` (length MK): returns `(h_l^H v, c)` with
    /// `ĥ_l^H(ψ) v = h_l^H v + Σ_i ψ_i c_i`.
    pub fn reflection_map(&self, ue: usize, v: &[Complex<T>]) -> (Complex<T>, Vec<Complex<T>>) {
        let d = self.dims;
        let k = d.antennas;
        let zero = Complex::new(T::zero(), T::zero());
        let mut direct = zero;
        for m in 0..d.aps {
            let h = self.direct(m, ue);
            let vm = &v[m * k..(m + 1) * k];
            for (a, b) in h.iter().zip(vm) {
                direct += a * b;
            }
        }
        let mut coeffs = vec![zero; d.phase_len()];
        for n in 0..d.surfaces {
            let g = self.ris_ue(n, ue);
            for (r, gr) in g.iter().enumerate() {
                let mut acc = zero;
                for m in 0..d.aps {
                    let hmn = self.ap_ris(m, n);
                    let row = &hmn[r * k..(r + 1) * k];
                    let vm = &v[m * k..(m + 1) * k];
                    for (a, b) in row.iter().zip(vm) {
                        acc += a * b;
                    }
                }
                coeffs[n * d.elements + r] = gr * acc;
            }
        }
        (direct, coeffs)
    }
}

fn sample_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn uniform_disk_point<T: Scalar, R: Rng>(rng: &mut R, radius: T) -> [T; 2] {
    let u: f64 = rng.random();
    let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let rad = radius.as_f64() * u.sqrt();
    // guard against rounding just outside the disk
    let rad = rad.min(radius.as_f64());
    [T::lit(rad * theta.cos()), T::lit(rad * theta.sin())]
}

/// Draws `m` APs, `n` surfaces and `l` users uniformly over a disk of the
/// given radius centered at the origin.
pub fn generate_layout<T: Scalar>(m: usize, n: usize, l: usize, radius: T, seed: u64) -> Result<Layout<T>> {
    if m == 0 || n == 0 || l == 0 {
        return Err(Error::InvalidParameter(format!(
            "layout counts must be >= 1, got ({m}, {n}, {l})"
        )));
    }
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ap_positions = (0..m).map(|_| uniform_disk_point(&mut rng, radius)).collect();
    let ris_positions = (0..n).map(|_| uniform_disk_point(&mut rng, radius)).collect();
    let ue_positions = (0..l).map(|_| uniform_disk_point(&mut rng, radius)).collect();
    Ok(Layout {
        ap_positions,
        ris_positions,
        ue_positions,
        region_radius: radius,
    })
}

/// Three-slope path loss in dB for a distance in meters.
///
/// The slope indicators are 1 strictly below their breakpoint and 0 at or
/// beyond it.
pub fn path_loss_db<T: Scalar>(distance: T, params: &FadingParams<T>) -> Result<T> {
    if !(distance > T::zero()) || !distance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "path loss needs a positive finite distance, got {distance}"
        )));
    }
    let km = T::lit(1000.0);
    let d = distance / km;
    let d0 = params.ref_dist_0 / km;
    let d1 = params.ref_dist_1 / km;
    let a0 = if distance < params.ref_dist_0 { T::one() } else { T::zero() };
    let a1 = if distance < params.ref_dist_1 { T::one() } else { T::zero() };
    let mut pl = T::lit(-140.7) - T::lit(35.0) * d.log10();
    if a0 > T::zero() {
        pl += T::lit(20.0) * (d / d0).log10();
    }
    if a1 > T::zero() {
        pl += T::lit(15.0) * (d / d1).log10();
    }
    Ok(pl)
}

fn distance<T: Scalar>(a: &[T; 2], b: &[T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Shortest distance fed to the path-loss model; below `d0` the model is flat.
const MIN_LINK_DISTANCE_M: f64 = 1e-3;

fn link_gain<T: Scalar, R: Rng>(rng: &mut R, d: T, params: &FadingParams<T>) -> Result<T> {
    let d = d.max(T::lit(MIN_LINK_DISTANCE_M));
    let pl = path_loss_db(d, params)?;
    let z = T::lit(sample_normal(rng));
    let beta_db = pl + params.shadow_std_db * z;
    Ok(T::lit(10.0).powf(beta_db / T::lit(10.0)))
}

fn fill_rayleigh<T: Scalar, R: Rng>(rng: &mut R, out: &mut [Complex<T>], amplitude: T) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for c in out.iter_mut() {
        let re = sample_normal(rng) * s;
        let im = sample_normal(rng) * s;
        *c = Complex::new(T::lit(re), T::lit(im)) * amplitude;
    }
}

/// Draws every channel of `layout` with antennas/elements per `k`, `r`.
///
/// Each link pair gets one shadowing draw shared by all of its entries;
/// entries are i.i.d. unit-variance circularly-symmetric complex Gaussian.
pub fn generate_channels<T: Scalar>(
    layout: &Layout<T>,
    params: &FadingParams<T>,
    antennas: usize,
    elements: usize,
) -> Result<ChannelSet<T>> {
    params.validate()?;
    let dims = Dims::new(
        layout.ap_positions.len(),
        layout.ris_positions.len(),
        layout.ue_positions.len(),
        antennas,
        elements,
    );
    dims.validate()?;
    let mut cs = ChannelSet::zeros(dims);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for (m, ap) in layout.ap_positions.iter().enumerate() {
        for (l, ue) in layout.ue_positions.iter().enumerate() {
            let beta = link_gain(&mut rng, distance(ap, ue), params)?;
            fill_rayleigh(&mut rng, cs.direct_mut(m, l), beta.sqrt());
        }
    }
    for (m, ap) in layout.ap_positions.iter().enumerate() {
        for (n, ris) in layout.ris_positions.iter().enumerate() {
            let beta = link_gain(&mut rng, distance(ap, ris), params)?;
            fill_rayleigh(&mut rng, cs.ap_ris_mut(m, n), beta.sqrt());
        }
    }
    for (n, ris) in layout.ris_positions.iter().enumerate() {
        for (l, ue) in layout.ue_positions.iter().enumerate() {
            let beta = link_gain(&mut rng, distance(ris, ue), params)?;
            fill_rayleigh(&mut rng, cs.ris_ue_mut(n, l), beta.sqrt());
        }
    }
    Ok(cs)
}

/// Stacked equivalent channel `ĥ_l^H(ψ)` of user `ue`, length MK.
pub fn equivalent_channel<T: Scalar>(cs: &ChannelSet<T>, psi: &[Complex<T>], ue: usize) -> Result<Vec<Complex<T>>> {
    let d = cs.dims();
    if psi.len() != d.phase_len() {
        return Err(Error::Dimension(format!(
            "phase vector has length {}, expected {}",
            psi.len(),
            d.phase_len()
        )));
    }
    if ue >= d.users {
        return Err(Error::Dimension(format!("user index {ue} out of range ({})", d.users)));
    }
    let k = d.antennas;
    let mut out = Vec::with_capacity(d.stacked_len());
    for m in 0..d.aps {
        out.extend_from_slice(cs.direct(m, ue));
    }
    for n in 0..d.surfaces {
        let g = cs.ris_ue(n, ue);
        let psi_n = &psi[n * d.elements..(n + 1) * d.elements];
        for m in 0..d.aps {
            let hmn = cs.ap_ris(m, n);
            let dst = &mut out[m * k..(m + 1) * k];
            for r in 0..d.elements {
                let weight = psi_n[r] * g[r];
                if weight.re == T::zero() && weight.im == T::zero() {
                    continue;
                }
                for (o, h) in dst.iter_mut().zip(&hmn[r * k..(r + 1) * k]) {
                    *o += weight * h;
                }
            }
        }
    }
    Ok(out)
}
