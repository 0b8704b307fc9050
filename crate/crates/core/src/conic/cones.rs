//! Cone arithmetic for the product of one nonnegative orthant and a list of
//! second-order cones, laid out as `[orthant | soc_1 | soc_2 | …]`.

use super::linalg::{dot, norm};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct ConeLayout {
    pub orth: usize,
    /// `(start, size)` of each second-order block.
    pub socs: Vec<(usize, usize)>,
    pub dim: usize,
}

impl ConeLayout {
    pub fn degree(&self) -> usize {
        self.orth + self.socs.len()
    }

    pub fn identity<T: Scalar>(&self) -> Vec<T> {
        let mut e = vec![T::zero(); self.dim];
        e[..self.orth].iter_mut().for_each(|v| *v = T::one());
        for &(st, _) in &self.socs {
            e[st] = T::one();
        }
        e
    }

    /// Smallest Jordan eigenvalue over all blocks.
    pub fn min_eig<T: Scalar>(&self, v: &[T]) -> T {
        let mut m = T::infinity();
        for x in &v[..self.orth] {
            m = m.min(*x);
        }
        for &(st, k) in &self.socs {
            m = m.min(v[st] - norm(&v[st + 1..st + k]));
        }
        m
    }

    pub fn jprod<T: Scalar>(&self, u: &[T], v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for i in 0..self.orth {
            out[i] = u[i] * v[i];
        }
        for &(st, k) in &self.socs {
            let (u0, v0) = (u[st], v[st]);
            out[st] = dot(&u[st..st + k], &v[st..st + k]);
            for i in st + 1..st + k {
                out[i] = u0 * v[i] + v0 * u[i];
            }
        }
        out
    }

    /// Solves `lambda ∘ u = v` for `u`.
    pub fn jdiv<T: Scalar>(&self, lambda: &[T], v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for i in 0..self.orth {
            out[i] = v[i] / lambda[i];
        }
        for &(st, k) in &self.socs {
            let l0 = lambda[st];
            let l1 = &lambda[st + 1..st + k];
            let nl1 = norm(l1);
            let det = (l0 - nl1) * (l0 + nl1);
            let u0 = (l0 * v[st] - dot(l1, &v[st + 1..st + k])) / det;
            out[st] = u0;
            for j in 1..k {
                out[st + j] = (v[st + j] - u0 * l1[j - 1]) / l0;
            }
        }
        out
    }

    /// Largest `alpha >= 0` with `u + alpha du` in the closed cone, assuming
    /// `u` is interior. Infinite when the ray never leaves the cone.
    pub fn max_step<T: Scalar>(&self, u: &[T], du: &[T]) -> T {
        let mut alpha = T::infinity();
        for i in 0..self.orth {
            if du[i] < T::zero() {
                alpha = alpha.min(-u[i] / du[i]);
            }
        }
        for &(st, k) in &self.socs {
            alpha = alpha.min(soc_step(&u[st..st + k], &du[st..st + k]));
        }
        alpha
    }
}

fn soc_step<T: Scalar>(u: &[T], d: &[T]) -> T {
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let nu1 = norm(&u[1..]);
    let c = (u[0] - nu1) * (u[0] + nu1);
    // f(alpha) = a alpha^2 + 2 b alpha + c, c > 0
    let mut best = T::infinity();
    let scale = d.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let small = T::epsilon() * scale * scale;
    if a.abs() <= small {
        if b < T::zero() {
            best = -c / (T::two() * b);
        }
    } else {
        let disc = b * b - a * c;
        if disc >= T::zero() {
            let sq = disc.sqrt();
            let q = if b >= T::zero() { -(b + sq) } else { -b + sq };
            for r in [q / a, if q != T::zero() { c / q } else { T::infinity() }] {
                if r > T::zero() && r < best {
                    best = r;
                }
            }
        }
    }
    if d[0] < T::zero() {
        best = best.min(-u[0] / d[0]);
    }
    best
}

#[derive(Debug, Clone)]
struct SocScaling<T> {
    eta: T,
    /// `[w0, w1…]` with `w0² - ||w1||² = 1`.
    w: Vec<T>,
}

/// Nesterov–Todd scaling `W` with `W z = W^{-1} s = lambda`.
#[derive(Debug, Clone)]
pub(crate) struct NtScaling<T> {
    orth: Vec<T>,
    soc: Vec<SocScaling<T>>,
    pub lambda: Vec<T>,
}

impl<T: Scalar> NtScaling<T> {
    pub fn new(layout: &ConeLayout, s: &[T], z: &[T]) -> Option<Self> {
        let mut orth = Vec::with_capacity(layout.orth);
        for i in 0..layout.orth {
            if !(s[i] > T::zero() && z[i] > T::zero()) {
                return None;
            }
            orth.push((s[i] / z[i]).sqrt());
        }
        let mut soc = Vec::with_capacity(layout.socs.len());
        for &(st, k) in &layout.socs {
            let sb = &s[st..st + k];
            let zb = &z[st..st + k];
            let ns = norm(&sb[1..]);
            let nz = norm(&zb[1..]);
            let sres = (sb[0] - ns) * (sb[0] + ns);
            let zres = (zb[0] - nz) * (zb[0] + nz);
            if !(sres > T::zero() && zres > T::zero() && sb[0] > T::zero() && zb[0] > T::zero()) {
                return None;
            }
            let (sn, zn) = (sres.sqrt(), zres.sqrt());
            let sbar: Vec<T> = sb.iter().map(|v| *v / sn).collect();
            let zbar: Vec<T> = zb.iter().map(|v| *v / zn).collect();
            let gamma = ((T::one() + dot(&sbar, &zbar)) / T::two()).sqrt();
            let mut w = Vec::with_capacity(k);
            w.push((sbar[0] + zbar[0]) / (T::two() * gamma));
            for j in 1..k {
                w.push((sbar[j] - zbar[j]) / (T::two() * gamma));
            }
            // re-normalize so that w0^2 - ||w1||^2 = 1 holds to rounding
            let nw1 = norm(&w[1..]);
            w[0] = (T::one() + nw1 * nw1).sqrt();
            let eta = (sres / zres).sqrt().sqrt();
            if !eta.is_finite() || !w.iter().all(|v| v.is_finite()) {
                return None;
            }
            soc.push(SocScaling { eta, w });
        }
        let mut me = Self {
            orth,
            soc,
            lambda: Vec::new(),
        };
        me.lambda = me.apply(layout, z, false);
        Some(me)
    }

    /// `W v`, or `W^{-1} v` when `inverse`.
    pub fn apply(&self, layout: &ConeLayout, v: &[T], inverse: bool) -> Vec<T> {
        let mut out = vec![T::zero(); layout.dim];
        for i in 0..layout.orth {
            out[i] = if inverse { v[i] / self.orth[i] } else { v[i] * self.orth[i] };
        }
        for (b, &(st, k)) in layout.socs.iter().enumerate() {
            let sc = &self.soc[b];
            let w0 = sc.w[0];
            let w1 = &sc.w[1..];
            let vb = &v[st..st + k];
            let wv = dot(w1, &vb[1..]);
            let f = if inverse { sc.eta.recip() } else { sc.eta };
            let sign = if inverse { -T::one() } else { T::one() };
            out[st] = f * (w0 * vb[0] + sign * wv);
            let coef = sign * vb[0] + wv / (T::one() + w0);
            for j in 1..k {
                out[st + j] = f * (vb[j] + coef * w1[j - 1]);
            }
        }
        out
    }

    /// `W² v`, or `W^{-2} v` when `inverse`.
    pub fn apply2(&self, layout: &ConeLayout, v: &[T], inverse: bool) -> Vec<T> {
        let t = self.apply(layout, v, inverse);
        self.apply(layout, &t, inverse)
    }

    /// `z_i / s_i` for the orthant, i.e. diagonal of `W^{-2}`.
    pub fn orth_inv2(&self, i: usize) -> T {
        let w = self.orth[i];
        (w * w).recip()
    }

    /// `(eta, w0, w1)` of second-order block `b`.
    pub fn soc_parts(&self, b: usize) -> (T, T, &[T]) {
        let sc = &self.soc[b];
        (sc.eta, sc.w[0], &sc.w[1..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> ConeLayout {
        ConeLayout {
            orth: 2,
            socs: vec![(2, 3), (5, 4)],
            dim: 9,
        }
    }

    fn interior_pair() -> (Vec<f64>, Vec<f64>) {
        let s = vec![0.5, 2.0, 3.0, 1.0, -2.0, 1.5, 0.3, 0.2, -1.0];
        let z = vec![1.5, 0.1, 1.2, -0.9, 0.4, 4.0, -2.0, 1.0, 0.5];
        (s, z)
    }

    #[test]
    fn nt_scaling_maps_s_and_z_to_same_point() {
        let l = layout();
        let (s, z) = interior_pair();
        let nt = NtScaling::new(&l, &s, &z).unwrap();
        let winv_s = nt.apply(&l, &s, true);
        for (a, b) in winv_s.iter().zip(&nt.lambda) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // W W^{-1} = I
        let v: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let back = nt.apply(&l, &nt.apply(&l, &v, true), false);
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
        // W is symmetric: u^T W v = v^T W u
        let u: Vec<f64> = (0..9).map(|i| (i as f64 * 1.3).cos()).collect();
        let lhs = dot(&u, &nt.apply(&l, &v, false));
        let rhs = dot(&v, &nt.apply(&l, &u, false));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn jordan_division_inverts_product() {
        let l = layout();
        let (s, z) = interior_pair();
        let q = l.jdiv(&s, &z);
        let back = l.jprod(&s, &q);
        for (a, b) in back.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn max_step_lands_on_boundary() {
        let l = layout();
        let (s, _) = interior_pair();
        let d: Vec<f64> = vec![0.1, -1.0, -2.0, 0.5, 0.3, -1.0, 0.2, 0.0, 0.4];
        let a = l.max_step(&s, &d);
        assert!(a.is_finite());
        let at: Vec<f64> = s.iter().zip(&d).map(|(x, y)| x + a * y).collect();
        assert!(l.min_eig(&at).abs() < 1e-10);
        let inside: Vec<f64> = s.iter().zip(&d).map(|(x, y)| x + 0.999 * a * y).collect();
        assert!(l.min_eig(&inside) > 0.0);
        // identity direction never leaves
        assert!(l.max_step(&s, &l.identity::<f64>()).is_infinite());
    }
}
