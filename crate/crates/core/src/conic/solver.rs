//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling
//! and a Mehrotra predictor–corrector.
//!
//! Internally the program is put in the standard minimization form
//!
//! ```text
//! minimize cᵀx  s.t.  A x = b,  G x + s = h,  s ∈ K
//! ```
//!
//! with `K` a product of one orthant and second-order cones; rotated cones
//! are mapped onto second-order cones by `(u, v) ↦ ((u+v)/√2, (u−v)/√2)`.
//! Newton systems are reduced to the normal equations `Gᵀ W⁻² G` (dense
//! Cholesky) with a Schur complement for the equalities, followed by
//! iterative refinement on the full system.

use super::cones::{ConeLayout, NtScaling};
use super::linalg::{axpy, dot, norm, Cholesky};
use super::{Cone, ConeProgram};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<T> {
    pub tol: T,
    pub max_iters: usize,
    /// Iterative refinement passes per linear solve.
    pub refine_steps: usize,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-7),
            max_iters: 200,
            refine_steps: 3,
        }
    }
}

impl<T: Scalar> SolverSettings<T> {
    pub fn new(tol: T, max_iters: usize) -> Self {
        Self {
            tol,
            max_iters,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    pub status: SolveStatus,
    /// Best primal point (for `Infeasible` the last iterate).
    pub primal: Vec<T>,
    /// `objective · primal + objective_offset`.
    pub objective_value: T,
    /// Largest absolute equality or cone violation at `primal`.
    pub primal_residual: T,
    /// `||objective + Σ z·∇row − Σ y·∇eq|| / max(1, ||objective||)`.
    pub dual_residual: T,
    /// `(primal − dual) / max(1, |primal|, |dual|)` in objective units.
    pub duality_gap: T,
    pub iterations: usize,
    /// Multipliers `y` of the equalities.
    pub equality_duals: Vec<T>,
    /// Multipliers `z ∈ K*` of each cone constraint, in its own coordinates.
    pub cone_duals: Vec<Vec<T>>,
}

type SparseRows<T> = Vec<Vec<(usize, T)>>;

struct SocBlock<T> {
    cols: Vec<usize>,
    /// Rows of `G` restricted to `cols`, row-major `size × cols.len()`.
    g: Vec<T>,
    /// `G₁ᵀ G₁` over rows `1..`, only built for large blocks.
    gram1: Option<Vec<T>>,
}

const DIRECT_BLOCK_LIMIT: usize = 32;

struct Internal<T> {
    n: usize,
    c: Vec<T>,
    a: SparseRows<T>,
    b: Vec<T>,
    g: SparseRows<T>,
    h: Vec<T>,
    layout: ConeLayout,
    blocks: Vec<SocBlock<T>>,
    cscale: T,
    /// Internal rows used by each original cone constraint.
    cone_rows: Vec<(Cone, Vec<usize>)>,
}

fn mat_vec<T: Scalar>(rows: &SparseRows<T>, x: &[T]) -> Vec<T> {
    rows.iter()
        .map(|r| r.iter().fold(T::zero(), |acc, &(j, v)| acc + v * x[j]))
        .collect()
}

fn mat_t_vec<T: Scalar>(rows: &SparseRows<T>, y: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (r, &yi) in rows.iter().zip(y) {
        if yi != T::zero() {
            for &(j, v) in r {
                out[j] += v * yi;
            }
        }
    }
    out
}

fn add_into<T: Scalar>(a: &mut [T], b: &[T]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
}

fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

fn scale<T: Scalar>(a: &[T], f: T) -> Vec<T> {
    a.iter().map(|x| *x * f).collect()
}

impl<T: Scalar> Internal<T> {
    fn build(prog: &ConeProgram<T>) -> Self {
        let n = prog.num_vars();
        let cmax = prog.objective.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let cscale = if cmax > T::zero() { cmax } else { T::one() };
        let c = prog.objective.iter().map(|v| -*v / cscale).collect();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for e in &prog.equalities {
            let e = e.clone().compact();
            b.push(-e.constant);
            a.push(e.terms);
        }
        let mut g: SparseRows<T> = Vec::new();
        let mut h = Vec::new();
        let mut cone_rows: Vec<(Cone, Vec<usize>)> = vec![(Cone::Nonnegative(0), Vec::new()); prog.cones.len()];
        // orthant rows first
        for (ci, cc) in prog.cones.iter().enumerate() {
            cone_rows[ci].0 = cc.cone;
            if let Cone::Nonnegative(_) = cc.cone {
                for r in &cc.rows {
                    let r = r.clone().compact();
                    cone_rows[ci].1.push(g.len());
                    h.push(r.constant);
                    g.push(r.terms.into_iter().map(|(j, v)| (j, -v)).collect());
                }
            }
        }
        let orth = g.len();
        let mut socs = Vec::new();
        let inv_sqrt2 = T::SQRT_2().recip();
        for (ci, cc) in prog.cones.iter().enumerate() {
            let rows: Vec<_> = match cc.cone {
                Cone::Nonnegative(_) => continue,
                Cone::SecondOrder(_) => cc.rows.clone(),
                Cone::RotatedSecondOrder(_) => {
                    let mut rows = cc.rows.clone();
                    let (u, v) = (rows[0].clone(), rows[1].clone());
                    rows[0] = u.clone().add_scaled(&v, T::one()).scaled(inv_sqrt2);
                    rows[1] = u.add_scaled(&v, -T::one()).scaled(inv_sqrt2);
                    rows
                }
            };
            socs.push((g.len(), rows.len()));
            for r in rows {
                let r = r.compact();
                cone_rows[ci].1.push(g.len());
                h.push(r.constant);
                g.push(r.terms.into_iter().map(|(j, v)| (j, -v)).collect());
            }
        }
        let dim = g.len();
        let layout = ConeLayout { orth, socs, dim };
        let blocks = layout
            .socs
            .iter()
            .map(|&(st, k)| {
                let mut cols: Vec<usize> = g[st..st + k].iter().flat_map(|r| r.iter().map(|t| t.0)).collect();
                cols.sort_unstable();
                cols.dedup();
                let nc = cols.len();
                let mut dense = vec![T::zero(); k * nc];
                for (ri, r) in g[st..st + k].iter().enumerate() {
                    for &(j, v) in r {
                        let pos = cols.binary_search(&j).unwrap();
                        dense[ri * nc + pos] += v;
                    }
                }
                let gram1 = (k > DIRECT_BLOCK_LIMIT).then(|| {
                    let mut gm = vec![T::zero(); nc * nc];
                    for r in &g[st + 1..st + k] {
                        for (ia, &(ja, va)) in r.iter().enumerate() {
                            let pa = cols.binary_search(&ja).unwrap();
                            for &(jb, vb) in &r[..=ia] {
                                let pb = cols.binary_search(&jb).unwrap();
                                let (hi, lo) = if pa >= pb { (pa, pb) } else { (pb, pa) };
                                gm[hi * nc + lo] += va * vb;
                            }
                        }
                    }
                    gm
                });
                SocBlock { cols, g: dense, gram1 }
            })
            .collect();
        Self {
            n,
            c,
            a,
            b,
            g,
            h,
            layout,
            blocks,
            cscale,
            cone_rows,
        }
    }

    /// Lower triangle of `Gᵀ W⁻² G` (identity scaling when `nt` is `None`).
    fn normal_matrix(&self, nt: Option<&NtScaling<T>>) -> Vec<T> {
        let n = self.n;
        let mut hm = vec![T::zero(); n * n];
        for i in 0..self.layout.orth {
            let d = nt.map_or(T::one(), |s| s.orth_inv2(i));
            let r = &self.g[i];
            for (ia, &(ja, va)) in r.iter().enumerate() {
                let f = d * va;
                for &(jb, vb) in &r[..=ia] {
                    // rows are compacted and sorted, so jb <= ja
                    hm[ja * n + jb] += f * vb;
                }
            }
        }
        for (bi, (blk, &(_, k))) in self.blocks.iter().zip(&self.layout.socs).enumerate() {
            let nc = blk.cols.len();
            let (eta, w0, w1) = match nt {
                Some(s) => s.soc_parts(bi),
                None => (T::one(), T::one(), &[][..]),
            };
            let zero_w1;
            let w1: &[T] = if w1.is_empty() {
                zero_w1 = vec![T::zero(); k - 1];
                &zero_w1
            } else {
                w1
            };
            let inv_eta2 = (eta * eta).recip();
            let g0 = &blk.g[..nc];
            // q = G₁ᵀ w₁
            let mut q = vec![T::zero(); nc];
            for r in 1..k {
                axpy(w1[r - 1], &blk.g[r * nc..(r + 1) * nc], &mut q);
            }
            let opw = T::one() + w0;
            let u: Vec<T> = (0..nc).map(|j| -g0[j] + q[j] / opw).collect();
            let v0: Vec<T> = (0..nc).map(|j| w0 * g0[j] - q[j]).collect();
            let mut local = vec![T::zero(); nc * nc];
            match &blk.gram1 {
                Some(gm) => {
                    let nw1 = dot(w1, w1);
                    for a in 0..nc {
                        let row = &mut local[a * nc..a * nc + a + 1];
                        let (va, qa, ua) = (v0[a], q[a], u[a]);
                        for bb in 0..=a {
                            row[bb] = gm[a * nc + bb]
                                + va * v0[bb]
                                + qa * u[bb]
                                + ua * q[bb]
                                + nw1 * ua * u[bb];
                        }
                    }
                }
                None => {
                    // rows of W̄⁻¹ G: v0, then G₁ + w₁ uᵀ
                    let mut m = Vec::with_capacity(k * nc);
                    m.extend_from_slice(&v0);
                    for r in 1..k {
                        let gr = &blk.g[r * nc..(r + 1) * nc];
                        let wr = w1[r - 1];
                        m.extend((0..nc).map(|j| gr[j] + wr * u[j]));
                    }
                    for r in 0..k {
                        let mr = &m[r * nc..(r + 1) * nc];
                        for a in 0..nc {
                            let f = mr[a];
                            if f != T::zero() {
                                axpy(f, &mr[..=a], &mut local[a * nc..a * nc + a + 1]);
                            }
                        }
                    }
                }
            }
            for a in 0..nc {
                let ca = blk.cols[a];
                for bb in 0..=a {
                    hm[ca * n + blk.cols[bb]] += inv_eta2 * local[a * nc + bb];
                }
            }
        }
        hm
    }

    fn factor(&self, nt: Option<&NtScaling<T>>) -> Option<Kkt<T>> {
        let n = self.n;
        let mut hm = self.normal_matrix(nt);
        // symmetric Jacobi scaling keeps the regularization relative to
        // each diagonal entry; diagonals span many decades near the optimum
        let maxdiag = (0..n).fold(T::zero(), |m, i| m.max(hm[i * n + i]));
        let floor = T::epsilon() * maxdiag.max(T::min_positive_value());
        let dscale: Vec<T> = (0..n).map(|i| hm[i * n + i].max(floor).sqrt().recip()).collect();
        for i in 0..n {
            for j in 0..n {
                hm[i * n + j] = hm[i * n + j] * dscale[i] * dscale[j];
            }
        }
        let mut reg = T::lit(1e-13);
        for _ in 0..8 {
            let mut hr = hm.clone();
            for i in 0..n {
                hr[i * n + i] += reg;
            }
            if let Some(chol) = Cholesky::factor(hr, n).map(|c| ScaledCholesky { chol: c, d: dscale.clone() }) {
                let schur = if self.a.is_empty() {
                    None
                } else {
                    let p = self.a.len();
                    let mut hinv_at = Vec::with_capacity(p);
                    for r in &self.a {
                        let mut col = vec![T::zero(); n];
                        for &(j, v) in r {
                            col[j] += v;
                        }
                        chol.solve_in_place(&mut col);
                        hinv_at.push(col);
                    }
                    let mut s = vec![T::zero(); p * p];
                    let mut smax = T::one();
                    for i in 0..p {
                        for j in 0..=i {
                            let v = self.a[i].iter().fold(T::zero(), |acc, &(k, a)| acc + a * hinv_at[j][k]);
                            s[i * p + j] = v;
                        }
                        smax = smax.max(s[i * p + i]);
                    }
                    let sreg = T::lit(1e-13) * smax;
                    for i in 0..p {
                        s[i * p + i] += sreg;
                    }
                    match Cholesky::factor(s, p) {
                        Some(sc) => Some((sc, hinv_at)),
                        None => {
                            reg *= T::lit(100.0);
                            continue;
                        }
                    }
                };
                return Some(Kkt { chol, schur });
            }
            reg *= T::lit(100.0);
        }
        None
    }

    fn w2(&self, nt: Option<&NtScaling<T>>, v: &[T], inverse: bool) -> Vec<T> {
        match nt {
            Some(s) => s.apply2(&self.layout, v, inverse),
            None => v.to_vec(),
        }
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −W²] [x; y; z] = [bx; by; bz]`.
    fn solve_kkt(
        &self,
        kkt: &Kkt<T>,
        nt: Option<&NtScaling<T>>,
        bx: &[T],
        by: &[T],
        bz: &[T],
        refine: usize,
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let (mut x, mut y, mut z) = self.solve_reduced(kkt, nt, bx, by, bz);
        let rhs_norm = norm(bx).max(norm(by)).max(norm(bz));
        let mut res_norm = T::infinity();
        for _ in 0..refine {
            let ex = {
                let mut t = mat_t_vec(&self.a, &y, self.n);
                add_into(&mut t, &mat_t_vec(&self.g, &z, self.n));
                sub(bx, &t)
            };
            let ey = sub(by, &mat_vec(&self.a, &x));
            let ez = {
                let mut t = mat_vec(&self.g, &x);
                let w2z = self.w2(nt, &z, false);
                t.iter_mut().zip(&w2z).for_each(|(a, b)| *a -= *b);
                sub(bz, &t)
            };
            let r = norm(&ex).max(norm(&ey)).max(norm(&ez));
            if !(r > T::epsilon() * rhs_norm) || r >= res_norm {
                break;
            }
            res_norm = r;
            let (dx, dy, dz) = self.solve_reduced(kkt, nt, &ex, &ey, &ez);
            add_into(&mut x, &dx);
            add_into(&mut y, &dy);
            add_into(&mut z, &dz);
        }
        (x, y, z)
    }

    fn solve_reduced(
        &self,
        kkt: &Kkt<T>,
        nt: Option<&NtScaling<T>>,
        bx: &[T],
        by: &[T],
        bz: &[T],
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let t = self.w2(nt, bz, true);
        let mut r1 = mat_t_vec(&self.g, &t, self.n);
        add_into(&mut r1, bx);
        let mut u = r1;
        kkt.chol.solve_in_place(&mut u);
        let (x, y) = match &kkt.schur {
            None => (u, Vec::new()),
            Some((sc, hinv_at)) => {
                let mut y = sub(&mat_vec(&self.a, &u), by);
                sc.solve_in_place(&mut y);
                let mut x = u;
                for (yi, col) in y.iter().zip(hinv_at) {
                    axpy(-*yi, col, &mut x);
                }
                (x, y)
            }
        };
        let gx = mat_vec(&self.g, &x);
        let z = self.w2(nt, &sub(&gx, bz), true);
        (x, y, z)
    }

    /// Shifts `v` into the interior: adds `(1 - min_eig) e` when needed.
    fn shift_interior(&self, v: &mut [T]) {
        let me = self.layout.min_eig(v);
        let tiny = T::lit(1e-8) * norm(v).max(T::one());
        if me <= tiny {
            let a = T::one() - me;
            v[..self.layout.orth].iter_mut().for_each(|x| *x += a);
            for &(st, _) in &self.layout.socs {
                v[st] += a;
            }
        }
    }
}

/// Cholesky factor of `D H D`, solving `H x = b`.
struct ScaledCholesky<T> {
    chol: Cholesky<T>,
    d: Vec<T>,
}

impl<T: Scalar> ScaledCholesky<T> {
    fn solve_in_place(&self, b: &mut [T]) {
        b.iter_mut().zip(&self.d).for_each(|(v, d)| *v *= *d);
        self.chol.solve_in_place(b);
        b.iter_mut().zip(&self.d).for_each(|(v, d)| *v *= *d);
    }
}

struct Kkt<T> {
    chol: ScaledCholesky<T>,
    schur: Option<(Cholesky<T>, Vec<Vec<T>>)>,
}

struct Iterate<T> {
    x: Vec<T>,
    y: Vec<T>,
    z: Vec<T>,
    s: Vec<T>,
    tau: T,
    kappa: T,
}

struct Metrics<T> {
    pres: T,
    dres: T,
    gap: T,
    pinf: Option<T>,
    dinf: Option<T>,
}

fn metrics<T: Scalar>(p: &Internal<T>, it: &Iterate<T>, bh_norm: T, c_norm: T) -> Metrics<T> {
    let (x, y, z, s, tau) = (&it.x, &it.y, &it.z, &it.s, it.tau);
    let aty_gtz = {
        let mut t = mat_t_vec(&p.a, y, p.n);
        add_into(&mut t, &mat_t_vec(&p.g, z, p.n));
        t
    };
    let rx: Vec<T> = aty_gtz.iter().zip(&p.c).map(|(a, c)| *a + *c * tau).collect();
    let ax = mat_vec(&p.a, x);
    let gx = mat_vec(&p.g, x);
    let ry: Vec<T> = ax.iter().zip(&p.b).map(|(a, b)| *a - *b * tau).collect();
    let rz: Vec<T> = (0..gx.len()).map(|i| gx[i] + s[i] - p.h[i] * tau).collect();
    let pres = norm(&ry).max(norm(&rz)) / tau / bh_norm.max(T::one());
    let dres = norm(&rx) / tau / c_norm.max(T::one());
    let cx = dot(&p.c, x);
    let by_hz = dot(&p.b, y) + dot(&p.h, z);
    let pcost = cx / tau;
    let dcost = -by_hz / tau;
    let denom = T::one().max(pcost.abs().min(dcost.abs()));
    let gap = (dot(s, z) / (tau * tau)).max((pcost - dcost).abs()) / denom;
    let pinf = (by_hz < T::zero()).then(|| norm(&aty_gtz) / -by_hz);
    let dinf = (cx < T::zero()).then(|| {
        let r2: Vec<T> = (0..gx.len()).map(|i| gx[i] + s[i]).collect();
        norm(&ax).max(norm(&r2)) / -cx
    });
    Metrics {
        pres,
        dres,
        gap,
        pinf,
        dinf,
    }
}

/// Solves `prog`; structural defects are returned as an error, all other
/// outcomes are encoded in [`SolveReport::status`].
pub fn solve<T: Scalar>(prog: &ConeProgram<T>, settings: &SolverSettings<T>) -> Result<SolveReport<T>> {
    let defects = prog.validate();
    if !defects.is_empty() {
        return Err(Error::MalformedProgram(defects));
    }
    let p = Internal::build(prog);
    let tol = settings.tol;
    let layout = &p.layout;
    let bh_norm = norm(&p.b).max(norm(&p.h));
    let c_norm = norm(&p.c);

    let fail = |p: &Internal<T>, it: &Iterate<T>, status, iterations| finish(prog, p, it, status, iterations);

    // initial point from the identity-scaled system
    let Some(kkt0) = p.factor(None) else {
        let it = Iterate {
            x: vec![T::zero(); p.n],
            y: vec![T::zero(); p.b.len()],
            z: layout.identity(),
            s: layout.identity(),
            tau: T::one(),
            kappa: T::one(),
        };
        return Ok(fail(&p, &it, SolveStatus::NumericalFailure, 0));
    };
    let zeros_n = vec![T::zero(); p.n];
    let zeros_p = vec![T::zero(); p.b.len()];
    let zeros_m = vec![T::zero(); layout.dim];
    let (x, _, zp) = p.solve_kkt(&kkt0, None, &zeros_n, &p.b, &p.h, settings.refine_steps);
    let mut s: Vec<T> = zp.iter().map(|v| -*v).collect();
    p.shift_interior(&mut s);
    let neg_c: Vec<T> = p.c.iter().map(|v| -*v).collect();
    let (_, y, mut z) = p.solve_kkt(&kkt0, None, &neg_c, &zeros_p, &zeros_m, settings.refine_steps);
    p.shift_interior(&mut z);
    let mut it = Iterate {
        x,
        y,
        z,
        s,
        tau: T::one(),
        kappa: T::one(),
    };

    let degree = T::from_usize(layout.degree()).unwrap();
    let e = layout.identity::<T>();
    let mut stalls = 0;
    for iter in 0..=settings.max_iters {
        let m = metrics(&p, &it, bh_norm, c_norm);
        if !(m.pres.is_finite() && m.dres.is_finite() && m.gap.is_finite()) {
            return Ok(fail(&p, &it, SolveStatus::NumericalFailure, iter));
        }
        // The embedding residual `Gx + s - h tau` can stall just above tol
        // on degenerate programs while `x / tau` is already feasible; with
        // small dual residual and gap that point is optimal by weak
        // duality, so feasibility is judged on the returned primal.
        if m.dres <= tol && m.gap <= tol {
            let report = finish(prog, &p, &it, SolveStatus::Optimal, iter);
            if report.primal_residual <= tol {
                return Ok(report);
            }
        }
        if it.tau < it.kappa {
            if m.pinf.is_some_and(|v| v <= tol) {
                return Ok(fail(&p, &it, SolveStatus::Infeasible, iter));
            }
            if m.dinf.is_some_and(|v| v <= tol) {
                return Ok(fail(&p, &it, SolveStatus::Unbounded, iter));
            }
        }
        if iter == settings.max_iters {
            break;
        }

        let Some(nt) = NtScaling::new(layout, &it.s, &it.z) else {
            return Ok(fail(&p, &it, SolveStatus::NumericalFailure, iter));
        };
        let Some(kkt) = p.factor(Some(&nt)) else {
            return Ok(fail(&p, &it, SolveStatus::NumericalFailure, iter));
        };
        let (tau, kappa) = (it.tau, it.kappa);
        let mu = (dot(&it.s, &it.z) + tau * kappa) / (degree + T::one());

        // residuals
        let rx: Vec<T> = {
            let mut t = mat_t_vec(&p.a, &it.y, p.n);
            add_into(&mut t, &mat_t_vec(&p.g, &it.z, p.n));
            t.iter().zip(&p.c).map(|(a, c)| *a + *c * tau).collect()
        };
        let ry: Vec<T> = mat_vec(&p.a, &it.x).iter().zip(&p.b).map(|(a, b)| *a - *b * tau).collect();
        let rz: Vec<T> = {
            let gx = mat_vec(&p.g, &it.x);
            (0..gx.len()).map(|i| gx[i] + it.s[i] - p.h[i] * tau).collect()
        };
        let rt = -dot(&p.c, &it.x) - dot(&p.b, &it.y) - dot(&p.h, &it.z) - kappa;

        let (x1, y1, z1) = p.solve_kkt(&kkt, Some(&nt), &neg_c, &p.b, &p.h, settings.refine_steps);
        let denom_tau = kappa / tau - dot(&p.c, &x1) - dot(&p.b, &y1) - dot(&p.h, &z1);
        let lambda = &nt.lambda;

        let direction = |beta: T, ds_target: &[T], dk_target: T| {
            let q = nt.apply(layout, &layout.jdiv(lambda, ds_target), false);
            let bx = scale(&rx, -beta);
            let by = scale(&ry, -beta);
            let bz: Vec<T> = (0..rz.len()).map(|i| -beta * rz[i] - q[i]).collect();
            let (x2, y2, z2) = p.solve_kkt(&kkt, Some(&nt), &bx, &by, &bz, settings.refine_steps);
            let dtau = (-beta * rt + dk_target / tau + dot(&p.c, &x2) + dot(&p.b, &y2) + dot(&p.h, &z2))
                / denom_tau;
            let dx: Vec<T> = x2.iter().zip(&x1).map(|(a, b)| *a + dtau * *b).collect();
            let dy: Vec<T> = y2.iter().zip(&y1).map(|(a, b)| *a + dtau * *b).collect();
            let dz: Vec<T> = z2.iter().zip(&z1).map(|(a, b)| *a + dtau * *b).collect();
            let w2dz = nt.apply2(layout, &dz, false);
            let ds: Vec<T> = q.iter().zip(&w2dz).map(|(a, b)| *a - *b).collect();
            let dkappa = (dk_target - kappa * dtau) / tau;
            (dx, dy, dz, ds, dtau, dkappa)
        };
        let step_to_boundary = |ds: &[T], dz: &[T], dtau: T, dkappa: T| {
            let mut a = layout.max_step(&it.s, ds).min(layout.max_step(&it.z, dz));
            if dtau < T::zero() {
                a = a.min(-tau / dtau);
            }
            if dkappa < T::zero() {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // predictor
        let lam_sq = layout.jprod(lambda, lambda);
        let aff_ds: Vec<T> = lam_sq.iter().map(|v| -*v).collect();
        let (_, _, dz_a, ds_a, dtau_a, dkappa_a) = direction(T::one(), &aff_ds, -tau * kappa);
        let alpha_a = step_to_boundary(&ds_a, &dz_a, dtau_a, dkappa_a).min(T::one());
        let sigma = {
            let v = T::one() - alpha_a;
            (v * v * v).max(T::zero()).min(T::one())
        };

        // corrector
        let winv_ds = nt.apply(layout, &ds_a, true);
        let w_dz = nt.apply(layout, &dz_a, false);
        let cross = layout.jprod(&winv_ds, &w_dz);
        let comb_ds: Vec<T> = (0..layout.dim)
            .map(|i| -lam_sq[i] - cross[i] + sigma * mu * e[i])
            .collect();
        let comb_dk = -tau * kappa - dtau_a * dkappa_a + sigma * mu;
        let (dx, dy, dz, ds, dtau, dkappa) = direction(T::one() - sigma, &comb_ds, comb_dk);
        let mut alpha = (step_to_boundary(&ds, &dz, dtau, dkappa) * T::lit(0.99)).min(T::one());
        if !alpha.is_finite() && alpha > T::zero() {
            alpha = T::one();
        }
        if !(alpha > T::zero()) {
            return Ok(fail(&p, &it, SolveStatus::NumericalFailure, iter));
        }

        // back off until strictly interior
        let mut accepted = None;
        for _ in 0..30 {
            let ns: Vec<T> = it.s.iter().zip(&ds).map(|(a, b)| *a + alpha * *b).collect();
            let nz: Vec<T> = it.z.iter().zip(&dz).map(|(a, b)| *a + alpha * *b).collect();
            let nt_ = tau + alpha * dtau;
            let nk = kappa + alpha * dkappa;
            if layout.min_eig(&ns) > T::zero() && layout.min_eig(&nz) > T::zero() && nt_ > T::zero() && nk > T::zero() {
                accepted = Some((ns, nz, nt_, nk));
                break;
            }
            alpha *= T::half();
        }
        let Some((ns, nz, nt_, nk)) = accepted else {
            return Ok(fail(&p, &it, SolveStatus::NumericalFailure, iter));
        };
        it.x.iter_mut().zip(&dx).for_each(|(a, b)| *a += alpha * *b);
        it.y.iter_mut().zip(&dy).for_each(|(a, b)| *a += alpha * *b);
        it.s = ns;
        it.z = nz;
        it.tau = nt_;
        it.kappa = nk;

        if alpha < T::lit(1e-8) {
            stalls += 1;
            if stalls >= 5 {
                return Ok(fail(&p, &it, SolveStatus::NumericalFailure, iter + 1));
            }
        } else {
            stalls = 0;
        }
    }
    Ok(finish(prog, &p, &it, SolveStatus::MaxIters, settings.max_iters))
}

fn finish<T: Scalar>(
    prog: &ConeProgram<T>,
    p: &Internal<T>,
    it: &Iterate<T>,
    status: SolveStatus,
    iterations: usize,
) -> SolveReport<T> {
    let certificate = matches!(status, SolveStatus::Infeasible | SolveStatus::Unbounded);
    let inv_tau = if certificate { T::one() } else { it.tau.recip() };
    let primal: Vec<T> = it.x.iter().map(|v| *v * inv_tau).collect();
    let y: Vec<T> = it.y.iter().map(|v| *v * inv_tau * p.cscale).collect();
    let z: Vec<T> = it.z.iter().map(|v| *v * inv_tau * p.cscale).collect();
    let inv_sqrt2 = T::SQRT_2().recip();
    let cone_duals = p
        .cone_rows
        .iter()
        .map(|(cone, rows)| {
            let mut d: Vec<T> = rows.iter().map(|&r| z[r]).collect();
            if let Cone::RotatedSecondOrder(_) = cone {
                let (a, b) = (d[0], d[1]);
                d[0] = (a + b) * inv_sqrt2;
                d[1] = (a - b) * inv_sqrt2;
            }
            d
        })
        .collect();
    let objective_value = prog.objective_value(&primal);
    let primal_residual = prog.max_violation(&primal);
    // dual residual in the unscaled objective, relative
    let dual_residual = {
        let mut g = mat_t_vec(&p.a, &it.y, p.n);
        add_into(&mut g, &mat_t_vec(&p.g, &it.z, p.n));
        let r: Vec<T> = g.iter().zip(&p.c).map(|(a, c)| *a * inv_tau + *c).collect();
        norm(&r) / norm(&p.c).max(T::one())
    };
    let duality_gap = {
        let pcost = dot(&p.c, &primal);
        let dcost = -(dot(&p.b, &it.y) + dot(&p.h, &it.z)) * inv_tau;
        (pcost - dcost) / T::one().max(pcost.abs().min(dcost.abs()))
    };
    SolveReport {
        status,
        primal,
        objective_value,
        primal_residual,
        dual_residual,
        duality_gap,
        iterations,
        equality_duals: y,
        cone_duals,
    }
}
