//! Random cone programs with independently known optima, shared by the
//! solver tests and the acceptance suite.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use riscf_core::conic::{AffineExpr, Cone, ConeProgram};

/// Random program with a planted optimum: a point `x*`, cone values
/// `e(x*)` on the boundary of active cones and complementary multipliers
/// `z`, with the objective chosen so that `obj + Σ z·∇e = 0`. Weak duality
/// then certifies `obj · x*` as the optimal value.
pub fn planted(rng: &mut ChaCha8Rng, n: usize) -> (ConeProgram<f64>, f64) {
    let mut p = ConeProgram::new();
    for i in 0..n {
        p.add_var(format!("x{i}"));
    }
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut obj = vec![0.0; n];
    let n_cones = rng.random_range(2..5);
    for ci in 0..n_cones {
        let kind = rng.random_range(0..3);
        let k = match kind {
            0 => 1,
            1 => rng.random_range(2..5),
            _ => rng.random_range(3..5),
        };
        let active = ci == 0 || rng.random_bool(0.6);
        // cone value s and multiplier z in standard coordinates
        let (s, z): (Vec<f64>, Vec<f64>) = if k == 1 {
            if active {
                (vec![0.0], vec![rng.random_range(0.2..2.0)])
            } else {
                (vec![rng.random_range(0.2..2.0)], vec![0.0])
            }
        } else {
            let v: Vec<f64> = (0..k - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if active {
                let mu = rng.random_range(0.2..2.0);
                let mut s = vec![nv];
                s.extend(&v);
                let mut z = vec![mu * nv];
                z.extend(v.iter().map(|a| -mu * a));
                (s, z)
            } else {
                let mut s = vec![nv + rng.random_range(0.2..1.5)];
                s.extend(&v);
                (s, vec![0.0; k])
            }
        };
        let rotate = |w: &[f64]| {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let mut o = w.to_vec();
            o[0] = (w[0] + w[1]) * r;
            o[1] = (w[0] - w[1]) * r;
            o
        };
        let (s, z, cone) = match kind {
            0 => (s, z, Cone::Nonnegative(1)),
            1 => (s, z, Cone::SecondOrder(k)),
            _ => (rotate(&s), rotate(&z), Cone::RotatedSecondOrder(k)),
        };
        let mut rows = Vec::with_capacity(k);
        for r in 0..k {
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let gx: f64 = g.iter().zip(&xs).map(|(a, b)| a * b).sum();
            let mut e = AffineExpr::constant(s[r] - gx);
            for (j, gj) in g.iter().enumerate() {
                e = e.term(j, *gj);
                obj[j] -= z[r] * gj;
            }
            rows.push(e);
        }
        p.add_cone(cone, rows);
    }
    for (j, c) in obj.iter().enumerate() {
        p.add_objective(j, *c);
    }
    let opt: f64 = obj.iter().zip(&xs).map(|(a, b)| a * b).sum();
    (p, opt)
}

/// Random bounded program in two or three variables: a box, a few
/// second-order cones and one rotated cone, all strictly feasible at 0.
pub fn random_small(rng: &mut ChaCha8Rng, n: usize) -> ConeProgram<f64> {
    let mut p = ConeProgram::new();
    for i in 0..n {
        p.add_var(format!("x{i}"));
    }
    for j in 0..n {
        p.add_objective(j, rng.random_range(-1.0..1.0));
        p.add_nonneg(AffineExpr::constant(3.0).term(j, -1.0));
        p.add_nonneg(AffineExpr::constant(3.0).term(j, 1.0));
    }
    let rand_affine = |rng: &mut ChaCha8Rng, c: f64| {
        let mut e = AffineExpr::constant(c);
        for j in 0..n {
            e = e.term(j, rng.random_range(-1.0..1.0));
        }
        e
    };
    for _ in 0..rng.random_range(1..3) {
        let k = rng.random_range(2..4);
        let xs: Vec<_> = (0..k).map(|_| {
            let c = rng.random_range(-0.5..0.5);
            rand_affine(rng, c)
        }).collect();
        let c0 = rng.random_range(1.5..3.0);
        let t = rand_affine(rng, c0).scaled(0.5);
        p.add_soc(t, xs);
    }
    let u = rand_affine(rng, 2.0).scaled(0.3);
    let v = rand_affine(rng, 2.0).scaled(0.3);
    p.add_rotated(u, v, vec![rand_affine(rng, 0.1)]);
    p
}

/// Best objective over a grid, zooming around the incumbent.
pub fn grid_oracle(p: &ConeProgram<f64>, n: usize) -> f64 {
    let feasible = |x: &[f64]| p.max_violation(x) <= 0.0;
    let mut center = vec![0.0; n];
    let mut half = 3.0;
    let pts: usize = if n == 2 { 401 } else { 61 };
    let mut best = f64::NEG_INFINITY;
    let mut x = vec![0.0; n];
    for _level in 0..14 {
        let h = 2.0 * half / (pts - 1) as f64;
        let total = pts.pow(n as u32);
        let mut incumbent = center.clone();
        for idx in 0..total {
            let mut rem = idx;
            for xi in x.iter_mut().zip(&center) {
                *xi.0 = xi.1 - half + h * (rem % pts) as f64;
                rem /= pts;
            }
            if feasible(&x) {
                let v = p.objective_value(&x);
                if v > best {
                    best = v;
                    incumbent.clone_from(&x);
                }
            }
        }
        center = incumbent;
        half *= 0.25;
    }
    best
}
