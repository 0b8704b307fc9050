//! Second-order cone programs over real variables and an embedded
//! interior-point solver.
//!
//! A [`ConeProgram`] maximizes `objective · x + objective_offset` subject to
//! affine equalities `e(x) = 0` and cone memberships `(e_1(x), …, e_k(x)) ∈ K`
//! where `K` is one of
//!
//! * `Nonnegative(k)`: every entry `>= 0`;
//! * `SecondOrder(k)`: `e_1 >= ||(e_2, …, e_k)||`;
//! * `RotatedSecondOrder(k)`: `2 e_1 e_2 >= ||(e_3, …, e_k)||²`, `e_1, e_2 >= 0`.

mod cones;
mod linalg;
mod solver;
mod text;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::scalar::Scalar;

pub use solver::{solve, SolveReport, SolveStatus, SolverSettings};
pub use text::{read_text, write_text, ParseError};

/// `Σ coef · x[index] + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr<T> {
    pub terms: Vec<(usize, T)>,
    pub constant: T,
}

impl<T: Scalar> AffineExpr<T> {
    pub fn constant(c: T) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(index: usize) -> Self {
        Self {
            terms: vec![(index, T::one())],
            constant: T::zero(),
        }
    }

    pub fn term(mut self, index: usize, coef: T) -> Self {
        self.terms.push((index, coef));
        self
    }

    pub fn plus(mut self, c: T) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, f: T) -> Self {
        self.terms.iter_mut().for_each(|(_, c)| *c *= f);
        self.constant *= f;
        self
    }

    /// `self + other * f`.
    pub fn add_scaled(mut self, other: &Self, f: T) -> Self {
        self.terms.extend(other.terms.iter().map(|&(i, c)| (i, c * f)));
        self.constant += other.constant * f;
        self
    }

    /// Merges duplicate indices, drops exact zeros and sorts by index.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, T)> = Vec::with_capacity(self.terms.len());
        for (i, c) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|t| t.1 != T::zero());
        self.terms = out;
        self
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cone {
    Nonnegative(usize),
    SecondOrder(usize),
    RotatedSecondOrder(usize),
}

impl Cone {
    pub fn size(&self) -> usize {
        match *self {
            Cone::Nonnegative(k) | Cone::SecondOrder(k) | Cone::RotatedSecondOrder(k) => k,
        }
    }

    fn min_size(&self) -> usize {
        match self {
            Cone::Nonnegative(_) => 1,
            Cone::SecondOrder(_) => 2,
            Cone::RotatedSecondOrder(_) => 3,
        }
    }

    pub(crate) fn keyword(&self) -> &'static str {
        match self {
            Cone::Nonnegative(_) => "nonnegative",
            Cone::SecondOrder(_) => "second_order",
            Cone::RotatedSecondOrder(_) => "rotated_second_order",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeConstraint<T> {
    pub cone: Cone,
    pub rows: Vec<AffineExpr<T>>,
}

impl<T: Scalar> ConeConstraint<T> {
    /// Amount by which `x` lies outside the cone (0 when inside).
    pub fn violation(&self, x: &[T]) -> T {
        let v: Vec<T> = self.rows.iter().map(|r| r.eval(x)).collect();
        cone_violation(self.cone, &v)
    }
}

pub(crate) fn cone_violation<T: Scalar>(cone: Cone, v: &[T]) -> T {
    match cone {
        Cone::Nonnegative(_) => v.iter().fold(T::zero(), |acc, &e| acc.max(-e)),
        Cone::SecondOrder(_) => {
            let tail = v[1..].iter().map(|e| *e * *e).sum::<T>().sqrt();
            (tail - v[0]).max(T::zero())
        }
        Cone::RotatedSecondOrder(_) => {
            let s = T::SQRT_2().recip();
            let t = (v[0] + v[1]) * s;
            let d = (v[0] - v[1]) * s;
            let tail = (d * d + v[2..].iter().map(|e| *e * *e).sum::<T>()).sqrt();
            (tail - t).max(T::zero())
        }
    }
}

/// Structural problems found by [`ConeProgram::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Defect {
    #[error("{names} variable names for {vars} variables")]
    NameCount { names: usize, vars: usize },
    #[error("cone {cone} ({kind}) has size {size}, below the minimum {min}")]
    ConeTooSmall {
        cone: usize,
        kind: &'static str,
        size: usize,
        min: usize,
    },
    #[error("cone {cone} declares size {declared} but has {rows} rows")]
    RowCount { cone: usize, declared: usize, rows: usize },
    #[error("{location} references variable {index} (only {vars} exist)")]
    VariableOutOfRange {
        location: String,
        index: usize,
        vars: usize,
    },
    #[error("non-finite coefficient in {location}")]
    NonFinite { location: String },
    #[error("variable {index} ({name}) appears in no constraint and not in the objective")]
    UnusedVariable { index: usize, name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProgram<T> {
    /// Maximized linear objective, one coefficient per variable.
    pub objective: Vec<T>,
    pub objective_offset: T,
    /// Each expression is constrained to equal zero.
    pub equalities: Vec<AffineExpr<T>>,
    pub cones: Vec<ConeConstraint<T>>,
    pub variable_names: Vec<String>,
}

impl<T: Scalar> Default for ConeProgram<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ConeProgram<T> {
    pub fn new() -> Self {
        Self {
            objective: Vec::new(),
            objective_offset: T::zero(),
            equalities: Vec::new(),
            cones: Vec::new(),
            variable_names: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.objective.push(T::zero());
        self.variable_names.push(name.into());
        self.objective.len() - 1
    }

    /// Adds `count` variables named `prefix[i]` and returns the first index.
    pub fn add_vars(&mut self, prefix: &str, count: usize) -> usize {
        let first = self.num_vars();
        for i in 0..count {
            self.add_var(format!("{prefix}[{i}]"));
        }
        first
    }

    pub fn add_objective(&mut self, index: usize, coef: T) {
        self.objective[index] += coef;
    }

    pub fn add_equality(&mut self, expr: AffineExpr<T>) {
        self.equalities.push(expr.compact());
    }

    pub fn add_cone(&mut self, cone: Cone, rows: Vec<AffineExpr<T>>) {
        self.cones.push(ConeConstraint {
            cone,
            rows: rows.into_iter().map(AffineExpr::compact).collect(),
        });
    }

    /// `expr >= 0`.
    pub fn add_nonneg(&mut self, expr: AffineExpr<T>) {
        self.add_cone(Cone::Nonnegative(1), vec![expr]);
    }

    /// `t >= ||xs||`.
    pub fn add_soc(&mut self, t: AffineExpr<T>, xs: Vec<AffineExpr<T>>) {
        let mut rows = Vec::with_capacity(xs.len() + 1);
        rows.push(t);
        rows.extend(xs);
        self.add_cone(Cone::SecondOrder(rows.len()), rows);
    }

    /// `2 u v >= ||xs||²`, `u, v >= 0`.
    pub fn add_rotated(&mut self, u: AffineExpr<T>, v: AffineExpr<T>, xs: Vec<AffineExpr<T>>) {
        let mut rows = Vec::with_capacity(xs.len() + 2);
        rows.push(u);
        rows.push(v);
        rows.extend(xs);
        self.add_cone(Cone::RotatedSecondOrder(rows.len()), rows);
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective
            .iter()
            .zip(x)
            .fold(self.objective_offset, |acc, (c, v)| acc + *c * *v)
    }

    /// Largest cone or equality violation at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let eq = self
            .equalities
            .iter()
            .fold(T::zero(), |acc, e| acc.max(e.eval(x).abs()));
        self.cones.iter().fold(eq, |acc, c| acc.max(c.violation(x)))
    }

    /// Returns every structural defect; empty means well formed.
    pub fn validate(&self) -> Vec<Defect> {
        let n = self.num_vars();
        let mut defects = Vec::new();
        if self.variable_names.len() != n {
            defects.push(Defect::NameCount {
                names: self.variable_names.len(),
                vars: n,
            });
        }
        if !self.objective.iter().all(|c| c.is_finite()) || !self.objective_offset.is_finite() {
            defects.push(Defect::NonFinite {
                location: "objective".into(),
            });
        }
        let mut used = BTreeSet::new();
        for (i, c) in self.objective.iter().enumerate() {
            if *c != T::zero() {
                used.insert(i);
            }
        }
        let mut check_expr = |expr: &AffineExpr<T>, location: String, defects: &mut Vec<Defect>| {
            if !expr.constant.is_finite() || expr.terms.iter().any(|t| !t.1.is_finite()) {
                defects.push(Defect::NonFinite {
                    location: location.clone(),
                });
            }
            for &(idx, _) in &expr.terms {
                if idx >= n {
                    defects.push(Defect::VariableOutOfRange {
                        location: location.clone(),
                        index: idx,
                        vars: n,
                    });
                } else {
                    used.insert(idx);
                }
            }
        };
        for (e, expr) in self.equalities.iter().enumerate() {
            check_expr(expr, format!("equality {e}"), &mut defects);
        }
        for (ci, c) in self.cones.iter().enumerate() {
            if c.cone.size() < c.cone.min_size() {
                defects.push(Defect::ConeTooSmall {
                    cone: ci,
                    kind: c.cone.keyword(),
                    size: c.cone.size(),
                    min: c.cone.min_size(),
                });
            }
            if c.rows.len() != c.cone.size() {
                defects.push(Defect::RowCount {
                    cone: ci,
                    declared: c.cone.size(),
                    rows: c.rows.len(),
                });
            }
            for (ri, row) in c.rows.iter().enumerate() {
                check_expr(row, format!("cone {ci} row {ri}"), &mut defects);
            }
        }
        for i in 0..n {
            if !used.contains(&i) {
                defects.push(Defect::UnusedVariable {
                    index: i,
                    name: self.variable_names.get(i).cloned().unwrap_or_default(),
                });
            }
        }
        defects
    }
}
