//! Line-oriented text dump of a [`ConeProgram`] for offline inspection.
//!
//! ```text
//! cone_program 1
//! variables 2
//! name 0 t
//! name 1 x
//! objective_offset 0
//! objective 0 -1
//! equality <constant> [<index> <coef>]...
//! cone second_order 3
//! row <constant> [<index> <coef>]...
//! end
//! ```
//!
//! Numbers are written as the shortest decimal that parses back to the same
//! `f64`, so a write/read round trip is exact for `f32` and `f64`. Every
//! `cone` line is followed by exactly as many `row` lines as its size.

use std::fmt::Write as _;

use thiserror::Error;

use super::{AffineExpr, Cone, ConeConstraint, ConeProgram};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn num<T: Scalar>(v: T) -> String {
    format!("{:?}", v.as_f64())
}

fn write_expr<T: Scalar>(out: &mut String, head: &str, e: &AffineExpr<T>) {
    out.push_str(head);
    out.push(' ');
    out.push_str(&num(e.constant));
    for &(i, c) in &e.terms {
        let _ = write!(out, " {i} {}", num(c));
    }
    out.push('\n');
}

pub fn write_text<T: Scalar>(p: &ConeProgram<T>) -> String {
    let mut out = String::new();
    out.push_str("cone_program 1\n");
    let _ = writeln!(out, "variables {}", p.num_vars());
    for (i, name) in p.variable_names.iter().enumerate() {
        let _ = writeln!(out, "name {i} {name}");
    }
    let _ = writeln!(out, "objective_offset {}", num(p.objective_offset));
    for (i, c) in p.objective.iter().enumerate() {
        if *c != T::zero() {
            let _ = writeln!(out, "objective {i} {}", num(*c));
        }
    }
    for e in &p.equalities {
        write_expr(&mut out, "equality", e);
    }
    for c in &p.cones {
        let _ = writeln!(out, "cone {} {}", c.cone.keyword(), c.cone.size());
        for r in &c.rows {
            write_expr(&mut out, "row", r);
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            return Some((i + 1, l.split_whitespace().collect()));
        }
        None
    }
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

fn parse_f<T: Scalar>(line: usize, s: &str) -> Result<T, ParseError> {
    s.parse::<f64>()
        .map(T::lit)
        .map_err(|_| err(line, format!("expected a number, found `{s}`")))
}

fn parse_u(line: usize, s: &str) -> Result<usize, ParseError> {
    s.parse::<usize>()
        .map_err(|_| err(line, format!("expected a non-negative integer, found `{s}`")))
}

fn parse_expr<T: Scalar>(line: usize, fields: &[&str]) -> Result<AffineExpr<T>, ParseError> {
    if fields.is_empty() || fields.len().is_multiple_of(2) {
        return Err(err(line, "expected a constant followed by index/coefficient pairs"));
    }
    let mut e = AffineExpr::constant(parse_f(line, fields[0])?);
    for pair in fields[1..].chunks(2) {
        e.terms.push((parse_u(line, pair[0])?, parse_f(line, pair[1])?));
    }
    Ok(e)
}

pub fn read_text<T: Scalar>(text: &str) -> Result<ConeProgram<T>, ParseError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (ln, f) = lines.next().ok_or_else(|| err(0, "empty input"))?;
    if f != ["cone_program", "1"] {
        return Err(err(ln, "expected header `cone_program 1`"));
    }
    let (ln, f) = lines.next().ok_or_else(|| err(ln, "missing `variables` line"))?;
    if f.len() != 2 || f[0] != "variables" {
        return Err(err(ln, "expected `variables <count>`"));
    }
    let n = parse_u(ln, f[1])?;
    let mut p = ConeProgram::<T>::new();
    p.objective = vec![T::zero(); n];
    p.variable_names = (0..n).map(|i| format!("x{i}")).collect();
    let mut pending: Option<(usize, ConeConstraint<T>)> = None;
    let mut last = ln;
    loop {
        let Some((ln, f)) = lines.next() else {
            return Err(err(last, "missing `end`"));
        };
        last = ln;
        if let Some((_, c)) = &mut pending {
            if f[0] != "row" {
                return Err(err(ln, format!("expected {} more `row` lines", c.cone.size() - c.rows.len())));
            }
            c.rows.push(parse_expr(ln, &f[1..])?);
            if c.rows.len() == c.cone.size() {
                p.cones.push(pending.take().unwrap().1);
            }
            continue;
        }
        match f[0] {
            "name" if f.len() >= 3 => {
                let i = parse_u(ln, f[1])?;
                if i >= n {
                    return Err(err(ln, format!("variable index {i} out of range")));
                }
                p.variable_names[i] = f[2..].join(" ");
            }
            "objective_offset" if f.len() == 2 => p.objective_offset = parse_f(ln, f[1])?,
            "objective" if f.len() == 3 => {
                let i = parse_u(ln, f[1])?;
                if i >= n {
                    return Err(err(ln, format!("variable index {i} out of range")));
                }
                p.objective[i] = parse_f(ln, f[2])?;
            }
            "equality" => p.equalities.push(parse_expr(ln, &f[1..])?),
            "cone" if f.len() == 3 => {
                let k = parse_u(ln, f[2])?;
                let cone = match f[1] {
                    "nonnegative" => Cone::Nonnegative(k),
                    "second_order" => Cone::SecondOrder(k),
                    "rotated_second_order" => Cone::RotatedSecondOrder(k),
                    other => return Err(err(ln, format!("unknown cone `{other}`"))),
                };
                let c = ConeConstraint {
                    cone,
                    rows: Vec::with_capacity(k),
                };
                if k == 0 {
                    p.cones.push(c);
                } else {
                    pending = Some((ln, c));
                }
            }
            "end" if f.len() == 1 => break,
            other => return Err(err(ln, format!("unexpected `{other}`"))),
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConeProgram<f64> {
        let mut p = ConeProgram::new();
        let t = p.add_var("t");
        let x = p.add_var("x y");
        p.objective_offset = 0.1;
        p.add_objective(t, -1.0 / 3.0);
        p.add_equality(AffineExpr::var(x).plus(-2.0));
        p.add_soc(AffineExpr::var(t), vec![AffineExpr::var(x).scaled(1e-300), AffineExpr::constant(4.0)]);
        p.add_rotated(
            AffineExpr::var(t),
            AffineExpr::constant(0.5),
            vec![AffineExpr::var(x)],
        );
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        let text = write_text(&p);
        let q: ConeProgram<f64> = read_text(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(write_text(&q), text);
    }

    #[test]
    fn f32_round_trip() {
        let mut p = ConeProgram::<f32>::new();
        let t = p.add_var("t");
        p.add_objective(t, 0.1);
        p.add_nonneg(AffineExpr::var(t).scaled(1.0 / 3.0));
        let q: ConeProgram<f32> = read_text(&write_text(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "cone_program 1\nvariables 1\ncone second_order 2\nrow 0 0 1\nobjective 0 1\nend\n";
        let e = read_text::<f64>(bad).unwrap_err();
        assert_eq!(e.line, 5);
        let bad = "cone_program 1\nvariables 1\nobjective 0 abc\nend\n";
        assert_eq!(read_text::<f64>(bad).unwrap_err().line, 3);
        let bad = "cone_program 1\nvariables 1\n";
        assert!(read_text::<f64>(bad).is_err());
    }
}
