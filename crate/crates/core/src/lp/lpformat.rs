use super::{LinearProgram, Relation};
use crate::num::Real;
use std::fmt::Write;

fn sanitize(name: &str, fallback: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]()".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        format!("{fallback}{s}")
    } else {
        s
    }
}

fn fmt_num<T: Real>(v: T) -> String {
    format!("{}", v.as_f64())
}

fn push_terms<T: Real>(out: &mut String, terms: impl Iterator<Item = (String, T)>) {
    let mut first = true;
    for (name, c) in terms {
        if c == T::zero() {
            continue;
        }
        let (sign, mag) = if c < T::zero() { ("-", -c) } else { ("+", c) };
        if first {
            if sign == "-" {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        let _ = write!(out, " {} {}", fmt_num(mag), name);
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

pub(super) fn render<T: Real>(lp: &LinearProgram<T>) -> String {
    let names: Vec<String> = lp
        .variables()
        .iter()
        .enumerate()
        .map(|(j, v)| sanitize(&v.name, &format!("x{j}_")))
        .collect();
    let mut out = String::from("\\ generated by aidc-grid\nMinimize\n obj:");
    push_terms(
        &mut out,
        lp.variables()
            .iter()
            .zip(&names)
            .map(|(v, n)| (n.clone(), v.cost)),
    );
    out.push_str("\nSubject To\n");
    for (i, r) in lp.constraints().iter().enumerate() {
        let _ = write!(out, " {}:", sanitize(&r.name, &format!("r{i}_")));
        push_terms(
            &mut out,
            r.terms.iter().map(|(v, c)| (names[v.index()].clone(), *c)),
        );
        let rel = match r.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {}", fmt_num(r.rhs));
    }
    out.push_str("Bounds\n");
    for (v, n) in lp.variables().iter().zip(&names) {
        let lo = v.lower;
        let hi = v.upper;
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {n} free");
            }
            (true, true) if lo == hi => {
                let _ = writeln!(out, " {n} = {}", fmt_num(lo));
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {n} <= {}", fmt_num(lo), fmt_num(hi));
            }
            (true, false) => {
                let _ = writeln!(out, " {n} >= {}", fmt_num(lo));
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {n} <= {}", fmt_num(hi));
            }
        }
    }
    out.push_str("End\n");
    out
}
