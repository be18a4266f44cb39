//! Human-readable, line-oriented LP export for cross-checking programs
//! against external solvers.

use std::fmt::Write;

use super::{LinearProgram, Sense};

/// Serializes a program in a minimal LP-style text format:
///
/// ```text
/// min: 2 x + -1 y + 3.5
/// r0: 1 x + 1 y <= 4
/// bounds: 0 <= x <= 1
/// binary: y
/// ```
pub fn write_lp(lp: &LinearProgram) -> String {
    let mut out = String::new();
    let name = |i: usize| lp.variables[i].name.as_str();

    out.push_str("min:");
    let mut first = true;
    let mut obj: Vec<(usize, f64)> = lp.objective.clone();
    obj.sort_by_key(|&(c, _)| c);
    for (c, a) in merge_terms(obj) {
        let _ = write!(out, "{} {} {}", if first { "" } else { " +" }, fmt_num(a), name(c));
        first = false;
    }
    if lp.objective_constant != 0.0 || first {
        let _ = write!(
            out,
            "{} {}",
            if first { "" } else { " +" },
            fmt_num(lp.objective_constant)
        );
    }
    out.push('\n');

    for (i, row) in lp.rows.iter().enumerate() {
        let _ = write!(out, "r{i}:");
        let mut coeffs = row.coeffs.clone();
        coeffs.sort_by_key(|&(c, _)| c);
        let mut first = true;
        for (c, a) in merge_terms(coeffs) {
            let _ = write!(out, "{} {} {}", if first { "" } else { " +" }, fmt_num(a), name(c));
            first = false;
        }
        if first {
            out.push_str(" 0");
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {}", fmt_num(row.rhs));
    }

    for v in &lp.variables {
        if !v.is_binary {
            let _ = writeln!(out, "bounds: {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper));
        }
    }
    let binaries: Vec<&str> = lp
        .variables
        .iter()
        .filter(|v| v.is_binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        let _ = writeln!(out, "binary: {}", binaries.join(" "));
    }
    out
}

fn merge_terms(sorted: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(sorted.len());
    for (c, a) in sorted {
        match out.last_mut() {
            Some((lc, la)) if *lc == c => *la += a,
            _ => out.push((c, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
