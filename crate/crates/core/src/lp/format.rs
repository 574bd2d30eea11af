//! Sectioned plain-text interchange and a human-readable rendering.
//!
//! ```text
//! LP <name>
//! VARIABLES <count>
//! <name> <lower> <upper>
//! OBJECTIVE <count>
//! <variable> <coefficient>
//! CONSTRAINTS <count>
//! <sense> <rhs> <count> <variable> <coefficient> ...
//! END
//! ```
//!
//! Numbers use the shortest representation that parses back to the same
//! `f64`, so export followed by import is lossless.

use std::collections::HashMap;
use std::fmt::Write;

use super::{Constraint, LinearProgram, Sense, Variable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Sectioned,
    Human,
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

pub fn export(lp: &LinearProgram, format: ExportFormat) -> String {
    match format {
        ExportFormat::Sectioned => sectioned(lp),
        ExportFormat::Human => human(lp),
    }
}

fn sectioned(lp: &LinearProgram) -> String {
    let mut s = String::new();
    let name = if lp.name.is_empty() { "-" } else { lp.name.as_str() };
    writeln!(s, "LP {name}").unwrap();
    writeln!(s, "VARIABLES {}", lp.variables.len()).unwrap();
    for v in &lp.variables {
        writeln!(s, "{} {} {}", v.name, num(v.lower), num(v.upper)).unwrap();
    }
    writeln!(s, "OBJECTIVE {}", lp.objective.len()).unwrap();
    for &(j, c) in &lp.objective {
        writeln!(s, "{} {}", lp.variables[j].name, num(c)).unwrap();
    }
    writeln!(s, "CONSTRAINTS {}", lp.constraints.len()).unwrap();
    for c in &lp.constraints {
        write!(s, "{} {} {}", c.sense.symbol(), num(c.rhs), c.terms.len()).unwrap();
        for &(j, v) in &c.terms {
            write!(s, " {} {}", lp.variables[j].name, num(v)).unwrap();
        }
        s.push('\n');
    }
    s.push_str("END\n");
    s
}

fn human(lp: &LinearProgram) -> String {
    let mut s = String::new();
    let expr = |terms: &[(usize, f64)]| -> String {
        if terms.is_empty() {
            return "0".into();
        }
        terms
            .iter()
            .map(|&(j, v)| format!("{} {} {}", if v < 0.0 { '-' } else { '+' }, v.abs(), lp.variables[j].name))
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(s, "minimize\n  {}", expr(&lp.objective)).unwrap();
    writeln!(s, "subject to").unwrap();
    for (i, c) in lp.constraints.iter().enumerate() {
        writeln!(s, "  c{i}: {} {} {}", expr(&c.terms), c.sense.symbol(), c.rhs).unwrap();
    }
    writeln!(s, "bounds").unwrap();
    for v in &lp.variables {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => writeln!(s, "  {} free", v.name),
            (true, false) => writeln!(s, "  {} >= {}", v.name, v.lower),
            (false, true) => writeln!(s, "  {} <= {}", v.name, v.upper),
            (true, true) => writeln!(s, "  {} <= {} <= {}", v.lower, v.name, v.upper),
        }
        .unwrap();
    }
    s
}

fn bad(line: usize, msg: &str) -> Error {
    Error::Lp(format!("line {}: {msg}", line + 1))
}

pub fn import(text: &str) -> Result<LinearProgram> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
        while i < lines.len() && lines[i].trim().is_empty() {
            i += 1;
        }
        if i >= lines.len() {
            return Err(Error::Lp(format!("unexpected end of input, expected {what}")));
        }
        i += 1;
        Ok((i - 1, lines[i - 1].split_whitespace().collect()))
    };
    let parse = |line: usize, tok: &str| -> Result<f64> { tok.parse().map_err(|_| bad(line, "bad number")) };
    let count = |line: usize, toks: &[&str], key: &str| -> Result<usize> {
        if toks.len() != 2 || toks[0] != key {
            return Err(bad(line, &format!("expected {key} <count>")));
        }
        toks[1].parse().map_err(|_| bad(line, "bad count"))
    };

    let (l, toks) = next("header")?;
    if toks.first() != Some(&"LP") || toks.len() > 2 {
        return Err(bad(l, "expected LP <name>"));
    }
    let name = match toks.get(1) {
        Some(&"-") | None => String::new(),
        Some(n) => n.to_string(),
    };
    let mut lp = LinearProgram::new(&name);
    let (l, toks) = next("VARIABLES")?;
    let nv = count(l, &toks, "VARIABLES")?;
    let mut index = HashMap::new();
    for _ in 0..nv {
        let (l, toks) = next("variable")?;
        if toks.len() != 3 {
            return Err(bad(l, "expected <name> <lower> <upper>"));
        }
        if index.insert(toks[0].to_string(), lp.variables.len()).is_some() {
            return Err(bad(l, "duplicate variable"));
        }
        lp.variables.push(Variable { name: toks[0].into(), lower: parse(l, toks[1])?, upper: parse(l, toks[2])? });
    }
    let var = |l: usize, name: &str| -> Result<usize> { index.get(name).copied().ok_or_else(|| bad(l, "undeclared variable")) };
    let (l, toks) = next("OBJECTIVE")?;
    let no = count(l, &toks, "OBJECTIVE")?;
    for _ in 0..no {
        let (l, toks) = next("objective term")?;
        if toks.len() != 2 {
            return Err(bad(l, "expected <variable> <coefficient>"));
        }
        lp.objective.push((var(l, toks[0])?, parse(l, toks[1])?));
    }
    let (l, toks) = next("CONSTRAINTS")?;
    let nc = count(l, &toks, "CONSTRAINTS")?;
    for _ in 0..nc {
        let (l, toks) = next("constraint")?;
        if toks.len() < 3 {
            return Err(bad(l, "expected <sense> <rhs> <count> ..."));
        }
        let sense = match toks[0] {
            ">=" => Sense::Ge,
            "<=" => Sense::Le,
            "=" => Sense::Eq,
            _ => return Err(bad(l, "bad sense")),
        };
        let rhs = parse(l, toks[1])?;
        let k: usize = toks[2].parse().map_err(|_| bad(l, "bad count"))?;
        if toks.len() != 3 + 2 * k {
            return Err(bad(l, "term count mismatch"));
        }
        let mut terms = Vec::with_capacity(k);
        for t in 0..k {
            terms.push((var(l, toks[3 + 2 * t])?, parse(l, toks[4 + 2 * t])?));
        }
        lp.constraints.push(Constraint { terms, sense, rhs });
    }
    let (l, toks) = next("END")?;
    if toks != ["END"] {
        return Err(bad(l, "expected END"));
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LinearProgram {
        let mut lp = LinearProgram::new("sample");
        let x = lp.add_free("x");
        let y = lp.add_var("y", 0.0, 2.5);
        lp.objective = vec![(x, 0.1), (y, -1.0 / 3.0)];
        lp.add_constraint(vec![(x, 1.0), (y, 1e-17)], Sense::Ge, -0.3);
        lp.add_constraint(vec![(y, 2.0)], Sense::Eq, 1.0);
        lp.add_constraint(vec![], Sense::Le, 0.0);
        lp
    }

    #[test]
    fn round_trip_is_identity() {
        let lp = sample();
        let text = export(&lp, ExportFormat::Sectioned);
        assert_eq!(import(&text).unwrap(), lp);
    }

    #[test]
    fn empty_lp_is_header_only() {
        let text = export(&LinearProgram::default(), ExportFormat::Sectioned);
        assert_eq!(text, "LP -\nVARIABLES 0\nOBJECTIVE 0\nCONSTRAINTS 0\nEND\n");
        assert_eq!(import(&text).unwrap(), LinearProgram::default());
    }

    #[test]
    fn human_rendering_mentions_everything() {
        let h = export(&sample(), ExportFormat::Human);
        assert!(h.contains("minimize") && h.contains("x free") && h.contains("c1: + 2 y = 1"));
    }

    #[test]
    fn import_reports_errors() {
        assert!(import("LP a\nVARIABLES 1\nx 0\n").is_err());
        assert!(import("LP a\nVARIABLES 0\nOBJECTIVE 1\nz 1\nCONSTRAINTS 0\nEND\n").is_err());
    }
}
