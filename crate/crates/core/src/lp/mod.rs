//! Linear programs, a built-in solver, and a text interchange format.
//!
//! `solve` presolves free variables away where it can, dualizes when the
//! problem has many more rows than columns, and runs a bounded revised
//! simplex. The returned point is checked against the original program.

mod format;
mod presolve;
mod simplex;

use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};

pub use format::{export, import, ExportFormat};

/// Absolute feasibility tolerance of returned solutions.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPTIMALITY_TOL: f64 = simplex::OPT_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Ge => ">=",
            Sense::Le => "<=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, v)| v * x[j]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// `minimize objective . x` subject to the constraints and variable bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub name: String,
    pub variables: Vec<Variable>,
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(name: &str) -> Self {
        LinearProgram { name: name.to_string(), ..Default::default() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.variables.push(Variable { name: name.into(), lower, upper });
        self.variables.len() - 1
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.constraints.push(Constraint { terms, sense, rhs });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, v)| v * x[j]).sum()
    }

    /// Largest constraint or bound violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn check(&self) -> Result<()> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(Error::Lp(format!("variable {} has invalid bounds", v.name)));
            }
        }
        let terms_ok = |t: &[(usize, f64)]| t.iter().all(|&(j, v)| j < n && v.is_finite());
        if !terms_ok(&self.objective) {
            return Err(Error::Lp("objective references an undeclared variable or a non-finite coefficient".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !terms_ok(&c.terms) || !c.rhs.is_finite() {
                return Err(Error::Lp(format!("constraint {i} is malformed")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub presolved_vars: usize,
    pub presolved_rows: usize,
    pub dualized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dualize {
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub deadline: Option<Instant>,
    pub presolve: bool,
    pub dualize: Dualize,
    pub max_iterations: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { deadline: None, presolve: true, dualize: Dualize::Auto, max_iterations: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Row {
    pub terms: Vec<(usize, f64)>,
    pub eq: bool,
    pub rhs: f64,
}

/// Rows normalized to `>=` or `=`, terms sorted and merged.
#[derive(Debug, Clone)]
pub(crate) struct RowForm {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub c: Vec<f64>,
    pub rows: Vec<Row>,
}

fn normalize_terms(terms: &[(usize, f64)], sign: f64) -> Vec<(usize, f64)> {
    let mut t: Vec<(usize, f64)> = terms.iter().map(|&(j, v)| (j, sign * v)).collect();
    t.sort_by_key(|x| x.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
    for (j, v) in t {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

impl RowForm {
    fn from_lp(lp: &LinearProgram) -> RowForm {
        let mut c = vec![0.0; lp.num_vars()];
        for &(j, v) in &lp.objective {
            c[j] += v;
        }
        let rows = lp
            .constraints
            .iter()
            .map(|k| {
                let sign = if k.sense == Sense::Le { -1.0 } else { 1.0 };
                Row { terms: normalize_terms(&k.terms, sign), eq: k.sense == Sense::Eq, rhs: sign * k.rhs }
            })
            .collect();
        RowForm {
            lower: lp.variables.iter().map(|v| v.lower).collect(),
            upper: lp.variables.iter().map(|v| v.upper).collect(),
            c,
            rows,
        }
    }

    fn nvars(&self) -> usize {
        self.c.len()
    }

    fn primal_standard(&self) -> simplex::StandardForm {
        let n = self.nvars();
        let m = self.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in &r.terms {
                cols[j].push((i, v));
            }
        }
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        let mut cost = self.c.clone();
        for (i, r) in self.rows.iter().enumerate() {
            if !r.eq {
                cols.push(vec![(i, -1.0)]);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                cost.push(0.0);
            }
        }
        simplex::StandardForm { m, cols, b: self.rows.iter().map(|r| r.rhs).collect(), c: cost, lower, upper }
    }

    /// Variable bounds become rows, leaving every variable free.
    fn bounds_as_rows(&self) -> RowForm {
        let mut f = self.clone();
        for j in 0..self.nvars() {
            if f.lower[j].is_finite() {
                f.rows.push(Row { terms: vec![(j, 1.0)], eq: false, rhs: f.lower[j] });
            }
            if f.upper[j].is_finite() {
                f.rows.push(Row { terms: vec![(j, -1.0)], eq: false, rhs: -f.upper[j] });
            }
            f.lower[j] = f64::NEG_INFINITY;
            f.upper[j] = f64::INFINITY;
        }
        f
    }

    /// `max b'y  s.t.  A'y = c,  y >= 0` on inequality rows, as a minimization.
    fn dual_standard(&self) -> simplex::StandardForm {
        let cols = self.rows.iter().map(|r| r.terms.clone()).collect();
        simplex::StandardForm {
            m: self.nvars(),
            cols,
            b: self.c.clone(),
            c: self.rows.iter().map(|r| -r.rhs).collect(),
            lower: self.rows.iter().map(|r| if r.eq { f64::NEG_INFINITY } else { 0.0 }).collect(),
            upper: vec![f64::INFINITY; self.rows.len()],
        }
    }
}

fn solve_rows(f: &RowForm, opts: &SolveOptions, stats: &mut SolveStats) -> Result<(LpStatus, Vec<f64>)> {
    let n = f.nvars();
    let m = f.rows.len();
    let dualize = match opts.dualize {
        Dualize::Always => true,
        Dualize::Never => false,
        Dualize::Auto => m > 2 * n && m > 40,
    };
    if dualize {
        let g = f.bounds_as_rows();
        let sf = g.dual_standard();
        let r = simplex::solve_standard(&sf, opts.deadline, opts.max_iterations)?;
        stats.iterations += r.iterations;
        match r.status {
            LpStatus::Optimal => {
                stats.dualized = true;
                return Ok((LpStatus::Optimal, r.duals.iter().map(|p| -p).collect()));
            }
            LpStatus::Unbounded => {
                stats.dualized = true;
                return Ok((LpStatus::Infeasible, vec![0.0; n]));
            }
            // primal is infeasible or unbounded; the primal run tells which
            LpStatus::Infeasible => {}
        }
    }
    let sf = f.primal_standard();
    let r = simplex::solve_standard(&sf, opts.deadline, opts.max_iterations)?;
    stats.iterations += r.iterations;
    Ok((r.status, r.x[..n].to_vec()))
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, &SolveOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpSolution> {
    lp.check()?;
    let n = lp.num_vars();
    let form = RowForm::from_lp(lp);
    let mut stats = SolveStats::default();
    let (status, values) = if opts.presolve {
        let pre = presolve::presolve(form);
        stats.presolved_vars = pre.form.nvars();
        stats.presolved_rows = pre.form.rows.len();
        if pre.infeasible {
            (LpStatus::Infeasible, vec![0.0; n])
        } else {
            let (status, reduced) = solve_rows(&pre.form, opts, &mut stats)?;
            (status, presolve::postsolve(&pre, &reduced, n))
        }
    } else {
        stats.presolved_vars = n;
        stats.presolved_rows = form.rows.len();
        solve_rows(&form, opts, &mut stats)?
    };
    if status == LpStatus::Optimal {
        let worst = lp
            .constraints
            .iter()
            .map(|c| c.violation(&values) / (1.0 + c.rhs.abs()))
            .fold(0.0, f64::max);
        if worst.is_nan() || worst > FEASIBILITY_TOL {
            return Err(Error::Lp(format!("numeric failure: returned point violates a constraint by {worst:e}")));
        }
    }
    let objective = lp.objective_value(&values);
    Ok(LpSolution { status, values, objective, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_free("x");
        lp.objective = vec![(x, 1.0)];
        lp.add_constraint(vec![(x, 1.0)], Sense::Ge, 3.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_free("x");
        lp.add_constraint(vec![(x, 1.0)], Sense::Ge, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Sense::Le, 0.0);
        for presolve in [true, false] {
            let s = solve_with(&lp, &SolveOptions { presolve, ..Default::default() }).unwrap();
            assert_eq!(s.status, LpStatus::Infeasible);
        }
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_free("x");
        let y = lp.add_free("y");
        lp.objective = vec![(x, -1.0)];
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Sense::Le, 2.0);
        for presolve in [true, false] {
            let s = solve_with(&lp, &SolveOptions { presolve, ..Default::default() }).unwrap();
            assert_eq!(s.status, LpStatus::Unbounded);
        }
    }

    #[test]
    fn dual_route_matches_primal() {
        // min x + y  s.t.  many cuts  x + k y >= k, x, y free
        let mut lp = LinearProgram::new("cuts");
        let x = lp.add_free("x");
        let y = lp.add_free("y");
        lp.objective = vec![(x, 1.0), (y, 1.0)];
        for k in 0..60 {
            let k = k as f64 / 10.0;
            lp.add_constraint(vec![(x, 1.0), (y, k)], Sense::Ge, k);
            lp.add_constraint(vec![(x, k), (y, 1.0)], Sense::Ge, k);
        }
        let a = solve_with(&lp, &SolveOptions { dualize: Dualize::Always, ..Default::default() }).unwrap();
        let b = solve_with(&lp, &SolveOptions { dualize: Dualize::Never, presolve: false, ..Default::default() }).unwrap();
        assert!(a.stats.dualized);
        assert!((a.objective - b.objective).abs() < 1e-9, "{} vs {}", a.objective, b.objective);
        assert!(lp.max_violation(&a.values) < 1e-9);
    }

    #[test]
    fn equality_substitution_and_elimination() {
        // u = 2 w + 1, e >= u, e >= 3 - w, 0 >= e - 10 ; min w
        let mut lp = LinearProgram::new("chain");
        let w = lp.add_free("w");
        let u = lp.add_free("u");
        let e = lp.add_free("e");
        lp.objective = vec![(w, 1.0)];
        lp.add_constraint(vec![(u, 1.0), (w, -2.0)], Sense::Eq, 1.0);
        lp.add_constraint(vec![(e, 1.0), (u, -1.0)], Sense::Ge, 0.0);
        lp.add_constraint(vec![(e, 1.0), (w, 1.0)], Sense::Ge, 3.0);
        lp.add_constraint(vec![(e, -1.0)], Sense::Ge, -10.0);
        let s = solve(&lp).unwrap();
        assert!((s.values[w] + 7.0).abs() < 1e-9);
        assert!(s.stats.presolved_vars <= 1);
        assert!(lp.max_violation(&s.values) < 1e-9);
    }

    #[test]
    fn bounded_variables() {
        let mut lp = LinearProgram::new("box");
        let x = lp.add_var("x", 0.0, 4.0);
        let y = lp.add_var("y", -1.0, 1.0);
        lp.objective = vec![(x, -1.0), (y, -1.0)];
        lp.add_constraint(vec![(x, 1.0), (y, 2.0)], Sense::Le, 5.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective + 4.5).abs() < 1e-9, "{:?}", s.values);
    }

    #[test]
    fn rejects_undeclared_variables() {
        let mut lp = LinearProgram::new("bad");
        lp.add_constraint(vec![(3, 1.0)], Sense::Ge, 0.0);
        assert!(solve(&lp).is_err());
    }
}
