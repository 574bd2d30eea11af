//! Removing `0 >= max_x sum_j f_j(x)` from an LP by variable elimination.
//!
//! Every function table entry becomes a `u` variable pinned by an equality,
//! every eliminated variable yields a new function `e` whose entries are
//! bounded below by the sums they maximize over, and a last row bounds the
//! remaining scalars by zero.

use std::collections::HashMap;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Sense};

/// `constant + sum_k coef_k * w_k`
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub constant: f64,
    /// Sorted by weight index, no zero coefficients.
    pub coeffs: Vec<(usize, f64)>,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine { constant: c, coeffs: Vec::new() }
    }

    pub fn weight(k: usize, coef: f64) -> Self {
        let coeffs = if coef == 0.0 { Vec::new() } else { vec![(k, coef)] };
        Affine { constant: 0.0, coeffs }
    }

    pub fn add(&mut self, other: &Affine) {
        self.constant += other.constant;
        for &(k, v) in &other.coeffs {
            match self.coeffs.binary_search_by_key(&k, |t| t.0) {
                Ok(i) => self.coeffs[i].1 += v,
                Err(i) => self.coeffs.insert(i, (k, v)),
            }
        }
        self.coeffs.retain(|t| t.1 != 0.0);
    }

    pub fn coef(&self, k: usize) -> f64 {
        self.coeffs.binary_search_by_key(&k, |t| t.0).map_or(0.0, |i| self.coeffs[i].1)
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(k, v)| v * w[k]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostVar {
    pub name: String,
    pub domain: usize,
}

/// Table over `scope`, mixed radix with the first scope variable most
/// significant.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerm {
    pub name: String,
    pub scope: Vec<usize>,
    pub table: Vec<Affine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxConstraintSpec {
    pub vars: Vec<CostVar>,
    pub functions: Vec<LocalTerm>,
    pub order: Vec<usize>,
    pub num_weights: usize,
}

impl MaxConstraintSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(m));
        let mut used = vec![false; self.vars.len()];
        for v in &self.vars {
            if v.domain == 0 {
                return bad(format!("variable {} has an empty domain", v.name));
            }
        }
        for f in &self.functions {
            let mut size = 1usize;
            for (i, &v) in f.scope.iter().enumerate() {
                if v >= self.vars.len() {
                    return bad(format!("function {} references undeclared variable {v}", f.name));
                }
                if f.scope[..i].contains(&v) {
                    return bad(format!("function {} repeats variable {}", f.name, self.vars[v].name));
                }
                used[v] = true;
                size = size.saturating_mul(self.vars[v].domain);
            }
            if f.table.len() != size {
                return bad(format!("function {} has {} entries, expected {size}", f.name, f.table.len()));
            }
            if f.table.iter().any(|a| !a.constant.is_finite() || a.coeffs.iter().any(|&(k, c)| k >= self.num_weights || !c.is_finite())) {
                return bad(format!("function {} has a malformed entry", f.name));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return bad(format!("variable {} appears in no function", self.vars[v].name));
        }
        let mut seen = vec![false; self.vars.len()];
        for &v in &self.order {
            if v >= self.vars.len() || seen[v] {
                return bad(format!("elimination order entry {v} is invalid"));
            }
            seen[v] = true;
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return bad(format!("order omits a variable: {}", self.vars[v].name));
        }
        Ok(())
    }

    /// Min-degree order of the interaction graph, lowest index on ties.
    pub fn min_degree_order(&self) -> Vec<usize> {
        let mut adj = vec![std::collections::BTreeSet::new(); self.vars.len()];
        for f in &self.functions {
            for &a in &f.scope {
                for &b in &f.scope {
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
        }
        crate::liftgraph::min_degree_order(adj).0
    }
}

type Bits = u64;
type TableKey = (Vec<usize>, Vec<(Bits, Vec<(usize, Bits)>)>);
type StepKey = (usize, Vec<(usize, Vec<usize>)>);

fn bits(x: f64) -> Bits {
    (x + 0.0).to_bits()
}

/// Hash-consing of `u` variables across calls targeting the same LP:
/// identical tables and identical elimination steps reuse their variables
/// and rows.
#[derive(Debug, Default)]
pub struct VeCache {
    tables: HashMap<TableKey, usize>,
    steps: HashMap<StepKey, usize>,
    handles: Vec<Rc<[usize]>>,
}

impl VeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn shared(&self) -> usize {
        self.handles.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EliminationStats {
    pub u_variables: usize,
    pub equalities: usize,
    pub inequalities: usize,
    pub reused: usize,
}

struct Work {
    handle: usize,
    scope: Vec<usize>,
}

fn merge(mut terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (k, v) in terms {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += v,
            _ => out.push((k, v)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

/// Appends the constraints of one max-constraint to `lp`. `weights[k]` is
/// the LP variable of weight `k`.
pub fn eliminate_into(
    spec: &MaxConstraintSpec,
    lp: &mut LinearProgram,
    weights: &[usize],
    cache: &mut VeCache,
) -> Result<EliminationStats> {
    spec.validate()?;
    if weights.len() < spec.num_weights {
        return Err(Error::Precondition("fewer LP weight variables than spec weights".into()));
    }
    let dom: Vec<usize> = spec.vars.iter().map(|v| v.domain).collect();
    let mut stats = EliminationStats::default();
    let mut work: Vec<Work> = Vec::with_capacity(spec.functions.len());

    for f in &spec.functions {
        let mapped: Vec<Affine> = f
            .table
            .iter()
            .map(|a| Affine { constant: a.constant, coeffs: a.coeffs.iter().map(|&(k, v)| (weights[k], v)).collect() })
            .collect();
        let key: TableKey = (
            f.scope.iter().map(|&v| dom[v]).collect(),
            mapped.iter().map(|a| (bits(a.constant), a.coeffs.iter().map(|&(k, v)| (k, bits(v))).collect())).collect(),
        );
        let handle = match cache.tables.get(&key) {
            Some(&h) => {
                stats.reused += 1;
                h
            }
            None => {
                let h = cache.handles.len();
                let mut us = Vec::with_capacity(mapped.len());
                for (z, a) in mapped.iter().enumerate() {
                    let u = lp.add_free(format!("u_f{h}_{z}"));
                    let mut terms = vec![(u, 1.0)];
                    terms.extend(a.coeffs.iter().map(|&(k, v)| (k, -v)));
                    lp.add_constraint(merge(terms), Sense::Eq, a.constant);
                    us.push(u);
                }
                stats.u_variables += us.len();
                stats.equalities += us.len();
                cache.handles.push(us.into());
                cache.tables.insert(key, h);
                h
            }
        };
        work.push(Work { handle, scope: f.scope.clone() });
    }

    let mut val = vec![0usize; dom.len()];
    for &x in &spec.order {
        let (members, rest): (Vec<Work>, Vec<Work>) = work.into_iter().partition(|w| w.scope.contains(&x));
        work = rest;
        if members.is_empty() {
            continue;
        }
        let mut scope: Vec<usize> = members.iter().flat_map(|w| w.scope.iter().copied()).filter(|&v| v != x).collect();
        scope.sort_unstable();
        scope.dedup();
        let mut key_members: Vec<(usize, Vec<usize>)> = members.iter().map(|w| (w.handle, w.scope.clone())).collect();
        key_members.sort();
        let key: StepKey = (x, key_members);
        let handle = match cache.steps.get(&key) {
            Some(&h) => {
                stats.reused += 1;
                h
            }
            None => {
                let h = cache.handles.len();
                let size: usize = scope.iter().map(|&v| dom[v]).product();
                let mut us = Vec::with_capacity(size);
                for z in 0..size {
                    let u = lp.add_free(format!("u_e{h}_{z}"));
                    us.push(u);
                    let mut rem = z;
                    for &v in scope.iter().rev() {
                        val[v] = rem % dom[v];
                        rem /= dom[v];
                    }
                    for xv in 0..dom[x] {
                        val[x] = xv;
                        let mut terms = vec![(u, 1.0)];
                        for m in &members {
                            let idx = m.scope.iter().fold(0, |acc, &v| acc * dom[v] + val[v]);
                            terms.push((cache.handles[m.handle][idx], -1.0));
                        }
                        lp.add_constraint(merge(terms), Sense::Ge, 0.0);
                        stats.inequalities += 1;
                    }
                }
                stats.u_variables += us.len();
                cache.handles.push(us.into());
                cache.steps.insert(key, h);
                h
            }
        };
        work.push(Work { handle, scope });
    }

    let roots: Vec<(usize, f64)> = work
        .iter()
        .map(|w| {
            debug_assert!(w.scope.is_empty());
            (cache.handles[w.handle][0], 1.0)
        })
        .collect();
    lp.add_constraint(merge(roots), Sense::Le, 0.0);
    stats.inequalities += 1;
    Ok(stats)
}

#[derive(Debug, Clone)]
pub struct Elimination {
    /// Weight variables `w0..` come first, then the `u` variables.
    pub lp: LinearProgram,
    pub stats: EliminationStats,
}

/// Constraints for a single max-constraint in a fresh LP.
pub fn eliminate_max(spec: &MaxConstraintSpec) -> Result<Elimination> {
    let mut lp = LinearProgram::new("max-constraint");
    let weights: Vec<usize> = (0..spec.num_weights).map(|k| lp.add_free(format!("w{k}"))).collect();
    let stats = eliminate_into(spec, &mut lp, &weights, &mut VeCache::new())?;
    Ok(Elimination { lp, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str, d: usize) -> CostVar {
        CostVar { name: name.into(), domain: d }
    }

    fn constant_table(values: &[f64]) -> Vec<Affine> {
        values.iter().map(|&v| Affine::constant(v)).collect()
    }

    fn chain() -> MaxConstraintSpec {
        MaxConstraintSpec {
            vars: vec![var("x1", 2), var("x2", 2)],
            functions: vec![
                LocalTerm { name: "f1".into(), scope: vec![0], table: constant_table(&[1.0, 2.0]) },
                LocalTerm { name: "f2".into(), scope: vec![0, 1], table: constant_table(&[0.0, -3.0, 1.0, -5.0]) },
                LocalTerm { name: "f3".into(), scope: vec![1], table: constant_table(&[-4.0, 0.5]) },
            ],
            order: vec![0, 1],
            num_weights: 0,
        }
    }

    #[test]
    fn chain_row_counts() {
        let e = eliminate_max(&chain()).unwrap();
        assert_eq!(e.stats.equalities, 8);
        // e1(x2): 2 x 2 rows, e2: 2 rows, one final row
        assert_eq!(e.stats.inequalities, 4 + 2 + 1);
        assert_eq!(e.lp.num_constraints(), 15);
    }

    #[test]
    fn single_boolean_function() {
        let spec = MaxConstraintSpec {
            vars: vec![var("x", 2)],
            functions: vec![LocalTerm { name: "f".into(), scope: vec![0], table: constant_table(&[1.0, -1.0]) }],
            order: vec![0],
            num_weights: 0,
        };
        let e = eliminate_max(&spec).unwrap();
        assert_eq!((e.stats.equalities, e.stats.inequalities), (2, 3));
    }

    #[test]
    fn feasibility_matches_the_maximum() {
        let spec = chain();
        let mut best = f64::NEG_INFINITY;
        for a in 0..2 {
            for b in 0..2 {
                let v = spec.functions[0].table[a].constant
                    + spec.functions[1].table[a * 2 + b].constant
                    + spec.functions[2].table[b].constant;
                best = best.max(v);
            }
        }
        // shift by a weight: 0 >= max + w  <=>  w <= -max
        let mut s = spec.clone();
        s.num_weights = 1;
        s.functions.push(LocalTerm { name: "c".into(), scope: vec![], table: vec![Affine::weight(0, 1.0)] });
        let mut e = eliminate_max(&s).unwrap();
        e.lp.objective = vec![(0, -1.0)];
        let sol = crate::lp::solve(&e.lp).unwrap();
        assert!((sol.values[0] + best).abs() < 1e-9);
    }

    #[test]
    fn order_must_cover_variables() {
        let mut s = chain();
        s.order = vec![1];
        let err = eliminate_max(&s).unwrap_err().to_string();
        assert!(err.contains("order omits a variable"), "{err}");
        s.order = vec![1, 1];
        assert!(eliminate_max(&s).is_err());
        let mut s = chain();
        s.functions[1].scope = vec![0, 7];
        assert!(eliminate_max(&s).is_err());
    }

    #[test]
    fn cache_shares_identical_blocks() {
        let mut lp = LinearProgram::new("t");
        let mut cache = VeCache::new();
        let a = eliminate_into(&chain(), &mut lp, &[], &mut cache).unwrap();
        let b = eliminate_into(&chain(), &mut lp, &[], &mut cache).unwrap();
        assert!(a.u_variables > 0);
        assert_eq!((b.u_variables, b.equalities, b.inequalities), (0, 0, 1));
    }

    #[test]
    fn affine_arithmetic() {
        let mut a = Affine::weight(2, 1.5);
        a.add(&Affine { constant: 1.0, coeffs: vec![(0, 1.0), (2, -1.5)] });
        assert_eq!(a, Affine { constant: 1.0, coeffs: vec![(0, 1.0)] });
        assert_eq!(a.eval(&[2.0, 0.0, 9.0]), 3.0);
        assert_eq!(a.coef(1), 0.0);
    }
}
