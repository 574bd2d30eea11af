//! Approximate planning: a factored ALP over the lifted basis functions.
//!
//! Each action template contributes one max-constraint
//! `0 >= max_x R(x) + sum_i w_i (gamma G_i^a(x) - h_i(x))` over one cost
//! variable per clique. Count variables take the number of true objects as
//! value (for multi-member cliques, the histogram index counted from the
//! last histogram). The max is removed by variable elimination.

pub mod elimination;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::counting::{self, ActionHistogram, CountingState};
use crate::error::{Error, Result};
use crate::lifted::{CliqueRef, CompiledBasis, InputSource, LiftedModel, LocalFunction};
use crate::lp::{self, LinearProgram, LpStatus, SolveOptions};
use crate::rewards::{basis_value, local_value, Backprojection, Backprojections};

pub use elimination::{
    eliminate_into, eliminate_max, Affine, CostVar, Elimination, EliminationStats, LocalTerm, MaxConstraintSpec,
    VeCache,
};

/// The cost-network variable of every clique, in state-index order.
fn clique_vars(lm: &LiftedModel) -> (Vec<CliqueRef>, Vec<Option<usize>>, Vec<Option<usize>>) {
    let mut hist_var = vec![None; lm.hists.len()];
    let mut prop_var = vec![None; lm.props.len()];
    for (v, &c) in lm.order.iter().enumerate() {
        match c {
            CliqueRef::Hist(k) => hist_var[k] = Some(v),
            CliqueRef::Prop(i) => prop_var[i] = Some(v),
        }
    }
    (lm.order.clone(), hist_var, prop_var)
}

/// Action templates: every combination of cell counts that some state admits.
pub fn templates(lm: &LiftedModel) -> Vec<ActionHistogram> {
    let mut out = vec![ActionHistogram { cells: Vec::new() }];
    for grp in &lm.groups {
        let src = &lm.hists[grp.source];
        let options = counting::bounded_compositions(grp.cells_per_bucket() * src.buckets, src.n);
        out = out
            .iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut a = prefix.clone();
                    a.cells.push(o.clone());
                    a
                })
            })
            .collect();
    }
    out
}

/// Domain of one cost variable in one block: histogram ranks (or 0/1 for
/// a proposition), listed by value index.
#[derive(Debug, Clone)]
struct Domain {
    clique: CliqueRef,
    values: Vec<usize>,
}

fn block_domains(lm: &LiftedModel, a: &ActionHistogram) -> Vec<Domain> {
    lm.order
        .iter()
        .map(|&c| match c {
            CliqueRef::Prop(_) => Domain { clique: c, values: vec![0, 1] },
            CliqueRef::Hist(k) => {
                let h = &lm.hists[k];
                let values = (0..h.histograms.len())
                    .rev()
                    .filter(|&r| {
                        lm.groups.iter().enumerate().filter(|(_, g)| g.source == k).all(|(g, grp)| {
                            let cpb = grp.cells_per_bucket();
                            h.histograms[r]
                                .iter()
                                .enumerate()
                                .all(|(b, &c)| a.cells[g][b * cpb..(b + 1) * cpb].iter().sum::<u64>() <= c)
                        })
                    })
                    .collect();
                Domain { clique: c, values }
            }
        })
        .collect()
}

fn local_scope(f: &LocalFunction, hist_var: &[Option<usize>], prop_var: &[Option<usize>]) -> Vec<usize> {
    let mut scope: Vec<usize> = f.hist.iter().filter_map(|&k| hist_var[k]).collect();
    for src in &f.scope {
        if let InputSource::Prop(i) = src {
            scope.extend(prop_var[*i]);
        }
    }
    scope.sort_unstable();
    scope.dedup();
    scope
}

fn backprojection_scope(bp: &Backprojection, hist_var: &[Option<usize>], prop_var: &[Option<usize>]) -> Vec<usize> {
    let mut scope: Vec<usize> = match bp {
        Backprojection::Constant(_) => Vec::new(),
        Backprojection::Bucket { source, props, .. } => {
            hist_var[*source].into_iter().chain(props.iter().filter_map(|&i| prop_var[i])).collect()
        }
        Backprojection::Prop { props, .. } => props.iter().filter_map(|&i| prop_var[i]).collect(),
        Backprojection::Aggregate { hist, .. } => hist_var[*hist].into_iter().collect(),
    };
    scope.sort_unstable();
    scope.dedup();
    scope
}

enum TermKind<'a> {
    Reward(&'a LocalFunction),
    Basis(usize),
    Back(usize, &'a Backprojection),
}

/// Builds the max-constraint of template `a`. Terms with the same scope
/// are summed into one function; functions are ordered by scope size,
/// then by variables, with the scalar function last.
pub fn block_spec(lm: &LiftedModel, bps: &Backprojections, a: &ActionHistogram) -> Result<MaxConstraintSpec> {
    let (order, hist_var, prop_var) = clique_vars(lm);
    let domains = block_domains(lm, a);
    if domains.iter().any(|d| d.values.is_empty()) {
        return Err(Error::Precondition("action template is admissible in no state".into()));
    }
    let gamma = lm.gamma();

    let mut terms: Vec<(Vec<usize>, TermKind)> = Vec::new();
    for r in &lm.rewards {
        terms.push((local_scope(r, &hist_var, &prop_var), TermKind::Reward(r)));
    }
    for (i, b) in lm.basis.iter().enumerate() {
        let scope = match b {
            CompiledBasis::Constant(_) => Vec::new(),
            CompiledBasis::Local(f) => local_scope(f, &hist_var, &prop_var),
        };
        terms.push((scope, TermKind::Basis(i)));
        terms.push((backprojection_scope(&bps.items[i], &hist_var, &prop_var), TermKind::Back(i, &bps.items[i])));
    }

    let mut base = CountingState {
        hists: lm.hists.iter().map(|h| h.histograms[0].clone()).collect(),
        props: vec![false; lm.props.len()],
    };
    for d in &domains {
        if let CliqueRef::Hist(k) = d.clique {
            base.hists[k] = lm.hists[k].histograms[d.values[0]].clone();
        }
    }

    let mut grouped: BTreeMap<Vec<usize>, Vec<Affine>> = BTreeMap::new();
    for (scope, kind) in &terms {
        let size: usize = scope.iter().map(|&v| domains[v].values.len()).product();
        let table = grouped.entry(scope.clone()).or_insert_with(|| vec![Affine::default(); size]);
        let mut s = base.clone();
        for (z, entry) in table.iter_mut().enumerate() {
            let mut rem = z;
            for &v in scope.iter().rev() {
                let d = &domains[v];
                let value = d.values[rem % d.values.len()];
                rem /= d.values.len();
                match d.clique {
                    CliqueRef::Hist(k) => s.hists[k] = lm.hists[k].histograms[value].clone(),
                    CliqueRef::Prop(i) => s.props[i] = value == 1,
                }
            }
            let term = match kind {
                TermKind::Reward(f) => Affine::constant(local_value(lm, f, &s)),
                TermKind::Basis(i) => Affine::weight(*i, -basis_value(lm, *i, &s)),
                TermKind::Back(i, bp) => Affine::weight(*i, gamma * bp.lifted(lm, &s, a)),
            };
            entry.add(&term);
        }
    }

    let mut functions: Vec<(Vec<usize>, Vec<Affine>)> = grouped.into_iter().collect();
    functions.sort_by(|x, y| (x.0.is_empty(), x.0.len(), &x.0).cmp(&(y.0.is_empty(), y.0.len(), &y.0)));

    // cliques no term mentions are maximized trivially and left out
    let mut remap = vec![None; order.len()];
    let mut vars = Vec::new();
    for v in 0..order.len() {
        if functions.iter().any(|f| f.0.contains(&v)) {
            remap[v] = Some(vars.len());
            vars.push(CostVar { name: lm.clique_name(order[v]).to_string(), domain: domains[v].values.len() });
        }
    }
    let mut spec = MaxConstraintSpec {
        vars,
        functions: functions
            .into_iter()
            .enumerate()
            .map(|(j, (scope, table))| LocalTerm {
                name: format!("f{}", j + 1),
                scope: scope.iter().filter_map(|&v| remap[v]).collect(),
                table,
            })
            .collect(),
        order: Vec::new(),
        num_weights: lm.basis.len(),
    };
    spec.order = spec.min_degree_order();
    Ok(spec)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ApproxDiagnostics {
    pub blocks: usize,
    pub lp_variables: usize,
    pub lp_constraints: usize,
    pub u_variables: usize,
    pub reused: usize,
    pub presolved_vars: usize,
    pub presolved_rows: usize,
    pub dualized: bool,
    pub iterations: usize,
    pub build_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct AlpProgram {
    pub lp: LinearProgram,
    /// LP variable of each basis weight.
    pub weights: Vec<usize>,
    pub blocks: usize,
    pub stats: EliminationStats,
}

pub fn default_alpha(lm: &LiftedModel) -> Vec<f64> {
    vec![1.0; lm.basis.len()]
}

/// Objective `min sum_i alpha_i w_i` with one max-constraint per template.
pub fn build_alp(lm: &LiftedModel, alpha: &[f64]) -> Result<AlpProgram> {
    if alpha.len() != lm.basis.len() || alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Precondition(format!("alpha needs {} finite weights", lm.basis.len())));
    }
    let bps = Backprojections::new(lm)?;
    let mut lp = LinearProgram::new(&format!("alp-{}", lm.model.name));
    let weights: Vec<usize> = lm.model.basis.iter().map(|b| lp.add_free(format!("w_{}", b.name))).collect();
    lp.objective = weights.iter().zip(alpha).filter(|(_, &a)| a != 0.0).map(|(&w, &a)| (w, a)).collect();
    let mut cache = VeCache::new();
    let mut stats = EliminationStats::default();
    let ts = templates(lm);
    for a in &ts {
        let spec = block_spec(lm, &bps, a)?;
        let s = eliminate_into(&spec, &mut lp, &weights, &mut cache)?;
        stats.u_variables += s.u_variables;
        stats.equalities += s.equalities;
        stats.inequalities += s.inequalities;
        stats.reused += s.reused;
    }
    Ok(AlpProgram { lp, weights, blocks: ts.len(), stats })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub names: Vec<String>,
    pub weights: Vec<f64>,
    pub alpha: Vec<f64>,
    pub fingerprint: String,
    pub diagnostics: ApproxDiagnostics,
}

impl WeightVector {
    pub fn to_json(&self) -> Value {
        json!({
            "kind": "approx",
            "model": self.fingerprint,
            "basis": self.names,
            "weights": self.weights,
            "alpha": self.alpha,
            "diagnostics": self.diagnostics,
        })
    }

    pub fn from_json(lm: &LiftedModel, v: &Value) -> Result<WeightVector> {
        if v["kind"] != "approx" {
            return Err(Error::Precondition("not an approximate plan".into()));
        }
        if v["model"] != lm.fingerprint.as_str() {
            return Err(Error::Precondition("plan was computed for a different model".into()));
        }
        let nums = |key: &str| -> Result<Vec<f64>> {
            v[key]
                .as_array()
                .ok_or_else(|| Error::Precondition(format!("plan lacks {key}")))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| Error::Precondition(format!("{key} must be numbers"))))
                .collect()
        };
        let weights = nums("weights")?;
        let alpha = nums("alpha")?;
        if weights.len() != lm.basis.len() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Precondition("plan needs one finite weight per basis function".into()));
        }
        let diagnostics = ApproxDiagnostics {
            blocks: v["diagnostics"]["blocks"].as_u64().unwrap_or(0) as usize,
            lp_variables: v["diagnostics"]["lp_variables"].as_u64().unwrap_or(0) as usize,
            lp_constraints: v["diagnostics"]["lp_constraints"].as_u64().unwrap_or(0) as usize,
            ..Default::default()
        };
        Ok(WeightVector {
            names: lm.model.basis.iter().map(|b| b.name.clone()).collect(),
            weights,
            alpha,
            fingerprint: lm.fingerprint.clone(),
            diagnostics,
        })
    }
}

pub fn plan_approx(lm: &LiftedModel, alpha: &[f64]) -> Result<WeightVector> {
    plan_approx_with(lm, alpha, &SolveOptions::default())
}

pub fn plan_approx_with(lm: &LiftedModel, alpha: &[f64], opts: &SolveOptions) -> Result<WeightVector> {
    let t0 = Instant::now();
    let alp = build_alp(lm, alpha)?;
    let build_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let sol = lp::solve_with(&alp.lp, opts)?;
    let solve_seconds = t1.elapsed().as_secs_f64();
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpStatus(sol.status));
    }
    Ok(WeightVector {
        names: lm.model.basis.iter().map(|b| b.name.clone()).collect(),
        weights: alp.weights.iter().map(|&j| sol.values[j]).collect(),
        alpha: alpha.to_vec(),
        fingerprint: lm.fingerprint.clone(),
        diagnostics: ApproxDiagnostics {
            blocks: alp.blocks,
            lp_variables: alp.lp.num_vars(),
            lp_constraints: alp.lp.num_constraints(),
            u_variables: alp.stats.u_variables,
            reused: alp.stats.reused,
            presolved_vars: sol.stats.presolved_vars,
            presolved_rows: sol.stats.presolved_rows,
            dualized: sol.stats.dualized,
            iterations: sol.stats.iterations,
            build_seconds,
            solve_seconds,
        },
    })
}

/// `sum_i w_i h_i(s)`
pub fn approx_value(lm: &LiftedModel, weights: &[f64], s: &CountingState) -> f64 {
    weights.iter().enumerate().map(|(i, w)| w * basis_value(lm, i, s)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{epidemic, BasisFunction};
    use serde_json::json;

    fn close(a: &Affine, constant: f64, coeffs: &[(usize, f64)]) -> bool {
        let ok = (a.constant - constant).abs() < 1e-12;
        let n = a.coeffs.len() == coeffs.iter().filter(|c| c.1 != 0.0).count();
        ok && n && coeffs.iter().all(|&(k, c)| (a.coef(k) - c).abs() < 1e-12)
    }

    #[test]
    fn noop_block_of_epidemic_three() {
        let lm = LiftedModel::compile(&epidemic(3)).unwrap();
        let bps = Backprojections::new(&lm).unwrap();
        let spec = block_spec(&lm, &bps, &lm.noop()).unwrap();
        let names: Vec<_> = spec.vars.iter().map(|v| (v.name.as_str(), v.domain)).collect();
        assert_eq!(names, [("Sick", 4), ("Travel", 4), ("Epidemic", 2)]);
        let scopes: Vec<_> = spec.functions.iter().map(|f| f.scope.clone()).collect();
        assert_eq!(scopes, vec![vec![0], vec![1], vec![0, 2], vec![]]);
        assert_eq!(spec.order, vec![1, 0, 2]);
        let f = &spec.functions;
        assert!(close(&f[0].table[0], 3.0, &[(1, -3.0)]));
        assert!(close(&f[0].table[1], 1.0, &[(1, -1.0)]));
        assert!(close(&f[0].table[2], -1.0, &[(1, 1.0)]));
        assert!(close(&f[0].table[3], -3.0, &[(1, 3.0)]));
        assert!(close(&f[1].table[3], 6.0, &[(2, -1.14)]));
        assert!(close(&f[1].table[0], 0.0, &[(2, 3.0 * 0.9 * 0.4)]));
        assert!(close(&f[2].table[0], 0.0, &[(1, 1.62)]));
        assert!(close(&f[2].table[1], 0.0, &[(1, -1.62)]));
        assert!(close(&f[2].table[2], 0.0, &[(1, 1.26)]));
        assert!(close(&f[2].table[5], 0.0, &[(1, -0.9)]));
        assert!(close(&f[2].table[6], 0.0, &[(1, 0.54)]));
        assert!(close(&f[3].table[0], 0.0, &[(0, -0.1)]));
    }

    #[test]
    fn full_restriction_pins_travel() {
        let lm = LiftedModel::compile(&epidemic(3)).unwrap();
        let bps = Backprojections::new(&lm).unwrap();
        // one non-traveller and two travellers restricted
        let a = ActionHistogram { cells: vec![vec![1, 2]] };
        let spec = block_spec(&lm, &bps, &a).unwrap();
        assert_eq!(spec.vars[1].domain, 1);
        // x2 = 2: 2*2 + w2 (0.9 (1*0.2 + 2*1.0) - 2*2)
        assert!(close(&spec.functions[1].table[0], 4.0, &[(2, 0.9 * 2.2 - 4.0)]));
    }

    #[test]
    fn template_count() {
        for n in [1u64, 3, 10] {
            let lm = LiftedModel::compile(&epidemic(n)).unwrap();
            assert_eq!(templates(&lm).len() as u64, (n + 1) * (n + 2) / 2);
        }
    }

    #[test]
    fn constant_basis_only() {
        let mut m = epidemic(3);
        m.basis = vec![BasisFunction::constant("h0", 1.0)];
        let lm = LiftedModel::compile(&m).unwrap();
        let w = plan_approx(&lm, &default_alpha(&lm)).unwrap();
        // w0 (1 - gamma) >= max R = 3 + 6
        assert!((w.weights[0] - 90.0).abs() < 1e-6, "{:?}", w.weights);
        let s = lm.state_at(5);
        assert!((approx_value(&lm, &w.weights, &s) - w.weights[0]).abs() < 1e-12);
    }

    #[test]
    fn approx_upper_bounds_exact() {
        let lm = LiftedModel::compile(&epidemic(2)).unwrap();
        let w = plan_approx(&lm, &default_alpha(&lm)).unwrap();
        let v = crate::planner_exact::plan_exact(&lm, &crate::planner_exact::Alpha::Uniform).unwrap();
        for s in lm.states() {
            assert!(approx_value(&lm, &w.weights, &s) >= v.value(&lm, &s) - 1e-6);
        }
        let back = WeightVector::from_json(&lm, &w.to_json()).unwrap();
        assert_eq!(back.weights, w.weights);
    }

    #[test]
    fn approx_value_basics() {
        let lm = LiftedModel::compile(&epidemic(3)).unwrap();
        let s = lm.state_from_json(&json!({"Sick": [0, 3], "Travel": [3, 0], "Epidemic": false})).unwrap();
        assert_eq!(approx_value(&lm, &[1.0, 0.0, 0.0], &s), 1.0);
        assert_eq!(approx_value(&lm, &[0.0, 1.0, 0.0], &s), -3.0);
        let a = approx_value(&lm, &[1.0, 2.0, 3.0], &s);
        let b = approx_value(&lm, &[2.0, 4.0, 6.0], &s);
        assert!((2.0 * a - b).abs() < 1e-12);
    }

    #[test]
    fn u_equalities_reproduce_functions() {
        let lm = LiftedModel::compile(&epidemic(2)).unwrap();
        let alp = build_alp(&lm, &default_alpha(&lm)).unwrap();
        let sol = lp::solve(&alp.lp).unwrap();
        for c in alp.lp.constraints.iter().filter(|c| c.sense == crate::lp::Sense::Eq) {
            assert!(c.violation(&sol.values) < 1e-7);
        }
    }
}
