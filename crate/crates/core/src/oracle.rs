//! Ground reference implementation: the model expanded to one Boolean
//! variable per grounding, solved by value iteration and by a ground ALP.
//! Only the state/action mapping touches the lifted representation.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::counting::{ActionHistogram, CountingState};
use crate::error::{Error, Result};
use crate::lifted::{CliqueRef, LiftedModel};
use crate::lp::{self, LinearProgram, LpStatus};
use crate::model::{self, Aggregate, RfMdpModel, Role, ValueRow};
use crate::planner_approx::{self, eliminate_into, Affine, CostVar, LocalTerm, MaxConstraintSpec, VeCache};
use crate::planner_exact::{self, Alpha};
use crate::queries::{self, Plan, RestrictionPredicate};
use crate::transition::next_state_probs;

/// Largest ground problem the oracle accepts.
pub const MAX_GROUND_STATE_BITS: usize = 12;
pub const MAX_GROUND_ACTION_BITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundVar {
    pub prv: usize,
    pub tuple: Vec<u64>,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Parent {
    State(usize),
    Action(usize),
}

#[derive(Debug, Clone)]
enum GroundFactor {
    /// `p_true[row]`, row over parents with the first parent most significant.
    Cpt { parents: Vec<Parent>, p_true: Vec<f64> },
    Aggregate { parents: Vec<usize>, aggregate: Aggregate },
}

/// Table over state variables, first variable most significant.
#[derive(Debug, Clone)]
pub struct GroundLocal {
    pub scope: Vec<usize>,
    pub table: Vec<f64>,
}

impl GroundLocal {
    fn at(&self, x: usize) -> f64 {
        self.table[self.scope.iter().fold(0, |acc, &j| (acc << 1) | (x >> j) & 1)]
    }
}

#[derive(Debug, Clone)]
pub struct GroundBasis {
    /// Index of the lifted basis function this is a grounding of.
    pub lifted: usize,
    pub constant: Option<f64>,
    pub local: Option<GroundLocal>,
}

#[derive(Debug, Clone)]
pub struct GroundModel {
    pub model: RfMdpModel,
    pub state_vars: Vec<GroundVar>,
    pub action_vars: Vec<GroundVar>,
    factors: Vec<GroundFactor>,
    pub rewards: Vec<GroundLocal>,
    pub basis: Vec<GroundBasis>,
}

fn tuples(model: &RfMdpModel, logvars: &[String]) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for l in logvars {
        let d = model.logvar(l).map_or(0, |l| l.domain_size);
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..d).map(move |c| {
                    let mut t = t.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}

fn var_name(model: &RfMdpModel, prv: usize, tuple: &[u64]) -> String {
    let p = &model.prvs[prv];
    if tuple.is_empty() {
        p.name.clone()
    } else {
        let args: Vec<String> = p.logvars.iter().zip(tuple).map(|(l, c)| format!("{}{}", l.to_lowercase(), c + 1)).collect();
        format!("{}({})", p.name, args.join(","))
    }
}

impl GroundModel {
    /// Validates the model and enforces the size guard.
    pub fn new(model: &RfMdpModel) -> Result<GroundModel> {
        let v = model::validate(model);
        if !v.is_empty() {
            return Err(Error::Invalid(v));
        }
        Self::unchecked(model)
    }

    /// Skips validation (tables need not be normalized); the size guard
    /// still applies.
    pub fn unchecked(model: &RfMdpModel) -> Result<GroundModel> {
        let mut state_vars = Vec::new();
        let mut action_vars = Vec::new();
        let mut state_index = HashMap::new();
        let mut action_index = HashMap::new();
        for (p, prv) in model.prvs.iter().enumerate() {
            for t in tuples(model, &prv.logvars) {
                let gv = GroundVar { prv: p, name: var_name(model, p, &t), tuple: t.clone() };
                match prv.role {
                    Role::State => {
                        state_index.insert((p, t), state_vars.len());
                        state_vars.push(gv);
                    }
                    Role::Action => {
                        action_index.insert((p, t), action_vars.len());
                        action_vars.push(gv);
                    }
                }
            }
        }
        if state_vars.len() > MAX_GROUND_STATE_BITS || action_vars.len() > MAX_GROUND_ACTION_BITS {
            return Err(Error::Guard(format!(
                "ground model has {} state and {} action variables (limits {} and {})",
                state_vars.len(),
                action_vars.len(),
                MAX_GROUND_STATE_BITS,
                MAX_GROUND_ACTION_BITS
            )));
        }
        let prv_of = |name: &str| -> Result<usize> {
            model.prvs.iter().position(|p| p.name == name).ok_or_else(|| Error::Precondition(format!("unknown prv {name}")))
        };
        // bind the logvars of `prv` from a binding of named logvars
        let bind = |prv: usize, binding: &HashMap<&str, u64>| -> Option<Vec<u64>> {
            model.prvs[prv].logvars.iter().map(|l| binding.get(l.as_str()).copied()).collect()
        };

        let mut factors = Vec::with_capacity(state_vars.len());
        for gv in &state_vars {
            let prv = &model.prvs[gv.prv];
            let f = model
                .parfactors
                .iter()
                .find(|f| f.output == prv.name)
                .ok_or_else(|| Error::Precondition(format!("state prv {} has no parfactor", prv.name)))?;
            let binding: HashMap<&str, u64> = prv.logvars.iter().map(String::as_str).zip(gv.tuple.iter().copied()).collect();
            if let Some(agg) = &f.aggregate {
                let [input] = f.inputs.as_slice() else {
                    return Err(Error::Unsupported(format!("aggregate {} needs exactly one input", f.name)));
                };
                let ip = prv_of(input)?;
                let parents = tuples(model, &model.prvs[ip].logvars).into_iter().map(|t| state_index[&(ip, t)]).collect();
                factors.push(GroundFactor::Aggregate { parents, aggregate: agg.clone() });
                continue;
            }
            let mut parents = Vec::new();
            for input in &f.inputs {
                let ip = prv_of(input)?;
                let t = bind(ip, &binding)
                    .ok_or_else(|| Error::Unsupported(format!("input {input} of {} has unbound logvars", f.name)))?;
                parents.push(match model.prvs[ip].role {
                    Role::State => Parent::State(state_index[&(ip, t)]),
                    Role::Action => Parent::Action(action_index[&(ip, t)]),
                });
            }
            let mut p_true = vec![f64::NAN; 1 << parents.len()];
            for row in &f.rows {
                if row.assignment.len() == parents.len() + 1 && *row.assignment.last().unwrap() {
                    p_true[model::index_of_bits(&row.assignment[..parents.len()])] = row.prob;
                }
            }
            if p_true.iter().any(|p| p.is_nan()) {
                return Err(Error::Precondition(format!("parfactor {} lacks rows", f.name)));
            }
            factors.push(GroundFactor::Cpt { parents, p_true });
        }

        let local = |scope: &[String], rows: &[ValueRow], what: &str| -> Result<Vec<GroundLocal>> {
            let prvs = scope.iter().map(|s| prv_of(s)).collect::<Result<Vec<_>>>()?;
            let mut logvars: Vec<String> = Vec::new();
            for &p in &prvs {
                for l in &model.prvs[p].logvars {
                    if !logvars.contains(l) {
                        logvars.push(l.clone());
                    }
                }
            }
            let mut table = vec![f64::NAN; 1 << prvs.len()];
            for r in rows {
                if r.assignment.len() == prvs.len() {
                    table[model::index_of_bits(&r.assignment)] = r.value;
                }
            }
            if table.iter().any(|v| v.is_nan()) {
                return Err(Error::Precondition(format!("{what} lacks rows")));
            }
            tuples(model, &logvars)
                .into_iter()
                .map(|t| {
                    let binding: HashMap<&str, u64> = logvars.iter().map(String::as_str).zip(t).collect();
                    let scope = prvs
                        .iter()
                        .map(|&p| {
                            state_index
                                .get(&(p, bind(p, &binding).expect("bound")))
                                .copied()
                                .ok_or_else(|| Error::Unsupported(format!("{what} reads an action")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(GroundLocal { scope, table: table.clone() })
                })
                .collect()
        };

        let mut rewards = Vec::new();
        for r in &model.rewards {
            rewards.extend(local(&r.scope, &r.rows, &format!("reward {}", r.name))?);
        }
        let mut basis = Vec::new();
        for (i, b) in model.basis.iter().enumerate() {
            match (&b.constant, &b.rows) {
                (Some(c), _) => basis.push(GroundBasis { lifted: i, constant: Some(*c), local: None }),
                (None, Some(rows)) => {
                    if b.scope.len() != 1 {
                        return Err(Error::Unsupported(format!("basis {} must cover one prv", b.name)));
                    }
                    for l in local(&b.scope, rows, &format!("basis {}", b.name))? {
                        basis.push(GroundBasis { lifted: i, constant: None, local: Some(l) });
                    }
                }
                (None, None) => return Err(Error::Precondition(format!("basis {} is empty", b.name))),
            }
        }
        Ok(GroundModel { model: model.clone(), state_vars, action_vars, factors, rewards, basis })
    }

    pub fn num_states(&self) -> usize {
        1 << self.state_vars.len()
    }

    pub fn num_actions(&self) -> usize {
        1 << self.action_vars.len()
    }

    pub fn reward(&self, x: usize) -> f64 {
        self.rewards.iter().map(|r| r.at(x)).sum()
    }

    fn factor_prob(&self, j: usize, state: impl Fn(usize) -> bool, action: usize) -> f64 {
        match &self.factors[j] {
            GroundFactor::Cpt { parents, p_true } => {
                let row = parents.iter().fold(0, |acc, p| {
                    let bit = match *p {
                        Parent::State(i) => state(i),
                        Parent::Action(i) => (action >> i) & 1 == 1,
                    };
                    (acc << 1) | bit as usize
                });
                p_true[row]
            }
            GroundFactor::Aggregate { parents, aggregate } => {
                let k = parents.iter().filter(|&&i| state(i)).count() as u64;
                aggregate.prob_true(k, parents.len() as u64)
            }
        }
    }

    /// `P(x'_j = true | x, a)` for every state variable.
    pub fn bit_probs(&self, x: usize, a: usize) -> Vec<f64> {
        (0..self.state_vars.len()).map(|j| self.factor_prob(j, |i| (x >> i) & 1 == 1, a)).collect()
    }

    pub fn transition_prob(&self, x: usize, a: usize, next: usize) -> f64 {
        self.bit_probs(x, a).iter().enumerate().map(|(j, &p)| if (next >> j) & 1 == 1 { p } else { 1.0 - p }).product()
    }

    /// `sum_x' P(x'|x,a) V(x')`, contracting one variable at a time.
    pub fn expectation(&self, probs: &[f64], v: &[f64]) -> f64 {
        let mut t = v.to_vec();
        for &p in probs {
            let half = t.len() / 2;
            for i in 0..half {
                t[i] = (1.0 - p) * t[2 * i] + p * t[2 * i + 1];
            }
            t.truncate(half);
        }
        t[0]
    }

    /// PRV name -> values per grounding, as the lifted mapping expects.
    pub fn state_assignment(&self, x: usize) -> HashMap<String, Vec<bool>> {
        Self::assignment(&self.model, &self.state_vars, x)
    }

    pub fn action_assignment(&self, a: usize) -> HashMap<String, Vec<bool>> {
        Self::assignment(&self.model, &self.action_vars, a)
    }

    fn assignment(model: &RfMdpModel, vars: &[GroundVar], bits: usize) -> HashMap<String, Vec<bool>> {
        let mut out: HashMap<String, Vec<bool>> = HashMap::new();
        for (j, gv) in vars.iter().enumerate() {
            out.entry(model.prvs[gv.prv].name.clone()).or_default().push((bits >> j) & 1 == 1);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GroundSolution {
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl GroundSolution {
    pub fn q(&self, g: &GroundModel, x: usize, a: usize) -> f64 {
        g.reward(x) + g.model.gamma * g.expectation(&g.bit_probs(x, a), &self.values)
    }
}

/// Value iteration until the greedy values are within `eps` of optimal.
pub fn ground_value_iteration(g: &GroundModel, eps: f64) -> Result<GroundSolution> {
    let gamma = g.model.gamma;
    if gamma >= 1.0 {
        return Err(Error::Precondition("value iteration needs gamma < 1".into()));
    }
    let ns = g.num_states();
    let probs: Vec<Vec<Vec<f64>>> = (0..ns).map(|x| (0..g.num_actions()).map(|a| g.bit_probs(x, a)).collect()).collect();
    let rewards: Vec<f64> = (0..ns).map(|x| g.reward(x)).collect();
    let threshold = if gamma == 0.0 { f64::INFINITY } else { eps * (1.0 - gamma) / (2.0 * gamma) };
    let mut v = vec![0.0; ns];
    for it in 1..=1_000_000 {
        let next: Vec<f64> = (0..ns)
            .map(|x| {
                let best = probs[x].iter().map(|p| g.expectation(p, &v)).fold(f64::NEG_INFINITY, f64::max);
                rewards[x] + gamma * best
            })
            .collect();
        let residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if residual <= threshold {
            return Ok(GroundSolution { values: v, iterations: it });
        }
    }
    Err(Error::Precondition("value iteration did not converge".into()))
}

fn ground_backprojection(g: &GroundModel, basis: &GroundBasis, a: usize, gamma: f64, w: usize) -> LocalTerm {
    let name = format!("g{w}");
    if let Some(c) = basis.constant {
        return LocalTerm { name, scope: vec![], table: vec![Affine::weight(w, gamma * c)] };
    }
    let l = basis.local.as_ref().expect("local basis");
    let j = l.scope[0];
    let parents: Vec<usize> = match &g.factors[j] {
        GroundFactor::Cpt { parents, .. } => parents
            .iter()
            .filter_map(|p| if let Parent::State(i) = p { Some(*i) } else { None })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        GroundFactor::Aggregate { parents, .. } => parents.clone(),
    };
    let table = (0..1usize << parents.len())
        .map(|row| {
            let state = |i: usize| {
                let pos = parents.iter().position(|&p| p == i).expect("parent");
                (row >> (parents.len() - 1 - pos)) & 1 == 1
            };
            let p = g.factor_prob(j, state, a);
            Affine::weight(w, gamma * (p * l.table[1] + (1.0 - p) * l.table[0]))
        })
        .collect();
    LocalTerm { name, scope: parents, table }
}

#[derive(Debug, Clone)]
pub struct GroundAlpSolution {
    /// One weight per ground basis function.
    pub weights: Vec<f64>,
    pub lp_variables: usize,
    pub lp_constraints: usize,
}

/// Factored ALP over the ground basis, one max-constraint per ground action.
pub fn ground_alp(g: &GroundModel, alpha: &[f64]) -> Result<GroundAlpSolution> {
    if alpha.len() != g.basis.len() {
        return Err(Error::Precondition(format!("alpha needs {} weights", g.basis.len())));
    }
    let gamma = g.model.gamma;
    let mut lp = LinearProgram::new("ground-alp");
    let weights: Vec<usize> = (0..g.basis.len()).map(|i| lp.add_free(format!("w{i}"))).collect();
    lp.objective = weights.iter().zip(alpha).map(|(&w, &a)| (w, a)).collect();
    let mut cache = VeCache::new();
    for a in 0..g.num_actions() {
        let mut functions = Vec::new();
        for (k, r) in g.rewards.iter().enumerate() {
            functions.push(LocalTerm {
                name: format!("r{k}"),
                scope: r.scope.clone(),
                table: r.table.iter().map(|&v| Affine::constant(v)).collect(),
            });
        }
        for (w, b) in g.basis.iter().enumerate() {
            match (&b.constant, &b.local) {
                (Some(c), _) => functions.push(LocalTerm { name: format!("h{w}"), scope: vec![], table: vec![Affine::weight(w, -c)] }),
                (None, Some(l)) => functions.push(LocalTerm {
                    name: format!("h{w}"),
                    scope: l.scope.clone(),
                    table: l.table.iter().map(|&v| Affine::weight(w, -v)).collect(),
                }),
                (None, None) => unreachable!("basis has a body"),
            }
            functions.push(ground_backprojection(g, b, a, gamma, w));
        }
        let used: BTreeSet<usize> = functions.iter().flat_map(|f| f.scope.iter().copied()).collect();
        let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(i, &j)| (j, i)).collect();
        for f in functions.iter_mut() {
            f.scope = f.scope.iter().map(|j| remap[j]).collect();
        }
        let mut spec = MaxConstraintSpec {
            vars: used.iter().map(|&j| CostVar { name: g.state_vars[j].name.clone(), domain: 2 }).collect(),
            functions,
            order: Vec::new(),
            num_weights: g.basis.len(),
        };
        spec.order = spec.min_degree_order();
        eliminate_into(&spec, &mut lp, &weights, &mut cache)?;
    }
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpStatus(sol.status));
    }
    Ok(GroundAlpSolution {
        weights: weights.iter().map(|&j| sol.values[j]).collect(),
        lp_variables: lp.num_vars(),
        lp_constraints: lp.num_constraints(),
    })
}

/// A ground state with the counts of `s`: within each clique, objects are
/// filled into buckets in bucket order.
pub fn representative_state(lm: &LiftedModel, g: &GroundModel, s: &CountingState) -> usize {
    let mut x = 0usize;
    for (j, gv) in g.state_vars.iter().enumerate() {
        let bit = if let Some((k, pos)) = lm.prv_hist[gv.prv] {
            let h = &lm.hists[k];
            let o = object_index(gv, &g.model) as u64;
            bucket_of(&s.hists[k], o).map(|b| h.bit(b, pos)).unwrap_or(false)
        } else {
            lm.prv_prop[gv.prv].map(|i| s.props[i]).unwrap_or(false)
        };
        x |= (bit as usize) << j;
    }
    x
}

/// A ground action with the cell counts of `a` on top of
/// [`representative_state`].
pub fn representative_action(lm: &LiftedModel, g: &GroundModel, s: &CountingState, a: &ActionHistogram) -> usize {
    let mut bits = 0usize;
    for (j, gv) in g.action_vars.iter().enumerate() {
        let Some(gi) = lm.groups.iter().position(|grp| grp.actions.contains(&gv.prv)) else { continue };
        let grp = &lm.groups[gi];
        let pos = grp.actions.iter().position(|&p| p == gv.prv).unwrap();
        let o = object_index(gv, &g.model) as u64;
        let src = &s.hists[grp.source];
        let Some(b) = bucket_of(src, o) else { continue };
        let start: u64 = src[..b].iter().sum();
        let cpb = grp.cells_per_bucket();
        // within the bucket, objects take assignments 1, 2, ... in order
        let mut offset = o - start;
        let mut alpha = 0;
        for (k, &c) in a.cells[gi][b * cpb..(b + 1) * cpb].iter().enumerate() {
            if offset < c {
                alpha = k + 1;
                break;
            }
            offset -= c;
        }
        let on = alpha > 0 && (alpha >> (grp.q() - 1 - pos)) & 1 == 1;
        bits |= (on as usize) << j;
    }
    bits
}

fn object_index(gv: &GroundVar, model: &RfMdpModel) -> usize {
    let prv = &model.prvs[gv.prv];
    prv.logvars
        .iter()
        .zip(&gv.tuple)
        .fold(0usize, |acc, (l, &c)| acc * model.logvar(l).map_or(1, |l| l.domain_size) as usize + c as usize)
}

fn bucket_of(h: &[u64], o: u64) -> Option<usize> {
    let mut acc = 0;
    for (b, &c) in h.iter().enumerate() {
        acc += c;
        if o < acc {
            return Some(b);
        }
    }
    None
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EquivalenceReport {
    pub ground_states: usize,
    pub ground_actions: usize,
    pub lifted_states: usize,
    pub value_iterations: usize,
    pub max_value_error: f64,
    pub policy_mismatches: usize,
    pub transitions_checked: usize,
    pub max_transition_error: f64,
    pub lifted_weights: Vec<f64>,
    pub ground_weight_means: Vec<f64>,
    pub max_weight_error: f64,
    pub query_predicate: String,
    pub query_cases: usize,
    pub query_mismatches: usize,
}

pub const VALUE_TOL: f64 = 1e-6;
pub const TRANSITION_TOL: f64 = 1e-9;
pub const WEIGHT_TOL: f64 = 1e-6;

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.max_value_error <= VALUE_TOL
            && self.policy_mismatches == 0
            && self.max_transition_error <= TRANSITION_TOL
            && self.max_weight_error <= WEIGHT_TOL
            && self.query_mismatches == 0
    }
}

/// Lifted index of every ground state.
pub fn lifted_index_of_ground(lm: &LiftedModel, g: &GroundModel) -> Result<Vec<usize>> {
    (0..g.num_states()).map(|x| Ok(lm.state_index(&lm.state_of_ground(&g.state_assignment(x))?))).collect()
}

/// Every lifted `P(s'|s,a)` against the ground distribution of a
/// representative, summed by lifted successor. Returns (checked, max error).
pub fn check_transitions(lm: &LiftedModel, g: &GroundModel) -> Result<(usize, f64)> {
    let map = lifted_index_of_ground(lm, g)?;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for s in lm.states() {
        let x = representative_state(lm, g, &s);
        debug_assert_eq!(map[x], lm.state_index(&s));
        for a in lm.actions(&s) {
            let ga = representative_action(lm, g, &s, &a);
            let mut mapped = vec![0.0; map.iter().max().map_or(0, |m| m + 1)];
            let probs = g.bit_probs(x, ga);
            for (next, &l) in map.iter().enumerate() {
                let p: f64 = probs.iter().enumerate().map(|(j, &p)| if (next >> j) & 1 == 1 { p } else { 1.0 - p }).product();
                mapped[l] += p;
            }
            let lifted = next_state_probs(lm, &s, &a);
            for (p, q) in lifted.iter().zip(&mapped) {
                worst = worst.max((p - q).abs());
            }
            checked += lifted.len();
        }
    }
    Ok((checked, worst))
}

/// Lifted exact values and greedy action sets against ground value
/// iteration. Returns (max value error, mismatching ground states, iterations).
pub fn check_exact(lm: &LiftedModel, g: &GroundModel, eps: f64) -> Result<(f64, usize, usize)> {
    let map = lifted_index_of_ground(lm, g)?;
    let ground = ground_value_iteration(g, eps)?;
    let lifted = planner_exact::plan_exact(lm, &Alpha::Uniform)?;
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    let tol = 1e-6;
    let mut lifted_sets: HashMap<usize, BTreeSet<ActionHistogram>> = HashMap::new();
    for x in 0..g.num_states() {
        worst = worst.max((lifted.values[map[x]] - ground.values[x]).abs());
        let s = lm.state_at(map[x]);
        let lset = lifted_sets.entry(map[x]).or_insert_with(|| {
            let qs: Vec<(ActionHistogram, f64)> = lm
                .actions(&s)
                .into_iter()
                .map(|a| {
                    let q = planner_exact::q_value(lm, &lifted.values, &s, &a);
                    (a, q)
                })
                .collect();
            let best = qs.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
            qs.into_iter().filter(|t| t.1 >= best - tol).map(|t| t.0).collect()
        });
        let state = g.state_assignment(x);
        let qs: Vec<f64> = (0..g.num_actions()).map(|a| ground.q(g, x, a)).collect();
        let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gset = (0..g.num_actions())
            .filter(|&a| qs[a] >= best - tol)
            .map(|a| lm.action_of_ground(&state, &g.action_assignment(a)))
            .collect::<Result<BTreeSet<_>>>()?;
        if gset != *lset {
            mismatches += 1;
        }
    }
    Ok((worst, mismatches, ground.iterations))
}

/// Lifted ALP weights against the means of the ground ALP weights, with
/// lifted `alpha_i = n_i` and ground `alpha' = 1`.
pub fn check_alp(lm: &LiftedModel, g: &GroundModel) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let nb = lm.basis.len();
    let mut counts = vec![0usize; nb];
    for b in &g.basis {
        counts[b.lifted] += 1;
    }
    let ground = ground_alp(g, &vec![1.0; g.basis.len()])?;
    let alpha: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let lifted = planner_approx::plan_approx(lm, &alpha)?;
    let mut means = vec![0.0; nb];
    for (b, w) in g.basis.iter().zip(&ground.weights) {
        means[b.lifted] += w / counts[b.lifted] as f64;
    }
    let err = lifted.weights.iter().zip(&means).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((lifted.weights, means, err))
}

/// Thresholds of the query grid checked against brute force.
pub const QUERY_GRID_T: [f64; 3] = [f64::NEG_INFINITY, 0.0, 2.0];
pub const QUERY_GRID_P: [f64; 3] = [0.0, 0.5, 0.9];

impl GroundBasis {
    pub fn at(&self, x: usize) -> f64 {
        match (&self.constant, &self.local) {
            (Some(c), _) => *c,
            (None, Some(l)) => l.at(x),
            (None, None) => 0.0,
        }
    }
}

/// `count(<first counted prv>,false) >= half`, or `true` when nothing is counted.
pub fn default_query_predicate(lm: &LiftedModel) -> RestrictionPredicate {
    match lm.hists.first() {
        Some(h) => {
            let text = format!("count({},false) >= half", lm.model.prvs[h.prvs[0]].name);
            RestrictionPredicate::parse(lm, &text).expect("well-formed predicate")
        }
        None => RestrictionPredicate::Always,
    }
}

/// Lifted query answers against ground filtering, over the threshold grid in
/// both planning modes. Ground Q values come from value iteration and from
/// the ground ALP. Returns (cases, mismatches).
pub fn check_queries(lm: &LiftedModel, g: &GroundModel, pred: &RestrictionPredicate) -> Result<(usize, usize)> {
    let map = lifted_index_of_ground(lm, g)?;
    let holds: Vec<f64> = (0..g.num_states()).map(|x| if pred.holds_ground(lm, g, x) { 1.0 } else { 0.0 }).collect();
    let gamma = g.model.gamma;

    let ground_vi = ground_value_iteration(g, 1e-10)?;
    let mut plans = vec![(Plan::Exact(planner_exact::plan_exact(lm, &Alpha::Uniform)?), ground_vi.values)];
    if !lm.basis.is_empty() {
        let gw = ground_alp(g, &vec![1.0; g.basis.len()])?;
        let values = (0..g.num_states()).map(|x| g.basis.iter().zip(&gw.weights).map(|(b, w)| w * b.at(x)).sum()).collect();
        let alpha: Vec<f64> = (0..lm.basis.len()).map(|i| g.basis.iter().filter(|b| b.lifted == i).count() as f64).collect();
        plans.push((Plan::Approx(planner_approx::plan_approx(lm, &alpha)?), values));
    }

    let mut cases = 0;
    let mut mismatches = 0;
    for (plan, values) in &plans {
        for x in 0..g.num_states() {
            let s = lm.state_at(map[x]);
            let state = g.state_assignment(x);
            let ground: Vec<(ActionHistogram, f64, f64)> = (0..g.num_actions())
                .map(|a| {
                    let probs = g.bit_probs(x, a);
                    let q = g.reward(x) + gamma * g.expectation(&probs, values);
                    let p = g.expectation(&probs, &holds);
                    Ok((lm.action_of_ground(&state, &g.action_assignment(a))?, q, p))
                })
                .collect::<Result<_>>()?;
            for &t in &QUERY_GRID_T {
                for &p in &QUERY_GRID_P {
                    let lifted: BTreeSet<ActionHistogram> =
                        queries::conditional_action_query(lm, plan, &s, t, pred, p)?.actions.into_iter().map(|qa| qa.action).collect();
                    let brute: BTreeSet<ActionHistogram> = ground
                        .iter()
                        .filter(|(_, q, pr)| *q >= t - queries::THRESHOLD_TOL && *pr >= p - queries::THRESHOLD_TOL)
                        .map(|(a, _, _)| a.clone())
                        .collect();
                    cases += 1;
                    if lifted != brute {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    Ok((cases, mismatches))
}

/// Runs all ground checks on one model.
pub fn check_equivalence(lm: &LiftedModel, g: &GroundModel) -> Result<EquivalenceReport> {
    let (transitions_checked, max_transition_error) = check_transitions(lm, g)?;
    let (max_value_error, policy_mismatches, value_iterations) = check_exact(lm, g, 1e-8)?;
    let (lifted_weights, ground_weight_means, max_weight_error) =
        if lm.basis.is_empty() { (vec![], vec![], 0.0) } else { check_alp(lm, g)? };
    let pred = default_query_predicate(lm);
    let (query_cases, query_mismatches) = check_queries(lm, g, &pred)?;
    Ok(EquivalenceReport {
        ground_states: g.num_states(),
        ground_actions: g.num_actions(),
        lifted_states: lm.num_states() as usize,
        value_iterations,
        max_value_error,
        policy_mismatches,
        transitions_checked,
        max_transition_error,
        lifted_weights,
        ground_weight_means,
        max_weight_error,
        query_predicate: pred.to_string(),
        query_cases,
        query_mismatches,
    })
}

/// Builds both sides from a model and compares them.
pub fn check_model(model: &RfMdpModel) -> Result<EquivalenceReport> {
    let g = GroundModel::new(model)?;
    let lm = LiftedModel::compile(model)?;
    check_equivalence(&lm, &g)
}

/// Clique of a ground state variable, for display.
pub fn clique_of(lm: &LiftedModel, gv: &GroundVar) -> Option<CliqueRef> {
    lm.prv_hist[gv.prv].map(|(k, _)| CliqueRef::Hist(k)).or(lm.prv_prop[gv.prv].map(CliqueRef::Prop))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::epidemic;

    #[test]
    fn ground_layout() {
        let g = GroundModel::new(&epidemic(3)).unwrap();
        assert_eq!(g.state_vars.len(), 7);
        assert_eq!(g.action_vars.len(), 3);
        assert_eq!(g.state_vars[0].name, "Sick(m1)");
        assert_eq!(g.basis.len(), 7);
        assert_eq!(g.reward(0), 3.0);
    }

    #[test]
    fn guard_rejects_large_models() {
        assert!(matches!(GroundModel::new(&epidemic(6)), Err(Error::Guard(_))));
    }

    #[test]
    fn expectation_matches_enumeration() {
        let g = GroundModel::new(&epidemic(2)).unwrap();
        let v: Vec<f64> = (0..g.num_states()).map(|i| (i as f64).sin()).collect();
        for (x, a) in [(0, 0), (7, 1), (31, 3)] {
            let direct: f64 = (0..g.num_states()).map(|n| g.transition_prob(x, a, n) * v[n]).sum();
            assert!((g.expectation(&g.bit_probs(x, a), &v) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn representatives_map_back() {
        let lm = LiftedModel::compile(&epidemic(3)).unwrap();
        let g = GroundModel::new(&epidemic(3)).unwrap();
        for s in lm.states() {
            let x = representative_state(&lm, &g, &s);
            let st = g.state_assignment(x);
            assert_eq!(lm.state_of_ground(&st).unwrap(), s);
            for a in lm.actions(&s) {
                let ga = representative_action(&lm, &g, &s, &a);
                assert_eq!(lm.action_of_ground(&st, &g.action_assignment(ga)).unwrap(), a);
            }
        }
    }

    #[test]
    fn epidemic_two_is_equivalent() {
        let r = check_model(&epidemic(2)).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn query_sets_match_on_three() {
        let m = epidemic(3);
        let lm = LiftedModel::compile(&m).unwrap();
        let g = GroundModel::new(&m).unwrap();
        let pred = default_query_predicate(&lm);
        assert_eq!(pred.to_string(), "count(Sick,false) >= half");
        let (cases, bad) = check_queries(&lm, &g, &pred).unwrap();
        assert_eq!(cases, 2 * 128 * 9);
        assert_eq!(bad, 0);
    }

    #[test]
    fn perturbed_ground_model_is_caught() {
        let mut m = epidemic(2);
        let lm = LiftedModel::compile(&m).unwrap();
        m.parfactors[1].rows[1].prob = 0.5;
        let g = GroundModel::unchecked(&m).unwrap();
        let (_, err) = check_transitions(&lm, &g).unwrap();
        assert!(err > 1e-3);
    }
}
