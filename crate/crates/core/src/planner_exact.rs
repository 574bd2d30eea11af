//! Exact planning: one LP variable per lifted state, one Bellman constraint
//! per (state, action) pair.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::counting::{ActionHistogram, CountingState};
use crate::error::{Error, Result};
use crate::lifted::LiftedModel;
use crate::lp::{self, LinearProgram, LpStatus, Sense, SolveOptions};
use crate::rewards::reward;
use crate::transition::next_state_probs;

#[derive(Debug, Clone, PartialEq)]
pub enum Alpha {
    Uniform,
    PerState(Vec<f64>),
}

impl Alpha {
    pub fn weights(&self, states: usize) -> Result<Vec<f64>> {
        match self {
            Alpha::Uniform => Ok(vec![1.0 / states as f64; states]),
            Alpha::PerState(v) => {
                if v.len() != states || v.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
                    return Err(Error::Precondition(format!("alpha needs {states} positive weights")));
                }
                Ok(v.clone())
            }
        }
    }

    fn label(&self) -> Value {
        match self {
            Alpha::Uniform => json!("uniform"),
            Alpha::PerState(v) => json!(v),
        }
    }
}

/// Number of Bellman constraints, `sum_s |A(s)|`, without building them.
pub fn exact_constraint_count(lm: &LiftedModel) -> u128 {
    lm.states().map(|s| lm.num_actions(&s)).sum()
}

/// Upper bound on `constraints * states`, a proxy for the LP's nonzeros.
pub const MAX_EXACT_NONZEROS: u128 = 50_000_000;

pub fn exact_guard(lm: &LiftedModel) -> Result<()> {
    let states = lm.num_states();
    if states > MAX_EXACT_NONZEROS {
        return Err(Error::Guard(format!("{states} lifted states")));
    }
    let load = exact_constraint_count(lm).saturating_mul(states);
    if load > MAX_EXACT_NONZEROS {
        return Err(Error::Guard(format!("exact LP would hold about {load} coefficients (limit {MAX_EXACT_NONZEROS})")));
    }
    Ok(())
}

pub fn build_exact_lp(lm: &LiftedModel, alpha: &Alpha) -> Result<LinearProgram> {
    exact_guard(lm)?;
    let n = lm.num_states() as usize;
    let alpha = alpha.weights(n)?;
    let gamma = lm.gamma();
    let mut lp = LinearProgram::new(&format!("exact-{}", lm.model.name));
    for i in 0..n {
        lp.add_free(format!("V{i}"));
    }
    lp.objective = alpha.iter().enumerate().map(|(i, &a)| (i, a)).collect();
    for (i, s) in lm.states().enumerate() {
        let r = reward(lm, &s);
        for a in lm.actions(&s) {
            let p = next_state_probs(lm, &s, &a);
            let mut terms: Vec<(usize, f64)> =
                p.iter().enumerate().filter(|(_, &q)| q != 0.0).map(|(j, &q)| (j, -gamma * q)).collect();
            match terms.iter_mut().find(|t| t.0 == i) {
                Some(t) => t.1 += 1.0,
                None => {
                    terms.push((i, 1.0));
                    terms.sort_by_key(|t| t.0);
                }
            }
            terms.retain(|t| t.1 != 0.0);
            lp.add_constraint(terms, Sense::Ge, r);
        }
    }
    Ok(lp)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExactDiagnostics {
    pub states: usize,
    pub actions: usize,
    pub lp_variables: usize,
    pub lp_constraints: usize,
    pub iterations: usize,
    pub build_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    /// Indexed by lifted state index.
    pub values: Vec<f64>,
    pub alpha: Alpha,
    pub fingerprint: String,
    pub diagnostics: ExactDiagnostics,
}

impl ValueFunction {
    pub fn value(&self, lm: &LiftedModel, s: &CountingState) -> f64 {
        self.values[lm.state_index(s)]
    }

    pub fn to_json(&self, lm: &LiftedModel) -> Value {
        let states: Vec<Value> = lm
            .states()
            .zip(&self.values)
            .map(|(s, v)| json!({"state": lm.state_to_json(&s), "value": v}))
            .collect();
        json!({
            "kind": "exact",
            "model": self.fingerprint,
            "alpha": self.alpha.label(),
            "states": states,
            "diagnostics": self.diagnostics,
        })
    }

    pub fn from_json(lm: &LiftedModel, v: &Value) -> Result<ValueFunction> {
        if v["kind"] != "exact" {
            return Err(Error::Precondition("not an exact plan".into()));
        }
        if v["model"] != lm.fingerprint.as_str() {
            return Err(Error::Precondition("plan was computed for a different model".into()));
        }
        let n = lm.num_states() as usize;
        let mut values = vec![f64::NAN; n];
        for entry in v["states"].as_array().ok_or_else(|| Error::Precondition("plan lacks states".into()))? {
            let s = lm.state_from_json(&entry["state"])?;
            values[lm.state_index(&s)] =
                entry["value"].as_f64().ok_or_else(|| Error::Precondition("plan value is not a number".into()))?;
        }
        if values.iter().any(|x| x.is_nan()) {
            return Err(Error::Precondition("plan does not cover every state".into()));
        }
        let alpha = match &v["alpha"] {
            Value::Array(a) => Alpha::PerState(a.iter().filter_map(Value::as_f64).collect()),
            _ => Alpha::Uniform,
        };
        let diagnostics = ExactDiagnostics {
            states: n,
            ..serde_json::from_value::<ExactDiagnosticsIn>(v["diagnostics"].clone()).unwrap_or_default().into()
        };
        Ok(ValueFunction { values, alpha, fingerprint: lm.fingerprint.clone(), diagnostics })
    }
}

#[derive(Debug, Default, serde::Deserialize)]
struct ExactDiagnosticsIn {
    #[serde(default)]
    actions: usize,
    #[serde(default)]
    lp_variables: usize,
    #[serde(default)]
    lp_constraints: usize,
    #[serde(default)]
    iterations: usize,
    #[serde(default)]
    build_seconds: f64,
    #[serde(default)]
    solve_seconds: f64,
}

impl From<ExactDiagnosticsIn> for ExactDiagnostics {
    fn from(d: ExactDiagnosticsIn) -> Self {
        ExactDiagnostics {
            states: 0,
            actions: d.actions,
            lp_variables: d.lp_variables,
            lp_constraints: d.lp_constraints,
            iterations: d.iterations,
            build_seconds: d.build_seconds,
            solve_seconds: d.solve_seconds,
        }
    }
}

pub fn plan_exact(lm: &LiftedModel, alpha: &Alpha) -> Result<ValueFunction> {
    plan_exact_with(lm, alpha, &SolveOptions::default())
}

pub fn plan_exact_with(lm: &LiftedModel, alpha: &Alpha, opts: &SolveOptions) -> Result<ValueFunction> {
    let t0 = Instant::now();
    let lp = build_exact_lp(lm, alpha)?;
    let build_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let sol = lp::solve_with(&lp, opts)?;
    let solve_seconds = t1.elapsed().as_secs_f64();
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpStatus(sol.status));
    }
    Ok(ValueFunction {
        values: sol.values,
        alpha: alpha.clone(),
        fingerprint: lm.fingerprint.clone(),
        diagnostics: ExactDiagnostics {
            states: lp.num_vars(),
            actions: lp.num_constraints(),
            lp_variables: lp.num_vars(),
            lp_constraints: lp.num_constraints(),
            iterations: sol.stats.iterations,
            build_seconds,
            solve_seconds,
        },
    })
}

/// `R(s) + gamma * sum_s' P(s'|s,a) V(s')`
pub fn q_value(lm: &LiftedModel, values: &[f64], s: &CountingState, a: &ActionHistogram) -> f64 {
    let p = next_state_probs(lm, s, a);
    let ev: f64 = p.iter().zip(values).map(|(p, v)| p * v).sum();
    reward(lm, s) + lm.gamma() * ev
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    /// Greedy action per lifted state index.
    pub actions: Vec<ActionHistogram>,
}

impl Policy {
    pub fn to_json(&self, lm: &LiftedModel) -> Value {
        Value::Array(
            lm.states()
                .zip(&self.actions)
                .map(|(s, a)| json!({"state": lm.state_to_json(&s), "action": lm.action_to_json(a)}))
                .collect(),
        )
    }
}

/// Greedy policy; ties go to the first action in enumeration order.
pub fn greedy_policy(lm: &LiftedModel, vf: &ValueFunction) -> Policy {
    let actions = lm
        .states()
        .map(|s| {
            let mut best: Option<(f64, ActionHistogram)> = None;
            for a in lm.actions(&s) {
                let q = q_value(lm, &vf.values, &s, &a);
                if best.as_ref().is_none_or(|(b, _)| q > *b + 1e-12) {
                    best = Some((q, a));
                }
            }
            best.expect("every state admits the no-op").1
        })
        .collect();
    Policy { actions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::epidemic;

    #[test]
    fn epidemic_two_has_eighteen_variables() {
        let lm = LiftedModel::compile(&epidemic(2)).unwrap();
        let lp = build_exact_lp(&lm, &Alpha::Uniform).unwrap();
        assert_eq!(lp.num_vars(), 18);
        assert_eq!(lp.num_constraints() as u128, exact_constraint_count(&lm));
    }

    #[test]
    fn zero_discount_gives_rewards() {
        let mut m = epidemic(3);
        m.gamma = 0.0;
        let lm = LiftedModel::compile(&m).unwrap();
        let vf = plan_exact(&lm, &Alpha::Uniform).unwrap();
        for s in lm.states() {
            assert!((vf.value(&lm, &s) - reward(&lm, &s)).abs() < 1e-7);
        }
        let s = lm.state_from_json(&json!({"Sick": [0, 3], "Travel": [3, 0], "Epidemic": true})).unwrap();
        assert!((vf.value(&lm, &s) + 3.0).abs() < 1e-7);
        let pol = greedy_policy(&lm, &vf);
        assert!(pol.actions.iter().all(|a| *a == lm.noop()));
    }

    #[test]
    fn bellman_feasible_and_tight() {
        let lm = LiftedModel::compile(&epidemic(2)).unwrap();
        let vf = plan_exact(&lm, &Alpha::Uniform).unwrap();
        for s in lm.states() {
            let v = vf.value(&lm, &s);
            let qs: Vec<f64> = lm.actions(&s).iter().map(|a| q_value(&lm, &vf.values, &s, a)).collect();
            assert!(qs.iter().all(|&q| v >= q - 1e-6));
            assert!(qs.iter().any(|&q| (v - q).abs() < 1e-6));
        }
    }

    #[test]
    fn alpha_does_not_change_values() {
        let lm = LiftedModel::compile(&epidemic(2)).unwrap();
        let a = plan_exact(&lm, &Alpha::Uniform).unwrap();
        let w: Vec<f64> = (0..18).map(|i| 1.0 + i as f64).collect();
        let b = plan_exact(&lm, &Alpha::PerState(w)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-6);
        }
        assert_eq!(greedy_policy(&lm, &a), greedy_policy(&lm, &b));
        assert!(plan_exact(&lm, &Alpha::PerState(vec![1.0; 3])).is_err());
    }

    #[test]
    fn plan_json_round_trips() {
        let lm = LiftedModel::compile(&epidemic(2)).unwrap();
        let vf = plan_exact(&lm, &Alpha::Uniform).unwrap();
        let back = ValueFunction::from_json(&lm, &vf.to_json(&lm)).unwrap();
        assert_eq!(back.values, vf.values);
        let other = LiftedModel::compile(&epidemic(3)).unwrap();
        assert!(ValueFunction::from_json(&other, &vf.to_json(&lm)).is_err());
    }
}
