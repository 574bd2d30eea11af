//! Conditional action queries: the admissible actions whose one-step
//! lookahead value reaches `t` and whose successor satisfies a count
//! predicate with probability at least `p`.
//!
//! Predicates read `count(<clique or prv>, <pattern>) <op> <n|half>`, for
//! example `count(Sick,false) >= half` or `count(Sick+Travel,ft) <= 1`.
//! `count(Sick=false) >= 2` is accepted as well, and `true` always holds.
//! `half` is the ceiling of half the clique's object count. A pattern is a
//! truth value of a single prv, or a bucket label with `*` as wildcard.

use std::fmt;

use serde_json::{json, Value};

use crate::counting::{ActionHistogram, CountingState};
use crate::error::{Error, Result};
use crate::lifted::LiftedModel;
use crate::oracle::GroundModel;
use crate::planner_approx::WeightVector;
use crate::planner_exact::{self, ValueFunction};
use crate::rewards::{reward, Backprojections};
use crate::transition::clique_distribution;

/// Slack for comparing Q values and probabilities against thresholds.
pub const THRESHOLD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Ge,
    Le,
    Eq,
}

impl Comparator {
    fn holds(self, a: u64, b: u64) -> bool {
        match self {
            Comparator::Ge => a >= b,
            Comparator::Le => a <= b,
            Comparator::Eq => a == b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
            Comparator::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    Count(u64),
    Half,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RestrictionPredicate {
    Always,
    Count {
        hist: usize,
        /// Buckets whose objects are counted.
        buckets: Vec<usize>,
        op: Comparator,
        threshold: Threshold,
        /// Count of objects in the clique, for `half`.
        n: u64,
        text: String,
    },
}

impl fmt::Display for RestrictionPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RestrictionPredicate::Always => write!(f, "true"),
            RestrictionPredicate::Count { text, .. } => write!(f, "{text}"),
        }
    }
}

fn bad(text: &str, why: &str) -> Error {
    Error::Predicate(format!("{why} in {text:?}"))
}

fn truth(s: &str) -> Option<bool> {
    match s {
        "true" | "t" | "1" => Some(true),
        "false" | "f" | "0" => Some(false),
        _ => None,
    }
}

impl RestrictionPredicate {
    pub fn parse(lm: &LiftedModel, text: &str) -> Result<RestrictionPredicate> {
        let t = text.trim();
        if t == "true" || t.is_empty() {
            return Ok(RestrictionPredicate::Always);
        }
        let rest = t.strip_prefix("count(").ok_or_else(|| bad(text, "expected count(...)"))?;
        let close = rest.find(')').ok_or_else(|| bad(text, "missing )"))?;
        let (inner, tail) = (&rest[..close], rest[close + 1..].trim());
        let (target, pattern) = match inner.split_once(',') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => inner.split_once('=').map(|(a, b)| (a.trim(), b.trim())).ok_or_else(|| bad(text, "expected a pattern"))?,
        };
        let (op, number) = [(">=", Comparator::Ge), ("≥", Comparator::Ge), ("<=", Comparator::Le), ("≤", Comparator::Le), ("==", Comparator::Eq), ("=", Comparator::Eq)]
            .iter()
            .find_map(|(sym, op)| tail.strip_prefix(sym).map(|n| (*op, n.trim())))
            .ok_or_else(|| bad(text, "expected >=, <= or ="))?;
        let threshold = if number == "half" {
            Threshold::Half
        } else {
            Threshold::Count(number.parse().map_err(|_| bad(text, "expected a count or half"))?)
        };

        let (hist, buckets) = if let Some(k) = lm.hist_by_name(target) {
            let h = &lm.hists[k];
            let value = truth(pattern).filter(|_| h.width == 1);
            let label: Vec<Option<bool>> = match value {
                Some(v) => vec![Some(v)],
                None => pattern
                    .chars()
                    .map(|c| match c {
                        't' => Ok(Some(true)),
                        'f' => Ok(Some(false)),
                        '*' => Ok(None),
                        _ => Err(bad(text, "bad bucket pattern")),
                    })
                    .collect::<Result<_>>()?,
            };
            if label.len() != h.width {
                return Err(bad(text, &format!("pattern needs {} letters", h.width)));
            }
            let buckets = (0..h.buckets)
                .filter(|&b| label.iter().enumerate().all(|(pos, want)| want.is_none_or(|w| h.bit(b, pos) == w)))
                .collect();
            (k, buckets)
        } else {
            let prv = lm.prv_index(target).ok_or_else(|| bad(text, &format!("unknown clique {target}")))?;
            let (k, pos) = lm.prv_hist[prv].ok_or_else(|| bad(text, &format!("{target} is not counted")))?;
            let v = truth(pattern).ok_or_else(|| bad(text, "expected true or false"))?;
            let h = &lm.hists[k];
            (k, (0..h.buckets).filter(|&b| h.bit(b, pos) == v).collect())
        };
        Ok(RestrictionPredicate::Count { hist, buckets, op, threshold, n: lm.hists[hist].n, text: t.to_string() })
    }

    fn bound(&self) -> u64 {
        match self {
            RestrictionPredicate::Count { threshold: Threshold::Count(c), .. } => *c,
            RestrictionPredicate::Count { threshold: Threshold::Half, n, .. } => n.div_ceil(2),
            RestrictionPredicate::Always => 0,
        }
    }

    pub fn holds_histogram(&self, h: &[u64]) -> bool {
        match self {
            RestrictionPredicate::Always => true,
            RestrictionPredicate::Count { buckets, op, .. } => op.holds(buckets.iter().map(|&b| h[b]).sum(), self.bound()),
        }
    }

    pub fn holds(&self, s: &CountingState) -> bool {
        match self {
            RestrictionPredicate::Always => true,
            RestrictionPredicate::Count { hist, .. } => self.holds_histogram(&s.hists[*hist]),
        }
    }

    /// Evaluates on a ground state by counting objects directly.
    pub fn holds_ground(&self, lm: &LiftedModel, g: &GroundModel, x: usize) -> bool {
        let RestrictionPredicate::Count { hist, buckets, op, .. } = self else { return true };
        let h = &lm.hists[*hist];
        let mut bucket = vec![0usize; h.n as usize];
        for (pos, &prv) in h.prvs.iter().enumerate() {
            let mut o = 0;
            for (j, gv) in g.state_vars.iter().enumerate() {
                if gv.prv == prv {
                    bucket[o] |= ((x >> j) & 1) << (h.width - 1 - pos);
                    o += 1;
                }
            }
        }
        let count = bucket.iter().filter(|b| buckets.contains(b)).count() as u64;
        op.holds(count, self.bound())
    }

    pub fn comparator(&self) -> Option<&'static str> {
        match self {
            RestrictionPredicate::Count { op, .. } => Some(op.symbol()),
            RestrictionPredicate::Always => None,
        }
    }
}

/// `P(pred holds in s' | s, a)`.
pub fn restriction_probability(lm: &LiftedModel, s: &CountingState, a: &ActionHistogram, pred: &RestrictionPredicate) -> f64 {
    match pred {
        RestrictionPredicate::Always => 1.0,
        RestrictionPredicate::Count { hist, .. } => {
            let dist = clique_distribution(lm, *hist, s, a);
            let hs = &lm.hists[*hist].histograms;
            dist.iter().zip(hs).filter(|(_, h)| pred.holds_histogram(h)).map(|(p, _)| p).sum::<f64>().min(1.0)
        }
    }
}

pub fn q_value_exact(lm: &LiftedModel, vf: &ValueFunction, s: &CountingState, a: &ActionHistogram) -> f64 {
    planner_exact::q_value(lm, &vf.values, s, a)
}

/// `R(s) + gamma * sum_i w_i G_i^a(s)`
pub fn q_value_approx(lm: &LiftedModel, bps: &Backprojections, weights: &[f64], s: &CountingState, a: &ActionHistogram) -> f64 {
    let g: f64 = weights.iter().zip(&bps.items).map(|(w, bp)| w * bp.lifted(lm, s, a)).sum();
    reward(lm, s) + lm.gamma() * g
}

#[derive(Debug, Clone)]
pub enum Plan {
    Exact(ValueFunction),
    Approx(WeightVector),
}

impl Plan {
    pub fn mode(&self) -> &'static str {
        match self {
            Plan::Exact(_) => "exact",
            Plan::Approx(_) => "approx",
        }
    }

    pub fn from_json(lm: &LiftedModel, v: &Value) -> Result<Plan> {
        match v["kind"].as_str() {
            Some("exact") => Ok(Plan::Exact(ValueFunction::from_json(lm, v)?)),
            Some("approx") => Ok(Plan::Approx(WeightVector::from_json(lm, v)?)),
            _ => Err(Error::Precondition("plan kind must be exact or approx".into())),
        }
    }

    pub fn to_json(&self, lm: &LiftedModel) -> Value {
        match self {
            Plan::Exact(v) => v.to_json(lm),
            Plan::Approx(w) => w.to_json(),
        }
    }

    /// One-step lookahead value of `a` in `s`.
    pub fn q_values(&self, lm: &LiftedModel, s: &CountingState, actions: &[ActionHistogram]) -> Result<Vec<f64>> {
        Ok(match self {
            Plan::Exact(vf) => actions.iter().map(|a| q_value_exact(lm, vf, s, a)).collect(),
            Plan::Approx(w) => {
                let bps = Backprojections::new(lm)?;
                actions.iter().map(|a| q_value_approx(lm, &bps, &w.weights, s, a)).collect()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAction {
    pub action: ActionHistogram,
    pub q: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub mode: &'static str,
    pub state: CountingState,
    pub t: f64,
    pub p: f64,
    pub predicate: String,
    /// Sorted by Q descending; ties keep enumeration order.
    pub actions: Vec<QueryAction>,
}

fn num_json(x: f64) -> Value {
    if x == f64::NEG_INFINITY {
        json!("-inf")
    } else if x == f64::INFINITY {
        json!("inf")
    } else {
        json!(x)
    }
}

/// Reads a threshold given as a number or as `-inf`/`inf`.
pub fn parse_threshold(v: &Value) -> Result<f64> {
    match v {
        Value::Null => Ok(f64::NEG_INFINITY),
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Precondition("bad threshold".into())),
        Value::String(s) => parse_threshold_str(s),
        _ => Err(Error::Precondition("threshold must be a number".into())),
    }
}

pub fn parse_threshold_str(s: &str) -> Result<f64> {
    match s.trim() {
        "-inf" | "-infinity" | "-∞" => Ok(f64::NEG_INFINITY),
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| Error::Precondition(format!("bad threshold {t:?}"))),
    }
}

impl QueryResult {
    pub fn to_json(&self, lm: &LiftedModel) -> Value {
        json!({
            "mode": self.mode,
            "state": lm.state_to_json(&self.state),
            "t": num_json(self.t),
            "p": self.p,
            "predicate": self.predicate,
            "actions": self.actions.iter().map(|a| json!({
                "action": lm.action_to_json(&a.action),
                "q": a.q,
                "probability": a.probability,
            })).collect::<Vec<_>>(),
        })
    }
}

pub fn conditional_action_query(
    lm: &LiftedModel,
    plan: &Plan,
    s: &CountingState,
    t: f64,
    pred: &RestrictionPredicate,
    p: f64,
) -> Result<QueryResult> {
    lm.check_state(s)?;
    let actions = lm.actions(s);
    let qs = plan.q_values(lm, s, &actions)?;
    let mut kept: Vec<QueryAction> = actions
        .into_iter()
        .zip(qs)
        .filter(|(_, q)| *q >= t - THRESHOLD_TOL)
        .map(|(a, q)| {
            let probability = restriction_probability(lm, s, &a, pred);
            QueryAction { action: a, q, probability }
        })
        .filter(|qa| qa.probability >= p - THRESHOLD_TOL)
        .collect();
    kept.sort_by(|x, y| y.q.total_cmp(&x.q));
    Ok(QueryResult { mode: plan.mode(), state: s.clone(), t, p, predicate: pred.to_string(), actions: kept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::epidemic;
    use crate::planner_approx::{default_alpha, plan_approx};
    use crate::planner_exact::{plan_exact, Alpha};

    fn lm3() -> LiftedModel {
        LiftedModel::compile(&epidemic(3)).unwrap()
    }

    #[test]
    fn parse_forms() {
        let lm = lm3();
        assert_eq!(RestrictionPredicate::parse(&lm, "true").unwrap(), RestrictionPredicate::Always);
        let a = RestrictionPredicate::parse(&lm, "count(Sick,false) >= 2").unwrap();
        let b = RestrictionPredicate::parse(&lm, "count(Sick=false) >= 2").unwrap();
        let c = RestrictionPredicate::parse(&lm, "count(Sick,f) >= half").unwrap();
        for p in [&a, &b, &c] {
            assert!(p.holds_histogram(&[2, 1]) && !p.holds_histogram(&[1, 2]));
        }
        for bad in ["count(Cough,false) >= 1", "count(Sick,maybe) >= 1", "count(Sick,false) > 1", "Sick >= 1", "count(Sick,false) >= x"] {
            assert!(matches!(RestrictionPredicate::parse(&lm, bad), Err(Error::Predicate(_))), "{bad}");
        }
    }

    #[test]
    fn probabilities() {
        let lm = lm3();
        let s = lm.state_at(0);
        let a = lm.noop();
        assert_eq!(restriction_probability(&lm, &s, &a, &RestrictionPredicate::Always), 1.0);
        let never = RestrictionPredicate::parse(&lm, "count(Sick,true) >= 4").unwrap();
        assert_eq!(restriction_probability(&lm, &s, &a, &never), 0.0);
        let any = RestrictionPredicate::parse(&lm, "count(Sick,true) >= 0").unwrap();
        assert!((restriction_probability(&lm, &s, &a, &any) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_queries() {
        let lm = lm3();
        let vf = plan_exact(&lm, &Alpha::Uniform).unwrap();
        let plan = Plan::Exact(vf.clone());
        let s = lm.state_at(7);
        let all = conditional_action_query(&lm, &plan, &s, f64::NEG_INFINITY, &RestrictionPredicate::Always, 0.0).unwrap();
        assert_eq!(all.actions.len(), lm.actions(&s).len());
        assert!((all.actions[0].q - vf.value(&lm, &s)).abs() < 1e-6);
        assert!(all.actions.windows(2).all(|w| w[0].q >= w[1].q));
        let none = conditional_action_query(&lm, &plan, &s, all.actions[0].q + 1.0, &RestrictionPredicate::Always, 0.0).unwrap();
        assert!(none.actions.is_empty());
        let v = all.to_json(&lm);
        assert_eq!(v["t"], "-inf");
    }

    #[test]
    fn threshold_monotonicity() {
        let lm = lm3();
        let plan = Plan::Exact(plan_exact(&lm, &Alpha::Uniform).unwrap());
        let pred = RestrictionPredicate::parse(&lm, "count(Sick,false) >= half").unwrap();
        let ts = [f64::NEG_INFINITY, 0.0, 2.0, 40.0];
        let ps = [0.0, 0.5, 0.9];
        for s in lm.states() {
            let set = |t: f64, p: f64| -> Vec<ActionHistogram> {
                conditional_action_query(&lm, &plan, &s, t, &pred, p).unwrap().actions.into_iter().map(|a| a.action).collect()
            };
            for (i, &t) in ts.iter().enumerate() {
                for (j, &p) in ps.iter().enumerate() {
                    let base = set(t, p);
                    if let Some(&t2) = ts.get(i + 1) {
                        assert!(set(t2, p).iter().all(|a| base.contains(a)));
                    }
                    if let Some(&p2) = ps.get(j + 1) {
                        assert!(set(t, p2).iter().all(|a| base.contains(a)));
                    }
                }
            }
        }
    }

    #[test]
    fn approx_q_with_zero_weights_is_reward() {
        let lm = lm3();
        let bps = Backprojections::new(&lm).unwrap();
        let s = lm.state_at(3);
        for a in lm.actions(&s) {
            assert_eq!(q_value_approx(&lm, &bps, &[0.0; 3], &s, &a), reward(&lm, &s));
        }
        let w = plan_approx(&lm, &default_alpha(&lm)).unwrap();
        let plan = Plan::Approx(w);
        let r = conditional_action_query(&lm, &plan, &s, f64::NEG_INFINITY, &RestrictionPredicate::Always, 0.0).unwrap();
        assert_eq!(r.mode, "approx");
        assert_eq!(r.actions.len(), lm.actions(&s).len());
    }
}
