//! Relational factored MDP models: the document schema, validation, and the
//! built-in epidemic benchmark family.
//!
//! A model document is a JSON object. Probabilities are written as decimal
//! strings and parsed to `f64` exactly once; numbers are accepted as well.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for conditional-probability rows summing to one.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Logvar {
    pub name: String,
    pub domain_size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    State,
    Action,
}

/// A parameterized random variable. Every PRV is Boolean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prv {
    pub name: String,
    #[serde(default)]
    pub logvars: Vec<String>,
    pub role: Role,
}

impl Prv {
    pub fn is_propositional(&self) -> bool {
        self.logvars.is_empty()
    }
}

/// One entry of a conditional probability table: `assignment` lists the
/// input values in declared order followed by the output value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialRow {
    pub assignment: Vec<bool>,
    #[serde(with = "decimal")]
    pub prob: f64,
}

/// Potential of a propositional output driven by the true-count `k` of a
/// single parameterized input with `n` groundings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Aggregate {
    /// `p(k) = clamp(a + b * k / n, 0, 1)`
    Linear {
        #[serde(with = "decimal")]
        a: f64,
        #[serde(with = "decimal")]
        b: f64,
    },
    /// Explicit `p(0), ..., p(n)`.
    Table {
        #[serde(with = "decimal_vec")]
        probs: Vec<f64>,
    },
}

impl Aggregate {
    /// Probability that the output is true when `k` of `n` inputs are true.
    pub fn prob_true(&self, k: u64, n: u64) -> f64 {
        match self {
            Aggregate::Linear { a, b } => {
                let frac = if n == 0 { 0.0 } else { k as f64 / n as f64 };
                (a + b * frac).clamp(0.0, 1.0)
            }
            Aggregate::Table { probs } => probs.get(k as usize).copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parfactor {
    pub name: String,
    pub inputs: Vec<String>,
    pub output: String,
    #[serde(default)]
    pub rows: Vec<PotentialRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueRow {
    pub assignment: Vec<bool>,
    pub value: f64,
}

/// Parameterized local reward; its meaning is the sum over all groundings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardFunction {
    pub name: String,
    pub scope: Vec<String>,
    pub rows: Vec<ValueRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisFunction {
    pub name: String,
    #[serde(default)]
    pub scope: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<ValueRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

impl BasisFunction {
    pub fn constant(name: &str, value: f64) -> Self {
        BasisFunction { name: name.into(), scope: vec![], rows: None, constant: Some(value) }
    }

    pub fn from_reward(name: &str, reward: &RewardFunction) -> Self {
        BasisFunction {
            name: name.into(),
            scope: reward.scope.clone(),
            rows: Some(reward.rows.clone()),
            constant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfMdpModel {
    pub name: String,
    #[serde(with = "decimal")]
    pub gamma: f64,
    pub logvars: Vec<Logvar>,
    pub prvs: Vec<Prv>,
    pub parfactors: Vec<Parfactor>,
    #[serde(default)]
    pub rewards: Vec<RewardFunction>,
    #[serde(default)]
    pub basis: Vec<BasisFunction>,
}

impl RfMdpModel {
    pub fn prv(&self, name: &str) -> Option<&Prv> {
        self.prvs.iter().find(|p| p.name == name)
    }

    pub fn logvar(&self, name: &str) -> Option<&Logvar> {
        self.logvars.iter().find(|l| l.name == name)
    }

    /// Number of groundings of a PRV (1 for propositional RVs).
    pub fn grounding_count(&self, prv: &Prv) -> u64 {
        prv.logvars
            .iter()
            .map(|l| self.logvar(l).map_or(0, |l| l.domain_size))
            .product()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<RfMdpModel> {
    let model: RfMdpModel =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let violations = validate(&model);
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(Error::Invalid(violations))
    }
}

pub fn serialize_model(model: &RfMdpModel) -> String {
    model.to_json()
}

/// Lists every violated invariant; empty iff the model is usable.
pub fn validate(model: &RfMdpModel) -> Vec<String> {
    let mut v = basic_violations(model, true);
    if v.is_empty() {
        if let Err(e) = crate::lifted::check_structure(model) {
            v.push(e);
        }
    }
    v
}

/// Checks names, references, and table shapes. With `numeric` unset the
/// probability range and normalization checks are skipped.
pub(crate) fn basic_violations(model: &RfMdpModel, numeric: bool) -> Vec<String> {
    let mut v = Vec::new();
    if !(0.0..=1.0).contains(&model.gamma) {
        v.push("gamma out of range".to_string());
    }

    let mut names = HashSet::new();
    for l in &model.logvars {
        if !names.insert(l.name.as_str()) {
            v.push(format!("duplicate logvar: {}", l.name));
        }
        if l.domain_size < 1 {
            v.push(format!("logvar {} has empty domain", l.name));
        }
    }

    let mut prvs: HashMap<&str, &Prv> = HashMap::new();
    for p in &model.prvs {
        if prvs.insert(p.name.as_str(), p).is_some() {
            v.push(format!("duplicate prv: {}", p.name));
        }
        let mut seen = HashSet::new();
        for l in &p.logvars {
            if model.logvar(l).is_none() {
                v.push(format!("prv {} references unknown logvar {}", p.name, l));
            }
            if !seen.insert(l) {
                v.push(format!("prv {} repeats logvar {}", p.name, l));
            }
        }
    }

    let mut outputs: HashMap<&str, &str> = HashMap::new();
    for f in &model.parfactors {
        let mut ok = true;
        for i in &f.inputs {
            if !prvs.contains_key(i.as_str()) {
                v.push(format!("parfactor {} references unknown prv {}", f.name, i));
                ok = false;
            }
        }
        match prvs.get(f.output.as_str()) {
            None => {
                v.push(format!("parfactor {} references unknown prv {}", f.name, f.output));
                ok = false;
            }
            Some(p) if p.role == Role::Action => {
                v.push(format!("parfactor {} outputs action prv {}", f.name, f.output));
                ok = false;
            }
            Some(_) => {
                if let Some(prev) = outputs.insert(f.output.as_str(), f.name.as_str()) {
                    v.push(format!("duplicate output: {} (parfactors {} and {})", f.output, prev, f.name));
                }
            }
        }
        let mut seen = HashSet::new();
        for i in &f.inputs {
            if !seen.insert(i) {
                v.push(format!("parfactor {} repeats input {}", f.name, i));
                ok = false;
            }
        }
        if ok {
            v.extend(parfactor_violations(model, f, numeric));
        }
    }
    for p in &model.prvs {
        if p.role == Role::State && !outputs.contains_key(p.name.as_str()) {
            v.push(format!("state prv {} has no parfactor", p.name));
        }
    }

    for r in &model.rewards {
        v.extend(table_violations(&prvs, &r.name, &r.scope, &r.rows));
    }
    let mut basis_names = HashSet::new();
    for b in &model.basis {
        if !basis_names.insert(b.name.as_str()) {
            v.push(format!("duplicate basis function: {}", b.name));
        }
        match (&b.rows, b.constant) {
            (Some(rows), None) => v.extend(table_violations(&prvs, &b.name, &b.scope, rows)),
            (None, Some(c)) => {
                if !b.scope.is_empty() {
                    v.push(format!("constant basis {} must have empty scope", b.name));
                }
                if !c.is_finite() {
                    v.push(format!("basis {} has non-finite constant", b.name));
                }
            }
            _ => v.push(format!("basis {} needs exactly one of rows or constant", b.name)),
        }
        if b.scope.len() > 1 {
            v.push(format!("basis {} scope spans multiple parfactor outputs", b.name));
        }
    }
    v
}

fn parfactor_violations(model: &RfMdpModel, f: &Parfactor, numeric: bool) -> Vec<String> {
    let mut v = Vec::new();
    let output = model.prv(&f.output).expect("checked");
    if let Some(agg) = &f.aggregate {
        if !f.rows.is_empty() {
            v.push(format!("aggregate parfactor {} must not list rows", f.name));
        }
        if !output.is_propositional() {
            v.push(format!("aggregate parfactor {} needs a propositional output", f.name));
        }
        let counted: Vec<&Prv> = f.inputs.iter().filter_map(|i| model.prv(i)).collect();
        if counted.len() != 1 || counted[0].is_propositional() || counted[0].role != Role::State {
            v.push(format!("aggregate parfactor {} needs exactly one parameterized state input", f.name));
            return v;
        }
        let n = model.grounding_count(counted[0]);
        match agg {
            Aggregate::Linear { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    v.push(format!("aggregate parfactor {} has non-finite parameters", f.name));
                }
            }
            Aggregate::Table { probs } => {
                if probs.len() as u64 != n + 1 {
                    v.push(format!(
                        "aggregate parfactor {} table has {} entries, expected {}",
                        f.name,
                        probs.len(),
                        n + 1
                    ));
                }
                if numeric && probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    v.push(format!("aggregate parfactor {} probability out of range", f.name));
                }
            }
        }
        return v;
    }

    let width = f.inputs.len() + 1;
    let mut table: HashMap<&[bool], f64> = HashMap::new();
    for row in &f.rows {
        if row.assignment.len() != width {
            v.push(format!(
                "parfactor {} row has {} values, expected {}",
                f.name,
                row.assignment.len(),
                width
            ));
            continue;
        }
        if numeric && !(0.0..=1.0).contains(&row.prob) {
            v.push(format!("parfactor {} probability out of range", f.name));
        }
        if table.insert(&row.assignment, row.prob).is_some() {
            v.push(format!("parfactor {} repeats an assignment", f.name));
        }
    }
    if !v.is_empty() {
        return v;
    }
    for idx in 0..(1usize << f.inputs.len()) {
        let mut key = bits(idx, f.inputs.len());
        key.push(false);
        let lo = table.get(key.as_slice()).copied();
        *key.last_mut().unwrap() = true;
        let hi = table.get(key.as_slice()).copied();
        match (lo, hi) {
            (Some(lo), Some(hi)) => {
                if numeric && ((lo + hi) - 1.0).abs() > NORMALIZATION_TOL {
                    v.push(format!(
                        "parfactor {} row not normalized: {:?} sums to {}",
                        f.name,
                        &key[..f.inputs.len()],
                        lo + hi
                    ));
                }
            }
            _ => v.push(format!("parfactor {} table incomplete at {:?}", f.name, &key[..f.inputs.len()])),
        }
    }
    v
}

fn table_violations(prvs: &HashMap<&str, &Prv>, name: &str, scope: &[String], rows: &[ValueRow]) -> Vec<String> {
    let mut v = Vec::new();
    for s in scope {
        match prvs.get(s.as_str()) {
            None => v.push(format!("{} references unknown prv {}", name, s)),
            Some(p) if p.role != Role::State => v.push(format!("{} scope contains action prv {}", name, s)),
            _ => {}
        }
    }
    let mut seen = HashSet::new();
    for r in rows {
        if r.assignment.len() != scope.len() {
            v.push(format!("{} row has {} values, expected {}", name, r.assignment.len(), scope.len()));
        } else if !seen.insert(r.assignment.clone()) {
            v.push(format!("{} repeats an assignment", name));
        }
        if !r.value.is_finite() {
            v.push(format!("{} has a non-finite value", name));
        }
    }
    if v.is_empty() && seen.len() != 1 << scope.len() {
        v.push(format!("{} table incomplete", name));
    }
    v
}

/// `width` Booleans for `idx`, first position most significant.
pub fn bits(idx: usize, width: usize) -> Vec<bool> {
    (0..width).map(|j| (idx >> (width - 1 - j)) & 1 == 1).collect()
}

/// Inverse of [`bits`].
pub fn index_of_bits(values: &[bool]) -> usize {
    values.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// Which potential drives Epidemic' in the epidemic benchmark.
#[derive(Debug, Clone, PartialEq)]
pub enum EpidemicAggregate {
    Linear { a: f64, b: f64 },
    Table(Vec<f64>),
}

impl Default for EpidemicAggregate {
    fn default() -> Self {
        EpidemicAggregate::Linear { a: 0.1, b: 0.8 }
    }
}

fn cpt_rows(entries: &[(&[bool], &str)]) -> Vec<PotentialRow> {
    let mut rows = Vec::new();
    for (inputs, p_true) in entries {
        let p: f64 = p_true.parse().expect("literal probability");
        // complement written as the decimal a document would carry
        let q: f64 = format!("{:.10}", 1.0 - p).parse().unwrap();
        let mut a = inputs.to_vec();
        a.push(false);
        rows.push(PotentialRow { assignment: a.clone(), prob: q });
        *a.last_mut().unwrap() = true;
        rows.push(PotentialRow { assignment: a, prob: p });
    }
    rows
}

/// The epidemic town with `n` persons: travel bans as concurrent actions.
pub fn epidemic_model(n: u64, f3: EpidemicAggregate) -> Result<RfMdpModel> {
    if n < 1 {
        return Err(Error::Precondition("epidemic needs at least one person".into()));
    }
    let state = |name: &str, lv: &[&str]| Prv {
        name: name.into(),
        logvars: lv.iter().map(|s| s.to_string()).collect(),
        role: Role::State,
    };
    let r1 = RewardFunction {
        name: "R1".into(),
        scope: vec!["Sick".into()],
        rows: vec![
            ValueRow { assignment: vec![false], value: 1.0 },
            ValueRow { assignment: vec![true], value: -1.0 },
        ],
    };
    let r2 = RewardFunction {
        name: "R2".into(),
        scope: vec!["Travel".into()],
        rows: vec![
            ValueRow { assignment: vec![false], value: 0.0 },
            ValueRow { assignment: vec![true], value: 2.0 },
        ],
    };
    let aggregate = match f3 {
        EpidemicAggregate::Linear { a, b } => Aggregate::Linear { a, b },
        EpidemicAggregate::Table(probs) => Aggregate::Table { probs },
    };
    let model = RfMdpModel {
        name: format!("epidemic-{n}"),
        gamma: 0.9,
        logvars: vec![Logvar { name: "M".into(), domain_size: n }],
        prvs: vec![
            state("Sick", &["M"]),
            state("Travel", &["M"]),
            state("Epidemic", &[]),
            Prv { name: "Restrict".into(), logvars: vec!["M".into()], role: Role::Action },
        ],
        parfactors: vec![
            Parfactor {
                name: "f1".into(),
                inputs: vec!["Travel".into(), "Restrict".into()],
                output: "Travel".into(),
                rows: cpt_rows(&[
                    (&[false, false], "0.2"),
                    (&[false, true], "0.1"),
                    (&[true, false], "0.9"),
                    (&[true, true], "0.5"),
                ]),
                aggregate: None,
            },
            Parfactor {
                name: "f2".into(),
                inputs: vec!["Sick".into(), "Epidemic".into()],
                output: "Sick".into(),
                rows: cpt_rows(&[
                    (&[false, false], "0.2"),
                    (&[false, true], "0.8"),
                    (&[true, false], "0.4"),
                    (&[true, true], "0.6"),
                ]),
                aggregate: None,
            },
            Parfactor {
                name: "f3".into(),
                inputs: vec!["Travel".into()],
                output: "Epidemic".into(),
                rows: vec![],
                aggregate: Some(aggregate),
            },
        ],
        basis: vec![
            BasisFunction::constant("h0", 1.0),
            BasisFunction::from_reward("h1", &r1),
            BasisFunction::from_reward("h2", &r2),
        ],
        rewards: vec![r1, r2],
    };
    let violations = validate(&model);
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(Error::Invalid(violations))
    }
}

/// Epidemic family with the default linear aggregate.
pub fn epidemic(n: u64) -> RfMdpModel {
    epidemic_model(n, EpidemicAggregate::default()).expect("epidemic model is valid for n >= 1")
}

mod decimal {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub(super) struct DecimalVisitor;

    impl<'de> Visitor<'de> for DecimalVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a decimal string or number")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            v.trim().parse().map_err(|_| E::custom(format!("invalid decimal {v:?}")))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(DecimalVisitor)
    }
}

mod decimal_vec {
    use serde::de::{SeqAccess, Visitor};
    use serde::ser::SerializeSeq;
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&x.to_string())?;
        }
        seq.end()
    }

    struct Seq;

    impl<'de> Visitor<'de> for Seq {
        type Value = Vec<f64>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a list of decimals")
        }

        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Vec<f64>, A::Error> {
            struct One(f64);
            impl<'de> serde::Deserialize<'de> for One {
                fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                    d.deserialize_any(super::decimal::DecimalVisitor).map(One)
                }
            }
            let mut out = Vec::new();
            while let Some(One(x)) = seq.next_element()? {
                out.push(x);
            }
            Ok(out)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        d.deserialize_seq(Seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(model: &RfMdpModel, name: &str) -> Parfactor {
        model.parfactors.iter().find(|p| p.name == name).unwrap().clone()
    }

    fn prob(pf: &Parfactor, assignment: &[bool]) -> f64 {
        pf.rows.iter().find(|r| r.assignment == assignment).unwrap().prob
    }

    #[test]
    fn epidemic_reproduces_tables() {
        let m = epidemic(3);
        let names: Vec<_> = m.prvs.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["Sick", "Travel", "Epidemic", "Restrict"]);
        let f1 = f(&m, "f1");
        assert_eq!(prob(&f1, &[true, true, true]), 0.5);
        assert_eq!(prob(&f1, &[false, false, true]), 0.2);
        assert_eq!(prob(&f1, &[false, true, true]), 0.1);
        assert_eq!(prob(&f1, &[true, false, true]), 0.9);
        let f2 = f(&m, "f2");
        assert_eq!(prob(&f2, &[false, true, true]), 0.8);
        assert_eq!(prob(&f2, &[true, true, true]), 0.6);
        assert_eq!(prob(&f2, &[true, false, true]), 0.4);
        assert_eq!(prob(&f2, &[false, false, true]), 0.2);
        assert_eq!(m.gamma, 0.9);
    }

    #[test]
    fn default_aggregate_is_linear_and_normalized() {
        let m = epidemic(3);
        let agg = f(&m, "f3").aggregate.unwrap();
        for k in 0..=3 {
            let p = agg.prob_true(k, 3);
            assert!((p - (0.1 + 0.8 * k as f64 / 3.0)).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&p));
        }
        assert!((agg.prob_true(3, 3) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_identity() {
        let m = epidemic(3);
        let text = serialize_model(&m);
        assert_eq!(parse_model(&text).unwrap(), m);
        let table = epidemic_model(2, EpidemicAggregate::Table(vec![0.05, 0.5, 0.95])).unwrap();
        assert_eq!(parse_model(&serialize_model(&table)).unwrap(), table);
    }

    #[test]
    fn probabilities_are_decimal_strings() {
        let text = serialize_model(&epidemic(2));
        assert!(text.contains("\"prob\": \"0.9\""));
        assert!(text.contains("\"kind\": \"linear\""));
    }

    #[test]
    fn unnormalized_row_is_rejected() {
        let mut m = epidemic(3);
        m.parfactors[0].rows[1].prob = 0.1; // row (f,f): 0.8 + 0.1
        match parse_model(&serialize_model(&m)) {
            Err(Error::Invalid(v)) => assert!(v.iter().any(|s| s.contains("not normalized")), "{v:?}"),
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn schema_errors_are_reported() {
        assert!(matches!(parse_model("{\"name\": 3}"), Err(Error::Schema(_))));
        let mut doc: serde_json::Value = serde_json::from_str(&serialize_model(&epidemic(2))).unwrap();
        doc["parfactors"][0]["rows"][0]["prob"] = serde_json::json!("zero point one");
        assert!(matches!(parse_model(&doc.to_string()), Err(Error::Schema(_))));
    }

    #[test]
    fn validate_reports_violations() {
        assert!(validate(&epidemic(3)).is_empty());

        let mut m = epidemic(3);
        m.gamma = 1.2;
        assert_eq!(validate(&m), vec!["gamma out of range".to_string()]);

        let mut m = epidemic(3);
        let mut dup = m.parfactors[0].clone();
        dup.name = "f1b".into();
        m.parfactors.push(dup);
        let v = validate(&m);
        assert!(v.iter().any(|s| s.starts_with("duplicate output")), "{v:?}");

        let mut m = epidemic(3);
        m.parfactors[1].inputs[1] = "Nope".into();
        assert!(validate(&m).iter().any(|s| s.contains("unknown prv Nope")));
    }

    #[test]
    fn epidemic_rejects_empty_town() {
        assert!(epidemic_model(0, EpidemicAggregate::default()).is_err());
    }

    #[test]
    fn bit_helpers_are_inverse() {
        for i in 0..16 {
            assert_eq!(index_of_bits(&bits(i, 4)), i);
        }
        assert_eq!(bits(2, 2), vec![true, false]);
    }
}
