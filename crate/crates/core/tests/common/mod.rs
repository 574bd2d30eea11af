//! Random small models and the invariant checks run against them.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rfmdp::model::{validate, Aggregate, BasisFunction, Logvar, Parfactor, PotentialRow, Prv, RewardFunction, Role, ValueRow};
use rfmdp::oracle::{lifted_index_of_ground, GroundModel};
use rfmdp::transition::next_state_probs;
use rfmdp::{LiftedModel, RfMdpModel};

fn prob<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(0..=20) as f64 / 20.0
}

fn cpt<R: Rng>(rng: &mut R, inputs: usize) -> Vec<PotentialRow> {
    let mut rows = Vec::new();
    for row in 0..1usize << inputs {
        let bits: Vec<bool> = (0..inputs).rev().map(|j| (row >> j) & 1 == 1).collect();
        let p = prob(rng);
        let q: f64 = format!("{:.10}", 1.0 - p).parse().unwrap();
        let mut a = bits.clone();
        a.push(false);
        rows.push(PotentialRow { assignment: a.clone(), prob: q });
        *a.last_mut().unwrap() = true;
        rows.push(PotentialRow { assignment: a, prob: p });
    }
    rows
}

fn reward<R: Rng>(rng: &mut R, name: &str, prv: &str) -> RewardFunction {
    RewardFunction {
        name: name.into(),
        scope: vec![prv.into()],
        rows: vec![
            ValueRow { assignment: vec![false], value: rng.random_range(-3..=3) as f64 },
            ValueRow { assignment: vec![true], value: rng.random_range(-3..=3) as f64 },
        ],
    }
}

/// A model with one logvar of size `1..=4` and at most three PRVs: `X(L)`
/// plus up to two of an action `A(L)`, a propositional `E` and a second
/// counted `Y(L)`.
pub fn random_model<R: Rng>(rng: &mut R) -> RfMdpModel {
    let n = rng.random_range(1..=4u64);
    let mut extras = vec!["A", "E", "Y"];
    extras.shuffle(rng);
    extras.truncate(rng.random_range(0..=2));
    let has = |x: &str| extras.contains(&x);

    let mut prvs = vec![Prv { name: "X".into(), logvars: vec!["L".into()], role: Role::State }];
    if has("Y") {
        prvs.push(Prv { name: "Y".into(), logvars: vec!["L".into()], role: Role::State });
    }
    if has("E") {
        prvs.push(Prv { name: "E".into(), logvars: vec![], role: Role::State });
    }
    if has("A") {
        prvs.push(Prv { name: "A".into(), logvars: vec!["L".into()], role: Role::Action });
    }

    let mut x_inputs = vec!["X".to_string()];
    for extra in ["Y", "E", "A"] {
        if has(extra) && (extra == "A" || rng.random_bool(0.6)) {
            x_inputs.push(extra.into());
        }
    }
    let mut parfactors = vec![Parfactor {
        name: "fX".into(),
        rows: cpt(rng, x_inputs.len()),
        inputs: x_inputs,
        output: "X".into(),
        aggregate: None,
    }];
    if has("Y") {
        let mut inputs = vec!["Y".to_string()];
        if rng.random_bool(0.5) {
            inputs.insert(0, "X".into());
        }
        if has("E") && rng.random_bool(0.5) {
            inputs.push("E".into());
        }
        parfactors.push(Parfactor { name: "fY".into(), rows: cpt(rng, inputs.len()), inputs, output: "Y".into(), aggregate: None });
    }
    if has("E") {
        let f = match rng.random_range(0..3) {
            0 => Parfactor { name: "fE".into(), rows: cpt(rng, 1), inputs: vec!["E".into()], output: "E".into(), aggregate: None },
            1 => Parfactor {
                name: "fE".into(),
                rows: vec![],
                inputs: vec!["X".into()],
                output: "E".into(),
                aggregate: Some(Aggregate::Linear { a: prob(rng) / 2.0, b: prob(rng) / 2.0 }),
            },
            _ => Parfactor {
                name: "fE".into(),
                rows: vec![],
                inputs: vec!["X".into()],
                output: "E".into(),
                aggregate: Some(Aggregate::Table { probs: (0..=n).map(|_| prob(rng)).collect() }),
            },
        };
        parfactors.push(f);
    }

    let rx = reward(rng, "RX", "X");
    let mut rewards = vec![rx.clone()];
    if has("E") && rng.random_bool(0.5) {
        rewards.push(reward(rng, "RE", "E"));
    }
    if has("Y") && rng.random_bool(0.5) {
        rewards.push(reward(rng, "RY", "Y"));
    }
    let mut basis = vec![BasisFunction::constant("h0", 1.0)];
    if rng.random_bool(0.7) {
        basis.push(BasisFunction::from_reward("hX", &rx));
    }

    let model = RfMdpModel {
        name: format!("random-{}", rng.next_u32()),
        gamma: [0.0, 0.5, 0.9][rng.random_range(0..3)],
        logvars: vec![Logvar { name: "L".into(), domain_size: n }],
        prvs,
        parfactors,
        rewards,
        basis,
    };
    let v = validate(&model);
    assert!(v.is_empty(), "generator produced an invalid model: {v:?}\n{}", model.to_json());
    model
}

pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Histograms sum to the population, closed-form counts match enumeration,
/// and actions stay inside the state's buckets.
pub fn check_histograms(lm: &LiftedModel) -> Result<(), String> {
    let mut states = 0u128;
    for s in lm.states() {
        states += 1;
        for (h, counts) in lm.hists.iter().zip(&s.hists) {
            if counts.iter().sum::<u64>() != h.n {
                return Err(format!("histogram {counts:?} of {} does not sum to {}", h.name, h.n));
            }
        }
        let actions = lm.actions(&s);
        if actions.len() as u128 != lm.num_actions(&s) {
            return Err(format!("{} actions enumerated, {} counted", actions.len(), lm.num_actions(&s)));
        }
        for a in &actions {
            if !lm.is_admissible(&s, a) {
                return Err(format!("inadmissible action {a:?} enumerated"));
            }
        }
    }
    if states != lm.num_states() {
        return Err(format!("{states} states enumerated, {} counted", lm.num_states()));
    }
    Ok(())
}

/// Every next-state distribution is nonnegative and sums to one.
pub fn check_normalization(lm: &LiftedModel) -> Result<(), String> {
    for s in lm.states() {
        for a in lm.actions(&s) {
            let p = next_state_probs(lm, &s, &a);
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOL || p.iter().any(|&x| x < -1e-15) {
                return Err(format!("P(.|{s:?},{a:?}) sums to {total}"));
            }
        }
    }
    Ok(())
}

fn permute_bits(vars: &[rfmdp::oracle::GroundVar], perm: &[u64], bits: usize) -> usize {
    let mut out = 0;
    for (j, v) in vars.iter().enumerate() {
        if (bits >> j) & 1 == 1 {
            let target: Vec<u64> = v.tuple.iter().map(|&o| perm[o as usize]).collect();
            let k = vars.iter().position(|w| w.prv == v.prv && w.tuple == target).expect("permuted grounding");
            out |= 1 << k;
        }
    }
    out
}

fn aggregated(g: &GroundModel, map: &[usize], x: usize, a: usize, len: usize) -> Vec<f64> {
    let probs = g.bit_probs(x, a);
    let mut out = vec![0.0; len];
    for (next, &l) in map.iter().enumerate() {
        out[l] += probs.iter().enumerate().map(|(j, &p)| if (next >> j) & 1 == 1 { p } else { 1.0 - p }).product::<f64>();
    }
    out
}

/// Relabelling objects leaves the lifted state, the lifted action and the
/// lifted successor distribution unchanged.
pub fn check_permutation<R: Rng>(model: &RfMdpModel, lm: &LiftedModel, rng: &mut R, samples: usize) -> Result<(), String> {
    let g = GroundModel::new(model).map_err(|e| e.to_string())?;
    let map = lifted_index_of_ground(lm, &g).map_err(|e| e.to_string())?;
    let n = model.logvars[0].domain_size;
    let len = lm.num_states() as usize;
    for _ in 0..samples {
        let x = rng.random_range(0..g.num_states());
        let a = rng.random_range(0..g.num_actions());
        let mut perm: Vec<u64> = (0..n).collect();
        perm.shuffle(rng);
        let px = permute_bits(&g.state_vars, &perm, x);
        let pa = permute_bits(&g.action_vars, &perm, a);
        let lift = |x: usize, a: usize| -> Result<_, String> {
            let s = lm.state_of_ground(&g.state_assignment(x)).map_err(|e| e.to_string())?;
            let act = lm.action_of_ground(&g.state_assignment(x), &g.action_assignment(a)).map_err(|e| e.to_string())?;
            Ok((s, act))
        };
        let (s1, a1) = lift(x, a)?;
        let (s2, a2) = lift(px, pa)?;
        if s1 != s2 || a1 != a2 {
            return Err(format!("relabelling {perm:?} changed the lifted state or action"));
        }
        let d1 = aggregated(&g, &map, x, a, len);
        let d2 = aggregated(&g, &map, px, pa, len);
        let lifted = next_state_probs(lm, &s1, &a1);
        for ((p, q), r) in d1.iter().zip(&d2).zip(&lifted) {
            if (p - q).abs() > NORMALIZATION_TOL || (p - r).abs() > NORMALIZATION_TOL {
                return Err(format!("successor distributions differ under {perm:?}: {p} {q} {r}"));
            }
        }
    }
    Ok(())
}

/// All three checks on one model.
pub fn check_model_invariants<R: Rng>(model: &RfMdpModel, rng: &mut R) -> Result<(), String> {
    let lm = LiftedModel::compile(model).map_err(|e| e.to_string())?;
    check_histograms(&lm)?;
    check_normalization(&lm)?;
    check_permutation(model, &lm, rng, 4)
}
