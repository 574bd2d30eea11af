//! Lifted transition probabilities.
//!
//! Objects move independently given the current state, so every clique's
//! next histogram is a sum of per-cell multinomials, and distinct cliques
//! are independent. The joint probability is the product over cliques.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::counting::{enumerate_histograms, ActionHistogram, CountingState};
use crate::error::{Error, Result};
use crate::lifted::{CliqueRef, LiftedModel, PropDriver};
use crate::numeric::{binomial_term, multinomial_term, KahanSum};

/// Distribution of one object of source bucket `b` under action assignment
/// `alpha` over the buckets of histogram clique `k`.
pub fn object_distribution(lm: &LiftedModel, k: usize, b: usize, alpha: usize, props: &[bool]) -> Vec<f64> {
    let clique = &lm.hists[k];
    let src_width = lm.hists[clique.source].width;
    let q = clique.group.map_or(0, |g| lm.groups[g].q());
    let member: Vec<(f64, f64)> = clique
        .cpts
        .iter()
        .map(|cpt| {
            let row = cpt.row(src_width, b, q, alpha, props);
            (cpt.p_false[row], cpt.p_true[row])
        })
        .collect();
    (0..clique.buckets)
        .map(|o| {
            member
                .iter()
                .enumerate()
                .map(|(pos, &(f, t))| if clique.bit(o, pos) { t } else { f })
                .product()
        })
        .collect()
}

/// The (object count, per-object distribution) cells feeding clique `k`.
pub fn cells(lm: &LiftedModel, k: usize, s: &CountingState, a: &ActionHistogram) -> Vec<(u64, Vec<f64>)> {
    let clique = &lm.hists[k];
    let src = &s.hists[clique.source];
    let mut out = Vec::new();
    for b in 0..src.len() {
        match clique.group {
            None => {
                if src[b] > 0 {
                    out.push((src[b], object_distribution(lm, k, b, 0, &s.props)));
                }
            }
            Some(g) => {
                for alpha in 0..=lm.groups[g].cells_per_bucket() {
                    let c = lm.cell_count(g, s, a, b, alpha);
                    if c > 0 {
                        out.push((c, object_distribution(lm, k, b, alpha, &s.props)));
                    }
                }
            }
        }
    }
    out
}

/// Next-histogram distribution of clique `k`, indexed by histogram rank.
pub fn clique_distribution(lm: &LiftedModel, k: usize, s: &CountingState, a: &ActionHistogram) -> Vec<f64> {
    let clique = &lm.hists[k];
    let cells = cells(lm, k, s, a);
    if clique.buckets == 2 {
        // dist[t] = P(t objects true)
        let mut dist = vec![1.0];
        for (count, pi) in &cells {
            let pmf: Vec<f64> = (0..=*count).map(|t| binomial_term(*count, t, pi[1], pi[0])).collect();
            dist = convolve(&dist, &pmf);
        }
        let n = clique.n as usize;
        return (0..=n).map(|rank| dist.get(n - rank).copied().unwrap_or(0.0)).collect();
    }
    let mut dist: BTreeMap<Vec<u64>, KahanSum> = BTreeMap::new();
    dist.insert(vec![0; clique.buckets], KahanSum::from_iter([1.0]));
    for (count, pi) in &cells {
        let splits: Vec<(Vec<u64>, f64)> = enumerate_histograms(clique.buckets, *count)
            .into_iter()
            .map(|t| {
                let p = multinomial_term(&t, pi);
                (t, p)
            })
            .filter(|(_, p)| *p != 0.0)
            .collect();
        let mut next: BTreeMap<Vec<u64>, KahanSum> = BTreeMap::new();
        for (h, p) in &dist {
            let p = p.value();
            for (t, q) in &splits {
                let key: Vec<u64> = h.iter().zip(t).map(|(x, y)| x + y).collect();
                next.entry(key).or_default().add(p * q);
            }
        }
        dist = next;
    }
    let mut out = vec![0.0; clique.histograms.len()];
    for (h, p) in dist {
        out[clique.rank(&h).expect("histogram sums to n")] = p.value();
    }
    out
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![KahanSum::new(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j].add(x * y);
        }
    }
    out.into_iter().map(|k| k.value()).collect()
}

/// Probability that exactly `targets` objects land in each output bucket,
/// by enumerating every split of every cell with pruning on what remains.
pub fn clique_histogram_prob(lm: &LiftedModel, k: usize, s: &CountingState, a: &ActionHistogram, next: &[u64]) -> f64 {
    let cells = cells(lm, k, s, a);
    let mut remaining_capacity: Vec<u64> = vec![0; cells.len() + 1];
    for i in (0..cells.len()).rev() {
        remaining_capacity[i] = remaining_capacity[i + 1] + cells[i].0;
    }
    if next.iter().sum::<u64>() != remaining_capacity[0] {
        return 0.0;
    }
    let mut acc = KahanSum::new();
    split_rec(&cells, 0, next.to_vec(), 1.0, &mut acc);
    acc.value()
}

fn split_rec(cells: &[(u64, Vec<f64>)], i: usize, remaining: Vec<u64>, prob: f64, acc: &mut KahanSum) {
    if i == cells.len() {
        if remaining.iter().all(|&r| r == 0) {
            acc.add(prob);
        }
        return;
    }
    let (count, pi) = &cells[i];
    if i + 1 == cells.len() {
        // the last cell must take exactly what remains
        if remaining.iter().sum::<u64>() == *count {
            acc.add(prob * multinomial_term(&remaining, pi));
        }
        return;
    }
    for t in enumerate_histograms(remaining.len(), *count) {
        if t.iter().zip(&remaining).any(|(x, r)| x > r) {
            continue;
        }
        let p = multinomial_term(&t, pi);
        if p == 0.0 {
            continue;
        }
        let rest = remaining.iter().zip(&t).map(|(r, x)| r - x).collect();
        split_rec(cells, i + 1, rest, prob * p, acc);
    }
}

/// Probability that `next_true_count` groundings of parameterized `output`
/// are true in the next state, by enumerating per-cell true counts `t_i`
/// with `sum t_i = next_true_count`.
pub fn clique_transition_prob(
    lm: &LiftedModel,
    output: &str,
    s: &CountingState,
    a: &ActionHistogram,
    next_true_count: u64,
) -> Result<f64> {
    let prv = lm.prv_index(output).ok_or_else(|| Error::Precondition(format!("unknown prv {output}")))?;
    let (k, pos) = lm.prv_hist[prv]
        .ok_or_else(|| Error::Precondition(format!("{output} is not parameterized; use the aggregate path")))?;
    lm.check_state(s)?;
    lm.check_action(s, a)?;
    let clique = &lm.hists[k];
    if next_true_count > clique.n {
        return Err(Error::Precondition(format!("next count {next_true_count} exceeds {}", clique.n)));
    }
    let marginals: Vec<(u64, f64, f64)> = cells(lm, k, s, a)
        .into_iter()
        .map(|(c, pi)| {
            let (mut f, mut t) = (0.0, 0.0);
            for (o, p) in pi.iter().enumerate() {
                if clique.bit(o, pos) {
                    t += p;
                } else {
                    f += p;
                }
            }
            (c, t, f)
        })
        .collect();
    let mut capacity = vec![0u64; marginals.len() + 1];
    for i in (0..marginals.len()).rev() {
        capacity[i] = capacity[i + 1] + marginals[i].0;
    }
    let mut acc = KahanSum::new();
    true_count_rec(&marginals, &capacity, 0, next_true_count, 1.0, &mut acc);
    Ok(acc.value())
}

fn true_count_rec(cells: &[(u64, f64, f64)], capacity: &[u64], i: usize, remaining: u64, prob: f64, acc: &mut KahanSum) {
    if i == cells.len() {
        if remaining == 0 {
            acc.add(prob);
        }
        return;
    }
    let (k, pt, pf) = cells[i];
    let lo = remaining.saturating_sub(capacity[i + 1]);
    let hi = remaining.min(k);
    for t in lo..=hi {
        let p = binomial_term(k, t, pt, pf);
        if p != 0.0 {
            true_count_rec(cells, capacity, i + 1, remaining - t, prob * p, acc);
        }
    }
}

/// `[P(false), P(true)]` for propositional RV `i` in the next state.
pub fn prop_distribution(lm: &LiftedModel, i: usize, s: &CountingState) -> [f64; 2] {
    match &lm.props[i].driver {
        PropDriver::Cpt(cpt) => {
            let row = cpt.row(1, 0, 0, 0, &s.props);
            [cpt.p_false[row], cpt.p_true[row]]
        }
        PropDriver::Aggregate { hist, pos, n, aggregate } => {
            let h = &lm.hists[*hist];
            let k: u64 = s.hists[*hist].iter().enumerate().filter(|(b, _)| h.bit(*b, *pos)).map(|(_, &c)| c).sum();
            let p = aggregate.prob_true(k, *n);
            [1.0 - p, p]
        }
    }
}

/// Probability of `next_value` for an aggregate-driven propositional RV.
pub fn aggregate_transition_prob(lm: &LiftedModel, output: &str, s: &CountingState, next_value: bool) -> Result<f64> {
    let i = lm.prop_by_name(output).ok_or_else(|| Error::Precondition(format!("{output} is not propositional")))?;
    if !matches!(lm.props[i].driver, PropDriver::Aggregate { .. }) {
        return Err(Error::Precondition(format!("{output} is not driven by an aggregate")));
    }
    Ok(prop_distribution(lm, i, s)[next_value as usize])
}

pub fn joint_transition_prob(lm: &LiftedModel, s: &CountingState, a: &ActionHistogram, next: &CountingState) -> Result<f64> {
    lm.check_state(s)?;
    lm.check_action(s, a)?;
    lm.check_state(next)?;
    let mut p = 1.0;
    for k in 0..lm.hists.len() {
        p *= clique_histogram_prob(lm, k, s, a, &next.hists[k]);
    }
    for i in 0..lm.props.len() {
        p *= prop_distribution(lm, i, s)[next.props[i] as usize];
    }
    Ok(p)
}

/// Dense next-state distribution indexed by lifted state index.
pub fn next_state_probs(lm: &LiftedModel, s: &CountingState, a: &ActionHistogram) -> Vec<f64> {
    let mut out = vec![1.0];
    for &c in &lm.order {
        let d: Vec<f64> = match c {
            CliqueRef::Hist(k) => clique_distribution(lm, k, s, a),
            CliqueRef::Prop(i) => prop_distribution(lm, i, s).to_vec(),
        };
        let mut next = Vec::with_capacity(out.len() * d.len());
        for &p in &out {
            for &q in &d {
                next.push(p * q);
            }
        }
        out = next;
    }
    out
}

/// Next-state distribution over the whole state space, in index order.
pub fn next_state_distribution(lm: &LiftedModel, s: &CountingState, a: &ActionHistogram) -> Result<Vec<(CountingState, f64)>> {
    lm.check_state(s)?;
    lm.check_action(s, a)?;
    Ok(next_state_probs(lm, s, a).into_iter().enumerate().map(|(i, p)| (lm.state_at(i), p)).collect())
}

pub fn sample_next(lm: &LiftedModel, s: &CountingState, a: &ActionHistogram, seed: u64) -> Result<CountingState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_next_with(lm, s, a, &mut rng)
}

/// Draws each clique independently from its next-histogram distribution.
pub fn sample_next_with<R: Rng>(lm: &LiftedModel, s: &CountingState, a: &ActionHistogram, rng: &mut R) -> Result<CountingState> {
    lm.check_state(s)?;
    lm.check_action(s, a)?;
    let mut next = s.clone();
    for k in 0..lm.hists.len() {
        let d = clique_distribution(lm, k, s, a);
        next.hists[k] = lm.hists[k].histograms[draw(&d, rng)].clone();
    }
    for i in 0..lm.props.len() {
        next.props[i] = draw(&prop_distribution(lm, i, s), rng) == 1;
    }
    Ok(next)
}

fn draw<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::epidemic;
    use serde_json::json;

    fn setup(n: u64) -> LiftedModel {
        LiftedModel::compile(&epidemic(n)).unwrap()
    }

    #[test]
    fn three_travellers_keep_travelling() {
        let lm = setup(3);
        let s = lm.state_from_json(&json!({"Sick": [3, 0], "Travel": [0, 3], "Epidemic": false})).unwrap();
        let p = clique_transition_prob(&lm, "Travel", &s, &lm.noop(), 3).unwrap();
        assert!((p - 0.729).abs() < 1e-12);
    }

    #[test]
    fn one_sick_recovers_without_epidemic() {
        let lm = setup(3);
        let s = lm.state_from_json(&json!({"Sick": [2, 1], "Travel": [3, 0], "Epidemic": false})).unwrap();
        let p = clique_transition_prob(&lm, "Sick", &s, &lm.noop(), 0).unwrap();
        assert!((p - 0.384).abs() < 1e-12);
    }

    #[test]
    fn clique_routes_agree_and_normalize() {
        let lm = setup(3);
        for s in lm.states() {
            for a in lm.actions(&s) {
                for k in 0..lm.hists.len() {
                    let d = clique_distribution(&lm, k, &s, &a);
                    let total: f64 = d.iter().sum();
                    assert!((total - 1.0).abs() < 1e-12);
                    for (r, h) in lm.hists[k].histograms.iter().enumerate() {
                        let direct = clique_histogram_prob(&lm, k, &s, &a, h);
                        assert!((direct - d[r]).abs() < 1e-12);
                        let name = &lm.hists[k].name;
                        let by_count = clique_transition_prob(&lm, name, &s, &a, h[1]).unwrap();
                        assert!((by_count - d[r]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn aggregate_probabilities() {
        let lm = setup(3);
        let s = lm.state_from_json(&json!({"Sick": [3, 0], "Travel": [0, 3], "Epidemic": false})).unwrap();
        assert!((aggregate_transition_prob(&lm, "Epidemic", &s, true).unwrap() - 0.9).abs() < 1e-15);
        let s0 = lm.state_from_json(&json!({"Sick": [3, 0], "Travel": [3, 0], "Epidemic": true})).unwrap();
        let t = aggregate_transition_prob(&lm, "Epidemic", &s0, true).unwrap();
        let f = aggregate_transition_prob(&lm, "Epidemic", &s0, false).unwrap();
        assert!((t - 0.1).abs() < 1e-15);
        assert!((t + f - 1.0).abs() < 1e-15);
        assert!(clique_transition_prob(&lm, "Epidemic", &s0, &lm.noop(), 0).is_err());
    }

    #[test]
    fn joint_distribution_is_normalized() {
        let lm = setup(3);
        let s = lm.state_at(7);
        for a in lm.actions(&s) {
            let dist = next_state_distribution(&lm, &s, &a).unwrap();
            assert_eq!(dist.len(), 32);
            let total: f64 = dist.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for (t, p) in dist.iter().step_by(5) {
                assert!((joint_transition_prob(&lm, &s, &a, t).unwrap() - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_impossible_next_state_and_bad_action() {
        let lm = setup(3);
        let s = lm.state_at(0);
        let mut bad = s.clone();
        bad.hists[0] = vec![0, 4];
        assert!(joint_transition_prob(&lm, &s, &lm.noop(), &bad).is_err());
        let a = lm.action_from_json(&json!({"Restrict": {"ft": 3}})).unwrap();
        // state 0: nobody travels is false -> Travel [0,3], so no non-travellers
        assert!(joint_transition_prob(&lm, &s, &a, &s).is_err());
    }

    #[test]
    fn gamma_does_not_matter() {
        let mut m = epidemic(3);
        let lm1 = LiftedModel::compile(&m).unwrap();
        m.gamma = 0.3;
        let lm2 = LiftedModel::compile(&m).unwrap();
        let s = lm1.state_at(11);
        assert_eq!(next_state_probs(&lm1, &s, &lm1.noop()), next_state_probs(&lm2, &s, &lm2.noop()));
    }

    #[test]
    fn sampling_is_reproducible() {
        let lm = setup(3);
        let s = lm.state_at(5);
        let a = lm.noop();
        assert_eq!(sample_next(&lm, &s, &a, 42).unwrap(), sample_next(&lm, &s, &a, 42).unwrap());
    }
}
