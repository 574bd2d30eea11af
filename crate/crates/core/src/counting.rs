//! Histograms, lifted states, and action histograms.

use std::collections::HashMap;

use serde_json::Value;

use crate::error::Result;
use crate::lifted::LiftedModel;
use crate::numeric::binomial_u128;

/// One histogram per counting clique (in clique order, restricted to
/// parameterized cliques) plus one Boolean per propositional RV.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CountingState {
    pub hists: Vec<Vec<u64>>,
    pub props: Vec<bool>,
}

/// Per action group: counts for every (source bucket, non-all-false action
/// assignment) cell, flattened bucket-major. The all-false cell of each
/// bucket holds the remaining objects and is not stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionHistogram {
    pub cells: Vec<Vec<u64>>,
}

/// `C(n + buckets - 1, buckets - 1)`
pub fn num_histograms(buckets: usize, n: u64) -> u128 {
    if buckets == 0 {
        return (n == 0) as u128;
    }
    binomial_u128(n + buckets as u64 - 1, buckets as u64 - 1)
}

/// All weak compositions of `n` into `buckets` parts, lexicographic.
pub fn enumerate_histograms(buckets: usize, n: u64) -> Vec<Vec<u64>> {
    assert!(buckets >= 1, "at least one bucket");
    let mut out = Vec::new();
    let mut cur = vec![0u64; buckets];
    fill(&mut cur, 0, n, &mut out);
    out
}

fn fill(cur: &mut Vec<u64>, pos: usize, remaining: u64, out: &mut Vec<Vec<u64>>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for v in 0..=remaining {
        cur[pos] = v;
        fill(cur, pos + 1, remaining - v, out);
    }
}

/// All vectors of `parts` nonnegative integers with sum at most `bound`,
/// lexicographic.
pub fn bounded_compositions(parts: usize, bound: u64) -> Vec<Vec<u64>> {
    if parts == 0 {
        return vec![vec![]];
    }
    // a slack part turns "sum <= bound" into a weak composition
    let mut out: Vec<Vec<u64>> = enumerate_histograms(parts + 1, bound)
        .into_iter()
        .map(|mut v| {
            v.pop();
            v
        })
        .collect();
    out.sort();
    out
}

pub fn state_space(lm: &LiftedModel) -> impl Iterator<Item = CountingState> + '_ {
    lm.states()
}

pub fn action_space(lm: &LiftedModel, s: &CountingState) -> Vec<ActionHistogram> {
    lm.actions(s)
}

pub fn state_of_ground(lm: &LiftedModel, ground: &HashMap<String, Vec<bool>>) -> Result<CountingState> {
    lm.state_of_ground(ground)
}

impl CountingState {
    pub fn to_json(&self, lm: &LiftedModel) -> Value {
        lm.state_to_json(self)
    }
}

impl ActionHistogram {
    pub fn to_json(&self, lm: &LiftedModel) -> Value {
        lm.action_to_json(self)
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }
}
