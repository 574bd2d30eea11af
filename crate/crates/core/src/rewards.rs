//! Rewards, basis functions, and backprojections.

use crate::counting::{ActionHistogram, CountingState};
use crate::error::{Error, Result};
use crate::lifted::{CompiledBasis, InputSource, LiftedModel, LocalFunction, PropDriver};
use crate::numeric::KahanSum;

/// Value of a local function summed over all its groundings.
pub fn local_value(lm: &LiftedModel, f: &LocalFunction, s: &CountingState) -> f64 {
    match f.hist {
        Some(k) => {
            let width = lm.hists[k].width;
            s.hists[k].iter().enumerate().map(|(b, &c)| c as f64 * f.entry(width, b, &s.props)).sum()
        }
        None => f.entry(0, 0, &s.props),
    }
}

pub fn reward(lm: &LiftedModel, s: &CountingState) -> f64 {
    lm.rewards.iter().map(|r| local_value(lm, r, s)).sum()
}

pub fn basis_value(lm: &LiftedModel, basis: usize, s: &CountingState) -> f64 {
    match &lm.basis[basis] {
        CompiledBasis::Constant(c) => *c,
        CompiledBasis::Local(f) => local_value(lm, f, s),
    }
}

pub fn basis_index(lm: &LiftedModel, name: &str) -> Option<usize> {
    lm.model.basis.iter().position(|b| b.name == name)
}

/// Backprojection of one basis function through the transition model.
#[derive(Debug, Clone)]
pub enum Backprojection {
    Constant(f64),
    /// Basis over a parameterized PRV: `table[(b * 2^q + alpha) * 2^|props| + prow]`.
    Bucket {
        source: usize,
        group: Option<usize>,
        q: usize,
        props: Vec<usize>,
        table: Vec<f64>,
        action_independent: bool,
    },
    /// Basis over a propositional RV with a table potential.
    Prop { props: Vec<usize>, table: Vec<f64> },
    /// Basis over an aggregate-driven propositional RV: `table[k]`.
    Aggregate { hist: usize, pos: usize, table: Vec<f64> },
}

fn prop_row(props: &[usize], values: &[bool]) -> usize {
    props.iter().fold(0, |acc, &i| (acc << 1) | values[i] as usize)
}

impl Backprojection {
    pub fn build(lm: &LiftedModel, basis: usize) -> Result<Backprojection> {
        let f = match &lm.basis[basis] {
            CompiledBasis::Constant(c) => return Ok(Backprojection::Constant(*c)),
            CompiledBasis::Local(f) => f,
        };
        let h = |x: bool| f.table[x as usize];
        match (f.hist, f.scope.as_slice()) {
            (Some(k), [InputSource::Bucket(pos)]) => {
                let clique = &lm.hists[k];
                let cpt = &clique.cpts[*pos];
                let src_width = lm.hists[clique.source].width;
                let q = clique.group.map_or(0, |g| lm.groups[g].q());
                let props: Vec<usize> = cpt
                    .inputs
                    .iter()
                    .filter_map(|s| if let InputSource::Prop(i) = s { Some(*i) } else { None })
                    .collect();
                let mut values = vec![false; lm.props.len()];
                let mut table = Vec::new();
                for b in 0..(1usize << src_width) {
                    for alpha in 0..(1usize << q) {
                        for prow in 0..(1usize << props.len()) {
                            for (j, &i) in props.iter().enumerate() {
                                values[i] = (prow >> (props.len() - 1 - j)) & 1 == 1;
                            }
                            let row = cpt.row(src_width, b, q, alpha, &values);
                            table.push(cpt.p_true[row] * h(true) + cpt.p_false[row] * h(false));
                        }
                    }
                }
                let action_independent = !cpt.inputs.iter().any(|s| matches!(s, InputSource::Action(_)));
                Ok(Backprojection::Bucket { source: clique.source, group: clique.group, q, props, table, action_independent })
            }
            (None, [InputSource::Prop(i)]) => match &lm.props[*i].driver {
                PropDriver::Cpt(cpt) => {
                    let props: Vec<usize> = cpt
                        .inputs
                        .iter()
                        .map(|s| match s {
                            InputSource::Prop(i) => *i,
                            _ => unreachable!("propositional tables read propositions"),
                        })
                        .collect();
                    let table = (0..1usize << props.len())
                        .map(|row| cpt.p_true[row] * h(true) + cpt.p_false[row] * h(false))
                        .collect();
                    Ok(Backprojection::Prop { props, table })
                }
                PropDriver::Aggregate { hist, pos, n, aggregate } => {
                    let table = (0..=*n)
                        .map(|k| {
                            let p = aggregate.prob_true(k, *n);
                            p * h(true) + (1.0 - p) * h(false)
                        })
                        .collect();
                    Ok(Backprojection::Aggregate { hist: *hist, pos: *pos, table })
                }
            },
            _ => Err(Error::Unsupported(format!("basis {} is not covered by one parfactor output", f.name))),
        }
    }

    pub fn action_independent(&self) -> bool {
        match self {
            Backprojection::Bucket { action_independent, .. } => *action_independent,
            _ => true,
        }
    }

    /// `g^alpha(x)` for one object of source bucket `bucket`.
    pub fn propositional(&self, bucket: usize, alpha: usize, props: &[bool]) -> f64 {
        match self {
            Backprojection::Constant(c) => *c,
            Backprojection::Bucket { q, props: p, table, .. } => {
                table[((bucket << q) + alpha) * (1 << p.len()) + prop_row(p, props)]
            }
            Backprojection::Prop { props: p, table } => table[prop_row(p, props)],
            Backprojection::Aggregate { table, .. } => table[bucket],
        }
    }

    /// `G^a(s)`: the propositional backprojection weighted by counts.
    pub fn lifted(&self, lm: &LiftedModel, s: &CountingState, a: &ActionHistogram) -> f64 {
        match self {
            Backprojection::Constant(c) => *c,
            Backprojection::Bucket { source, group, q, .. } => {
                let mut acc = KahanSum::new();
                for b in 0..s.hists[*source].len() {
                    match group {
                        None => acc.add(s.hists[*source][b] as f64 * self.propositional(b, 0, &s.props)),
                        Some(g) => {
                            for alpha in 0..(1usize << q) {
                                let c = lm.cell_count(*g, s, a, b, alpha);
                                if c > 0 {
                                    acc.add(c as f64 * self.propositional(b, alpha, &s.props));
                                }
                            }
                        }
                    }
                }
                acc.value()
            }
            Backprojection::Prop { .. } => self.propositional(0, 0, &s.props),
            Backprojection::Aggregate { hist, pos, table } => {
                let h = &lm.hists[*hist];
                let k: u64 = s.hists[*hist].iter().enumerate().filter(|(b, _)| h.bit(*b, *pos)).map(|(_, &c)| c).sum();
                table[k as usize]
            }
        }
    }
}

/// All backprojections of a model, computed once.
#[derive(Debug, Clone)]
pub struct Backprojections {
    pub items: Vec<Backprojection>,
}

impl Backprojections {
    pub fn new(lm: &LiftedModel) -> Result<Self> {
        Ok(Backprojections { items: (0..lm.basis.len()).map(|i| Backprojection::build(lm, i)).collect::<Result<_>>()? })
    }
}

pub fn propositional_backprojection(
    lm: &LiftedModel,
    basis: usize,
    bucket: usize,
    alpha: usize,
    props: &[bool],
) -> Result<f64> {
    Ok(Backprojection::build(lm, basis)?.propositional(bucket, alpha, props))
}

pub fn lifted_backprojection(lm: &LiftedModel, basis: usize, s: &CountingState, a: &ActionHistogram) -> Result<f64> {
    Ok(Backprojection::build(lm, basis)?.lifted(lm, s, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::epidemic;
    use serde_json::json;

    #[test]
    fn reward_counts_groundings() {
        let lm = LiftedModel::compile(&epidemic(8)).unwrap();
        let s = lm.state_from_json(&json!({"Sick": [3, 5], "Travel": [4, 4], "Epidemic": false})).unwrap();
        assert_eq!(reward(&lm, &s), 6.0);
        let lm3 = LiftedModel::compile(&epidemic(3)).unwrap();
        let s = lm3.state_from_json(&json!({"Sick": [3, 0], "Travel": [3, 0], "Epidemic": true})).unwrap();
        assert_eq!(reward(&lm3, &s), 3.0);
    }

    #[test]
    fn basis_values() {
        let lm = LiftedModel::compile(&epidemic(3)).unwrap();
        let s = lm.state_from_json(&json!({"Sick": [0, 3], "Travel": [1, 2], "Epidemic": true})).unwrap();
        assert_eq!(basis_value(&lm, 0, &s), 1.0);
        assert_eq!(basis_value(&lm, 1, &s), -3.0);
        assert_eq!(basis_value(&lm, 2, &s), 4.0);
        for s in lm.states() {
            let sum: f64 = (0..3).map(|i| basis_value(&lm, i, &s)).sum::<f64>() - 1.0;
            assert_eq!(sum, reward(&lm, &s));
        }
    }

    #[test]
    fn backprojection_tables() {
        let lm = LiftedModel::compile(&epidemic(3)).unwrap();
        let bp = Backprojections::new(&lm).unwrap();
        let g1 = &bp.items[1];
        // bucket 1 = sick; props[0] = epidemic
        assert!((g1.propositional(1, 0, &[true]) + 0.2).abs() < 1e-12);
        assert!((g1.propositional(1, 0, &[false]) - 0.2).abs() < 1e-12);
        assert!((g1.propositional(0, 0, &[true]) + 0.6).abs() < 1e-12);
        assert!((g1.propositional(0, 0, &[false]) - 0.6).abs() < 1e-12);
        let g2 = &bp.items[2];
        assert!((g2.propositional(1, 0, &[]) - 1.8).abs() < 1e-12);
        assert!((g2.propositional(0, 0, &[]) - 0.4).abs() < 1e-12);
        assert!((g2.propositional(1, 1, &[]) - 1.0).abs() < 1e-12);
        assert!((g2.propositional(0, 1, &[]) - 0.2).abs() < 1e-12);
        assert_eq!(bp.items[0].propositional(0, 0, &[]), 1.0);
        assert!(g1.action_independent());
        assert!(!g2.action_independent());
    }

    #[test]
    fn lifted_backprojection_weights_counts() {
        let lm = LiftedModel::compile(&epidemic(5)).unwrap();
        let s = lm.state_from_json(&json!({"Sick": [2, 3], "Travel": [2, 3], "Epidemic": true})).unwrap();
        let g1 = lifted_backprojection(&lm, 1, &s, &lm.noop()).unwrap();
        assert!((g1 + 1.8).abs() < 1e-12);
        let a = lm.action_from_json(&json!({"Restrict": {"tt": 3, "ft": 2}})).unwrap();
        let g2 = lifted_backprojection(&lm, 2, &s, &a).unwrap();
        assert!((g2 - (3.0 * 1.0 + 2.0 * 0.2)).abs() < 1e-12);
        assert_eq!(lifted_backprojection(&lm, 0, &s, &a).unwrap(), 1.0);
    }
}
