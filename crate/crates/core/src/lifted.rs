//! A validated model compiled into its lifted form: counting cliques, the
//! per-object transition tables that drive them, action groups, and
//! indexing of the lifted state space.

use std::collections::{BTreeMap, HashMap};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::counting::{self, ActionHistogram, CountingState};
use crate::error::{Error, Result};
use crate::liftgraph::{maximal_cliques, relational_cost_graph, CliqueReport, CostGraph};
use crate::model::{self, Aggregate, Prv, RfMdpModel, Role};

/// Refuse to enumerate a single clique with more histograms than this.
pub const MAX_CLIQUE_HISTOGRAMS: u128 = 5_000_000;

/// Where the value of a parfactor input (or a function argument) comes from
/// when evaluated for one object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputSource {
    /// Bit position within the source clique's bucket.
    Bucket(usize),
    /// Index into the propositional assignment.
    Prop(usize),
    /// Bit position within the action group's assignment.
    Action(usize),
}

#[derive(Debug, Clone)]
pub struct Cpt {
    pub inputs: Vec<InputSource>,
    pub p_true: Vec<f64>,
    pub p_false: Vec<f64>,
}

impl Cpt {
    fn build(pf: &model::Parfactor, sources: Vec<InputSource>) -> Cpt {
        let k = pf.inputs.len();
        let mut p_true = vec![0.0; 1 << k];
        let mut p_false = vec![0.0; 1 << k];
        for row in &pf.rows {
            let idx = model::index_of_bits(&row.assignment[..k]);
            if row.assignment[k] {
                p_true[idx] = row.prob;
            } else {
                p_false[idx] = row.prob;
            }
        }
        Cpt { inputs: sources, p_true, p_false }
    }

    /// Row index for one object in source bucket `bucket` (of `width` bits)
    /// under action assignment `alpha` (of `q` bits).
    pub fn row(&self, width: usize, bucket: usize, q: usize, alpha: usize, props: &[bool]) -> usize {
        self.inputs.iter().fold(0, |acc, src| {
            let bit = match *src {
                InputSource::Bucket(p) => (bucket >> (width - 1 - p)) & 1 == 1,
                InputSource::Action(p) => (alpha >> (q - 1 - p)) & 1 == 1,
                InputSource::Prop(i) => props[i],
            };
            (acc << 1) | bit as usize
        })
    }
}

#[derive(Debug, Clone)]
pub struct HistClique {
    pub name: String,
    pub prvs: Vec<usize>,
    pub logvars: Vec<String>,
    pub n: u64,
    pub width: usize,
    pub buckets: usize,
    /// Histogram clique whose buckets drive this clique's transition.
    pub source: usize,
    pub group: Option<usize>,
    /// Transition table of each member PRV, in member order.
    pub cpts: Vec<Cpt>,
    pub histograms: Vec<Vec<u64>>,
    ranks: HashMap<Vec<u64>, usize>,
}

impl HistClique {
    pub fn rank(&self, h: &[u64]) -> Option<usize> {
        self.ranks.get(h).copied()
    }

    pub fn bucket_label(&self, b: usize) -> String {
        model::bits(b, self.width).into_iter().map(|x| if x { 't' } else { 'f' }).collect()
    }

    /// Bucket of the member at `pos` being true.
    pub fn bit(&self, b: usize, pos: usize) -> bool {
        (b >> (self.width - 1 - pos)) & 1 == 1
    }
}

#[derive(Debug, Clone)]
pub enum PropDriver {
    Cpt(Cpt),
    Aggregate { hist: usize, pos: usize, n: u64, aggregate: Aggregate },
}

#[derive(Debug, Clone)]
pub struct PropVar {
    pub name: String,
    pub prv: usize,
    pub driver: PropDriver,
}

#[derive(Debug, Clone)]
pub struct ActionGroup {
    pub name: String,
    pub actions: Vec<usize>,
    pub action_names: Vec<String>,
    pub source: usize,
}

impl ActionGroup {
    pub fn q(&self) -> usize {
        self.actions.len()
    }

    /// Stored cells per source bucket (every non-all-false assignment).
    pub fn cells_per_bucket(&self) -> usize {
        (1 << self.q()) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliqueRef {
    Hist(usize),
    Prop(usize),
}

/// Reward or basis table over one clique's buckets and propositional RVs.
/// The value on a state sums the table over all groundings.
#[derive(Debug, Clone)]
pub struct LocalFunction {
    pub name: String,
    pub hist: Option<usize>,
    pub scope: Vec<InputSource>,
    pub table: Vec<f64>,
}

impl LocalFunction {
    pub fn entry(&self, width: usize, bucket: usize, props: &[bool]) -> f64 {
        let idx = self.scope.iter().fold(0, |acc, src| {
            let bit = match *src {
                InputSource::Bucket(p) => (bucket >> (width - 1 - p)) & 1 == 1,
                InputSource::Prop(i) => props[i],
                InputSource::Action(_) => unreachable!("no actions in reward scopes"),
            };
            (acc << 1) | bit as usize
        });
        self.table[idx]
    }
}

#[derive(Debug, Clone)]
pub enum CompiledBasis {
    Constant(f64),
    Local(LocalFunction),
}

#[derive(Debug, Clone)]
pub struct LiftedModel {
    pub model: RfMdpModel,
    pub graph: CostGraph,
    pub report: CliqueReport,
    pub hists: Vec<HistClique>,
    pub props: Vec<PropVar>,
    pub order: Vec<CliqueRef>,
    pub groups: Vec<ActionGroup>,
    pub rewards: Vec<LocalFunction>,
    pub basis: Vec<CompiledBasis>,
    /// PRV index -> (histogram clique, member position).
    pub prv_hist: Vec<Option<(usize, usize)>>,
    pub prv_prop: Vec<Option<usize>>,
    pub fingerprint: String,
}

pub(crate) fn check_structure(model: &RfMdpModel) -> std::result::Result<(), String> {
    build(model).map(|_| ()).map_err(|e| match e {
        Error::Unsupported(m) | Error::Guard(m) => m,
        other => other.to_string(),
    })
}

pub fn fingerprint(model: &RfMdpModel) -> String {
    let digest = Sha256::digest(model.to_json().as_bytes());
    hex::encode(&digest[..12])
}

impl LiftedModel {
    /// Validates and compiles.
    pub fn compile(model: &RfMdpModel) -> Result<LiftedModel> {
        let v = model::validate(model);
        if !v.is_empty() {
            return Err(Error::Invalid(v));
        }
        build(model)
    }

    /// Compiles without checking probability ranges or normalization. Used to
    /// inject faults into equivalence checks.
    pub fn compile_unchecked(model: &RfMdpModel) -> Result<LiftedModel> {
        let v = model::basic_violations(model, false);
        if !v.is_empty() {
            return Err(Error::Invalid(v));
        }
        build(model)
    }

    pub fn gamma(&self) -> f64 {
        self.model.gamma
    }

    pub fn prv_index(&self, name: &str) -> Option<usize> {
        self.model.prvs.iter().position(|p| p.name == name)
    }

    pub fn hist_by_name(&self, name: &str) -> Option<usize> {
        self.hists.iter().position(|h| h.name == name)
    }

    pub fn prop_by_name(&self, name: &str) -> Option<usize> {
        self.props.iter().position(|p| p.name == name)
    }

    pub fn clique_name(&self, c: CliqueRef) -> &str {
        match c {
            CliqueRef::Hist(i) => &self.hists[i].name,
            CliqueRef::Prop(i) => &self.props[i].name,
        }
    }

    fn radix(&self, c: CliqueRef) -> usize {
        match c {
            CliqueRef::Hist(i) => self.hists[i].histograms.len(),
            CliqueRef::Prop(_) => 2,
        }
    }

    /// Closed-form size of the lifted state space.
    pub fn num_states(&self) -> u128 {
        let mut total: u128 = 1u128 << self.props.len().min(127);
        for h in &self.hists {
            total = total.saturating_mul(counting::num_histograms(h.buckets, h.n));
        }
        total
    }

    pub fn state_index(&self, s: &CountingState) -> usize {
        self.order.iter().fold(0, |acc, &c| {
            let digit = match c {
                CliqueRef::Hist(i) => self.hists[i].rank(&s.hists[i]).expect("histogram in space"),
                CliqueRef::Prop(i) => s.props[i] as usize,
            };
            acc * self.radix(c) + digit
        })
    }

    pub fn state_at(&self, mut idx: usize) -> CountingState {
        let mut hists = vec![Vec::new(); self.hists.len()];
        let mut props = vec![false; self.props.len()];
        for &c in self.order.iter().rev() {
            let r = self.radix(c);
            let digit = idx % r;
            idx /= r;
            match c {
                CliqueRef::Hist(i) => hists[i] = self.hists[i].histograms[digit].clone(),
                CliqueRef::Prop(i) => props[i] = digit == 1,
            }
        }
        CountingState { hists, props }
    }

    /// All lifted states in index order.
    pub fn states(&self) -> impl Iterator<Item = CountingState> + '_ {
        let n = usize::try_from(self.num_states()).unwrap_or(usize::MAX);
        (0..n).map(move |i| self.state_at(i))
    }

    pub fn check_state(&self, s: &CountingState) -> Result<()> {
        if s.hists.len() != self.hists.len() || s.props.len() != self.props.len() {
            return Err(Error::Precondition("state has the wrong number of cliques".into()));
        }
        for (h, c) in s.hists.iter().zip(&self.hists) {
            if h.len() != c.buckets || h.iter().sum::<u64>() != c.n {
                return Err(Error::Precondition(format!(
                    "histogram {:?} for {} must have {} buckets summing to {}",
                    h, c.name, c.buckets, c.n
                )));
            }
        }
        Ok(())
    }

    /// Number of objects of source bucket `b` in group `g` that receive
    /// action assignment `alpha` (0 = every action false).
    pub fn cell_count(&self, g: usize, s: &CountingState, a: &ActionHistogram, b: usize, alpha: usize) -> u64 {
        let grp = &self.groups[g];
        let cpb = grp.cells_per_bucket();
        if alpha == 0 {
            let assigned: u64 = a.cells[g][b * cpb..(b + 1) * cpb].iter().sum();
            s.hists[grp.source][b] - assigned
        } else {
            a.cells[g][b * cpb + alpha - 1]
        }
    }

    pub fn is_admissible(&self, s: &CountingState, a: &ActionHistogram) -> bool {
        if a.cells.len() != self.groups.len() {
            return false;
        }
        self.groups.iter().enumerate().all(|(g, grp)| {
            let cpb = grp.cells_per_bucket();
            let src = &s.hists[grp.source];
            a.cells[g].len() == cpb * src.len()
                && src.iter().enumerate().all(|(b, &c)| a.cells[g][b * cpb..(b + 1) * cpb].iter().sum::<u64>() <= c)
        })
    }

    pub fn check_action(&self, s: &CountingState, a: &ActionHistogram) -> Result<()> {
        if self.is_admissible(s, a) {
            Ok(())
        } else {
            Err(Error::Precondition("action is not admissible in this state".into()))
        }
    }

    /// Admissible action histograms, lexicographic over groups and cells.
    pub fn actions(&self, s: &CountingState) -> Vec<ActionHistogram> {
        let per_group: Vec<Vec<Vec<u64>>> = self
            .groups
            .iter()
            .map(|grp| {
                let cpb = grp.cells_per_bucket();
                let mut out = vec![Vec::new()];
                for &c in &s.hists[grp.source] {
                    let options = counting::bounded_compositions(cpb, c);
                    let mut next = Vec::with_capacity(out.len() * options.len());
                    for prefix in &out {
                        for o in &options {
                            let mut v = prefix.clone();
                            v.extend_from_slice(o);
                            next.push(v);
                        }
                    }
                    out = next;
                }
                out
            })
            .collect();
        let mut result = vec![ActionHistogram { cells: Vec::new() }];
        for options in per_group {
            let mut next = Vec::with_capacity(result.len() * options.len());
            for prefix in &result {
                for o in &options {
                    let mut a = prefix.clone();
                    a.cells.push(o.clone());
                    next.push(a);
                }
            }
            result = next;
        }
        result
    }

    /// Closed-form number of admissible actions in `s`.
    pub fn num_actions(&self, s: &CountingState) -> u128 {
        let mut total: u128 = 1;
        for grp in &self.groups {
            let cpb = grp.cells_per_bucket() as u64;
            for &c in &s.hists[grp.source] {
                total = total.saturating_mul(crate::numeric::binomial_u128(c + cpb, cpb));
            }
        }
        total
    }

    /// Every PRV false: all objects in the first bucket.
    pub fn all_false_state(&self) -> CountingState {
        let hists = self
            .hists
            .iter()
            .map(|h| {
                let mut v = vec![0; h.buckets];
                v[0] = h.n;
                v
            })
            .collect();
        CountingState { hists, props: vec![false; self.props.len()] }
    }

    /// The action that sets every action PRV false.
    pub fn noop(&self) -> ActionHistogram {
        ActionHistogram {
            cells: self
                .groups
                .iter()
                .map(|g| vec![0; g.cells_per_bucket() * self.hists[g.source].buckets])
                .collect(),
        }
    }

    pub fn cell_label(&self, g: usize, b: usize, alpha: usize) -> String {
        let grp = &self.groups[g];
        let mut s = self.hists[grp.source].bucket_label(b);
        for x in model::bits(alpha, grp.q()) {
            s.push(if x { 't' } else { 'f' });
        }
        s
    }

    pub fn state_to_json(&self, s: &CountingState) -> Value {
        let mut m = Map::new();
        for &c in &self.order {
            let v = match c {
                CliqueRef::Hist(i) => Value::from(s.hists[i].clone()),
                CliqueRef::Prop(i) => Value::from(s.props[i]),
            };
            m.insert(self.clique_name(c).to_string(), v);
        }
        Value::Object(m)
    }

    pub fn state_from_json(&self, v: &Value) -> Result<CountingState> {
        let obj = v.as_object().ok_or_else(|| Error::Precondition("state must be a JSON object".into()))?;
        for k in obj.keys() {
            if self.hist_by_name(k).is_none() && self.prop_by_name(k).is_none() {
                return Err(Error::Precondition(format!("unknown clique {k}")));
            }
        }
        let mut hists = Vec::new();
        for h in &self.hists {
            let arr = obj
                .get(&h.name)
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Precondition(format!("missing histogram for {}", h.name)))?;
            let counts = arr
                .iter()
                .map(|x| x.as_u64().ok_or_else(|| Error::Precondition(format!("bad count in {}", h.name))))
                .collect::<Result<Vec<u64>>>()?;
            hists.push(counts);
        }
        let mut props = Vec::new();
        for p in &self.props {
            props.push(
                obj.get(&p.name)
                    .and_then(Value::as_bool)
                    .ok_or_else(|| Error::Precondition(format!("missing value for {}", p.name)))?,
            );
        }
        let s = CountingState { hists, props };
        self.check_state(&s)?;
        Ok(s)
    }

    pub fn action_to_json(&self, a: &ActionHistogram) -> Value {
        let mut m = Map::new();
        for (g, grp) in self.groups.iter().enumerate() {
            let cpb = grp.cells_per_bucket();
            let mut cells = Map::new();
            for (i, &c) in a.cells[g].iter().enumerate() {
                cells.insert(self.cell_label(g, i / cpb, i % cpb + 1), Value::from(c));
            }
            m.insert(grp.name.clone(), Value::Object(cells));
        }
        Value::Object(m)
    }

    /// Parses an action; missing groups and cells count as zero.
    pub fn action_from_json(&self, v: &Value) -> Result<ActionHistogram> {
        let obj = v.as_object().ok_or_else(|| Error::Precondition("action must be a JSON object".into()))?;
        let mut a = self.noop();
        for (name, cells) in obj {
            let g = self
                .groups
                .iter()
                .position(|grp| &grp.name == name)
                .ok_or_else(|| Error::Precondition(format!("unknown action group {name}")))?;
            let cpb = self.groups[g].cells_per_bucket();
            let labels: HashMap<String, usize> =
                (0..a.cells[g].len()).map(|i| (self.cell_label(g, i / cpb, i % cpb + 1), i)).collect();
            let cells = cells.as_object().ok_or_else(|| Error::Precondition(format!("cells of {name} must be an object")))?;
            for (label, c) in cells {
                let i = *labels
                    .get(label)
                    .ok_or_else(|| Error::Precondition(format!("unknown cell {label} in {name}")))?;
                a.cells[g][i] = c.as_u64().ok_or_else(|| Error::Precondition(format!("bad count for {label}")))?;
            }
        }
        Ok(a)
    }

    /// Counts a full ground assignment (PRV name -> value per grounding, in
    /// lexicographic order of logvar tuples).
    pub fn state_of_ground(&self, values: &HashMap<String, Vec<bool>>) -> Result<CountingState> {
        let get = |prv: usize, len: u64| -> Result<&Vec<bool>> {
            let name = &self.model.prvs[prv].name;
            let v = values.get(name).ok_or_else(|| Error::Precondition(format!("assignment misses {name}")))?;
            if v.len() as u64 != len {
                return Err(Error::Precondition(format!("{name} needs {len} values, got {}", v.len())));
            }
            Ok(v)
        };
        let mut hists = Vec::new();
        for h in &self.hists {
            let cols = h.prvs.iter().map(|&p| get(p, h.n)).collect::<Result<Vec<_>>>()?;
            let mut counts = vec![0u64; h.buckets];
            for o in 0..h.n as usize {
                counts[cols.iter().fold(0, |acc, c| (acc << 1) | c[o] as usize)] += 1;
            }
            hists.push(counts);
        }
        let props = self.props.iter().map(|p| get(p.prv, 1).map(|v| v[0])).collect::<Result<Vec<_>>>()?;
        Ok(CountingState { hists, props })
    }

    /// Counts a ground action against a ground state.
    pub fn action_of_ground(
        &self,
        state: &HashMap<String, Vec<bool>>,
        action: &HashMap<String, Vec<bool>>,
    ) -> Result<ActionHistogram> {
        let mut a = self.noop();
        for (g, grp) in self.groups.iter().enumerate() {
            let src = &self.hists[grp.source];
            let cpb = grp.cells_per_bucket();
            let lookup = |name: &str, vals: &HashMap<String, Vec<bool>>| -> Result<Vec<bool>> {
                vals.get(name)
                    .filter(|v| v.len() as u64 == src.n)
                    .cloned()
                    .ok_or_else(|| Error::Precondition(format!("ground assignment misses {name}")))
            };
            let scols = src.prvs.iter().map(|&p| lookup(&self.model.prvs[p].name, state)).collect::<Result<Vec<_>>>()?;
            let acols = grp.action_names.iter().map(|n| lookup(n, action)).collect::<Result<Vec<_>>>()?;
            for o in 0..src.n as usize {
                let b = scols.iter().fold(0, |acc, c| (acc << 1) | c[o] as usize);
                let alpha = acols.iter().fold(0, |acc, c| (acc << 1) | c[o] as usize);
                if alpha > 0 {
                    a.cells[g][b * cpb + alpha - 1] += 1;
                }
            }
        }
        Ok(a)
    }
}

fn unsupported(msg: String) -> Error {
    Error::Unsupported(msg)
}

fn build(model: &RfMdpModel) -> Result<LiftedModel> {
    let graph = relational_cost_graph(model);
    let report = maximal_cliques(&graph);
    let prv_of_vertex: Vec<usize> =
        graph.vertices.iter().map(|v| model.prvs.iter().position(|p| &p.name == v).unwrap()).collect();

    let mut prv_hist: Vec<Option<(usize, usize)>> = vec![None; model.prvs.len()];
    let mut prv_prop: Vec<Option<usize>> = vec![None; model.prvs.len()];
    let mut order = Vec::new();
    let mut hist_members: Vec<Vec<usize>> = Vec::new();
    let mut prop_members: Vec<usize> = Vec::new();
    for clique in &report.cliques {
        let prvs: Vec<usize> = clique.iter().map(|&v| prv_of_vertex[v]).collect();
        let first = &model.prvs[prvs[0]];
        if first.is_propositional() {
            prv_prop[prvs[0]] = Some(prop_members.len());
            order.push(CliqueRef::Prop(prop_members.len()));
            prop_members.push(prvs[0]);
            continue;
        }
        for (pos, &p) in prvs.iter().enumerate() {
            if model.prvs[p].logvars != first.logvars {
                return Err(unsupported(format!(
                    "clique {} mixes logvar lists",
                    names(model, &prvs)
                )));
            }
            if prv_hist[p].is_some() {
                return Err(unsupported(format!(
                    "{} belongs to overlapping cliques",
                    model.prvs[p].name
                )));
            }
            prv_hist[p] = Some((hist_members.len(), pos));
        }
        order.push(CliqueRef::Hist(hist_members.len()));
        hist_members.push(prvs);
    }

    let parfactor_of = |prv: usize| {
        model.parfactors.iter().find(|f| f.output == model.prvs[prv].name).expect("validated: every state prv has a parfactor")
    };
    let index_of = |name: &str| model.prvs.iter().position(|p| p.name == name).expect("validated reference");

    // Sources and action usage per clique.
    let mut sources = Vec::new();
    let mut clique_actions: Vec<Vec<usize>> = Vec::new();
    for (k, members) in hist_members.iter().enumerate() {
        let lv = &model.prvs[members[0]].logvars;
        let mut source: Option<usize> = None;
        let mut actions = Vec::new();
        for &m in members {
            let pf = parfactor_of(m);
            if pf.aggregate.is_some() {
                return Err(unsupported(format!("aggregate parfactor {} needs a propositional output", pf.name)));
            }
            for input in &pf.inputs {
                let i = index_of(input);
                let p: &Prv = &model.prvs[i];
                if p.is_propositional() {
                    if p.role == Role::Action {
                        return Err(unsupported(format!("propositional action {} is not supported", p.name)));
                    }
                    continue;
                }
                if &p.logvars != lv {
                    return Err(unsupported(format!(
                        "parfactor {}: input {} must range over the output's logvars",
                        pf.name, p.name
                    )));
                }
                match p.role {
                    Role::Action => {
                        if !actions.contains(&i) {
                            actions.push(i);
                        }
                    }
                    Role::State => {
                        let (c, _) = prv_hist[i].expect("parameterized state prv in a clique");
                        if source.is_some_and(|s| s != c) {
                            return Err(unsupported(format!(
                                "parfactors of clique {} read from several cliques",
                                names(model, members)
                            )));
                        }
                        source = Some(c);
                    }
                }
            }
        }
        sources.push(source.unwrap_or(k));
        clique_actions.push(actions);
    }

    // Action groups, one per source clique.
    let mut groups: Vec<ActionGroup> = Vec::new();
    let mut action_source: HashMap<usize, usize> = HashMap::new();
    let mut clique_group = vec![None; hist_members.len()];
    for (k, acts) in clique_actions.iter().enumerate() {
        for &a in acts {
            if let Some(&s) = action_source.get(&a) {
                if s != sources[k] {
                    return Err(unsupported(format!(
                        "action {} drives cliques with different sources",
                        model.prvs[a].name
                    )));
                }
            }
            action_source.insert(a, sources[k]);
        }
    }
    let mut by_source: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&a, &s) in &action_source {
        by_source.entry(s).or_default().push(a);
    }
    for (s, mut acts) in by_source {
        acts.sort_unstable();
        let action_names: Vec<String> = acts.iter().map(|&a| model.prvs[a].name.clone()).collect();
        groups.push(ActionGroup { name: action_names.join("+"), actions: acts, action_names, source: s });
    }
    for (k, acts) in clique_actions.iter().enumerate() {
        if !acts.is_empty() {
            clique_group[k] = groups.iter().position(|g| g.source == sources[k]);
        }
    }
    for p in &model.prvs {
        if p.role == Role::Action && p.is_propositional() {
            return Err(unsupported(format!("propositional action {} is not supported", p.name)));
        }
    }

    let input_source = |name: &str, source: usize, group: Option<usize>| -> InputSource {
        let i = index_of(name);
        if let Some(pp) = prv_prop[i] {
            InputSource::Prop(pp)
        } else if model.prvs[i].role == Role::Action {
            let g = &groups[group.expect("clique with actions has a group")];
            InputSource::Action(g.actions.iter().position(|&a| a == i).unwrap())
        } else {
            let (c, pos) = prv_hist[i].unwrap();
            debug_assert_eq!(c, source);
            InputSource::Bucket(pos)
        }
    };

    let mut hists = Vec::new();
    for (k, members) in hist_members.iter().enumerate() {
        let first = &model.prvs[members[0]];
        let n = model.grounding_count(first);
        let width = members.len();
        let buckets = 1usize << width;
        let count = counting::num_histograms(buckets, n);
        if count > MAX_CLIQUE_HISTOGRAMS {
            return Err(Error::Guard(format!("clique {} has {} histograms", names(model, members), count)));
        }
        let cpts = members
            .iter()
            .map(|&m| {
                let pf = parfactor_of(m);
                let srcs = pf.inputs.iter().map(|i| input_source(i, sources[k], clique_group[k])).collect();
                Cpt::build(pf, srcs)
            })
            .collect();
        let histograms = counting::enumerate_histograms(buckets, n);
        let ranks = histograms.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        hists.push(HistClique {
            name: names(model, members),
            prvs: members.clone(),
            logvars: first.logvars.clone(),
            n,
            width,
            buckets,
            source: sources[k],
            group: clique_group[k],
            cpts,
            histograms,
            ranks,
        });
    }

    let mut props = Vec::new();
    for &p in &prop_members {
        let pf = parfactor_of(p);
        let driver = if let Some(agg) = &pf.aggregate {
            let counted = index_of(&pf.inputs[0]);
            let (hist, pos) = prv_hist[counted].expect("aggregate input is parameterized");
            PropDriver::Aggregate { hist, pos, n: model.grounding_count(&model.prvs[counted]), aggregate: agg.clone() }
        } else {
            let mut srcs = Vec::new();
            for input in &pf.inputs {
                let i = index_of(input);
                match prv_prop[i] {
                    Some(pp) => srcs.push(InputSource::Prop(pp)),
                    None => {
                        return Err(unsupported(format!(
                            "parfactor {}: propositional output {} reads parameterized {} without an aggregate",
                            pf.name, pf.output, input
                        )))
                    }
                }
            }
            PropDriver::Cpt(Cpt::build(pf, srcs))
        };
        props.push(PropVar { name: model.prvs[p].name.clone(), prv: p, driver });
    }

    let local = |name: &str, scope: &[String], rows: &[model::ValueRow]| -> Result<LocalFunction> {
        let mut hist = None;
        let mut srcs = Vec::new();
        for s in scope {
            let i = index_of(s);
            if let Some(pp) = prv_prop[i] {
                srcs.push(InputSource::Prop(pp));
            } else {
                let (c, pos) = prv_hist[i].unwrap();
                if hist.is_some_and(|h| h != c) {
                    return Err(unsupported(format!("{name}: scope spans several cliques")));
                }
                hist = Some(c);
                srcs.push(InputSource::Bucket(pos));
            }
        }
        let mut table = vec![0.0; 1 << scope.len()];
        for r in rows {
            table[model::index_of_bits(&r.assignment)] = r.value;
        }
        Ok(LocalFunction { name: name.to_string(), hist, scope: srcs, table })
    };
    let rewards = model.rewards.iter().map(|r| local(&r.name, &r.scope, &r.rows)).collect::<Result<Vec<_>>>()?;
    let basis = model
        .basis
        .iter()
        .map(|b| match (&b.rows, b.constant) {
            (_, Some(c)) => Ok(CompiledBasis::Constant(c)),
            (Some(rows), None) if b.scope.is_empty() => Ok(CompiledBasis::Constant(rows[0].value)),
            (Some(rows), None) => local(&b.name, &b.scope, rows).map(CompiledBasis::Local),
            (None, None) => unreachable!("validated basis"),
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(LiftedModel {
        model: model.clone(),
        graph,
        report,
        hists,
        props,
        order,
        groups,
        rewards,
        basis,
        prv_hist,
        prv_prop,
        fingerprint: fingerprint(model),
    })
}

fn names(model: &RfMdpModel, prvs: &[usize]) -> String {
    prvs.iter().map(|&p| model.prvs[p].name.as_str()).collect::<Vec<_>>().join("+")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::epidemic;

    #[test]
    fn epidemic_layout() {
        let lm = LiftedModel::compile(&epidemic(3)).unwrap();
        assert_eq!(lm.hists.len(), 2);
        assert_eq!(lm.hists[0].name, "Sick");
        assert_eq!(lm.hists[1].name, "Travel");
        assert_eq!(lm.props[0].name, "Epidemic");
        assert_eq!(lm.groups.len(), 1);
        assert_eq!(lm.groups[0].name, "Restrict");
        assert_eq!(lm.groups[0].source, 1);
        assert_eq!(lm.hists[1].group, Some(0));
        assert_eq!(lm.hists[0].group, None);
        assert_eq!(lm.num_states(), 32);
    }

    #[test]
    fn state_index_round_trips() {
        let lm = LiftedModel::compile(&epidemic(3)).unwrap();
        for i in 0..32 {
            assert_eq!(lm.state_index(&lm.state_at(i)), i);
        }
        let first = lm.state_at(0);
        assert_eq!(lm.state_to_json(&first).to_string(), r#"{"Sick":[0,3],"Travel":[0,3],"Epidemic":false}"#);
    }

    #[test]
    fn json_round_trips() {
        let lm = LiftedModel::compile(&epidemic(5)).unwrap();
        let s = lm.state_from_json(&serde_json::json!({"Sick": [2, 3], "Travel": [2, 3], "Epidemic": true})).unwrap();
        assert_eq!(lm.state_from_json(&lm.state_to_json(&s)).unwrap(), s);
        let a = lm.action_from_json(&serde_json::json!({"Restrict": {"tt": 3, "ft": 2}})).unwrap();
        assert!(lm.is_admissible(&s, &a));
        assert_eq!(lm.action_to_json(&a), serde_json::json!({"Restrict": {"ft": 2, "tt": 3}}));
        assert_eq!(lm.action_from_json(&lm.action_to_json(&a)).unwrap(), a);
        assert!(lm.state_from_json(&serde_json::json!({"Sick": [2, 2], "Travel": [2, 3], "Epidemic": true})).is_err());
        assert!(lm.action_from_json(&serde_json::json!({"Restrict": {"xx": 1}})).is_err());
    }

    #[test]
    fn supported_and_unsupported_structures() {
        // Sick' reading Travel joins both into one clique
        let mut m = epidemic(3);
        m.parfactors[1].inputs = vec!["Sick".into(), "Travel".into()];
        assert!(crate::model::validate(&m).is_empty());
        let lm = LiftedModel::compile(&m).unwrap();
        assert_eq!(lm.hists[0].name, "Sick+Travel");
        assert_eq!(lm.num_states(), 20 * 2);

        // Travel' driven by Sick: source is another clique
        let mut m = epidemic(3);
        m.parfactors[0].inputs = vec!["Sick".into(), "Restrict".into()];
        let lm = LiftedModel::compile(&m).unwrap();
        assert_eq!(lm.hists[1].source, 0);
        assert_eq!(lm.groups[0].source, 0);

        let mut m = epidemic(3);
        m.prvs.push(Prv { name: "Lockdown".into(), logvars: vec![], role: Role::Action });
        let v = crate::model::validate(&m);
        assert!(v.iter().any(|s| s.contains("propositional action")), "{v:?}");
    }

    #[test]
    fn action_counts_match_closed_form() {
        let lm = LiftedModel::compile(&epidemic(3)).unwrap();
        for s in lm.states() {
            let acts = lm.actions(&s);
            assert_eq!(acts.len() as u128, lm.num_actions(&s));
            assert!(acts.iter().all(|a| lm.is_admissible(&s, a)));
            assert_eq!(acts[0], lm.noop());
        }
    }
}
