//! Relational cost graphs and their clique structure.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::model::{RfMdpModel, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Relational,
    Total,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostGraph {
    pub vertices: Vec<String>,
    /// Index pairs `(u, v)` with `u < v`.
    pub edges: BTreeSet<(usize, usize)>,
    pub kind: GraphKind,
}

impl CostGraph {
    pub fn new(vertices: Vec<String>, kind: GraphKind) -> Self {
        CostGraph { vertices, edges: BTreeSet::new(), kind }
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        if u != v {
            self.edges.insert((u.min(v), u.max(v)));
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.index(a), self.index(b)) {
            (Some(u), Some(v)) => self.edges.contains(&(u.min(v), u.max(v))),
            _ => false,
        }
    }

    pub fn neighbours(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.vertices.len()];
        for &(u, v) in &self.edges {
            adj[u].insert(v);
            adj[v].insert(u);
        }
        adj
    }

    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.edges
            .iter()
            .map(|&(u, v)| (self.vertices[u].clone(), self.vertices[v].clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueReport {
    /// Maximal cliques as sorted vertex indices, sorted lexicographically.
    pub cliques: Vec<Vec<usize>>,
    pub c: usize,
    pub w: usize,
    pub greedy_induced_width: usize,
}

impl CliqueReport {
    pub fn clique_names(&self, graph: &CostGraph) -> Vec<Vec<String>> {
        self.cliques
            .iter()
            .map(|c| c.iter().map(|&v| graph.vertices[v].clone()).collect())
            .collect()
    }
}

fn scopes(model: &RfMdpModel) -> Vec<Vec<&str>> {
    let mut out: Vec<Vec<&str>> = Vec::new();
    for f in &model.parfactors {
        out.push(f.inputs.iter().map(String::as_str).collect());
    }
    for r in &model.rewards {
        out.push(r.scope.iter().map(String::as_str).collect());
    }
    for b in &model.basis {
        out.push(b.scope.iter().map(String::as_str).collect());
    }
    out
}

/// Vertices are current-state PRVs; an edge joins two PRVs that share a
/// logvar and occur together in a parfactor, reward, or basis function.
pub fn relational_cost_graph(model: &RfMdpModel) -> CostGraph {
    let states: Vec<_> = model.prvs.iter().filter(|p| p.role == Role::State).collect();
    let mut g = CostGraph::new(states.iter().map(|p| p.name.clone()).collect(), GraphKind::Relational);
    for scope in scopes(model) {
        let members: Vec<usize> = scope.iter().filter_map(|n| g.index(n)).collect();
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                let share = states[u].logvars.iter().any(|l| states[v].logvars.contains(l));
                if share {
                    g.add_edge(u, v);
                }
            }
        }
    }
    g
}

/// Vertices are all PRVs plus a primed copy of every parfactor output;
/// co-occurrence in any parfactor or function yields an edge.
pub fn total_relational_cost_graph(model: &RfMdpModel) -> (CostGraph, CliqueReport) {
    let mut names: Vec<String> = model.prvs.iter().filter(|p| p.role == Role::State).map(|p| p.name.clone()).collect();
    names.extend(model.prvs.iter().filter(|p| p.role == Role::Action).map(|p| p.name.clone()));
    for f in &model.parfactors {
        let primed = format!("{}'", f.output);
        if !names.contains(&primed) {
            names.push(primed);
        }
    }
    let mut g = CostGraph::new(names, GraphKind::Total);
    let connect = |g: &mut CostGraph, scope: Vec<String>| {
        let idx: Vec<usize> = scope.iter().filter_map(|n| g.index(n)).collect();
        for (i, &u) in idx.iter().enumerate() {
            for &v in &idx[i + 1..] {
                g.add_edge(u, v);
            }
        }
    };
    for f in &model.parfactors {
        let mut scope = f.inputs.clone();
        scope.push(format!("{}'", f.output));
        connect(&mut g, scope);
    }
    for r in &model.rewards {
        connect(&mut g, r.scope.clone());
    }
    for b in &model.basis {
        connect(&mut g, b.scope.clone());
    }
    let report = maximal_cliques(&g);
    (g, report)
}

/// Exhaustive maximal-clique enumeration (Bron-Kerbosch with pivoting).
pub fn maximal_cliques(graph: &CostGraph) -> CliqueReport {
    let adj = graph.neighbours();
    let mut cliques = Vec::new();
    let all: BTreeSet<usize> = (0..graph.vertices.len()).collect();
    bron_kerbosch(&adj, BTreeSet::new(), all, BTreeSet::new(), &mut cliques);
    for c in cliques.iter_mut() {
        c.sort_unstable();
    }
    cliques.sort();
    let w = cliques.iter().map(Vec::len).max().unwrap_or(0);
    CliqueReport { c: cliques.len(), w, cliques, greedy_induced_width: greedy_induced_width(graph) }
}

fn bron_kerbosch(
    adj: &[BTreeSet<usize>],
    r: BTreeSet<usize>,
    mut p: BTreeSet<usize>,
    mut x: BTreeSet<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() {
        if x.is_empty() && !r.is_empty() {
            out.push(r.into_iter().collect());
        }
        return;
    }
    let pivot = *p.union(&x).max_by_key(|&&u| p.intersection(&adj[u]).count()).unwrap();
    let candidates: Vec<usize> = p.difference(&adj[pivot]).copied().collect();
    for v in candidates {
        let mut r2 = r.clone();
        r2.insert(v);
        let p2 = p.intersection(&adj[v]).copied().collect();
        let x2 = x.intersection(&adj[v]).copied().collect();
        bron_kerbosch(adj, r2, p2, x2, out);
        p.remove(&v);
        x.insert(v);
    }
}

/// Min-degree elimination order of an undirected graph given as adjacency
/// sets; ties go to the lowest index.
pub fn min_degree_order(mut adj: Vec<BTreeSet<usize>>) -> (Vec<usize>, usize) {
    let n = adj.len();
    let mut alive: BTreeSet<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    let mut width = 0;
    while let Some(&v) = alive.iter().min_by_key(|&&v| (adj[v].len(), v)) {
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        width = width.max(nb.len());
        for &a in &nb {
            adj[a].remove(&v);
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[v].clear();
        alive.remove(&v);
        order.push(v);
    }
    (order, width)
}

/// Upper bound on treewidth from min-degree elimination.
pub fn greedy_induced_width(graph: &CostGraph) -> usize {
    min_degree_order(graph.neighbours()).1
}
