//! Overshadowing structure inside the pseudo-truth set.
//!
//! `θ → γ` is an edge when, at `θ`'s own preferred action `φ(θ)`, `γ` sits in
//! the same or a better rank class than `θ`. Ties produce edges both ways.
//! On top of the digraph this module finds closed sets and strongly connected
//! components, decides joint closure (a mixture over `S` that no outsider beats
//! in expected log-likelihood ratio at `S`'s preferred actions), and lists the
//! subsets of the pseudo-truth set meeting both necessary conditions for
//! pathwise concentration.

mod feasibility;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

pub use feasibility::{feasible_mixture, worst_row};

use crate::error::{Error, Result};
use crate::pseudo_truth::{
    attainable_actions, fit_delta, preferred_actions, pseudo_truth_from_fit, FitTable, RankedPartition,
    RankingScope,
};
use crate::reward_models::ActionGrid;
use crate::thompson::Scenario;

/// Largest vertex count for exhaustive closed-set enumeration.
pub const MAX_CLOSED_SET_VERTICES: usize = 20;

/// Largest pseudo-truth set for candidate enumeration.
pub const MAX_CANDIDATE_VERTICES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvershadowGraph {
    pub n: usize,
    /// Sorted `(from, to)` pairs, never `from == to`.
    pub edges: BTreeSet<(usize, usize)>,
    /// Preferred action (grid index) per vertex; empty for graphs built from raw edges.
    pub phi: Vec<usize>,
    pub ranks: Option<RankedPartition>,
}

impl OvershadowGraph {
    /// Graph with the given edges and no ranking metadata. Self-loops are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::IndexOutOfRange {
                    index: u.max(v),
                    len: n,
                });
            }
            if u != v {
                set.insert((u, v));
            }
        }
        Ok(Self {
            n,
            edges: set,
            phi: Vec::new(),
            ranks: None,
        })
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
        }
        adj
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// No edge leaves `set`.
    pub fn is_closed(&self, set: &[usize]) -> bool {
        let members: BTreeSet<usize> = set.iter().copied().collect();
        self.edges
            .iter()
            .all(|(u, v)| !members.contains(u) || members.contains(v))
    }

    /// Every ordered pair in `set` is joined by a path inside `G[set]`.
    pub fn is_strongly_connected_within(&self, set: &[usize]) -> bool {
        let Some(&start) = set.first() else {
            return false;
        };
        let members: BTreeSet<usize> = set.iter().copied().collect();
        let reach = |forward: bool| {
            let mut seen = BTreeSet::from([start]);
            let mut frontier = vec![start];
            while let Some(x) = frontier.pop() {
                for &(u, v) in &self.edges {
                    let (from, to) = if forward { (u, v) } else { (v, u) };
                    if from == x && members.contains(&to) && seen.insert(to) {
                        frontier.push(to);
                    }
                }
            }
            seen.len() == members.len()
        };
        reach(true) && reach(false)
    }

    /// Graphviz rendering: one node per parameter labelled with its index and
    /// preferred action, edges in sorted order.
    pub fn to_dot(&self, grid: Option<&ActionGrid>, highlight: &[usize]) -> String {
        let mut out = String::from("digraph overshadow {\n  node [shape=circle];\n");
        for v in 0..self.n {
            let label = match (self.phi.get(v), grid) {
                (Some(&a), Some(g)) => format!("{v}\\nphi={}", g.action(a)),
                (Some(&a), None) => format!("{v}\\nphi=#{a}"),
                _ => v.to_string(),
            };
            let style = if highlight.contains(&v) {
                ", style=filled, fillcolor=lightblue"
            } else {
                ""
            };
            let _ = writeln!(out, "  {v} [label=\"{label}\"{style}];");
        }
        for (u, v) in &self.edges {
            let _ = writeln!(out, "  {u} -> {v};");
        }
        out.push_str("}\n");
        out
    }
}

/// Overshadowing graph from a fit table and preferred actions.
pub fn build_graph_from_fit(fit: &FitTable, phi: &[usize], tol: f64) -> OvershadowGraph {
    let n = fit.n_params();
    let ranks = RankedPartition::build(fit, phi, RankingScope::FullSet, tol);
    let mut edges = BTreeSet::new();
    for theta in 0..n {
        let a = phi[theta];
        let own = ranks.rank_of(a, theta).expect("full-set ranking covers every parameter");
        for gamma in (0..n).filter(|&g| g != theta) {
            let other = ranks.rank_of(a, gamma).expect("full-set ranking covers every parameter");
            if own >= other {
                edges.insert((theta, gamma));
            }
        }
    }
    OvershadowGraph {
        n,
        edges,
        phi: phi.to_vec(),
        ranks: Some(ranks),
    }
}

pub fn build_graph(scenario: &Scenario, tol: f64) -> Result<OvershadowGraph> {
    let fit = fit_delta(scenario)?;
    let phi = preferred_actions(scenario)?;
    Ok(build_graph_from_fit(&fit, &phi, tol))
}

/// Every nonempty vertex set with no outgoing edge, smallest first.
pub fn closed_sets(g: &OvershadowGraph) -> Result<Vec<Vec<usize>>> {
    if g.n > MAX_CLOSED_SET_VERTICES {
        return Err(Error::TooLarge(format!(
            "{} vertices exceed the exhaustive limit of {MAX_CLOSED_SET_VERTICES}; \
             use the sink components of the SCC condensation instead",
            g.n
        )));
    }
    let mut out_mask = vec![0u32; g.n];
    for &(u, v) in &g.edges {
        out_mask[u] |= 1 << v;
    }
    let mut sets: Vec<Vec<usize>> = (1u32..(1u32 << g.n))
        .filter(|&s| (0..g.n).all(|v| s & (1 << v) == 0 || out_mask[v] & !s == 0))
        .map(|s| (0..g.n).filter(|&v| s & (1 << v) != 0).collect())
        .collect();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(sets)
}

/// Components with sorted members, ordered by their smallest vertex.
pub fn strongly_connected_components(g: &OvershadowGraph) -> Vec<Vec<usize>> {
    let mut graph = DiGraph::<(), ()>::with_capacity(g.n, g.edges.len());
    for _ in 0..g.n {
        graph.add_node(());
    }
    graph.extend_with_edges(g.edges.iter().map(|&(u, v)| (u as u32, v as u32)));
    let mut comps: Vec<Vec<usize>> = petgraph::algo::kosaraju_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut members: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
            members.sort_unstable();
            members
        })
        .collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Components of the condensation with no outgoing edge. Each is a minimal closed set.
pub fn sink_components(g: &OvershadowGraph) -> Vec<Vec<usize>> {
    strongly_connected_components(g)
        .into_iter()
        .filter(|c| g.is_closed(c))
        .collect()
}

/// Outcome of the joint-closure test for one set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointClosure {
    pub jointly_closed: bool,
    /// Mixture weights aligned with the sorted members of the set.
    pub witness: Option<Vec<f64>>,
    /// The set is the whole space, so there are no outsiders to check.
    pub trivial: bool,
}

/// Constraint rows `Δ(θ, a) − Δ(γ, a)` over `θ ∈ S`, one per outsider `γ` and
/// action `a` in the image of `φ` over `S`.
pub fn joint_closure_rows(fit: &FitTable, phi: &[usize], members: &[usize]) -> Vec<Vec<f64>> {
    let actions = attainable_actions(&members.iter().map(|&t| phi[t]).collect::<Vec<_>>());
    let mut rows = Vec::new();
    for gamma in (0..fit.n_params()).filter(|g| !members.contains(g)) {
        for &a in &actions {
            rows.push(members.iter().map(|&t| fit.get(t, a) - fit.get(gamma, a)).collect());
        }
    }
    rows
}

fn normalize_set(set: &[usize], n: usize) -> Result<Vec<usize>> {
    if set.is_empty() {
        return Err(Error::InvalidParameter("joint closure needs a nonempty set".into()));
    }
    if let Some(&index) = set.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index, len: n });
    }
    let mut members = set.to_vec();
    members.sort_unstable();
    members.dedup();
    Ok(members)
}

pub fn joint_closure_from_fit(fit: &FitTable, phi: &[usize], set: &[usize], tol: f64) -> Result<JointClosure> {
    let members = normalize_set(set, fit.n_params())?;
    if members.len() == fit.n_params() {
        let w = 1.0 / members.len() as f64;
        return Ok(JointClosure {
            jointly_closed: true,
            witness: Some(vec![w; members.len()]),
            trivial: true,
        });
    }
    let rows = joint_closure_rows(fit, phi, &members);
    let witness = feasible_mixture(&rows, tol);
    Ok(JointClosure {
        jointly_closed: witness.is_some(),
        witness,
        trivial: false,
    })
}

pub fn jointly_closed_check(scenario: &Scenario, set: &[usize], tol: f64) -> Result<JointClosure> {
    let fit = fit_delta(scenario)?;
    let phi = preferred_actions(scenario)?;
    joint_closure_from_fit(&fit, &phi, set, tol)
}

/// `θ` fits best (within `tol`) among all parameters at its own preferred action.
pub fn individual_concentration_from_fit(fit: &FitTable, phi: &[usize], theta: usize, tol: f64) -> bool {
    let a = phi[theta];
    let best = (0..fit.n_params())
        .map(|g| fit.get(g, a))
        .fold(f64::INFINITY, f64::min);
    fit.get(theta, a) - best <= tol
}

pub fn individual_concentration_check(scenario: &Scenario, theta: usize, tol: f64) -> Result<bool> {
    let n = scenario.space.len();
    if theta >= n {
        return Err(Error::IndexOutOfRange { index: theta, len: n });
    }
    let fit = fit_delta(scenario)?;
    let phi = preferred_actions(scenario)?;
    Ok(individual_concentration_from_fit(&fit, &phi, theta, tol))
}

/// A subset of the pseudo-truth set with its structural flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub members: Vec<usize>,
    pub closed: bool,
    pub strongly_connected: bool,
    pub jointly_closed: bool,
    pub witness_distribution: Option<Vec<f64>>,
}

/// Subsets of `pool` that are strongly connected in the induced subgraph and
/// jointly closed, ordered by size then lexicographically.
pub fn candidates_from_fit(
    fit: &FitTable,
    phi: &[usize],
    pool: &[usize],
    tol: f64,
) -> Result<Vec<CandidateSet>> {
    if pool.len() > MAX_CANDIDATE_VERTICES {
        return Err(Error::TooLarge(format!(
            "pseudo-truth set has {} members, candidate enumeration is limited to {MAX_CANDIDATE_VERTICES}",
            pool.len()
        )));
    }
    let graph = build_graph_from_fit(fit, phi, tol);
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << pool.len()) {
        let members: Vec<usize> = (0..pool.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| pool[i])
            .collect();
        if !graph.is_strongly_connected_within(&members) {
            continue;
        }
        let jc = joint_closure_from_fit(fit, phi, &members, tol)?;
        if !jc.jointly_closed {
            continue;
        }
        out.push(CandidateSet {
            closed: graph.is_closed(&members),
            strongly_connected: true,
            jointly_closed: true,
            witness_distribution: jc.witness,
            members,
        });
    }
    out.sort_by(|a, b| a.members.len().cmp(&b.members.len()).then_with(|| a.members.cmp(&b.members)));
    Ok(out)
}

pub fn candidate_concentration_sets(scenario: &Scenario, tol: f64) -> Result<Vec<CandidateSet>> {
    let fit = fit_delta(scenario)?;
    let phi = preferred_actions(scenario)?;
    let dagger = pseudo_truth_from_fit(&fit, tol);
    candidates_from_fit(&fit, &phi, &dagger, tol)
}
