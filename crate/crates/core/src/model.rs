//! Discrete causal Bayesian networks and the intervention operator.
//!
//! A model is a DAG over categorical nodes plus one conditional probability
//! table per node. Interventional queries are answered exactly by truncated
//! factorization: the intervened node's factor is deleted from the joint and
//! the remainder is summed by exhaustive enumeration. No approximate
//! inference is involved, which keeps every downstream tolerance tight.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Default cap on the number of joint configurations enumerated per query.
/// Override per model with [`CausalModel::with_enum_cap`].
pub const DEFAULT_ENUM_CAP: u64 = 1 << 22;

/// Tolerance for probability-row normalization.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model is not well-formed:{}", render_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("state {state} out of range for node `{node}` (cardinality {card})")]
    StateOutOfRange { node: String, state: usize, card: usize },
    #[error("assignment is missing node `{0}`")]
    MissingAssignment(String),
    #[error("node `{0}` appears in more than one role of the query")]
    OverlappingQuery(String),
    #[error("query needs {required} joint configurations, above the enumeration cap {cap}")]
    EnumerationCap { required: u128, cap: u64 },
    #[error("treatment node `{node}` must be binary, has cardinality {card}")]
    TreatmentNotBinary { node: String, card: usize },
    #[error("evidence has zero probability under the model")]
    ImpossibleEvidence,
    #[error("model file: {0}")]
    Parse(String),
}

fn render_violations(vs: &[Violation]) -> String {
    let mut out = String::new();
    for v in vs {
        out.push_str("\n  - ");
        out.push_str(&v.to_string());
    }
    out
}

/// One structural or numeric defect found while checking a model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    DuplicateNode { node: String },
    BadCardinality { node: String, card: usize },
    UnknownEdgeNode { node: String },
    SelfLoop { node: String },
    DuplicateEdge { parent: String, child: String },
    Cycle { nodes: Vec<String> },
    MissingCpt { node: String },
    UnknownCptNode { node: String },
    ParentMismatch { node: String, expected: Vec<String>, found: Vec<String> },
    DuplicateParent { node: String, parent: String },
    TableLength { node: String, expected: usize, found: usize },
    NegativeEntry { node: String, row: usize },
    RowNotNormalized { node: String, row: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNode { node } => write!(f, "node `{node}` declared more than once"),
            Violation::BadCardinality { node, card } => {
                write!(f, "node `{node}` has cardinality {card}, need at least 2")
            }
            Violation::UnknownEdgeNode { node } => {
                write!(f, "edge endpoint `{node}` is not a declared node")
            }
            Violation::SelfLoop { node } => write!(f, "self-loop on node `{node}`"),
            Violation::DuplicateEdge { parent, child } => {
                write!(f, "edge `{parent}` -> `{child}` declared more than once")
            }
            Violation::Cycle { nodes } => write!(f, "cycle through nodes {}", nodes.join(", ")),
            Violation::MissingCpt { node } => write!(f, "no CPT for node `{node}`"),
            Violation::UnknownCptNode { node } => {
                write!(f, "CPT given for undeclared node `{node}`")
            }
            Violation::ParentMismatch { node, expected, found } => write!(
                f,
                "CPT parents for `{node}` are [{}], edges require [{}]",
                found.join(", "),
                expected.join(", ")
            ),
            Violation::DuplicateParent { node, parent } => {
                write!(f, "CPT for `{node}` lists parent `{parent}` twice")
            }
            Violation::TableLength { node, expected, found } => write!(
                f,
                "CPT table for `{node}` has {found} entries, expected {expected}"
            ),
            Violation::NegativeEntry { node, row } => {
                write!(f, "CPT for `{node}` has a negative entry in row {row}")
            }
            Violation::RowNotNormalized { node, row, sum } => {
                write!(f, "CPT row {row} of `{node}` sums to {sum}, expected 1")
            }
        }
    }
}

/// Node declaration: a name and the number of categorical states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub card: usize,
}

/// One node's CPT as written in a model file: `parents` fixes the table
/// layout, `table` is row-major over parent configurations with the
/// last-declared parent varying fastest, each row of length `card`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CptSpec {
    pub parents: Vec<String>,
    pub table: Vec<f64>,
}

/// The on-disk model description (JSON). Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub cpts: BTreeMap<String, CptSpec>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    /// All defects in this description. An empty list means
    /// [`CausalModel::from_spec`] will succeed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut vs = graph_violations(&self.nodes, &self.edges);
        // CPT checks only make sense against a coherent node/edge set.
        if !vs.is_empty() {
            return vs;
        }
        let names: Vec<&str> = self.nodes.iter().map(|n| n.name.as_str()).collect();
        let card_of: BTreeMap<&str, usize> =
            self.nodes.iter().map(|n| (n.name.as_str(), n.card)).collect();
        for key in self.cpts.keys() {
            if !card_of.contains_key(key.as_str()) {
                vs.push(Violation::UnknownCptNode { node: key.clone() });
            }
        }
        for &name in &names {
            let Some(cpt) = self.cpts.get(name) else {
                vs.push(Violation::MissingCpt { node: name.to_string() });
                continue;
            };
            let mut expected: Vec<String> = self
                .edges
                .iter()
                .filter(|(_, c)| c == name)
                .map(|(p, _)| p.clone())
                .collect();
            expected.sort();
            let mut found = cpt.parents.clone();
            found.sort();
            let mut dup = false;
            for w in found.windows(2) {
                if w[0] == w[1] {
                    vs.push(Violation::DuplicateParent {
                        node: name.to_string(),
                        parent: w[0].clone(),
                    });
                    dup = true;
                }
            }
            if dup {
                continue;
            }
            if expected != found {
                vs.push(Violation::ParentMismatch {
                    node: name.to_string(),
                    expected,
                    found,
                });
                continue;
            }
            let card = card_of[name];
            let rows: usize = cpt.parents.iter().map(|p| card_of[p.as_str()]).product();
            let expected_len = rows * card;
            if cpt.table.len() != expected_len {
                vs.push(Violation::TableLength {
                    node: name.to_string(),
                    expected: expected_len,
                    found: cpt.table.len(),
                });
                continue;
            }
            for row in 0..rows {
                let slice = &cpt.table[row * card..(row + 1) * card];
                if slice.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                    vs.push(Violation::NegativeEntry { node: name.to_string(), row });
                    continue;
                }
                let sum: f64 = slice.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    vs.push(Violation::RowNotNormalized { node: name.to_string(), row, sum });
                }
            }
        }
        vs
    }
}

fn graph_violations(nodes: &[NodeSpec], edges: &[(String, String)]) -> Vec<Violation> {
    let mut vs = Vec::new();
    let mut seen = BTreeSet::new();
    for n in nodes {
        if !seen.insert(n.name.as_str()) {
            vs.push(Violation::DuplicateNode { node: n.name.clone() });
        }
        if n.card < 2 {
            vs.push(Violation::BadCardinality { node: n.name.clone(), card: n.card });
        }
    }
    let mut seen_edges = BTreeSet::new();
    for (p, c) in edges {
        for end in [p, c] {
            if !seen.contains(end.as_str()) {
                vs.push(Violation::UnknownEdgeNode { node: end.clone() });
            }
        }
        if p == c {
            vs.push(Violation::SelfLoop { node: p.clone() });
        }
        if !seen_edges.insert((p.as_str(), c.as_str())) {
            vs.push(Violation::DuplicateEdge { parent: p.clone(), child: c.clone() });
        }
    }
    if !vs.is_empty() {
        return vs;
    }
    // Kahn's algorithm; whatever survives sits on a cycle.
    let index: BTreeMap<&str, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
    let mut indegree = vec![0usize; nodes.len()];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (p, c) in edges {
        indegree[index[c.as_str()]] += 1;
        children[index[p.as_str()]].push(index[c.as_str()]);
    }
    let mut queue: Vec<usize> = (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
    let mut removed = 0;
    while let Some(i) = queue.pop() {
        removed += 1;
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push(c);
            }
        }
    }
    if removed != nodes.len() {
        let cyclic: Vec<String> = (0..nodes.len())
            .filter(|&i| indegree[i] > 0)
            .map(|i| nodes[i].name.clone())
            .collect();
        vs.push(Violation::Cycle { nodes: cyclic });
    }
    vs
}

/// A DAG over categorical nodes. Nodes are stored in a topological order
/// (parents precede children), so iterating `0..node_count()` is always a
/// valid sampling or factorization order.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraph {
    nodes: Vec<NodeSpec>,
    parents: Vec<Vec<usize>>, // ascending node indices
    edges: Vec<(usize, usize)>,
    index: BTreeMap<String, usize>,
}

impl CausalGraph {
    pub fn new(nodes: Vec<NodeSpec>, edges: &[(String, String)]) -> Result<Self, ModelError> {
        let vs = graph_violations(&nodes, edges);
        if !vs.is_empty() {
            return Err(ModelError::Invalid(vs));
        }
        // Stable Kahn: among ready nodes keep declared order, so already
        // topological declarations are preserved verbatim.
        let declared: BTreeMap<&str, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
        let mut indegree = vec![0usize; nodes.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (p, c) in edges {
            indegree[declared[c.as_str()]] += 1;
            children[declared[p.as_str()]].push(declared[c.as_str()]);
        }
        let mut order = Vec::with_capacity(nodes.len());
        let mut ready: Vec<usize> = (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
        while !ready.is_empty() {
            let i = ready.remove(0);
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    let pos = ready.binary_search(&c).unwrap_err();
                    ready.insert(pos, c);
                }
            }
        }
        let nodes: Vec<NodeSpec> = order.iter().map(|&i| nodes[i].clone()).collect();
        let index: BTreeMap<String, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), i)).collect();
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut idx_edges = Vec::with_capacity(edges.len());
        for (p, c) in edges {
            let (pi, ci) = (index[p.as_str()], index[c.as_str()]);
            parents[ci].push(pi);
            idx_edges.push((pi, ci));
        }
        for ps in &mut parents {
            ps.sort_unstable();
        }
        idx_edges.sort_unstable();
        Ok(CausalGraph { nodes, parents, edges: idx_edges, index })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_name(&self, i: usize) -> &str {
        &self.nodes[i].name
    }

    pub fn card(&self, i: usize) -> usize {
        self.nodes[i].card
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Parent indices in stored (topological) order.
    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn require(&self, name: &str) -> Result<usize, ModelError> {
        self.node_index(name)
            .ok_or_else(|| ModelError::UnknownNode(name.to_string()))
    }
}

/// One node's table: rows indexed by parent configuration (parents in graph
/// order, last parent varying fastest), each row a distribution over the
/// node's states.
#[derive(Debug, Clone, PartialEq)]
struct CptTable {
    parents: Vec<usize>,
    parent_cards: Vec<usize>,
    card: usize,
    probs: Vec<f64>,
}

impl CptTable {
    fn row_of(&self, states: impl Fn(usize) -> usize) -> usize {
        let mut row = 0;
        for (&p, &c) in self.parents.iter().zip(&self.parent_cards) {
            row = row * c + states(p);
        }
        row
    }

    fn row(&self, row: usize) -> &[f64] {
        &self.probs[row * self.card..(row + 1) * self.card]
    }
}

/// The set of all node CPTs, aligned with a graph's stored node order.
#[derive(Debug, Clone, PartialEq)]
pub struct CptSet {
    tables: Vec<CptTable>,
}

impl CptSet {
    /// Build from one flat row-major table per node, in graph node order with
    /// parents in graph order and the last parent varying fastest.
    pub fn from_tables(graph: &CausalGraph, tables: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        if tables.len() != graph.node_count() {
            return Err(ModelError::Invalid(vec![Violation::MissingCpt {
                node: graph.node_name(tables.len().min(graph.node_count() - 1)).to_string(),
            }]));
        }
        let mut out = Vec::with_capacity(tables.len());
        let mut vs = Vec::new();
        for (i, probs) in tables.into_iter().enumerate() {
            let parents = graph.parents(i).to_vec();
            let parent_cards: Vec<usize> = parents.iter().map(|&p| graph.card(p)).collect();
            let card = graph.card(i);
            let rows: usize = parent_cards.iter().product();
            if probs.len() != rows * card {
                vs.push(Violation::TableLength {
                    node: graph.node_name(i).to_string(),
                    expected: rows * card,
                    found: probs.len(),
                });
                out.push(CptTable { parents, parent_cards, card, probs: vec![] });
                continue;
            }
            for row in 0..rows {
                let slice = &probs[row * card..(row + 1) * card];
                if slice.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                    vs.push(Violation::NegativeEntry { node: graph.node_name(i).to_string(), row });
                    continue;
                }
                let sum: f64 = slice.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    vs.push(Violation::RowNotNormalized {
                        node: graph.node_name(i).to_string(),
                        row,
                        sum,
                    });
                }
            }
            out.push(CptTable { parents, parent_cards, card, probs });
        }
        if !vs.is_empty() {
            return Err(ModelError::Invalid(vs));
        }
        Ok(CptSet { tables: out })
    }
}

/// An interventional query `p(target | do(...), evidence)`. Evidence is
/// ordinary conditioning and may be empty; the treatment-effect paths never
/// set it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterventionQuery {
    pub do_assignments: BTreeMap<String, usize>,
    pub target: String,
    pub evidence: BTreeMap<String, usize>,
}

impl InterventionQuery {
    pub fn doing(node: &str, state: usize, target: &str) -> Self {
        InterventionQuery {
            do_assignments: BTreeMap::from([(node.to_string(), state)]),
            target: target.to_string(),
            evidence: BTreeMap::new(),
        }
    }

    pub fn observing(node: &str, state: usize, target: &str) -> Self {
        InterventionQuery {
            do_assignments: BTreeMap::new(),
            target: target.to_string(),
            evidence: BTreeMap::from([(node.to_string(), state)]),
        }
    }
}

/// A validated graph + CPT pair, the unit every exact computation runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalModel {
    graph: CausalGraph,
    cpts: CptSet,
    enum_cap: u64,
}

impl CausalModel {
    /// Validate a description and build the model. Any violation aborts.
    pub fn from_spec(spec: &ModelSpec) -> Result<Self, ModelError> {
        let vs = spec.validate();
        if !vs.is_empty() {
            return Err(ModelError::Invalid(vs));
        }
        let graph = CausalGraph::new(spec.nodes.clone(), &spec.edges)?;
        // Reindex each file table (file parent order, last-declared fastest)
        // into canonical graph parent order.
        let mut tables = Vec::with_capacity(graph.node_count());
        for i in 0..graph.node_count() {
            let name = graph.node_name(i);
            let cpt = &spec.cpts[name];
            let file_parents: Vec<usize> =
                cpt.parents.iter().map(|p| graph.node_index(p).unwrap()).collect();
            let file_cards: Vec<usize> = file_parents.iter().map(|&p| graph.card(p)).collect();
            let canon_parents = graph.parents(i);
            let canon_cards: Vec<usize> = canon_parents.iter().map(|&p| graph.card(p)).collect();
            let card = graph.card(i);
            let rows: usize = canon_cards.iter().product();
            let mut probs = vec![0.0; rows * card];
            let mut states = vec![0usize; canon_parents.len()];
            for row in 0..rows {
                // decode canonical row -> per-parent states (last fastest)
                let mut rem = row;
                for j in (0..canon_parents.len()).rev() {
                    states[j] = rem % canon_cards[j];
                    rem /= canon_cards[j];
                }
                let mut file_row = 0;
                for (fp, fc) in file_parents.iter().zip(&file_cards) {
                    let pos = canon_parents.iter().position(|p| p == fp).unwrap();
                    file_row = file_row * fc + states[pos];
                }
                probs[row * card..(row + 1) * card]
                    .copy_from_slice(&cpt.table[file_row * card..(file_row + 1) * card]);
            }
            tables.push(probs);
        }
        let cpts = CptSet::from_tables(&graph, tables)?;
        Ok(CausalModel { graph, cpts, enum_cap: DEFAULT_ENUM_CAP })
    }

    pub fn new(graph: CausalGraph, cpts: CptSet) -> Self {
        CausalModel { graph, cpts, enum_cap: DEFAULT_ENUM_CAP }
    }

    pub fn with_enum_cap(mut self, cap: u64) -> Self {
        self.enum_cap = cap;
        self
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    /// Write the model back out with nodes in stored order and tables in
    /// canonical layout.
    pub fn to_spec(&self) -> ModelSpec {
        let nodes = self.graph.nodes().to_vec();
        let edges = self
            .graph
            .edges()
            .iter()
            .map(|&(p, c)| (self.graph.node_name(p).to_string(), self.graph.node_name(c).to_string()))
            .collect();
        let mut cpts = BTreeMap::new();
        for (i, t) in self.cpts.tables.iter().enumerate() {
            cpts.insert(
                self.graph.node_name(i).to_string(),
                CptSpec {
                    parents: t.parents.iter().map(|&p| self.graph.node_name(p).to_string()).collect(),
                    table: t.probs.clone(),
                },
            );
        }
        ModelSpec { nodes, edges, cpts }
    }

    /// CPT lookup: `p(node = state | parents = parent_states)`, states given
    /// in graph parent order.
    pub fn cpt_prob(&self, node: usize, parent_states: &[usize], state: usize) -> f64 {
        let t = &self.cpts.tables[node];
        debug_assert_eq!(parent_states.len(), t.parents.len());
        let mut row = 0;
        for (j, &c) in t.parent_cards.iter().enumerate() {
            row = row * c + parent_states[j];
        }
        t.row(row)[state]
    }

    /// Joint probability of a full assignment given by node name.
    pub fn joint_probability(
        &self,
        assignment: &BTreeMap<String, usize>,
    ) -> Result<f64, ModelError> {
        let mut codes = vec![0usize; self.graph.node_count()];
        for (name, &state) in assignment {
            let i = self.graph.require(name)?;
            if state >= self.graph.card(i) {
                return Err(ModelError::StateOutOfRange {
                    node: name.clone(),
                    state,
                    card: self.graph.card(i),
                });
            }
            codes[i] = state;
        }
        for i in 0..self.graph.node_count() {
            if !assignment.contains_key(self.graph.node_name(i)) {
                return Err(ModelError::MissingAssignment(self.graph.node_name(i).to_string()));
            }
        }
        Ok(self.joint_by_codes(&codes))
    }

    /// Joint probability of a full assignment in stored node order.
    /// Factors multiply in that order, giving a fixed evaluation sequence.
    pub fn joint_by_codes(&self, codes: &[usize]) -> f64 {
        let mut p = 1.0;
        for (i, t) in self.cpts.tables.iter().enumerate() {
            let row = t.row_of(|parent| codes[parent]);
            p *= t.row(row)[codes[i]];
        }
        p
    }

    /// Exact `p(target | do(...), evidence)` by truncated factorization.
    ///
    /// Enumeration runs over the free nodes in stored order with the last
    /// node varying fastest; the result for a pure intervention is the raw
    /// truncated sum (it sums to one analytically), while evidence triggers
    /// normalization by the evidence mass.
    pub fn interventional_distribution(
        &self,
        query: &InterventionQuery,
    ) -> Result<Vec<f64>, ModelError> {
        let n = self.graph.node_count();
        let target = self.graph.require(&query.target)?;
        let mut fixed: Vec<Option<usize>> = vec![None; n];
        let mut intervened = vec![false; n];
        let mut seen = BTreeSet::new();
        seen.insert(target);
        for (map, is_do) in [(&query.do_assignments, true), (&query.evidence, false)] {
            for (name, &state) in map {
                let i = self.graph.require(name)?;
                if state >= self.graph.card(i) {
                    return Err(ModelError::StateOutOfRange {
                        node: name.clone(),
                        state,
                        card: self.graph.card(i),
                    });
                }
                if !seen.insert(i) {
                    return Err(ModelError::OverlappingQuery(name.clone()));
                }
                fixed[i] = Some(state);
                intervened[i] = is_do;
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let mut required: u128 = 1;
        for &i in &free {
            required = required.saturating_mul(self.graph.card(i) as u128);
        }
        if required > self.enum_cap as u128 {
            return Err(ModelError::EnumerationCap { required, cap: self.enum_cap });
        }
        let mut codes: Vec<usize> = (0..n).map(|i| fixed[i].unwrap_or(0)).collect();
        let mut dist = vec![0.0; self.graph.card(target)];
        loop {
            let mut w = 1.0;
            for (i, t) in self.cpts.tables.iter().enumerate() {
                if intervened[i] {
                    continue; // the do() factor is deleted from the joint
                }
                let row = t.row_of(|parent| codes[parent]);
                w *= t.row(row)[codes[i]];
            }
            dist[codes[target]] += w;
            // odometer over free nodes, last varying fastest
            let mut pos = free.len();
            loop {
                if pos == 0 {
                    break;
                }
                let i = free[pos - 1];
                codes[i] += 1;
                if codes[i] < self.graph.card(i) {
                    break;
                }
                codes[i] = 0;
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
        }
        if !query.evidence.is_empty() {
            let total: f64 = dist.iter().sum();
            if total <= 0.0 {
                return Err(ModelError::ImpossibleEvidence);
            }
            for d in &mut dist {
                *d /= total;
            }
        }
        Ok(dist)
    }

    /// `E[outcome | do(treatment=1)] - E[outcome | do(treatment=0)]`, with
    /// outcome states read as the numeric values `0..card-1`.
    pub fn true_ate(&self, treatment: &str, outcome: &str) -> Result<f64, ModelError> {
        let t = self.graph.require(treatment)?;
        self.graph.require(outcome)?;
        if self.graph.card(t) != 2 {
            return Err(ModelError::TreatmentNotBinary {
                node: treatment.to_string(),
                card: self.graph.card(t),
            });
        }
        let mut means = [0.0; 2];
        for arm in 0..2 {
            let dist = self
                .interventional_distribution(&InterventionQuery::doing(treatment, arm, outcome))?;
            means[arm] = dist.iter().enumerate().map(|(s, p)| s as f64 * p).sum();
        }
        Ok(means[1] - means[0])
    }
}
