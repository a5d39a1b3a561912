//! Graph primitives for causal models with explicit design nodes.
//!
//! Nodes come in three kinds: causal variables, selection indicators, and
//! data nodes. A selection node is a binary switch saying whether an
//! individual enters a given phase of a study; a data node is the recorded
//! copy of a causal variable and exists only where its selection parent is 1.
//! [`Graph`] is the raw mutable structure; [`DesignGraph`] wraps a graph that
//! has passed validation and is the required input for most analyses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;

use serde::Serialize;
use thiserror::Error;

/// Role a node plays in a design graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NodeKind {
    /// An ordinary random variable of the causal model.
    Causal,
    /// A binary indicator of inclusion in some phase of the study.
    Selection,
    /// The recorded value of a causal variable, defined when selected.
    Data,
}

/// What the analyst knows about a node's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum InfoAttr {
    /// Realized and recorded.
    Observed,
    /// Realized but not available to the analyst.
    NotObserved,
    /// Fixed by the study design, value known (e.g. a planned assignment).
    DeterminedKnown,
    /// Fixed by the design but its value is not available.
    DeterminedUnknown,
}

impl InfoAttr {
    /// Rendering glyph as `(shape, filled)`. Random variables draw as
    /// circles, determined ones as diamonds; the glyph is filled when the
    /// value is available to the analyst.
    pub fn glyph(self) -> (&'static str, bool) {
        match self {
            InfoAttr::Observed => ("circle", true),
            InfoAttr::NotObserved => ("circle", false),
            InfoAttr::DeterminedKnown => ("diamond", true),
            InfoAttr::DeterminedUnknown => ("diamond", false),
        }
    }

    /// True when the node's value is available to the analyst.
    pub fn known(self) -> bool {
        matches!(self, InfoAttr::Observed | InfoAttr::DeterminedKnown)
    }

    /// True when the node's value is fixed by the design rather than random.
    pub fn determined(self) -> bool {
        matches!(self, InfoAttr::DeterminedKnown | InfoAttr::DeterminedUnknown)
    }
}

/// Conventional binary domain used when a node declares none.
pub const BINARY_DOMAIN: [&str; 2] = ["0", "1"];

/// A single node of a [`Graph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub info: InfoAttr,
    /// Finite value domain; `None` means the binary domain `{0, 1}`.
    pub domain: Option<Vec<String>>,
    /// Study stage used for layout; `None` derives it from the parents.
    pub stage: Option<i64>,
    /// Selection depends on other individuals' records as well as this one's.
    pub shared: bool,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind, info: InfoAttr) -> Self {
        Node { id: id.into(), kind, info, domain: None, stage: None, shared: false }
    }

    pub fn causal(id: impl Into<String>, info: InfoAttr) -> Self {
        Node::new(id, NodeKind::Causal, info)
    }

    pub fn selection(id: impl Into<String>, info: InfoAttr) -> Self {
        Node::new(id, NodeKind::Selection, info)
    }

    pub fn data(id: impl Into<String>) -> Self {
        Node::new(id, NodeKind::Data, InfoAttr::Observed)
    }

    pub fn with_domain(mut self, domain: &[&str]) -> Self {
        self.domain = Some(domain.iter().map(|v| v.to_string()).collect());
        self
    }

    pub fn with_stage(mut self, stage: i64) -> Self {
        self.stage = Some(stage);
        self
    }

    pub fn with_shared(mut self) -> Self {
        self.shared = true;
        self
    }

    /// The node's domain, falling back to the binary convention.
    pub fn domain_values(&self) -> Vec<&str> {
        match &self.domain {
            Some(vs) => vs.iter().map(|v| v.as_str()).collect(),
            None => BINARY_DOMAIN.to_vec(),
        }
    }
}

/// Errors from graph construction and lookups.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("invalid node id `{0}`")]
    InvalidId(String),
    #[error("self loop on `{0}`")]
    SelfLoop(String),
    #[error("graph contains a directed cycle")]
    Cycle,
    #[error("`{0}` is not a causal node")]
    NotCausal(String),
    #[error("graph is not a valid design graph:\n{0}")]
    Invalid(ValidationReport),
}

/// One violated structural rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Stable rule identifier, usable for programmatic matching.
    pub rule: &'static str,
    /// Node the violation is attached to, when there is a single culprit.
    pub subject: Option<String>,
    pub message: String,
}

/// Outcome of validating a graph against the design-graph rules.
///
/// Violations are reported in a deterministic order: rules in a fixed
/// sequence, subjects sorted by node id within each rule.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            match &v.subject {
                Some(s) => write!(f, "[{}] {}: {}", v.rule, s, v.message)?,
                None => write!(f, "[{}] {}", v.rule, v.message)?,
            }
        }
        Ok(())
    }
}

/// A directed graph over typed nodes. May be structurally arbitrary (beyond
/// acyclicity nothing is enforced at construction); see [`DesignGraph`] for
/// the validated form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    name: String,
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    edges: BTreeSet<(usize, usize)>,
    population: Option<usize>,
}

fn valid_id(id: &str) -> bool {
    let mut chars = id.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '\'' | '*'))
}

impl Graph {
    pub fn new(name: impl Into<String>) -> Self {
        Graph {
            name: name.into(),
            nodes: Vec::new(),
            index: BTreeMap::new(),
            edges: BTreeSet::new(),
            population: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add_node(&mut self, node: Node) -> Result<usize, GraphError> {
        if !valid_id(&node.id) {
            return Err(GraphError::InvalidId(node.id.clone()));
        }
        if self.index.contains_key(&node.id) {
            return Err(GraphError::DuplicateNode(node.id.clone()));
        }
        let ix = self.nodes.len();
        self.index.insert(node.id.clone(), ix);
        self.nodes.push(node);
        Ok(ix)
    }

    /// Adds a data node measuring `causal` under `selection`, with its two
    /// defining edges.
    pub fn add_measurement(
        &mut self,
        data_id: impl Into<String>,
        causal: &str,
        selection: &str,
    ) -> Result<usize, GraphError> {
        let data_id = data_id.into();
        let c = self.idx(causal)?;
        let s = self.idx(selection)?;
        let d = self.add_node(Node::data(data_id))?;
        self.edges.insert((c, d));
        self.edges.insert((s, d));
        Ok(d)
    }

    pub fn idx(&self, id: &str) -> Result<usize, GraphError> {
        self.index.get(id).copied().ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn node(&self, ix: usize) -> &Node {
        &self.nodes[ix]
    }

    pub fn node_by_id(&self, id: &str) -> Option<&Node> {
        self.index.get(id).map(|&ix| &self.nodes[ix])
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [Node] {
        &mut self.nodes
    }

    /// Sets or clears a node's explicit stage.
    pub fn set_stage(&mut self, id: &str, stage: Option<i64>) -> Result<(), GraphError> {
        let ix = self.idx(id)?;
        self.nodes[ix].stage = stage;
        Ok(())
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.id.as_str())
    }

    /// Adds an edge; adding an existing edge is a no-op.
    pub fn add_edge(&mut self, from: &str, to: &str) -> Result<(), GraphError> {
        let f = self.idx(from)?;
        let t = self.idx(to)?;
        if f == t {
            return Err(GraphError::SelfLoop(from.to_string()));
        }
        self.edges.insert((f, t));
        Ok(())
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&f), Some(&t)) => self.edges.contains(&(f, t)),
            _ => false,
        }
    }

    pub fn edge_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge_idx(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Edges as `(from, to)` id pairs, sorted by id.
    pub fn edge_ids(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = self
            .edges
            .iter()
            .map(|&(f, t)| (self.nodes[f].id.as_str(), self.nodes[t].id.as_str()))
            .collect();
        out.sort();
        out
    }

    pub fn parents_idx(&self, ix: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(_, t)| t == ix).map(|&(f, _)| f).collect()
    }

    pub fn children_idx(&self, ix: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(f, _)| f == ix).map(|&(_, t)| t).collect()
    }

    pub fn parents(&self, id: &str) -> Result<Vec<&str>, GraphError> {
        Ok(self.parents_idx(self.idx(id)?).into_iter().map(|i| self.nodes[i].id.as_str()).collect())
    }

    pub fn children(&self, id: &str) -> Result<Vec<&str>, GraphError> {
        Ok(self
            .children_idx(self.idx(id)?)
            .into_iter()
            .map(|i| self.nodes[i].id.as_str())
            .collect())
    }

    pub fn set_population(&mut self, id: &str) -> Result<(), GraphError> {
        self.population = Some(self.idx(id)?);
        Ok(())
    }

    pub fn population_id(&self) -> Option<&str> {
        self.population.map(|ix| self.nodes[ix].id.as_str())
    }

    /// Topological order with ties broken by node id, so the result is
    /// independent of declaration order. Errors on cyclic graphs.
    pub fn topo_order(&self) -> Result<Vec<usize>, GraphError> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for &(_, t) in &self.edges {
            indeg[t] += 1;
        }
        // Ready set keyed by id for deterministic extraction.
        let mut ready: BTreeSet<(&str, usize)> = (0..n)
            .filter(|&i| indeg[i] == 0)
            .map(|i| (self.nodes[i].id.as_str(), i))
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&(id, ix)) = ready.iter().next() {
            ready.remove(&(id, ix));
            order.push(ix);
            for c in self.children_idx(ix) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert((self.nodes[c].id.as_str(), c));
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(GraphError::Cycle)
        }
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_ok()
    }

    /// Position of each node in the canonical topological order.
    pub fn topo_index(&self) -> Result<Vec<usize>, GraphError> {
        let order = self.topo_order()?;
        let mut pos = vec![0usize; self.nodes.len()];
        for (p, &ix) in order.iter().enumerate() {
            pos[ix] = p;
        }
        Ok(pos)
    }

    /// Longest-path depth of every node: roots sit at layer 0, every other
    /// node one past its deepest parent.
    pub fn topo_layers(&self) -> Result<BTreeMap<String, usize>, GraphError> {
        let order = self.topo_order()?;
        let mut layer: BTreeMap<String, usize> = BTreeMap::new();
        for ix in order {
            let depth = self
                .parents_idx(ix)
                .into_iter()
                .map(|p| layer[self.nodes[p].id.as_str()] + 1)
                .max()
                .unwrap_or(0);
            layer.insert(self.nodes[ix].id.clone(), depth);
        }
        Ok(layer)
    }

    fn closure(&self, seed: BTreeSet<usize>, up: bool) -> BTreeSet<usize> {
        let mut seen = seed.clone();
        let mut stack: Vec<usize> = seed.into_iter().collect();
        while let Some(ix) = stack.pop() {
            let next = if up { self.parents_idx(ix) } else { self.children_idx(ix) };
            for nb in next {
                if seen.insert(nb) {
                    stack.push(nb);
                }
            }
        }
        seen
    }

    pub fn ancestors_idx(&self, seed: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        self.closure(seed.into_iter().collect(), true)
    }

    pub fn descendants_idx(&self, seed: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        self.closure(seed.into_iter().collect(), false)
    }

    /// Ancestor set of `ids`, including `ids` themselves.
    pub fn ancestors(&self, ids: &[&str]) -> Result<BTreeSet<String>, GraphError> {
        let seed = ids.iter().map(|id| self.idx(id)).collect::<Result<Vec<_>, _>>()?;
        Ok(self.ancestors_idx(seed).into_iter().map(|i| self.nodes[i].id.clone()).collect())
    }

    /// Descendant set of `ids`, including `ids` themselves.
    pub fn descendants(&self, ids: &[&str]) -> Result<BTreeSet<String>, GraphError> {
        let seed = ids.iter().map(|id| self.idx(id)).collect::<Result<Vec<_>, _>>()?;
        Ok(self.descendants_idx(seed).into_iter().map(|i| self.nodes[i].id.clone()).collect())
    }

    fn resolve(&self, ids: &[&str]) -> Result<BTreeSet<usize>, GraphError> {
        ids.iter().map(|id| self.idx(id)).collect()
    }

    /// Copy of the graph with all edges into `ids` removed.
    pub fn remove_incoming(&self, ids: &[&str]) -> Result<Graph, GraphError> {
        let cut = self.resolve(ids)?;
        let mut g = self.clone();
        g.edges.retain(|&(_, t)| !cut.contains(&t));
        Ok(g)
    }

    /// Copy of the graph with all edges out of `ids` removed.
    pub fn remove_outgoing(&self, ids: &[&str]) -> Result<Graph, GraphError> {
        let cut = self.resolve(ids)?;
        let mut g = self.clone();
        g.edges.retain(|&(f, _)| !cut.contains(&f));
        Ok(g)
    }

    /// Induced subgraph on `keep` (node indices are re-assigned; ids and
    /// attributes are preserved).
    pub fn induced(&self, keep: &BTreeSet<usize>) -> Graph {
        let mut g = Graph::new(self.name.clone());
        for (ix, node) in self.nodes.iter().enumerate() {
            if keep.contains(&ix) {
                g.add_node(node.clone()).expect("induced subgraph reuses valid unique ids");
            }
        }
        for &(f, t) in &self.edges {
            if keep.contains(&f) && keep.contains(&t) {
                g.add_edge(&self.nodes[f].id, &self.nodes[t].id).unwrap();
            }
        }
        if let Some(p) = self.population {
            if keep.contains(&p) {
                g.set_population(&self.nodes[p].id.clone()).unwrap();
            }
        }
        g
    }

    /// Induced subgraph on the causal nodes only.
    pub fn causal_projection(&self) -> Graph {
        let keep = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind == NodeKind::Causal)
            .collect();
        self.induced(&keep)
    }

    pub fn kind_indices(&self, kind: NodeKind) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind == kind).collect()
    }

    /// Resolved stage per node: explicit stage wins; the population node
    /// defaults to 0; anything else defaults to the maximum of its parents'
    /// resolved stages (0 when parentless).
    pub fn stages(&self) -> Result<Vec<i64>, GraphError> {
        let order = self.topo_order()?;
        let mut out = vec![0i64; self.nodes.len()];
        for ix in order {
            let node = &self.nodes[ix];
            out[ix] = match node.stage {
                Some(s) => s,
                None if Some(ix) == self.population => 0,
                None => self.parents_idx(ix).into_iter().map(|p| out[p]).max().unwrap_or(0),
            };
        }
        Ok(out)
    }

    /// The population node: the declared one, or — when none is declared —
    /// the unique selection node that is an ancestor of every selection node.
    pub fn resolve_population(&self) -> Option<usize> {
        if let Some(p) = self.population {
            return Some(p);
        }
        let selections = self.kind_indices(NodeKind::Selection);
        let candidates: Vec<usize> = selections
            .iter()
            .copied()
            .filter(|&s| {
                let desc = self.descendants_idx([s]);
                selections.iter().all(|t| desc.contains(t))
            })
            .collect();
        match candidates.as_slice() {
            [unique] => Some(*unique),
            _ => None,
        }
    }

    /// Checks the structural rules for design graphs. An empty report means
    /// the graph can be wrapped in a [`DesignGraph`].
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        if !self.is_acyclic() {
            violations.push(Violation {
                rule: "acyclic",
                subject: None,
                message: "graph contains a directed cycle".into(),
            });
        }

        let population = self.resolve_population();
        match population {
            None => violations.push(Violation {
                rule: "unique-population",
                subject: None,
                message: "no unique population node".into(),
            }),
            Some(p) => {
                if self.nodes[p].kind != NodeKind::Selection {
                    violations.push(Violation {
                        rule: "population-kind",
                        subject: Some(self.nodes[p].id.clone()),
                        message: "population node must be a selection node".into(),
                    });
                } else if self.is_acyclic() {
                    let desc = self.descendants_idx([p]);
                    for s in self.kind_indices(NodeKind::Selection) {
                        if !desc.contains(&s) {
                            violations.push(Violation {
                                rule: "population-ancestry",
                                subject: Some(self.nodes[s].id.clone()),
                                message: format!(
                                    "selection node `{}` is not a descendant of the population \
                                     node `{}`",
                                    self.nodes[s].id, self.nodes[p].id
                                ),
                            });
                        }
                    }
                }
            }
        }

        for d in self.kind_indices(NodeKind::Data) {
            let parents = self.parents_idx(d);
            let causal: Vec<usize> =
                parents.iter().copied().filter(|&p| self.nodes[p].kind == NodeKind::Causal).collect();
            let selection: Vec<usize> = parents
                .iter()
                .copied()
                .filter(|&p| self.nodes[p].kind == NodeKind::Selection)
                .collect();
            if parents.len() != 2 || causal.len() != 1 || selection.len() != 1 {
                violations.push(Violation {
                    rule: "data-node-form",
                    subject: Some(self.nodes[d].id.clone()),
                    message: format!(
                        "data node `{}` must have exactly one causal parent and one selection \
                         parent (found {} parents, {} causal, {} selection)",
                        self.nodes[d].id,
                        parents.len(),
                        causal.len(),
                        selection.len()
                    ),
                });
            }
            if self.nodes[d].info != InfoAttr::Observed {
                violations.push(Violation {
                    rule: "data-node-observed",
                    subject: Some(self.nodes[d].id.clone()),
                    message: format!("data node `{}` must be observed", self.nodes[d].id),
                });
            }
        }

        for c in self.kind_indices(NodeKind::Causal) {
            let data_children: Vec<usize> = self
                .children_idx(c)
                .into_iter()
                .filter(|&ch| self.nodes[ch].kind == NodeKind::Data)
                .collect();
            if data_children.len() > 1 {
                violations.push(Violation {
                    rule: "causal-single-measurement",
                    subject: Some(self.nodes[c].id.clone()),
                    message: format!(
                        "causal node `{}` parents {} data nodes; at most one is allowed",
                        self.nodes[c].id,
                        data_children.len()
                    ),
                });
            }
        }

        for (ix, node) in self.nodes.iter().enumerate() {
            if node.shared && node.kind != NodeKind::Selection {
                violations.push(Violation {
                    rule: "shared-selection-only",
                    subject: Some(node.id.clone()),
                    message: format!("`shared` is only meaningful on selection nodes: `{}`", node.id),
                });
            }
            if node.kind == NodeKind::Selection {
                if let Some(domain) = &node.domain {
                    if domain.len() != 2 {
                        violations.push(Violation {
                            rule: "selection-binary",
                            subject: Some(node.id.clone()),
                            message: format!(
                                "selection node `{}` must be binary, got domain of size {}",
                                node.id,
                                domain.len()
                            ),
                        });
                    }
                }
            }
            let _ = ix;
        }

        // Deterministic order: rule id, then subject id.
        violations.sort_by(|a, b| (a.rule, &a.subject).cmp(&(b.rule, &b.subject)));
        ValidationReport { violations }
    }
}

/// A graph that passed design validation.
///
/// Dereferences to [`Graph`] for read access. The population node is always
/// resolved (inferred when not declared).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignGraph(Graph);

impl Deref for DesignGraph {
    type Target = Graph;

    fn deref(&self) -> &Graph {
        &self.0
    }
}

impl DesignGraph {
    /// Validates `g` and wraps it. The population node is inferred and
    /// recorded when not declared explicitly.
    pub fn new(mut g: Graph) -> Result<Self, GraphError> {
        let report = g.validate();
        if !report.ok() {
            return Err(GraphError::Invalid(report));
        }
        let p = g.resolve_population().expect("validated graphs have a population node");
        let id = g.nodes[p].id.clone();
        g.set_population(&id)?;
        Ok(DesignGraph(g))
    }

    pub fn as_graph(&self) -> &Graph {
        &self.0
    }

    pub fn into_graph(self) -> Graph {
        self.0
    }

    /// Id of the population node.
    pub fn population(&self) -> &str {
        self.0.population_id().expect("design graphs always have a population node")
    }

    pub fn causal_ids(&self) -> Vec<&str> {
        self.0.kind_indices(NodeKind::Causal).into_iter().map(|i| self.0.nodes[i].id.as_str()).collect()
    }

    pub fn selection_ids(&self) -> Vec<&str> {
        self.0
            .kind_indices(NodeKind::Selection)
            .into_iter()
            .map(|i| self.0.nodes[i].id.as_str())
            .collect()
    }

    pub fn data_ids(&self) -> Vec<&str> {
        self.0.kind_indices(NodeKind::Data).into_iter().map(|i| self.0.nodes[i].id.as_str()).collect()
    }

    /// The data node measuring causal node `causal`, if any.
    pub fn measurement_of(&self, causal: &str) -> Result<Option<&str>, GraphError> {
        let c = self.0.idx(causal)?;
        if self.0.nodes[c].kind != NodeKind::Causal {
            return Err(GraphError::NotCausal(causal.to_string()));
        }
        Ok(self
            .0
            .children_idx(c)
            .into_iter()
            .find(|&ch| self.0.nodes[ch].kind == NodeKind::Data)
            .map(|ch| self.0.nodes[ch].id.as_str()))
    }

    /// `(causal, selection)` parents of a data node.
    pub fn measured_pair(&self, data: &str) -> Result<(&str, &str), GraphError> {
        let d = self.0.idx(data)?;
        let parents = self.0.parents_idx(d);
        let causal = parents.iter().copied().find(|&p| self.0.nodes[p].kind == NodeKind::Causal);
        let selection =
            parents.iter().copied().find(|&p| self.0.nodes[p].kind == NodeKind::Selection);
        match (causal, selection) {
            (Some(c), Some(s)) => Ok((self.0.nodes[c].id.as_str(), self.0.nodes[s].id.as_str())),
            _ => Err(GraphError::UnknownNode(data.to_string())),
        }
    }

    fn check_causal(&self, ids: &[&str]) -> Result<(), GraphError> {
        for id in ids {
            let ix = self.0.idx(id)?;
            if self.0.nodes[ix].kind != NodeKind::Causal {
                return Err(GraphError::NotCausal(id.to_string()));
            }
        }
        Ok(())
    }

    /// Intervention surgery: removes every edge into the causal nodes `ids`.
    pub fn surgery_remove_incoming(&self, ids: &[&str]) -> Result<DesignGraph, GraphError> {
        self.check_causal(ids)?;
        let g = self.0.remove_incoming(ids)?;
        debug_assert!(g.validate().ok());
        Ok(DesignGraph(g))
    }

    /// Surgery removing every edge out of the causal nodes `ids`.
    ///
    /// Outgoing edges include measurement edges, so the result can lose data
    /// nodes' causal parents; the output is therefore a plain [`Graph`].
    pub fn surgery_remove_outgoing(&self, ids: &[&str]) -> Result<Graph, GraphError> {
        self.check_causal(ids)?;
        self.0.remove_outgoing(ids)
    }

    /// Causal projection with observation status resolved: a causal node is
    /// marked observed when it is measured by a data node or its own info
    /// attribute already makes its value available.
    pub fn observable_projection(&self) -> Graph {
        let mut proj = self.0.causal_projection();
        for ix in 0..proj.len() {
            let id = proj.nodes[ix].id.clone();
            let measured = self
                .measurement_of(&id)
                .expect("projection nodes are causal nodes of the parent graph")
                .is_some();
            proj.nodes[ix].info = if measured || self.0.node_by_id(&id).unwrap().info.known() {
                InfoAttr::Observed
            } else {
                InfoAttr::NotObserved
            };
        }
        proj
    }
}
