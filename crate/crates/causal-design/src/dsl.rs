//! Text format for design graphs.
//!
//! ```text
//! graph smoking
//! population mOmega
//! node X kind=causal info=unobserved
//! node m1 kind=selection info=det-known stage=1
//! measure X* : X by m1 stage=1
//! edge X -> Y
//! ```
//!
//! `#` starts a comment; statements are whitespace-separated tokens and may
//! appear in any order after the `graph` header. Node attributes are
//! `kind=`, `info=`, `domain=v1,v2,...`, `stage=<int>` and the bare `shared`
//! flag. A `measure` statement declares a data node together with its
//! defining causal and selection parents. When a declared population node
//! exists, any selection node without a selection parent gets an automatic
//! edge from it, so simple designs do not need to spell those out.
//!
//! [`canonical_dsl`] renders a graph back into a normal form (fixed
//! statement order, ids sorted lexicographically); parsing and re-rendering
//! canonical text is idempotent.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{DesignGraph, Graph, GraphError, InfoAttr, Node, NodeKind};

/// Errors from [`parse_graph`] / [`build_graph`].
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DslError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn err(line: usize, message: impl Into<String>) -> DslError {
    DslError::Parse { line, message: message.into() }
}

#[derive(Debug)]
enum Statement {
    Population(String),
    Node(Node),
    Measure { data: String, causal: String, selection: String, stage: Option<i64> },
    Edge(String, String),
}

fn parse_kind(s: &str, line: usize) -> Result<NodeKind, DslError> {
    match s {
        "causal" => Ok(NodeKind::Causal),
        "selection" => Ok(NodeKind::Selection),
        "data" => Ok(NodeKind::Data),
        other => Err(err(line, format!("unknown kind `{other}`"))),
    }
}

fn parse_info(s: &str, line: usize) -> Result<InfoAttr, DslError> {
    match s {
        "observed" => Ok(InfoAttr::Observed),
        "unobserved" => Ok(InfoAttr::NotObserved),
        "det-known" => Ok(InfoAttr::DeterminedKnown),
        "det-unknown" => Ok(InfoAttr::DeterminedUnknown),
        other => Err(err(line, format!("unknown info attribute `{other}`"))),
    }
}

fn info_name(info: InfoAttr) -> &'static str {
    match info {
        InfoAttr::Observed => "observed",
        InfoAttr::NotObserved => "unobserved",
        InfoAttr::DeterminedKnown => "det-known",
        InfoAttr::DeterminedUnknown => "det-unknown",
    }
}

fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Causal => "causal",
        NodeKind::Selection => "selection",
        NodeKind::Data => "data",
    }
}

fn default_info(kind: NodeKind) -> InfoAttr {
    match kind {
        NodeKind::Causal => InfoAttr::NotObserved,
        NodeKind::Selection => InfoAttr::DeterminedKnown,
        NodeKind::Data => InfoAttr::Observed,
    }
}

fn parse_stage(value: &str, line: usize) -> Result<i64, DslError> {
    value.parse::<i64>().map_err(|_| err(line, format!("invalid stage `{value}`")))
}

fn parse_node_statement(tokens: &[&str], line: usize) -> Result<Node, DslError> {
    let id = tokens[1].to_string();
    let mut kind = None;
    let mut info = None;
    let mut domain = None;
    let mut stage = None;
    let mut shared = false;
    for tok in &tokens[2..] {
        if *tok == "shared" {
            shared = true;
            continue;
        }
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key=value or `shared`, got `{tok}`")))?;
        match key {
            "kind" => kind = Some(parse_kind(value, line)?),
            "info" => info = Some(parse_info(value, line)?),
            "domain" => {
                let values: Vec<String> = value.split(',').map(|v| v.to_string()).collect();
                if values.iter().any(|v| v.is_empty()) {
                    return Err(err(line, format!("empty value in domain `{value}`")));
                }
                domain = Some(values);
            }
            "stage" => stage = Some(parse_stage(value, line)?),
            other => return Err(err(line, format!("unknown attribute `{other}`"))),
        }
    }
    let kind = kind.ok_or_else(|| err(line, format!("node `{id}` is missing kind=")))?;
    let mut node = Node::new(id, kind, info.unwrap_or_else(|| default_info(kind)));
    node.domain = domain;
    node.stage = stage;
    node.shared = shared;
    Ok(node)
}

/// Parses DSL text into a raw [`Graph`] without validating design rules.
pub fn parse_graph(src: &str) -> Result<Graph, DslError> {
    let mut name: Option<String> = None;
    let mut statements: Vec<(usize, Statement)> = Vec::new();
    let mut population: Option<(usize, String)> = None;

    for (ix, raw) in src.lines().enumerate() {
        let line = ix + 1;
        let text = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match tokens[0] {
            "graph" => {
                if name.is_some() {
                    return Err(err(line, "duplicate graph header"));
                }
                if !statements.is_empty() || population.is_some() {
                    return Err(err(line, "graph header must come first"));
                }
                let [_, graph_name] = tokens.as_slice() else {
                    return Err(err(line, "expected `graph <name>`"));
                };
                name = Some(graph_name.to_string());
            }
            "population" => {
                let [_, id] = tokens.as_slice() else {
                    return Err(err(line, "expected `population <id>`"));
                };
                if let Some((first, _)) = &population {
                    return Err(err(line, format!("duplicate population (first at line {first})")));
                }
                population = Some((line, id.to_string()));
                statements.push((line, Statement::Population(id.to_string())));
            }
            "node" => {
                if tokens.len() < 2 {
                    return Err(err(line, "expected `node <id> ...`"));
                }
                statements.push((line, Statement::Node(parse_node_statement(&tokens, line)?)));
            }
            "measure" => {
                let (main, stage) = match tokens.as_slice() {
                    [_, data, ":", causal, "by", sel] => ((data, causal, sel), None),
                    [_, data, ":", causal, "by", sel, opt] => {
                        let Some(("stage", value)) = opt.split_once('=')
                        else {
                            return Err(err(line, format!("unknown measure option `{opt}`")));
                        };
                        ((data, causal, sel), Some(parse_stage(value, line)?))
                    }
                    _ => {
                        return Err(err(
                            line,
                            "expected `measure <id> : <causal> by <selection> [stage=<int>]`",
                        ))
                    }
                };
                statements.push((
                    line,
                    Statement::Measure {
                        data: main.0.to_string(),
                        causal: main.1.to_string(),
                        selection: main.2.to_string(),
                        stage,
                    },
                ));
            }
            "edge" => {
                let [_, from, "->", to] = tokens.as_slice() else {
                    return Err(err(line, "expected `edge <from> -> <to>`"));
                };
                statements.push((line, Statement::Edge(from.to_string(), to.to_string())));
            }
            other => return Err(err(line, format!("unknown statement `{other}`"))),
        }
    }

    let name = name.ok_or_else(|| err(1, "missing `graph <name>` header"))?;
    let mut g = Graph::new(name);
    let at = |line: usize, e: GraphError| err(line, e.to_string());

    // Nodes first (population and node statements), then measures, then
    // edges, so statements may reference ids declared later in the file.
    for (line, st) in &statements {
        match st {
            Statement::Population(id) => {
                g.add_node(Node::selection(id.clone(), InfoAttr::DeterminedKnown))
                    .map_err(|e| at(*line, e))?;
            }
            Statement::Node(node) => {
                g.add_node(node.clone()).map_err(|e| at(*line, e))?;
            }
            _ => {}
        }
    }
    for (line, st) in &statements {
        if let Statement::Measure { data, causal, selection, stage } = st {
            let ix = g.add_measurement(data.clone(), causal, selection).map_err(|e| at(*line, e))?;
            g.nodes_mut()[ix].stage = *stage;
        }
    }
    for (line, st) in &statements {
        if let Statement::Edge(from, to) = st {
            g.add_edge(from, to).map_err(|e| at(*line, e))?;
        }
    }
    if let Some((line, id)) = &population {
        g.set_population(id).map_err(|e| at(*line, e))?;
        insert_population_edges(&mut g);
    }
    Ok(g)
}

/// Adds an edge from the declared population node to every selection node
/// that has no selection parent yet.
fn insert_population_edges(g: &mut Graph) {
    let Some(pop) = g.population_id().map(str::to_string) else {
        return;
    };
    let selection_ids: Vec<String> = g
        .kind_indices(NodeKind::Selection)
        .into_iter()
        .map(|ix| g.node(ix).id.clone())
        .collect();
    for id in selection_ids {
        if id == pop {
            continue;
        }
        let has_selection_parent = g
            .parents(&id)
            .unwrap()
            .iter()
            .any(|p| g.node_by_id(p).unwrap().kind == NodeKind::Selection);
        if !has_selection_parent {
            g.add_edge(&pop, &id).unwrap();
        }
    }
}

/// Parses and validates, returning a ready-to-analyze graph.
pub fn build_graph(src: &str) -> Result<DesignGraph, DslError> {
    Ok(DesignGraph::new(parse_graph(src)?)?)
}

fn node_line(out: &mut String, node: &Node) {
    write!(out, "node {} kind={} info={}", node.id, kind_name(node.kind), info_name(node.info))
        .unwrap();
    if let Some(domain) = &node.domain {
        write!(out, " domain={}", domain.join(",")).unwrap();
    }
    if let Some(stage) = node.stage {
        write!(out, " stage={stage}").unwrap();
    }
    if node.shared {
        out.push_str(" shared");
    }
    out.push('\n');
}

/// Renders a graph in canonical form: header, population, nodes sorted by
/// id, measurements sorted by data-node id, remaining edges sorted.
///
/// Data nodes with the standard one-causal/one-selection parent pair render
/// as `measure` statements; structurally damaged ones (possible in raw
/// graphs) fall back to explicit node and edge statements.
pub fn canonical_dsl(g: &Graph) -> String {
    let mut out = String::new();
    writeln!(out, "graph {}", g.name()).unwrap();
    let population = g.population_id();
    if let Some(p) = population {
        writeln!(out, "population {p}").unwrap();
    }

    let mut measured: Vec<(&str, &str, &str, Option<i64>)> = Vec::new(); // (data, causal, sel, stage)
    let mut plain_nodes: Vec<&Node> = Vec::new();
    for node in g.nodes() {
        if Some(node.id.as_str()) == population {
            continue;
        }
        if node.kind == NodeKind::Data {
            let parents = g.parents(&node.id).unwrap();
            let causal: Vec<&&str> = parents
                .iter()
                .filter(|p| g.node_by_id(p).unwrap().kind == NodeKind::Causal)
                .collect();
            let selection: Vec<&&str> = parents
                .iter()
                .filter(|p| g.node_by_id(p).unwrap().kind == NodeKind::Selection)
                .collect();
            if parents.len() == 2
                && causal.len() == 1
                && selection.len() == 1
                && node.info == InfoAttr::Observed
                && node.domain.is_none()
                && !node.shared
            {
                measured.push((&node.id, causal[0], selection[0], node.stage));
                continue;
            }
        }
        plain_nodes.push(node);
    }

    plain_nodes.sort_by_key(|n| n.id.as_str());
    for node in plain_nodes {
        node_line(&mut out, node);
    }

    measured.sort();
    let mut measure_edges: Vec<(&str, &str)> = Vec::new();
    for (data, causal, selection, stage) in measured {
        write!(out, "measure {data} : {causal} by {selection}").unwrap();
        if let Some(stage) = stage {
            write!(out, " stage={stage}").unwrap();
        }
        out.push('\n');
        measure_edges.push((causal, data));
        measure_edges.push((selection, data));
    }

    let mut edges = g.edge_ids();
    edges.retain(|e| !measure_edges.contains(e));
    edges.sort();
    for (from, to) in edges {
        writeln!(out, "edge {from} -> {to}").unwrap();
    }
    out
}
