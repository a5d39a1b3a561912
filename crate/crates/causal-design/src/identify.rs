//! Causal-effect identification.
//!
//! The pipeline: project unobserved variables out of the causal graph into
//! bidirected arcs ([`latent_project`]), then decide `P(y | do(x))` by the
//! district-recursion identification algorithm ([`identify`]), returning
//! either a symbolic estimand over the observational distribution or the
//! witness structure that proves non-identifiability. Do-calculus rule
//! checks ([`rule_applicable`]) and the classic back-door/front-door
//! criteria are provided as independent, simpler tests.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::expr::{self, ProbExpr, Slot, VarOrder};
use crate::graph::{DesignGraph, Graph, GraphError, InfoAttr, Node, NodeKind};
use crate::separation::{d_separated, SeparationError};

/// Mixed graph: a DAG over observed variables plus bidirected arcs standing
/// for unobserved common causes.
#[derive(Debug, Clone)]
pub struct LatentGraph {
    pub dag: Graph,
    /// Unordered pairs, stored with the lexicographically smaller id first.
    pub bidirected: BTreeSet<(String, String)>,
}

/// Errors from identification queries.
#[derive(Debug, Error)]
pub enum IdentifyError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{0}` is not an observed causal variable")]
    NotObservedCausal(String),
    #[error("variable `{0}` appears in both x and y")]
    OverlappingSets(String),
    #[error("query set `{0}` must not be empty")]
    EmptySet(&'static str),
    #[error(transparent)]
    Separation(#[from] SeparationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl LatentGraph {
    pub fn from_dag(dag: Graph) -> Self {
        LatentGraph { dag, bidirected: BTreeSet::new() }
    }

    pub fn add_bidirected(&mut self, a: &str, b: &str) -> Result<(), GraphError> {
        self.dag.idx(a)?;
        self.dag.idx(b)?;
        let pair =
            if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.bidirected.insert(pair);
        Ok(())
    }

    pub fn var_names(&self) -> BTreeSet<String> {
        self.dag.nodes().iter().map(|n| n.id.clone()).collect()
    }

    /// Subgraph on `keep`: directed and bidirected edges with both ends kept.
    pub fn induced(&self, keep: &BTreeSet<String>) -> LatentGraph {
        let idxs: BTreeSet<usize> = self
            .dag
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| keep.contains(&n.id))
            .map(|(ix, _)| ix)
            .collect();
        let dag = self.dag.induced(&idxs);
        let bidirected = self
            .bidirected
            .iter()
            .filter(|(a, b)| keep.contains(a) && keep.contains(b))
            .cloned()
            .collect();
        LatentGraph { dag, bidirected }
    }

    /// Removes every edge *into* `xs`: directed edges ending there and
    /// bidirected arcs touching them (their hidden parent is cut too).
    pub fn remove_incoming(&self, xs: &BTreeSet<String>) -> LatentGraph {
        let ids: Vec<&str> = xs.iter().map(String::as_str).collect();
        let dag = self.dag.remove_incoming(&ids).expect("ids come from this graph");
        let bidirected = self
            .bidirected
            .iter()
            .filter(|(a, b)| !xs.contains(a) && !xs.contains(b))
            .cloned()
            .collect();
        LatentGraph { dag, bidirected }
    }

    /// Removes directed edges *out of* `xs`; bidirected arcs stay.
    pub fn remove_outgoing(&self, xs: &BTreeSet<String>) -> LatentGraph {
        let ids: Vec<&str> = xs.iter().map(String::as_str).collect();
        let dag = self.dag.remove_outgoing(&ids).expect("ids come from this graph");
        LatentGraph { dag, bidirected: self.bidirected.clone() }
    }

    /// Reflexive ancestors along directed edges only.
    pub fn ancestors_of(&self, seed: &BTreeSet<String>) -> BTreeSet<String> {
        let idxs: BTreeSet<usize> =
            seed.iter().map(|id| self.dag.idx(id).expect("caller checked ids")).collect();
        self.dag
            .ancestors_idx(idxs)
            .into_iter()
            .map(|ix| self.dag.node(ix).id.clone())
            .collect()
    }

    /// Connected components of the bidirected part (districts), each sorted,
    /// listed by smallest member.
    pub fn districts(&self) -> Vec<BTreeSet<String>> {
        let names: Vec<String> = self.dag.nodes().iter().map(|n| n.id.clone()).collect();
        let index: BTreeMap<&str, usize> =
            names.iter().enumerate().map(|(ix, n)| (n.as_str(), ix)).collect();
        let mut parent: Vec<usize> = (0..names.len()).collect();
        fn find(parent: &mut Vec<usize>, a: usize) -> usize {
            if parent[a] != a {
                let root = find(parent, parent[a]);
                parent[a] = root;
            }
            parent[a]
        }
        for (a, b) in &self.bidirected {
            let ra = find(&mut parent, index[a.as_str()]);
            let rb = find(&mut parent, index[b.as_str()]);
            parent[ra] = rb;
        }
        let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for (ix, name) in names.iter().enumerate() {
            let root = find(&mut parent, ix);
            groups.entry(root).or_default().insert(name.clone());
        }
        let mut out: Vec<BTreeSet<String>> = groups.into_values().collect();
        out.sort_by(|a, b| a.first().cmp(&b.first()));
        out
    }

    /// DAG with one explicit hidden parent per bidirected arc, for reducing
    /// m-separation to d-separation.
    pub fn augmented(&self) -> Graph {
        let mut g = self.dag.clone();
        for (a, b) in &self.bidirected {
            let latent = format!("_l_{a}_{b}");
            g.add_node(Node::causal(latent.as_str(), InfoAttr::NotObserved))
                .expect("hidden ids are fresh");
            g.add_edge(&latent, a).expect("endpoint exists");
            g.add_edge(&latent, b).expect("endpoint exists");
        }
        g
    }
}

/// m-separation in a mixed graph, by d-separation in the augmented DAG.
pub fn m_separated(
    lg: &LatentGraph,
    x: &[impl AsRef<str>],
    y: &[impl AsRef<str>],
    z: &[impl AsRef<str>],
) -> Result<bool, SeparationError> {
    d_separated(&lg.augmented(), x, y, z)
}

/// Projects a causal DAG with unobserved variables onto its observed part:
/// a directed edge where a directed path runs through unobserved variables
/// only, a bidirected arc where an unobserved variable reaches both ends
/// through unobserved variables only.
pub fn latent_project(g: &Graph) -> LatentGraph {
    let n = g.len();
    let observed: Vec<bool> =
        g.nodes().iter().map(|node| node.info == InfoAttr::Observed).collect();

    // reach[v]: observed nodes reachable from v along directed paths whose
    // intermediate nodes are all unobserved.
    let order = g.topo_order().expect("projection input is a DAG");
    let mut reach: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &v in order.iter().rev() {
        let mut set = BTreeSet::new();
        for c in g.children_idx(v) {
            if observed[c] {
                set.insert(c);
            } else {
                set.extend(reach[c].iter().copied());
            }
        }
        reach[v] = set;
    }

    let mut dag = Graph::new(g.name());
    for (ix, node) in g.nodes().iter().enumerate() {
        if observed[ix] {
            dag.add_node(Node::causal(node.id.clone(), InfoAttr::Observed))
                .expect("ids are unique in the source graph");
        }
    }
    let mut lg = LatentGraph::from_dag(dag);
    for (ix, node) in g.nodes().iter().enumerate() {
        if observed[ix] {
            for &target in &reach[ix] {
                lg.dag
                    .add_edge(&node.id, &g.node(target).id)
                    .expect("both endpoints observed");
            }
        } else {
            let ends: Vec<&str> = reach[ix].iter().map(|&t| g.node(t).id.as_str()).collect();
            for i in 0..ends.len() {
                for j in (i + 1)..ends.len() {
                    lg.add_bidirected(ends[i], ends[j]).expect("endpoints observed");
                }
            }
        }
    }
    lg
}

/// The three rules of do-calculus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Insertion/deletion of observations.
    One,
    /// Action/observation exchange.
    Two,
    /// Insertion/deletion of actions.
    Three,
}

impl Rule {
    pub fn from_number(n: u8) -> Option<Rule> {
        match n {
            1 => Some(Rule::One),
            2 => Some(Rule::Two),
            3 => Some(Rule::Three),
            _ => None,
        }
    }
}

fn to_set(ids: &[impl AsRef<str>]) -> BTreeSet<String> {
    ids.iter().map(|s| s.as_ref().to_string()).collect()
}

/// Whether a do-calculus rewrite is licensed for `P(y | do(x), do/see z, w)`:
/// rule 1 drops observation `z`, rule 2 exchanges `do(z)` for observing `z`,
/// rule 3 drops `do(z)` outright. Decided by d-separation in the appropriate
/// surgery of `g`, which must be a causal DAG.
pub fn rule_applicable(
    g: &Graph,
    rule: Rule,
    x: &[impl AsRef<str>],
    y: &[impl AsRef<str>],
    z: &[impl AsRef<str>],
    w: &[impl AsRef<str>],
) -> Result<bool, IdentifyError> {
    let ys: Vec<String> = y.iter().map(|s| s.as_ref().to_string()).collect();
    let zs: Vec<String> = to_set(z).into_iter().collect();
    if ys.is_empty() {
        return Err(IdentifyError::EmptySet("y"));
    }
    if zs.is_empty() {
        return Err(IdentifyError::EmptySet("z"));
    }
    for id in x
        .iter()
        .map(|s| s.as_ref())
        .chain(y.iter().map(|s| s.as_ref()))
        .chain(z.iter().map(|s| s.as_ref()))
        .chain(w.iter().map(|s| s.as_ref()))
    {
        g.idx(id)?;
    }

    let x_ids: Vec<&str> = x.iter().map(|s| s.as_ref()).collect();
    let cut = g.remove_incoming(&x_ids)?;
    let cond: Vec<String> = x
        .iter()
        .map(|s| s.as_ref().to_string())
        .chain(w.iter().map(|s| s.as_ref().to_string()))
        .collect();
    let separated = match rule {
        Rule::One => d_separated(&cut, &ys, &zs, &cond)?,
        Rule::Two => {
            let z_ids: Vec<&str> = zs.iter().map(String::as_str).collect();
            let surgery = cut.remove_outgoing(&z_ids)?;
            d_separated(&surgery, &ys, &zs, &cond)?
        }
        Rule::Three => {
            // z(w): the z-nodes that are not ancestors of any w-node once
            // edges into x are cut.
            let w_anc: BTreeSet<String> = if w.is_empty() {
                BTreeSet::new()
            } else {
                let idxs: BTreeSet<usize> = w
                    .iter()
                    .map(|id| cut.idx(id.as_ref()).expect("checked above"))
                    .collect();
                cut.ancestors_idx(idxs)
                    .into_iter()
                    .map(|ix| cut.node(ix).id.clone())
                    .collect()
            };
            let z_w: Vec<&str> = zs
                .iter()
                .filter(|id| !w_anc.contains(*id))
                .map(String::as_str)
                .collect();
            let surgery = cut.remove_incoming(&z_w)?;
            d_separated(&surgery, &ys, &zs, &cond)?
        }
    };
    Ok(separated)
}

/// Back-door admissibility of `z` for the effect of `x` on `y` in a mixed
/// graph: no z-variable descends from x, and z m-blocks every path into x.
pub fn backdoor_admissible(
    lg: &LatentGraph,
    x: &[impl AsRef<str>],
    y: &[impl AsRef<str>],
    z: &[impl AsRef<str>],
) -> Result<bool, IdentifyError> {
    if x.is_empty() {
        return Err(IdentifyError::EmptySet("x"));
    }
    if y.is_empty() {
        return Err(IdentifyError::EmptySet("y"));
    }
    let xs = to_set(x);
    for id in xs.iter().chain(to_set(y).iter()).chain(to_set(z).iter()) {
        lg.dag.idx(id)?;
    }
    let x_desc: BTreeSet<String> = {
        let idxs: BTreeSet<usize> =
            xs.iter().map(|id| lg.dag.idx(id).expect("checked")).collect();
        lg.dag.descendants_idx(idxs).into_iter().map(|ix| lg.dag.node(ix).id.clone()).collect()
    };
    if z.iter().any(|id| x_desc.contains(id.as_ref())) {
        return Ok(false);
    }
    let backdoor_only = lg.remove_outgoing(&xs);
    Ok(m_separated(&backdoor_only, x, y, z)?)
}

/// Front-door admissibility of `z`: z intercepts every directed x→y path,
/// x has no open back-door path to z, and x blocks every back-door path
/// from z to y. An empty `z` is never admissible.
pub fn frontdoor_admissible(
    lg: &LatentGraph,
    x: &[impl AsRef<str>],
    y: &[impl AsRef<str>],
    z: &[impl AsRef<str>],
) -> Result<bool, IdentifyError> {
    if x.is_empty() {
        return Err(IdentifyError::EmptySet("x"));
    }
    if y.is_empty() {
        return Err(IdentifyError::EmptySet("y"));
    }
    let xs = to_set(x);
    let ys = to_set(y);
    let zs = to_set(z);
    for id in xs.iter().chain(&ys).chain(&zs) {
        lg.dag.idx(id)?;
    }
    if zs.is_empty() {
        return Ok(false);
    }
    // (i) every directed path from x to y passes through z.
    let keep: BTreeSet<String> = lg.var_names().difference(&zs).cloned().collect();
    let without_z = lg.induced(&keep);
    let reach: BTreeSet<String> = {
        let idxs: BTreeSet<usize> =
            xs.iter().filter_map(|id| without_z.dag.idx(id).ok()).collect();
        without_z
            .dag
            .descendants_idx(idxs)
            .into_iter()
            .map(|ix| without_z.dag.node(ix).id.clone())
            .collect()
    };
    if ys.iter().any(|yv| reach.contains(yv)) {
        return Ok(false);
    }
    // (ii) no open back-door path from x to z.
    let x_backdoor = lg.remove_outgoing(&xs);
    if !m_separated(&x_backdoor, x, z, &[] as &[&str])? {
        return Ok(false);
    }
    // (iii) x blocks every back-door path from z to y.
    let z_backdoor = lg.remove_outgoing(&zs);
    Ok(m_separated(&z_backdoor, z, y, x)?)
}

/// Witness of non-identifiability: a pair of nested variable sets whose
/// shared confounding forces the recursion to fail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hedge {
    pub outer: Vec<String>,
    pub inner: Vec<String>,
}

/// Outcome of an identification query.
#[derive(Debug, Clone)]
pub struct IdentifyResult {
    pub identifiable: bool,
    pub estimand: Option<ProbExpr>,
    pub text: Option<String>,
    pub hedge: Option<Hedge>,
}

/// Allocates lowercase value symbols, appending apostrophes on collision.
struct SymbolPool {
    used: BTreeSet<String>,
}

impl SymbolPool {
    fn new() -> Self {
        SymbolPool { used: BTreeSet::new() }
    }

    fn fresh(&mut self, var: &str) -> String {
        let mut candidate = var.to_lowercase();
        while self.used.contains(&candidate) {
            candidate.push('\'');
        }
        self.used.insert(candidate.clone());
        candidate
    }
}

/// The distribution argument of the recursion: either a marginal of the
/// observational joint (conditionals can be read off as plain probability
/// terms), or an explicit expression with its own symbol table.
#[derive(Clone)]
enum Dist {
    Marginal,
    Term { syms: BTreeMap<String, String>, expr: ProbExpr },
}

fn rename_symbol(e: &ProbExpr, from: &str, to: &str) -> ProbExpr {
    let fix = |slots: &[Slot]| {
        slots
            .iter()
            .map(|s| if s.sym == from { Slot::new(s.var.clone(), to) } else { s.clone() })
            .collect()
    };
    match e {
        ProbExpr::Const(c) => ProbExpr::Const(*c),
        ProbExpr::CondProb { outcome, given, intervened } => ProbExpr::CondProb {
            outcome: fix(outcome),
            given: fix(given),
            intervened: fix(intervened),
        },
        ProbExpr::Product(fs) => {
            ProbExpr::Product(fs.iter().map(|f| rename_symbol(f, from, to)).collect())
        }
        ProbExpr::Sum { var, sym, body } => ProbExpr::Sum {
            var: var.clone(),
            sym: sym.clone(),
            body: Box::new(rename_symbol(body, from, to)),
        },
        ProbExpr::Fraction { num, den } => {
            ProbExpr::fraction(rename_symbol(num, from, to), rename_symbol(den, from, to))
        }
    }
}

/// Per-call state: the current subgraph and vertex set, the distribution to
/// identify against, and the free symbol of every variable in scope.
struct Frame {
    g: LatentGraph,
    vars: BTreeSet<String>,
    dist: Dist,
    env: BTreeMap<String, String>,
}

struct Recursion {
    pool: SymbolPool,
}

impl Recursion {
    fn ensure_sym(&mut self, env: &mut BTreeMap<String, String>, var: &str) -> String {
        if let Some(s) = env.get(var) {
            return s.clone();
        }
        let s = self.pool.fresh(var);
        env.insert(var.to_string(), s.clone());
        s
    }

    /// Marginal of the frame's distribution onto `keep`. An expression
    /// distribution gets fresh bound symbols for everything summed away, so
    /// symbols already free elsewhere are never captured.
    fn restrict(&mut self, frame: &Frame, keep: &BTreeSet<String>) -> Dist {
        match &frame.dist {
            Dist::Marginal => Dist::Marginal,
            Dist::Term { syms, expr } => {
                let mut expr = expr.clone();
                let mut kept: BTreeMap<String, String> = BTreeMap::new();
                for (var, sym) in syms {
                    if keep.contains(var) {
                        kept.insert(var.clone(), sym.clone());
                    } else {
                        let fresh = self.pool.fresh(var);
                        expr = rename_symbol(&expr, sym, &fresh);
                        expr = ProbExpr::sum(var.clone(), fresh, expr);
                    }
                }
                Dist::Term { syms: kept, expr }
            }
        }
    }

    /// `P(target | predecessors)` under the frame's distribution, emitting
    /// slots with the requested symbols. Predecessors outside an expression
    /// distribution's scope are fixed context already present in the
    /// expression, so they drop out of the conditioning set.
    fn conditional(
        &mut self,
        frame: &Frame,
        target: &str,
        given_vars: &[String],
        syms: &BTreeMap<String, String>,
    ) -> ProbExpr {
        match &frame.dist {
            Dist::Marginal => ProbExpr::cond(
                vec![Slot::new(target, syms[target].clone())],
                given_vars.iter().map(|v| Slot::new(v.clone(), syms[v].clone())).collect(),
            ),
            Dist::Term { syms: scope, .. } => {
                let given_eff: Vec<String> = given_vars
                    .iter()
                    .filter(|v| scope.contains_key(*v))
                    .cloned()
                    .collect();
                let mut num_keep: BTreeSet<String> = given_eff.iter().cloned().collect();
                num_keep.insert(target.to_string());
                let num = self.restrict(frame, &num_keep);
                let align = |dist: Dist, wanted: &BTreeSet<String>| -> ProbExpr {
                    match dist {
                        Dist::Term { syms: have, mut expr } => {
                            for var in wanted {
                                let from = have[var].clone();
                                let to = syms[var].clone();
                                if from != to {
                                    expr = rename_symbol(&expr, &from, &to);
                                }
                            }
                            expr
                        }
                        Dist::Marginal => unreachable!("restriction preserves the variant"),
                    }
                };
                let num_expr = align(num, &num_keep);
                if given_eff.is_empty() {
                    num_expr
                } else {
                    let den_keep: BTreeSet<String> = given_eff.iter().cloned().collect();
                    let den = self.restrict(frame, &den_keep);
                    let den_expr = align(den, &den_keep);
                    ProbExpr::fraction(num_expr, den_expr)
                }
            }
        }
    }

    fn run(
        &mut self,
        y: &BTreeSet<String>,
        x: &BTreeSet<String>,
        frame: &Frame,
    ) -> Result<ProbExpr, Hedge> {
        let topo: Vec<String> = frame
            .g
            .dag
            .topo_order()
            .expect("subgraphs of a DAG stay acyclic")
            .into_iter()
            .map(|ix| frame.g.dag.node(ix).id.clone())
            .collect();

        // No interventions left: marginalize onto y.
        if x.is_empty() {
            let restricted = self.restrict(frame, y);
            return Ok(match restricted {
                Dist::Term { expr, .. } => expr,
                Dist::Marginal => {
                    let mut env = frame.env.clone();
                    let outcome: Vec<Slot> = topo
                        .iter()
                        .filter(|v| y.contains(*v))
                        .map(|v| Slot::new(v.clone(), self.ensure_sym(&mut env, v)))
                        .collect();
                    ProbExpr::marginal(outcome)
                }
            });
        }

        // Restrict to the ancestors of y: everything else is irrelevant.
        let an_y = frame.g.ancestors_of(y);
        if an_y.len() != frame.vars.len() {
            let sub = Frame {
                g: frame.g.induced(&an_y),
                vars: an_y.clone(),
                dist: self.restrict(frame, &an_y),
                env: frame.env.clone(),
            };
            let x2: BTreeSet<String> = x.intersection(&an_y).cloned().collect();
            return self.run(y, &x2, &sub);
        }

        // Promote to interventions the variables that cannot influence y
        // once x is held fixed.
        let cut = frame.g.remove_incoming(x);
        let an_cut = cut.ancestors_of(y);
        let w: BTreeSet<String> = frame
            .vars
            .difference(x)
            .filter(|v| !an_cut.contains(*v))
            .cloned()
            .collect();
        if !w.is_empty() {
            let x2: BTreeSet<String> = x.union(&w).cloned().collect();
            return self.run(y, &x2, frame);
        }

        // Split over the confounded components of the graph without x.
        let minus_x: BTreeSet<String> = frame.vars.difference(x).cloned().collect();
        let districts = frame.g.induced(&minus_x).districts();
        if districts.len() > 1 {
            let mut env = frame.env.clone();
            let sum_vars: Vec<String> = topo
                .iter()
                .filter(|v| minus_x.contains(*v) && !y.contains(*v))
                .cloned()
                .collect();
            for v in &sum_vars {
                self.ensure_sym(&mut env, v);
            }
            let mut factors = Vec::new();
            for district in &districts {
                let sub_frame = Frame {
                    g: frame.g.clone(),
                    vars: frame.vars.clone(),
                    dist: frame.dist.clone(),
                    env: env.clone(),
                };
                let rest: BTreeSet<String> = frame.vars.difference(district).cloned().collect();
                factors.push(self.run(district, &rest, &sub_frame)?);
            }
            let mut out = ProbExpr::product(factors);
            for v in sum_vars.into_iter().rev() {
                out = ProbExpr::sum(v.clone(), env[&v].clone(), out);
            }
            return Ok(out);
        }

        let district = districts.into_iter().next().expect("at least one district");

        // The whole graph is one confounded component: a hedge.
        let full = frame.g.districts();
        if full.len() == 1 {
            return Err(Hedge {
                outer: frame.vars.iter().cloned().collect(),
                inner: district.iter().cloned().collect(),
            });
        }

        // The component is closed under confounding: read its factors off
        // the chain rule and sum out what y does not mention.
        if full.contains(&district) {
            let mut env = frame.env.clone();
            let mut syms: BTreeMap<String, String> = BTreeMap::new();
            for v in &topo {
                let sym = self.ensure_sym(&mut env, v);
                syms.insert(v.clone(), sym);
            }
            let mut factors = Vec::new();
            let mut seen: Vec<String> = Vec::new();
            for v in &topo {
                if district.contains(v) {
                    factors.push(self.conditional(frame, v, &seen, &syms));
                }
                seen.push(v.clone());
            }
            let mut out = ProbExpr::product(factors);
            for v in topo.iter().rev() {
                if district.contains(v) && !y.contains(v) {
                    out = ProbExpr::sum(v.clone(), syms[v].clone(), out);
                }
            }
            return Ok(out);
        }

        // Otherwise recurse into the strictly larger component that swallows
        // the district, against its chain-rule distribution.
        let host = full
            .iter()
            .find(|s| district.is_subset(s))
            .expect("every set lies in some component")
            .clone();
        let mut env = frame.env.clone();
        let mut syms: BTreeMap<String, String> = BTreeMap::new();
        for v in &topo {
            let sym = self.ensure_sym(&mut env, v);
            syms.insert(v.clone(), sym);
        }
        let mut term_syms: BTreeMap<String, String> = BTreeMap::new();
        let mut factors = Vec::new();
        let mut seen: Vec<String> = Vec::new();
        for v in &topo {
            if host.contains(v) {
                factors.push(self.conditional(frame, v, &seen, &syms));
                term_syms.insert(v.clone(), syms[v].clone());
            }
            seen.push(v.clone());
        }
        let expr = if factors.len() == 1 {
            factors.into_iter().next().expect("length checked")
        } else {
            ProbExpr::product(factors)
        };
        let sub = Frame {
            g: frame.g.induced(&host),
            vars: host.clone(),
            dist: Dist::Term { syms: term_syms, expr },
            env,
        };
        let x2: BTreeSet<String> = x.intersection(&host).cloned().collect();
        self.run(y, &x2, &sub)
    }
}

/// Attempts to rewrite a whole run of sums over a product of plain
/// conditionals as a single conditional. The factors must telescope by the
/// chain rule — every conditioning variable a factor skips has to be
/// m-separated from the factor's outcome given what it keeps — and every
/// bound variable must land in the collapsed outcome. Each rewrite is an
/// exact equality guaranteed by the graph.
fn collapse_sum_chains(e: &ProbExpr, lg: &LatentGraph, ord: &VarOrder) -> ProbExpr {
    match e {
        ProbExpr::Const(_) | ProbExpr::CondProb { .. } => e.clone(),
        ProbExpr::Product(fs) => {
            ProbExpr::Product(fs.iter().map(|f| collapse_sum_chains(f, lg, ord)).collect())
        }
        ProbExpr::Fraction { num, den } => ProbExpr::fraction(
            collapse_sum_chains(num, lg, ord),
            collapse_sum_chains(den, lg, ord),
        ),
        ProbExpr::Sum { .. } => {
            let mut chain: Vec<(String, String)> = Vec::new();
            let mut cur = e;
            while let ProbExpr::Sum { var, sym, body } = cur {
                chain.push((var.clone(), sym.clone()));
                cur = body;
            }
            let body = collapse_sum_chains(cur, lg, ord);
            if let Some(collapsed) = try_collapse(&chain, &body, lg, ord) {
                return collapsed;
            }
            let mut out = body;
            for (var, sym) in chain.into_iter().rev() {
                out = ProbExpr::sum(var, sym, out);
            }
            out
        }
    }
}

fn try_collapse(
    chain: &[(String, String)],
    body: &ProbExpr,
    lg: &LatentGraph,
    ord: &VarOrder,
) -> Option<ProbExpr> {
    let factors: Vec<(&Vec<Slot>, &Vec<Slot>)> = match body {
        ProbExpr::CondProb { outcome, given, intervened } if intervened.is_empty() => {
            vec![(outcome, given)]
        }
        ProbExpr::Product(fs) => {
            let mut out = Vec::new();
            for f in fs {
                match f {
                    ProbExpr::CondProb { outcome, given, intervened }
                        if intervened.is_empty() =>
                    {
                        out.push((outcome, given))
                    }
                    _ => return None,
                }
            }
            out
        }
        _ => return None,
    };

    // Every variable must carry a single symbol throughout the scope.
    let mut var_sym: BTreeMap<&str, &str> = BTreeMap::new();
    for (outcome, given) in &factors {
        for s in outcome.iter().chain(given.iter()) {
            match var_sym.get(s.var.as_str()) {
                Some(&sym) if sym != s.sym => return None,
                _ => {
                    var_sym.insert(&s.var, &s.sym);
                }
            }
        }
    }

    // Telescope in ascending outcome order.
    let mut ordered = factors;
    ordered.sort_by_key(|(outcome, given)| {
        (
            outcome.iter().map(|s| ord.layer(&s.var)).max().unwrap_or(0),
            format!("{outcome:?}|{given:?}"),
        )
    });
    let (first_outcome, first_given) = *ordered.first()?;
    let context: BTreeSet<Slot> = first_given.iter().cloned().collect();
    let mut acc: BTreeSet<Slot> = first_outcome.iter().cloned().collect();
    for (outcome, given) in ordered.iter().skip(1) {
        let given_set: BTreeSet<Slot> = given.iter().cloned().collect();
        let mut scope: BTreeSet<Slot> = context.clone();
        scope.extend(acc.iter().cloned());
        if !given_set.is_subset(&scope) {
            return None;
        }
        let skipped: Vec<String> =
            scope.difference(&given_set).map(|s| s.var.clone()).collect();
        if !skipped.is_empty() {
            let outcome_vars: Vec<String> = outcome.iter().map(|s| s.var.clone()).collect();
            let given_vars: Vec<String> = given.iter().map(|s| s.var.clone()).collect();
            match m_separated(lg, &outcome_vars, &skipped, &given_vars) {
                Ok(true) => {}
                _ => return None,
            }
        }
        acc.extend(outcome.iter().cloned());
    }

    // All bound variables must be eliminated by the final marginalization.
    for (var, sym) in chain {
        let slot = Slot::new(var.clone(), sym.clone());
        if !acc.remove(&slot) {
            return None;
        }
        if context.contains(&slot) {
            return None;
        }
    }
    if acc.is_empty() {
        return Some(ProbExpr::Const(1.0));
    }
    Some(ProbExpr::CondProb {
        outcome: acc.into_iter().collect(),
        given: context.into_iter().collect(),
        intervened: vec![],
    })
}

/// Identification on an explicit mixed graph: `P(y | do(x))` in terms of the
/// joint distribution of the graph's variables.
pub fn identify_admg(
    lg: &LatentGraph,
    x: &[impl AsRef<str>],
    y: &[impl AsRef<str>],
) -> Result<IdentifyResult, IdentifyError> {
    if x.is_empty() {
        return Err(IdentifyError::EmptySet("x"));
    }
    if y.is_empty() {
        return Err(IdentifyError::EmptySet("y"));
    }
    let xs = to_set(x);
    let ys = to_set(y);
    for id in xs.iter().chain(&ys) {
        lg.dag.idx(id)?;
    }
    if let Some(shared) = xs.intersection(&ys).next() {
        return Err(IdentifyError::OverlappingSets(shared.clone()));
    }

    let order = VarOrder::from_graph(&lg.dag);
    let mut rec = Recursion { pool: SymbolPool::new() };
    let mut env = BTreeMap::new();
    let topo: Vec<String> =
        lg.dag.topo_order()?.into_iter().map(|ix| lg.dag.node(ix).id.clone()).collect();
    for v in &topo {
        if ys.contains(v) {
            rec.ensure_sym(&mut env, v);
        }
    }
    for v in &topo {
        if xs.contains(v) {
            rec.ensure_sym(&mut env, v);
        }
    }
    let frame = Frame { g: lg.clone(), vars: lg.var_names(), dist: Dist::Marginal, env };
    match rec.run(&ys, &xs, &frame) {
        Ok(raw) => {
            let mut cur = expr::simplify(&raw, &order);
            for _ in 0..8 {
                let collapsed = expr::simplify(&collapse_sum_chains(&cur, lg, &order), &order);
                if collapsed == cur {
                    break;
                }
                cur = collapsed;
            }
            let text = expr::to_text(&cur);
            Ok(IdentifyResult {
                identifiable: true,
                estimand: Some(cur),
                text: Some(text),
                hedge: None,
            })
        }
        Err(hedge) => Ok(IdentifyResult {
            identifiable: false,
            estimand: None,
            text: None,
            hedge: Some(hedge),
        }),
    }
}

/// Identification against a full study design: unmeasured variables are
/// projected away first, then the mixed-graph routine runs. `x` and `y`
/// must be causal variables the design actually observes.
pub fn identify(
    g: &DesignGraph,
    x: &[impl AsRef<str>],
    y: &[impl AsRef<str>],
) -> Result<IdentifyResult, IdentifyError> {
    let projection = g.observable_projection();
    for id in x.iter().map(AsRef::as_ref).chain(y.iter().map(AsRef::as_ref)) {
        let node = g
            .as_graph()
            .node_by_id(id)
            .ok_or_else(|| IdentifyError::UnknownVariable(id.to_string()))?;
        if node.kind != NodeKind::Causal {
            return Err(IdentifyError::NotObservedCausal(id.to_string()));
        }
        let projected =
            projection.node_by_id(id).expect("causal nodes survive the causal projection");
        if projected.info != InfoAttr::Observed {
            return Err(IdentifyError::NotObservedCausal(id.to_string()));
        }
    }
    let lg = latent_project(&projection);
    identify_admg(&lg, x, y)
}
