//! Rewrites from design graphs into neighbouring graphical formalisms.
//!
//! Three transformations defined on a validated design: collapsing to a
//! missingness graph (dropping the selection machinery that never touches
//! recorded data), collapsing to a selection diagram over the causal
//! variables, and a per-variable classification of the missing-data
//! mechanism. A fourth operation screens selection factors for whether a
//! likelihood may drop them when only the causal parameters are of
//! interest.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{DesignGraph, Graph, GraphError, InfoAttr, NodeKind};
use crate::separation::{d_separated, SeparationError};

/// Missing-data mechanism of a single measured variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MissingnessClass {
    /// The variable is connected to its selection indicator only through
    /// its own recorded copy: whether a value is missing carries no
    /// information about the value, in every parameterization.
    #[serde(rename = "EverywhereMCAR")]
    EverywhereMcar,
    /// The variable itself drives its selection (a directed path from the
    /// variable to its selection indicator that bypasses every data node),
    /// so missingness depends on the unrecorded value.
    #[serde(rename = "MNAR")]
    Mnar,
    /// Anything in between: the variable and its selection indicator are
    /// marginally dependent, but only through recorded values or common
    /// causes. Reported as-is rather than as "missing at random", which
    /// would need assumptions beyond the graph.
    Other,
}

impl fmt::Display for MissingnessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MissingnessClass::EverywhereMcar => "everywhere MCAR",
            MissingnessClass::Mnar => "MNAR",
            MissingnessClass::Other => "other",
        };
        f.write_str(name)
    }
}

/// Result of [`classify_missingness`]: the class together with the path
/// that justifies it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MissingnessReport {
    pub class: MissingnessClass,
    /// For MNAR, the directed path from the variable to its selection node
    /// that avoids all data nodes; for everywhere MCAR, the collider path
    /// through the variable's data node (its only connection); otherwise
    /// the shortest unconditionally open path keeping the variable and its
    /// selection dependent.
    pub witness: Vec<String>,
}

/// Errors from the transform operations.
#[derive(Debug, Error)]
pub enum TransformError {
    /// Classification was asked about a variable that is never measured.
    #[error("`{0}` has no data node, so no missingness mechanism applies to it")]
    NoDataNode(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Separation(#[from] SeparationError),
}

/// Collapses a design graph to a missingness graph.
///
/// The output keeps the causal nodes, the data nodes, and exactly those
/// selection nodes that parent a data node; intermediate selection nodes
/// (including the population indicator) disappear. Edges between retained
/// nodes survive unchanged, and every causal variable with a directed path
/// to a retained selection node in the original graph gains a direct edge
/// to it, so the influence routed through dropped selection chains stays
/// visible.
///
/// The result is a plain [`Graph`]: it has no population node and data
/// nodes may have gained extra parents, so it is not a design graph.
pub fn collapse_missingness(g: &DesignGraph) -> Graph {
    let src = g.as_graph();
    let mut keep: BTreeSet<usize> = BTreeSet::new();
    for ix in 0..src.len() {
        let retained = match src.node(ix).kind {
            NodeKind::Causal | NodeKind::Data => true,
            NodeKind::Selection => {
                src.children_idx(ix).iter().any(|&c| src.node(c).kind == NodeKind::Data)
            }
        };
        if retained {
            keep.insert(ix);
        }
    }
    let mut out = src.induced(&keep);
    for c in src.kind_indices(NodeKind::Causal) {
        let reach = src.descendants_idx([c]);
        for &s in &keep {
            if src.node(s).kind != NodeKind::Selection || !reach.contains(&s) {
                continue;
            }
            let (from, to) = (src.node(c).id.as_str(), src.node(s).id.as_str());
            if !out.has_edge(from, to) {
                out.add_edge(from, to).expect("both endpoints are retained");
            }
        }
    }
    out
}

/// Collapses a design graph to a selection diagram over the causal nodes.
///
/// `s` names the causal variables that index conceptual populations. The
/// output contains the causal nodes only; an edge survives iff it connects
/// two causal nodes and its head is not in `s`, so the population-indexing
/// variables keep their outgoing influence but lose all incoming edges.
///
/// Errors when a member of `s` is not a node of the graph or not causal.
pub fn collapse_selection_diagram(
    g: &DesignGraph,
    s: &[impl AsRef<str>],
) -> Result<Graph, TransformError> {
    let src = g.as_graph();
    let mut heads: BTreeSet<usize> = BTreeSet::new();
    for id in s {
        let ix = src.idx(id.as_ref())?;
        if src.node(ix).kind != NodeKind::Causal {
            return Err(GraphError::NotCausal(id.as_ref().to_string()).into());
        }
        heads.insert(ix);
    }
    let mut out = src.causal_projection();
    for ix in heads {
        let id = src.node(ix).id.clone();
        out = out.remove_incoming(&[id.as_str()])?;
    }
    Ok(out)
}

/// Classifies the missing-data mechanism of one measured causal variable.
///
/// With `M` the selection node of `v`'s data node: the data on `v` are
/// MNAR when a directed path from `v` to `M` avoids every data node (the
/// unrecorded value itself drives selection); everywhere MCAR when `v` and
/// `M` are d-separated by the empty set, i.e. every connection runs
/// through colliders such as the data node and missingness is independent
/// of everything the variable can tell; Other when the dependence exists
/// but is carried entirely by recorded values or common causes.
///
/// Errors when `v` is unknown, not causal, or has no data node.
pub fn classify_missingness(
    g: &DesignGraph,
    v: &str,
) -> Result<MissingnessReport, TransformError> {
    let data = g
        .measurement_of(v)?
        .ok_or_else(|| TransformError::NoDataNode(v.to_string()))?
        .to_string();
    let (_, selection) = g.measured_pair(&data)?;
    let selection = selection.to_string();
    let src = g.as_graph();
    let vi = src.idx(v)?;
    let si = src.idx(&selection)?;

    if let Some(path) = directed_path_avoiding_data(src, vi, si) {
        let witness = path.into_iter().map(|ix| src.node(ix).id.clone()).collect();
        return Ok(MissingnessReport { class: MissingnessClass::Mnar, witness });
    }
    if d_separated(src, &[v], &[selection.as_str()], &[] as &[&str])? {
        return Ok(MissingnessReport {
            class: MissingnessClass::EverywhereMcar,
            witness: vec![v.to_string(), data, selection],
        });
    }
    let path = shortest_open_path(src, vi, si)
        .expect("marginal dependence implies an unconditionally open path");
    let witness = path.into_iter().map(|ix| src.node(ix).id.clone()).collect();
    Ok(MissingnessReport { class: MissingnessClass::Other, witness })
}

/// Flags, for every selection node, whether its likelihood factor can be
/// dropped when estimating the causal parameters.
///
/// A factor is droppable only when it reads no random value at all: every
/// parent is another selection indicator, a design-determined variable
/// with a known value, or the recorded copy of such a variable. Any parent
/// that is (or records) an ordinary random variable keeps the factor in
/// the likelihood — its selection probabilities carry information that the
/// rest of the model must compensate for, and its parameters can only be
/// estimated jointly.
pub fn ignorable_selection_terms(g: &DesignGraph) -> BTreeMap<String, bool> {
    let src = g.as_graph();
    let mut out = BTreeMap::new();
    for s in src.kind_indices(NodeKind::Selection) {
        let ignorable = src.parents_idx(s).into_iter().all(|p| {
            let parent = src.node(p);
            match parent.kind {
                NodeKind::Selection => true,
                NodeKind::Causal => parent.info == InfoAttr::DeterminedKnown,
                NodeKind::Data => {
                    let (causal, _) = g.measured_pair(&parent.id).expect("validated data node");
                    src.node_by_id(causal).expect("measured pair exists").info
                        == InfoAttr::DeterminedKnown
                }
            }
        });
        out.insert(src.node(s).id.clone(), ignorable);
    }
    out
}

/// Shortest directed path from `from` to `to` whose intermediate nodes are
/// never data nodes, as node indices including both endpoints.
fn directed_path_avoiding_data(g: &Graph, from: usize, to: usize) -> Option<Vec<usize>> {
    let mut pred: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = vec![false; g.len()];
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = vec![v];
            let mut cur = v;
            while let Some(&p) = pred.get(&cur) {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for c in g.children_idx(v) {
            if seen[c] || g.node(c).kind == NodeKind::Data {
                continue;
            }
            seen[c] = true;
            pred.insert(c, v);
            queue.push_back(c);
        }
    }
    None
}

/// Shortest path between `from` and `to` that is open without conditioning,
/// i.e. free of colliders. Such a path ascends from `from` to some common
/// ancestor and then descends, so the search runs over (node, still
/// ascending) states.
fn shortest_open_path(g: &Graph, from: usize, to: usize) -> Option<Vec<usize>> {
    const ASCENDING: usize = 0;
    const DESCENDING: usize = 1;
    let mut pred: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let mut seen = vec![[false; 2]; g.len()];
    let mut queue = VecDeque::from([(from, ASCENDING)]);
    seen[from][ASCENDING] = true;
    while let Some((v, phase)) = queue.pop_front() {
        if v == to {
            let mut path = vec![v];
            let mut cur = (v, phase);
            while let Some(&p) = pred.get(&cur) {
                path.push(p.0);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        let mut push = |state: (usize, usize), seen: &mut Vec<[bool; 2]>| {
            if !seen[state.0][state.1] {
                seen[state.0][state.1] = true;
                pred.insert(state, (v, phase));
                queue.push_back(state);
            }
        };
        if phase == ASCENDING {
            for p in g.parents_idx(v) {
                push((p, ASCENDING), &mut seen);
            }
        }
        for c in g.children_idx(v) {
            push((c, DESCENDING), &mut seen);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::build_graph;
    use crate::model::{
        saturated_binary_parametrization, DiscreteModel, ParamMap, TableSpec, VarTable,
        DEFAULT_STATE_CAP,
    };
    use crate::model::ParamTag;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Survey design: front-door causal structure, one simple random sample
    /// recording all three observable variables.
    const SURVEY: &str = "\
graph survey
population mOmega
node U kind=causal info=unobserved
node X kind=causal info=unobserved
node Z kind=causal info=unobserved
node Y kind=causal info=unobserved
node m1 kind=selection info=det-known stage=1
edge U -> X
edge U -> Y
edge X -> Z
edge Z -> Y
measure X* : X by m1 stage=1
measure Z* : Z by m1 stage=1
measure Y* : Y by m1 stage=1
";

    /// Case-control design: the outcome is recorded for a random sample and
    /// the second-stage selection reads the recorded outcome.
    const CASE_CONTROL: &str = "\
graph case_control
population mOmega
node X kind=causal info=unobserved
node Z kind=causal info=unobserved
node Y kind=causal info=unobserved
node m1 kind=selection info=det-known stage=1
node m2 kind=selection info=det-known stage=2
edge X -> Z
edge X -> Y
edge Z -> Y
edge m1 -> m2
edge Y* -> m2
measure Y* : Y by m1 stage=1
measure X* : X by m2 stage=2
measure Z* : Z by m2 stage=2
";

    /// Two-stage cohort design: left truncation into the sampling frame, a
    /// random sample, a participation decision driven by baseline
    /// variables, and a second-stage subset driven by the outcome.
    const COHORT: &str = "\
graph cohort
population mOmega
node Z kind=causal info=unobserved
node Y0 kind=causal info=unobserved
node X kind=causal info=unobserved
node Y kind=causal info=unobserved
node M0 kind=selection info=unobserved stage=0
node m1 kind=selection info=det-known stage=1
node M1 kind=selection info=observed stage=1
node m2 kind=selection info=det-known stage=2
node M2 kind=selection info=observed stage=2
edge Z -> Y0
edge Z -> X
edge Z -> Y
edge Y0 -> Y
edge X -> Y
edge Y0 -> M0
edge M0 -> m1
edge m1 -> M1
edge X -> M1
edge Y0 -> M1
edge M1 -> m2
edge X -> m2
edge Y0 -> m2
edge Y -> m2
edge m2 -> M2
measure X* : X by M1 stage=1
measure Y0* : Y0 by M1 stage=1
measure Y* : Y by M1 stage=2
measure Z* : Z by M2 stage=2
";

    fn ids(g: &Graph, kind: NodeKind) -> Vec<&str> {
        g.kind_indices(kind).into_iter().map(|ix| g.node(ix).id.as_str()).collect()
    }

    #[test]
    fn missingness_collapse_keeps_exactly_the_three_node_classes() {
        let g = build_graph(COHORT).unwrap();
        let h = collapse_missingness(&g);
        assert_eq!(ids(&h, NodeKind::Causal), ["Z", "Y0", "X", "Y"]);
        assert_eq!(ids(&h, NodeKind::Selection), ["M1", "M2"]);
        assert_eq!(ids(&h, NodeKind::Data), ["X*", "Y0*", "Y*", "Z*"]);
        assert_eq!(h.population_id(), None);
    }

    #[test]
    fn missingness_collapse_records_dropped_chains_as_direct_edges() {
        let g = build_graph(COHORT).unwrap();
        let h = collapse_missingness(&g);
        let mut expected = vec![
            // Causal structure and measurement edges survive unchanged.
            ("Z", "Y0"),
            ("Z", "X"),
            ("Z", "Y"),
            ("Y0", "Y"),
            ("X", "Y"),
            ("X", "X*"),
            ("M1", "X*"),
            ("Y0", "Y0*"),
            ("M1", "Y0*"),
            ("Y", "Y*"),
            ("M1", "Y*"),
            ("Z", "Z*"),
            ("M2", "Z*"),
            // Direct arrows into the participation decision survive too.
            ("X", "M1"),
            ("Y0", "M1"),
            // Influence routed through dropped selection nodes becomes a
            // direct edge onto the retained selection.
            ("Z", "M1"),
            ("X", "M2"),
            ("Y0", "M2"),
            ("Y", "M2"),
            ("Z", "M2"),
        ];
        expected.sort();
        assert_eq!(h.edge_ids(), expected);

        // Path-search oracle: a causal-to-selection edge must appear in the
        // collapse exactly when the original graph has a directed path.
        let src = g.as_graph();
        for c in src.kind_indices(NodeKind::Causal) {
            for s in h.kind_indices(NodeKind::Selection) {
                let c_id = src.node(c).id.as_str();
                let s_id = h.node(s).id.as_str();
                let reachable = src
                    .descendants(&[c_id])
                    .unwrap()
                    .contains(s_id);
                assert_eq!(
                    h.has_edge(c_id, s_id),
                    reachable,
                    "collapse edge {c_id} -> {s_id} disagrees with reachability"
                );
            }
        }
    }

    #[test]
    fn missingness_collapse_leaves_single_stage_designs_unchanged() {
        let g = build_graph(SURVEY).unwrap();
        let h = collapse_missingness(&g);
        let src_edges: Vec<(&str, &str)> = g
            .as_graph()
            .edge_ids()
            .into_iter()
            .filter(|(f, t)| *f != "mOmega" && *t != "mOmega")
            .collect();
        assert_eq!(h.edge_ids(), src_edges);
        assert_eq!(h.len(), g.as_graph().len() - 1);
    }

    #[test]
    fn missingness_collapse_adds_edges_for_recorded_influence() {
        let g = build_graph(CASE_CONTROL).unwrap();
        let h = collapse_missingness(&g);
        // The second stage reads the recorded outcome, so every causal
        // ancestor of the outcome gains an edge onto it.
        assert!(h.has_edge("Y", "m2"));
        assert!(h.has_edge("X", "m2"));
        assert!(h.has_edge("Z", "m2"));
        // Nothing reaches the first-stage sample.
        assert!(!h.has_edge("X", "m1"));
        assert!(!h.has_edge("Y", "m1"));
        assert!(!h.has_edge("Z", "m1"));
        // One population edge dropped, three recorded-influence edges added.
        assert_eq!(h.edge_ids().len(), g.as_graph().edge_ids().len() - 1 + 3);
    }

    #[test]
    fn selection_diagram_strips_edges_into_the_selection_variables() {
        let two_area = "\
graph two_area
population mOmega
node A kind=causal info=observed
node W kind=causal info=unobserved
node X kind=causal info=unobserved
node Y kind=causal info=unobserved
edge W -> A
edge A -> X
edge X -> Y
";
        let g = build_graph(two_area).unwrap();
        let h = collapse_selection_diagram(&g, &["A"]).unwrap();
        assert_eq!(ids(&h, NodeKind::Causal), ["A", "W", "X", "Y"]);
        assert_eq!(h.edge_ids(), [("A", "X"), ("X", "Y")]);

        // Empty set: plain causal projection.
        let unchanged = collapse_selection_diagram(&g, &[] as &[&str]).unwrap();
        assert_eq!(unchanged.edge_ids(), [("A", "X"), ("W", "A"), ("X", "Y")]);
        assert_eq!(unchanged.len(), 4);

        assert!(matches!(
            collapse_selection_diagram(&g, &["B"]).unwrap_err(),
            TransformError::Graph(GraphError::UnknownNode(id)) if id == "B"
        ));
        assert!(matches!(
            collapse_selection_diagram(&g, &["mOmega"]).unwrap_err(),
            TransformError::Graph(GraphError::NotCausal(id)) if id == "mOmega"
        ));
    }

    #[test]
    fn selection_diagram_never_adds_edges() {
        let g = build_graph(COHORT).unwrap();
        let projection = g.as_graph().causal_projection();
        let h = collapse_selection_diagram(&g, &["Y"]).unwrap();
        assert_eq!(h.len(), projection.len());
        for (f, t) in h.edge_ids() {
            assert!(projection.has_edge(f, t));
            assert_ne!(t, "Y");
        }
        assert_eq!(h.edge_ids(), [("Z", "X"), ("Z", "Y0")]);
    }

    #[test]
    fn classification_reads_the_mechanism_off_the_graph() {
        let survey = build_graph(SURVEY).unwrap();
        let report = classify_missingness(&survey, "Y").unwrap();
        assert_eq!(report.class, MissingnessClass::EverywhereMcar);
        assert_eq!(report.witness, ["Y", "Y*", "m1"]);

        let cohort = build_graph(COHORT).unwrap();
        let report = classify_missingness(&cohort, "X").unwrap();
        assert_eq!(report.class, MissingnessClass::Mnar);
        assert_eq!(report.witness, ["X", "M1"]);
        // Left truncation: the baseline status reaches its selection node
        // through dropped selection stages as well as directly.
        let report = classify_missingness(&cohort, "Y0").unwrap();
        assert_eq!(report.class, MissingnessClass::Mnar);
        assert_eq!(report.witness, ["Y0", "M1"]);

        let case_control = build_graph(CASE_CONTROL).unwrap();
        let report = classify_missingness(&case_control, "X").unwrap();
        assert_eq!(report.class, MissingnessClass::Other);
        assert_eq!(report.witness, ["X", "Y", "Y*", "m2"]);
    }

    #[test]
    fn classification_rejects_unmeasured_variables() {
        let survey = build_graph(SURVEY).unwrap();
        assert!(matches!(
            classify_missingness(&survey, "U").unwrap_err(),
            TransformError::NoDataNode(id) if id == "U"
        ));
        assert!(matches!(
            classify_missingness(&survey, "nope").unwrap_err(),
            TransformError::Graph(GraphError::UnknownNode(_))
        ));
        assert!(matches!(
            classify_missingness(&survey, "m1").unwrap_err(),
            TransformError::Graph(GraphError::NotCausal(_))
        ));
    }

    #[test]
    fn mcar_verdicts_imply_exact_independence() {
        let survey = build_graph(SURVEY).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0x3a11);
        for _ in 0..5 {
            // Random explicit tables mirroring the survey structure; the
            // sample indicator has no parents once the population node is
            // dropped.
            let spec: Vec<(&str, Vec<&str>)> = vec![
                ("U", vec![]),
                ("X", vec!["U"]),
                ("Z", vec!["X"]),
                ("Y", vec!["Z", "U"]),
                ("m1", vec![]),
            ];
            let vars: Vec<VarTable> = spec
                .into_iter()
                .map(|(name, parents)| {
                    let rows = (0..1usize << parents.len())
                        .map(|_| {
                            let q = rng.random_range(0.05..0.95);
                            vec![1.0 - q, q]
                        })
                        .collect();
                    VarTable {
                        name: name.into(),
                        values: vec!["0".into(), "1".into()],
                        parents: parents.into_iter().map(String::from).collect(),
                        gates: vec![],
                        tag: ParamTag::Theta,
                        spec: TableSpec::Explicit(rows),
                    }
                })
                .collect();
            let model = DiscreteModel::new(vars).unwrap();
            let joint = model.instantiate(&ParamMap::new()).unwrap().joint(DEFAULT_STATE_CAP).unwrap();
            let m1 = joint.var_index("m1").unwrap();
            for v in ["X", "Z", "Y"] {
                assert_eq!(
                    classify_missingness(&survey, v).unwrap().class,
                    MissingnessClass::EverywhereMcar
                );
                let vi = joint.var_index(v).unwrap();
                let joint_prob = joint.sum_where(&[(vi, 1), (m1, 1)]);
                let product = joint.sum_where(&[(vi, 1)]) * joint.sum_where(&[(m1, 1)]);
                assert!(
                    (joint_prob - product).abs() < 1e-9,
                    "{v} not independent of m1: {joint_prob} vs {product}"
                );
            }
        }
    }

    #[test]
    fn mnar_verdicts_come_with_a_working_mechanism() {
        let cohort = build_graph(COHORT).unwrap();
        assert_eq!(classify_missingness(&cohort, "X").unwrap().class, MissingnessClass::Mnar);

        // A parameterization where participation reads the classic risk
        // factors: baseline rates one half, one nonzero selection slope.
        let model = saturated_binary_parametrization(&cohort).unwrap();
        let mut params = ParamMap::new();
        for var in model.vars() {
            if let TableSpec::LinearBinary { coeffs } = &var.spec {
                for (name, subset) in coeffs {
                    params.set(name, if subset.is_empty() { 0.5 } else { 0.0 });
                }
            }
        }
        params.set("psi_M1_X", 0.3);
        let joint = model.instantiate(&params).unwrap().joint(DEFAULT_STATE_CAP).unwrap();
        let m1 = joint.var_index("M1").unwrap();
        let x = joint.var_index("X").unwrap();
        let selected_given = |xv: usize| {
            joint.sum_where(&[(m1, 1), (x, xv)]) / joint.sum_where(&[(x, xv)])
        };
        let spread = (selected_given(1) - selected_given(0)).abs();
        assert!(spread > 0.05, "selection probability flat in X: spread {spread}");
    }

    #[test]
    fn ignorability_flags_factors_that_read_random_values() {
        let case_control = build_graph(CASE_CONTROL).unwrap();
        let flags = ignorable_selection_terms(&case_control);
        assert!(flags["mOmega"]);
        assert!(flags["m1"], "pure random sampling is droppable");
        assert!(!flags["m2"], "reads the recorded outcome");

        let cohort = build_graph(COHORT).unwrap();
        let flags = ignorable_selection_terms(&cohort);
        assert!(flags["m1"], "random sampling within the frame");
        assert!(flags["M2"], "technical nonresponse");
        assert!(!flags["M0"], "left truncation reads baseline status");
        assert!(!flags["M1"], "participation reads risk factors");
        assert!(!flags["m2"], "second stage reads the outcome");

        let survey = build_graph(SURVEY).unwrap();
        assert!(ignorable_selection_terms(&survey).values().all(|&ok| ok));
    }

    #[test]
    fn cohort_fixture_separation_profile() {
        // The conditional-independence pattern that makes the two-stage
        // cohort usable for healthy-population analyses but not for
        // population-level ones.
        let g = build_graph(COHORT).unwrap();
        let sep = |z: &[&str]| d_separated(g.as_graph(), &["M1"], &["Y"], z).unwrap();
        assert!(!sep(&["Z"]));
        assert!(!sep(&["Z", "Y0"]));
        assert!(sep(&["X", "Y0"]));
        assert!(sep(&["Z", "X", "Y0"]));
    }
}
