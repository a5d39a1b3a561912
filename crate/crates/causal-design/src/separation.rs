//! Graphical and numerical conditional-independence checks.
//!
//! [`d_separated`] answers separation queries on any DAG in linear time via
//! directed reachability; [`exact_ci`] checks the corresponding numerical
//! statement on a concrete discrete model by exhaustive enumeration. The two
//! are tied together by the global Markov property: d-separation must imply
//! an exact conditional independence in every model the graph can carry.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::graph::Graph;
use crate::model::{DiscreteModel, ModelError, ParamMap, DEFAULT_STATE_CAP};

/// A conditional-independence query: is `a` independent of `b` given `given`?
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiQuery {
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub given: Vec<String>,
}

impl CiQuery {
    pub fn new<S: Into<String>>(
        a: impl IntoIterator<Item = S>,
        b: impl IntoIterator<Item = S>,
        given: impl IntoIterator<Item = S>,
    ) -> Self {
        CiQuery {
            a: a.into_iter().map(Into::into).collect(),
            b: b.into_iter().map(Into::into).collect(),
            given: given.into_iter().map(Into::into).collect(),
        }
    }
}

/// Errors from separation queries.
#[derive(Debug, Error)]
pub enum SeparationError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` appears in more than one query set")]
    OverlappingSets(String),
    #[error("query set `{0}` must not be empty")]
    EmptySet(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn resolve_one(g: &Graph, ids: &[impl AsRef<str>]) -> Result<Vec<usize>, SeparationError> {
    ids.iter()
        .map(|id| {
            g.idx(id.as_ref())
                .map_err(|_| SeparationError::UnknownNode(id.as_ref().to_string()))
        })
        .collect()
}

pub(crate) type ResolvedSets = (Vec<usize>, Vec<usize>, Vec<usize>);

pub(crate) fn resolve_sets(
    g: &Graph,
    x: &[impl AsRef<str>],
    y: &[impl AsRef<str>],
    z: &[impl AsRef<str>],
) -> Result<ResolvedSets, SeparationError> {
    if x.is_empty() {
        return Err(SeparationError::EmptySet("x"));
    }
    if y.is_empty() {
        return Err(SeparationError::EmptySet("y"));
    }
    let xi = resolve_one(g, x)?;
    let yi = resolve_one(g, y)?;
    let zi = resolve_one(g, z)?;
    let mut seen = BTreeSet::new();
    for &ix in xi.iter().chain(&yi).chain(&zi) {
        if !seen.insert(ix) {
            return Err(SeparationError::OverlappingSets(g.node(ix).id.clone()));
        }
    }
    Ok((xi, yi, zi))
}

/// True when every node of `x` is d-separated from every node of `y` by `z`.
///
/// Uses directed reachability over (node, travel direction) states: a trail
/// may pass a non-collider only while unconditioned, and a collider only
/// when the collider has a conditioned descendant.
pub fn d_separated(
    g: &Graph,
    x: &[impl AsRef<str>],
    y: &[impl AsRef<str>],
    z: &[impl AsRef<str>],
) -> Result<bool, SeparationError> {
    let (xi, yi, zi) = resolve_sets(g, x, y, z)?;
    let n = g.len();
    let in_z: Vec<bool> = {
        let mut v = vec![false; n];
        for &ix in &zi {
            v[ix] = true;
        }
        v
    };
    // Reflexive ancestors of the conditioning set: colliders open here.
    let mut anc_z = vec![false; n];
    {
        let mut queue: VecDeque<usize> = zi.iter().copied().collect();
        for &ix in &zi {
            anc_z[ix] = true;
        }
        while let Some(v) = queue.pop_front() {
            for p in g.parents_idx(v) {
                if !anc_z[p] {
                    anc_z[p] = true;
                    queue.push_back(p);
                }
            }
        }
    }
    let target: Vec<bool> = {
        let mut v = vec![false; n];
        for &ix in &yi {
            v[ix] = true;
        }
        v
    };

    // Travel states: arrived at a node moving towards parents (`up`, as if
    // from a child) or towards children (`down`, as if from a parent).
    const UP: usize = 0;
    const DOWN: usize = 1;
    let mut visited = vec![[false; 2]; n];
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    for &ix in &xi {
        queue.push_back((ix, UP));
        visited[ix][UP] = true;
    }
    while let Some((v, dir)) = queue.pop_front() {
        if !in_z[v] && target[v] {
            return Ok(false);
        }
        let push = |queue: &mut VecDeque<(usize, usize)>,
                        visited: &mut Vec<[bool; 2]>,
                        node: usize,
                        dir: usize| {
            if !visited[node][dir] {
                visited[node][dir] = true;
                queue.push_back((node, dir));
            }
        };
        match dir {
            UP if !in_z[v] => {
                for p in g.parents_idx(v) {
                    push(&mut queue, &mut visited, p, UP);
                }
                for c in g.children_idx(v) {
                    push(&mut queue, &mut visited, c, DOWN);
                }
            }
            DOWN => {
                if !in_z[v] {
                    for c in g.children_idx(v) {
                        push(&mut queue, &mut visited, c, DOWN);
                    }
                }
                if anc_z[v] {
                    for p in g.parents_idx(v) {
                        push(&mut queue, &mut visited, p, UP);
                    }
                }
            }
            _ => {}
        }
    }
    Ok(true)
}

/// Largest deviation `|P(a,b|c) - P(a|c) P(b|c)|` over all value assignments,
/// skipping conditioning events of probability zero.
pub fn ci_deviation(
    model: &DiscreteModel,
    params: &ParamMap,
    q: &CiQuery,
    cap: usize,
) -> Result<f64, SeparationError> {
    if q.a.is_empty() {
        return Err(SeparationError::EmptySet("a"));
    }
    if q.b.is_empty() {
        return Err(SeparationError::EmptySet("b"));
    }
    let mut seen = BTreeSet::new();
    for name in q.a.iter().chain(&q.b).chain(&q.given) {
        if !seen.insert(name.as_str()) {
            return Err(SeparationError::OverlappingSets(name.clone()));
        }
    }
    let joint = model.instantiate(params)?.joint(cap)?;
    let ix_of = |name: &String| joint.var_index(name).map_err(SeparationError::from);
    let a_ix: Vec<usize> = q.a.iter().map(ix_of).collect::<Result<_, _>>()?;
    let b_ix: Vec<usize> = q.b.iter().map(ix_of).collect::<Result<_, _>>()?;
    let c_ix: Vec<usize> = q.given.iter().map(ix_of).collect::<Result<_, _>>()?;

    let keep: Vec<usize> =
        a_ix.iter().chain(&b_ix).chain(&c_ix).copied().collect();
    let m = joint.marginal(&keep);
    let na = a_ix.len();
    let nb = b_ix.len();

    let assignments_over = |vars: std::ops::Range<usize>| -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new()];
        for var in vars {
            let card = m.domains[var].len();
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..card).map(move |val| {
                        let mut next = prefix.clone();
                        next.push((var, val));
                        next
                    })
                })
                .collect();
        }
        out
    };
    let a_assignments = assignments_over(0..na);
    let b_assignments = assignments_over(na..na + nb);
    let c_assignments = assignments_over(na + nb..keep.len());

    let mut worst: f64 = 0.0;
    for c in &c_assignments {
        let pc = m.sum_where(c);
        if pc == 0.0 {
            continue;
        }
        for a in &a_assignments {
            let mut ac: Vec<(usize, usize)> = a.clone();
            ac.extend_from_slice(c);
            let pac = m.sum_where(&ac);
            for b in &b_assignments {
                let mut bc: Vec<(usize, usize)> = b.clone();
                bc.extend_from_slice(c);
                let pbc = m.sum_where(&bc);
                let mut abc = ac.clone();
                abc.extend_from_slice(b);
                let pabc = m.sum_where(&abc);
                let dev = (pabc / pc - (pac / pc) * (pbc / pc)).abs();
                worst = worst.max(dev);
            }
        }
    }
    Ok(worst)
}

/// True when `a` and `b` are conditionally independent given `given` in the
/// instantiated model, up to tolerance `tol`, by exhaustive enumeration.
pub fn exact_ci(
    model: &DiscreteModel,
    params: &ParamMap,
    q: &CiQuery,
    tol: f64,
) -> Result<bool, SeparationError> {
    Ok(ci_deviation(model, params, q, DEFAULT_STATE_CAP)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{InfoAttr, Node};
    use crate::model::{ParamTag, TableSpec, VarTable};
    use crate::oracle;

    fn dag(nodes: &[&str], edges: &[(&str, &str)]) -> Graph {
        let mut g = Graph::new("test");
        for id in nodes {
            g.add_node(Node::causal(*id, InfoAttr::Observed)).unwrap();
        }
        for (a, b) in edges {
            g.add_edge(a, b).unwrap();
        }
        g
    }

    #[test]
    fn chain_fork_collider() {
        let chain = dag(&["X", "Z", "Y"], &[("X", "Z"), ("Z", "Y")]);
        assert!(!d_separated(&chain, &["X"], &["Y"], &[] as &[&str]).unwrap());
        assert!(d_separated(&chain, &["X"], &["Y"], &["Z"]).unwrap());

        let fork = dag(&["X", "Z", "Y"], &[("Z", "X"), ("Z", "Y")]);
        assert!(!d_separated(&fork, &["X"], &["Y"], &[] as &[&str]).unwrap());
        assert!(d_separated(&fork, &["X"], &["Y"], &["Z"]).unwrap());

        let collider = dag(&["X", "Z", "Y", "W"], &[("X", "Z"), ("Y", "Z"), ("Z", "W")]);
        assert!(d_separated(&collider, &["X"], &["Y"], &[] as &[&str]).unwrap());
        assert!(!d_separated(&collider, &["X"], &["Y"], &["Z"]).unwrap());
        // Conditioning on a collider's descendant also opens the trail.
        assert!(!d_separated(&collider, &["X"], &["Y"], &["W"]).unwrap());
    }

    #[test]
    fn confounded_mediation() {
        let g = dag(
            &["U", "X", "Z", "Y"],
            &[("U", "X"), ("U", "Y"), ("X", "Z"), ("Z", "Y")],
        );
        assert!(!d_separated(&g, &["X"], &["Y"], &[] as &[&str]).unwrap());
        assert!(!d_separated(&g, &["X"], &["Y"], &["Z"]).unwrap());
        assert!(d_separated(&g, &["X"], &["Y"], &["Z", "U"]).unwrap());
        // The mediator screens X off from Y only together with U; Z alone
        // leaves the back-door trail open.
        assert!(d_separated(&g, &["Z"], &["U"], &["X"]).unwrap());
    }

    #[test]
    fn set_valued_queries() {
        let g = dag(
            &["A", "B", "C", "D"],
            &[("A", "C"), ("B", "C"), ("C", "D")],
        );
        assert!(d_separated(&g, &["A", "B"], &["D"], &["C"]).unwrap());
        assert!(!d_separated(&g, &["A", "B"], &["D"], &[] as &[&str]).unwrap());
    }

    #[test]
    fn query_validation() {
        let g = dag(&["X", "Y"], &[("X", "Y")]);
        assert!(matches!(
            d_separated(&g, &["X"], &["Q"], &[] as &[&str]).unwrap_err(),
            SeparationError::UnknownNode(n) if n == "Q"
        ));
        assert!(matches!(
            d_separated(&g, &["X"], &["X"], &[] as &[&str]).unwrap_err(),
            SeparationError::OverlappingSets(n) if n == "X"
        ));
        assert!(matches!(
            d_separated(&g, &[] as &[&str], &["X"], &[] as &[&str]).unwrap_err(),
            SeparationError::EmptySet("x")
        ));
    }

    #[test]
    fn matches_path_enumeration_on_all_small_dags() {
        // Exhaustive: every labeled DAG on 4 nodes, every ordered pair of
        // distinct endpoints, every conditioning subset of the rest.
        let names = ["A", "B", "C", "D"];
        let mut dags = 0usize;
        for mut mask in 0..3usize.pow(6) {
            let mut edges = Vec::new();
            let mut ok = true;
            for i in 0..4 {
                for j in (i + 1)..4 {
                    match mask % 3 {
                        0 => {}
                        1 => edges.push((names[i], names[j])),
                        _ => edges.push((names[j], names[i])),
                    }
                    mask /= 3;
                }
            }
            let mut g = Graph::new("enum");
            for id in names {
                g.add_node(Node::causal(id, InfoAttr::Observed)).unwrap();
            }
            for (a, b) in &edges {
                g.add_edge(a, b).unwrap();
            }
            if !g.is_acyclic() {
                ok = false;
            }
            if !ok {
                continue;
            }
            dags += 1;
            for x in 0..4 {
                for y in 0..4 {
                    if x == y {
                        continue;
                    }
                    let rest: Vec<&str> = (0..4)
                        .filter(|&k| k != x && k != y)
                        .map(|k| names[k])
                        .collect();
                    for zmask in 0..(1usize << rest.len()) {
                        let z: Vec<&str> = rest
                            .iter()
                            .enumerate()
                            .filter(|(b, _)| zmask >> b & 1 == 1)
                            .map(|(_, &id)| id)
                            .collect();
                        let fast = d_separated(&g, &[names[x]], &[names[y]], &z).unwrap();
                        let slow =
                            oracle::path_d_separated(&g, &[names[x]], &[names[y]], &z).unwrap();
                        assert_eq!(
                            fast, slow,
                            "disagreement on edges {edges:?}, {} vs {} given {z:?}",
                            names[x], names[y]
                        );
                    }
                }
            }
        }
        // 543 labeled DAGs on 4 nodes.
        assert_eq!(dags, 543);
    }

    fn xor_model(noise: f64) -> (DiscreteModel, ParamMap) {
        // X, Y fair coins; Z = X xor Y with probability 1 - noise.
        let vars = vec![
            VarTable {
                name: "X".into(),
                values: vec!["0".into(), "1".into()],
                parents: vec![],
                gates: vec![],
                tag: ParamTag::Theta,
                spec: TableSpec::Explicit(vec![vec![0.5, 0.5]]),
            },
            VarTable {
                name: "Y".into(),
                values: vec!["0".into(), "1".into()],
                parents: vec![],
                gates: vec![],
                tag: ParamTag::Theta,
                spec: TableSpec::Explicit(vec![vec![0.5, 0.5]]),
            },
            VarTable {
                name: "Z".into(),
                values: vec!["0".into(), "1".into()],
                parents: vec!["X".into(), "Y".into()],
                gates: vec![],
                tag: ParamTag::Theta,
                spec: TableSpec::Explicit(vec![
                    vec![1.0 - noise, noise],
                    vec![noise, 1.0 - noise],
                    vec![noise, 1.0 - noise],
                    vec![1.0 - noise, noise],
                ]),
            },
        ];
        (DiscreteModel::new(vars).unwrap(), ParamMap::new())
    }

    #[test]
    fn exact_ci_detects_collider_dependence() {
        let (model, params) = xor_model(0.1);
        let marginal = CiQuery::new(["X"], ["Y"], [] as [&str; 0]);
        assert!(exact_ci(&model, &params, &marginal, 1e-9).unwrap());
        let conditioned = CiQuery::new(["X"], ["Y"], ["Z"]);
        assert!(!exact_ci(&model, &params, &conditioned, 1e-9).unwrap());
        let dev = ci_deviation(&model, &params, &conditioned, 1 << 20).unwrap();
        // P(X=1 | Z=z) = 0.5 while P(X=1, Y=1 | Z=0) = 0.05, so the largest
        // deviation is |0.05 - 0.25| = 0.2.
        assert!((dev - 0.2).abs() < 1e-12);
    }

    #[test]
    fn exact_ci_skips_zero_probability_conditioning_events() {
        // C is degenerate at 0, so the C=1 stratum must be ignored rather
        // than dividing by zero.
        let vars = vec![
            VarTable {
                name: "C".into(),
                values: vec!["0".into(), "1".into()],
                parents: vec![],
                gates: vec![],
                tag: ParamTag::Theta,
                spec: TableSpec::Explicit(vec![vec![1.0, 0.0]]),
            },
            VarTable {
                name: "X".into(),
                values: vec!["0".into(), "1".into()],
                parents: vec![],
                gates: vec![],
                tag: ParamTag::Theta,
                spec: TableSpec::Explicit(vec![vec![0.3, 0.7]]),
            },
            VarTable {
                name: "Y".into(),
                values: vec!["0".into(), "1".into()],
                parents: vec![],
                gates: vec![],
                tag: ParamTag::Theta,
                spec: TableSpec::Explicit(vec![vec![0.6, 0.4]]),
            },
        ];
        let model = DiscreteModel::new(vars).unwrap();
        let q = CiQuery::new(["X"], ["Y"], ["C"]);
        let dev = ci_deviation(&model, &ParamMap::new(), &q, 1 << 20).unwrap();
        assert!(dev.is_finite());
        assert!(exact_ci(&model, &ParamMap::new(), &q, 1e-9).unwrap());
    }

    #[test]
    fn separation_implies_exact_independence_in_random_models() {
        use rand::prelude::*;
        use rand_chacha::ChaCha12Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(0x5e9a);
        let names = ["A", "B", "C", "D"];
        for _ in 0..40 {
            // Random DAG over a fixed order, random explicit tables.
            let mut g = Graph::new("rnd");
            for id in names {
                g.add_node(Node::causal(id, InfoAttr::Observed)).unwrap();
            }
            let mut vars = Vec::new();
            for (ix, id) in names.iter().enumerate() {
                let mut parents = Vec::new();
                for p in &names[..ix] {
                    if rng.random_bool(0.5) {
                        g.add_edge(p, id).unwrap();
                        parents.push(p.to_string());
                    }
                }
                let rows = (0..1usize << parents.len())
                    .map(|_| {
                        let p: f64 = rng.random_range(0.05..0.95);
                        vec![1.0 - p, p]
                    })
                    .collect();
                vars.push(VarTable {
                    name: id.to_string(),
                    values: vec!["0".into(), "1".into()],
                    parents,
                    gates: vec![],
                    tag: ParamTag::Theta,
                    spec: TableSpec::Explicit(rows),
                });
            }
            let model = DiscreteModel::new(vars).unwrap();
            for x in 0..4 {
                for y in (x + 1)..4 {
                    let rest: Vec<&str> = (0..4)
                        .filter(|&k| k != x && k != y)
                        .map(|k| names[k])
                        .collect();
                    for zmask in 0..(1usize << rest.len()) {
                        let z: Vec<&str> = rest
                            .iter()
                            .enumerate()
                            .filter(|(b, _)| zmask >> b & 1 == 1)
                            .map(|(_, &id)| id)
                            .collect();
                        if d_separated(&g, &[names[x]], &[names[y]], &z).unwrap() {
                            let q = CiQuery::new(
                                [names[x]],
                                [names[y]],
                                z.iter().copied(),
                            );
                            assert!(
                                exact_ci(&model, &ParamMap::new(), &q, 1e-9).unwrap(),
                                "graph claims {} indep {} given {z:?} but model disagrees",
                                names[x],
                                names[y]
                            );
                        }
                    }
                }
            }
        }
    }
}
