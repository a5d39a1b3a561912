//! Slow, transparent reference implementations.
//!
//! Everything here recomputes an answer by brute force — enumerating paths
//! or whole state spaces — so the fast algorithms elsewhere in the crate can
//! be cross-checked against an independent derivation in tests. Nothing in
//! this module should be clever.

use crate::graph::Graph;
use crate::separation::{resolve_sets, SeparationError};

/// d-separation decided by enumerating every simple undirected path between
/// the two sets and checking each against the blocking rules directly:
/// a non-collider blocks when conditioned, a collider blocks unless it has a
/// conditioned descendant.
pub fn path_d_separated(
    g: &Graph,
    x: &[impl AsRef<str>],
    y: &[impl AsRef<str>],
    z: &[impl AsRef<str>],
) -> Result<bool, SeparationError> {
    let (xi, yi, zi) = resolve_sets(g, x, y, z)?;
    let n = g.len();
    let mut in_z = vec![false; n];
    for &ix in &zi {
        in_z[ix] = true;
    }
    // Reflexive descendant closure touching the conditioning set.
    let has_conditioned_descendant: Vec<bool> = (0..n)
        .map(|v| g.descendants_idx([v]).into_iter().any(|d| in_z[d]))
        .collect();

    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in g.edge_indices() {
        neighbours[a].push(b);
        neighbours[b].push(a);
    }

    fn active(g: &Graph, path: &[usize], in_z: &[bool], opens: &[bool]) -> bool {
        for w in path.windows(3) {
            let (prev, mid, next) = (w[0], w[1], w[2]);
            let collider = g.has_edge_idx(prev, mid) && g.has_edge_idx(next, mid);
            if collider {
                if !opens[mid] {
                    return false;
                }
            } else if in_z[mid] {
                return false;
            }
        }
        true
    }

    for &start in &xi {
        let targets: Vec<bool> = {
            let mut t = vec![false; n];
            for &ix in &yi {
                t[ix] = true;
            }
            t
        };
        // Depth-first enumeration of simple paths from `start`.
        let mut stack: Vec<Vec<usize>> = vec![vec![start]];
        while let Some(path) = stack.pop() {
            let last = *path.last().expect("path is never empty");
            if targets[last] && path.len() > 1 {
                if active(g, &path, &in_z, &has_conditioned_descendant) {
                    return Ok(false);
                }
                continue;
            }
            for &next in &neighbours[last] {
                if !path.contains(&next) {
                    let mut extended = path.clone();
                    extended.push(next);
                    stack.push(extended);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{InfoAttr, Node};

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
    fn adjacent_nodes_are_always_connected() {
        let g = dag(&["X", "Y", "Z"], &[("X", "Y"), ("Z", "Y")]);
        assert!(!path_d_separated(&g, &["X"], &["Y"], &["Z"]).unwrap());
    }

    #[test]
    fn collider_rules_apply_per_path() {
        let g = dag(
            &["X", "C", "Y", "D"],
            &[("X", "C"), ("Y", "C"), ("C", "D")],
        );
        assert!(path_d_separated(&g, &["X"], &["Y"], &[] as &[&str]).unwrap());
        assert!(!path_d_separated(&g, &["X"], &["Y"], &["C"]).unwrap());
        assert!(!path_d_separated(&g, &["X"], &["Y"], &["D"]).unwrap());
    }
}
