#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use trajloc::map::{GeoNode, MapGraph, NodeId};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Graph on nodes `0..n` laid out on a circle of roughly 1 km.
pub fn circle_graph(n: usize, edges: &[(usize, usize)]) -> MapGraph {
    let nodes = (0..n)
        .map(|i| {
            let a = i as f64 / n as f64 * std::f64::consts::TAU;
            GeoNode {
                id: NodeId(i as i64),
                lat: 49.0 + 0.005 * a.sin(),
                lon: 8.4 + 0.007 * a.cos(),
            }
        })
        .collect();
    let pairs: Vec<_> = edges
        .iter()
        .map(|&(a, b)| (NodeId(a as i64), NodeId(b as i64)))
        .collect();
    MapGraph::from_parts(nodes, &pairs).unwrap()
}

pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            for (x, y) in [(a, b), (b, a)] {
                if x == v && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Every ordered selection of `len` distinct nodes starting at `source`,
/// kept when consecutive nodes are adjacent.
pub fn brute_force_paths(g: &MapGraph, source: NodeId, len: usize) -> HashSet<Vec<NodeId>> {
    let ids: Vec<NodeId> = g.node_ids().collect();
    let mut out = HashSet::new();
    let mut perm = vec![source];
    fn rec(g: &MapGraph, ids: &[NodeId], len: usize, perm: &mut Vec<NodeId>, out: &mut HashSet<Vec<NodeId>>) {
        if perm.len() == len {
            if perm.windows(2).all(|w| g.edge_between(w[0], w[1]).is_some()) {
                out.insert(perm.clone());
            }
            return;
        }
        for &v in ids {
            if !perm.contains(&v) {
                perm.push(v);
                rec(g, ids, len, perm, out);
                perm.pop();
            }
        }
    }
    rec(g, &ids, len, &mut perm, &mut out);
    out
}
