//! Synthetic road maps for experiments and tests.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoding::turning_angle;
use crate::error::{Error, Result};
use crate::map::{GeoNode, MapGraph, NodeId, EARTH_RADIUS_M};

const ORIGIN: (f64, f64) = (49.0, 8.4);

/// Shape parameters of [`grid_map`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub cols: usize,
    pub rows: usize,
    /// Nominal block size in meters.
    pub cell: f64,
    /// Maximum node displacement as a fraction of `cell`.
    pub jitter: f64,
    /// Grid edges to delete (keeping every node at degree ≥ 2 and the graph connected).
    pub remove_edges: usize,
    /// Smallest allowed deviation from straight-through at any node, degrees.
    pub min_bend_deg: f64,
    /// Smallest allowed angle between two roads leaving the same node, degrees.
    pub min_separation_deg: f64,
    pub min_edge_m: f64,
    pub seed: u64,
}

impl GridSpec {
    /// 8 × 5 grid trimmed to 40 nodes and 61 edges.
    pub fn desk() -> Self {
        GridSpec {
            cols: 8,
            rows: 5,
            cell: 110.0,
            jitter: 0.35,
            remove_edges: 6,
            min_bend_deg: 18.0,
            min_separation_deg: 30.0,
            min_edge_m: 50.0,
            seed: 2,
        }
    }
}

/// The 40-node, 61-edge map used for desk-scale experiments.
pub fn desk_map() -> MapGraph {
    grid_map(&GridSpec::desk()).expect("the desk map spec is satisfiable")
}

fn to_geo(id: i64, (x, y): (f64, f64)) -> GeoNode {
    let (lat0, lon0) = ORIGIN;
    GeoNode {
        id: NodeId(id),
        lat: lat0 + (y / EARTH_RADIUS_M).to_degrees(),
        lon: lon0 + (x / (EARTH_RADIUS_M * lat0.to_radians().cos())).to_degrees(),
    }
}

fn connected(n: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Jittered grid whose nodes are repositioned until every turn is clearly
/// bent and no two roads leave a node nearly on top of each other.
pub fn grid_map(spec: &GridSpec) -> Result<MapGraph> {
    let (cols, rows) = (spec.cols, spec.rows);
    if cols < 2 || rows < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 × 2 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let idx = |c: usize, r: usize| r * cols + c;
    let n = cols * rows;

    let mut edges = BTreeSet::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.insert((idx(c, r), idx(c + 1, r)));
            }
            if r + 1 < rows {
                edges.insert((idx(c, r), idx(c, r + 1)));
            }
        }
    }
    let mut candidates: Vec<_> = edges.iter().copied().collect();
    candidates.shuffle(&mut rng);
    let mut removed = 0;
    for (a, b) in candidates {
        if removed == spec.remove_edges {
            break;
        }
        let degree = |v: usize| edges.iter().filter(|&&(x, y)| x == v || y == v).count();
        if degree(a) < 3 || degree(b) < 3 {
            continue;
        }
        edges.remove(&(a, b));
        if connected(n, &edges) {
            removed += 1;
        } else {
            edges.insert((a, b));
        }
    }
    if removed < spec.remove_edges {
        return Err(Error::InvalidArgument(format!(
            "could only remove {removed} of {} edges",
            spec.remove_edges
        )));
    }

    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(a, b) in &edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let home = |v: usize| ((v % cols) as f64 * spec.cell, (v / cols) as f64 * spec.cell);
    let jitter = |v: usize, rng: &mut ChaCha8Rng| {
        let (x, y) = home(v);
        let j = spec.jitter * spec.cell;
        (x + rng.random_range(-j..=j), y + rng.random_range(-j..=j))
    };
    let mut pos: Vec<(f64, f64)> = (0..n).map(|v| jitter(v, &mut rng)).collect();

    let violates = |v: usize, pos: &[(f64, f64)]| -> bool {
        let nbrs = &adj[&v];
        for (i, &a) in nbrs.iter().enumerate() {
            let (dx, dy) = (pos[a].0 - pos[v].0, pos[a].1 - pos[v].1);
            if dx.hypot(dy) < spec.min_edge_m {
                return true;
            }
            for &b in &nbrs[i + 1..] {
                let Ok(angle) = turning_angle(pos[a], pos[v], pos[b]) else {
                    return true;
                };
                let sep = angle.min(360.0 - angle);
                if sep < spec.min_separation_deg || (180.0 - sep) < spec.min_bend_deg {
                    return true;
                }
            }
        }
        false
    };

    for _ in 0..20_000 {
        let bad: Vec<usize> = (0..n)
            .filter(|&v| violates(v, &pos))
            .collect();
        if bad.is_empty() {
            let nodes: Vec<GeoNode> = pos.iter().enumerate().map(|(v, &p)| to_geo(v as i64 + 1, p)).collect();
            let pairs: Vec<(NodeId, NodeId)> = edges
                .iter()
                .map(|&(a, b)| (NodeId(a as i64 + 1), NodeId(b as i64 + 1)))
                .collect();
            return MapGraph::from_parts(nodes, &pairs);
        }
        // move either the offending node or one of its neighbours
        let v = bad[rng.random_range(0..bad.len())];
        let target = if rng.random_bool(0.5) {
            v
        } else {
            adj[&v][rng.random_range(0..adj[&v].len())]
        };
        pos[target] = jitter(target, &mut rng);
    }
    Err(Error::InvalidArgument("could not place grid nodes within the angle constraints".into()))
}

/// Random connected graph: a random spanning tree plus `extra` chords, with
/// nodes scattered over a square of `extent` meters.
pub fn random_connected(nodes: usize, extra: usize, extent: f64, seed: u64) -> Result<MapGraph> {
    if nodes < 2 {
        return Err(Error::InvalidArgument("need at least 2 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geo: Vec<GeoNode> = (0..nodes)
        .map(|i| to_geo(i as i64, (rng.random_range(0.0..extent), rng.random_range(0.0..extent))))
        .collect();
    let mut pairs = Vec::new();
    for i in 1..nodes {
        pairs.push((NodeId(rng.random_range(0..i) as i64), NodeId(i as i64)));
    }
    let max_extra = nodes * (nodes - 1) / 2 - (nodes - 1);
    let mut present: BTreeSet<(i64, i64)> = pairs.iter().map(|&(a, b)| (a.0.min(b.0), a.0.max(b.0))).collect();
    let mut added = 0;
    while added < extra.min(max_extra) {
        let a = rng.random_range(0..nodes) as i64;
        let b = rng.random_range(0..nodes) as i64;
        if a != b && present.insert((a.min(b), a.max(b))) {
            pairs.push((NodeId(a), NodeId(b)));
            added += 1;
        }
    }
    MapGraph::from_parts(geo, &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_map_matches_target_size() {
        let g = desk_map();
        assert_eq!((g.node_count(), g.edge_count()), (40, 61));
        for id in g.node_ids() {
            assert!(g.degree(id).unwrap() >= 2);
        }
        for e in g.edges() {
            assert!(g.edge_length(e.id).unwrap() > 45.0);
        }
    }

    #[test]
    fn desk_map_has_no_straight_through_turns() {
        let g = desk_map();
        for v in g.node_ids() {
            let nb = g.neighbors(v).unwrap();
            for (i, &(a, _)) in nb.iter().enumerate() {
                for &(b, _) in &nb[i + 1..] {
                    let ang = turning_angle(
                        g.project_local(a).unwrap(),
                        g.project_local(v).unwrap(),
                        g.project_local(b).unwrap(),
                    )
                    .unwrap();
                    assert!((ang - 180.0).abs() > 17.0, "node {v}: {ang}");
                }
            }
        }
    }

    #[test]
    fn random_graph_is_connected_with_requested_size() {
        let g = random_connected(12, 5, 500.0, 3).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (12, 16));
    }
}
