//! Motion encoding: virtual nodes, turning angles and the 20-symbol alphabet.
//!
//! Distance is expressed through virtual nodes placed along each road
//! segment. Walking straight through a virtual node is a 180° turn, so a
//! trajectory becomes a sequence of turn observations, one per interior node,
//! each quantized into one of 20 uniform bins.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::map::{EdgeId, MapGraph, NodeId};

/// Number of input symbols.
pub const ALPHABET_SIZE: usize = 20;
/// Width of one angle bin in degrees.
pub const BIN_WIDTH_DEG: f64 = 360.0 / ALPHABET_SIZE as f64;
/// Default distance between virtual nodes, meters.
pub const DEFAULT_SPACING_M: f64 = 30.0;

// Slack for values that are mathematically on a boundary but land a few ulps short.
const BOUNDARY_SLACK: f64 = 1e-9;

pub type Point = (f64, f64);

/// One quantized turn observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AngleBin(u8);

impl AngleBin {
    pub fn new(bin: usize) -> Result<Self> {
        if bin < ALPHABET_SIZE {
            Ok(AngleBin(bin as u8))
        } else {
            Err(Error::InvalidArgument(format!("angle bin {bin} outside 0..{ALPHABET_SIZE}")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The bin of straight-through motion.
    pub fn straight() -> Self {
        AngleBin(10)
    }
}

impl fmt::Display for AngleBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Number of equal sub-segments a segment of `length` is cut into.
pub fn subdivision_count(length: f64, spacing: f64) -> usize {
    ((length / spacing) - BOUNDARY_SLACK).ceil().max(1.0) as usize
}

/// Turning angle at `cur`, in degrees in `[0, 360)`.
///
/// Measured counterclockwise from the back vector (`cur → prev`) to the
/// forward vector (`cur → next`). Straight-through motion is exactly 180, a
/// right turn of 90° is 90 and a left turn is 270.
pub fn turning_angle(prev: Point, cur: Point, next: Point) -> Result<f64> {
    let back = (prev.0 - cur.0, prev.1 - cur.1);
    let fwd = (next.0 - cur.0, next.1 - cur.1);
    let (nb, nf) = (back.0.hypot(back.1), fwd.0.hypot(fwd.1));
    if nb == 0.0 || nf == 0.0 || !(nb * nf).is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "turn at ({}, {}) has a coincident neighbour",
            cur.0, cur.1
        )));
    }
    let cross = back.0 * fwd.1 - back.1 * fwd.0;
    let dot = back.0 * fwd.0 + back.1 * fwd.1;
    if cross.abs() <= 1e-12 * nb * nf {
        return Ok(if dot < 0.0 { 180.0 } else { 0.0 });
    }
    let deg = cross.atan2(dot).to_degrees();
    let deg = if deg < 0.0 { deg + 360.0 } else { deg };
    Ok(if deg >= 360.0 { 0.0 } else { deg })
}

/// Maps an angle onto the 20 half-open bins `[18k, 18(k+1))`.
///
/// Any finite angle is reduced mod 360 first.
pub fn quantize_angle(angle: f64) -> AngleBin {
    let a = angle.rem_euclid(360.0);
    let bin = ((a + BOUNDARY_SLACK) / BIN_WIDTH_DEG).floor() as usize;
    AngleBin(if bin >= ALPHABET_SIZE { 0 } else { bin as u8 })
}

/// Input bins paired with the base edge occupied after each observation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedTrajectory {
    pub inputs: Vec<AngleBin>,
    pub labels: Vec<EdgeId>,
}

impl EncodedTrajectory {
    pub fn new(inputs: Vec<AngleBin>, labels: Vec<EdgeId>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        Ok(EncodedTrajectory { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

impl fmt::Display for EncodedTrajectory {
    /// `b,b,b|l,l,l`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(",");
        write!(
            f,
            "{}|{}",
            join(&mut self.inputs.iter().map(|b| b.to_string())),
            join(&mut self.labels.iter().map(|l| l.to_string()))
        )
    }
}

impl FromStr for EncodedTrajectory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lhs, rhs) = s
            .trim()
            .split_once('|')
            .ok_or_else(|| Error::InvalidArgument(format!("record `{s}` lacks a `|`")))?;
        let field = |x: &str| -> Result<usize> {
            x.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number `{x}` in record")))
        };
        let inputs = lhs.split(',').filter(|x| !x.trim().is_empty()).map(|x| field(x).and_then(AngleBin::new));
        let labels = rhs.split(',').filter(|x| !x.trim().is_empty()).map(|x| field(x).map(|v| EdgeId(v as u32)));
        EncodedTrajectory::new(inputs.collect::<Result<_>>()?, labels.collect::<Result<_>>()?)
    }
}

/// A [`MapGraph`] with virtual nodes inserted along every edge.
#[derive(Debug, Clone)]
pub struct AugmentedGraph {
    base: MapGraph,
    spacing: f64,
    positions: HashMap<NodeId, Point>,
    adjacency: HashMap<NodeId, Vec<NodeId>>,
    parent: HashMap<(NodeId, NodeId), EdgeId>,
    // per base edge, node chain from its low endpoint to its high endpoint
    chains: Vec<Vec<NodeId>>,
    first_virtual: i64,
}

impl AugmentedGraph {
    pub fn base(&self) -> &MapGraph {
        &self.base
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn virtual_count(&self) -> usize {
        self.positions.len() - self.base.node_count()
    }

    pub fn sub_edge_count(&self) -> usize {
        self.parent.len()
    }

    pub fn is_virtual(&self, id: NodeId) -> bool {
        id.0 >= self.first_virtual && self.positions.contains_key(&id)
    }

    /// Local planar position in meters.
    pub fn position(&self, id: NodeId) -> Result<Point> {
        self.positions.get(&id).copied().ok_or(Error::UnknownNode(id.0))
    }

    pub fn neighbors(&self, id: NodeId) -> Result<&[NodeId]> {
        self.adjacency
            .get(&id)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownNode(id.0))
    }

    /// Base edge subdivided by the sub-edge `u–v`.
    pub fn parent_edge(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.parent.get(&key).copied()
    }

    /// Nodes along base edge `e` starting at endpoint `from`, both endpoints included.
    pub fn chain_from(&self, e: EdgeId, from: NodeId) -> Result<Vec<NodeId>> {
        let edge = self.base.edge(e)?;
        let chain = &self.chains[e.index()];
        if from == edge.a {
            Ok(chain.clone())
        } else if from == edge.b {
            Ok(chain.iter().rev().copied().collect())
        } else {
            Err(Error::InvalidPath(format!("node {from} is not an endpoint of edge {e}")))
        }
    }

    /// Routes a base-node path through the virtual nodes of every edge.
    pub fn expand_base_path(&self, path: &[NodeId]) -> Result<Vec<NodeId>> {
        let first = *path
            .first()
            .ok_or_else(|| Error::InvalidPath("empty path".into()))?;
        if !self.base.contains_node(first) {
            return Err(Error::UnknownNode(first.0));
        }
        let mut out = vec![first];
        for w in path.windows(2) {
            let e = self.base.edge_between(w[0], w[1]).ok_or_else(|| {
                Error::InvalidPath(format!("nodes {} and {} are not adjacent", w[0], w[1]))
            })?;
            out.extend(self.chain_from(e, w[0])?.into_iter().skip(1));
        }
        Ok(out)
    }
}

/// Subdivides every base edge of length `L` into `ceil(L / spacing)` equal
/// sub-edges. Virtual node ids start above the largest real id and are
/// assigned in edge-id order.
pub fn insert_virtual_nodes(g: &MapGraph, spacing: f64) -> Result<AugmentedGraph> {
    if !spacing.is_finite() || spacing <= 0.0 {
        return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing}")));
    }
    let mut positions = HashMap::new();
    let mut adjacency: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for id in g.node_ids() {
        positions.insert(id, g.project_local(id)?);
        adjacency.insert(id, Vec::new());
    }
    let first_virtual = g.node_ids().map(|n| n.0).max().unwrap_or(0) + 1;
    let mut next_id = first_virtual;
    let mut parent = HashMap::new();
    let mut chains = Vec::with_capacity(g.edge_count());

    for edge in g.edges() {
        let pa = positions[&edge.a];
        let pb = positions[&edge.b];
        let n = subdivision_count((pb.0 - pa.0).hypot(pb.1 - pa.1), spacing);
        let mut chain = Vec::with_capacity(n + 1);
        chain.push(edge.a);
        for j in 1..n {
            let f = j as f64 / n as f64;
            let id = NodeId(next_id);
            next_id += 1;
            positions.insert(id, (pa.0 + f * (pb.0 - pa.0), pa.1 + f * (pb.1 - pa.1)));
            chain.push(id);
        }
        chain.push(edge.b);
        for w in chain.windows(2) {
            let key = if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
            parent.insert(key, edge.id);
            adjacency.entry(w[0]).or_default().push(w[1]);
            adjacency.entry(w[1]).or_default().push(w[0]);
        }
        chains.push(chain);
    }
    for list in adjacency.values_mut() {
        list.sort();
    }

    Ok(AugmentedGraph {
        base: g.clone(),
        spacing,
        positions,
        adjacency,
        parent,
        chains,
        first_virtual,
    })
}

/// Encodes an augmented-node path: one observation per interior node.
pub fn encode_path(ag: &AugmentedGraph, path: &[NodeId]) -> Result<EncodedTrajectory> {
    if path.len() < 3 {
        return Err(Error::InvalidPath(format!(
            "need at least 3 nodes to observe a turn, got {}",
            path.len()
        )));
    }
    let mut inputs = Vec::with_capacity(path.len() - 2);
    let mut labels = Vec::with_capacity(path.len() - 2);
    for w in path.windows(2) {
        if ag.parent_edge(w[0], w[1]).is_none() {
            return Err(Error::InvalidPath(format!(
                "nodes {} and {} are not adjacent in the augmented graph",
                w[0], w[1]
            )));
        }
    }
    for i in 1..path.len() - 1 {
        let angle = turning_angle(
            ag.position(path[i - 1])?,
            ag.position(path[i])?,
            ag.position(path[i + 1])?,
        )?;
        inputs.push(quantize_angle(angle));
        labels.push(ag.parent_edge(path[i], path[i + 1]).expect("checked above"));
    }
    Ok(EncodedTrajectory { inputs, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::parse_simple_graph;

    // 100 m due north: 100 / (R * pi / 180) degrees of latitude
    fn meters_to_lat(m: f64) -> f64 {
        (m / crate::map::EARTH_RADIUS_M).to_degrees()
    }

    fn line_graph(lengths: &[f64]) -> MapGraph {
        let mut text = String::new();
        let mut y = 0.0;
        text.push_str("node 0 0 0\n");
        for (i, l) in lengths.iter().enumerate() {
            y += l;
            text.push_str(&format!("node {} {} 0\n", i + 1, meters_to_lat(y)));
            text.push_str(&format!("edge {} {}\n", i, i + 1));
        }
        parse_simple_graph(&text).unwrap()
    }

    #[test]
    fn hundred_meters_at_thirty() {
        let ag = insert_virtual_nodes(&line_graph(&[100.0]), 30.0).unwrap();
        assert_eq!(ag.sub_edge_count(), 4);
        assert_eq!(ag.virtual_count(), 3);
        let chain = ag.chain_from(EdgeId(0), NodeId(0)).unwrap();
        for w in chain.windows(2) {
            let (a, b) = (ag.position(w[0]).unwrap(), ag.position(w[1]).unwrap());
            assert!(((b.0 - a.0).hypot(b.1 - a.1) - 25.0).abs() < 1e-6);
        }
        for v in &chain[1..chain.len() - 1] {
            assert!(ag.is_virtual(*v));
            assert!(v.0 > 1);
            assert_eq!(ag.neighbors(*v).unwrap().len(), 2);
        }
    }

    #[test]
    fn short_edge_is_not_subdivided() {
        let ag = insert_virtual_nodes(&line_graph(&[10.0]), 30.0).unwrap();
        assert_eq!((ag.sub_edge_count(), ag.virtual_count()), (1, 0));
    }

    #[test]
    fn virtual_nodes_are_collinear() {
        let g = parse_simple_graph("node 1 49.0 8.4\nnode 2 49.003 8.407\nedge 1 2\n").unwrap();
        let ag = insert_virtual_nodes(&g, 30.0).unwrap();
        let a = ag.position(NodeId(1)).unwrap();
        let b = ag.position(NodeId(2)).unwrap();
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        for v in ag.chain_from(EdgeId(0), NodeId(1)).unwrap() {
            let p = ag.position(v).unwrap();
            let dist = ((b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)).abs() / len;
            assert!(dist < 1e-9, "{dist}");
        }
    }

    #[test]
    fn non_positive_spacing_rejected() {
        let g = line_graph(&[50.0]);
        assert!(insert_virtual_nodes(&g, 0.0).is_err());
        assert!(insert_virtual_nodes(&g, -1.0).is_err());
        assert!(insert_virtual_nodes(&g, f64::NAN).is_err());
    }

    #[test]
    fn straight_through_is_180() {
        assert_eq!(turning_angle((0.0, -1.0), (0.0, 0.0), (0.0, 1.0)).unwrap(), 180.0);
        assert_eq!(quantize_angle(180.0), AngleBin(10));
    }

    #[test]
    fn u_turn_is_near_zero() {
        let a = turning_angle((-1.0, 0.0), (0.0, 0.0), (-1.0, 1e-9)).unwrap();
        assert!(!(1e-6..=360.0 - 1e-6).contains(&a), "{a}");
    }

    #[test]
    fn left_and_right_sum_to_360() {
        let right = turning_angle((0.0, -1.0), (0.0, 0.0), (1.0, 0.0)).unwrap();
        let left = turning_angle((0.0, -1.0), (0.0, 0.0), (-1.0, 0.0)).unwrap();
        assert!((right - 90.0).abs() < 1e-12);
        assert!((left + right - 360.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        assert!(matches!(
            turning_angle((0.0, 0.0), (0.0, 0.0), (1.0, 0.0)),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn quantization_boundaries() {
        assert_eq!(quantize_angle(0.0).index(), 0);
        assert_eq!(quantize_angle(17.999).index(), 0);
        assert_eq!(quantize_angle(18.0).index(), 1);
        assert_eq!(quantize_angle(359.99).index(), 19);
        assert_eq!(quantize_angle(360.0).index(), 0);
        assert_eq!(quantize_angle(-90.0).index(), 15);
    }

    #[test]
    fn straight_three_node_path() {
        let ag = insert_virtual_nodes(&line_graph(&[50.0]), 30.0).unwrap();
        let path = ag.expand_base_path(&[NodeId(0), NodeId(1)]).unwrap();
        assert_eq!(path.len(), 3);
        let enc = encode_path(&ag, &path).unwrap();
        assert_eq!(enc.inputs, vec![AngleBin(10)]);
        assert_eq!(enc.labels, vec![EdgeId(0)]);
    }

    #[test]
    fn right_angle_corner_gives_bin_five() {
        // 1 -> 2 north, then 2 -> 3 east: a right turn
        let d = meters_to_lat(20.0);
        let g = parse_simple_graph(&format!(
            "node 1 0 0\nnode 2 {d} 0\nnode 3 {d} {d}\nedge 1 2\nedge 2 3\n"
        ))
        .unwrap();
        let ag = insert_virtual_nodes(&g, 30.0).unwrap();
        let enc = encode_path(&ag, &[NodeId(1), NodeId(2), NodeId(3)]).unwrap();
        // manual: back vector points south (270°), forward east (0°) → 90°
        assert_eq!(enc.inputs, vec![quantize_angle(90.0)]);
        assert_eq!(enc.inputs[0].index(), 5);
        assert_eq!(enc.labels, vec![g.edge_between(NodeId(2), NodeId(3)).unwrap()]);
    }

    #[test]
    fn encode_rejects_bad_paths() {
        let ag = insert_virtual_nodes(&line_graph(&[10.0, 10.0]), 30.0).unwrap();
        assert!(encode_path(&ag, &[NodeId(0), NodeId(1)]).is_err());
        assert!(encode_path(&ag, &[NodeId(0), NodeId(2), NodeId(1)]).is_err());
    }

    #[test]
    fn record_line_format() {
        let r = EncodedTrajectory::new(vec![AngleBin(10), AngleBin(5)], vec![EdgeId(3), EdgeId(4)]).unwrap();
        assert_eq!(r.to_string(), "10,5|3,4");
        assert_eq!("10,5|3,4".parse::<EncodedTrajectory>().unwrap(), r);
        assert!("10,5|3".parse::<EncodedTrajectory>().is_err());
        assert!("25|3".parse::<EncodedTrajectory>().is_err());
    }
}
