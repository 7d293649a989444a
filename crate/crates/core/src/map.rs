//! Undirected, geo-referenced road graph.
//!
//! A [`MapGraph`] is built from OSM XML ([`parse_osm`]) or from a small
//! line-oriented fixture format ([`parse_simple_graph`]). Construction splits
//! every way into node-to-node segments, drops self-loops and duplicate pairs,
//! keeps only the largest connected component and then numbers edges
//! `0..E` in lexicographic order of their sorted endpoint pairs. Edge ids are
//! the class indices of the classifier, so this order is part of the contract.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Mean earth radius used by the local projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub i64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Identifier of a base road segment; doubles as a class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoNode {
    pub id: NodeId,
    pub lat: f64,
    pub lon: f64,
}

/// A road segment. Endpoints are stored sorted (`a < b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub a: NodeId,
    pub b: NodeId,
}

impl Edge {
    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }

    pub fn touches(&self, n: NodeId) -> bool {
        self.a == n || self.b == n
    }

    /// The endpoint that is not `n`.
    pub fn other(&self, n: NodeId) -> Option<NodeId> {
        if self.a == n {
            Some(self.b)
        } else if self.b == n {
            Some(self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapGraph {
    nodes: Vec<GeoNode>,
    index: HashMap<NodeId, usize>,
    edges: Vec<Edge>,
    pair_index: HashMap<(NodeId, NodeId), EdgeId>,
    // indexed like `nodes`; each list sorted by neighbour id
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
    local: Vec<(f64, f64)>,
    origin: (f64, f64),
}

impl MapGraph {
    /// Builds a validated graph from raw nodes and node pairs.
    ///
    /// Pairs may repeat, may be given in either orientation and may be
    /// self-loops; duplicates and loops are dropped.
    pub fn from_parts(nodes: Vec<GeoNode>, pairs: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut by_id: HashMap<NodeId, GeoNode> = HashMap::with_capacity(nodes.len());
        for n in nodes {
            if !(-90.0..=90.0).contains(&n.lat) || !(-180.0..=180.0).contains(&n.lon) {
                return Err(Error::InvalidMap(format!(
                    "node {} has coordinates out of range ({}, {})",
                    n.id, n.lat, n.lon
                )));
            }
            if by_id.insert(n.id, n).is_some() {
                return Err(Error::InvalidMap(format!("duplicate node id {}", n.id)));
            }
        }

        let mut canonical = BTreeSet::new();
        for &(u, v) in pairs {
            for n in [u, v] {
                if !by_id.contains_key(&n) {
                    return Err(Error::UnknownNode(n.0));
                }
            }
            if u != v {
                canonical.insert(if u < v { (u, v) } else { (v, u) });
            }
        }

        let keep = largest_component(&by_id, &canonical);
        if keep.is_empty() {
            return Err(Error::InvalidMap("graph has no edges".into()));
        }

        let mut nodes: Vec<GeoNode> = keep.iter().map(|id| by_id[id]).collect();
        nodes.sort_by_key(|n| n.id);
        let index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();

        let mut edges = Vec::new();
        let mut pair_index = HashMap::new();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(a, b) in canonical.iter().filter(|(a, _)| keep.contains(a)) {
            let id = EdgeId(edges.len() as u32);
            edges.push(Edge { id, a, b });
            pair_index.insert((a, b), id);
            adjacency[index[&a]].push((b, id));
            adjacency[index[&b]].push((a, id));
        }
        for list in &mut adjacency {
            list.sort();
        }

        let n = nodes.len() as f64;
        let lat0 = nodes.iter().map(|n| n.lat).sum::<f64>() / n;
        let lon0 = nodes.iter().map(|n| n.lon).sum::<f64>() / n;
        let local = nodes
            .iter()
            .map(|n| equirectangular(n.lat, n.lon, lat0, lon0))
            .collect();

        Ok(MapGraph {
            nodes,
            index,
            edges,
            pair_index,
            adjacency,
            local,
            origin: (lat0, lon0),
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> &[GeoNode] {
        &self.nodes
    }

    /// Edges in id order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Result<&GeoNode> {
        self.index
            .get(&id)
            .map(|&i| &self.nodes[i])
            .ok_or(Error::UnknownNode(id.0))
    }

    pub fn edge(&self, id: EdgeId) -> Result<&Edge> {
        self.edges.get(id.index()).ok_or(Error::UnknownEdge(id.0))
    }

    /// Edge joining `u` and `v`, in either orientation.
    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.pair_index.get(&key).copied()
    }

    /// `(neighbour, edge)` pairs sorted by neighbour id.
    pub fn neighbors(&self, id: NodeId) -> Result<&[(NodeId, EdgeId)]> {
        self.index
            .get(&id)
            .map(|&i| self.adjacency[i].as_slice())
            .ok_or(Error::UnknownNode(id.0))
    }

    pub fn degree(&self, id: NodeId) -> Result<usize> {
        self.neighbors(id).map(<[_]>::len)
    }

    /// True iff the two edges share an endpoint. An edge is adjacent to itself.
    pub fn edges_adjacent(&self, a: EdgeId, b: EdgeId) -> Result<bool> {
        let ea = self.edge(a)?;
        let eb = self.edge(b)?;
        Ok(a == b || ea.touches(eb.a) || ea.touches(eb.b))
    }

    /// Edges sharing an endpoint with `e`, excluding `e`, in ascending order.
    pub fn incident_edges(&self, e: EdgeId) -> Result<Vec<EdgeId>> {
        let edge = self.edge(e)?;
        let mut out: Vec<EdgeId> = [edge.a, edge.b]
            .iter()
            .flat_map(|&n| self.adjacency[self.index[&n]].iter().map(|&(_, id)| id))
            .filter(|&id| id != e)
            .collect();
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Equirectangular projection about the node centroid, in meters.
    pub fn project_local(&self, id: NodeId) -> Result<(f64, f64)> {
        self.index
            .get(&id)
            .map(|&i| self.local[i])
            .ok_or(Error::UnknownNode(id.0))
    }

    /// Inverse of [`MapGraph::project_local`].
    pub fn unproject(&self, x: f64, y: f64) -> (f64, f64) {
        let (lat0, lon0) = self.origin;
        let lat = lat0 + (y / EARTH_RADIUS_M).to_degrees();
        let lon = lon0 + (x / (EARTH_RADIUS_M * lat0.to_radians().cos())).to_degrees();
        (lat, lon)
    }

    /// Centroid `(lat, lon)` used as the projection origin.
    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn edge_length(&self, e: EdgeId) -> Result<f64> {
        let edge = self.edge(e)?;
        let (ax, ay) = self.project_local(edge.a)?;
        let (bx, by) = self.project_local(edge.b)?;
        Ok((bx - ax).hypot(by - ay))
    }

    /// `(min_lat, min_lon, max_lat, max_lon)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.nodes.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), n| (a.min(n.lat), b.min(n.lon), c.max(n.lat), d.max(n.lon)),
        )
    }

    /// Edge ids traversed by a node path.
    pub fn path_edges(&self, path: &[NodeId]) -> Result<Vec<EdgeId>> {
        path.windows(2)
            .map(|w| {
                self.edge_between(w[0], w[1]).ok_or_else(|| {
                    Error::InvalidPath(format!("nodes {} and {} are not adjacent", w[0], w[1]))
                })
            })
            .collect()
    }

    /// Tab-separated summary: node count, edge count and degree histogram.
    pub fn summary(&self) -> String {
        let mut hist = std::collections::BTreeMap::<usize, usize>::new();
        for list in &self.adjacency {
            *hist.entry(list.len()).or_default() += 1;
        }
        let mut out = format!("nodes\t{}\nedges\t{}\ndegree\tcount\n", self.node_count(), self.edge_count());
        for (d, c) in hist {
            let _ = writeln!(out, "{d}\t{c}");
        }
        out
    }

    /// Nodes as points and edges as line strings (`[lon, lat]` order).
    pub fn to_geojson(&self) -> Value {
        let mut features: Vec<Value> = self
            .nodes
            .iter()
            .map(|n| {
                json!({
                    "type": "Feature",
                    "geometry": { "type": "Point", "coordinates": [n.lon, n.lat] },
                    "properties": { "node_id": n.id.0 }
                })
            })
            .collect();
        for e in &self.edges {
            let a = &self.nodes[self.index[&e.a]];
            let b = &self.nodes[self.index[&e.b]];
            features.push(json!({
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[a.lon, a.lat], [b.lon, b.lat]]
                },
                "properties": { "edge_id": e.id.0 }
            }));
        }
        json!({ "type": "FeatureCollection", "features": features })
    }

    /// Serializes to the fixture format read by [`parse_simple_graph`].
    pub fn to_simple_text(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let _ = writeln!(out, "node {} {:.9} {:.9}", n.id, n.lat, n.lon);
        }
        for e in &self.edges {
            let _ = writeln!(out, "edge {} {}", e.a, e.b);
        }
        out
    }

    /// Serializes to minimal OSM XML with one two-node way per edge.
    pub fn to_osm_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\">\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  <node id=\"{}\" lat=\"{:.9}\" lon=\"{:.9}\"/>", n.id, n.lat, n.lon);
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  <way id=\"{}\">\n    <nd ref=\"{}\"/>\n    <nd ref=\"{}\"/>\n  </way>",
                e.id.0 + 1,
                e.a,
                e.b
            );
        }
        out.push_str("</osm>\n");
        out
    }
}

fn equirectangular(lat: f64, lon: f64, lat0: f64, lon0: f64) -> (f64, f64) {
    let x = EARTH_RADIUS_M * lat0.to_radians().cos() * (lon - lon0).to_radians();
    let y = EARTH_RADIUS_M * (lat - lat0).to_radians();
    (x, y)
}

/// Node set of the largest component among nodes that carry at least one
/// edge. Ties go to the component holding the smallest node id.
fn largest_component(
    nodes: &HashMap<NodeId, GeoNode>,
    pairs: &BTreeSet<(NodeId, NodeId)>,
) -> BTreeSet<NodeId> {
    let mut adj: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for &(a, b) in pairs {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut ids: Vec<NodeId> = adj.keys().copied().filter(|n| nodes.contains_key(n)).collect();
    ids.sort();

    let mut seen = BTreeSet::new();
    let mut best = BTreeSet::new();
    for start in ids {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(n) = queue.pop_front() {
            for &m in &adj[&n] {
                if seen.insert(m) {
                    comp.insert(m);
                    queue.push_back(m);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// Parses the `node`/`way`/`nd` subset of OSM XML.
///
/// Every consecutive node pair of a way becomes one edge. Relations and tags
/// are ignored.
pub fn parse_osm(text: &str) -> Result<MapGraph> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::Xml {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let line_of = |n: roxmltree::Node| doc.text_pos_at(n.range().start).row;

    let mut nodes = Vec::new();
    let mut ways: Vec<(u32, Vec<NodeId>)> = Vec::new();
    for el in doc.descendants().filter(|n| n.is_element()) {
        match el.tag_name().name() {
            "node" => {
                let attr = |name: &str| -> Result<&str> {
                    el.attribute(name).ok_or_else(|| Error::Xml {
                        line: line_of(el),
                        message: format!("node is missing the `{name}` attribute"),
                    })
                };
                let num = |name: &str| -> Result<f64> {
                    attr(name)?.trim().parse().map_err(|_| Error::Xml {
                        line: line_of(el),
                        message: format!("node has a non-numeric `{name}`"),
                    })
                };
                let id = attr("id")?.trim().parse::<i64>().map_err(|_| Error::Xml {
                    line: line_of(el),
                    message: "node has a non-integer `id`".into(),
                })?;
                nodes.push(GeoNode {
                    id: NodeId(id),
                    lat: num("lat")?,
                    lon: num("lon")?,
                });
            }
            "way" => {
                let mut refs = Vec::new();
                for nd in el.children().filter(|c| c.has_tag_name("nd")) {
                    let r = nd
                        .attribute("ref")
                        .and_then(|r| r.trim().parse::<i64>().ok())
                        .ok_or_else(|| Error::Xml {
                            line: line_of(nd),
                            message: "`nd` needs an integer `ref`".into(),
                        })?;
                    refs.push(NodeId(r));
                }
                ways.push((line_of(el), refs));
            }
            _ => {}
        }
    }

    let known: BTreeSet<NodeId> = nodes.iter().map(|n| n.id).collect();
    let mut pairs = Vec::new();
    for (line, refs) in &ways {
        if let Some(missing) = refs.iter().find(|r| !known.contains(r)) {
            return Err(Error::InvalidMap(format!(
                "way at line {line} references missing node {missing}"
            )));
        }
        pairs.extend(refs.windows(2).map(|w| (w[0], w[1])));
    }
    MapGraph::from_parts(nodes, &pairs)
}

/// Parses the line-oriented fixture format:
///
/// ```text
/// # comment
/// node <id> <lat> <lon>
/// edge <idA> <idB>
/// ```
pub fn parse_simple_graph(text: &str) -> Result<MapGraph> {
    let mut nodes = Vec::new();
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |message: String| Error::Syntax { line, message };
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields.as_slice() {
            ["node", id, lat, lon] => {
                let id = NodeId(id.parse().map_err(|_| syntax(format!("bad node id `{id}`")))?);
                let lat = lat.parse().map_err(|_| syntax(format!("bad latitude `{lat}`")))?;
                let lon = lon.parse().map_err(|_| syntax(format!("bad longitude `{lon}`")))?;
                if !seen.insert(id) {
                    return Err(syntax(format!("duplicate node id {id}")));
                }
                nodes.push(GeoNode { id, lat, lon });
            }
            ["edge", a, b] => {
                let a = NodeId(a.parse().map_err(|_| syntax(format!("bad node id `{a}`")))?);
                let b = NodeId(b.parse().map_err(|_| syntax(format!("bad node id `{b}`")))?);
                for n in [a, b] {
                    if !seen.contains(&n) {
                        return Err(syntax(format!("edge references unknown node {n}")));
                    }
                }
                pairs.push((a, b));
            }
            _ => return Err(syntax(format!("unrecognized line `{content}`"))),
        }
    }
    MapGraph::from_parts(nodes, &pairs)
}

/// Reads a map file, choosing the parser from the content.
pub fn parse_map(text: &str) -> Result<MapGraph> {
    if text.trim_start().starts_with('<') {
        parse_osm(text)
    } else {
        parse_simple_graph(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(text: &str) -> MapGraph {
        parse_simple_graph(text).unwrap()
    }

    const PATH3: &str = "node 1 49.0 8.4\nnode 2 49.001 8.4\nnode 3 49.002 8.4\nedge 1 2\nedge 2 3\n";
    const CYCLE4: &str = "node 1 49.0 8.4\nnode 2 49.0 8.401\nnode 3 49.001 8.401\nnode 4 49.001 8.4\n\
                          edge 1 2\nedge 2 3\nedge 3 4\nedge 4 1\n";

    #[test]
    fn minimal_way() {
        let xml = r#"<osm><node id="10" lat="49.0" lon="8.4"/><node id="11" lat="49.001" lon="8.4"/>
            <way id="1"><nd ref="10"/><nd ref="11"/></way></osm>"#;
        let g = parse_osm(xml).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges()[0].id, EdgeId(0));
        assert_eq!(g.edges()[0].endpoints(), (NodeId(10), NodeId(11)));
    }

    #[test]
    fn triangle_from_overlapping_ways_is_deduplicated() {
        let xml = r#"<osm>
            <node id="1" lat="49.0" lon="8.4"/><node id="2" lat="49.001" lon="8.4"/><node id="3" lat="49.0" lon="8.401"/>
            <way id="1"><nd ref="1"/><nd ref="2"/><nd ref="3"/></way>
            <way id="2"><nd ref="3"/><nd ref="2"/><nd ref="3"/><nd ref="1"/></way>
            <relation id="5"><member type="way" ref="1"/></relation>
        </osm>"#;
        let g = parse_osm(xml).unwrap();
        // distinct unordered pairs: {1,2}, {2,3}, {1,3}
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.node_count(), 3);
    }

    #[test]
    fn multi_node_way_is_split_and_self_loops_dropped() {
        let xml = r#"<osm>
            <node id="1" lat="49.0" lon="8.4"/><node id="2" lat="49.001" lon="8.4"/>
            <node id="3" lat="49.002" lon="8.4"/><node id="4" lat="49.003" lon="8.4"/>
            <way id="1"><nd ref="1"/><nd ref="2"/><nd ref="2"/><nd ref="3"/><nd ref="4"/></way>
        </osm>"#;
        let g = parse_osm(xml).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.degree(NodeId(2)).unwrap(), 2);
    }

    #[test]
    fn malformed_xml_reports_line() {
        let xml = "<osm>\n<node id=\"1\" lat=\"1\" lon=\"2\">\n</osm>";
        match parse_osm(xml) {
            Err(Error::Xml { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn way_with_missing_node_names_the_ref() {
        let xml = r#"<osm><node id="1" lat="49.0" lon="8.4"/><way id="1"><nd ref="1"/><nd ref="77"/></way></osm>"#;
        let err = parse_osm(xml).unwrap_err();
        assert!(err.to_string().contains("77"), "{err}");
    }

    #[test]
    fn empty_map_is_an_error() {
        assert!(parse_osm("<osm><node id=\"1\" lat=\"1\" lon=\"1\"/></osm>").is_err());
        assert!(parse_simple_graph("").is_err());
    }

    #[test]
    fn edge_ids_follow_sorted_endpoint_pairs() {
        let g = simple("node 5 0 0\nnode 2 0 0.001\nnode 9 0.001 0\nedge 9 5\nedge 5 2\nedge 2 9\n");
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.a.0, e.b.0)).collect();
        assert_eq!(pairs, vec![(2, 5), (2, 9), (5, 9)]);
    }

    #[test]
    fn only_largest_component_is_kept() {
        let g = simple(
            "node 1 0 0\nnode 2 0 0.001\nnode 3 0 0.002\nnode 8 1 1\nnode 9 1 1.001\nnode 10 2 2\n\
             edge 1 2\nedge 2 3\nedge 8 9\n",
        );
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert!(!g.contains_node(NodeId(8)));
    }

    #[test]
    fn simple_format_errors() {
        assert!(matches!(
            parse_simple_graph("node 1 0 0\nedge 1 2\n"),
            Err(Error::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_simple_graph("node 1 0 0\nnode 1 0 1\n"),
            Err(Error::Syntax { line: 2, .. })
        ));
        assert!(parse_simple_graph("node 1 95 0\nnode 2 0 0\nedge 1 2\n").is_err());
    }

    #[test]
    fn path_and_cycle_fixtures() {
        let p = simple(PATH3);
        assert_eq!((p.node_count(), p.edge_count()), (3, 2));
        let c = simple(CYCLE4);
        for id in c.node_ids() {
            assert_eq!(c.degree(id).unwrap(), 2);
        }
    }

    #[test]
    fn adjacency_of_path_and_cycle() {
        let p = simple(PATH3);
        assert!(p.edges_adjacent(EdgeId(0), EdgeId(1)).unwrap());
        assert!(p.edges_adjacent(EdgeId(1), EdgeId(1)).unwrap());

        let c = simple(CYCLE4);
        // edges: (1,2)=0, (1,4)=1, (2,3)=2, (3,4)=3; (1,2) and (3,4) are opposite
        assert!(!c.edges_adjacent(EdgeId(0), EdgeId(3)).unwrap());
        assert!(!c.edges_adjacent(EdgeId(1), EdgeId(2)).unwrap());
        assert!(c.edges_adjacent(EdgeId(0), EdgeId(1)).unwrap());
        assert!(matches!(c.edges_adjacent(EdgeId(0), EdgeId(9)), Err(Error::UnknownEdge(9))));
        assert_eq!(c.incident_edges(EdgeId(0)).unwrap(), vec![EdgeId(1), EdgeId(2)]);
    }

    #[test]
    fn projection_about_centroid() {
        let g = simple("node 1 49.0 8.4\nnode 2 49.002 8.4\nnode 3 49.001 8.4\nedge 1 3\nedge 3 2\n");
        let (x, y) = g.project_local(NodeId(3)).unwrap();
        assert!(x.abs() < 1e-9 && y.abs() < 1e-6, "{x} {y}");
        let (x2, y2) = g.project_local(NodeId(2)).unwrap();
        let expected = EARTH_RADIUS_M * 0.001f64.to_radians();
        assert!((y2 - expected).abs() < 1e-6, "{y2}");
        assert!((expected - 111.19).abs() < 0.01);
        assert!(x2.abs() < 1e-9);
        assert!(g.project_local(NodeId(42)).is_err());

        let (lat, lon) = g.unproject(x2, y2);
        assert!((lat - 49.002).abs() < 1e-12 && (lon - 8.4).abs() < 1e-12);
    }

    #[test]
    fn summary_lists_degree_histogram() {
        let s = simple(PATH3).summary();
        assert_eq!(s, "nodes\t3\nedges\t2\ndegree\tcount\n1\t2\n2\t1\n");
    }

    #[test]
    fn text_round_trips() {
        let g = simple(CYCLE4);
        let again = parse_simple_graph(&g.to_simple_text()).unwrap();
        assert_eq!(again.edges(), g.edges());
        let osm = parse_osm(&g.to_osm_xml()).unwrap();
        assert_eq!(osm.edges(), g.edges());
        assert_eq!(parse_map(&g.to_osm_xml()).unwrap().edge_count(), 4);
    }
}
