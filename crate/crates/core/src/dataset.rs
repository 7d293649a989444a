//! Training corpus: every fixed-length simple path of the base graph,
//! encoded through the augmented graph.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoding::{encode_path, AugmentedGraph, EncodedTrajectory, ALPHABET_SIZE};
use crate::error::{Error, Result};
use crate::map::{MapGraph, NodeId};

pub const DEFAULT_NODE_COUNT: usize = 10;
pub const DEFAULT_MAX_PATHS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<EncodedTrajectory>,
    pub num_classes: usize,
    pub alphabet_size: usize,
}

impl Dataset {
    pub fn new(records: Vec<EncodedTrajectory>, num_classes: usize) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if let Some(l) = r.labels.iter().find(|l| l.index() >= num_classes) {
                return Err(Error::InvalidArgument(format!(
                    "record {i} has label {l} but there are only {num_classes} classes"
                )));
            }
            if r.is_empty() {
                return Err(Error::InvalidArgument(format!("record {i} is empty")));
            }
        }
        Ok(Dataset {
            records,
            num_classes,
            alphabet_size: ALPHABET_SIZE,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Header line `classes=<E> alphabet=20`, then one record per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("classes={} alphabet={}\n", self.num_classes, self.alphabet_size);
        for r in &self.records {
            let _ = writeln!(out, "{r}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Syntax { line: 1, message: "empty dataset file".into() })?;
        let mut classes = None;
        let mut alphabet = None;
        for kv in header.split_whitespace() {
            match kv.split_once('=') {
                Some(("classes", v)) => classes = v.parse::<usize>().ok(),
                Some(("alphabet", v)) => alphabet = v.parse::<usize>().ok(),
                _ => {}
            }
        }
        let (Some(classes), Some(alphabet)) = (classes, alphabet) else {
            return Err(Error::Syntax {
                line: 1,
                message: format!("bad header `{header}`"),
            });
        };
        if alphabet != ALPHABET_SIZE {
            return Err(Error::Syntax {
                line: 1,
                message: format!("alphabet must be {ALPHABET_SIZE}, got {alphabet}"),
            });
        }
        let records = lines
            .map(|(i, l)| {
                l.parse::<EncodedTrajectory>().map_err(|e| Error::Syntax {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(records, classes)
    }
}

/// All simple paths of exactly `node_count` nodes starting at `source`.
///
/// Neighbours are explored in ascending id order, so the output order is
/// deterministic. Fails once more than [`DEFAULT_MAX_PATHS`] paths are found.
pub fn enumerate_simple_paths(g: &MapGraph, source: NodeId, node_count: usize) -> Result<Vec<Vec<NodeId>>> {
    enumerate_simple_paths_capped(g, source, node_count, DEFAULT_MAX_PATHS)
}

pub fn enumerate_simple_paths_capped(
    g: &MapGraph,
    source: NodeId,
    node_count: usize,
    max_paths: usize,
) -> Result<Vec<Vec<NodeId>>> {
    if node_count < 2 {
        return Err(Error::InvalidArgument(format!("node_count must be at least 2, got {node_count}")));
    }
    g.node(source)?;

    let mut out = Vec::new();
    let mut path = vec![source];
    let mut on_path: HashSet<NodeId> = HashSet::from([source]);
    // one cursor into each path node's neighbour list
    let mut cursors = vec![0usize];

    while let Some(cursor) = cursors.last_mut() {
        let tip = *path.last().expect("path and cursors have equal length");
        let neighbors = g.neighbors(tip)?;
        if path.len() == node_count || *cursor >= neighbors.len() {
            if path.len() == node_count {
                if out.len() == max_paths {
                    return Err(Error::TooManyPaths { limit: max_paths });
                }
                out.push(path.clone());
            }
            cursors.pop();
            on_path.remove(&path.pop().expect("non-empty"));
            continue;
        }
        let (next, _) = neighbors[*cursor];
        *cursor += 1;
        if on_path.insert(next) {
            path.push(next);
            cursors.push(0);
        }
    }
    Ok(out)
}

/// Generates the corpus and also returns the base-node path behind each record.
pub fn generate_dataset_with_paths(
    ag: &AugmentedGraph,
    node_count: usize,
    max_paths: usize,
) -> Result<(Dataset, Vec<Vec<NodeId>>)> {
    let g = ag.base();
    if node_count > g.node_count() {
        return Err(Error::InvalidArgument(format!(
            "node_count {node_count} exceeds the {} nodes of the map",
            g.node_count()
        )));
    }
    let sources: Vec<NodeId> = g.node_ids().collect();
    let per_source = sources
        .par_iter()
        .map(|&s| {
            enumerate_simple_paths_capped(g, s, node_count, max_paths)?
                .into_iter()
                .map(|p| {
                    let aug = ag.expand_base_path(&p)?;
                    Ok((encode_path(ag, &aug)?, p))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let total: usize = per_source.iter().map(Vec::len).sum();
    if total > max_paths {
        return Err(Error::TooManyPaths { limit: max_paths });
    }
    if total == 0 {
        return Err(Error::InvalidArgument(format!(
            "the map has no simple path of {node_count} nodes"
        )));
    }

    let mut seen = HashSet::with_capacity(total);
    let mut records = Vec::with_capacity(total);
    let mut paths = Vec::with_capacity(total);
    for (rec, p) in per_source.into_iter().flatten() {
        if seen.insert(rec.clone()) {
            records.push(rec);
            paths.push(p);
        }
    }
    Ok((Dataset::new(records, g.edge_count())?, paths))
}

/// Corpus of every `node_count`-node simple path from every source node.
pub fn generate_dataset(ag: &AugmentedGraph, node_count: usize) -> Result<Dataset> {
    generate_dataset_with_paths(ag, node_count, DEFAULT_MAX_PATHS).map(|(d, _)| d)
}

/// Splits off `n` records chosen uniformly at random as a test set.
///
/// Both halves keep the original record order.
pub fn split_holdout(d: &Dataset, n: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if n >= d.len() {
        return Err(Error::InvalidArgument(format!(
            "holdout of {n} needs fewer than the {} available records",
            d.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: HashSet<usize> = rand::seq::index::sample(&mut rng, d.len(), n).into_iter().collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, r) in d.records.iter().enumerate() {
        if picked.contains(&i) {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    let mk = |records| Dataset {
        records,
        num_classes: d.num_classes,
        alphabet_size: d.alphabet_size,
    };
    Ok((mk(train), mk(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::insert_virtual_nodes;
    use crate::map::parse_simple_graph;

    fn ids(v: &[i64]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn cycle4() -> MapGraph {
        parse_simple_graph(
            "node 1 0 0\nnode 2 0 0.001\nnode 3 0.001 0.001\nnode 4 0.001 0\n\
             edge 1 2\nedge 2 3\nedge 3 4\nedge 4 1\n",
        )
        .unwrap()
    }

    fn complete(n: i64) -> MapGraph {
        let mut t = String::new();
        for i in 0..n {
            let a = i as f64 * std::f64::consts::TAU / n as f64;
            t += &format!("node {i} {} {}\n", 0.001 * a.sin(), 0.001 * a.cos());
        }
        for i in 0..n {
            for j in i + 1..n {
                t += &format!("edge {i} {j}\n");
            }
        }
        parse_simple_graph(&t).unwrap()
    }

    #[test]
    fn unique_path_in_path_graph() {
        let g = parse_simple_graph("node 1 0 0\nnode 2 0 0.001\nnode 3 0 0.002\nedge 1 2\nedge 2 3\n").unwrap();
        assert_eq!(enumerate_simple_paths(&g, NodeId(1), 3).unwrap(), vec![ids(&[1, 2, 3])]);
    }

    #[test]
    fn cycle_has_two_directions() {
        let paths = enumerate_simple_paths(&cycle4(), NodeId(1), 4).unwrap();
        assert_eq!(paths, vec![ids(&[1, 2, 3, 4]), ids(&[1, 4, 3, 2])]);
    }

    #[test]
    fn complete_graph_counts_factorial() {
        let paths = enumerate_simple_paths(&complete(5), NodeId(0), 5).unwrap();
        assert_eq!(paths.len(), 24);
    }

    #[test]
    fn enumeration_errors() {
        let g = cycle4();
        assert!(matches!(enumerate_simple_paths(&g, NodeId(99), 3), Err(Error::UnknownNode(99))));
        assert!(enumerate_simple_paths(&g, NodeId(1), 1).is_err());
        assert!(matches!(
            enumerate_simple_paths_capped(&complete(6), NodeId(0), 6, 10),
            Err(Error::TooManyPaths { limit: 10 })
        ));
    }

    #[test]
    fn cycle_dataset_has_eight_records() {
        let ag = insert_virtual_nodes(&cycle4(), 30.0).unwrap();
        let d = generate_dataset(&ag, 3).unwrap();
        assert_eq!(d.len(), 8);
        assert_eq!(d.num_classes, 4);
        for r in &d.records {
            for w in r.labels.windows(2) {
                assert!(ag.base().edges_adjacent(w[0], w[1]).unwrap());
            }
        }
    }

    #[test]
    fn node_count_above_map_size_names_limit() {
        let ag = insert_virtual_nodes(&cycle4(), 30.0).unwrap();
        let err = generate_dataset(&ag, 5).unwrap_err();
        assert!(err.to_string().contains('4'), "{err}");
    }

    #[test]
    fn text_format_round_trip() {
        let ag = insert_virtual_nodes(&cycle4(), 30.0).unwrap();
        let d = generate_dataset(&ag, 3).unwrap();
        let text = d.to_text();
        assert!(text.starts_with("classes=4 alphabet=20\n"));
        assert_eq!(Dataset::from_text(&text).unwrap(), d);
        assert!(Dataset::from_text("classes=2 alphabet=20\n1|5\n").is_err());
    }

    #[test]
    fn holdout_split() {
        let ag = insert_virtual_nodes(&cycle4(), 30.0).unwrap();
        let d = generate_dataset(&ag, 3).unwrap();
        let (train, test) = split_holdout(&d, 1, 3).unwrap();
        assert_eq!((train.len(), test.len()), (7, 1));
        let (train0, test0) = split_holdout(&d, 0, 3).unwrap();
        assert_eq!(train0, d);
        assert!(test0.is_empty());
        assert_eq!(split_holdout(&d, 3, 9).unwrap(), split_holdout(&d, 3, 9).unwrap());
        let (a, b) = split_holdout(&d, 3, 9).unwrap();
        let mut all: Vec<_> = a.records.iter().chain(&b.records).cloned().collect();
        let mut orig = d.records.clone();
        all.sort_by_key(|r| r.to_string());
        orig.sort_by_key(|r| r.to_string());
        assert_eq!(all, orig);
        assert!(split_holdout(&d, 8, 0).is_err());
    }
}
