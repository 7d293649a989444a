//! Temporally consistent edge localization.
//!
//! The classifier scores every edge independently at every step, so its raw
//! argmax sequence can jump between edges that do not touch. The two
//! strategies here keep a bounded set of hypotheses, each a connected edge
//! walk with a cumulative log-likelihood `Σ_t ln p_t[e_t]`, and only ever
//! extend a walk onto its current edge or an edge sharing an endpoint with it.
//!
//! * **Strategy 1** extends every hypothesis onto all connected edges and
//!   keeps the global top `k` children. The answer is always connected.
//! * **Strategy 2** first picks the `k` most probable edges of the step and
//!   only extends hypotheses onto those. When none of them connects to any
//!   surviving hypothesis, the search fails and the surviving prefix is
//!   returned with [`LocalizationResult::failed_at`] set.
//!
//! Ties are broken towards the lexicographically smaller edge path.

use std::cmp::Ordering;

use crate::encoding::AngleBin;
use crate::error::{Error, Result};
use crate::map::{EdgeId, MapGraph};
use crate::rnn::{forward, ForwardTrace, RnnModel};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub edge_path: Vec<EdgeId>,
    pub log_likelihood: f64,
}

impl Hypothesis {
    pub fn last(&self) -> EdgeId {
        *self.edge_path.last().expect("hypotheses are never empty")
    }

    fn extend(&self, e: EdgeId, log_p: f64) -> Hypothesis {
        let mut edge_path = Vec::with_capacity(self.edge_path.len() + 1);
        edge_path.extend_from_slice(&self.edge_path);
        edge_path.push(e);
        Hypothesis {
            edge_path,
            log_likelihood: self.log_likelihood + log_p,
        }
    }
}

/// Higher likelihood first, then smaller edge path.
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.log_likelihood
        .total_cmp(&a.log_likelihood)
        .then_with(|| a.edge_path.cmp(&b.edge_path))
}

fn keep_top(mut hyps: Vec<Hypothesis>, k: usize) -> Vec<Hypothesis> {
    hyps.sort_by(rank);
    hyps.truncate(k);
    hyps
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub best: Hypothesis,
    /// Surviving hypotheses, best first.
    pub alternatives: Vec<Hypothesis>,
    /// Entropy of the classifier distribution at each step, in nats.
    pub per_step_entropy: Vec<f64>,
    /// Step at which strategy 2 lost every hypothesis.
    pub failed_at: Option<usize>,
    /// Last edge of the best hypothesis after each processed step; shorter
    /// than the input when strategy 2 failed.
    pub online: Vec<EdgeId>,
}

impl LocalizationResult {
    pub fn is_consistent(&self) -> bool {
        self.failed_at.is_none()
    }

    fn from_beam(beam: Vec<Hypothesis>, trace: &ForwardTrace, failed_at: Option<usize>, online: Vec<EdgeId>) -> Self {
        let per_step_entropy = trace
            .probs
            .outer_iter()
            .map(|p| -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>())
            .collect();
        LocalizationResult {
            best: beam[0].clone(),
            alternatives: beam,
            per_step_entropy,
            failed_at,
            online,
        }
    }
}

/// How strategy 1 seeds its hypotheses at the first step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialHypotheses {
    /// One hypothesis per map edge, none pruned before the first expansion.
    #[default]
    AllEdges,
    /// Only the `k` most probable edges of the first step.
    TopK,
}

/// Per-step argmax with no connectivity guarantee.
pub fn predict_raw(m: &RnnModel, inputs: &[AngleBin]) -> Result<Vec<EdgeId>> {
    Ok(predict_raw_trace(&forward(m, inputs)?))
}

pub fn predict_raw_trace(trace: &ForwardTrace) -> Vec<EdgeId> {
    (0..trace.len()).map(|t| trace.argmax(t)).collect()
}

/// `Σ_t ln p_t[edge_path[t]]`.
pub fn score_hypothesis(trace: &ForwardTrace, edge_path: &[EdgeId]) -> Result<f64> {
    if edge_path.len() != trace.len() {
        return Err(Error::Dimension(format!(
            "path has {} steps, trace has {}",
            edge_path.len(),
            trace.len()
        )));
    }
    if let Some(e) = edge_path.iter().find(|e| e.index() >= trace.classes()) {
        return Err(Error::UnknownEdge(e.0));
    }
    Ok(edge_path
        .iter()
        .enumerate()
        .map(|(t, &e)| trace.log_prob(t, e))
        .sum())
}

fn check_inputs(trace: &ForwardTrace, g: &MapGraph, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if trace.is_empty() {
        return Err(Error::InvalidArgument("cannot localize an empty sequence".into()));
    }
    if trace.classes() != g.edge_count() {
        return Err(Error::Dimension(format!(
            "model predicts {} classes but the map has {} edges",
            trace.classes(),
            g.edge_count()
        )));
    }
    Ok(())
}

/// For every edge: itself and every edge sharing an endpoint, ascending.
fn successors(g: &MapGraph) -> Result<Vec<Vec<EdgeId>>> {
    g.edges()
        .iter()
        .map(|e| {
            let mut s = g.incident_edges(e.id)?;
            s.push(e.id);
            s.sort();
            Ok(s)
        })
        .collect()
}

/// Edges of step `t` ordered by probability, most probable first, smallest id on ties.
fn ranked_edges(trace: &ForwardTrace, t: usize) -> Vec<EdgeId> {
    let mut edges: Vec<EdgeId> = (0..trace.classes() as u32).map(EdgeId).collect();
    edges.sort_by(|&a, &b| {
        trace
            .log_prob(t, b)
            .total_cmp(&trace.log_prob(t, a))
            .then(a.cmp(&b))
    });
    edges
}

fn seed(trace: &ForwardTrace, edges: impl IntoIterator<Item = EdgeId>) -> Vec<Hypothesis> {
    edges
        .into_iter()
        .map(|e| Hypothesis {
            edge_path: vec![e],
            log_likelihood: trace.log_prob(0, e),
        })
        .collect()
}

/// Strategy 1 on the model's own forward pass.
pub fn localize_strategy1(
    m: &RnnModel,
    g: &MapGraph,
    inputs: &[AngleBin],
    k: usize,
    init: InitialHypotheses,
) -> Result<LocalizationResult> {
    strategy1_on_trace(&forward(m, inputs)?, g, k, init)
}

/// Strategy 1: expand onto every connected edge, keep the global top `k`.
pub fn strategy1_on_trace(
    trace: &ForwardTrace,
    g: &MapGraph,
    k: usize,
    init: InitialHypotheses,
) -> Result<LocalizationResult> {
    check_inputs(trace, g, k)?;
    let succ = successors(g)?;
    let mut beam = seed(trace, g.edges().iter().map(|e| e.id));
    beam = match init {
        InitialHypotheses::AllEdges => keep_top(beam, usize::MAX),
        InitialHypotheses::TopK => keep_top(beam, k),
    };
    let mut online = vec![beam[0].last()];
    for t in 1..trace.len() {
        let children = beam
            .iter()
            .flat_map(|h| succ[h.last().index()].iter().map(move |&e| h.extend(e, trace.log_prob(t, e))))
            .collect();
        beam = keep_top(children, k);
        online.push(beam[0].last());
    }
    if init == InitialHypotheses::AllEdges && trace.len() == 1 {
        beam.truncate(k);
    }
    Ok(LocalizationResult::from_beam(beam, trace, None, online))
}

/// Strategy 2 on the model's own forward pass.
pub fn localize_strategy2(m: &RnnModel, g: &MapGraph, inputs: &[AngleBin], k: usize) -> Result<LocalizationResult> {
    strategy2_on_trace(&forward(m, inputs)?, g, k)
}

/// Strategy 2: candidates are the `k` most probable edges of each step;
/// hypotheses that cannot reach any candidate are eliminated.
pub fn strategy2_on_trace(trace: &ForwardTrace, g: &MapGraph, k: usize) -> Result<LocalizationResult> {
    check_inputs(trace, g, k)?;
    let mut beam = keep_top(seed(trace, ranked_edges(trace, 0).into_iter().take(k)), k);
    let mut online = vec![beam[0].last()];
    for t in 1..trace.len() {
        let candidates: Vec<EdgeId> = ranked_edges(trace, t).into_iter().take(k).collect();
        let mut children = Vec::new();
        for h in &beam {
            for &c in &candidates {
                if g.edges_adjacent(h.last(), c)? {
                    children.push(h.extend(c, trace.log_prob(t, c)));
                }
            }
        }
        if children.is_empty() {
            return Ok(LocalizationResult::from_beam(beam, trace, Some(t), online));
        }
        beam = keep_top(children, k);
        online.push(beam[0].last());
    }
    Ok(LocalizationResult::from_beam(beam, trace, None, online))
}

/// True when every consecutive pair of the walk shares an endpoint.
pub fn is_connected_walk(g: &MapGraph, path: &[EdgeId]) -> Result<bool> {
    for w in path.windows(2) {
        if !g.edges_adjacent(w[0], w[1])? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::parse_simple_graph;
    use ndarray::Array2;

    /// Path graph 0-1-2-...-n: edge i joins nodes i and i+1.
    fn path_graph(edges: usize) -> MapGraph {
        let mut t = String::new();
        for i in 0..=edges {
            t += &format!("node {i} 0 {}\n", i as f64 * 0.001);
        }
        for i in 0..edges {
            t += &format!("edge {i} {}\n", i + 1);
        }
        parse_simple_graph(&t).unwrap()
    }

    /// Trace whose step-t logits are `rows[t]`.
    fn trace(rows: &[Vec<f64>]) -> ForwardTrace {
        let c = rows[0].len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        ForwardTrace::from_logits(Array2::from_shape_vec((rows.len(), c), flat).unwrap())
    }

    fn confident(labels: &[u32], classes: usize) -> ForwardTrace {
        trace(
            &labels
                .iter()
                .map(|&l| (0..classes).map(|c| if c == l as usize { 30.0 } else { 0.0 }).collect())
                .collect::<Vec<_>>(),
        )
    }

    fn ids(v: &[u32]) -> Vec<EdgeId> {
        v.iter().map(|&e| EdgeId(e)).collect()
    }

    #[test]
    fn uniform_single_step_score() {
        let tr = trace(&[vec![0.0; 61]]);
        let s = score_hypothesis(&tr, &ids(&[17])).unwrap();
        assert!((s + 61f64.ln()).abs() < 1e-12);
        assert!((s + 4.1109).abs() < 1e-4);
        assert!(score_hypothesis(&tr, &ids(&[1, 2])).is_err());
    }

    #[test]
    fn certain_step_adds_nothing() {
        let tr = trace(&[vec![0.3, 1.0, -2.0], vec![0.0, 800.0, 0.0]]);
        let one = score_hypothesis(&trace(&[vec![0.3, 1.0, -2.0]]), &ids(&[1])).unwrap();
        let two = score_hypothesis(&tr, &ids(&[1, 1])).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn raw_prediction_breaks_ties_low() {
        let tr = trace(&[vec![0.0; 4], vec![1.0, 3.0, 3.0, 0.0]]);
        assert_eq!(predict_raw_trace(&tr), ids(&[0, 1]));
    }

    #[test]
    fn raw_prediction_can_jump() {
        // edges 0 and 5 of a 6-edge path do not touch
        let g = path_graph(6);
        let tr = confident(&[0, 5, 5], 6);
        let raw = predict_raw_trace(&tr);
        assert!(!is_connected_walk(&g, &raw).unwrap());
        let s1 = strategy1_on_trace(&tr, &g, 5, InitialHypotheses::AllEdges).unwrap();
        assert!(is_connected_walk(&g, &s1.best.edge_path).unwrap());
    }

    #[test]
    fn full_beam_recovers_truth() {
        let g = path_graph(6);
        let truth = [0, 0, 1, 2, 2, 3];
        let tr = confident(&truth, 6);
        let r = strategy1_on_trace(&tr, &g, 6, InitialHypotheses::AllEdges).unwrap();
        assert_eq!(r.best.edge_path, ids(&truth));
        assert_eq!(r.best, r.alternatives[0]);
        assert!(r.alternatives.windows(2).all(|w| rank(&w[0], &w[1]) != Ordering::Greater));
        let r2 = strategy2_on_trace(&tr, &g, 5, ).unwrap();
        assert_eq!(r2.best.edge_path, ids(&truth));
        assert!(r2.is_consistent());
    }

    #[test]
    fn incremental_score_matches_rescoring() {
        let g = path_graph(5);
        let tr = trace(&[
            vec![0.1, 0.5, -0.3, 0.9, 0.0],
            vec![0.7, 0.2, 0.4, -1.0, 0.3],
            vec![-0.2, 0.6, 0.1, 0.0, 0.8],
        ]);
        let r = strategy1_on_trace(&tr, &g, 3, InitialHypotheses::TopK).unwrap();
        for h in &r.alternatives {
            let s = score_hypothesis(&tr, &h.edge_path).unwrap();
            assert!((s - h.log_likelihood).abs() < 1e-9);
        }
    }

    #[test]
    fn strategy2_fails_when_truth_ranks_sixth() {
        // 12-edge path graph; the walk sits on edge 1 then moves to edge 2.
        // At step 1, edges 6..=10 outrank edge 2, which comes sixth.
        let g = path_graph(12);
        let mut s0 = vec![0.0; 12];
        s0[1] = 10.0;
        let mut s1 = vec![0.0; 12];
        for (i, e) in (6..=10).enumerate() {
            s1[e] = 9.0 - i as f64;
        }
        s1[2] = 3.0;
        let tr = trace(&[s0, s1]);
        assert_eq!(ranked_edges(&tr, 1)[5], EdgeId(2));

        let r = strategy2_on_trace(&tr, &g, 5).unwrap();
        assert_eq!(r.failed_at, Some(1));
        assert_eq!(r.best.edge_path.len(), 1);
        assert_eq!(r.online, vec![EdgeId(1)]);
        // strategy 1 does not fail on the same input
        let r1 = strategy1_on_trace(&tr, &g, 5, InitialHypotheses::AllEdges).unwrap();
        assert!(is_connected_walk(&g, &r1.best.edge_path).unwrap());
        assert_eq!(r1.best.edge_path.len(), 2);
        assert_eq!(r1.online.len(), 2);
    }

    #[test]
    fn k_equal_to_edge_count_matches_strategy1() {
        let g = path_graph(5);
        let tr = trace(&[
            vec![0.1, 0.5, -0.3, 0.9, 0.0],
            vec![0.7, 0.2, 0.4, -1.0, 0.3],
            vec![-0.2, 0.6, 0.1, 0.0, 0.8],
            vec![2.0, 0.1, 0.1, 0.0, 1.8],
        ]);
        let r2 = strategy2_on_trace(&tr, &g, 5).unwrap();
        let r1 = strategy1_on_trace(&tr, &g, 5, InitialHypotheses::TopK).unwrap();
        assert!(r2.is_consistent());
        assert_eq!(r1.alternatives, r2.alternatives);
    }

    #[test]
    fn invalid_arguments() {
        let g = path_graph(3);
        let tr = trace(&[vec![0.0; 3]]);
        assert!(strategy1_on_trace(&tr, &g, 0, InitialHypotheses::AllEdges).is_err());
        assert!(strategy2_on_trace(&tr, &g, 0).is_err());
        let wrong = trace(&[vec![0.0; 4]]);
        assert!(strategy1_on_trace(&wrong, &g, 2, InitialHypotheses::AllEdges).is_err());
    }

    #[test]
    fn single_step_all_edges_respects_k() {
        let g = path_graph(6);
        let tr = trace(&[vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]]);
        let r = strategy1_on_trace(&tr, &g, 2, InitialHypotheses::AllEdges).unwrap();
        assert_eq!(r.alternatives.len(), 2);
        assert_eq!(r.best.edge_path, ids(&[5]));
    }
}
