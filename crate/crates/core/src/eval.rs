//! Accuracy curves, localization tables and GeoJSON overlays.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::dataset::Dataset;
use crate::encoding::EncodedTrajectory;
use crate::error::{Error, Result};
use crate::localization::{predict_raw_trace, strategy1_on_trace, strategy2_on_trace, InitialHypotheses};
use crate::map::{EdgeId, MapGraph};
use crate::rnn::{forward, RnnModel};

/// Which estimate is scored at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Per-step argmax of the classifier.
    Raw,
    /// Best hypothesis of strategy 1 after each step.
    Strategy1,
    /// Best hypothesis of strategy 2 after each step; nothing after a failure.
    Strategy2,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Raw, Mode::Strategy1, Mode::Strategy2];

    fn color(self) -> &'static str {
        match self {
            Mode::Raw => "#e41a1c",
            Mode::Strategy1 => "#377eb8",
            Mode::Strategy2 => "#984ea3",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Raw => "raw",
            Mode::Strategy1 => "strategy1",
            Mode::Strategy2 => "strategy2",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Mode::Raw),
            "strategy1" | "s1" => Ok(Mode::Strategy1),
            "strategy2" | "s2" => Ok(Mode::Strategy2),
            _ => Err(Error::InvalidArgument(format!(
                "unknown mode {s:?} (expected raw, strategy1 or strategy2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionAccuracy {
    /// 1-based step index along the augmented path.
    pub position: usize,
    pub accuracy: f64,
    /// Trajectories long enough to have this position.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCurve {
    pub per_position: Vec<PositionAccuracy>,
    /// Accuracy at each trajectory's own final step.
    pub last_position_accuracy: f64,
}

impl AccuracyCurve {
    pub fn at(&self, position: usize) -> Option<f64> {
        self.per_position
            .iter()
            .find(|p| p.position == position)
            .map(|p| p.accuracy)
    }

    /// Tab-separated `position accuracy samples`, closed by a `last` row.
    pub fn to_text(&self) -> String {
        let mut out = String::from("position\taccuracy\tsamples\n");
        for p in &self.per_position {
            let _ = writeln!(out, "{}\t{:.6}\t{}", p.position, p.accuracy, p.samples);
        }
        let n = self.per_position.first().map_or(0, |p| p.samples);
        let _ = writeln!(out, "last\t{:.6}\t{}", self.last_position_accuracy, n);
        out
    }
}

/// Scores predictions against labels position by position.
///
/// A prediction shorter than its labels counts every missing position as
/// wrong; that is how strategy 2 is scored after it fails.
pub fn accuracy_curve(predictions: &[Vec<EdgeId>], labels: &[Vec<EdgeId>]) -> Result<AccuracyCurve> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} label sequences",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() || labels.iter().any(|l| l.is_empty()) {
        return Err(Error::InvalidArgument("accuracy needs non-empty label sequences".into()));
    }
    let longest = labels.iter().map(Vec::len).max().unwrap_or(0);
    let mut hits = vec![0usize; longest];
    let mut samples = vec![0usize; longest];
    let mut last_hits = 0;
    for (pred, lab) in predictions.iter().zip(labels) {
        if pred.len() > lab.len() {
            return Err(Error::Dimension(format!(
                "prediction of length {} for {} labels",
                pred.len(),
                lab.len()
            )));
        }
        for (t, &l) in lab.iter().enumerate() {
            samples[t] += 1;
            if pred.get(t) == Some(&l) {
                hits[t] += 1;
                if t + 1 == lab.len() {
                    last_hits += 1;
                }
            }
        }
    }
    let per_position = hits
        .iter()
        .zip(&samples)
        .enumerate()
        .map(|(t, (&h, &n))| PositionAccuracy {
            position: t + 1,
            accuracy: h as f64 / n as f64,
            samples: n,
        })
        .collect();
    Ok(AccuracyCurve {
        per_position,
        last_position_accuracy: last_hits as f64 / labels.len() as f64,
    })
}

/// Estimates of every mode for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub raw: Vec<EdgeId>,
    pub strategy1: Vec<EdgeId>,
    pub strategy2: Vec<EdgeId>,
}

impl Predictions {
    pub fn get(&self, mode: Mode) -> &[EdgeId] {
        match mode {
            Mode::Raw => &self.raw,
            Mode::Strategy1 => &self.strategy1,
            Mode::Strategy2 => &self.strategy2,
        }
    }
}

/// Step-by-step estimates of all three modes from a single forward pass.
pub fn predict_all(m: &RnnModel, g: &MapGraph, traj: &EncodedTrajectory, k: usize) -> Result<Predictions> {
    let trace = forward(m, &traj.inputs)?;
    Ok(Predictions {
        raw: predict_raw_trace(&trace),
        strategy1: strategy1_on_trace(&trace, g, k, InitialHypotheses::AllEdges)?.online,
        strategy2: strategy2_on_trace(&trace, g, k)?.online,
    })
}

fn check_classes(m: &RnnModel, g: &MapGraph, d: &Dataset) -> Result<()> {
    if m.classes() != d.num_classes || d.num_classes != g.edge_count() {
        return Err(Error::Dimension(format!(
            "model has {} classes, dataset {}, map {} edges",
            m.classes(),
            d.num_classes,
            g.edge_count()
        )));
    }
    Ok(())
}

/// Accuracy curves of every mode over a dataset.
pub fn evaluate_all(m: &RnnModel, g: &MapGraph, d: &Dataset, k: usize) -> Result<Vec<(Mode, AccuracyCurve)>> {
    check_classes(m, g, d)?;
    let preds: Vec<Predictions> = d
        .records
        .par_iter()
        .map(|r| predict_all(m, g, r, k))
        .collect::<Result<_>>()?;
    let labels: Vec<Vec<EdgeId>> = d.records.iter().map(|r| r.labels.clone()).collect();
    Mode::ALL
        .iter()
        .map(|&mode| {
            let p: Vec<Vec<EdgeId>> = preds.iter().map(|p| p.get(mode).to_vec()).collect();
            Ok((mode, accuracy_curve(&p, &labels)?))
        })
        .collect()
}

/// Accuracy curve of one mode over a dataset.
pub fn evaluate_accuracy(m: &RnnModel, g: &MapGraph, d: &Dataset, mode: Mode, k: usize) -> Result<AccuracyCurve> {
    let all = evaluate_all(m, g, d, k)?;
    Ok(all.into_iter().find(|(md, _)| *md == mode).expect("every mode is evaluated").1)
}

/// Side-by-side accuracy table with one column per mode.
pub fn accuracy_table(curves: &[(Mode, AccuracyCurve)]) -> String {
    let mut out = String::from("position");
    for (mode, _) in curves {
        let _ = write!(out, "\t{mode}");
    }
    out.push_str("\tsamples\n");
    let Some((_, first)) = curves.first() else {
        return out;
    };
    for (i, p) in first.per_position.iter().enumerate() {
        let _ = write!(out, "{}", p.position);
        for (_, c) in curves {
            let _ = write!(out, "\t{:.6}", c.per_position[i].accuracy);
        }
        let _ = writeln!(out, "\t{}", p.samples);
    }
    out.push_str("last");
    for (_, c) in curves {
        let _ = write!(out, "\t{:.6}", c.last_position_accuracy);
    }
    let _ = writeln!(out, "\t{}", first.per_position[0].samples);
    out
}

/// Per-step comparison of the three modes on one trajectory.
///
/// Columns: step, true edge, raw estimate, strategy-1 best path, strategy-2
/// best path (`-` after a failure), cumulative log-likelihood of the
/// strategy-1 path.
pub fn localization_table(m: &RnnModel, g: &MapGraph, traj: &EncodedTrajectory, k: usize) -> Result<String> {
    let trace = forward(m, &traj.inputs)?;
    let raw = predict_raw_trace(&trace);
    let s1 = strategy1_on_trace(&trace, g, k, InitialHypotheses::AllEdges)?;
    let s2 = strategy2_on_trace(&trace, g, k)?;
    let mut out = String::from("t\ttrue_edge\traw_edge\ts1_edge\ts2_edge\ts1_logp\n");
    let mut logp = 0.0;
    for (t, (&label, &raw_edge)) in traj.labels.iter().zip(&raw).enumerate() {
        let s1e = s1.best.edge_path[t];
        logp += trace.log_prob(t, s1e);
        let s2e = s2
            .best
            .edge_path
            .get(t)
            .map_or_else(|| "-".to_string(), |e| e.to_string());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{:.6}",
            t + 1,
            label,
            raw_edge,
            s1e,
            s2e,
            logp
        );
    }
    Ok(out)
}

fn collapse(path: &[EdgeId]) -> Vec<EdgeId> {
    let mut out: Vec<EdgeId> = Vec::with_capacity(path.len());
    for &e in path {
        if out.last() != Some(&e) {
            out.push(e);
        }
    }
    out
}

fn edge_lines(g: &MapGraph, path: &[EdgeId]) -> Result<Vec<Value>> {
    collapse(path)
        .into_iter()
        .map(|e| {
            let edge = g.edge(e)?;
            let a = g.node(edge.a)?;
            let b = g.node(edge.b)?;
            Ok(json!([[a.lon, a.lat], [b.lon, b.lat]]))
        })
        .collect()
}

fn layer(g: &MapGraph, name: &str, color: &str, width: u32, path: &[EdgeId]) -> Result<Value> {
    Ok(json!({
        "type": "Feature",
        "geometry": { "type": "MultiLineString", "coordinates": edge_lines(g, path)? },
        "properties": {
            "layer": name,
            "stroke": color,
            "stroke-width": width,
            "edges": collapse(path).iter().map(|e| e.0).collect::<Vec<_>>(),
        }
    }))
}

/// Overlay of the ground-truth walk and one estimate per requested mode, as
/// styled `MultiLineString` features (one segment per distinct edge visited).
pub fn export_geojson(g: &MapGraph, truth: &[EdgeId], estimates: &[(Mode, Vec<EdgeId>)]) -> Result<Value> {
    let mut features = vec![layer(g, "ground_truth", "#4daf4a", 6, truth)?];
    for (mode, path) in estimates {
        features.push(layer(g, &mode.to_string(), mode.color(), 3, path)?);
    }
    Ok(json!({ "type": "FeatureCollection", "features": features }))
}
