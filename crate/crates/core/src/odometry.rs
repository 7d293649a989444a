//! Metric trajectories: a noisy traverse simulator standing in for visual
//! odometry, Douglas–Peucker segment fitting, and conversion of a fitted
//! trajectory into the classifier's angle alphabet.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::encoding::{quantize_angle, subdivision_count, turning_angle, AngleBin, AugmentedGraph, Point};
use crate::error::{Error, Result};
use crate::map::NodeId;

pub const DEFAULT_EPSILON_M: f64 = 5.0;
pub const DEFAULT_STEP_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrajectorySource {
    Simulated,
    #[default]
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTrajectory {
    points: Vec<Point>,
    pub source: TrajectorySource,
}

impl MetricTrajectory {
    pub fn new(points: Vec<Point>, source: TrajectorySource) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite point ({}, {})", p.0, p.1)));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::DegenerateGeometry(format!("points {i} and {} coincide", i + 1)));
        }
        Ok(MetricTrajectory { points, source })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total polyline length in meters.
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
            .sum()
    }

    /// One `x y` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (x, y) in &self.points {
            let _ = writeln!(out, "{x} {y}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Syntax { line: i + 1, message: format!("bad point `{line}`") })?;
            match nums.as_slice() {
                [x, y] => points.push((*x, *y)),
                _ => {
                    return Err(Error::Syntax {
                        line: i + 1,
                        message: format!("expected `x y`, got `{line}`"),
                    })
                }
            }
        }
        MetricTrajectory::new(points, TrajectorySource::External)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of each increment's heading error, degrees.
    pub heading_sigma: f64,
    /// Standard deviation of each increment's length error, as a fraction of the step.
    pub step_sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            heading_sigma: 0.0,
            step_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Walks `base_path` in increments of at most `step` meters and integrates
/// noisy increments.
///
/// Each increment of the true polyline is rotated by `N(0, heading_sigma²)`
/// degrees and stretched by `1 + N(0, step_sigma²)`; the errors accumulate
/// into the position like dead reckoning. Every base node of the path is an
/// increment boundary, so without noise the output passes exactly through
/// them.
pub fn simulate_traverse(
    ag: &AugmentedGraph,
    base_path: &[NodeId],
    noise: &NoiseModel,
    step: f64,
) -> Result<MetricTrajectory> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let negative = |s: f64| s.is_nan() || s < 0.0;
    if negative(noise.heading_sigma) || negative(noise.step_sigma) {
        return Err(Error::InvalidArgument("noise sigmas must be non-negative".into()));
    }
    if base_path.len() < 2 {
        return Err(Error::InvalidPath("a traverse needs at least 2 nodes".into()));
    }
    ag.base().path_edges(base_path)?;

    let heading = Normal::new(0.0, noise.heading_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let stretch = Normal::new(0.0, noise.step_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);

    let start = ag.position(base_path[0])?;
    let mut points = vec![start];
    let mut drift = (0.0, 0.0);
    let mut prev = start;
    for w in base_path.windows(2) {
        let a = ag.position(w[0])?;
        let b = ag.position(w[1])?;
        let n = subdivision_count((b.0 - a.0).hypot(b.1 - a.1), step);
        for j in 1..=n {
            let truth = if j == n {
                b
            } else {
                let f = j as f64 / n as f64;
                (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1))
            };
            let inc = (truth.0 - prev.0, truth.1 - prev.1);
            let dtheta = if noise.heading_sigma > 0.0 {
                heading.sample(&mut rng).to_radians()
            } else {
                0.0
            };
            let ds = if noise.step_sigma > 0.0 { stretch.sample(&mut rng) } else { 0.0 };
            if dtheta != 0.0 || ds != 0.0 {
                let (sin, cos) = dtheta.sin_cos();
                let k = 1.0 + ds;
                let pert = ((inc.0 * cos - inc.1 * sin) * k, (inc.0 * sin + inc.1 * cos) * k);
                drift.0 += pert.0 - inc.0;
                drift.1 += pert.1 - inc.1;
            }
            points.push((truth.0 + drift.0, truth.1 + drift.1));
            prev = truth;
        }
    }
    MetricTrajectory::new(points, TrajectorySource::Simulated)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (p.0 - a.0).hypot(p.1 - a.1);
    }
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    (p.0 - (a.0 + t * dx)).hypot(p.1 - (a.1 + t * dy))
}

/// Douglas–Peucker simplification.
///
/// Keeps both endpoints; while some point lies farther than `epsilon` from
/// the chord of its span, splits at the farthest one (the first on ties).
pub fn simplify_polyline(t: &MetricTrajectory, epsilon: f64) -> Result<MetricTrajectory> {
    if t.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 points, got {}", t.len())));
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let pts = t.points();
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[pts.len() - 1] = true;
    let mut stack = vec![(0, pts.len() - 1)];
    while let Some((lo, hi)) = stack.pop() {
        let mut far = (0, -1.0);
        for i in lo + 1..hi {
            let d = segment_distance(pts[i], pts[lo], pts[hi]);
            if d > far.1 {
                far = (i, d);
            }
        }
        if far.1 > epsilon {
            keep[far.0] = true;
            stack.push((far.0, hi));
            stack.push((lo, far.0));
        }
    }
    let points = pts.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
    MetricTrajectory::new(points, t.source)
}

/// Resamples every segment into `ceil(L / spacing)` equal parts and encodes
/// the turn at every interior point.
///
/// `spacing` has to match the virtual-node spacing the model was trained
/// with.
pub fn metric_to_angles(t: &MetricTrajectory, spacing: f64) -> Result<Vec<AngleBin>> {
    if !spacing.is_finite() || spacing <= 0.0 {
        return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing}")));
    }
    let length = t.length();
    if length < 2.0 * spacing {
        return Err(Error::InvalidArgument(format!(
            "trajectory of {length:.1} m is shorter than twice the {spacing} m spacing"
        )));
    }
    let pts = t.points();
    let mut resampled = vec![pts[0]];
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = subdivision_count((b.0 - a.0).hypot(b.1 - a.1), spacing);
        for j in 1..n {
            let f = j as f64 / n as f64;
            resampled.push((a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1)));
        }
        resampled.push(b);
    }
    if resampled.len() < 3 {
        return Err(Error::InvalidArgument("fewer than 3 points after resampling".into()));
    }
    resampled
        .windows(3)
        .map(|w| turning_angle(w[0], w[1], w[2]).map(quantize_angle))
        .collect()
}
