//! End-to-end runs driven by a flat `key = value` config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{generate_dataset_with_paths, split_holdout, Dataset, DEFAULT_MAX_PATHS, DEFAULT_NODE_COUNT};
use crate::encoding::{insert_virtual_nodes, DEFAULT_SPACING_M};
use crate::error::{Error, Result};
use crate::eval::{accuracy_table, evaluate_all, export_geojson, localization_table, predict_all, AccuracyCurve, Mode};
use crate::localization::DEFAULT_K;
use crate::map::{parse_map, MapGraph};
use crate::rnn::{save_model, train_with_progress, RnnModel, TrainConfig};

pub const DATASET_FILE: &str = "dataset.txt";
pub const MODEL_FILE: &str = "model.bin";
pub const LOSS_FILE: &str = "loss.tsv";
pub const ACCURACY_FILE: &str = "accuracy.tsv";
pub const LOCALIZATION_FILE: &str = "localization.tsv";
pub const OVERLAY_FILE: &str = "overlay.geojson";

pub const ARTIFACTS: [&str; 6] = [
    DATASET_FILE,
    MODEL_FILE,
    LOSS_FILE,
    ACCURACY_FILE,
    LOCALIZATION_FILE,
    OVERLAY_FILE,
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub map: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub spacing: f64,
    pub node_count: usize,
    pub max_paths: usize,
    /// Trajectories held out of training; the first is used for the localization artifacts.
    pub holdout: usize,
    pub k: usize,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            map: None,
            out_dir: PathBuf::from("out"),
            spacing: DEFAULT_SPACING_M,
            node_count: DEFAULT_NODE_COUNT,
            max_paths: DEFAULT_MAX_PATHS,
            holdout: 1,
            k: DEFAULT_K,
            train: TrainConfig::default(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for {key}")))
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 14] = [
        "map",
        "out_dir",
        "spacing",
        "node_count",
        "max_paths",
        "holdout",
        "k",
        "hidden",
        "embed_dim",
        "learning_rate",
        "epochs_multiplier",
        "init_scale",
        "clip_norm",
        "seed",
    ];

    /// Sets one key; `-` and `_` are interchangeable in key names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "map" => self.map = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "spacing" => self.spacing = parse_value(&key, value)?,
            "node_count" => self.node_count = parse_value(&key, value)?,
            "max_paths" => self.max_paths = parse_value(&key, value)?,
            "holdout" => self.holdout = parse_value(&key, value)?,
            "k" => self.k = parse_value(&key, value)?,
            "hidden" => self.train.hidden = parse_value(&key, value)?,
            "embed_dim" => self.train.embed_dim = parse_value(&key, value)?,
            "learning_rate" => self.train.learning_rate = parse_value(&key, value)?,
            "epochs_multiplier" => self.train.epochs_multiplier = parse_value(&key, value)?,
            "init_scale" => self.train.init_scale = parse_value(&key, value)?,
            "clip_norm" => self.train.clip_norm = parse_value(&key, value)?,
            "seed" => self.train.seed = parse_value(&key, value)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Syntax {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Syntax {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(map) = &self.map {
            let _ = writeln!(out, "map = {}", map.display());
        }
        let t = &self.train;
        let _ = writeln!(out, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(out, "spacing = {}", self.spacing);
        let _ = writeln!(out, "node_count = {}", self.node_count);
        let _ = writeln!(out, "max_paths = {}", self.max_paths);
        let _ = writeln!(out, "holdout = {}", self.holdout);
        let _ = writeln!(out, "k = {}", self.k);
        let _ = writeln!(out, "hidden = {}", t.hidden);
        let _ = writeln!(out, "embed_dim = {}", t.embed_dim);
        let _ = writeln!(out, "learning_rate = {}", t.learning_rate);
        let _ = writeln!(out, "epochs_multiplier = {}", t.epochs_multiplier);
        let _ = writeln!(out, "init_scale = {}", t.init_scale);
        let _ = writeln!(out, "clip_norm = {}", t.clip_norm);
        let _ = writeln!(out, "seed = {}", t.seed);
        out
    }
}

#[derive(Debug)]
pub struct PipelineReport {
    pub map: MapGraph,
    pub dataset: Dataset,
    pub train_set: Dataset,
    pub model: RnnModel,
    pub loss_curve: Vec<f64>,
    pub curves: Vec<(Mode, AccuracyCurve)>,
}

impl PipelineReport {
    /// Mean loss over the final `fraction` of iterations.
    pub fn tail_loss(&self, fraction: f64) -> f64 {
        tail_mean(&self.loss_curve, fraction)
    }
}

pub fn tail_mean(values: &[f64], fraction: f64) -> f64 {
    let n = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len().max(1));
    let tail = &values[values.len().saturating_sub(n)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

pub fn loss_text(loss: &[f64]) -> String {
    let mut out = String::from("iteration\tloss\n");
    for (i, l) in loss.iter().enumerate() {
        let _ = writeln!(out, "{}\t{l}", i + 1);
    }
    out
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(dir.join(name), contents).map_err(Error::from)
}

/// Runs every stage and writes the artifacts listed in [`ARTIFACTS`] to `out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    let map_path = cfg
        .map
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("no map given (set --map or the `map` key)".into()))?;
    let text = fs::read_to_string(map_path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read --map {}: {e}", map_path.display())).in_stage("ingest"))?;
    let map = parse_map(&text).map_err(|e| e.in_stage("ingest"))?;
    let ag = insert_virtual_nodes(&map, cfg.spacing).map_err(|e| e.in_stage("augment"))?;
    let (dataset, _) =
        generate_dataset_with_paths(&ag, cfg.node_count, cfg.max_paths).map_err(|e| e.in_stage("gen-data"))?;
    let (train_set, held_out) = split_holdout(&dataset, cfg.holdout, cfg.train.seed).map_err(|e| e.in_stage("gen-data"))?;
    log::info!(
        "{} nodes, {} edges, {} trajectories ({} held out)",
        map.node_count(),
        map.edge_count(),
        dataset.len(),
        held_out.len()
    );

    let outcome = train_with_progress(&train_set, &cfg.train, |_, _| {}).map_err(|e| e.in_stage("train"))?;
    let curves = evaluate_all(&outcome.model, &map, &train_set, cfg.k).map_err(|e| e.in_stage("eval"))?;

    let sample = held_out.records.first().unwrap_or(&train_set.records[0]);
    let table = localization_table(&outcome.model, &map, sample, cfg.k).map_err(|e| e.in_stage("localize"))?;
    let preds = predict_all(&outcome.model, &map, sample, cfg.k).map_err(|e| e.in_stage("localize"))?;
    let estimates: Vec<(Mode, Vec<_>)> = Mode::ALL.iter().map(|&m| (m, preds.get(m).to_vec())).collect();
    let overlay = export_geojson(&map, &sample.labels, &estimates).map_err(|e| e.in_stage("export"))?;

    let dir = &cfg.out_dir;
    let io = |e: Error| e.in_stage("export");
    fs::create_dir_all(dir).map_err(|e| io(e.into()))?;
    write(dir, DATASET_FILE, dataset.to_text()).map_err(io)?;
    save_model(&outcome.model, dir.join(MODEL_FILE)).map_err(io)?;
    write(dir, LOSS_FILE, loss_text(&outcome.loss_curve)).map_err(io)?;
    write(dir, ACCURACY_FILE, accuracy_table(&curves)).map_err(io)?;
    write(dir, LOCALIZATION_FILE, table).map_err(io)?;
    let overlay = serde_json::to_string_pretty(&overlay).expect("JSON values serialize");
    write(dir, OVERLAY_FILE, overlay).map_err(io)?;

    Ok(PipelineReport {
        map,
        dataset,
        train_set,
        model: outcome.model,
        loss_curve: outcome.loss_curve,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trips() {
        let mut cfg = PipelineConfig::default();
        cfg.set("map", "maps/town.osm").unwrap();
        cfg.set("learning-rate", "0.05").unwrap();
        cfg.set("seed", "9").unwrap();
        assert_eq!(PipelineConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn config_reports_the_offending_line() {
        let err = PipelineConfig::from_text("# comment\nhidden = 8\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 3, .. }), "{err}");
        let err = PipelineConfig::from_text("hidden 8\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, .. }));
        assert!(PipelineConfig::from_text("k = many").is_err());
    }

    #[test]
    fn every_key_is_settable() {
        for key in PipelineConfig::KEYS {
            let value = match key {
                "map" | "out_dir" => "x",
                _ => "1",
            };
            PipelineConfig::default().set(key, value).unwrap();
        }
    }

    #[test]
    fn tail_mean_covers_the_requested_fraction() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(tail_mean(&v, 0.05), 20.0);
        assert_eq!(tail_mean(&v, 0.1), 19.5);
        assert_eq!(tail_mean(&[3.0], 0.05), 3.0);
    }

    #[test]
    fn missing_map_names_the_flag() {
        let err = run_pipeline(&PipelineConfig::default()).unwrap_err();
        assert!(err.to_string().contains("--map"));
    }
}
