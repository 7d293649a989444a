use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trajloc::dataset::{enumerate_simple_paths, generate_dataset_with_paths, Dataset, DEFAULT_MAX_PATHS, DEFAULT_NODE_COUNT};
use trajloc::encoding::{insert_virtual_nodes, AngleBin, EncodedTrajectory, DEFAULT_SPACING_M};
use trajloc::eval::{accuracy_table, evaluate_all, export_geojson, localization_table, predict_all, Mode};
use trajloc::localization::{localize_strategy1, localize_strategy2, predict_raw, InitialHypotheses, DEFAULT_K};
use trajloc::map::{parse_map, MapGraph, NodeId};
use trajloc::odometry::{
    metric_to_angles, simplify_polyline, simulate_traverse, MetricTrajectory, NoiseModel, DEFAULT_EPSILON_M,
    DEFAULT_STEP_M,
};
use trajloc::pipeline::{loss_text, run_pipeline, PipelineConfig};
use trajloc::rnn::{load_model, save_model, train_with_progress, RnnModel, TrainConfig};
use trajloc::{Error, Result};

#[derive(Parser)]
#[command(name = "trajloc", version, about = "Localize a trajectory on a road map from its turns alone")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for written artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MapArg {
    /// Road map, OSM XML or the `node`/`edge` text format.
    #[arg(long)]
    map: PathBuf,
}

#[derive(Args)]
struct SpacingArg {
    /// Virtual-node spacing in meters.
    #[arg(long, default_value_t = DEFAULT_SPACING_M)]
    spacing: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long, default_value_t = 32)]
    embed_dim: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    /// Iterations as a multiple of the record count.
    #[arg(long, default_value_t = 6.0)]
    epochs_multiplier: f64,
    #[arg(long, default_value_t = 0.08)]
    init_scale: f64,
    #[arg(long, default_value_t = 5.0)]
    clip_norm: f64,
}

impl TrainArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden,
            embed_dim: self.embed_dim,
            learning_rate: self.learning_rate,
            epochs_multiplier: self.epochs_multiplier,
            seed,
            init_scale: self.init_scale,
            clip_norm: self.clip_norm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Raw,
    S1,
    S2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    All,
    Topk,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapFormat {
    Summary,
    Text,
    Geojson,
    Osm,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a map and write it in the requested format.
    Ingest {
        #[command(flatten)]
        map: MapArg,
        #[arg(long, value_enum, default_value_t = MapFormat::Summary)]
        format: MapFormat,
    },
    /// Report the graph after virtual-node insertion.
    Augment {
        #[command(flatten)]
        map: MapArg,
        #[command(flatten)]
        spacing: SpacingArg,
    },
    /// Enumerate paths and write the encoded dataset.
    GenData {
        #[command(flatten)]
        map: MapArg,
        #[command(flatten)]
        spacing: SpacingArg,
        #[arg(long, default_value_t = DEFAULT_NODE_COUNT)]
        node_count: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
        max_paths: usize,
    },
    /// Train a model on a dataset file.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Localize one trajectory.
    Localize {
        #[command(flatten)]
        map: MapArg,
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated angle bins.
        #[arg(long, conflicts_with = "trajectory", required_unless_present = "trajectory")]
        inputs: Option<String>,
        /// Metric trajectory, one `x y` point per line.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        spacing: SpacingArg,
        #[arg(long, default_value_t = DEFAULT_EPSILON_M)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = Strategy::S1)]
        strategy: Strategy,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Init::All)]
        init: Init,
    },
    /// Drive along a map path and write a noisy metric trajectory.
    Simulate {
        #[command(flatten)]
        map: MapArg,
        /// Comma-separated node ids; a random path is drawn when omitted.
        #[arg(long)]
        path: Option<String>,
        #[arg(long, default_value_t = DEFAULT_NODE_COUNT)]
        node_count: usize,
        /// Heading noise per increment, degrees.
        #[arg(long, default_value_t = 0.0)]
        heading_sigma: f64,
        /// Relative length noise per increment.
        #[arg(long, default_value_t = 0.0)]
        step_sigma: f64,
        #[arg(long, default_value_t = DEFAULT_STEP_M)]
        step: f64,
    },
    /// Accuracy per position for every mode.
    Eval {
        #[command(flatten)]
        map: MapArg,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
    /// Write the GeoJSON overlay and step table for one dataset record.
    Export {
        #[command(flatten)]
        map: MapArg,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
    /// Every stage from map to overlay, configured by a key = value file.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long)]
        node_count: Option<usize>,
        #[arg(long)]
        max_paths: Option<usize>,
        #[arg(long)]
        holdout: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        embed_dim: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        epochs_multiplier: Option<f64>,
        #[arg(long)]
        init_scale: Option<f64>,
        #[arg(long)]
        clip_norm: Option<f64>,
    },
}

fn read(path: &Path, flag: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {flag} {}: {e}", path.display())))
}

fn load_map(arg: &MapArg) -> Result<MapGraph> {
    parse_map(&read(&arg.map, "--map")?)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_text(&read(path, "--dataset")?)
}

fn open_model(path: &Path) -> Result<RnnModel> {
    if !path.exists() {
        return Err(Error::InvalidArgument(format!("cannot read --model {}", path.display())));
    }
    load_model(path)
}

fn write_out(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn parse_list<T>(s: &str, flag: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| f(x.trim()).ok_or_else(|| Error::InvalidArgument(format!("bad {flag} element {x:?}"))))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let out = &cli.out_dir;
    match cli.command {
        Command::Ingest { map, format } => {
            let g = load_map(&map)?;
            match format {
                MapFormat::Summary => print!("{}", g.summary()),
                MapFormat::Text => print!("{}", g.to_simple_text()),
                MapFormat::Osm => print!("{}", g.to_osm_xml()),
                MapFormat::Geojson => {
                    let p = write_out(out, "map.geojson", serde_json::to_string_pretty(&g.to_geojson()).unwrap())?;
                    println!("wrote {}", p.display());
                }
            }
        }
        Command::Augment { map, spacing } => {
            let g = load_map(&map)?;
            let ag = insert_virtual_nodes(&g, spacing.spacing)?;
            println!("base_nodes\t{}", g.node_count());
            println!("base_edges\t{}", g.edge_count());
            println!("virtual_nodes\t{}", ag.virtual_count());
            println!("sub_edges\t{}", ag.sub_edge_count());
        }
        Command::GenData {
            map,
            spacing,
            node_count,
            max_paths,
        } => {
            let g = load_map(&map)?;
            let ag = insert_virtual_nodes(&g, spacing.spacing)?;
            let (d, _) = generate_dataset_with_paths(&ag, node_count, max_paths)?;
            let p = write_out(out, "dataset.txt", d.to_text())?;
            println!("{} trajectories, {} classes -> {}", d.len(), d.num_classes, p.display());
        }
        Command::Train { dataset, train } => {
            let d = load_dataset(&dataset)?;
            let cfg = train.config(cli.seed);
            let total = (cfg.epochs_multiplier * d.len() as f64).round() as usize;
            let outcome = train_with_progress(&d, &cfg, |i, loss| {
                if total >= 20 && (i + 1) % (total / 20) == 0 {
                    log::info!("iteration {}/{total}: loss {loss:.4}", i + 1);
                }
            })?;
            fs::create_dir_all(out)?;
            save_model(&outcome.model, out.join("model.bin"))?;
            write_out(out, "loss.tsv", loss_text(&outcome.loss_curve))?;
            println!(
                "trained {} iterations -> {}",
                outcome.loss_curve.len(),
                out.join("model.bin").display()
            );
        }
        Command::Localize {
            map,
            model,
            inputs,
            trajectory,
            spacing,
            epsilon,
            strategy,
            k,
            init,
        } => {
            let g = load_map(&map)?;
            let m = open_model(&model)?;
            let bins: Vec<AngleBin> = match (inputs, trajectory) {
                (Some(s), _) => {
                    let raw = parse_list(&s, "--inputs", |x| x.parse::<usize>().ok())?;
                    raw.into_iter().map(AngleBin::new).collect::<Result<_>>()?
                }
                (None, Some(p)) => {
                    let t = MetricTrajectory::from_text(&read(&p, "--trajectory")?)?;
                    metric_to_angles(&simplify_polyline(&t, epsilon)?, spacing.spacing)?
                }
                (None, None) => unreachable!("clap requires one of --inputs/--trajectory"),
            };
            let init = match init {
                Init::All => InitialHypotheses::AllEdges,
                Init::Topk => InitialHypotheses::TopK,
            };
            match strategy {
                Strategy::Raw => {
                    let p = predict_raw(&m, &bins)?;
                    println!("{}", p.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","));
                }
                Strategy::S1 | Strategy::S2 => {
                    let r = match strategy {
                        Strategy::S1 => localize_strategy1(&m, &g, &bins, k, init)?,
                        _ => localize_strategy2(&m, &g, &bins, k)?,
                    };
                    for h in &r.alternatives {
                        let path: Vec<String> = h.edge_path.iter().map(|e| e.to_string()).collect();
                        println!("{:.6}\t{}", h.log_likelihood, path.join(","));
                    }
                    if let Some(t) = r.failed_at {
                        eprintln!("no hypothesis survived step {}", t + 1);
                    }
                }
            }
        }
        Command::Simulate {
            map,
            path,
            node_count,
            heading_sigma,
            step_sigma,
            step,
        } => {
            let g = load_map(&map)?;
            let ag = insert_virtual_nodes(&g, DEFAULT_SPACING_M)?;
            let nodes: Vec<NodeId> = match path {
                Some(s) => parse_list(&s, "--path", |x| x.parse::<i64>().ok().map(NodeId))?,
                None => random_path(&g, node_count, cli.seed)?,
            };
            let noise = NoiseModel {
                heading_sigma,
                step_sigma,
                seed: cli.seed,
            };
            let t = simulate_traverse(&ag, &nodes, &noise, step)?;
            let p = write_out(out, "trajectory.txt", t.to_text())?;
            let ids: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
            println!("path {} -> {}", ids.join(","), p.display());
        }
        Command::Eval { map, model, dataset, k } => {
            let g = load_map(&map)?;
            let m = open_model(&model)?;
            let d = load_dataset(&dataset)?;
            let table = accuracy_table(&evaluate_all(&m, &g, &d, k)?);
            write_out(out, "accuracy.tsv", &table)?;
            print!("{table}");
        }
        Command::Export {
            map,
            model,
            dataset,
            index,
            k,
        } => {
            let g = load_map(&map)?;
            let m = open_model(&model)?;
            let d = load_dataset(&dataset)?;
            let rec: &EncodedTrajectory = d
                .records
                .get(index)
                .ok_or_else(|| Error::InvalidArgument(format!("--index {index} out of range ({} records)", d.len())))?;
            let preds = predict_all(&m, &g, rec, k)?;
            let est: Vec<_> = Mode::ALL.iter().map(|&md| (md, preds.get(md).to_vec())).collect();
            let doc = export_geojson(&g, &rec.labels, &est)?;
            write_out(out, "overlay.geojson", serde_json::to_string_pretty(&doc).unwrap())?;
            let table = localization_table(&m, &g, rec, k)?;
            write_out(out, "localization.tsv", &table)?;
            print!("{table}");
        }
        Command::Run {
            config,
            map,
            spacing,
            node_count,
            max_paths,
            holdout,
            k,
            hidden,
            embed_dim,
            learning_rate,
            epochs_multiplier,
            init_scale,
            clip_norm,
        } => {
            let mut cfg = PipelineConfig::default();
            if let Some(p) = &config {
                cfg.apply_text(&read(p, "--config")?)?;
            }
            // flags override the file
            let flags: [(&str, Option<String>); 13] = [
                ("map", map.map(|p| p.display().to_string())),
                ("spacing", spacing.map(|v| v.to_string())),
                ("node_count", node_count.map(|v| v.to_string())),
                ("max_paths", max_paths.map(|v| v.to_string())),
                ("holdout", holdout.map(|v| v.to_string())),
                ("k", k.map(|v| v.to_string())),
                ("hidden", hidden.map(|v| v.to_string())),
                ("embed_dim", embed_dim.map(|v| v.to_string())),
                ("learning_rate", learning_rate.map(|v| v.to_string())),
                ("epochs_multiplier", epochs_multiplier.map(|v| v.to_string())),
                ("init_scale", init_scale.map(|v| v.to_string())),
                ("clip_norm", clip_norm.map(|v| v.to_string())),
                ("seed", Some(cli.seed.to_string())),
            ];
            for (key, value) in flags {
                if let Some(v) = value {
                    cfg.set(key, &v)?;
                }
            }
            cfg.out_dir = out.clone();
            let report = run_pipeline(&cfg)?;
            println!(
                "{} trajectories, final loss {:.4}, artifacts in {}",
                report.dataset.len(),
                report.tail_loss(0.05),
                out.display()
            );
        }
    }
    Ok(())
}

fn random_path(g: &MapGraph, node_count: usize, seed: u64) -> Result<Vec<NodeId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources: Vec<NodeId> = g.node_ids().collect();
    while !sources.is_empty() {
        let s = sources.swap_remove(rng.random_range(0..sources.len()));
        let paths = enumerate_simple_paths(g, s, node_count)?;
        if !paths.is_empty() {
            return Ok(paths[rng.random_range(0..paths.len())].clone());
        }
    }
    Err(Error::InvalidArgument(format!("the map has no simple path of {node_count} nodes")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
