//! Golden-file checks for the model format and forward pass.
//!
//! Regenerate with `TRAJLOC_BLESS=1 cargo test --test golden`.

mod common;

use std::fmt::Write as _;
use std::fs;

use common::fixture;
use trajloc::dataset::Dataset;
use trajloc::encoding::{AngleBin, EncodedTrajectory};
use trajloc::map::EdgeId;
use trajloc::rnn::{forward, load_model, save_model, train, RnnModel, TrainConfig};

const SEQUENCE: [usize; 8] = [10, 10, 5, 10, 10, 14, 10, 10];

fn build() -> RnnModel {
    let rec = |bins: &[usize], labels: &[u32]| {
        EncodedTrajectory::new(
            bins.iter().map(|&b| AngleBin::new(b).unwrap()).collect(),
            labels.iter().map(|&e| EdgeId(e)).collect(),
        )
        .unwrap()
    };
    let d = Dataset::new(
        vec![
            rec(&[10, 10, 5, 10], &[0, 0, 1, 1]),
            rec(&[10, 14, 10, 10], &[2, 3, 3, 3]),
            rec(&[10, 10, 10, 14], &[0, 0, 0, 2]),
        ],
        4,
    )
    .unwrap();
    let cfg = TrainConfig {
        hidden: 6,
        embed_dim: 3,
        learning_rate: 0.1,
        epochs_multiplier: 100.0,
        seed: 21,
        ..TrainConfig::default()
    };
    train(&d, &cfg).unwrap().model
}

fn probs_text(m: &RnnModel) -> String {
    let inputs: Vec<AngleBin> = SEQUENCE.iter().map(|&b| AngleBin::new(b).unwrap()).collect();
    let tr = forward(m, &inputs).unwrap();
    let mut out = String::new();
    for row in tr.probs.outer_iter() {
        let cells: Vec<String> = row.iter().map(|p| format!("{:016x}", p.to_bits())).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}

#[test]
fn golden_model_loads_and_predicts_bit_for_bit() {
    let model_path = fixture("golden_model.bin");
    let probs_path = fixture("golden_probs.txt");
    if std::env::var_os("TRAJLOC_BLESS").is_some() {
        let m = build();
        save_model(&m, &model_path).unwrap();
        fs::write(&probs_path, probs_text(&m)).unwrap();
    }
    let m = load_model(&model_path).unwrap();
    assert_eq!((m.embed_dim(), m.hidden(), m.classes()), (3, 6, 4));
    assert_eq!(probs_text(&m), fs::read_to_string(&probs_path).unwrap());
}

#[test]
fn training_still_reproduces_the_golden_model() {
    let stored = fs::read(fixture("golden_model.bin")).unwrap();
    assert_eq!(build().to_bytes(), stored);
}

#[test]
fn golden_file_layout() {
    let bytes = fs::read(fixture("golden_model.bin")).unwrap();
    assert_eq!(&bytes[..5], b"TRNN1");
    let dims: Vec<u32> = bytes[5..21]
        .chunks(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assert_eq!(dims, vec![20, 3, 6, 4]);
    let params = 20 * 3 + 6 * 3 + 6 * 6 + 6 + 4 * 6 + 4;
    assert_eq!(bytes.len(), 21 + 8 * params);
    let first = f64::from_le_bytes(bytes[21..29].try_into().unwrap());
    assert_eq!(first, load_model(fixture("golden_model.bin")).unwrap().embed[[0, 0]]);
}
