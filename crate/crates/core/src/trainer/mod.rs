//! Dataset ingestion, the Adam training loop, checkpoints and ablations.

mod adam;
pub mod checkpoint;
mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{Adam, BETA1, BETA2, EPSILON};
pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint};
pub use config::FusionConfig;

use crate::error::{FusionError, Result};
use crate::fuser::network_on_tape;
use crate::imaging::{self, Image, PatchSet};
use crate::losses::{loss_on_tape, LossReport};
use crate::nn::Tape;
pub use crate::params::{Ablation, ModelParams};

/// Overrides the dataset root passed on the command line.
pub const DATA_ROOT_ENV: &str = "LE2FUSION_DATA_ROOT";

pub fn init_params(config: &FusionConfig, seed: u64) -> ModelParams {
    ModelParams::init(config.ablation, seed)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<LossReport>,
}

/// Number of optimizer steps a run over `n` pairs will take.
pub fn planned_steps(n: usize, config: &FusionConfig) -> usize {
    let n = config.subset.map_or(n, |s| s.min(n));
    let per_epoch = n.div_ceil(config.batch_size);
    let total = per_epoch * config.epochs;
    config.max_steps.map_or(total, |m| m.min(total))
}

/// Trains from a fresh seeded initialization.
pub fn train(dataset: &PatchSet, config: &FusionConfig) -> Result<TrainOutcome> {
    train_from(init_params(config, config.seed), dataset, config, |_, _| {})
}

/// Continues training `params`; `observe` sees `(step, report)` after every step.
pub fn train_from(
    mut params: ModelParams,
    dataset: &PatchSet,
    config: &FusionConfig,
    mut observe: impl FnMut(usize, &LossReport),
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(FusionError::EmptySet("training set has no patches".into()));
    }
    if params.ablation() != config.ablation.architecture() {
        return Err(FusionError::Fingerprint {
            expected: ModelParams::expected_fingerprint(config.ablation),
            found: params.fingerprint(),
        });
    }
    let n = config.subset.map_or(dataset.len(), |s| s.min(dataset.len()));
    let weights = config.effective_loss_weights();
    let max_steps = planned_steps(dataset.len(), config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x7261_696e));
    let mut adam = Adam::new();
    let mut history = Vec::with_capacity(max_steps);
    let mut order: Vec<usize> = (0..n).collect();

    'epochs: for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            if history.len() >= max_steps {
                break 'epochs;
            }
            let (ir, vi) = dataset.batch(chunk)?;
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape, true);
            let ir_v = tape.constant(ir.clone());
            let vi_v = tape.constant(vi.clone());
            let net = network_on_tape(&mut tape, ir_v, vi_v, vi_v, &bound)?;
            let loss = loss_on_tape(&mut tape, net.output, &ir, &vi, &weights)?;
            let report = loss.report(&tape);
            if !report.total.is_finite() {
                return Err(FusionError::Divergence {
                    step: history.len(),
                    loss: report.total,
                });
            }
            let grads = tape.backward(loss.total);
            adam.update(&mut params, &bound, &grads, lr);
            observe(history.len(), &report);
            history.push(report);
        }
    }
    Ok(TrainOutcome { params, history })
}

pub fn write_loss_csv(history: &[LossReport], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| FusionError::io(path, e))?;
    let mut text = String::from(LossReport::CSV_HEADER);
    text.push('\n');
    for (step, r) in history.iter().enumerate() {
        text.push_str(&r.csv_row(step));
        text.push('\n');
    }
    f.write_all(text.as_bytes()).map_err(|e| FusionError::io(path, e))
}

/// Dataset root: the environment override if set, else `given`.
pub fn resolve_data_root(given: Option<&Path>) -> Result<PathBuf> {
    if let Some(v) = std::env::var_os(DATA_ROOT_ENV).filter(|v| !v.is_empty()) {
        return Ok(PathBuf::from(v));
    }
    given
        .map(Path::to_path_buf)
        .ok_or_else(|| FusionError::Config(format!("no data root given and {DATA_ROOT_ENV} is unset")))
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg" | "bmp")
    )
}

/// Sorted image file names in `dir`.
pub fn list_images(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| FusionError::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| FusionError::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && is_image(&path) {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

/// Loads `<root>/ir/<name>` paired with `<root>/vi/<name>`.
pub fn load_pairs(root: &Path) -> Result<Vec<(String, Image, Image)>> {
    let (ir_dir, vi_dir) = (root.join("ir"), root.join("vi"));
    let mut pairs = Vec::new();
    for name in list_images(&ir_dir)? {
        let vi_path = vi_dir.join(&name);
        if !vi_path.is_file() {
            return Err(FusionError::shape(format!("{} has no visible counterpart", ir_dir.join(&name).display())));
        }
        let ir = imaging::load_image(&ir_dir.join(&name))?;
        let vi = imaging::load_image(&vi_path)?;
        pairs.push((name, ir, vi));
    }
    Ok(pairs)
}

pub fn load_dataset(root: &Path, config: &FusionConfig) -> Result<PatchSet> {
    let mut pairs: Vec<(Image, Image)> = load_pairs(root)?.into_iter().map(|(_, a, b)| (a, b)).collect();
    if let Some(n) = config.subset {
        pairs.truncate(n);
    }
    imaging::extract_patches(&pairs, config.patch_size)
}
