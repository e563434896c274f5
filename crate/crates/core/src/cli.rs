//! Command-line front end: `train`, `fuse`, `eval` and `export-maps`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{FusionError, Result};
use crate::fuser::fuse_pair;
use crate::imaging::{self, recombine, rgb_to_ycbcr, ColorSpace, Image};
use crate::le2::{export_weight_maps, le2_forward};
use crate::metrics::{evaluate_set, MetricReport, Triple};
use crate::trainer::{self, FusionConfig};

#[derive(Debug, Parser)]
#[command(name = "le2fusion", version, about = "Infrared/visible image fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on `<data>/ir` and `<data>/vi` and write a checkpoint.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-step loss CSV; defaults to `<out>.loss.csv`.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Fuse one registered pair. RGB visible input keeps its chroma.
    Fuse {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        ir: PathBuf,
        #[arg(long)]
        vi: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score `<dir>/fused` against `<dir>/ir` and `<dir>/vi`.
    Eval {
        #[arg(long)]
        dir: PathBuf,
        /// Also write the CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the edge weight maps for a visible image as PNGs.
    ExportMaps {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        vi: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs the tool; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("le2fusion: {e}");
            1
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train {
            data,
            config,
            out,
            loss_csv,
        } => train(data.as_deref(), config.as_deref(), &out, loss_csv),
        Command::Fuse { ckpt, ir, vi, out } => fuse(&ckpt, &ir, &vi, &out),
        Command::Eval { dir, out } => {
            let report = eval(&dir)?;
            let csv = report.to_csv();
            if let Some(path) = out {
                std::fs::write(&path, &csv).map_err(|e| FusionError::io(&path, e))?;
            }
            print!("{csv}");
            Ok(())
        }
        Command::ExportMaps { ckpt, vi, out } => {
            let params = trainer::load_checkpoint(&ckpt)?;
            let vi = imaging::load_image(&vi)?.luma()?.to_unit();
            let w = le2_forward(&vi.to_tensor()?, &params)?;
            std::fs::create_dir_all(&out).map_err(|e| FusionError::io(&out, e))?;
            for path in export_weight_maps(&w, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn train(data: Option<&Path>, config: Option<&Path>, out: &Path, loss_csv: Option<PathBuf>) -> Result<()> {
    let config = match config {
        Some(path) => FusionConfig::load(path)?,
        None => FusionConfig::default(),
    };
    let root = trainer::resolve_data_root(data)?;
    let dataset = trainer::load_dataset(&root, &config)?;
    let steps = trainer::planned_steps(dataset.len(), &config);
    eprintln!("training {} on {} pairs for {steps} steps", config.ablation, dataset.len());
    let outcome = trainer::train_from(
        trainer::init_params(&config, config.seed),
        &dataset,
        &config,
        |step, r| eprintln!("step {step}: loss {:.6}", r.total),
    )?;
    trainer::save_checkpoint(&outcome.params, out)?;
    let csv = loss_csv.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".loss.csv");
        PathBuf::from(p)
    });
    trainer::write_loss_csv(&outcome.history, &csv)
}

fn fuse(ckpt: &Path, ir: &Path, vi: &Path, out: &Path) -> Result<()> {
    let params = trainer::load_checkpoint(ckpt)?;
    let ir = imaging::load_image(ir)?.luma()?;
    let vi = imaging::load_image(vi)?;
    if ir.dims() != vi.dims() {
        return Err(FusionError::shape(format!(
            "infrared is {:?} but visible is {:?}",
            ir.dims(),
            vi.dims()
        )));
    }
    let fused = match vi.space() {
        ColorSpace::Rgb => {
            let ycc = rgb_to_ycbcr(&vi)?;
            let y = fuse_pair(&ir, &ycc.channel(0), &params)?;
            recombine(&y, &ycc.channel(1), &ycc.channel(2))?
        }
        _ => fuse_pair(&ir, &vi, &params)?,
    };
    imaging::save_image(&fused, out)
}

/// Loads the `ir/`, `vi/`, `fused/` triples under `dir`, matched by file name.
pub fn load_triples(dir: &Path) -> Result<Vec<Triple>> {
    if !dir.is_dir() {
        return Err(FusionError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let fused_dir = dir.join("fused");
    let names = if fused_dir.is_dir() {
        trainer::list_images(&fused_dir)?
    } else {
        Vec::new()
    };
    let gray = |sub: &str, name: &str| -> Result<Image> { imaging::load_image(&dir.join(sub).join(name))?.luma() };
    names
        .into_iter()
        .map(|name| {
            Ok(Triple {
                ir: gray("ir", &name)?,
                vi: gray("vi", &name)?,
                fused: gray("fused", &name)?,
                name,
            })
        })
        .collect()
}

pub fn eval(dir: &Path) -> Result<MetricReport> {
    let triples = load_triples(dir)?;
    if triples.is_empty() {
        return Err(FusionError::EmptySet(format!("no fused images under {}", dir.display())));
    }
    evaluate_set(&triples)
}
