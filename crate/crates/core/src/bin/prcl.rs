use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prcl::data::{generate, DatasetSpec};
use prcl::harness::{evaluate_snapshot, sweep, Axis, Method, RunConfig};
use prcl::io::{load_checkpoint, load_dataset, save_dataset};

#[derive(Parser)]
#[command(name = "prcl", version, about = "Probabilistic prototype contrastive learning on synthetic pixel data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Copy)]
struct Overrides {
    /// Override `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override `run.epochs`.
    #[arg(long, global = true)]
    epochs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset from a `[dataset]`-style TOML spec.
    GenData {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Train one run and write epochs.csv, summary.json and checkpoints.
    Train {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Evaluate a checkpoint on the unlabeled split of a dataset file.
    Eval {
        #[arg(short, long)]
        model: PathBuf,
        #[arg(short, long)]
        dataset: PathBuf,
        /// Similarity used for prototype accuracy.
        #[arg(long, default_value = "prcl")]
        method: Method,
    },
    /// Run the cross product of one or more axes.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// `key=v1,v2,...`; repeatable. `run.seed` is aggregated over.
        #[arg(long, required = true)]
        axis: Vec<Axis>,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        ov: Overrides,
    },
}

fn load_config(path: &PathBuf, ov: Overrides) -> prcl::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = ov.seed {
        cfg.run.seed = s;
    }
    if let Some(e) = ov.epochs {
        cfg.run.epochs = e;
    }
    Ok(cfg)
}

/// Accepts either a bare spec or one nested under `[dataset]`.
fn load_spec(path: &PathBuf) -> prcl::Result<DatasetSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| prcl::Error::Config(format!("{}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| prcl::Error::Config(e.to_string()))?;
    let value = match table.get("dataset") {
        Some(v) => v.clone(),
        None => toml::Value::Table(table),
    };
    value.try_into().map_err(|e: toml::de::Error| prcl::Error::Config(e.to_string()))
}

fn run(cli: Cli) -> prcl::Result<()> {
    match cli.cmd {
        Cmd::GenData { spec, output, ov } => {
            let mut spec = load_spec(&spec)?;
            if let Some(s) = ov.seed {
                spec.seed = s;
            }
            let ds = generate(&spec)?;
            save_dataset(&ds, &output)?;
            println!(
                "wrote {} ({} labeled, {} unlabeled images of {}x{})",
                output.display(),
                ds.labeled.len(),
                ds.unlabeled.len(),
                spec.height,
                spec.width
            );
        }
        Cmd::Train { config, output, ov } => {
            let mut cfg = load_config(&config, ov)?;
            cfg.run.output_dir = Some(output.clone());
            for w in cfg.sampling.warnings() {
                eprintln!("warning: {w}");
            }
            let report = prcl::harness::train(&cfg)?;
            let s = &report.summary;
            println!(
                "{} seed {} epochs {}: pixel_acc {:.4} mIoU {:.4} proto_acc {:.4} -> {}",
                s.method,
                s.seed,
                s.epochs,
                s.pixel_acc,
                s.miou,
                s.proto_acc,
                output.display()
            );
        }
        Cmd::Eval { model, dataset, method } => {
            let (model, _) = load_checkpoint(&model)?;
            let ds = load_dataset(&dataset)?;
            if model.dims().input != ds.spec.input_dim || model.dims().classes != ds.spec.num_classes {
                return Err(prcl::Error::Config("checkpoint and dataset dimensions disagree".into()));
            }
            let snap = evaluate_snapshot(&model, &ds, method, ds.unlabeled.len())?;
            println!("pixel_acc {:.6}", snap.seg.pixel_acc);
            println!("miou {:.6}", snap.seg.miou);
            for (c, iou) in snap.seg.per_class_iou.iter().enumerate() {
                match iou {
                    Some(v) => println!("iou[{c}] {v:.6}"),
                    None => println!("iou[{c}] -"),
                }
            }
            println!("proto_acc {:.6}", snap.proto_acc);
        }
        Cmd::Sweep {
            config,
            axis,
            output,
            ov,
        } => {
            let cfg = load_config(&config, ov)?;
            let out = sweep(&cfg, &axis, &output)?;
            let failed = out.runs.iter().filter(|r| r.error.is_some()).count();
            for r in out.runs.iter().filter(|r| r.error.is_some()) {
                eprintln!("run {} failed: {}", r.dir.display(), r.error.as_deref().unwrap_or(""));
            }
            println!(
                "{} runs ({} failed), {} summary rows -> {}",
                out.runs.len(),
                failed,
                out.summary.len(),
                output.join("summary.csv").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
