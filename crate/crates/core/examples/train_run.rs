//! One complete training run from a TOML file, with reports written to disk.
//!
//! ```text
//! cargo run --release --example train_run -- crates/core/examples/configs/default.toml /tmp/prcl-run
//! ```

use std::path::PathBuf;

use prcl::harness::{train, RunConfig};

fn main() -> prcl::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = match args.next() {
        Some(path) => RunConfig::load(&PathBuf::from(path))?,
        None => RunConfig::default(),
    };
    let out = args.next().map_or_else(|| std::env::temp_dir().join("prcl-train-run"), PathBuf::from);
    cfg.run.output_dir = Some(out.clone());

    let report = train(&cfg)?;
    for e in report.epochs.iter().step_by(5) {
        println!(
            "epoch {:>3}: loss {:.3} mIoU {:.4} proto {:.4} sigma2 {}",
            e.epoch,
            e.total_loss,
            e.miou,
            e.proto_acc,
            e.sigma2_mean.map_or("-".into(), |v| format!("{v:.4}"))
        );
    }
    let s = &report.summary;
    println!("final: pixel acc {:.4}, mIoU {:.4}, prototype acc {:.4}", s.pixel_acc, s.miou, s.proto_acc);
    if let (Some(b), Some(i)) = (s.boundary_sigma2_l1, s.interior_sigma2_l1) {
        println!("mean |sigma2|_1 on boundary pixels {b:.4}, interior {i:.4}");
    }
    println!("reports in {}", out.display());
    Ok(())
}
