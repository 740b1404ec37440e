//! Probabilistic versus deterministic prototypes under pseudo-label noise,
//! as a small sweep.
//!
//! ```text
//! cargo run --release --example ablation_sweep
//! ```

use prcl::harness::{sweep, Axis, RunConfig};

fn main() -> prcl::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.run.epochs = 20;
    cfg.run.eval_images = 1;
    let axes: Vec<Axis> = [
        "run.method=prcl,deterministic-baseline",
        "run.p_flip=0.0,0.3",
        "run.seed=0,1,2",
    ]
    .iter()
    .map(|s| s.parse())
    .collect::<prcl::Result<_>>()?;

    let out_dir = std::env::temp_dir().join("prcl-ablation-sweep");
    let outcome = sweep(&cfg, &axes, &out_dir)?;
    println!("{:<48} {:>5} {:>16} {:>16}", "point", "runs", "mIoU", "proto acc");
    for row in &outcome.summary {
        let point: Vec<String> = row.point.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "{:<48} {:>5} {:>8.4}±{:<7.4} {:>8.4}±{:<7.4}",
            point.join(" "),
            row.runs,
            row.miou_mean,
            row.miou_std,
            row.proto_acc_mean,
            row.proto_acc_std
        );
    }
    println!("per-run reports and summary.csv in {}", out_dir.display());
    Ok(())
}
