//! Driving the teacher-student loop one step at a time.
//!
//! ```text
//! cargo run --release --example teacher_student
//! ```

use prcl::contrastive::lambda_c;
use prcl::data::generate;
use prcl::harness::{RunConfig, Trainer};
use prcl::model::pseudo_label;

fn main() -> prcl::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.dataset.n_unlabeled = 8;
    // Looser thresholds than the defaults so the unlabeled terms switch on early.
    cfg.run.delta_u = 0.5;
    cfg.sampling.delta_w = 0.5;
    let ds = generate(&cfg.dataset)?;
    let mut trainer = Trainer::new(cfg.clone(), ds.training_view())?;

    let d = ds.spec.input_dim;
    let probe = &ds.unlabeled[0].features[..d];
    for epoch in 0..24 {
        let lc = lambda_c(epoch, &cfg.scheduler)?;
        let mut last = None;
        for step in 0..cfg.optim.steps_per_epoch {
            last = Some(trainer.step(epoch, step, lc)?);
        }
        let (parts, stats) = last.expect("at least one step");
        if epoch % 3 != 2 {
            continue;
        }
        let (class, conf) = pseudo_label(trainer.teacher(), probe)?;
        println!(
            "epoch {epoch}: L_s {:.3} L_u {:.3} (lambda_u {:.2}) L_c {:.3} (lambda_c {lc:.2}), {} anchors; teacher says class {class} at {conf:.2}",
            parts.l_s, parts.l_u, parts.lambda_u, parts.l_contrast, stats.anchors
        );
    }
    Ok(())
}
