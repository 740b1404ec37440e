//! Valid-pixel filtering, hard-anchor selection and similarity-weighted
//! negative apportionment.
//!
//! ```text
//! cargo run --example sampling_strategies
//! ```

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prcl::sampling::{
    allocate_negatives, filter_valid, group_by_class, negative_class_weights, sample_anchors, PixelCandidate,
    SamplingConfig, Source,
};
use prcl::{fuse_prototype, ProbRep};

fn main() -> prcl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Class 1 sits close to class 0, class 2 far away.
    let centres = [[0.0, 0.0], [0.6, 0.0], [4.0, 4.0]];
    let mut candidates = Vec::new();
    for index in 0..300 {
        let class_id = index % 3;
        let mu: Vec<f64> = centres[class_id].iter().map(|m| m + rng.random_range(-0.3..0.3)).collect();
        candidates.push(PixelCandidate {
            rep: ProbRep::isotropic(mu, rng.random_range(0.1..0.5))?,
            confidence: rng.random_range(0.3..1.0),
            class_id,
            source: if index < 150 { Source::Labeled } else { Source::Unlabeled },
            index,
        });
    }

    let cfg = SamplingConfig {
        anchors_per_class: 4,
        negatives_per_anchor: 60,
        ..SamplingConfig::default()
    };
    let valid = filter_valid(&candidates, cfg.delta_w);
    println!("{} of {} candidates pass delta_w = {}", valid.len(), candidates.len(), cfg.delta_w);

    let anchors = sample_anchors(&valid, &cfg);
    for (class, picked) in &anchors {
        let conf: Vec<String> = picked.iter().map(|c| format!("{:.2}", c.confidence)).collect();
        println!("class {class}: hard anchors with confidence {}", conf.join(" "));
    }

    let pools = group_by_class(&valid);
    let mut protos = BTreeMap::new();
    for (&class, pool) in &pools {
        protos.insert(class, fuse_prototype(pool.iter().map(|c| &c.rep), class)?);
    }
    let tau = 0.5;
    let weights = negative_class_weights(0, &protos, pools.keys().copied(), tau)?;
    println!("negative class weights for an anchor of class 0: {weights:?}");
    let negs = allocate_negatives(0, &protos, &pools, cfg.negatives_per_anchor, tau, 11)?;
    let mut per_class: BTreeMap<usize, usize> = BTreeMap::new();
    for n in &negs {
        *per_class.entry(n.class_id).or_default() += 1;
    }
    println!("{} negatives drawn, per class {per_class:?}", negs.len());
    Ok(())
}
