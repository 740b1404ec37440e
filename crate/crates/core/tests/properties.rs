mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use prcl::contrastive::{contrast_term, lambda_c, ContrastBatch, Probabilistic, SchedulerConfig};
use prcl::data::corrupt_labels;
use prcl::harness::segmentation_metrics;
use prcl::sampling::{
    allocate_negatives, filter_valid, group_by_class, largest_remainder, sample_anchors, PixelCandidate,
    SamplingConfig, Source,
};
use prcl::{fuse_prototype, mls, mls_grad, DistPrototype, ProbRep};

fn rep_strategy(d: usize) -> impl Strategy<Value = ProbRep> {
    (
        prop::collection::vec(-3.0f64..3.0, d),
        prop::collection::vec(-3.0f64..2.0, d),
    )
        .prop_map(|(mu, log_s)| ProbRep::new(mu, log_s.into_iter().map(f64::exp).collect()).unwrap())
}

fn rep_pair() -> impl Strategy<Value = (ProbRep, ProbRep)> {
    (1usize..6).prop_flat_map(|d| (rep_strategy(d), rep_strategy(d)))
}

fn obs_set() -> impl Strategy<Value = Vec<ProbRep>> {
    (1usize..5).prop_flat_map(|d| prop::collection::vec(rep_strategy(d), 1..8))
}

fn candidate_strategy() -> impl Strategy<Value = Vec<PixelCandidate<()>>> {
    prop::collection::vec((0.0f64..1.0, 0usize..4, any::<bool>()), 0..80).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(index, (confidence, class_id, lab))| PixelCandidate {
                rep: (),
                confidence,
                class_id,
                source: if lab { Source::Labeled } else { Source::Unlabeled },
                index,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn mls_is_symmetric((a, b) in rep_pair()) {
        let ab = mls(&a, &b).unwrap();
        let ba = mls(&b, &a).unwrap();
        prop_assert!(common::rel_err(ab, ba) < 1e-12);
    }

    #[test]
    fn mls_matches_scalar_oracle((a, b) in rep_pair()) {
        let got = mls(&a, &b).unwrap();
        let want = common::mls_scalar(a.mu(), a.sigma2(), b.mu(), b.sigma2());
        prop_assert!(common::rel_err(got, want) < 1e-9);
    }

    #[test]
    fn mls_grad_matches_finite_differences((a, b) in rep_pair()) {
        let g = mls_grad(&a, &b).unwrap();
        let d = a.mu().len();
        let h = 1e-3;
        for l in 0..d {
            let mut f = |mu: &[f64]| common::mls_scalar(mu, a.sigma2(), b.mu(), b.sigma2());
            let num = common::central_diff4(&mut f, a.mu(), l, h);
            prop_assert!(common::grad_err(g.d_mu_a[l], num, 1e-6) < 1e-5);
            let mut f = |s: &[f64]| common::mls_scalar(a.mu(), a.sigma2(), b.mu(), s);
            let hs = 1e-3 * b.sigma2()[l];
            let num = common::central_diff4(&mut f, b.sigma2(), l, hs);
            prop_assert!(common::grad_err(g.d_sigma2_b[l], num, 1e-6) < 1e-5);
        }
    }

    #[test]
    fn fused_variance_never_exceeds_smallest_observation(obs in obs_set()) {
        let p = fuse_prototype(&obs, 0).unwrap();
        for l in 0..p.sigma2_hat().len() {
            let min = obs.iter().map(|o| o.sigma2()[l]).fold(f64::INFINITY, f64::min);
            prop_assert!(p.sigma2_hat()[l] <= min * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fusion_precision_is_additive(obs in obs_set()) {
        let p = fuse_prototype(&obs, 0).unwrap();
        for l in 0..p.sigma2_hat().len() {
            let precision: f64 = obs.iter().map(|o| 1.0 / o.sigma2()[l]).sum();
            prop_assert!(common::rel_err(1.0 / p.sigma2_hat()[l], precision) < 1e-12);
        }
    }

    #[test]
    fn more_observations_never_widen_the_prototype(obs in obs_set()) {
        let full = fuse_prototype(&obs, 0).unwrap();
        if obs.len() > 1 {
            let fewer = fuse_prototype(&obs[..obs.len() - 1], 0).unwrap();
            for (a, b) in full.sigma2_hat().iter().zip(fewer.sigma2_hat()) {
                prop_assert!(a < b);
            }
        }
    }

    #[test]
    fn fusion_is_permutation_invariant(obs in obs_set(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = obs.clone();
        shuffled.shuffle(&mut common::rng(seed));
        let a = fuse_prototype(&obs, 0).unwrap();
        let b = fuse_prototype(&shuffled, 0).unwrap();
        for (x, y) in a.mu_hat().iter().zip(b.mu_hat()).chain(a.sigma2_hat().iter().zip(b.sigma2_hat())) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn sequential_update_equals_batch_fusion(obs in obs_set()) {
        let batch = fuse_prototype(&obs, 2).unwrap();
        let mut seq: DistPrototype = fuse_prototype(&obs[..1], 2).unwrap();
        for z in &obs[1..] {
            seq = seq.update(z).unwrap();
        }
        prop_assert_eq!(seq.n_obs(), batch.n_obs());
        for (x, y) in seq.mu_hat().iter().zip(batch.mu_hat()).chain(seq.sigma2_hat().iter().zip(batch.sigma2_hat())) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn contrast_is_shift_invariant(pos in -20.0f64..20.0, negs in prop::collection::vec(-20.0f64..20.0, 0..10),
                                   shift in -500.0f64..500.0, tau in 0.05f64..5.0) {
        let a = contrast_term(pos, &negs, tau).loss;
        let shifted: Vec<f64> = negs.iter().map(|n| n + shift).collect();
        let b = contrast_term(pos + shift, &shifted, tau).loss;
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-3));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn prcl_loss_is_nonnegative(reps in prop::collection::vec(rep_strategy(3), 2..10), tau in 0.1f64..3.0) {
        let mut batch = ContrastBatch::<Probabilistic>::new(tau).unwrap();
        for (i, r) in reps.iter().enumerate() {
            batch.push_rep(r.clone(), i % 2).unwrap();
        }
        batch.insert_prototype(fuse_prototype(reps.iter().step_by(2), 0).unwrap()).unwrap();
        let negs: Vec<usize> = (1..reps.len()).step_by(2).collect();
        batch.add_anchor(0, negs).unwrap();
        prop_assert!(batch.loss().unwrap() >= 0.0);
    }

    #[test]
    fn largest_remainder_sums_to_n(weights in prop::collection::vec(0.0f64..10.0, 1..12), n in 0usize..2000) {
        let counts = largest_remainder(&weights, n);
        prop_assert_eq!(counts.len(), weights.len());
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            for (c, w) in counts.iter().zip(&weights) {
                let quota = n as f64 * w / total;
                prop_assert!((*c as f64 - quota).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn sampling_respects_thresholds(cands in candidate_strategy(), dw in 0.0f64..0.9, ds in 0.1f64..1.0,
                                    per_class in 1usize..20, seed in any::<u64>()) {
        let valid = filter_valid(&cands, dw);
        prop_assert!(valid.iter().all(|c| c.confidence > dw));
        prop_assert_eq!(valid.len(), cands.iter().filter(|c| c.confidence > dw).count());
        let cfg = SamplingConfig { delta_w: dw, delta_s: ds, anchors_per_class: per_class, negatives_per_anchor: 8, rng_seed: seed };
        let anchors = sample_anchors(&valid, &cfg);
        for (class, picked) in &anchors {
            prop_assert!(!picked.is_empty() && picked.len() <= per_class);
            prop_assert!(picked.iter().all(|c| c.class_id == *class && c.confidence < ds));
        }
        prop_assert_eq!(&anchors, &sample_anchors(&valid, &cfg));
    }

    #[test]
    fn negatives_never_share_the_anchor_class(cands in candidate_strategy(), n in 1usize..100, seed in any::<u64>()) {
        let pools = group_by_class(&cands);
        let protos: BTreeMap<usize, DistPrototype> = pools
            .keys()
            .map(|&c| (c, DistPrototype::from_parts(vec![c as f64, 0.0], vec![0.5, 0.5], 1, c).unwrap()))
            .collect();
        for &anchor_class in pools.keys() {
            match allocate_negatives(anchor_class, &protos, &pools, n, 0.5, seed) {
                Ok(negs) => {
                    let available: usize = pools.iter().filter(|(&c, _)| c != anchor_class).map(|(_, p)| p.len()).sum();
                    prop_assert_eq!(negs.len(), n.min(available));
                    prop_assert!(negs.iter().all(|c| c.class_id != anchor_class));
                    let mut idx: Vec<usize> = negs.iter().map(|c| c.index).collect();
                    idx.sort_unstable();
                    idx.dedup();
                    prop_assert_eq!(idx.len(), negs.len());
                }
                Err(_) => prop_assert!(pools.iter().all(|(&c, p)| c == anchor_class || p.is_empty())),
            }
        }
    }

    #[test]
    fn scheduler_is_non_increasing(l0 in 0.0f64..5.0, alpha in -10.0f64..-1e-3, total in 1usize..200) {
        let cfg = SchedulerConfig { lambda_c0: l0, alpha, total_epochs: total, enabled: true };
        let mut prev = f64::INFINITY;
        for t in 0..=total {
            let v = lambda_c(t, &cfg).unwrap();
            prop_assert!(v <= prev);
            prev = v;
        }
        prop_assert!(lambda_c(total + 1, &cfg).is_err());
    }

    #[test]
    fn corruption_mask_matches_changes(labels in prop::collection::vec(0usize..5, 0..300), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let c = corrupt_labels(&labels, 5, p, seed).unwrap();
        for ((orig, new), flipped) in labels.iter().zip(&c.labels).zip(&c.mask) {
            prop_assert_eq!(orig != new, *flipped);
            prop_assert!(*new < 5);
        }
        prop_assert_eq!(c.flip_count(), c.mask.iter().filter(|m| **m).count());
    }

    #[test]
    fn miou_in_unit_interval(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200)) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let m = segmentation_metrics(&pred, &truth, 4);
        prop_assert!((0.0..=1.0).contains(&m.miou));
        prop_assert!((0.0..=1.0).contains(&m.pixel_acc));
    }
}
