//! The probabilistic contrastive loss next to the deterministic l2 baseline,
//! including the uniform-variance case where the two coincide.
//!
//! ```text
//! cargo run --example contrastive_losses
//! ```

use prcl::contrastive::{ContrastBatch, Deterministic, Probabilistic};
use prcl::{fuse_prototype, point_prototype, prcl_loss, infonce_l2_loss, DistPrototype, PointPrototype, ProbRep};

fn main() -> prcl::Result<()> {
    let tau = 0.5;
    let pool = [
        (vec![1.0, 0.0], vec![0.1, 0.1], 0),
        (vec![0.8, 0.3], vec![0.6, 0.6], 0),
        (vec![-1.0, 0.1], vec![0.2, 0.2], 1),
        (vec![-0.7, -0.4], vec![1.5, 1.5], 1),
    ];

    let mut prob = ContrastBatch::<Probabilistic>::new(tau)?;
    let mut det = ContrastBatch::<Deterministic>::new(tau)?;
    let mut reps = Vec::new();
    for (mu, s2, c) in &pool {
        let r = ProbRep::new(mu.clone(), s2.clone())?;
        prob.push_rep(r.clone(), *c)?;
        det.push_rep(mu.clone(), *c)?;
        reps.push((r, *c));
    }
    for c in 0..2 {
        let members: Vec<&ProbRep> = reps.iter().filter(|(_, k)| *k == c).map(|(r, _)| r).collect();
        prob.insert_prototype(fuse_prototype(members.iter().copied(), c)?)?;
        det.insert_prototype(point_prototype(members.iter().map(|r| r.mu()), c)?)?;
    }
    // Each pixel is an anchor contrasted against the other class.
    for (a, negs) in [(0, vec![2, 3]), (1, vec![2, 3]), (2, vec![0, 1]), (3, vec![0, 1])] {
        prob.add_anchor(a, negs.clone())?;
        det.add_anchor(a, negs)?;
    }

    let p = prcl_loss(&prob)?;
    let d = infonce_l2_loss(&det)?;
    println!("probabilistic loss {:.5}, deterministic loss {:.5}", p.loss, d.loss);
    for (i, g) in p.grads.iter().enumerate() {
        println!("  pixel {i}: d_mu {:?} d_sigma2 {:?}", g.d_mu, g.d_sigma2);
    }

    // With every variance equal to c the probabilistic loss is the l2 loss
    // at temperature 4 c tau.
    let c = 0.3;
    let mut uni = ContrastBatch::<Probabilistic>::new(tau)?;
    let mut l2 = ContrastBatch::<Deterministic>::new(4.0 * c * tau)?;
    for (mu, _, k) in &pool {
        uni.push_rep(ProbRep::isotropic(mu.clone(), c)?, *k)?;
        l2.push_rep(mu.clone(), *k)?;
    }
    for k in 0..2 {
        let mu = if k == 0 { vec![0.9, 0.1] } else { vec![-0.9, -0.1] };
        uni.insert_prototype(DistPrototype::from_parts(mu.clone(), vec![c; 2], 1, k)?)?;
        l2.insert_prototype(PointPrototype::new(mu, k)?)?;
    }
    for (a, negs) in [(0, vec![2, 3]), (2, vec![0, 1])] {
        uni.add_anchor(a, negs.clone())?;
        l2.add_anchor(a, negs)?;
    }
    println!(
        "uniform variance {c}: probabilistic {:.12} vs l2 at 4c*tau {:.12}",
        prcl_loss(&uni)?.loss,
        infonce_l2_loss(&l2)?.loss
    );
    Ok(())
}
