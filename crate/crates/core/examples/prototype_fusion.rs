//! Bayesian distribution prototypes: batch fusion, sequential updates and the
//! point-prototype baseline.
//!
//! ```text
//! cargo run --example prototype_fusion
//! ```

use prcl::{fuse_prototype, point_prototype, ProbRep};

fn main() -> prcl::Result<()> {
    // Two confident observations near 1.0 and one vague outlier at 4.0.
    let obs = vec![
        ProbRep::new(vec![1.0, 0.0], vec![0.1, 0.1])?,
        ProbRep::new(vec![1.2, 0.1], vec![0.1, 0.2])?,
        ProbRep::new(vec![4.0, 3.0], vec![5.0, 5.0])?,
    ];

    let dist = fuse_prototype(&obs, 0)?;
    let point = point_prototype(obs.iter().map(|o| o.mu()), 0)?;
    println!("distribution prototype mu {:?}", dist.mu_hat());
    println!("                   sigma2 {:?}", dist.sigma2_hat());
    println!("point prototype        mu {:?}", point.mu());

    let mut seq = fuse_prototype(&obs[..1], 0)?;
    for (i, z) in obs[1..].iter().enumerate() {
        seq = seq.update(z)?;
        println!("after {} updates: mu {:?} sigma2 {:?}", i + 1, seq.mu_hat(), seq.sigma2_hat());
    }
    Ok(())
}
