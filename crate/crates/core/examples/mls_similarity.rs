//! Mutual likelihood score between Gaussian embeddings, and its gradient.
//!
//! ```text
//! cargo run --example mls_similarity
//! ```

use prcl::{mls, mls_grad, ProbRep};

fn main() -> prcl::Result<()> {
    let anchor = ProbRep::new(vec![0.0, 0.0], vec![0.2, 0.2])?;

    println!("same mean, growing partner variance:");
    for s in [0.05, 0.2, 1.0, 5.0] {
        let other = ProbRep::isotropic(vec![0.0, 0.0], s)?;
        println!("  sigma2 {s:>5}: mls {:+.4}", mls(&anchor, &other)?);
    }

    println!("fixed offset of 1.0 along x, growing partner variance:");
    for s in [0.05, 0.2, 1.0, 5.0] {
        let other = ProbRep::isotropic(vec![1.0, 0.0], s)?;
        println!("  sigma2 {s:>5}: mls {:+.4}", mls(&anchor, &other)?);
    }

    // A confident mismatch is punished harder than an uncertain one.
    let sure = ProbRep::isotropic(vec![2.0, 0.0], 0.05)?;
    let unsure = ProbRep::isotropic(vec![2.0, 0.0], 2.0)?;
    println!(
        "distant partner: confident {:+.3}, uncertain {:+.3}",
        mls(&anchor, &sure)?,
        mls(&anchor, &unsure)?
    );

    let g = mls_grad(&anchor, &sure)?;
    println!("d mls / d mu_a     = {:?}", g.d_mu_a);
    println!("d mls / d sigma2_a = {:?}", g.d_sigma2_a);
    Ok(())
}
