//! Seeded Voronoi pixel datasets, label corruption and dataset files.
//!
//! ```text
//! cargo run --example synthetic_data
//! ```

use prcl::data::{corrupt_labels, generate, DatasetSpec};
use prcl::io::{load_dataset, save_dataset};

fn main() -> prcl::Result<()> {
    let spec = DatasetSpec {
        height: 12,
        width: 24,
        n_labeled: 2,
        n_unlabeled: 3,
        ..DatasetSpec::default()
    };
    let ds = generate(&spec)?;

    println!("labels of labeled image 0 (boundary pixels of unlabeled image 0 marked with *):");
    let truth = &ds.eval_labels().unlabeled_boundary[0];
    for y in 0..spec.height {
        let row: String = (0..spec.width)
            .map(|x| {
                let i = y * spec.width + x;
                let label = char::from(b'0' + ds.labeled[0].labels[i] as u8);
                let edge = if truth[i] { '*' } else { '.' };
                format!("{label}{edge}")
            })
            .collect();
        println!("  {row}");
    }

    let flipped = corrupt_labels(&ds.labeled[0].labels, spec.num_classes, 0.3, 9)?;
    println!(
        "corrupting at rate 0.3 flipped {} of {} labels",
        flipped.flip_count(),
        flipped.labels.len()
    );

    let dir = std::env::temp_dir().join("prcl-synthetic-example");
    std::fs::create_dir_all(&dir).map_err(|e| prcl::Error::io(&dir, e))?;
    let path = dir.join("data.bin");
    save_dataset(&ds, &path)?;
    let back = load_dataset(&path)?;
    println!("round trip through {} preserved the dataset: {}", path.display(), back == ds);
    Ok(())
}
