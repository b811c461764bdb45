//! Pairwise edge probabilities for a matching-style graph.

use demkit::aggregated::{pij, pij_matrix};
use demkit::sampling::sample_histories;
use demkit::{Dem, ExactModel, ShotData};

fn main() -> demkit::Result<()> {
    let truth = Dem::from_pairs(&[
        ("1100", 0.02),
        ("0110", 0.03),
        ("0011", 0.01),
        ("1000", 0.04),
        ("0001", 0.05),
        ("1010", 0.006),
    ])?;

    let r2 = ExactModel::new(Dem::from_pairs(&[("10", 0.1), ("01", 0.2), ("11", 0.05)])?);
    println!("two-detector check: p_01 = {:.6}", pij(&r2, 0, 1)?.value);

    let data = ShotData::new(&sample_histories(&truth, 1_000_000, 3))?;
    let m = pij_matrix(&data)?;
    for (i, e) in m.singles.iter().enumerate() {
        println!("p_{i}   = {:.5} ± {:.5}", e.value, e.std_error);
    }
    for (i, j, e) in &m.pairs {
        println!("p_{i}{j}  = {:+.5} ± {:.5}", e.value, e.std_error);
    }
    Ok(())
}
