//! Marginalising a DEM onto a subset of detectors.

use demkit::dem::reduce_dem;
use demkit::sampling::exact_distribution;
use demkit::Dem;

fn main() -> demkit::Result<()> {
    let dem = Dem::from_pairs(&[
        ("1100", 0.05),
        ("0110", 0.03),
        ("0011", 0.02),
        ("1001", 0.04),
        ("1111", 0.01),
    ])?;
    let keep = [0, 2];
    let reduced = reduce_dem(&dem, &keep)?;
    for ev in reduced.events() {
        println!("{}  p={:.6}", ev.mask, ev.probability);
    }
    let tv = exact_distribution(&dem)?
        .marginal(&keep)?
        .tv_distance(&exact_distribution(&reduced)?)?;
    println!("TV distance to the marginal: {tv:.1e}");
    Ok(())
}
