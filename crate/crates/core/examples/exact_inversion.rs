//! Full-spectrum recovery on a small DEM, first from the exact distribution
//! and then from sampled shots.

use demkit::exact::{
    attenuations_from_depolarizations, depolarizations_from_polarizations, estimate_dem_exact,
    polarizations_from_distribution, ExactConfig,
};
use demkit::sampling::{exact_distribution, sample_histories};
use demkit::{Dem, EventMask};

fn main() -> demkit::Result<()> {
    let truth = Dem::from_pairs(&[("100", 0.03), ("010", 0.05), ("011", 0.02), ("111", 0.01)])?;

    let z = polarizations_from_distribution(&exact_distribution(&truth)?);
    let omega = depolarizations_from_polarizations(&z)?;
    let a = attenuations_from_depolarizations(&omega)?;
    println!("exact spectrum:");
    for (s, &a_s) in a.entries().iter().enumerate().skip(1) {
        println!(
            "  {}  z={:.6}  omega={:.6}  a={a_s:+.3e}",
            EventMask::from_bits(3, s as u64),
            z.entries()[s],
            omega.entries()[s]
        );
    }

    let shots = sample_histories(&truth, 500_000, 7);
    let est = estimate_dem_exact(&shots, &ExactConfig::default())?;
    println!("from {} shots:", shots.n_shots());
    for e in est.events() {
        let p = truth.probability_of(&e.mask).unwrap_or(0.0);
        println!(
            "  {}  p={p:.4}  est={:.4} ± {:.4}",
            e.mask, e.probability, e.probability_std_error
        );
    }
    for note in est.notes() {
        println!("  note: {note}");
    }
    Ok(())
}
