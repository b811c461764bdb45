//! Recover a planted sparse DEM on 60 detectors by lattice search.
//!
//! ```text
//! cargo run --release --example lattice_recovery -- [seed] [shots]
//! ```

use std::time::Instant;

use demkit::sampling::{make_random_sparse_dem, sample_histories, RandomDemSpec};
use demkit::sparse::{extract_events, prune_lattice, LatticeConfig};
use demkit::ShotData;

fn main() -> demkit::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let shots: usize = args
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1_000_000);

    let truth = make_random_sparse_dem(&RandomDemSpec {
        n_detectors: 60,
        n_events: 40,
        max_weight: 4,
        p_min: 0.001,
        p_max: 0.02,
        seed,
    })?;

    let t = Instant::now();
    let data = ShotData::new(&sample_histories(&truth, shots, seed))?;
    println!("sampled {shots} shots in {:.2?}", t.elapsed());

    let t = Instant::now();
    let lattice = prune_lattice(&data, &LatticeConfig::new(4))?;
    println!(
        "lattice: {} stored classes, {} evaluated, built in {:.2?}",
        lattice.len(),
        lattice.n_evaluated(),
        t.elapsed()
    );

    let t = Instant::now();
    let estimate = extract_events(&lattice, &data)?;
    println!(
        "extracted {} events in {:.2?}",
        estimate.events().len(),
        t.elapsed()
    );

    let mut missing = 0;
    for ev in truth.events() {
        match estimate.get(&ev.mask) {
            Some(e) => {
                let z = (e.probability - ev.probability) / e.probability_std_error;
                println!(
                    "  {}  p={:.5}  est={:.5} ± {:.5}  ({z:+.2} σ)",
                    ev.mask, ev.probability, e.probability, e.probability_std_error
                );
            }
            None => {
                missing += 1;
                println!("  {}  p={:.5}  MISSING", ev.mask, ev.probability);
            }
        }
    }
    let spurious: Vec<_> = estimate
        .events()
        .iter()
        .filter(|e| e.attenuation.value > 0.0 && truth.probability_of(&e.mask).is_none())
        .collect();
    for e in &spurious {
        println!(
            "  {}  spurious  a={:.3e} ± {:.3e} {:?}",
            e.mask, e.attenuation.value, e.attenuation.std_error, e.warning
        );
    }
    println!("missing={missing} spurious={}", spurious.len());
    Ok(())
}
