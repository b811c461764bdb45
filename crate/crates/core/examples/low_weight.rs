//! Closed-form recovery of all events up to weight 2 on a short repetition
//! code style DEM.

use demkit::sampling::sample_histories;
use demkit::sparse::{low_weight_attenuations, LowWeightMode};
use demkit::{Dem, DemEvent, EventMask, ShotData};

fn main() -> demkit::Result<()> {
    let n = 8;
    let mut events = Vec::new();
    for i in 0..n {
        events.push(DemEvent {
            mask: EventMask::from_indices(n, &[i])?,
            probability: 0.01,
        });
        if i + 1 < n {
            events.push(DemEvent {
                mask: EventMask::from_indices(n, &[i, i + 1])?,
                probability: 0.02,
            });
        }
    }
    let truth = Dem::new(n, events)?;
    let data = ShotData::new(&sample_histories(&truth, 1_000_000, 11))?;

    let a = low_weight_attenuations(&data, 2, LowWeightMode::Cached)?;
    for (set, e) in &a {
        if e.value.abs() > 5.0 * e.std_error {
            let mask = EventMask::from_indices(n, set)?;
            println!(
                "{set:?}  p={:.5} ± {:.5}  true p={}",
                -(-e.value).exp_m1() / 2.0,
                e.std_error * (-e.value).exp() / 2.0,
                truth.probability_of(&mask).unwrap_or(0.0)
            );
        }
    }
    Ok(())
}
