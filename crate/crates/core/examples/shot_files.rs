//! Sampling shots and round-tripping them through both file formats.

use demkit::sampling::{make_random_sparse_dem, RandomDemSpec};
use demkit::sampling::{read_shots, sample_histories, write_shots_binary, write_shots_text};
use demkit::EventMask;

fn main() -> demkit::Result<()> {
    let dem = make_random_sparse_dem(&RandomDemSpec {
        n_detectors: 20,
        n_events: 12,
        max_weight: 3,
        p_min: 0.01,
        p_max: 0.05,
        seed: 4,
    })?;
    let shots = sample_histories(&dem, 10_000, 4);

    let mut text = Vec::new();
    write_shots_text(&shots, &mut text)?;
    let mut bin = Vec::new();
    write_shots_binary(&shots, &mut bin)?;
    println!("text {} bytes, binary {} bytes", text.len(), bin.len());

    assert_eq!(read_shots(&text[..])?, shots);
    assert_eq!(read_shots(&bin[..])?, shots);

    let fired = (0..shots.n_shots())
        .filter(|&i| shots.shot(i) != EventMask::zeros(20))
        .count();
    println!("{fired} of {} shots fired a detector", shots.n_shots());
    println!("first shot: {}", shots.shot(0));
    Ok(())
}
