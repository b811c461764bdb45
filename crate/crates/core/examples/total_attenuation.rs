//! Total attenuation of a 16-detector uniform depolarizing model from random
//! parities.
//!
//! ```text
//! cargo run --release --example total_attenuation -- [draws] [seed]
//! ```

use demkit::aggregated::{mc_total_attenuation, McConfig};
use demkit::sampling::{make_uniform_depolarizing_dem, sample_histories};
use demkit::ShotData;

fn main() -> demkit::Result<()> {
    let mut args = std::env::args().skip(1);
    let draws: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(256);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let (n, eps) = (16, 0.1);
    let dem = make_uniform_depolarizing_dem(n, eps)?;
    let size = (1u64 << n) as f64;
    let a0 = (size - 1.0) * -(-2.0 * eps / size).ln_1p();

    let data = ShotData::new(&sample_histories(&dem, 1_000_000, seed))?;
    let r = mc_total_attenuation(&data, &McConfig::new(draws, seed))?;
    println!("{} events, a0 = {a0:.6}", dem.len());
    println!(
        "estimate {:.6} ± {:.6} from {} draws ({:.1}% divergent)",
        r.estimate.value,
        r.estimate.std_error,
        r.n_draws,
        100.0 * r.divergent_fraction
    );
    println!("P(no event) ~ {:.5}", (-r.estimate.value).exp());
    Ok(())
}
