//! Randomized invariants across modules, checked against brute-force oracles.

use demkit::aggregated::{class_attenuation_estimate, pij};
use demkit::dem::{class_attenuation_true, prob_to_attenuation, reduce_dem, xor_combine};
use demkit::exact::{
    attenuations_from_depolarizations, depolarizations_from_polarizations,
    polarizations_from_distribution, total_attenuation_exact,
};
use demkit::sampling::{exact_distribution, make_uniform_depolarizing_dem};
use demkit::sparse::{
    extract_events, low_weight_attenuations, prune_lattice, solve_selected_events, LatticeConfig,
    LowWeightMode, PruneReason,
};
use demkit::stats::{polarization_covariance, sample_polarization};
use demkit::{
    Dem, DemEvent, DetectorHistories, EventClass, EventMask, ExactModel, ParityStatistics,
};
use proptest::prelude::*;

/// DEMs on `n` detectors with up to `max_events` events of weight at most
/// `max_weight`, probabilities in `[0.001, p_max)`.
fn dem_on(
    n: usize,
    max_events: usize,
    max_weight: usize,
    p_max: f64,
) -> impl Strategy<Value = Dem> {
    let event = (1u64..1 << n)
        .prop_filter("weight", move |b| b.count_ones() as usize <= max_weight)
        .prop_flat_map(move |bits| (Just(bits), 0.001..p_max));
    prop::collection::vec(event, 0..=max_events).prop_map(move |evs| {
        Dem::new(
            n,
            evs.into_iter().map(|(bits, p)| DemEvent {
                mask: EventMask::from_bits(n, bits),
                probability: p,
            }),
        )
        .unwrap()
    })
}

fn dem(n_max: usize, max_events: usize, p_max: f64) -> impl Strategy<Value = Dem> {
    (2..=n_max).prop_flat_map(move |n| dem_on(n, max_events, n, p_max))
}

fn mask(n: usize) -> impl Strategy<Value = EventMask> {
    prop::collection::vec(any::<bool>(), n).prop_map(move |bits| {
        let idx: Vec<usize> = bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| i)
            .collect();
        EventMask::from_indices(n, &idx).unwrap()
    })
}

fn sparse_subset(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n)
}

fn attenuation_of(dem: &Dem, m: &EventMask) -> f64 {
    dem.probability_of(m)
        .map(|p| prob_to_attenuation(p).unwrap().0)
        .unwrap_or(0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attenuation_is_additive(pa in 0.0..0.4999f64, pb in 0.0..0.4999f64) {
        let sum = prob_to_attenuation(pa).unwrap().0 + prob_to_attenuation(pb).unwrap().0;
        let combined = prob_to_attenuation(xor_combine(pa, pb)).unwrap().0;
        prop_assert!((combined - sum).abs() <= 1e-12 * sum.max(1.0), "{combined} vs {sum}");
    }

    #[test]
    fn dot_is_bilinear((a, b, s) in (1usize..200).prop_flat_map(|n| (mask(n), mask(n), mask(n)))) {
        let lhs = a.xor(&b).unwrap().dot(&s).unwrap();
        prop_assert_eq!(lhs, a.dot(&s).unwrap() ^ b.dot(&s).unwrap());
    }

    #[test]
    fn reduced_dem_matches_marginal(
        (dem, keep) in dem(10, 12, 0.3).prop_flat_map(|d| { let n = d.n_detectors(); (Just(d), sparse_subset(n)) })
    ) {
        let marginal = exact_distribution(&dem).unwrap().marginal(&keep).unwrap();
        let reduced = exact_distribution(&reduce_dem(&dem, &keep).unwrap()).unwrap();
        prop_assert!(marginal.tv_distance(&reduced).unwrap() <= 1e-12);
    }

    #[test]
    fn whole_mask_class_is_the_single_event(dem in dem(8, 10, 0.3), pick in any::<prop::sample::Index>()) {
        let n = dem.n_detectors();
        let bits = 1 + pick.index((1 << n) - 1) as u64;
        let m = EventMask::from_bits(n, bits);
        let class = EventClass::new((0..n).collect(), (0..n).map(|i| m.get(i)).collect()).unwrap();
        let a = class_attenuation_true(&dem, &class).unwrap().0;
        prop_assert!((a - attenuation_of(&dem, &m)).abs() <= 1e-12);
    }

    #[test]
    fn event_order_does_not_matter(dem in dem(8, 10, 0.3), seed in any::<u64>()) {
        let mut events = dem.events().to_vec();
        let len = events.len();
        for i in (1..len).rev() {
            events.swap(i, (seed.rotate_left(i as u32) % (i as u64 + 1)) as usize);
        }
        let shuffled = Dem::new(dem.n_detectors(), events).unwrap();
        let a = exact_distribution(&dem).unwrap();
        let b = exact_distribution(&shuffled).unwrap();
        prop_assert!(a.tv_distance(&b).unwrap() <= 1e-12);
    }

    #[test]
    fn uniform_depolarizing_zero_probabilities(n in 1usize..=10, eps in 0.0..0.5f64) {
        let dem = make_uniform_depolarizing_dem(n, eps).unwrap();
        let size = (1u64 << n) as f64;
        // No event at all: (1 - eps/2^N)^(2^N - 1).
        let none: f64 = dem.events().iter().map(|e| 1.0 - e.probability).product();
        prop_assert!((none - (1.0 - eps / size).powf(size - 1.0)).abs() <= 1e-12);
        // The all-zero history also collects even cancellations; every
        // nonzero parity has polarization (1 - 2 eps/2^N)^(2^(N-1)).
        let d = exact_distribution(&dem).unwrap();
        let z = (1.0 - 2.0 * eps / size).powf(size / 2.0);
        prop_assert!((d.weights()[0] - (1.0 + (size - 1.0) * z) / size).abs() <= 1e-12);
        prop_assert!(d.weights()[0] >= none - 1e-15);
    }

    #[test]
    fn exact_round_trip(dem in dem(12, 20, 0.3)) {
        let n = dem.n_detectors();
        let z = polarizations_from_distribution(&exact_distribution(&dem).unwrap());
        let omega = depolarizations_from_polarizations(&z).unwrap();
        let a = attenuations_from_depolarizations(&omega).unwrap();
        for s in 1u64..1 << n {
            let m = EventMask::from_bits(n, s);
            let got = a.entries()[s as usize];
            match dem.probability_of(&m) {
                Some(p) => prop_assert!((-(-got).exp_m1() / 2.0 - p).abs() <= 1e-10, "{m}"),
                None => prop_assert!(got.abs() <= 1e-10, "{m}: {got}"),
            }
        }
        let total: f64 = dem.attenuations().unwrap().iter().map(|(_, a)| a).sum();
        prop_assert!((total_attenuation_exact(&omega).unwrap().0 - total).abs() <= 1e-12);
    }

    #[test]
    fn class_estimates_match_brute_force(
        (dem, set, values) in dem(8, 10, 0.3).prop_flat_map(|d| {
            let n = d.n_detectors();
            (Just(d), prop::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n.min(4)))
                .prop_flat_map(|(d, s)| { let k = s.len(); (Just(d), Just(s), prop::collection::vec(any::<bool>(), k)) })
        })
    ) {
        prop_assume!(values.iter().any(|&v| v));
        let class = EventClass::new(set, values).unwrap();
        let est = class_attenuation_estimate(&ExactModel::new(dem.clone()), &class).unwrap();
        let truth = class_attenuation_true(&dem, &class).unwrap().0;
        prop_assert!((est.value - truth).abs() <= 1e-10, "{} vs {truth}", est.value);
    }

    #[test]
    fn full_class_estimate_is_the_inverted_entry(dem in dem(8, 10, 0.3), pick in any::<prop::sample::Index>()) {
        let n = dem.n_detectors();
        let s = 1 + pick.index((1 << n) - 1) as u64;
        let m = EventMask::from_bits(n, s);
        let z = polarizations_from_distribution(&exact_distribution(&dem).unwrap());
        let a = attenuations_from_depolarizations(&depolarizations_from_polarizations(&z).unwrap()).unwrap();
        let class = EventClass::new((0..n).collect(), (0..n).map(|i| m.get(i)).collect()).unwrap();
        let est = class_attenuation_estimate(&ExactModel::new(dem), &class).unwrap();
        prop_assert!((est.value - a.entries()[s as usize]).abs() <= 1e-10);
    }

    #[test]
    fn pij_is_symmetric(dem in dem(6, 8, 0.3), i in 0usize..6, j in 0usize..6) {
        let n = dem.n_detectors();
        let (i, j) = (i % n, j % n);
        prop_assume!(i != j);
        let model = ExactModel::new(dem);
        let (a, b) = (pij(&model, i, j).unwrap(), pij(&model, j, i).unwrap());
        prop_assert!(a.value == b.value || (a.value.is_nan() && b.value.is_nan()));
    }

    #[test]
    fn parity_group_law(rows in prop::collection::vec(mask(9), 1..40), y1 in mask(9), y2 in mask(9)) {
        let y12 = y1.xor(&y2).unwrap();
        for x in &rows {
            let z = |y: &EventMask| if y.dot(x).unwrap() { -1 } else { 1 };
            prop_assert_eq!(z(&y1) * z(&y2), z(&y12));
        }
        let data = DetectorHistories::from_masks(9, &rows).unwrap();
        prop_assert_eq!(sample_polarization(&data, &EventMask::zeros(9)).unwrap().value, 1.0);
    }

    #[test]
    fn covariance_is_psd(rows in prop::collection::vec(mask(6), 2..60), ys in prop::collection::vec(mask(6), 1..8)) {
        let data = DetectorHistories::from_masks(6, &rows).unwrap();
        let c = polarization_covariance(&data, &ys).unwrap();
        let eig = c.symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-9), "{:?}", eig.eigenvalues);
    }

    #[test]
    fn pruning_is_sound(dem in (4usize..=12).prop_flat_map(|n| dem_on(n, 8, 3, 0.1))) {
        let lattice = prune_lattice(&ExactModel::new(dem.clone()), &LatticeConfig::new(3)).unwrap();
        for (set, reason) in lattice.pruned() {
            prop_assert_eq!(*reason, PruneReason::Insignificant);
            let a = class_attenuation_true(&dem, &EventClass::all_ones(set.clone()).unwrap()).unwrap().0;
            prop_assert!(a <= 1e-9, "{set:?} pruned with a = {a}");
        }
    }

    #[test]
    fn class_attenuation_is_monotone(
        (dem, big, cut) in (3usize..=10).prop_flat_map(|n| (dem_on(n, 10, n, 0.2), sparse_subset(n), any::<prop::sample::Index>()))
    ) {
        let small: Vec<usize> = big[..1 + cut.index(big.len())].to_vec();
        let a = |s: &[usize]| class_attenuation_true(&dem, &EventClass::all_ones(s.to_vec()).unwrap()).unwrap().0;
        prop_assert!(a(&small) >= a(&big) - 1e-15);
    }

    #[test]
    fn lattice_recovers_planted_dem(dem in (4usize..=12).prop_flat_map(|n| dem_on(n, 8, 3, 0.1))) {
        let model = ExactModel::new(dem.clone());
        let lattice = prune_lattice(&model, &LatticeConfig::new(3)).unwrap();
        let est = extract_events(&lattice, &model).unwrap();
        let recovered = est.to_dem().unwrap();
        prop_assert_eq!(recovered.len(), dem.len());
        for ev in dem.events() {
            let e = est.get(&ev.mask);
            prop_assert!(e.is_some(), "missing {}", ev.mask);
            let a = ev.attenuation().unwrap().0;
            prop_assert!((e.unwrap().attenuation.value - a).abs() <= 1e-9);
        }
    }

    #[test]
    fn low_weight_matches_least_squares(
        (w, dem) in (1usize..=3).prop_flat_map(|w| (Just(w), (w.max(2)..=8).prop_flat_map(move |n| dem_on(n, 8, w, 0.2))))
    ) {
        let n = dem.n_detectors();
        let model = ExactModel::new(dem);
        let low: Vec<EventMask> = (1u64..1 << n)
            .filter(|b| b.count_ones() as usize <= w)
            .map(|b| EventMask::from_bits(n, b))
            .collect();
        let omegas = low.iter().map(|y| (y.clone(), model.depolarization_estimate(y))).collect();
        let ls = solve_selected_events(&omegas, &low).unwrap();
        let lw = low_weight_attenuations(&model, w, LowWeightMode::Cached).unwrap();
        for (set, est) in &lw {
            let m = EventMask::from_indices(n, set).unwrap();
            prop_assert!((est.value - ls[&m].value).abs() <= 1e-9, "{m}");
        }
    }
}

#[test]
fn recursive_and_cached_low_weight_agree() {
    let dem = Dem::from_pairs(&[
        ("110000", 0.05),
        ("011100", 0.02),
        ("000011", 0.03),
        ("100000", 0.01),
    ])
    .unwrap();
    let model = ExactModel::new(dem);
    let a = low_weight_attenuations(&model, 3, LowWeightMode::Cached).unwrap();
    let b = low_weight_attenuations(&model, 3, LowWeightMode::Recursive).unwrap();
    for (set, e) in &a {
        assert!((e.value - b[set].value).abs() < 1e-12);
    }
}
