//! Property tests for the documented invariants.

mod common;

use proptest::prelude::*;

use thermovec::cooccur::{count, count_sharded, merge, SegmentWeighting, WindowConfig, WindowWeighting};
use thermovec::corpus::{build_vocabulary, Segment};
use thermovec::ensemble::{
    count_moments, enumerate_reservoir_probabilities, finite_difference_means, mean_counts,
    microstate_probabilities, reservoir_probabilities, EnsembleSpec, Microstate, ReservoirModel,
    DEFAULT_FD_STEP,
};
use thermovec::weighting::to_ppmi;

fn arb_microstate(species: usize) -> impl Strategy<Value = Microstate> {
    (
        prop::collection::vec(0u64..=2, species),
        -2.0f64..=2.0,
    )
        .prop_map(|(counts, energy)| Microstate::new(counts, energy))
}

fn arb_ensemble() -> impl Strategy<Value = EnsembleSpec> {
    (1usize..=4, 1usize..=20).prop_flat_map(|(species, states)| {
        (
            0.1f64..=5.0,
            prop::collection::vec(-2.0f64..=2.0, species),
            prop::collection::vec(arb_microstate(species), states),
        )
            .prop_map(|(beta, potentials, microstates)| EnsembleSpec {
                beta,
                potentials,
                microstates,
            })
    })
}

/// Same family, recentered so ln Z is near zero; used for the
/// finite-difference identities, which are float-noise bound.
fn arb_centered_ensemble() -> impl Strategy<Value = EnsembleSpec> {
    arb_ensemble().prop_map(|mut spec| {
        let log_z = thermovec::ensemble::log_partition(&spec).unwrap();
        for state in &mut spec.microstates {
            state.energy += log_z / spec.beta;
        }
        spec
    })
}

proptest! {
    #[test]
    fn probabilities_normalize(spec in arb_ensemble()) {
        let p = microstate_probabilities(&spec).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn derivative_identity_for_means(spec in arb_centered_ensemble()) {
        let h = DEFAULT_FD_STEP;
        let analytic = mean_counts(&spec).unwrap();
        let fd = finite_difference_means(&spec, h).unwrap();
        for (a, f) in analytic.iter().zip(&fd) {
            prop_assert!((a - f).abs() < 10.0 * h * h, "analytic {a} fd {f}");
        }
    }

    #[test]
    fn hessian_identity(spec in arb_centered_ensemble()) {
        let h = DEFAULT_FD_STEP;
        let report = count_moments(&spec).unwrap();
        prop_assert!(
            report.max_identity_deviation(spec.beta) < 100.0 * h * h,
            "deviation {}",
            report.max_identity_deviation(spec.beta)
        );
    }

    #[test]
    fn covariance_is_positive_semidefinite(spec in arb_ensemble()) {
        let report = count_moments(&spec).unwrap();
        prop_assert!(report.min_covariance_eigenvalue() > -1e-9);
    }

    #[test]
    fn energy_shift_leaves_probabilities_unchanged(
        spec in arb_ensemble(),
        shift in -20.0f64..=20.0,
    ) {
        let base = microstate_probabilities(&spec).unwrap();
        let mut shifted = spec.clone();
        for state in &mut shifted.microstates {
            state.energy += shift;
        }
        let moved = microstate_probabilities(&shifted).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reservoir_counting_matches_enumeration(
        sites in 1u64..=4,
        total_energy in 0u64..=8,
        energies in prop::collection::vec(0u64..=8, 1..=5),
        with_particles in any::<bool>(),
    ) {
        let states: Vec<Microstate> = energies
            .iter()
            .enumerate()
            .map(|(i, &e)| Microstate::new(vec![i as u64 % 3], e as f64))
            .collect();
        let model = ReservoirModel {
            system_states: states,
            reservoir_sites: sites,
            total_energy,
            total_particles: with_particles.then_some(4),
        };
        let fast = reservoir_probabilities(&model);
        let slow = enumerate_reservoir_probabilities(&model);
        match (fast, slow) {
            (Ok(fast), Ok(slow)) => {
                for (a, b) in fast.iter().zip(&slow) {
                    prop_assert!((a - b).abs() < 1e-13);
                }
            }
            // Both routes must agree that the model is infeasible.
            (Err(_), Err(_)) => {}
            (fast, slow) => prop_assert!(false, "routes disagree: {fast:?} vs {slow:?}"),
        }
    }
}

fn arb_segments() -> impl Strategy<Value = Vec<Segment>> {
    prop::collection::vec(prop::collection::vec(0u32..12, 0..24), 0..20).prop_map(|segs| {
        segs.into_iter()
            .enumerate()
            .map(|(i, ids)| Segment::with_provenance(ids, 0, i as u32))
            .collect()
    })
}

fn arb_window() -> impl Strategy<Value = WindowConfig> {
    (1u32..=5, any::<bool>(), any::<bool>(), prop::option::of(1u32..=12)).prop_map(
        |(window, harmonic, symmetric, context_limit)| WindowConfig {
            window,
            weighting: if harmonic {
                WindowWeighting::Harmonic
            } else {
                WindowWeighting::Uniform
            },
            symmetric,
            context_limit,
        },
    )
}

proptest! {
    #[test]
    fn counting_matches_pair_enumeration_oracle(
        segments in arb_segments(),
        window in arb_window(),
    ) {
        let counted = count(&segments, 12, &window, &SegmentWeighting::unit()).unwrap();
        let oracle = common::naive_cooccur_oracle(&segments, 12, &window, &SegmentWeighting::unit());
        let exact = window.weighting == WindowWeighting::Uniform;
        common::assert_matches_oracle(&counted, &oracle, exact);
    }

    #[test]
    fn sharding_is_partition_invariant(
        segments in arb_segments(),
        window in arb_window(),
        shards in 1usize..=6,
    ) {
        let single = count(&segments, 12, &window, &SegmentWeighting::unit()).unwrap();
        let sharded =
            count_sharded(&segments, 12, &window, &SegmentWeighting::unit(), shards, None)
                .unwrap();
        if window.weighting == WindowWeighting::Uniform {
            // Integer contributions: bit-exact partition invariance.
            prop_assert_eq!(single, sharded);
        } else {
            prop_assert_eq!(single.meta, sharded.meta);
            prop_assert_eq!(single.matrix.len(), sharded.matrix.len());
            for (&(r, c, a), &(r2, c2, b)) in
                single.matrix.entries().iter().zip(sharded.matrix.entries())
            {
                prop_assert_eq!((r, c), (r2, c2));
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn symmetric_windows_give_symmetric_matrices(
        segments in arb_segments(),
        window in 1u32..=4,
    ) {
        let wc = WindowConfig::new(window);
        let counted = count(&segments, 12, &wc, &SegmentWeighting::unit()).unwrap();
        prop_assert!(counted.matrix.is_symmetric());
    }

    #[test]
    fn merge_is_commutative_on_halves(
        segments in arb_segments(),
    ) {
        let wc = WindowConfig::new(2);
        let sw = SegmentWeighting::unit();
        let mid = segments.len() / 2;
        let a = count(&segments[..mid], 12, &wc, &sw).unwrap();
        let b = count(&segments[mid..], 12, &wc, &sw).unwrap();
        prop_assert_eq!(merge(&a, &b).unwrap(), merge(&b, &a).unwrap());
    }

    #[test]
    fn ppmi_is_scale_invariant(
        segments in arb_segments().prop_filter("need mass", |s| {
            s.iter().map(|x| x.ids.len()).sum::<usize>() > 4
        }),
        scale_beta in 0.25f64..=4.0,
    ) {
        let wc = WindowConfig::new(2);
        let unit = count(&segments, 12, &wc, &SegmentWeighting::unit()).unwrap();
        if unit.matrix.is_empty() {
            return Ok(());
        }
        // A different beta rescales every entry by a different global
        // constant; PPMI must not notice.
        let weighted = count(
            &segments,
            12,
            &wc,
            &SegmentWeighting { beta: scale_beta, ..SegmentWeighting::default() },
        )
        .unwrap();
        let a = to_ppmi(&unit, 1.0, 0.75).unwrap();
        let b = to_ppmi(&weighted, 1.0, 0.75).unwrap();
        prop_assert_eq!(a.matrix.len(), b.matrix.len());
        for (&(r, c, x), &(r2, c2, y)) in a.matrix.entries().iter().zip(b.matrix.entries()) {
            prop_assert_eq!((r, c), (r2, c2));
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ppmi_entries_shrink_with_shift(
        segments in arb_segments().prop_filter("need mass", |s| {
            s.iter().map(|x| x.ids.len()).sum::<usize>() > 4
        }),
        shift_a in 1.0f64..=4.0,
        delta in 0.1f64..=4.0,
    ) {
        let wc = WindowConfig::new(2);
        let counted = count(&segments, 12, &wc, &SegmentWeighting::unit()).unwrap();
        if counted.matrix.is_empty() {
            return Ok(());
        }
        let small = to_ppmi(&counted, shift_a, 0.75).unwrap();
        let large = to_ppmi(&counted, shift_a + delta, 0.75).unwrap();
        prop_assert!(large.matrix.len() <= small.matrix.len());
        for &(r, c, w) in large.matrix.entries() {
            let before = small.matrix.get(r, c).unwrap_or(0.0);
            prop_assert!(w <= before + 1e-12);
        }
    }

    #[test]
    fn sparse_ppmi_matches_dense_recomputation_on_larger_matrices(
        segments in prop::collection::vec(prop::collection::vec(0u32..150, 2..40), 5..40),
        alpha in 0.5f64..=1.0,
        shift in 1.0f64..=2.0,
    ) {
        let segments: Vec<Segment> = segments.into_iter().map(Segment::new).collect();
        let counted = count(&segments, 150, &WindowConfig::new(3), &SegmentWeighting::unit())
            .unwrap();
        if counted.matrix.is_empty() {
            return Ok(());
        }
        let sparse = to_ppmi(&counted, shift, alpha).unwrap();
        let dense = common::dense_ppmi_oracle(&counted, shift, alpha);
        for (r, row) in dense.iter().enumerate() {
            for (c, &want) in row.iter().enumerate() {
                let got = sparse.matrix.get(r as u32, c as u32).unwrap_or(0.0);
                prop_assert!((got - want).abs() < 1e-12, "({r},{c}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn vocabulary_is_deterministic_and_round_trips(
        tokens in prop::collection::vec(prop::collection::vec("[a-e]{1,3}", 1..8), 1..10),
        min_count in 1u64..=3,
    ) {
        let v1 = build_vocabulary(tokens.clone(), min_count).unwrap();
        let v2 = build_vocabulary(tokens, min_count).unwrap();
        prop_assert_eq!(&v1, &v2);
        for id in 0..v1.len() as u32 {
            let token = v1.token(id).unwrap();
            prop_assert_eq!(v1.id(token), Some(id));
            prop_assert!(v1.frequency(id).unwrap() >= min_count);
        }
    }
}
