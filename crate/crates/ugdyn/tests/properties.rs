//! Property tests over randomly drawn instances, assignments and sample
//! streams.

use proptest::prelude::*;
use ugdyn::analysis::ResidencyAccumulator;
use ugdyn::cnf::{decode_assignment, encode, encode_assignment};
use ugdyn::instance::{Assignment, TwoLinEquation, TwoLinInstance};

fn arb_instance() -> impl Strategy<Value = TwoLinInstance> {
    // A path over all variables keeps every variable used; extra random
    // diagonals are deduplicated by unordered pair.
    (3usize..=6, 2u32..=5).prop_flat_map(|(n_x, k)| {
        let path = proptest::collection::vec(0..k, n_x - 1);
        let extras = proptest::collection::vec((0..n_x, 0..n_x, 0..k), 0..6);
        (path, extras).prop_map(move |(path_offsets, extras)| {
            let mut seen: std::collections::HashSet<(usize, usize)> =
                (0..n_x - 1).map(|i| (i, i + 1)).collect();
            let mut equations: Vec<TwoLinEquation> = path_offsets
                .into_iter()
                .enumerate()
                .map(|(i, b)| TwoLinEquation { i, j: i + 1, b })
                .collect();
            for (i, j, b) in extras {
                let (i, j) = (i.min(j), i.max(j));
                if i != j && seen.insert((i, j)) {
                    equations.push(TwoLinEquation { i, j, b });
                }
            }
            TwoLinInstance {
                k,
                n_x,
                equations,
                designed_opt: None,
            }
        })
    })
}

fn arb_assignment(n_x: usize, k: u32) -> impl Strategy<Value = Assignment> {
    proptest::collection::vec(0..k, n_x).prop_map(|values| Assignment { values })
}

proptest! {
    #[test]
    fn instance_text_round_trip(instance in arb_instance()) {
        let text = instance.to_text();
        let back = TwoLinInstance::from_text(&text).expect("own output parses");
        prop_assert_eq!(instance, back);
    }

    #[test]
    fn decode_inverts_encode((instance, seed) in arb_instance().prop_flat_map(|inst| {
        let n_x = inst.n_x;
        let k = inst.k;
        (Just(inst), arb_assignment(n_x, k))
    })) {
        let assignment = seed;
        let formula = encode(&instance).expect("encodable");
        let s = encode_assignment(&formula, &assignment, &instance).expect("in range");
        prop_assert_eq!(decode_assignment(&s, &formula), assignment);
    }

    #[test]
    fn residency_is_monotone_in_delta(
        samples in proptest::collection::vec((any::<bool>(), 0.0f64..=1.0), 1..200),
    ) {
        let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let mut acc = ResidencyAccumulator::new(grid, 0.1).expect("valid grid");
        for (in_vicinity, sat_frac) in samples {
            acc.add_sample(in_vicinity, sat_frac, 0.1);
        }
        acc.bump_ensemble();
        let table = acc.finish();
        if !table.is_empty() {
            prop_assert!(table.y_values.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(table.y_values_total.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(table.y_values.iter().all(|y| (0.0..=1.0).contains(y)));
        }
        let reconstructed = table.vicinity_time + table.transient_time;
        prop_assert!((reconstructed - table.total_time).abs() <= 1e-9 * table.total_time.max(1.0));
    }

    #[test]
    fn satisfied_count_is_within_range(
        (instance, assignment) in arb_instance().prop_flat_map(|inst| {
            let n_x = inst.n_x;
            let k = inst.k;
            (Just(inst), arb_assignment(n_x, k))
        }),
    ) {
        let count = instance.satisfied_count(&assignment).expect("valid dims");
        prop_assert!(count <= instance.n_eq());
    }
}
