//! Property tests over randomized inputs.

use num_complex::Complex64;
use proptest::prelude::*;

use sepsim_core::algebra::{pauli_decompose_2, pauli_decompose_4, HermitianMatrix};
use sepsim_core::inference::evidence;
use sepsim_core::simulator::{simulate, ConditionRecord, Events, OutcomeModel};
use sepsim_core::stats::{summarize, EprbCounts, SgCounts, SummaryStatistics};
use sepsim_core::vec3::UnitVector;

fn unit_vector() -> impl Strategy<Value = UnitVector> {
    // Sample directions by normalizing a nonzero box sample.
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter_map("degenerate direction", |(x, y, z)| {
            UnitVector::normalized([x, y, z]).ok()
        })
}

fn hermitian(dim: usize) -> impl Strategy<Value = HermitianMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * dim * dim).prop_map(move |raw| {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        let mut k = 0;
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(raw[k], 0.0);
            k += 1;
            for j in (i + 1)..dim {
                let z = Complex64::new(raw[k], raw[k + 1]);
                k += 2;
                entries[i * dim + j] = z;
                entries[j * dim + i] = z.conj();
            }
        }
        HermitianMatrix::from_entries(dim, entries).expect("Hermitian by construction")
    })
}

fn model() -> impl Strategy<Value = OutcomeModel> {
    prop_oneof![
        Just(OutcomeModel::QuantumSg),
        Just(OutcomeModel::Quadratic),
        (0.0f64..=1.0).prop_map(|lambda| OutcomeModel::ScaledCosine { lambda }),
        (0u32..4, -3.2f64..3.2).prop_map(|(k, phi)| OutcomeModel::CosineK { k, phi }),
    ]
}

proptest! {
    #[test]
    fn pauli_round_trip_is_identity(h in hermitian(2)) {
        let back = pauli_decompose_2(&h).unwrap().matrix();
        prop_assert!(h.frobenius_distance(&back).unwrap() < 1e-12);
    }

    #[test]
    fn pauli_round_trip_is_identity_dim4(h in hermitian(4)) {
        let back = pauli_decompose_4(&h).unwrap().matrix();
        prop_assert!(h.frobenius_distance(&back).unwrap() < 1e-12);
    }

    #[test]
    fn outcome_distributions_sum_to_one(model in model(), a in unit_vector(), m in unit_vector()) {
        let condition = ConditionRecord::Sg { a, m, z: String::new() };
        let cells = model.outcome_distribution(&condition).unwrap();
        prop_assert_eq!(cells.iter().sum::<f64>(), 1.0);
        prop_assert!(cells.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn simulation_is_deterministic_and_well_formed(
        seed in any::<u64>(),
        n in 0u64..2_000,
        theta in 0.0f64..std::f64::consts::PI,
    ) {
        let condition = ConditionRecord::Eprb {
            a1: UnitVector::Z,
            a2: UnitVector::polar(theta),
            m1: UnitVector::Z,
            m2: UnitVector::Z,
            z: String::new(),
        };
        let a = simulate(&OutcomeModel::QuantumEprb, &condition, n, seed).unwrap();
        let b = simulate(&OutcomeModel::QuantumEprb, &condition, n, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.n(), n);
        if let Events::Eprb(pairs) = &a.events {
            prop_assert!(pairs.iter().all(|&(x, y)| (x == 1 || x == -1) && (y == 1 || y == -1)));
        }
    }

    #[test]
    fn moment_reparameterization_reproduces_frequencies(
        pp in 0u64..5_000, pm in 0u64..5_000, mp in 0u64..5_000, mm in 1u64..5_000,
    ) {
        let counts = EprbCounts { pp, pm, mp, mm };
        let s = SummaryStatistics::from_eprb_counts(counts).unwrap();
        let n = s.n() as f64;
        prop_assert!(s.mean_x().abs() <= 1.0);
        prop_assert!(s.corr_xy().unwrap().abs() <= 1.0);
        for ((x, y), count) in [(1i8, 1i8), (1, -1), (-1, 1), (-1, -1)]
            .into_iter()
            .zip(counts.as_array())
        {
            let f = s.frequency(x, Some(y)).unwrap();
            prop_assert!((f - count as f64 / n).abs() < 1e-12);
        }
    }

    #[test]
    fn summarize_matches_event_recount(seed in any::<u64>(), n in 1u64..3_000) {
        let condition = ConditionRecord::Sg {
            a: UnitVector::polar(1.0),
            m: UnitVector::Z,
            z: String::new(),
        };
        let dataset = simulate(&OutcomeModel::QuantumSg, &condition, n, seed).unwrap();
        let s = summarize(&dataset).unwrap();
        if let Events::Sg(xs) = &dataset.events {
            let plus = xs.iter().filter(|&&x| x == 1).count() as u64;
            prop_assert_eq!(s.n(), n);
            match s {
                SummaryStatistics::Sg { counts, .. } => {
                    prop_assert_eq!(counts, SgCounts { plus, minus: n - plus });
                }
                _ => prop_assert!(false),
            }
        }
    }

    #[test]
    fn evidence_antisymmetry(
        plus in 1u64..5_000,
        minus in 1u64..5_000,
        theta in 0.3f64..2.8,
        epsilon in -0.2f64..0.2,
    ) {
        let counts = SummaryStatistics::from_sg_counts(SgCounts { plus, minus }).unwrap();
        let model = OutcomeModel::QuantumSg;
        // Keep both angles away from the degenerate endpoints.
        prop_assume!(theta + epsilon > 0.05 && theta + epsilon < std::f64::consts::PI - 0.05);
        let forward = evidence(&counts, theta, epsilon, &model).unwrap();
        let backward = evidence(&counts, theta + epsilon, -epsilon, &model).unwrap();
        // The ratio inversion is an exact negation whenever the perturbed
        // angle round-trips in floating point (see the dyadic-angle unit
        // test); for arbitrary angles `theta + epsilon - epsilon` itself
        // rounds, leaving an ulp-level remainder.
        let scale = 1.0 + forward.ev.abs();
        prop_assert!((forward.ev + backward.ev).abs() <= 1e-12 * scale);
    }
}
