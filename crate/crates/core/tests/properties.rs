use catsim::channels::{loss_channel, lossy_number_povm, ExperimentParams};
use catsim::fock::{fidelity, DensityMatrix, HilbertConfig, SqueezeSpec};
use catsim::phase_space::{marginal_at, origin_parity, wigner_point};
use catsim::sampler::{HomodyneDataset, HomodyneRecord};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn state_strategy(cutoff: usize) -> impl Strategy<Value = DensityMatrix> {
    let d = cutoff + 1;
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |v| {
        let g = DMatrix::from_iterator(d, d, v.into_iter().map(|(re, im)| Complex64::new(re, im)));
        DensityMatrix::from_operator(&g * g.adjoint() + DMatrix::identity(d, d) * Complex64::new(1e-6, 0.0), HilbertConfig::new(cutoff).unwrap())
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_keeps_trace_and_positivity(rho in state_strategy(6), eta in 0.0f64..=1.0) {
        let out = loss_channel(&rho, eta).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-12);
        prop_assert!(out.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn loss_composes(rho in state_strategy(5), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let two = loss_channel(&loss_channel(&rho, a).unwrap(), b).unwrap();
        let one = loss_channel(&rho, a * b).unwrap();
        prop_assert!((two.elements() - one.elements()).camax() < 1e-10);
    }

    #[test]
    fn lossy_povm_is_complete(eta in 0.0f64..=1.0, cutoff in 1usize..14) {
        let mut total = vec![0.0; cutoff + 1];
        for n in 0..=cutoff {
            for (m, w) in lossy_number_povm(n, eta, cutoff).unwrap().weights.iter().enumerate() {
                prop_assert!(*w >= 0.0);
                total[m] += w;
            }
        }
        prop_assert!(total.iter().all(|t| (t - 1.0).abs() < 1e-12));
    }

    #[test]
    fn wigner_origin_is_parity(rho in state_strategy(7)) {
        prop_assert!((wigner_point(&rho, 0.0, 0.0) - origin_parity(&rho)).abs() < 1e-12);
        prop_assert!(origin_parity(&rho).abs() <= 1.0 / std::f64::consts::PI + 1e-12);
    }

    #[test]
    fn rotation_moves_marginals(rho in state_strategy(5), theta in -3.2f64..3.2) {
        let points = [-1.1, 0.0, 0.7, 2.0];
        let rotated = rho.phase_rotated(theta);
        let direct = marginal_at(&rho, theta, &points);
        let via_rotation = marginal_at(&rotated, 0.0, &points);
        for (a, b) in direct.iter().zip(via_rotation) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((fidelity(&rotated.phase_rotated(-theta), &rho).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn experiment_kv_round_trip(
        db in 0.0f64..12.0,
        opa in 0.0f64..=1.0,
        refl in 0.01f64..=1.0,
        eta_i in 0.0f64..=1.0,
        eta_s in 0.0f64..=1.0,
        herald in 0usize..=8,
    ) {
        let params = ExperimentParams {
            squeeze: SqueezeSpec::from_db(db),
            opa_loss: opa,
            bs_reflectivity: refl,
            idler_efficiency: eta_i,
            signal_efficiency: eta_s,
            herald_n: herald,
            ..ExperimentParams::paper_default()
        };
        let back = ExperimentParams::from_kv_str(&params.to_kv_string()).unwrap();
        prop_assert_eq!(back, params);
    }

    #[test]
    fn dataset_csv_round_trip(qs in prop::collection::vec(-7.0f64..7.0, 1..40), phase in -90.0f64..=90.0) {
        let records: Vec<HomodyneRecord> = qs.iter().map(|&q| HomodyneRecord { theta_deg: phase, q }).collect();
        let data = HomodyneDataset::from_records(records, "prop", Some(3)).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = HomodyneDataset::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, data);
    }
}
