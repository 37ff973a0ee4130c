//! Randomised invariants over small generated graphs.

use cdi_core::cdi::cdi;
use cdi_core::consensus::{PerturbationVector, RateEvaluator};
use cdi_core::graph::{generate_er_outdegree, generate_knnr, OutDegree};
use cdi_core::matching::{pair_score, VoxelCommunity};
use cdi_core::optimizer::{combine, power_transform};
use cdi_core::spectra::MatrixKind;
use proptest::prelude::*;

fn cloud(points: &[(i8, i8, i8)]) -> VoxelCommunity {
    VoxelCommunity {
        points: points.iter().map(|&(x, y, z)| [x as f64, y as f64, z as f64]).collect(),
        source_rank: 1,
        scan_id: "p".into(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalised_perturbations_sum_to_one(w in prop::collection::vec(0.0f64..5.0, 1..30)) {
        prop_assume!(w.iter().any(|&x| x > 0.0));
        let c = PerturbationVector::normalized(w).unwrap();
        prop_assert!((c.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(c.as_slice().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn power_transform_is_a_distribution(
        w in prop::collection::vec(0.0f64..1.0, 2..20),
        eta in 0.01f64..200.0,
    ) {
        prop_assume!(w.iter().any(|&x| x > 0.0));
        let p = power_transform(&w, eta).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // order of entries is preserved
        for i in 0..w.len() {
            for j in 0..w.len() {
                if w[i] > w[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn combination_stays_in_the_simplex(
        a in prop::collection::vec(0.01f64..1.0, 6),
        b in prop::collection::vec(0.01f64..1.0, 6),
        r in prop::collection::vec(0.01f64..100.0, 2),
    ) {
        let pa = power_transform(&a, 1.0).unwrap();
        let pb = power_transform(&b, 1.0).unwrap();
        let c = combine(&[pa, pb], &r).unwrap();
        prop_assert!((c.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn communities_are_disjoint_and_contain_their_leaders(n in 8usize..60, seed in 0u64..1000, er in any::<bool>()) {
        let g = if er {
            generate_er_outdegree(n, OutDegree::Uniform { min: 1, max: 3 }, seed).unwrap()
        } else {
            generate_knnr(n, 3, &[1.0, 1.0], seed).unwrap()
        };
        let r = cdi(&g, 3.min(n), MatrixKind::Laplacian).unwrap();
        let mut count = vec![0; n];
        for c in &r.communities {
            prop_assert!(c.members.binary_search(&c.leader).is_ok());
            for &v in &c.members {
                count[v] += 1;
            }
        }
        prop_assert!(count.iter().all(|&k| k <= 1));
        for &v in &r.unassigned {
            prop_assert_eq!(count[v], 0);
        }
        prop_assert_eq!(count.iter().sum::<usize>() + r.unassigned.len(), n);
    }

    #[test]
    fn rate_is_scale_monotone(seed in 0u64..500, alpha in 0.05f64..1.0) {
        let g = generate_knnr(20, 3, &[1.0, 1.0], seed).unwrap();
        let mut ev = RateEvaluator::new(&g.laplacian());
        let c = PerturbationVector::uniform_on(20, &[1, 8, 15]).unwrap().into_vec();
        let full = ev.rate(&c).unwrap();
        let scaled: Vec<f64> = c.iter().map(|x| x * alpha).collect();
        prop_assert!(ev.rate(&scaled).unwrap() <= full + 1e-12);
    }

    #[test]
    fn pair_scores_are_symmetric_and_bounded(
        a in prop::collection::vec((-5i8..5, -5i8..5, -5i8..5), 1..25),
        b in prop::collection::vec((-5i8..5, -5i8..5, -5i8..5), 1..25),
    ) {
        let (ca, cb) = (cloud(&a), cloud(&b));
        let s = pair_score(&ca, &cb).unwrap();
        prop_assert_eq!(s, pair_score(&cb, &ca).unwrap());
        prop_assert!((0.0..=100.0).contains(&s));
        prop_assert_eq!(pair_score(&ca, &ca).unwrap(), 100.0);
    }
}
