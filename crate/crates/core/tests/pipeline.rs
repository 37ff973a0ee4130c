//! End-to-end runs through the public API: generate, detect, optimise,
//! simulate, compare and match.

use cdi_core::baselines::{consensus_speed_ratio, edge_edit_distance, frobenius_distance, spectral_bisection, spectral_kmeans};
use cdi_core::cdi::cdi;
use cdi_core::consensus::{convergence_rate, simulate};
use cdi_core::graph::{generate_flock, generate_knnr, load_graph, save_graph};
use cdi_core::matching::synthetic::{synthetic_subject, SubjectParams};
use cdi_core::matching::{mean_matching_communities, reduce_all};
use cdi_core::optimizer::{cdi_perturbation_opt, direct_baseline_opt, optimize_communities, OptimizerOptions};
use cdi_core::spectra::MatrixKind;

#[test]
fn detect_optimise_and_simulate() {
    let g = generate_knnr(60, 6, &[1.0, 1.0], 11).unwrap();
    let found = cdi(&g, 3, MatrixKind::Laplacian).unwrap();
    assert!(!found.communities.is_empty());
    let opt = cdi_perturbation_opt(&g, &found).unwrap();
    let c = opt.c.as_slice();
    assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(c.iter().all(|&x| x >= 0.0));
    assert!(opt.lambda1 > 0.0);
    assert_eq!(convergence_rate(&g.laplacian(), &opt.c).unwrap(), opt.lambda1);

    let t_end = 12.0 / opt.lambda1;
    let x0: Vec<f64> = (0..60).map(|i| (i as f64).cos()).collect();
    let tr = simulate(&g, &opt.c, 3.0, &x0, t_end / 200.0, t_end).unwrap();
    let last = tr.states.last().unwrap();
    assert!(last.iter().all(|x| (x - 3.0).abs() < 1e-3), "{last:?}");

    let json = opt.to_json();
    assert_eq!(json["c"].as_array().unwrap().len(), 60);
    assert!(json["lambda1"].as_f64().unwrap() > 0.0);
    assert!(json["activeCommunities"].is_array());
}

#[test]
fn community_seeded_optimisers_compare_against_direct_search() {
    let g = generate_knnr(30, 5, &[1.0, 1.0], 4).unwrap();
    let found = cdi(&g, 2, MatrixKind::Laplacian).unwrap();
    let ours = cdi_perturbation_opt(&g, &found).unwrap();
    let v1 = found.coords.v1();
    let clusters = spectral_kmeans(&g, found.communities.len(), 2).unwrap();
    let seeded = optimize_communities(&g, &clusters.ranked(&v1), &v1, &OptimizerOptions::default()).unwrap();
    let direct = direct_baseline_opt(&g, 2, 9).unwrap();
    for r in [&ours, &seeded, &direct] {
        assert!((r.c.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let ratio = consensus_speed_ratio(&ours, &direct).unwrap();
    assert!(ratio > 0.5, "{ratio}");
}

#[test]
fn saved_flock_reloads_with_positions_and_same_communities() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flock.edges");
    let g = generate_flock(150, 7, 0.2, 5).unwrap();
    save_graph(&g, &path).unwrap();
    let back = load_graph(&path).unwrap();
    assert_eq!(back, g);
    let a = cdi(&g, 3, MatrixKind::Laplacian).unwrap();
    let b = cdi(&back, 3, MatrixKind::Laplacian).unwrap();
    assert_eq!(a.communities, b.communities);
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn rescans_match_themselves_better_than_other_subjects() {
    let params = SubjectParams {
        grid: [12, 12, 12],
        semi_axes: [5.5, 5.5, 5.5],
        tracts: 3,
        min_tract_length: 5.0,
        ..SubjectParams::default()
    };
    let reduce = |seed: u64, scan: u64| {
        let s = synthetic_subject(&params, seed).unwrap().scan(0.1, 0.05, scan).unwrap();
        let found = cdi(&s.graph, 4, MatrixKind::Adjacency).unwrap();
        (reduce_all(&s.graph, &found, 0.01, "scan").unwrap(), s)
    };
    let (a1, s1) = reduce(1, 10);
    let (a2, s2) = reduce(1, 11);
    let (b1, _) = reduce(2, 12);
    let same = mean_matching_communities(&a1, &a2).unwrap().mean_matches;
    let other = mean_matching_communities(&a1, &b1).unwrap().mean_matches;
    assert!(same >= other, "same {same}, other {other}");
    assert_eq!(mean_matching_communities(&a1, &a1).unwrap().mean_matches, a1.len() as f64);

    let g1 = s1.grid_graph(params.grid).unwrap();
    let g2 = s2.grid_graph(params.grid).unwrap();
    assert!(edge_edit_distance(&g1, &g2).unwrap() > 0);
    assert!(frobenius_distance(&g1, &g2).unwrap() > 0.0);
}

#[test]
fn bisection_partitions_every_vertex() {
    let g = generate_knnr(80, 6, &[1.0, 1.0], 21).unwrap().symmetrized();
    let parts = spectral_bisection(&g, 4, 0.0).unwrap();
    assert_eq!(parts.communities.len(), 4);
    let mut all: Vec<usize> = parts.communities.concat();
    all.sort_unstable();
    assert_eq!(all, (0..80).collect::<Vec<_>>());
}
